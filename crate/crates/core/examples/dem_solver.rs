//! Discrete equation method on the two-phase shock tube for both limits of
//! the interface probability parameter.

use abinitio::dem::{run_dem, DemState};
use abinitio::harness::{CaseName, ExperimentConfig, Solver};

fn main() -> abinitio::Result<()> {
    let mut cfg = ExperimentConfig::preset(CaseName::Sod2p, Solver::Dem, false);
    cfg.cells = 100;
    let initial = DemState::from_cells(cfg.mesh()?, cfg.eos, &cfg.cell_specs()?)?;
    let mut finals = Vec::new();
    for r in [0.0, 1.0] {
        let mut dem = cfg.dem.clone();
        dem.r = r;
        let (snaps, steps) = run_dem(&initial, &dem, &[cfg.end_time])?;
        println!("r = {r}: {steps} steps");
        finals.push(
            snaps
                .into_iter()
                .next_back()
                .expect("end-time snapshot")
                .to_stats()?,
        );
    }
    println!(
        "{:>7} {:>9} {:>9} {:>9} {:>9}",
        "x", "alpha1 r0", "alpha1 r1", "p1 r0", "p1 r1"
    );
    for i in (0..cfg.cells).step_by(5) {
        println!(
            "{:>7.3} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            initial.mesh.center(i),
            finals[0].phases[0].alpha[i],
            finals[1].phases[0].alpha[i],
            finals[0].phases[0].p[i],
            finals[1].phases[0].p[i]
        );
    }
    Ok(())
}
