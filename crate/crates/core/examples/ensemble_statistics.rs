//! Monte-Carlo ensemble of the two-phase shock tube with Favre statistics.

use abinitio::harness::{execute, CaseName, ExperimentConfig, Solver};

fn main() -> abinitio::Result<()> {
    let mut cfg = ExperimentConfig::preset(CaseName::Sod2p, Solver::Abinitio, false);
    cfg.cells = 20;
    cfg.abinitio.samples = 16;
    let run = execute(&cfg)?;
    let stats = run.stats.last().expect("end-time statistics");
    println!(
        "{} samples, {} collisions, {:.2} s",
        stats.samples, run.work, run.wall_time
    );
    println!(
        "{:>7} {:>8} {:>9} {:>9} {:>9} {:>9}",
        "x", "alpha1", "rho1", "std", "p1", "std"
    );
    let ph = &stats.phases[0];
    for i in 0..run.mesh.cells {
        println!(
            "{:>7.3} {:>8.4} {:>9.5} {:>9.2e} {:>9.5} {:>9.2e}",
            run.mesh.center(i),
            ph.alpha[i],
            ph.rho[i],
            ph.rho_var[i].sqrt(),
            ph.p[i],
            ph.p_var[i].sqrt()
        );
    }
    Ok(())
}
