//! Front tracking of a single-material shock tube, projected on a mesh.

use abinitio::eos::{EosParams, FullState, PhaseState};
use abinitio::front_tracking::{simulate, FtConfig, StepMode};
use abinitio::mesh::Mesh;

fn main() -> abinitio::Result<()> {
    let gas = EosParams::ideal_gas(1.4);
    let left = FullState::validated(PhaseState::new(1.0, 0.0, 1.0), gas)?;
    let right = FullState::validated(PhaseState::new(0.125, 0.0, 0.1), gas)?;
    let mesh = Mesh::new(-1.0, 1.0, 40)?;
    let ft = FtConfig::new([0.02, 0.02], StepMode::Cfl { cfl: 0.9 });

    let mut steps = 0;
    let end = simulate(
        &[-1.0, 0.0, 1.0],
        &[left, right],
        [gas, gas],
        &mesh,
        &ft,
        &[0.25],
        |_, avg, _| {
            println!("{:>8} {:>10} {:>10} {:>10}", "x", "rho", "u", "p");
            for i in (0..mesh.cells).step_by(2) {
                let w = avg.states[i][0].expect("single phase fills the domain");
                println!(
                    "{:>8.3} {:>10.5} {:>10.5} {:>10.5}",
                    mesh.center(i),
                    w.rho(),
                    w.u(),
                    w.p()
                );
            }
        },
        |_, _| steps += 1,
    )?;
    println!(
        "{steps} steps, {} fronts, {} collisions",
        end.len(),
        end.collisions()
    );
    Ok(())
}
