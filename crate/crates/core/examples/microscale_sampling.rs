//! Sub-scale phase layouts from the equispaced and Gaussian-process samplers.

use abinitio::eos::{EosParams, FullState, PhaseState};
use abinitio::mesh::Mesh;
use abinitio::microscale::{
    generate_gp, generate_uniform, realized_fraction, uniform_space_size, GpConfig, MacroCellSpec,
    SubvolumeMode,
};

fn main() -> abinitio::Result<()> {
    let gas = EosParams::ideal_gas(1.4);
    let w = FullState::validated(PhaseState::new(1.0, 0.0, 1.0), gas)?;
    let mesh = Mesh::new(0.0, 1.0, 4)?;
    let cells: Vec<MacroCellSpec> = (0..mesh.cells)
        .map(|i| MacroCellSpec {
            lo: mesh.edge(i),
            hi: mesh.edge(i + 1),
            alpha: 0.2 + 0.2 * i as f64,
            states: [w, w],
        })
        .collect();

    println!(
        "layouts per cell with N = 12, N1 = 5: {}",
        uniform_space_size(12, 5)
    );
    for mode in [SubvolumeMode::Uniform, SubvolumeMode::Random] {
        let layout = generate_uniform(&cells, 12, mode, 42, 0).layout();
        println!("{mode:?}: {} pieces", layout.len());
        for c in &cells {
            println!(
                "  cell [{:.2}, {:.2}] target {:.2} realized {:.4}",
                c.lo,
                c.hi,
                c.alpha,
                realized_fraction(&layout, c.lo, c.hi, 0)
            );
        }
    }

    let layout = generate_gp(&cells, GpConfig::new(1.5, 0.06, 0.01), 42, 0)?.layout();
    println!(
        "Gaussian process (Matern 3/2, length 0.06): {} pieces",
        layout.len()
    );
    for c in &cells {
        println!(
            "  cell [{:.2}, {:.2}] target {:.2} realized {:.4}",
            c.lo,
            c.hi,
            c.alpha,
            realized_fraction(&layout, c.lo, c.hi, 0)
        );
    }
    Ok(())
}
