//! Cauchy-rate sweep over the sample count, plus a CSV round trip and
//! run-to-run comparison in a scratch directory.

use abinitio::harness::{
    compare_runs, run_case, run_convergence, Axis, CaseName, ExperimentConfig, Solver,
};

fn main() -> abinitio::Result<()> {
    let mut cfg = ExperimentConfig::preset(CaseName::MechEquilibrium, Solver::Abinitio, false);
    cfg.cells = 50;
    cfg.abinitio.sampler = abinitio::ensemble::SamplerConfig::Uniform {
        n: 64,
        mode: abinitio::microscale::SubvolumeMode::Uniform,
    };

    let report = run_convergence(&cfg, Axis::Samples, &[8, 16, 32, 64, 128], None)?;
    for s in &report.means {
        let rates: Vec<String> = s.rates.iter().map(|r| format!("{r:.2e}")).collect();
        println!(
            "{:<7} slope {:>7} rates {}",
            s.name,
            s.slope.map_or("-".into(), |q| format!("{q:.3}")),
            rates.join(" ")
        );
    }

    let dir = std::env::temp_dir().join(format!("abinitio-example-{}", std::process::id()));
    cfg.abinitio.samples = 32;
    let a = run_case(&cfg, &dir.join("seed1"))?;
    cfg.seed = 2;
    run_case(&cfg, &dir.join("seed2"))?;
    println!(
        "wrote {} files per run under {}",
        a.files.len(),
        dir.display()
    );
    for (name, d) in compare_runs(&dir.join("seed1"), &dir.join("seed2"))? {
        println!("L1 {name:<8} {d:.3e}");
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
