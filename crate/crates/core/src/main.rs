use std::path::PathBuf;
use std::process::ExitCode;

use abinitio::harness::{
    compare_runs, run_case, run_convergence, Axis, CaseName, ExperimentConfig, Solver,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    version,
    about = "Ensemble two-phase flow solver and discrete equation method"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// mech-equilibrium, relaxation, sod2p, lax2p or custom
    case: CaseName,
    #[arg(long, default_value = "abinitio")]
    solver: Solver,
    /// TOML file overriding the case defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the full-scale resolutions instead of desk-scale defaults
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "ABINITIO_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> abinitio::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(
            self.case,
            self.solver,
            self.paper_scale,
            self.config.as_deref(),
        )?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, suffix: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| {
            PathBuf::from("runs").join(format!(
                "{}_{}{suffix}",
                self.case.as_str(),
                self.solver.as_str()
            ))
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one case and write statistics CSVs
    Run(Common),
    /// Sweep one parameter and report Cauchy rates
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: Axis,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        points: Vec<usize>,
    },
    /// L1 distances between two statistics CSVs (or run directories)
    Compare { a: PathBuf, b: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> abinitio::Result<()> {
    match cli.cmd {
        Cmd::Run(common) => {
            let cfg = common.config()?;
            let out = common.out_dir("");
            let res = run_case(&cfg, &out)?;
            println!(
                "wrote {} files to {} in {:.2} s",
                res.files.len(),
                out.display(),
                res.wall_time
            );
        }
        Cmd::Converge {
            common,
            axis,
            points,
        } => {
            let cfg = common.config()?;
            let out = common.out_dir("_converge");
            let report = run_convergence(&cfg, axis, &points, Some(&out))?;
            println!("{:<10} {:>12}  rates", "field", "slope");
            for (kind, list) in [("mean", &report.means), ("var", &report.variances)] {
                for s in list {
                    let slope = s.slope.map_or("-".to_string(), |q| format!("{q:.4}"));
                    let rates: Vec<String> = s.rates.iter().map(|r| format!("{r:.3e}")).collect();
                    println!(
                        "{:<10} {slope:>12}  {}",
                        format!("{kind}:{}", s.name),
                        rates.join(" ")
                    );
                }
            }
            println!("report written to {}", out.display());
        }
        Cmd::Compare { a, b } => {
            for (name, d) in compare_runs(&a, &b)? {
                println!("{name:<12} {d:.6e}");
            }
        }
    }
    Ok(())
}
