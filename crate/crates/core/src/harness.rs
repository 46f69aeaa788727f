//! Experiment definitions, configuration files, CSV output, convergence
//! sweeps and run comparison.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dem::{run_dem_with, DemConfig, DemState};
use crate::ensemble::{run_ensemble, EnsembleConfig, SamplerConfig, TimeseriesPoint};
use crate::eos::{ConservedState, EosParams, FullState, PhaseState};
use crate::error::{Error, Result};
use crate::front_tracking::{FtConfig, StepMode};
use crate::mesh::Mesh;
use crate::microscale::{MacroCellSpec, SubvolumeMode};
use crate::stats::{loglog_fit, FavreStats};

/// Version of the CSV and metadata layout.
pub const FORMAT_VERSION: u32 = 1;
/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "ABINITIO_WORKERS";

/// End time of the relaxation case; short enough that the interface
/// cascade stays affordable on a workstation.
pub const RELAXATION_END_TIME: f64 = 0.0025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseName {
    #[serde(alias = "mech-eq")]
    MechEquilibrium,
    Relaxation,
    Sod2p,
    Lax2p,
    Custom,
}

impl CaseName {
    pub const ALL: [CaseName; 5] = [
        CaseName::MechEquilibrium,
        CaseName::Relaxation,
        CaseName::Sod2p,
        CaseName::Lax2p,
        CaseName::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::MechEquilibrium => "mech-equilibrium",
            CaseName::Relaxation => "relaxation",
            CaseName::Sod2p => "sod2p",
            CaseName::Lax2p => "lax2p",
            CaseName::Custom => "custom",
        }
    }
}

impl FromStr for CaseName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "mech-eq" {
            return Ok(CaseName::MechEquilibrium);
        }
        CaseName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown case '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Abinitio,
    Dem,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Abinitio => "abinitio",
            Solver::Dem => "dem",
        }
    }
}

impl FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abinitio" => Ok(Solver::Abinitio),
            "dem" => Ok(Solver::Dem),
            _ => Err(Error::Config(format!("unknown solver '{s}'"))),
        }
    }
}

/// Piecewise-constant initial data: the region applies up to `upto`; the
/// last region extends to the right end of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub upto: f64,
    pub alpha: f64,
    pub phase1: PhaseState,
    pub phase2: PhaseState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbinitioParams {
    pub samples: usize,
    pub sampler: SamplerConfig,
    pub ft: FtConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub case: CaseName,
    pub solver: Solver,
    pub seed: u64,
    /// Worker threads; 0 picks the environment default.
    pub workers: usize,
    pub domain: [f64; 2],
    pub cells: usize,
    pub end_time: f64,
    /// Extra output times before the end time.
    #[serde(default)]
    pub outputs: Vec<f64>,
    pub eos: [EosParams; 2],
    pub regions: Vec<Region>,
    pub abinitio: AbinitioParams,
    pub dem: DemConfig,
}

fn two_state(upto: f64, alpha: [f64; 2], l: [PhaseState; 2], r: [PhaseState; 2]) -> Vec<Region> {
    vec![
        Region {
            upto,
            alpha: alpha[0],
            phase1: l[0],
            phase2: l[1],
        },
        Region {
            upto: f64::MAX,
            alpha: alpha[1],
            phase1: r[0],
            phase2: r[1],
        },
    ]
}

impl ExperimentConfig {
    /// Built-in case at desk scale or at full-scale resolution.
    pub fn preset(case: CaseName, solver: Solver, paper_scale: bool) -> Self {
        let ig = [EosParams::ideal_gas(1.4), EosParams::ideal_gas(1.6)];
        let w = PhaseState::new;
        let cfl = StepMode::Cfl { cfl: 0.9 };
        // (eos, regions, end time, abinitio M, N, L, delta, step, dem M)
        let (eos, regions, end_time, m, n, l, delta, step, dem_m) = match case {
            CaseName::MechEquilibrium => (
                ig,
                two_state(
                    0.0,
                    [0.9, 0.1],
                    [w(1.0, 0.9, 0.3); 2],
                    [w(0.125, 0.9, 0.3); 2],
                ),
                0.1,
                if paper_scale { 1000 } else { 100 },
                if paper_scale { 16384 } else { 128 },
                if paper_scale { 1024 } else { 16 },
                [0.01, 0.01],
                cfl,
                if paper_scale { 10000 } else { 200 },
            ),
            CaseName::Relaxation => (
                ig,
                vec![Region {
                    upto: f64::MAX,
                    alpha: 0.9,
                    phase1: w(1.0, 0.0, 1.0),
                    phase2: w(0.125, 0.0, 0.1),
                }],
                RELAXATION_END_TIME,
                if paper_scale { 1000 } else { 200 },
                if paper_scale { 2000 } else { 100 },
                if paper_scale { 1000 } else { 64 },
                [0.1, 0.1],
                StepMode::Equispaced { steps: 100 },
                if paper_scale { 10000 } else { 200 },
            ),
            CaseName::Sod2p => (
                ig,
                two_state(
                    0.0,
                    [0.9, 0.1],
                    [w(1.0, 0.0, 1.0); 2],
                    [w(0.125, 0.0, 0.1); 2],
                ),
                0.4,
                if paper_scale { 500 } else { 200 },
                if paper_scale { 6400 } else { 32 },
                if paper_scale { 1000 } else { 64 },
                [0.05, 0.05],
                cfl,
                if paper_scale { 10000 } else { 200 },
            ),
            CaseName::Lax2p => (
                [
                    EosParams::ideal_gas(1.4),
                    EosParams::stiffened_gas(1.6, 2.5),
                ],
                two_state(
                    0.0,
                    [0.9, 0.1],
                    [w(0.2, 0.7, 3.5), w(1.0, 0.7, 3.5)],
                    [w(0.2, 0.0, 0.1), w(1.0, 0.0, 0.1)],
                ),
                0.25,
                if paper_scale { 500 } else { 200 },
                if paper_scale { 5000 } else { 16 },
                if paper_scale { 1000 } else { 64 },
                [0.05, 0.1],
                cfl,
                if paper_scale { 10000 } else { 200 },
            ),
            CaseName::Custom => (
                ig,
                vec![Region {
                    upto: f64::MAX,
                    alpha: 1.0,
                    phase1: w(1.0, 0.0, 1.0),
                    phase2: w(1.0, 0.0, 1.0),
                }],
                0.1,
                100,
                16,
                16,
                [0.05, 0.05],
                cfl,
                100,
            ),
        };
        let mut ft = FtConfig::new(delta, step);
        // reflections off many material interfaces cascade below this
        match case {
            CaseName::Sod2p => ft.min_strength = 1e-4,
            CaseName::Lax2p => ft.min_strength = 1e-3,
            _ => {}
        }
        ExperimentConfig {
            format_version: FORMAT_VERSION,
            case,
            solver,
            seed: 1,
            workers: 0,
            domain: [-1.0, 1.0],
            cells: if solver == Solver::Dem { dem_m } else { m },
            end_time,
            outputs: Vec::new(),
            eos,
            regions,
            abinitio: AbinitioParams {
                samples: l,
                sampler: SamplerConfig::Uniform {
                    n,
                    mode: SubvolumeMode::Uniform,
                },
                ft,
            },
            dem: DemConfig::new(0.0),
        }
    }

    /// Preset for `case` overlaid with the keys of a TOML file.
    pub fn load(
        case: CaseName,
        solver: Solver,
        paper_scale: bool,
        file: Option<&Path>,
    ) -> Result<Self> {
        let base = Self::preset(case, solver, paper_scale);
        let Some(path) = file else {
            base.validate()?;
            return Ok(base);
        };
        let text = fs::read_to_string(path)?;
        Self::overlay(base, &text)
    }

    /// Apply TOML `text` on top of `base`; tables merge key by key.
    pub fn overlay(base: Self, text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(c) = user.get("case").and_then(|v| v.as_str()) {
            if CaseName::from_str(c)? != base.case {
                return Err(Error::Config(format!(
                    "config is for case '{c}', not '{}'",
                    base.case.as_str()
                )));
            }
        }
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        merge_tables(&mut merged, user);
        let cfg: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Config(s));
        if self.format_version != FORMAT_VERSION {
            return bad(format!(
                "format version {} is not {FORMAT_VERSION}",
                self.format_version
            ));
        }
        self.mesh()?;
        if !(self.end_time > 0.0) {
            return bad(format!("end time {} must be positive", self.end_time));
        }
        if self
            .outputs
            .iter()
            .any(|&t| !(t > 0.0 && t <= self.end_time))
        {
            return bad("output times must lie in (0, end_time]".into());
        }
        if self.regions.is_empty() {
            return bad("at least one initial region is required".into());
        }
        if self.regions.windows(2).any(|w| !(w[1].upto > w[0].upto)) {
            return bad("region bounds must increase".into());
        }
        for e in &self.eos {
            e.validate()?;
        }
        for r in &self.regions {
            if !(0.0..=1.0).contains(&r.alpha) {
                return bad(format!("volume fraction {} outside [0, 1]", r.alpha));
            }
            r.phase1.validate(&self.eos[0])?;
            r.phase2.validate(&self.eos[1])?;
        }
        if self.abinitio.samples == 0 {
            return bad("sample count must be positive".into());
        }
        if let SamplerConfig::Uniform { n: 0, .. } = self.abinitio.sampler {
            return bad("sub-volume count must be positive".into());
        }
        self.abinitio.ft.validate()?;
        self.dem.validate(self.cells)
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::new(self.domain[0], self.domain[1], self.cells)
    }

    /// Sorted output times ending at the end time.
    pub fn output_times(&self) -> Vec<f64> {
        let mut t = self.outputs.clone();
        t.push(self.end_time);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn resolved_workers(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            default_workers()
        }
    }

    /// Cell averages of the initial regions.
    pub fn cell_specs(&self) -> Result<Vec<MacroCellSpec>> {
        let mesh = self.mesh()?;
        let bounds: Vec<(f64, f64)> = self
            .regions
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let lo = if j == 0 {
                    mesh.lo
                } else {
                    self.regions[j - 1].upto.max(mesh.lo)
                };
                let hi = if j + 1 == self.regions.len() {
                    mesh.hi
                } else {
                    r.upto.min(mesh.hi)
                };
                (lo, hi)
            })
            .collect();
        (0..mesh.cells)
            .map(|i| {
                let (lo, hi) = (mesh.edge(i), mesh.edge(i + 1));
                let parts: Vec<(f64, &Region)> = bounds
                    .iter()
                    .zip(&self.regions)
                    .filter_map(|(&(a, b), r)| {
                        let w = (hi.min(b) - lo.max(a)) / (hi - lo);
                        (w > 0.0).then_some((w, r))
                    })
                    .collect();
                if let [(_, r)] = parts[..] {
                    return Ok(MacroCellSpec {
                        lo,
                        hi,
                        alpha: r.alpha,
                        states: [
                            FullState::new(r.phase1, self.eos[0]),
                            FullState::new(r.phase2, self.eos[1]),
                        ],
                    });
                }
                let alpha: f64 = parts.iter().map(|(w, r)| w * r.alpha).sum();
                let mut states = [FullState::new(parts[0].1.phase1, self.eos[0]); 2];
                for k in 0..2 {
                    let frac = |r: &Region| if k == 0 { r.alpha } else { 1.0 - r.alpha };
                    let total: f64 = parts.iter().map(|(w, r)| w * frac(r)).sum();
                    let mut acc = ConservedState::default();
                    for (w, r) in &parts {
                        let s = if k == 0 { r.phase1 } else { r.phase2 };
                        let weight = if total > 0.0 { w * frac(r) / total } else { *w };
                        acc.add_scaled(&ConservedState::from_primitive(&s, &self.eos[k]), weight);
                    }
                    states[k] = FullState::new(acc.to_primitive(&self.eos[k])?, self.eos[k]);
                }
                Ok(MacroCellSpec {
                    lo,
                    hi,
                    alpha,
                    states,
                })
            })
            .collect()
    }

    pub fn ensemble_config(&self) -> Result<EnsembleConfig> {
        Ok(EnsembleConfig {
            mesh: self.mesh()?,
            cells: self.cell_specs()?,
            phases: self.eos,
            sampler: self.abinitio.sampler,
            ft: self.abinitio.ft,
            samples: self.abinitio.samples,
            outputs: self.output_times(),
            seed: self.seed,
            workers: self.resolved_workers(),
        })
    }
}

fn merge_tables(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Worker count from the environment, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&w: &usize| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// In-memory result of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub mesh: Mesh,
    pub times: Vec<f64>,
    pub stats: Vec<FavreStats>,
    pub timeseries: Vec<TimeseriesPoint>,
    /// Expected interfaces per unit length per cell (ab-initio only).
    pub interface_density: Vec<f64>,
    /// Collisions (ab-initio) or time steps (DEM).
    pub work: u64,
    pub wall_time: f64,
    pub files: Vec<PathBuf>,
}

fn dem_timeseries(t: f64, s: &DemState) -> TimeseriesPoint {
    let mut p = TimeseriesPoint {
        time: t,
        alpha: [0.0; 2],
        rho: [0.0; 2],
        u: [0.0; 2],
        p: [0.0; 2],
    };
    let states = s.phase_states().unwrap_or_default();
    let dx = s.mesh.dx();
    let span = s.mesh.hi - s.mesh.lo;
    for k in 0..2 {
        let mut vol = 0.0;
        let mut q = [0.0; 3];
        for (i, st) in states.iter().enumerate() {
            if let Some(w) = st[k] {
                let a = s.alpha[i][k] * dx;
                vol += a;
                q[0] += a * w.state.rho;
                q[1] += a * w.state.u;
                q[2] += a * w.state.p;
            }
        }
        p.alpha[k] = vol / span;
        if vol > 0.0 {
            p.rho[k] = q[0] / vol;
            p.u[k] = q[1] / vol;
            p.p[k] = q[2] / vol;
        }
    }
    p
}

/// Run one experiment in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mesh = cfg.mesh()?;
    let times = cfg.output_times();
    let start = Instant::now();
    match cfg.solver {
        Solver::Abinitio => {
            let res = run_ensemble(&cfg.ensemble_config()?)?;
            Ok(RunOutput {
                config: cfg.clone(),
                mesh,
                times,
                stats: res.stats,
                timeseries: res.timeseries,
                interface_density: res.interface_density,
                work: res.collisions,
                wall_time: start.elapsed().as_secs_f64(),
                files: Vec::new(),
            })
        }
        Solver::Dem => {
            let init = DemState::from_cells(mesh, cfg.eos, &cfg.cell_specs()?)?;
            let mut series = Vec::new();
            let (snaps, steps) = run_dem_with(&init, &cfg.dem, &times, |t, s| {
                series.push(dem_timeseries(t, s))
            })?;
            Ok(RunOutput {
                config: cfg.clone(),
                mesh,
                times,
                stats: snaps.iter().map(|s| s.to_stats()).collect::<Result<_>>()?,
                timeseries: series,
                interface_density: Vec::new(),
                work: steps as u64,
                wall_time: start.elapsed().as_secs_f64(),
                files: Vec::new(),
            })
        }
    }
}

/// Run one experiment and write CSV files plus `metadata.json` into `out`.
pub fn run_case(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    let mut run = execute(cfg)?;
    fs::create_dir_all(out)?;
    let mut entries = Vec::new();
    for (idx, (t, stats)) in run.times.iter().zip(&run.stats).enumerate() {
        let name = format!("{}_{idx:03}.csv", cfg.solver.as_str());
        let path = out.join(&name);
        let header = CsvHeader {
            format: FORMAT_VERSION,
            case: cfg.case.as_str().into(),
            solver: cfg.solver.as_str().into(),
            time: *t,
            lo: run.mesh.lo,
            hi: run.mesh.hi,
            cells: run.mesh.cells,
            samples: stats.samples,
        };
        write_stats_csv(
            BufWriter::new(fs::File::create(&path)?),
            &header,
            &run.mesh,
            stats,
        )?;
        entries.push(serde_json::json!({ "time": t, "file": name }));
        run.files.push(path);
    }
    let mut ts_file = None;
    if !run.timeseries.is_empty() {
        let name = format!("{}_timeseries.csv", cfg.solver.as_str());
        write_timeseries_csv(
            BufWriter::new(fs::File::create(out.join(&name))?),
            &run.timeseries,
        )?;
        run.files.push(out.join(&name));
        ts_file = Some(name);
    }
    let mut resolved = cfg.clone();
    resolved.workers = cfg.resolved_workers();
    let meta = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "package_version": env!("CARGO_PKG_VERSION"),
        "case": cfg.case.as_str(),
        "solver": cfg.solver.as_str(),
        "seed": cfg.seed,
        "config": resolved,
        "outputs": entries,
        "timeseries": ts_file,
        "work": run.work,
        "wall_time_s": run.wall_time,
    });
    let meta_path = out.join(format!("{}_metadata.json", cfg.solver.as_str()));
    fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    run.files.push(meta_path);
    Ok(run)
}

/// Descriptive first line of every statistics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvHeader {
    pub format: u32,
    pub case: String,
    pub solver: String,
    pub time: f64,
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    pub samples: u64,
}

impl CsvHeader {
    fn line(&self) -> String {
        format!(
            "# format={} case={} solver={} time={} lo={} hi={} cells={} samples={}",
            self.format,
            self.case,
            self.solver,
            self.time,
            self.lo,
            self.hi,
            self.cells,
            self.samples
        )
    }

    fn parse(line: &str, path: &Path) -> Result<Self> {
        let schema = |d: &str| Error::Schema {
            path: path.display().to_string(),
            detail: d.to_string(),
        };
        let body = line
            .strip_prefix("# ")
            .ok_or_else(|| schema("missing header line"))?;
        let kv: BTreeMap<&str, &str> = body
            .split_whitespace()
            .filter_map(|t| t.split_once('='))
            .collect();
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| schema(&format!("header lacks '{k}'")))
        };
        let num =
            |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| schema(&format!("bad '{k}'"))) };
        let format: u32 = get("format")?.parse().map_err(|_| schema("bad format"))?;
        if format != FORMAT_VERSION {
            return Err(schema(&format!("unsupported format {format}")));
        }
        Ok(CsvHeader {
            format,
            case: get("case")?.into(),
            solver: get("solver")?.into(),
            time: num("time")?,
            lo: num("lo")?,
            hi: num("hi")?,
            cells: get("cells")?.parse().map_err(|_| schema("bad cells"))?,
            samples: get("samples")?.parse().map_err(|_| schema("bad samples"))?,
        })
    }
}

/// Column names of the statistics CSV, in order.
pub fn stats_columns() -> Vec<String> {
    let mut cols = vec!["x".to_string()];
    for k in 1..=2 {
        for q in ["alpha", "rho", "u", "p"] {
            cols.push(format!("{q}{k}"));
            cols.push(format!("{q}{k}_var"));
            cols.push(format!("{q}{k}_std"));
        }
        for q in ["rho", "u", "p"] {
            cols.push(format!("x{q}{k}"));
        }
    }
    cols
}

pub fn write_stats_csv<W: Write>(
    mut w: W,
    header: &CsvHeader,
    mesh: &Mesh,
    stats: &FavreStats,
) -> Result<()> {
    writeln!(w, "{}", header.line())?;
    writeln!(w, "{}", stats_columns().join(","))?;
    for i in 0..mesh.cells {
        let mut row = vec![mesh.center(i)];
        for s in &stats.phases {
            for (mean, var) in [
                (&s.alpha, &s.alpha_var),
                (&s.rho, &s.rho_var),
                (&s.u, &s.u_var),
                (&s.p, &s.p_var),
            ] {
                row.extend([mean[i], var[i], var[i].max(0.0).sqrt()]);
            }
            row.extend([s.rho_x[i], s.u_x[i], s.p_x[i]]);
        }
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timeseries_csv<W: Write>(mut w: W, series: &[TimeseriesPoint]) -> Result<()> {
    writeln!(w, "time,alpha1,rho1,u1,p1,alpha2,rho2,u2,p2")?;
    for p in series {
        writeln!(
            w,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            p.time, p.alpha[0], p.rho[0], p.u[0], p.p[0], p.alpha[1], p.rho[1], p.u[1], p.p[1]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed statistics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsTable {
    pub header: CsvHeader,
    pub columns: Vec<String>,
    /// Column-major values.
    pub values: Vec<Vec<f64>>,
}

impl StatsTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.values[i].as_slice())
    }
}

pub fn read_stats_csv(path: &Path) -> Result<StatsTable> {
    let schema = |d: String| Error::Schema {
        path: path.display().to_string(),
        detail: d,
    };
    let mut lines = BufReader::new(fs::File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| schema("empty file".into()))??;
    let header = CsvHeader::parse(&first, path)?;
    let cols: Vec<String> = lines
        .next()
        .ok_or_else(|| schema("missing column row".into()))??
        .split(',')
        .map(str::to_string)
        .collect();
    if cols != stats_columns() {
        return Err(schema("unexpected columns".into()));
    }
    let mut values = vec![Vec::with_capacity(header.cells); cols.len()];
    for (n, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(schema(format!("row {} has {} fields", n + 1, fields.len())));
        }
        for (c, f) in fields.iter().enumerate() {
            values[c].push(
                f.parse()
                    .map_err(|_| schema(format!("row {}: bad number '{f}'", n + 1)))?,
            );
        }
    }
    if values[0].len() != header.cells {
        return Err(schema(format!(
            "{} rows for {} cells",
            values[0].len(),
            header.cells
        )));
    }
    Ok(StatsTable {
        header,
        columns: cols,
        values,
    })
}

/// Statistics CSV of the last output time in a run directory.
pub fn final_csv(dir: &Path, solver: Option<Solver>) -> Result<PathBuf> {
    let mut found: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            let stem_ok = match solver {
                Some(s) => name.starts_with(&format!("{}_", s.as_str())),
                None => true,
            };
            stem_ok && name.ends_with(".csv") && !name.contains("timeseries")
        })
        .collect();
    found.sort();
    found.pop().ok_or_else(|| Error::Schema {
        path: dir.display().to_string(),
        detail: "no statistics CSV".into(),
    })
}

/// Per-column L1 distances between two statistics files on the same mesh
/// and output time.
pub fn compare_runs(a: &Path, b: &Path) -> Result<Vec<(String, f64)>> {
    let resolve = |p: &Path| {
        if p.is_dir() {
            final_csv(p, None)
        } else {
            Ok(p.to_path_buf())
        }
    };
    let (ta, tb) = (read_stats_csv(&resolve(a)?)?, read_stats_csv(&resolve(b)?)?);
    let (ha, hb) = (&ta.header, &tb.header);
    if (ha.lo, ha.hi, ha.cells) != (hb.lo, hb.hi, hb.cells) {
        return Err(Error::MeshMismatch(format!(
            "[{}, {}] x {} vs [{}, {}] x {}",
            ha.lo, ha.hi, ha.cells, hb.lo, hb.hi, hb.cells
        )));
    }
    if ha.time != hb.time {
        return Err(Error::Schema {
            path: b.display().to_string(),
            detail: format!("time {} vs {}", ha.time, hb.time),
        });
    }
    let dx = (ha.hi - ha.lo) / ha.cells as f64;
    Ok(ta
        .columns
        .iter()
        .zip(ta.values.iter().zip(&tb.values))
        .skip(1)
        .map(|(name, (x, y))| {
            (
                name.clone(),
                dx * x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>(),
            )
        })
        .collect())
}

/// L1 distance of two piecewise-constant functions on uniform meshes of
/// the same interval, evaluated exactly on their common refinement.
pub fn l1_distance(ma: &Mesh, a: &[f64], mb: &Mesh, b: &[f64]) -> Result<f64> {
    if ma.lo != mb.lo || ma.hi != mb.hi || a.len() != ma.cells || b.len() != mb.cells {
        return Err(Error::MeshMismatch(format!("{ma:?} vs {mb:?}")));
    }
    if ma.cells == mb.cells {
        return Ok(ma.dx() * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>());
    }
    let (mut i, mut j, mut x, mut sum) = (0, 0, ma.lo, 0.0);
    while i < ma.cells && j < mb.cells {
        let (ea, eb) = (ma.edge(i + 1), mb.edge(j + 1));
        let next = ea.min(eb);
        sum += (next - x) * (a[i] - b[j]).abs();
        x = next;
        if ea <= next {
            i += 1;
        }
        if eb <= next {
            j += 1;
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Samples,
    Subvolumes,
    Mesh,
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "samples" => Ok(Axis::Samples),
            "subvolumes" => Ok(Axis::Subvolumes),
            "mesh" => Ok(Axis::Mesh),
            _ => Err(Error::Config(format!("unknown axis '{s}'"))),
        }
    }
}

/// Cauchy rates of one field along a sweep, with the fitted power law
/// `rate ~ C * point^q` when every rate is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub name: String,
    pub rates: Vec<f64>,
    pub slope: Option<f64>,
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub case: CaseName,
    pub solver: Solver,
    pub axis: Axis,
    pub points: Vec<usize>,
    /// Plain means `alpha`, `E[X rho]`, `E[X u]`, `E[X p]` per phase.
    pub means: Vec<RateSeries>,
    /// Variances of the same quantities.
    pub variances: Vec<RateSeries>,
}

impl ConvergenceReport {
    pub fn mean(&self, name: &str) -> Option<&RateSeries> {
        self.means.iter().find(|s| s.name == name)
    }

    pub fn variance(&self, name: &str) -> Option<&RateSeries> {
        self.variances.iter().find(|s| s.name == name)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "field,name,point,next_point,rate")?;
        for (field, list) in [("mean", &self.means), ("variance", &self.variances)] {
            for s in list.iter() {
                for (j, r) in s.rates.iter().enumerate() {
                    writeln!(
                        w,
                        "{field},{},{},{},{r:?}",
                        s.name,
                        self.points[j],
                        self.points[j + 1]
                    )?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Copy of `cfg` with the sweep parameter set to `value`.
pub fn with_axis(cfg: &ExperimentConfig, axis: Axis, value: usize) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match axis {
        Axis::Samples => c.abinitio.samples = value,
        Axis::Mesh => c.cells = value,
        Axis::Subvolumes => match &mut c.abinitio.sampler {
            SamplerConfig::Uniform { n, .. } => *n = value,
            SamplerConfig::Gp(_) => {
                return Err(Error::Config(
                    "sub-volume sweep needs the uniform sampler".into(),
                ))
            }
        },
    }
    Ok(c)
}

type Fields<'a> = Vec<(String, &'a [f64])>;

fn field_sets(s: &FavreStats) -> (Fields<'_>, Fields<'_>) {
    let mut means = Vec::new();
    let mut vars = Vec::new();
    for (k, p) in s.phases.iter().enumerate() {
        let k = k + 1;
        means.push((format!("alpha{k}"), p.alpha.as_slice()));
        means.push((format!("rho{k}"), p.rho_x.as_slice()));
        means.push((format!("u{k}"), p.u_x.as_slice()));
        means.push((format!("p{k}"), p.p_x.as_slice()));
        vars.push((format!("alpha{k}"), p.alpha_var.as_slice()));
        vars.push((format!("rho{k}"), p.rho_var.as_slice()));
        vars.push((format!("u{k}"), p.u_var.as_slice()));
        vars.push((format!("p{k}"), p.p_var.as_slice()));
    }
    (means, vars)
}

/// Cauchy rates between consecutive final-time statistics of a sweep.
pub fn convergence_report(
    cfg: &ExperimentConfig,
    axis: Axis,
    points: &[usize],
    runs: &[RunOutput],
) -> Result<ConvergenceReport> {
    let series = |pick: fn(&FavreStats) -> Fields<'_>| -> Result<Vec<RateSeries>> {
        let names: Vec<String> = pick(runs[0].stats.last().unwrap())
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        let mut out: Vec<RateSeries> = names
            .into_iter()
            .map(|name| RateSeries {
                name,
                rates: Vec::new(),
                slope: None,
                constant: None,
            })
            .collect();
        for pair in runs.windows(2) {
            let (fa, fb) = (
                pick(pair[0].stats.last().unwrap()),
                pick(pair[1].stats.last().unwrap()),
            );
            for (s, ((_, a), (_, b))) in out.iter_mut().zip(fa.iter().zip(&fb)) {
                s.rates
                    .push(l1_distance(&pair[0].mesh, a, &pair[1].mesh, b)?);
            }
        }
        let x: Vec<f64> = points[..points.len() - 1]
            .iter()
            .map(|&p| p as f64)
            .collect();
        for s in &mut out {
            if s.rates.iter().all(|&r| r > 0.0 && r.is_finite()) {
                let (q, c) = loglog_fit(&x, &s.rates);
                s.slope = Some(q);
                s.constant = Some(c);
            }
        }
        Ok(out)
    };
    Ok(ConvergenceReport {
        case: cfg.case,
        solver: cfg.solver,
        axis,
        points: points.to_vec(),
        means: series(|s| field_sets(s).0)?,
        variances: series(|s| field_sets(s).1)?,
    })
}

/// Run `cfg` at every sweep point and report Cauchy rates; with `out`,
/// each run is written to its own subdirectory next to the rate table.
pub fn run_convergence(
    cfg: &ExperimentConfig,
    axis: Axis,
    points: &[usize],
    out: Option<&Path>,
) -> Result<ConvergenceReport> {
    if points.len() < 3 {
        return Err(Error::Config(format!(
            "a sweep needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut runs = Vec::with_capacity(points.len());
    for &p in points {
        let c = with_axis(cfg, axis, p)?;
        runs.push(match out {
            Some(dir) => run_case(&c, &dir.join(format!("{}_{p}", axis_name(axis))))?,
            None => execute(&c)?,
        });
    }
    let report = convergence_report(cfg, axis, points, &runs)?;
    if let Some(dir) = out {
        report.write_csv(BufWriter::new(fs::File::create(
            dir.join("cauchy_rates.csv"),
        )?))?;
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join("convergence.json"), json)?;
    }
    Ok(report)
}

fn axis_name(a: Axis) -> &'static str {
    match a {
        Axis::Samples => "samples",
        Axis::Subvolumes => "subvolumes",
        Axis::Mesh => "mesh",
    }
}

/// L1 distances between DEM solutions with `r = 0` and `r = 1` at each
/// mesh size, keyed by statistics column.
pub fn r_coalescence(
    cfg: &ExperimentConfig,
    meshes: &[usize],
) -> Result<Vec<BTreeMap<String, f64>>> {
    meshes
        .iter()
        .map(|&m| {
            let mut c = cfg.clone();
            c.solver = Solver::Dem;
            c.cells = m;
            let mut runs = Vec::new();
            for r in [0.0, 1.0] {
                c.dem.r = r;
                runs.push(execute(&c)?);
            }
            let (a, b) = (runs[0].stats.last().unwrap(), runs[1].stats.last().unwrap());
            let mesh = runs[0].mesh;
            let mut out = BTreeMap::new();
            for k in 0..2 {
                let (pa, pb) = (&a.phases[k], &b.phases[k]);
                for (name, x, y) in [
                    ("alpha", &pa.alpha, &pb.alpha),
                    ("rho", &pa.rho, &pb.rho),
                    ("u", &pa.u, &pb.u),
                    ("p", &pa.p, &pb.p),
                ] {
                    out.insert(format!("{name}{}", k + 1), l1_distance(&mesh, x, &mesh, y)?);
                }
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for case in CaseName::ALL {
            for solver in [Solver::Abinitio, Solver::Dem] {
                for full in [false, true] {
                    ExperimentConfig::preset(case, solver, full)
                        .validate()
                        .unwrap();
                }
            }
        }
    }

    #[test]
    fn preset_initial_data() {
        let c = ExperimentConfig::preset(CaseName::MechEquilibrium, Solver::Abinitio, false);
        let cells = c.cell_specs().unwrap();
        assert_eq!(cells.len(), 100);
        assert_eq!(cells[49].alpha, 0.9);
        assert_eq!(cells[50].alpha, 0.1);
        assert_eq!(cells[0].states[0].state, PhaseState::new(1.0, 0.9, 0.3));
        assert_eq!(cells[99].states[1].state, PhaseState::new(0.125, 0.9, 0.3));
        let lax = ExperimentConfig::preset(CaseName::Lax2p, Solver::Dem, false);
        assert_eq!(lax.eos[1], EosParams::stiffened_gas(1.6, 2.5));
        assert_eq!(lax.regions[0].phase1, PhaseState::new(0.2, 0.7, 3.5));
        assert_eq!(lax.regions[1].phase2, PhaseState::new(1.0, 0.0, 0.1));
    }

    #[test]
    fn straddling_cell_is_averaged() {
        let mut c = ExperimentConfig::preset(CaseName::Sod2p, Solver::Dem, false);
        c.cells = 3;
        let cells = c.cell_specs().unwrap();
        assert!((cells[1].alpha - 0.5).abs() < 1e-15);
        // phase 1 weights: 0.9 of the left half, 0.1 of the right half
        let rho = (0.9 * 1.0 + 0.1 * 0.125) / 1.0;
        assert!((cells[1].states[0].state.rho - rho).abs() < 1e-14);
    }

    #[test]
    fn toml_overlay_and_roundtrip() {
        let base = ExperimentConfig::preset(CaseName::Sod2p, Solver::Abinitio, false);
        let text =
            "seed = 9\ncells = 40\n[abinitio]\nsamples = 3\n[abinitio.ft]\ndelta = [0.2, 0.3]\n";
        let c = ExperimentConfig::overlay(base.clone(), text).unwrap();
        assert_eq!((c.seed, c.cells, c.abinitio.samples), (9, 40, 3));
        assert_eq!(c.abinitio.ft.delta, [0.2, 0.3]);
        assert_eq!(c.abinitio.ft.step, base.abinitio.ft.step);
        let again = ExperimentConfig::overlay(base.clone(), &c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
        assert!(ExperimentConfig::overlay(base.clone(), "case = \"lax2p\"").is_err());
        assert!(ExperimentConfig::overlay(base.clone(), "bogus = 1").is_err());
        assert!(ExperimentConfig::overlay(base, "cells = 0").is_err());
    }

    #[test]
    fn l1_on_common_refinement() {
        let a = Mesh::new(0.0, 1.0, 2).unwrap();
        let b = Mesh::new(0.0, 1.0, 4).unwrap();
        let d = l1_distance(&a, &[1.0, 0.0], &b, &[1.0, 0.5, 0.0, 0.0]).unwrap();
        assert!((d - 0.125).abs() < 1e-15);
        assert_eq!(l1_distance(&a, &[1.0, 2.0], &a, &[1.0, 2.0]).unwrap(), 0.0);
        let c = Mesh::new(0.0, 2.0, 2).unwrap();
        assert!(l1_distance(&a, &[1.0, 0.0], &c, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn identical_sweep_points_give_zero_rates() {
        let mut c = ExperimentConfig::preset(CaseName::MechEquilibrium, Solver::Abinitio, false);
        c.cells = 10;
        c.abinitio.samples = 2;
        c.abinitio.sampler = SamplerConfig::Uniform {
            n: 4,
            mode: SubvolumeMode::Uniform,
        };
        c.end_time = 0.02;
        c.workers = 1;
        let r = run_convergence(&c, Axis::Subvolumes, &[4, 4, 4], None).unwrap();
        for s in r.means.iter().chain(&r.variances) {
            assert_eq!(s.rates, vec![0.0, 0.0]);
            assert_eq!(s.slope, None);
        }
        assert!(run_convergence(&c, Axis::Subvolumes, &[4, 8], None).is_err());
    }

    #[test]
    fn csv_roundtrip_and_self_compare() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::preset(CaseName::Sod2p, Solver::Dem, false);
        c.cells = 20;
        c.end_time = 0.05;
        c.outputs = vec![0.02];
        let run = run_case(&c, dir.path()).unwrap();
        assert_eq!(run.times, vec![0.02, 0.05]);
        let t = read_stats_csv(&run.files[1]).unwrap();
        assert_eq!(t.header.time, 0.05);
        assert_eq!(t.header.cells, 20);
        let alpha = t.column("alpha1").unwrap();
        for (x, y) in alpha.iter().zip(&run.stats[1].phases[0].alpha) {
            assert_eq!(x, y);
        }
        for (_, d) in compare_runs(&run.files[1], &run.files[1]).unwrap() {
            assert_eq!(d, 0.0);
        }
        assert!(compare_runs(&run.files[0], &run.files[1]).is_err());
        assert_eq!(
            final_csv(dir.path(), Some(Solver::Dem)).unwrap(),
            run.files[1]
        );
        assert!(dir.path().join("dem_metadata.json").exists());
        assert!(dir.path().join("dem_timeseries.csv").exists());
    }

    #[test]
    fn single_phase_custom_matches_projection() {
        use crate::front_tracking::FrontConfiguration;
        let mut c = ExperimentConfig::preset(CaseName::Custom, Solver::Abinitio, false);
        c.cells = 20;
        c.abinitio.samples = 1;
        c.end_time = 0.1;
        c.abinitio.ft.step = StepMode::Equispaced { steps: 1 };
        let w = PhaseState::new;
        c.regions = vec![
            Region {
                upto: 0.0,
                alpha: 1.0,
                phase1: w(1.0, 0.0, 1.0),
                phase2: w(1.0, 0.0, 1.0),
            },
            Region {
                upto: f64::MAX,
                alpha: 1.0,
                phase1: w(0.125, 0.0, 0.1),
                phase2: w(1.0, 0.0, 1.0),
            },
        ];
        let run = execute(&c).unwrap();
        let mesh = c.mesh().unwrap();
        let s = [
            FullState::new(w(1.0, 0.0, 1.0), c.eos[0]),
            FullState::new(w(0.125, 0.0, 0.1), c.eos[0]),
        ];
        let mut ft =
            FrontConfiguration::from_pieces(&[-1.0, 0.0, 1.0], &s, c.eos, &c.abinitio.ft, 0.0)
                .unwrap();
        ft.evolve(0.1, &c.abinitio.ft).unwrap();
        let avg = ft.project(&mesh).unwrap();
        let stats = &run.stats[0].phases[0];
        for i in 0..mesh.cells {
            let w = avg.states[i][0].unwrap().state;
            assert!((stats.rho[i] - w.rho).abs() < 1e-12);
            assert!((stats.u[i] - w.u).abs() < 1e-12);
            assert!((stats.p[i] - w.p).abs() < 1e-12);
            assert_eq!(stats.alpha[i], 1.0);
        }
    }
}
