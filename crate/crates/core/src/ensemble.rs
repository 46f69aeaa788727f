//! Monte-Carlo driver: sample microstructures, evolve each with front
//! tracking, and accumulate per-cell statistics.
//!
//! Samples are grouped into fixed chunks whose accumulators are merged in
//! chunk order, so results do not depend on the number of worker threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eos::EosParams;
use crate::error::{Error, Result};
use crate::front_tracking::{simulate, CellAverages, FtConfig, StepMode};
use crate::mesh::Mesh;
use crate::microscale::{
    generate_uniform, GpConfig, GpSampler, MacroCellSpec, MicroRealization, PhaseLayout,
    SubvolumeMode,
};
use crate::stats::{CellMoments, FavreStats, FieldAccumulator, Welford};

const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplerConfig {
    Uniform { n: usize, mode: SubvolumeMode },
    Gp(GpConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub mesh: Mesh,
    /// Initial data, one entry per mesh cell.
    pub cells: Vec<MacroCellSpec>,
    pub phases: [EosParams; 2],
    pub sampler: SamplerConfig,
    pub ft: FtConfig,
    pub samples: usize,
    /// Sorted output times; the last one is the end time.
    pub outputs: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != self.mesh.cells {
            return Err(Error::Config(format!(
                "{} cell specs for {} mesh cells",
                self.cells.len(),
                self.mesh.cells
            )));
        }
        if self.samples == 0 {
            return Err(Error::Config("sample count must be positive".into()));
        }
        match self.outputs.last() {
            Some(&t) if t > 0.0 => {}
            _ => return Err(Error::Config("end time must be positive".into())),
        }
        if self.outputs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("output times must be sorted".into()));
        }
        if let SamplerConfig::Uniform { n: 0, .. } = self.sampler {
            return Err(Error::Config("sub-volume count must be positive".into()));
        }
        for c in &self.cells {
            c.validate()?;
        }
        self.ft.validate()
    }

    pub fn end_time(&self) -> f64 {
        *self.outputs.last().unwrap()
    }
}

/// Domain-averaged per-phase quantities at one resampling step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesPoint {
    pub time: f64,
    /// Mean over samples of the phase volume, and of its Favre density,
    /// velocity and pressure over the domain.
    pub alpha: [f64; 2],
    pub rho: [f64; 2],
    pub u: [f64; 2],
    pub p: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub outputs: Vec<f64>,
    pub stats: Vec<FavreStats>,
    pub accumulators: Vec<FieldAccumulator>,
    /// Expected interface count per unit length in each cell at t = 0.
    pub interface_density: Vec<f64>,
    pub collisions: u64,
    pub timeseries: Vec<TimeseriesPoint>,
    pub wall_time: f64,
}

/// Domain integrals of X, X rho, X u, X p per phase.
type StepMoments = [[f64; 4]; 2];

struct ChunkResult {
    fields: Vec<FieldAccumulator>,
    density: Vec<Welford>,
    steps: Vec<(f64, [[Welford; 4]; 2])>,
    collisions: u64,
}

/// Sampler with any expensive setup done once per run.
pub enum PreparedSampler {
    Uniform { n: usize, mode: SubvolumeMode },
    Gp(GpSampler),
}

impl PreparedSampler {
    pub fn new(cfg: &SamplerConfig, mesh: &Mesh) -> Result<Self> {
        Ok(match *cfg {
            SamplerConfig::Uniform { n, mode } => PreparedSampler::Uniform { n, mode },
            SamplerConfig::Gp(gp) => PreparedSampler::Gp(GpSampler::new(mesh.lo, mesh.hi, gp)?),
        })
    }

    pub fn generate(&self, cells: &[MacroCellSpec], seed: u64, sample: u64) -> MicroRealization {
        match self {
            PreparedSampler::Uniform { n, mode } => {
                generate_uniform(cells, *n, *mode, seed, sample)
            }
            PreparedSampler::Gp(s) => s.generate(cells, seed, sample),
        }
    }
}

/// Indicator-weighted cell moments of one projected sample.
pub fn cell_moments(avg: &CellAverages) -> Vec<[CellMoments; 2]> {
    avg.alpha
        .iter()
        .zip(&avg.states)
        .zip(&avg.integrals)
        .map(|((alpha, states), ints)| {
            let mut out = [[0.0; 6]; 2];
            for k in 0..2 {
                if let Some(s) = states[k] {
                    let a = alpha[k];
                    out[k] = [
                        a,
                        ints[k][0],
                        ints[k][1],
                        ints[k][2],
                        a * s.state.u,
                        a * s.state.p,
                    ];
                }
            }
            out
        })
        .collect()
}

fn step_moments(avg: &CellAverages, dx: f64) -> StepMoments {
    let mut m = [[0.0; 4]; 2];
    for (alpha, states) in avg.alpha.iter().zip(&avg.states) {
        for k in 0..2 {
            if let Some(s) = states[k] {
                let w = alpha[k] * dx;
                m[k][0] += w;
                m[k][1] += w * s.state.rho;
                m[k][2] += w * s.state.u;
                m[k][3] += w * s.state.p;
            }
        }
    }
    m
}

/// Number of interfaces per unit length in each cell of `layout`; an
/// interface on a cell edge counts for the cell to its right.
pub fn interface_counts(layout: &PhaseLayout, mesh: &Mesh) -> Vec<f64> {
    let mut counts = vec![0.0; mesh.cells];
    for &x in layout.interfaces() {
        counts[mesh.cell_of(x)] += 1.0;
    }
    let dx = mesh.dx();
    counts.iter_mut().for_each(|c| *c /= dx);
    counts
}

/// Mean interface density over the layouts of an ensemble.
pub fn estimate_interface_density(layouts: &[PhaseLayout], mesh: &Mesh) -> Vec<f64> {
    let mut acc = vec![Welford::new(); mesh.cells];
    for l in layouts {
        for (a, c) in acc.iter_mut().zip(interface_counts(l, mesh)) {
            a.update(c);
        }
    }
    acc.iter().map(|w| w.mean()).collect()
}

fn run_chunk(
    cfg: &EnsembleConfig,
    sampler: &PreparedSampler,
    range: std::ops::Range<usize>,
) -> Result<ChunkResult> {
    let n_out = cfg.outputs.len();
    let mut res = ChunkResult {
        fields: vec![FieldAccumulator::new(cfg.mesh.cells); n_out],
        density: vec![Welford::new(); cfg.mesh.cells],
        steps: Vec::new(),
        collisions: 0,
    };
    let track_steps = matches!(cfg.ft.step, StepMode::Equispaced { .. });
    let dx = cfg.mesh.dx();
    for sample in range {
        let wrap = |e: Error| Error::SampleFailed {
            sample,
            seed: cfg.seed,
            source: Box::new(e),
        };
        let real = sampler.generate(&cfg.cells, cfg.seed, sample as u64);
        for (w, c) in res
            .density
            .iter_mut()
            .zip(interface_counts(&real.layout(), &cfg.mesh))
        {
            w.update(c);
        }
        let mut step = 0;
        let fields = &mut res.fields;
        let steps = &mut res.steps;
        let end = simulate(
            &real.edges,
            &real.states,
            cfg.phases,
            &cfg.mesh,
            &cfg.ft,
            &cfg.outputs,
            |o, avg, _| fields[o].push(&cell_moments(avg)),
            |t, avg| {
                if track_steps {
                    if steps.len() <= step {
                        steps.push((t, [[Welford::new(); 4]; 2]));
                    }
                    let m = step_moments(avg, dx);
                    for k in 0..2 {
                        for v in 0..4 {
                            steps[step].1[k][v].update(m[k][v]);
                        }
                    }
                    step += 1;
                }
            },
        )
        .map_err(wrap)?;
        res.collisions += end.collisions();
    }
    Ok(res)
}

fn merge_chunks(a: ChunkResult, b: ChunkResult) -> Result<ChunkResult> {
    let fields = a
        .fields
        .iter()
        .zip(&b.fields)
        .map(|(x, y)| x.merge(y))
        .collect::<Result<Vec<_>>>()?;
    let density = a
        .density
        .iter()
        .zip(&b.density)
        .map(|(x, y)| x.merge(y))
        .collect();
    let mut steps = a.steps;
    for (i, (t, m)) in b.steps.into_iter().enumerate() {
        if i < steps.len() {
            for k in 0..2 {
                for v in 0..4 {
                    steps[i].1[k][v] = steps[i].1[k][v].merge(&m[k][v]);
                }
            }
        } else {
            steps.push((t, m));
        }
    }
    Ok(ChunkResult {
        fields,
        density,
        steps,
        collisions: a.collisions + b.collisions,
    })
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let start = Instant::now();
    let sampler = PreparedSampler::new(&cfg.sampler, &cfg.mesh)?;
    let ranges: Vec<_> = (0..cfg.samples)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(cfg.samples))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let chunks: Vec<Result<ChunkResult>> = pool.install(|| {
        ranges
            .into_par_iter()
            .map(|r| run_chunk(cfg, &sampler, r))
            .collect()
    });
    let mut total: Option<ChunkResult> = None;
    for c in chunks {
        let c = c?;
        total = Some(match total {
            None => c,
            Some(t) => merge_chunks(t, c)?,
        });
    }
    let total = total.expect("at least one sample");
    let timeseries = total
        .steps
        .iter()
        .map(|(t, m)| {
            let favre = |k: usize, v: usize| {
                if m[k][0].mean() > 0.0 {
                    m[k][v].mean() / m[k][0].mean()
                } else {
                    0.0
                }
            };
            let span = cfg.mesh.hi - cfg.mesh.lo;
            TimeseriesPoint {
                time: *t,
                alpha: [m[0][0].mean() / span, m[1][0].mean() / span],
                rho: [favre(0, 1), favre(1, 1)],
                u: [favre(0, 2), favre(1, 2)],
                p: [favre(0, 3), favre(1, 3)],
            }
        })
        .collect();
    Ok(EnsembleResult {
        outputs: cfg.outputs.clone(),
        stats: total.fields.iter().map(|f| f.finalize()).collect(),
        accumulators: total.fields,
        interface_density: total.density.iter().map(|w| w.mean()).collect(),
        collisions: total.collisions,
        timeseries,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
