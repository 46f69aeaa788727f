//! Random two-phase microstructures consistent with prescribed volume
//! fractions: an equispaced sub-cell sampler and a Gaussian-process
//! level-set sampler with Matérn covariance.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::{erf, gamma::gamma};

use crate::eos::FullState;
use crate::error::{Error, Result};

/// Phase indices are 0 and 1 internally (reported as phases 1 and 2).
pub type Phase = u8;

/// Random stream for one (sample, cell) pair of a run seeded by `seed`.
pub fn stream(seed: u64, sample: u64, cell: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((sample << 32) | cell as u64);
    rng
}

/// Ordered partition of an interval into phase-tagged pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLayout {
    pub edges: Vec<f64>,
    pub phases: Vec<Phase>,
}

impl PhaseLayout {
    pub fn pure(lo: f64, hi: f64, phase: Phase) -> Self {
        Self {
            edges: vec![lo, hi],
            phases: vec![phase],
        }
    }

    /// Build from raw pieces, merging adjacent pieces of equal phase.
    pub fn from_pieces(edges: &[f64], phases: &[Phase]) -> Self {
        let mut out = PhaseLayout {
            edges: vec![edges[0]],
            phases: Vec::new(),
        };
        for (i, &ph) in phases.iter().enumerate() {
            if out.phases.last() == Some(&ph) {
                *out.edges.last_mut().unwrap() = edges[i + 1];
            } else {
                out.phases.push(ph);
                out.edges.push(edges[i + 1]);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Interior breakpoints, i.e. phase interfaces.
    pub fn interfaces(&self) -> &[f64] {
        &self.edges[1..self.edges.len() - 1]
    }

    pub fn phase_at(&self, x: f64) -> Phase {
        let j = self.edges[1..]
            .partition_point(|&e| e <= x)
            .min(self.phases.len() - 1);
        self.phases[j]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "breakpoint,phase")?;
        for (e, p) in self.edges.iter().zip(&self.phases) {
            writeln!(w, "{e},{}", p + 1)?;
        }
        writeln!(w, "{},", self.edges[self.edges.len() - 1])
    }
}

/// Fraction of `[lo, hi]` occupied by `phase` in `layout`.
pub fn realized_fraction(layout: &PhaseLayout, lo: f64, hi: f64, phase: Phase) -> f64 {
    let mut len = 0.0;
    for (j, &ph) in layout.phases.iter().enumerate() {
        if ph != phase {
            continue;
        }
        let a = layout.edges[j].max(lo);
        let b = layout.edges[j + 1].min(hi);
        if b > a {
            len += b - a;
        }
    }
    (len / (hi - lo)).clamp(0.0, 1.0)
}

/// Initial data of one macro cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroCellSpec {
    pub lo: f64,
    pub hi: f64,
    /// Volume fraction of phase 1; phase 2 holds the rest.
    pub alpha: f64,
    pub states: [FullState; 2],
}

impl MacroCellSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hi > self.lo) {
            return Err(Error::Config(format!(
                "empty cell [{}, {}]",
                self.lo, self.hi
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "volume fraction {} outside [0, 1]",
                self.alpha
            )));
        }
        for s in &self.states {
            s.state.validate(&s.params)?;
        }
        Ok(())
    }

    fn same_data(&self, other: &MacroCellSpec) -> bool {
        self.alpha.to_bits() == other.alpha.to_bits()
            && self.states[0].bit_eq(&other.states[0])
            && self.states[1].bit_eq(&other.states[1])
    }
}

/// Coalesce adjacent macro cells carrying identical fractions and phase
/// states into single sampling regions.
pub fn merge_identical_cells(cells: &[MacroCellSpec]) -> Vec<MacroCellSpec> {
    let mut out: Vec<MacroCellSpec> = Vec::with_capacity(cells.len());
    for c in cells {
        match out.last_mut() {
            Some(last) if last.same_data(c) && last.hi == c.lo => last.hi = c.hi,
            _ => out.push(*c),
        }
    }
    out
}

/// A sampled initial condition: piecewise-constant phase states.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroRealization {
    pub edges: Vec<f64>,
    pub phases: Vec<Phase>,
    pub states: Vec<FullState>,
    pub seed: u64,
    pub sample: u64,
}

impl MicroRealization {
    /// Overlay a phase layout on the macro cells; each piece takes the state
    /// of its phase in the containing cell. Adjacent pieces with identical
    /// phase and state are merged.
    pub fn from_layout(
        cells: &[MacroCellSpec],
        layout: &PhaseLayout,
        seed: u64,
        sample: u64,
    ) -> Self {
        let mut out = MicroRealization {
            edges: vec![cells[0].lo],
            phases: Vec::new(),
            states: Vec::new(),
            seed,
            sample,
        };
        let mut j = 0;
        for c in cells {
            let mut x = c.lo;
            while x < c.hi {
                while layout.edges[j + 1] <= x {
                    j += 1;
                }
                let end = layout.edges[j + 1].min(c.hi);
                let ph = layout.phases[j];
                out.push(end, ph, c.states[ph as usize]);
                x = end;
            }
        }
        out
    }

    fn push(&mut self, end: f64, phase: Phase, state: FullState) {
        if let (Some(&p), Some(s)) = (self.phases.last(), self.states.last()) {
            if p == phase && s.bit_eq(&state) {
                *self.edges.last_mut().unwrap() = end;
                return;
            }
        }
        self.phases.push(phase);
        self.states.push(state);
        self.edges.push(end);
    }

    pub fn layout(&self) -> PhaseLayout {
        PhaseLayout::from_pieces(&self.edges, &self.phases)
    }
}

/// How many sub-volumes each macro cell is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubvolumeMode {
    /// Every cell uses exactly `N` sub-volumes.
    Uniform,
    /// Each cell draws its count uniformly from `1..=N`.
    Random,
}

/// Number of phase-1 sub-cells out of `n` for fraction `alpha`.
pub fn phase_one_count(alpha: f64, n: usize) -> usize {
    ((alpha * n as f64).round() as usize).min(n)
}

/// Random phase assignment of `n` equal sub-cells with a uniformly chosen
/// subset of `phase_one_count(alpha, n)` cells in phase 1 (index 0).
pub fn sample_subcells<R: Rng>(alpha: f64, n: usize, rng: &mut R) -> Vec<Phase> {
    let n1 = phase_one_count(alpha, n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n1 {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut phases = vec![1; n];
    for &i in &idx[..n1] {
        phases[i] = 0;
    }
    phases
}

/// Equispaced sub-cell sampler with one random stream per cell.
pub fn generate_uniform(
    cells: &[MacroCellSpec],
    n_sub: usize,
    mode: SubvolumeMode,
    seed: u64,
    sample: u64,
) -> MicroRealization {
    assert!(n_sub >= 1, "sub-volume count must be positive");
    let mut edges = vec![cells[0].lo];
    let mut phases = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        let mut rng = stream(seed, sample, i as u32);
        let n = match mode {
            SubvolumeMode::Uniform => n_sub,
            SubvolumeMode::Random => rng.random_range(1..=n_sub),
        };
        let sub = if c.alpha >= 1.0 {
            vec![0]
        } else if c.alpha <= 0.0 {
            vec![1]
        } else {
            sample_subcells(c.alpha, n, &mut rng)
        };
        let m = sub.len();
        let w = (c.hi - c.lo) / m as f64;
        for (j, ph) in sub.into_iter().enumerate() {
            phases.push(ph);
            edges.push(if j + 1 == m {
                c.hi
            } else {
                c.lo + w * (j + 1) as f64
            });
        }
    }
    let layout = PhaseLayout::from_pieces(&edges, &phases);
    MicroRealization::from_layout(cells, &layout, seed, sample)
}

/// Number of distinct layouts of one cell under the equispaced sampler.
pub fn uniform_space_size(n: usize, n1: usize) -> u128 {
    let k = n1.min(n - n1) as u128;
    (0..k).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// Exhaustively enumerate all sub-cell assignments of `n` cells with `n1`
/// in phase 1; intended for small `n`.
pub fn enumerate_uniform_layouts(n: usize, n1: usize) -> Vec<Vec<Phase>> {
    assert!(n <= 24, "enumeration is exponential in n");
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == n1)
        .map(|m| {
            (0..n)
                .map(|i| if m >> i & 1 == 1 { 0 } else { 1 })
                .collect()
        })
        .collect()
}

/// Matérn covariance with smoothness `nu` and length scale `zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub nu: f64,
    pub zeta: f64,
    /// Grid width of the sampled field.
    pub dx: f64,
    /// Diagonal regularizer relative to the largest diagonal entry.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_jitter() -> f64 {
    1e-10
}

impl GpConfig {
    pub fn new(nu: f64, zeta: f64, dx: f64) -> Self {
        Self {
            nu,
            zeta,
            dx,
            jitter: default_jitter(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.zeta > 0.0 && self.dx > 0.0 && self.jitter >= 0.0) {
            return Err(Error::Config(format!("invalid GP parameters {self:?}")));
        }
        Ok(())
    }
}

/// Modified Bessel function of the second kind, from its integral
/// representation `int_0^inf exp(-x cosh t) cosh(nu t) dt`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let h: f64 = 0.02;
    let mut sum = 0.5 * (-x).exp();
    let mut t = h;
    loop {
        let term = (-x * t.cosh() + nu * t).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        t += h;
    }
    h * sum
}

pub fn matern_kernel(x: f64, y: f64, nu: f64, zeta: f64) -> f64 {
    let d = (x - y).abs();
    if d == 0.0 {
        return 1.0;
    }
    let z = (2.0 * nu).sqrt() * d / zeta;
    if z > 700.0 {
        return 0.0;
    }
    let c = 2f64.powf(1.0 - nu) / gamma(nu);
    (c * z.powf(nu) * bessel_k(nu, z)).min(1.0)
}

/// Mean shift giving phase 1 probability `alpha` under a unit-variance field.
pub fn gp_mean_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "GP mean is infinite for alpha = {alpha}"
        )));
    }
    Ok(std::f64::consts::SQRT_2 * erf::erf_inv(2.0 * alpha - 1.0))
}

pub fn gp_alpha_from_mean(mu: f64) -> f64 {
    0.5 * (1.0 + erf::erf(mu / std::f64::consts::SQRT_2))
}

/// Gaussian-process sampler with a cached Cholesky factor on a fixed grid.
#[derive(Debug, Clone)]
pub struct GpSampler {
    pub config: GpConfig,
    lo: f64,
    hi: f64,
    points: Vec<f64>,
    factor: DMatrix<f64>,
}

impl GpSampler {
    pub fn new(lo: f64, hi: f64, config: GpConfig) -> Result<Self> {
        config.validate()?;
        let n = ((hi - lo) / config.dx).round().max(1.0) as usize;
        let w = (hi - lo) / n as f64;
        let points: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * w).collect();
        let mut cov = DMatrix::from_fn(n, n, |i, j| {
            matern_kernel(points[i], points[j], config.nu, config.zeta)
        });
        let diag_max = (0..n).map(|i| cov[(i, i)]).fold(0.0, f64::max);
        for i in 0..n {
            cov[(i, i)] += config.jitter * diag_max;
        }
        let factor = cov.cholesky().ok_or(Error::Factorization)?.unpack();
        Ok(Self {
            config,
            lo,
            hi,
            points,
            factor,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Zero-mean correlated field on the grid.
    pub fn field<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(
            self.points.len(),
            (0..self.points.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        (&self.factor * z).iter().copied().collect()
    }

    /// Phase layout thresholding the shifted field; `alpha_at(x)` gives the
    /// phase-1 fraction at grid point `x`.
    pub fn layout<R: Rng>(&self, alpha_at: impl Fn(f64) -> f64, rng: &mut R) -> PhaseLayout {
        let g = self.field(rng);
        let n = self.points.len();
        let w = (self.hi - self.lo) / n as f64;
        let phases: Vec<Phase> = self
            .points
            .iter()
            .zip(&g)
            .map(|(&x, &gi)| {
                let a = alpha_at(x);
                if a >= 1.0 {
                    0
                } else if a <= 0.0 {
                    1
                } else if gi + gp_mean_from_alpha(a).unwrap() >= 0.0 {
                    0
                } else {
                    1
                }
            })
            .collect();
        let edges: Vec<f64> = (0..=n)
            .map(|i| {
                if i == n {
                    self.hi
                } else {
                    self.lo + i as f64 * w
                }
            })
            .collect();
        PhaseLayout::from_pieces(&edges, &phases)
    }

    pub fn generate(&self, cells: &[MacroCellSpec], seed: u64, sample: u64) -> MicroRealization {
        let mut rng = stream(seed, sample, u32::MAX);
        let alpha_at = |x: f64| {
            let i = cells.partition_point(|c| c.hi <= x).min(cells.len() - 1);
            cells[i].alpha
        };
        let layout = self.layout(alpha_at, &mut rng);
        MicroRealization::from_layout(cells, &layout, seed, sample)
    }
}

/// One-off GP realization; prefer [`GpSampler`] when drawing repeatedly.
pub fn generate_gp(
    cells: &[MacroCellSpec],
    gp: GpConfig,
    seed: u64,
    sample: u64,
) -> Result<MicroRealization> {
    let sampler = GpSampler::new(cells[0].lo, cells[cells.len() - 1].hi, gp)?;
    Ok(sampler.generate(cells, seed, sample))
}
