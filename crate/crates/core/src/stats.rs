//! Streaming ensemble statistics.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fractions at or below this are treated as absent phases when normalizing.
pub const ALPHA_EPS: f64 = 1e-12;

/// Single-pass mean and un-normalized second moment.
///
/// Samples are accumulated relative to `shift` (the first sample seen), so a
/// large common offset does not cost precision in either moment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub shift: f64,
    /// Mean of `x - shift`.
    pub centered: f64,
    pub m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, x: f64) {
        if self.count == 0 {
            self.shift = x;
        }
        self.count += 1;
        let y = x - self.shift;
        let prev = self.centered;
        self.centered = prev + (y - prev) / self.count as f64;
        self.m2 += (y - self.centered) * (y - prev);
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.centered
    }

    /// Pairwise combination of two disjoint sample sets.
    pub fn merge(&self, other: &Welford) -> Welford {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = (other.shift - self.shift) + other.centered - self.centered;
        Welford {
            count: self.count + other.count,
            shift: self.shift,
            centered: self.centered + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    /// Unbiased variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

pub fn welford_update(acc: Welford, x: f64) -> Welford {
    let mut acc = acc;
    acc.update(x);
    acc
}

pub fn welford_merge(a: &Welford, b: &Welford) -> Welford {
    a.merge(b)
}

/// Variables accumulated per cell and phase, each weighted by the phase
/// indicator and averaged over the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Alpha = 0,
    Rho = 1,
    Mom = 2,
    Ener = 3,
    U = 4,
    P = 5,
}

pub const NVARS: usize = 6;

/// Cell averages `I_i[X q]` of one sample for one phase, indexed by [`Var`].
pub type CellMoments = [f64; NVARS];

/// Per-cell, per-phase accumulators over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldAccumulator {
    cells: usize,
    acc: Vec<[[Welford; NVARS]; 2]>,
}

impl FieldAccumulator {
    pub fn new(cells: usize) -> Self {
        Self {
            cells,
            acc: vec![[[Welford::default(); NVARS]; 2]; cells],
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn count(&self) -> u64 {
        self.acc.first().map_or(0, |c| c[0][0].count)
    }

    /// Add one sample: `sample[i][k]` holds the indicator-weighted cell
    /// averages of phase `k` in cell `i`.
    pub fn push(&mut self, sample: &[[CellMoments; 2]]) {
        debug_assert_eq!(sample.len(), self.cells);
        for (acc, s) in self.acc.iter_mut().zip(sample) {
            for k in 0..2 {
                for v in 0..NVARS {
                    acc[k][v].update(s[k][v]);
                }
            }
        }
    }

    pub fn merge(&self, other: &FieldAccumulator) -> Result<FieldAccumulator> {
        if self.cells != other.cells {
            return Err(Error::MeshMismatch(format!(
                "{} vs {} cells",
                self.cells, other.cells
            )));
        }
        let acc = self
            .acc
            .iter()
            .zip(&other.acc)
            .map(|(a, b)| {
                let mut out = *a;
                for k in 0..2 {
                    for v in 0..NVARS {
                        out[k][v] = a[k][v].merge(&b[k][v]);
                    }
                }
                out
            })
            .collect();
        Ok(FieldAccumulator {
            cells: self.cells,
            acc,
        })
    }

    pub fn get(&self, cell: usize, phase: usize, var: Var) -> &Welford {
        &self.acc[cell][phase][var as usize]
    }

    pub fn finalize(&self) -> FavreStats {
        favre_finalize(self)
    }
}

/// Finalized statistics of one phase; all vectors are indexed by cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub alpha: Vec<f64>,
    pub alpha_var: Vec<f64>,
    /// Favre means `E[Xq]/E[X]` of density, velocity and pressure.
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Plain means `E[Xq]` used for Cauchy rates.
    pub rho_x: Vec<f64>,
    pub u_x: Vec<f64>,
    pub p_x: Vec<f64>,
    /// Reynolds variances `V[Xq]`.
    pub rho_var: Vec<f64>,
    pub u_var: Vec<f64>,
    pub p_var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FavreStats {
    pub samples: u64,
    pub phases: [PhaseStats; 2],
}

fn favre(num: f64, alpha: f64) -> f64 {
    if alpha > ALPHA_EPS {
        num / alpha
    } else {
        0.0
    }
}

pub fn favre_finalize(acc: &FieldAccumulator) -> FavreStats {
    let phase = |k: usize| {
        let n = acc.cells;
        let mut s = PhaseStats {
            alpha: Vec::with_capacity(n),
            alpha_var: Vec::with_capacity(n),
            rho: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
            rho_x: Vec::with_capacity(n),
            u_x: Vec::with_capacity(n),
            p_x: Vec::with_capacity(n),
            rho_var: Vec::with_capacity(n),
            u_var: Vec::with_capacity(n),
            p_var: Vec::with_capacity(n),
        };
        for c in &acc.acc {
            let w = &c[k];
            let a = w[Var::Alpha as usize].mean();
            s.alpha.push(a);
            s.alpha_var.push(w[Var::Alpha as usize].variance());
            for (var, mean, raw, variance) in [
                (Var::Rho, &mut s.rho, &mut s.rho_x, &mut s.rho_var),
                (Var::U, &mut s.u, &mut s.u_x, &mut s.u_var),
                (Var::P, &mut s.p, &mut s.p_x, &mut s.p_var),
            ] {
                let m = &w[var as usize];
                mean.push(favre(m.mean(), a));
                raw.push(m.mean());
                variance.push(m.variance());
            }
        }
        s
    };
    FavreStats {
        samples: acc.count(),
        phases: [phase(0), phase(1)],
    }
}

/// L1 distance `dx * sum |a_i - b_i|`.
pub fn cauchy_rate(a: &[f64], b: &[f64], dx: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::MeshMismatch(format!(
            "{} vs {} cells",
            a.len(),
            b.len()
        )));
    }
    Ok(dx * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Least-squares slope and intercept of `log y` against `log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, (my - slope * mx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(xs: &[f64]) -> Welford {
        xs.iter().fold(Welford::new(), |a, &x| welford_update(a, x))
    }

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (
            m,
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0),
        )
    }

    #[test]
    fn small_hand_cases() {
        let w = seq(&[1.0, 2.0, 3.0]);
        assert_eq!(w.mean(), 2.0);
        assert_eq!(w.variance(), 1.0);
        let c = seq(&[0.7; 9]);
        assert_eq!(c.mean(), 0.7);
        assert_eq!(c.m2, 0.0);
        let m = seq(&[1.0, 2.0]).merge(&seq(&[3.0]));
        assert_eq!(m.mean(), 2.0);
        assert_eq!(m.variance(), 1.0);
        assert_eq!(seq(&[1.0, 5.0]).merge(&Welford::new()), seq(&[1.0, 5.0]));
        assert_eq!(Welford::new().merge(&seq(&[1.0, 5.0])), seq(&[1.0, 5.0]));
    }

    #[test]
    fn matches_two_pass_with_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..10_000).map(|_| 1e9 + rng.random::<f64>()).collect();
        let w = seq(&xs);
        let (m, v) = two_pass(&xs);
        assert!((w.mean() - m).abs() <= 1e-12 * m.abs());
        assert!((w.variance() - v).abs() <= 1e-6 * v);
    }

    #[test]
    fn favre_two_layouts() {
        // phase 1 covers the cell in one sample and nothing in the other, q = 1
        let mut acc = FieldAccumulator::new(1);
        acc.push(&[[[1.0, 1.0, 0.0, 0.0, 1.0, 1.0], [0.0; NVARS]]]);
        acc.push(&[[[0.0; NVARS], [1.0, 2.0, 0.0, 0.0, 0.0, 1.0]]]);
        let s = acc.finalize();
        assert_eq!(s.phases[0].alpha[0], 0.5);
        assert_eq!(s.phases[0].rho[0], 1.0);
        assert_eq!(s.phases[1].rho[0], 2.0);
        assert_eq!(s.phases[0].alpha[0] + s.phases[1].alpha[0], 1.0);
    }

    #[test]
    fn favre_pure_phase_and_extension() {
        let mut acc = FieldAccumulator::new(2);
        for _ in 0..3 {
            acc.push(&[[[1.0, 5.0, 0.0, 0.0, 5.0, 5.0], [0.0; NVARS]]; 2]);
        }
        let s = acc.finalize();
        assert_eq!(s.phases[0].rho, vec![5.0, 5.0]);
        assert_eq!(s.phases[1].rho, vec![0.0, 0.0]);
        assert_eq!(s.phases[0].rho_var, vec![0.0, 0.0]);
        assert_eq!(favre(1e-20, 1e-13), 0.0);
    }

    #[test]
    fn favre_reynolds_gap() {
        // weighted variance identity: E_X[(q - qt)^2] = E_X[(q - qb)^2] + (qb - qt)^2
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 5000;
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let qs: Vec<f64> = (0..n).map(|_| 3.0 + rng.random::<f64>()).collect();
        let sx: f64 = xs.iter().sum();
        let favre_mean = xs.iter().zip(&qs).map(|(x, q)| x * q).sum::<f64>() / sx;
        let plain_mean = qs.iter().sum::<f64>() / n as f64;
        let v_favre = xs
            .iter()
            .zip(&qs)
            .map(|(x, q)| x * (q - favre_mean).powi(2))
            .sum::<f64>()
            / sx;
        let v_about_plain = xs
            .iter()
            .zip(&qs)
            .map(|(x, q)| x * (q - plain_mean).powi(2))
            .sum::<f64>()
            / sx;
        assert!((v_about_plain - v_favre - (plain_mean - favre_mean).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn cauchy_rate_cases() {
        assert_eq!(cauchy_rate(&[1.0, 2.0], &[1.0, 2.0], 0.5).unwrap(), 0.0);
        assert_eq!(cauchy_rate(&[1.0; 4], &[2.0; 4], 0.25).unwrap(), 1.0);
        assert!(cauchy_rate(&[1.0], &[1.0, 2.0], 1.0).is_err());
        // midpoint samples of x^2 and x on [0,1]: integral of |x^2 - x| = 1/6
        let m = 4000;
        let dx = 1.0 / m as f64;
        let a: Vec<f64> = (0..m).map(|i| ((i as f64 + 0.5) * dx).powi(2)).collect();
        let b: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * dx).collect();
        assert!((cauchy_rate(&a, &b, dx).unwrap() - 1.0 / 6.0).abs() < 1e-7);
    }

    #[test]
    fn loglog_slope() {
        let x = [8.0, 16.0, 32.0, 64.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        let (q, c) = loglog_fit(&x, &y);
        assert!((q + 0.5).abs() < 1e-12);
        assert!((c - 3.0).abs() < 1e-10);
    }
}
