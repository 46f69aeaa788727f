//! First-order discrete equation method with r-parameterized probability
//! coefficients, Lagrangian interface fluxes and mechanical relaxation.

use serde::{Deserialize, Serialize};

use crate::eos::{EosParams, FullState, PhaseState};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::microscale::MacroCellSpec;
use crate::riemann::{self, lagrangian_flux_of};
use crate::stats::{FavreStats, PhaseStats};

/// Phase-cells with a volume fraction at or below this are frozen.
pub const FROZEN_ALPHA: f64 = 1e-8;
const ALPHA_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxationMode {
    /// Project onto common pressure and velocity after every step.
    Instantaneous,
    /// Integrate the interface-density weighted exchange term.
    FiniteRate,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemConfig {
    pub r: f64,
    /// Interface density per cell; a single entry applies everywhere.
    pub lambda: Vec<f64>,
    pub cfl: f64,
    pub relaxation: RelaxationMode,
}

impl DemConfig {
    pub fn new(r: f64) -> Self {
        Self {
            r,
            lambda: vec![0.0],
            cfl: 0.9,
            relaxation: RelaxationMode::Instantaneous,
        }
    }

    pub fn validate(&self, cells: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::Config(format!("r = {} outside [0, 1]", self.r)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!(
                "CFL number {} outside (0, 1]",
                self.cfl
            )));
        }
        if self.lambda.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::Config(
                "interface density must be non-negative".into(),
            ));
        }
        if self.lambda.len() != 1 && self.lambda.len() != cells {
            return Err(Error::Config(format!(
                "{} interface densities for {cells} cells",
                self.lambda.len()
            )));
        }
        Ok(())
    }

    fn lambda_at(&self, i: usize) -> f64 {
        if self.lambda.len() == 1 {
            self.lambda[0]
        } else {
            self.lambda[i]
        }
    }
}

/// Averaged two-phase state: per cell and phase, `alpha` and
/// `[alpha rho, alpha rho u, alpha rho E]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemState {
    pub mesh: Mesh,
    pub phases: [EosParams; 2],
    pub alpha: Vec<[f64; 2]>,
    pub cons: Vec<[[f64; 3]; 2]>,
}

impl DemState {
    pub fn from_cells(mesh: Mesh, phases: [EosParams; 2], cells: &[MacroCellSpec]) -> Result<Self> {
        if cells.len() != mesh.cells {
            return Err(Error::MeshMismatch(format!(
                "{} cell specs for {} cells",
                cells.len(),
                mesh.cells
            )));
        }
        let mut s = DemState {
            mesh,
            phases,
            alpha: Vec::new(),
            cons: Vec::new(),
        };
        for c in cells {
            let a = [c.alpha, 1.0 - c.alpha];
            let mut u = [[0.0; 3]; 2];
            for k in 0..2 {
                let w = c.states[k].conserved();
                u[k] = [a[k] * w.rho, a[k] * w.mom, a[k] * w.ener];
            }
            s.alpha.push(a);
            s.cons.push(u);
        }
        Ok(s)
    }

    /// Phase-conditional state, or `None` for a frozen phase-cell.
    pub fn phase_state(&self, i: usize, k: usize) -> Result<Option<FullState>> {
        let a = self.alpha[i][k];
        if a <= FROZEN_ALPHA {
            return Ok(None);
        }
        let [m, mom, ener] = self.cons[i][k];
        let rho = m / a;
        let u = mom / m;
        let e = ener / m - 0.5 * u * u;
        let params = self.phases[k];
        let bad = |d: String| Error::Positivity { cell: i, detail: d };
        if !(rho > 0.0) || !(1.0 - params.b * rho > 0.0) {
            return Err(bad(format!("phase {} density {rho}", k + 1)));
        }
        let p = params
            .pressure_from_energy(rho, e)
            .map_err(|err| bad(err.to_string()))?;
        Ok(Some(FullState::new(PhaseState::new(rho, u, p), params)))
    }

    pub fn phase_states(&self) -> Result<Vec<[Option<FullState>; 2]>> {
        (0..self.mesh.cells)
            .map(|i| Ok([self.phase_state(i, 0)?, self.phase_state(i, 1)?]))
            .collect()
    }

    /// Cell totals of mass, momentum and energy over both phases.
    pub fn cell_totals(&self, i: usize) -> [f64; 3] {
        let c = &self.cons[i];
        [c[0][0] + c[1][0], c[0][1] + c[1][1], c[0][2] + c[1][2]]
    }

    /// Report as ensemble-style statistics with zero variance.
    pub fn to_stats(&self) -> Result<FavreStats> {
        let states = self.phase_states()?;
        let n = self.mesh.cells;
        let phase = |k: usize| {
            let mut s = PhaseStats {
                alpha: Vec::with_capacity(n),
                alpha_var: vec![0.0; n],
                rho: Vec::with_capacity(n),
                u: Vec::with_capacity(n),
                p: Vec::with_capacity(n),
                rho_x: Vec::with_capacity(n),
                u_x: Vec::with_capacity(n),
                p_x: Vec::with_capacity(n),
                rho_var: vec![0.0; n],
                u_var: vec![0.0; n],
                p_var: vec![0.0; n],
            };
            for i in 0..n {
                let a = self.alpha[i][k];
                s.alpha.push(a);
                let (rho, u, p) =
                    states[i][k].map_or((0.0, 0.0, 0.0), |w| (w.state.rho, w.state.u, w.state.p));
                s.rho.push(rho);
                s.u.push(u);
                s.p.push(p);
                s.rho_x.push(a * rho);
                s.u_x.push(a * u);
                s.p_x.push(a * p);
            }
            s
        };
        Ok(FavreStats {
            samples: 1,
            phases: [phase(0), phase(1)],
        })
    }
}

/// Probability coefficients `(P[pp], P[pq], P[qp], P[qq])` of the pairs
/// (phase in cell i, phase in cell i+1) given the p-fractions on both sides.
pub fn probability_coeffs(alpha_left_p: f64, alpha_right_p: f64, r: f64) -> (f64, f64, f64, f64) {
    let (a, b) = (alpha_left_p, alpha_right_p);
    let (aq, bq) = (1.0 - a, 1.0 - b);
    let pp = r * (a - bq).max(0.0) + (1.0 - r) * a.min(b);
    let pq = r * a.min(bq) + (1.0 - r) * (a - b).max(0.0);
    let qq = r * (aq - b).max(0.0) + (1.0 - r) * aq.min(bq);
    let qp = r * aq.min(b) + (1.0 - r) * (aq - bq).max(0.0);
    (pp, pq, qp, qq)
}

/// Sign of the contact speed of the Riemann problem, `+1` at zero.
pub fn flux_indicator(left: &FullState, right: &FullState) -> Result<f64> {
    let sol = riemann::solve(left, right)?;
    Ok(if sol.u_star >= 0.0 { 1.0 } else { -1.0 })
}

struct Pair {
    flux: [f64; 3],
    lag: [f64; 4],
    sigma: f64,
}

fn pair(l: &FullState, r: &FullState) -> Result<Pair> {
    let sol = riemann::solve(l, r)?;
    Ok(Pair {
        flux: sol.sample(0.0).flux(),
        lag: lagrangian_flux_of(&sol),
        sigma: sol.u_star,
    })
}

/// Largest stable step for the given CFL number: cell signal speeds and the
/// extreme wave speeds of every face Riemann problem, interfacial ones
/// included.
pub fn stable_dt(state: &DemState, cfl: f64) -> Result<f64> {
    let m = state.mesh.cells;
    let w = state.phase_states()?;
    let mut s: f64 = 0.0;
    for cell in &w {
        for p in cell.iter().flatten() {
            s = s.max(p.state.u.abs() + p.sound_speed());
        }
    }
    for f in 0..=m {
        let (l, r) = (&w[f.saturating_sub(1)], &w[f.min(m - 1)]);
        for a in l.iter().flatten() {
            for b in r.iter().flatten() {
                let sol = riemann::solve(a, b)?;
                s = s.max(sol.min_speed().abs()).max(sol.max_speed().abs());
            }
        }
    }
    Ok(cfl * state.mesh.dx() / s)
}

/// One forward-Euler step, followed by instantaneous relaxation if
/// configured.
pub fn dem_step(state: &DemState, dt: f64, cfg: &DemConfig) -> Result<DemState> {
    let m = state.mesh.cells;
    let dx = state.mesh.dx();
    let w = state.phase_states()?;
    // transmissive ghosts
    let at = |i: isize| -> (&[Option<FullState>; 2], [f64; 2]) {
        let j = i.clamp(0, m as isize - 1) as usize;
        (&w[j], state.alpha[j])
    };

    // per face: conservative flux per phase; per cell: interface terms
    let mut face = vec![[[0.0; 3]; 2]; m + 1];
    let mut bnd = vec![[[0.0; 4]; 2]; m];
    let mut add_bnd = |cell: isize, k: usize, v: [f64; 4], s: f64| {
        if cell >= 0 && (cell as usize) < m {
            for c in 0..4 {
                bnd[cell as usize][k][c] += s * v[c];
            }
        }
    };

    for f in 0..=m {
        let (li, ri) = (f as isize - 1, f as isize);
        let (wl, al) = at(li);
        let (wr, ar) = at(ri);
        let (pp, pq, qp, qq) = probability_coeffs(al[0], ar[0], cfg.r);
        let coeff = [[pp, pq], [qp, qq]];
        for k in 0..2 {
            let l = 1 - k;
            // same-phase pair
            if let (Some(a), Some(b)) = (wl[k], wr[k]) {
                let pr = pair(&a, &b)?;
                for c in 0..3 {
                    face[f][k][c] += coeff[k][k] * pr.flux[c];
                }
            }
            // (k | l): phase k on the left of an interface
            if let (Some(a), Some(b)) = (wl[k], wr[l]) {
                let pr = pair(&a, &b)?;
                let pk = coeff[k][l];
                if pr.sigma >= 0.0 {
                    for c in 0..3 {
                        face[f][k][c] += pk * pr.flux[c];
                    }
                    add_bnd(ri, k, pr.lag, -pk);
                } else {
                    add_bnd(li, k, pr.lag, -pk);
                }
                // same interface seen from phase l (on its right)
                if pr.sigma >= 0.0 {
                    add_bnd(ri, l, pr.lag, pk);
                } else {
                    for c in 0..3 {
                        face[f][l][c] += pk * pr.flux[c];
                    }
                    add_bnd(li, l, pr.lag, pk);
                }
            }
        }
    }

    let mut out = state.clone();
    for i in 0..m {
        for k in 0..2 {
            let mut relax = [0.0; 4];
            if cfg.relaxation == RelaxationMode::FiniteRate {
                let lam = cfg.lambda_at(i);
                if lam > 0.0 {
                    if let (Some(a), Some(b)) = (w[i][k], w[i][1 - k]) {
                        let lk = lagrangian_flux_of(&riemann::solve(&b, &a)?);
                        let kl = lagrangian_flux_of(&riemann::solve(&a, &b)?);
                        for c in 0..4 {
                            relax[c] = lam * (lk[c] - kl[c]);
                        }
                    }
                }
            }
            out.alpha[i][k] += dt / dx * bnd[i][k][0] + dt * relax[0];
            for c in 0..3 {
                out.cons[i][k][c] += -dt / dx * (face[i + 1][k][c] - face[i][k][c])
                    + dt / dx * bnd[i][k][c + 1]
                    + dt * relax[c + 1];
            }
        }
        for k in 0..2 {
            let a = out.alpha[i][k];
            if !(-ALPHA_SLACK..=1.0 + ALPHA_SLACK).contains(&a) {
                return Err(Error::Positivity {
                    cell: i,
                    detail: format!("phase {} volume fraction {a}", k + 1),
                });
            }
        }
        // exact saturation
        let a0 = out.alpha[i][0].clamp(0.0, 1.0);
        out.alpha[i] = [a0, 1.0 - a0];
    }
    for i in 0..m {
        for k in 0..2 {
            out.phase_state(i, k)?;
        }
    }
    if cfg.relaxation == RelaxationMode::Instantaneous {
        out = relax_to_equilibrium(&out)?;
    }
    Ok(out)
}

/// Per-cell mechanical equilibrium: common velocity and pressure, with
/// per-phase mass and cell totals of momentum and energy conserved.
pub fn relax_to_equilibrium(state: &DemState) -> Result<DemState> {
    let mut out = state.clone();
    for i in 0..state.mesh.cells {
        let (Some(w1), Some(w2)) = (state.phase_state(i, 0)?, state.phase_state(i, 1)?) else {
            continue;
        };
        let (s1, s2) = (w1.state, w2.state);
        let pscale = (s1.p + w1.params.pi).max(s2.p + w2.params.pi);
        let uscale = w1.sound_speed().max(w2.sound_speed());
        if (s1.p - s2.p).abs() <= 1e-14 * pscale && (s1.u - s2.u).abs() <= 1e-14 * uscale {
            continue;
        }
        let c = &state.cons[i];
        let m = [c[0][0], c[1][0]];
        let u = (c[0][1] + c[1][1]) / (m[0] + m[1]);
        let params = [w1.params, w2.params];
        let mut e0 = [0.0; 2];
        let mut v0 = [0.0; 2];
        for (k, s) in [s1, s2].iter().enumerate() {
            e0[k] = c[k][2] / m[k] - 0.5 * s.u * s.u + 0.5 * (s.u - u) * (s.u - u);
            v0[k] = 1.0 / s.rho;
        }
        // pressure of phase k after compression to volume fraction a with
        // interfacial work done at that same pressure
        let pk = |k: usize, a: f64| {
            let EosParams { gamma, pi, b } = params[k];
            let v = a / m[k];
            let g1 = gamma - 1.0;
            (e0[k] - gamma * pi * (v - b) / g1) / ((v - b) / g1 + v - v0[k])
        };
        let v_crit = |k: usize| {
            let EosParams { gamma, b, .. } = params[k];
            let lo = (v0[k] * (gamma - 1.0) + b) / gamma;
            lo.max(b)
        };
        let mut lo = m[0] * v_crit(0);
        let mut hi = 1.0 - m[1] * v_crit(1);
        if !(lo < hi) {
            return Err(Error::NoEquilibrium { cell: i });
        }
        let f = |a: f64| pk(0, a) - pk(1, 1.0 - a);
        let mut a = state.alpha[i][0].clamp(lo, hi);
        if !(a > lo && a < hi) {
            a = 0.5 * (lo + hi);
        }
        let mut converged = false;
        for _ in 0..200 {
            let fa = f(a);
            if fa > 0.0 {
                lo = a;
            } else {
                hi = a;
            }
            let h = 1e-7 * a.max(1e-12);
            let df = (f(a + h) - f(a - h)) / (2.0 * h);
            let mut next = a - fa / df;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - a).abs() <= 1e-15 * a || hi - lo <= 1e-15 * hi {
                a = next;
                converged = true;
                break;
            }
            a = next;
        }
        if !converged {
            return Err(Error::Convergence {
                what: "pressure equilibrium",
                iterations: 200,
            });
        }
        let p = pk(0, a);
        let alpha = [a, 1.0 - a];
        for k in 0..2 {
            if !(p + params[k].pi > 0.0) {
                return Err(Error::NoEquilibrium { cell: i });
            }
            let rho = m[k] / alpha[k];
            let e = params[k].internal_energy_unchecked(rho, p);
            out.cons[i][k] = [m[k], m[k] * u, m[k] * (e + 0.5 * u * u)];
        }
        out.alpha[i] = alpha;
    }
    Ok(out)
}

/// Evolve to each output time with CFL-limited steps; returns one snapshot
/// per output time and the number of steps taken.
pub fn run_dem(
    initial: &DemState,
    cfg: &DemConfig,
    outputs: &[f64],
) -> Result<(Vec<DemState>, usize)> {
    run_dem_with(initial, cfg, outputs, |_, _| {})
}

/// As [`run_dem`], calling `on_step(t, state)` after every step.
pub fn run_dem_with(
    initial: &DemState,
    cfg: &DemConfig,
    outputs: &[f64],
    mut on_step: impl FnMut(f64, &DemState),
) -> Result<(Vec<DemState>, usize)> {
    cfg.validate(initial.mesh.cells)?;
    let mut state = initial.clone();
    let mut t = 0.0;
    let mut steps = 0;
    let mut snaps = Vec::with_capacity(outputs.len());
    for &t_out in outputs {
        while t < t_out {
            let mut dt = stable_dt(&state, cfg.cfl)?;
            if t + dt >= t_out || t_out - (t + dt) <= 1e-12 * t_out {
                dt = t_out - t;
            }
            state = dem_step(&state, dt, cfg)?;
            t = if t + dt >= t_out { t_out } else { t + dt };
            steps += 1;
            on_step(t, &state);
        }
        snaps.push(state.clone());
    }
    Ok((snaps, steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ig(g: f64, rho: f64, u: f64, p: f64) -> FullState {
        FullState::new(PhaseState::new(rho, u, p), EosParams::ideal_gas(g))
    }

    fn phases() -> [EosParams; 2] {
        [EosParams::ideal_gas(1.4), EosParams::ideal_gas(1.6)]
    }

    fn cells(mesh: &Mesh, f: impl Fn(f64) -> (f64, FullState, FullState)) -> Vec<MacroCellSpec> {
        (0..mesh.cells)
            .map(|i| {
                let (alpha, a, b) = f(mesh.center(i));
                MacroCellSpec {
                    lo: mesh.edge(i),
                    hi: mesh.edge(i + 1),
                    alpha,
                    states: [a, b],
                }
            })
            .collect()
    }

    #[test]
    fn coefficient_examples() {
        let (pp, pq, _, _) = probability_coeffs(0.9, 0.9, 0.0);
        assert!((pp - 0.9).abs() < 1e-15 && pq == 0.0);
        let (pp, pq, _, _) = probability_coeffs(0.9, 0.1, 1.0);
        assert!(pp.abs() < 1e-15 && (pq - 0.9).abs() < 1e-15);
    }

    #[test]
    fn coefficient_consistency_grid() {
        for i in 0..=20 {
            for j in 0..=20 {
                for k in 0..=10 {
                    let (a, b, r) = (i as f64 / 20.0, j as f64 / 20.0, k as f64 / 10.0);
                    let (pp, pq, qp, qq) = probability_coeffs(a, b, r);
                    assert!(pp >= 0.0 && pq >= 0.0 && qp >= 0.0 && qq >= 0.0);
                    assert!((pp + pq - a).abs() < 1e-14);
                    assert!((pp + qp - b).abs() < 1e-14);
                    assert!((qq + qp - (1.0 - a)).abs() < 1e-14);
                    assert!((qq + pq - (1.0 - b)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn indicator_signs() {
        assert_eq!(
            flux_indicator(&ig(1.4, 1.0, 0.9, 0.3), &ig(1.6, 0.125, 0.9, 0.3)).unwrap(),
            1.0
        );
        assert_eq!(
            flux_indicator(&ig(1.6, 0.125, -0.9, 0.3), &ig(1.4, 1.0, -0.9, 0.3)).unwrap(),
            -1.0
        );
        assert_eq!(
            flux_indicator(&ig(1.4, 1.0, 0.0, 1.0), &ig(1.6, 0.125, 0.0, 0.1)).unwrap(),
            1.0
        );
    }

    #[test]
    fn abgrall_preserved() {
        let mesh = Mesh::new(-1.0, 1.0, 40).unwrap();
        let c = cells(&mesh, |x| {
            let rho = if x < 0.0 { 1.0 } else { 0.125 };
            (
                0.5 + 0.4 * (3.0 * x).sin(),
                ig(1.4, rho, 0.9, 0.3),
                ig(1.6, 2.0 * rho, 0.9, 0.3),
            )
        });
        for r in [0.0, 0.5, 1.0] {
            let mut s = DemState::from_cells(mesh, phases(), &c).unwrap();
            let cfg = DemConfig::new(r);
            for _ in 0..100 {
                let dt = stable_dt(&s, 0.9).unwrap();
                s = dem_step(&s, dt, &cfg).unwrap();
            }
            for st in s.phase_states().unwrap().iter().flatten().flatten() {
                assert!((st.state.u - 0.9).abs() < 1e-10);
                assert!((st.state.p - 0.3).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_phase_reduces_to_godunov() {
        let mesh = Mesh::new(-1.0, 1.0, 30).unwrap();
        let c = cells(&mesh, |x| {
            let w = if x < 0.0 {
                ig(1.4, 1.0, 0.0, 1.0)
            } else {
                ig(1.4, 0.125, 0.0, 0.1)
            };
            (1.0, w, ig(1.6, 1.0, 0.0, 1.0))
        });
        let mut s = DemState::from_cells(mesh, phases(), &c).unwrap();
        let mut g: Vec<[f64; 3]> = c
            .iter()
            .map(|c| {
                let u = c.states[0].conserved();
                [u.rho, u.mom, u.ener]
            })
            .collect();
        let dx = mesh.dx();
        for r in [0.0, 1.0] {
            let cfg = DemConfig::new(r);
            for _ in 0..10 {
                let dt = stable_dt(&s, 0.9).unwrap();
                s = dem_step(&s, dt, &cfg).unwrap();
                let prim: Vec<FullState> = g
                    .iter()
                    .map(|u| {
                        let v = u[1] / u[0];
                        let p = EosParams::ideal_gas(1.4)
                            .pressure_from_energy(u[0], u[2] / u[0] - 0.5 * v * v)
                            .unwrap();
                        ig(1.4, u[0], v, p)
                    })
                    .collect();
                let flux: Vec<[f64; 3]> = (0..=prim.len())
                    .map(|f| {
                        let a = prim[f.saturating_sub(1)];
                        let b = prim[f.min(prim.len() - 1)];
                        riemann::godunov_flux(&a, &b).unwrap().flux
                    })
                    .collect();
                for i in 0..g.len() {
                    for c in 0..3 {
                        g[i][c] -= dt / dx * (flux[i + 1][c] - flux[i][c]);
                    }
                }
                for i in 0..g.len() {
                    for c in 0..3 {
                        assert!((s.cons[i][0][c] - g[i][c]).abs() < 1e-12 * g[i][c].abs().max(1.0));
                    }
                    assert_eq!(s.alpha[i], [1.0, 0.0]);
                }
            }
        }
    }

    #[test]
    fn relaxation_cell() {
        let mesh = Mesh::new(0.0, 1.0, 1).unwrap();
        let c = cells(&mesh, |_| {
            (0.9, ig(1.4, 1.0, 0.0, 1.0), ig(1.6, 0.125, 0.0, 0.1))
        });
        let s = DemState::from_cells(mesh, phases(), &c).unwrap();
        let r = relax_to_equilibrium(&s).unwrap();
        let w = r.phase_states().unwrap();
        let (a, b) = (w[0][0].unwrap(), w[0][1].unwrap());
        assert!((a.state.p - b.state.p).abs() < 1e-12);
        assert!(a.state.p > 0.1 && a.state.p < 1.0);
        assert_eq!(a.state.u, 0.0);
        assert_eq!(b.state.u, 0.0);
        let (t0, t1) = (s.cell_totals(0), r.cell_totals(0));
        for c in 0..3 {
            assert!((t0[c] - t1[c]).abs() < 1e-12);
        }
        assert_eq!(r.cons[0][0][0], s.cons[0][0][0]);
        // fixed point
        assert_eq!(relax_to_equilibrium(&r).unwrap(), r);
    }

    #[test]
    fn relaxation_conserves_random_cells() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let mesh = Mesh::new(0.0, 1.0, 1).unwrap();
        let params = [
            EosParams::new(1.4, 0.0, 0.1).unwrap(),
            EosParams::stiffened_gas(1.6, 2.5),
        ];
        for _ in 0..200 {
            let alpha = rng.random_range(0.05..0.95);
            let a = FullState::new(
                PhaseState::new(
                    rng.random_range(0.1..2.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.1..3.0),
                ),
                params[0],
            );
            let b = FullState::new(
                PhaseState::new(
                    rng.random_range(0.1..2.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.1..3.0),
                ),
                params[1],
            );
            let c = vec![MacroCellSpec {
                lo: 0.0,
                hi: 1.0,
                alpha,
                states: [a, b],
            }];
            let s = DemState::from_cells(mesh, params, &c).unwrap();
            let r = relax_to_equilibrium(&s).unwrap();
            let (t0, t1) = (s.cell_totals(0), r.cell_totals(0));
            for c in 0..3 {
                assert!((t0[c] - t1[c]).abs() <= 1e-12 * t0[c].abs().max(1.0));
            }
            let w = r.phase_states().unwrap();
            let (x, y) = (w[0][0].unwrap(), w[0][1].unwrap());
            assert!((x.state.p - y.state.p).abs() < 1e-10 * x.state.p.abs().max(1.0));
            assert!((r.alpha[0][0] + r.alpha[0][1] - 1.0).abs() < 1e-15);
        }
    }
}
