//! Noble-Abel stiffened-gas (NASG) equation of state.
//!
//! Both phases share one parametrization `k = [gamma, pi, b]`:
//!
//! ```text
//! e   = (p + gamma*pi) / (gamma - 1) * (1/rho - b)
//! a^2 = gamma * (p + pi) / ((1 - b*rho) * rho)
//! ```
//!
//! `pi = b = 0` is the ideal gas, `b = 0` the stiffened gas and `pi = 0`
//! the co-volume gas.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// States closer to vacuum than this are rejected.
pub const VACUUM_EPS: f64 = 1e-12;

/// NASG parameter vector of one phase.
///
/// Equality is exact and component-wise: the phase of a state is recovered
/// by comparing its parameters against the two canonical records of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EosParams {
    pub gamma: f64,
    pub pi: f64,
    pub b: f64,
}

impl EosParams {
    pub fn new(gamma: f64, pi: f64, b: f64) -> Result<Self> {
        let params = Self { gamma, pi, b };
        params.validate()?;
        Ok(params)
    }

    pub fn ideal_gas(gamma: f64) -> Self {
        Self {
            gamma,
            pi: 0.0,
            b: 0.0,
        }
    }

    pub fn stiffened_gas(gamma: f64, pi: f64) -> Self {
        Self { gamma, pi, b: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return Err(Error::Domain(format!(
                "gamma = {} must exceed 1",
                self.gamma
            )));
        }
        if !(self.pi >= 0.0) || !self.pi.is_finite() {
            return Err(Error::Domain(format!(
                "pi = {} must be non-negative",
                self.pi
            )));
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(Error::Domain(format!(
                "b = {} must be non-negative",
                self.b
            )));
        }
        Ok(())
    }

    /// Bitwise identity, used for phase identification.
    pub fn same_phase(&self, other: &EosParams) -> bool {
        self.gamma.to_bits() == other.gamma.to_bits()
            && self.pi.to_bits() == other.pi.to_bits()
            && self.b.to_bits() == other.b.to_bits()
    }

    fn check_density(&self, rho: f64) -> Result<()> {
        if !(rho >= VACUUM_EPS) || !rho.is_finite() {
            return Err(Error::Domain(format!("density {rho} at or below vacuum")));
        }
        if !(1.0 - self.b * rho > 0.0) {
            return Err(Error::Domain(format!(
                "co-volume violated: 1 - b*rho = {} <= 0",
                1.0 - self.b * rho
            )));
        }
        Ok(())
    }

    fn check_pressure(&self, p: f64) -> Result<()> {
        if !(p + self.pi >= VACUUM_EPS) || !p.is_finite() {
            return Err(Error::Domain(format!(
                "p + pi = {} at or below vacuum",
                p + self.pi
            )));
        }
        Ok(())
    }

    /// Specific internal energy `e(rho, p)`.
    pub fn internal_energy(&self, rho: f64, p: f64) -> Result<f64> {
        self.validate()?;
        self.check_density(rho)?;
        Ok(self.internal_energy_unchecked(rho, p))
    }

    #[inline]
    pub(crate) fn internal_energy_unchecked(&self, rho: f64, p: f64) -> f64 {
        (p + self.gamma * self.pi) / (self.gamma - 1.0) * (1.0 / rho - self.b)
    }

    /// Pressure from density and specific internal energy (inverse of
    /// [`EosParams::internal_energy`]).
    pub fn pressure_from_energy(&self, rho: f64, e: f64) -> Result<f64> {
        self.validate()?;
        self.check_density(rho)?;
        let p = self.pressure_unchecked(rho, e);
        self.check_pressure(p)?;
        Ok(p)
    }

    #[inline]
    pub(crate) fn pressure_unchecked(&self, rho: f64, e: f64) -> f64 {
        (self.gamma - 1.0) * e * rho / (1.0 - self.b * rho) - self.gamma * self.pi
    }

    pub fn sound_speed(&self, rho: f64, p: f64) -> Result<f64> {
        self.validate()?;
        self.check_density(rho)?;
        self.check_pressure(p)?;
        Ok(self.sound_speed_unchecked(rho, p))
    }

    #[inline]
    pub(crate) fn sound_speed_unchecked(&self, rho: f64, p: f64) -> f64 {
        (self.gamma * (p + self.pi) / ((1.0 - self.b * rho) * rho)).sqrt()
    }
}

/// Primitive variables of one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

impl PhaseState {
    pub fn new(rho: f64, u: f64, p: f64) -> Self {
        Self { rho, u, p }
    }

    pub fn validate(&self, params: &EosParams) -> Result<()> {
        params.check_density(self.rho)?;
        params.check_pressure(self.p)?;
        if !self.u.is_finite() {
            return Err(Error::Domain(format!("velocity {} is not finite", self.u)));
        }
        Ok(())
    }
}

/// Conserved variables `[rho, rho u, rho E, rho k]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConservedState {
    pub rho: f64,
    pub mom: f64,
    pub ener: f64,
    /// `rho * [gamma, pi, b]`, trivially advected.
    pub rhok: [f64; 3],
}

impl ConservedState {
    pub fn from_primitive(w: &PhaseState, params: &EosParams) -> Self {
        let e = params.internal_energy_unchecked(w.rho, w.p);
        Self {
            rho: w.rho,
            mom: w.rho * w.u,
            ener: w.rho * (0.5 * w.u * w.u + e),
            rhok: [w.rho * params.gamma, w.rho * params.pi, w.rho * params.b],
        }
    }

    pub fn to_primitive(&self, params: &EosParams) -> Result<PhaseState> {
        params.check_density(self.rho)?;
        let u = self.mom / self.rho;
        let e = self.ener / self.rho - 0.5 * u * u;
        let p = params.pressure_unchecked(self.rho, e);
        params.check_pressure(p)?;
        Ok(PhaseState {
            rho: self.rho,
            u,
            p,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rho: self.rho * s,
            mom: self.mom * s,
            ener: self.ener * s,
            rhok: [self.rhok[0] * s, self.rhok[1] * s, self.rhok[2] * s],
        }
    }

    pub fn add_scaled(&mut self, other: &ConservedState, s: f64) {
        self.rho += other.rho * s;
        self.mom += other.mom * s;
        self.ener += other.ener * s;
        for (a, b) in self.rhok.iter_mut().zip(other.rhok.iter()) {
            *a += b * s;
        }
    }
}

/// A phase state together with the EOS parameters it lives under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub state: PhaseState,
    pub params: EosParams,
}

impl FullState {
    pub fn new(state: PhaseState, params: EosParams) -> Self {
        Self { state, params }
    }

    pub fn validated(state: PhaseState, params: EosParams) -> Result<Self> {
        params.validate()?;
        state.validate(&params)?;
        Ok(Self { state, params })
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.state.rho
    }

    #[inline]
    pub fn u(&self) -> f64 {
        self.state.u
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.state.p
    }

    pub fn sound_speed(&self) -> f64 {
        self.params
            .sound_speed_unchecked(self.state.rho, self.state.p)
    }

    pub fn internal_energy(&self) -> f64 {
        self.params
            .internal_energy_unchecked(self.state.rho, self.state.p)
    }

    pub fn conserved(&self) -> ConservedState {
        ConservedState::from_primitive(&self.state, &self.params)
    }

    /// Physical flux `[rho u, rho u^2 + p, u (rho E + p)]`.
    pub fn flux(&self) -> [f64; 3] {
        let PhaseState { rho, u, p } = self.state;
        let ener = rho * (0.5 * u * u + self.internal_energy());
        [rho * u, rho * u * u + p, u * (ener + p)]
    }

    /// Exact identity of states and parameters.
    pub fn bit_eq(&self, other: &FullState) -> bool {
        self.state.rho.to_bits() == other.state.rho.to_bits()
            && self.state.u.to_bits() == other.state.u.to_bits()
            && self.state.p.to_bits() == other.state.p.to_bits()
            && self.params.same_phase(&other.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn internal_energy_examples() {
        let ig = EosParams::ideal_gas(1.4);
        assert_relative_eq!(
            ig.internal_energy(1.0, 1.0).unwrap(),
            2.5,
            max_relative = 1e-15
        );

        let sg = EosParams::stiffened_gas(1.6, 2.5);
        assert_relative_eq!(
            sg.internal_energy(1.0, 0.1).unwrap(),
            (0.1 + 1.6 * 2.5) / 0.6,
            max_relative = 1e-15
        );

        let nasg = EosParams::new(2.0, 1.0, 0.1).unwrap();
        assert_relative_eq!(
            nasg.internal_energy(2.0, 1.0).unwrap(),
            1.2,
            max_relative = 1e-14
        );
    }

    #[test]
    fn pressure_inverts_examples() {
        let ig = EosParams::ideal_gas(1.4);
        assert_relative_eq!(
            ig.pressure_from_energy(1.0, 2.5).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        let sg = EosParams::stiffened_gas(1.6, 2.5);
        let e = (0.1 + 1.6 * 2.5) / 0.6;
        assert_relative_eq!(
            sg.pressure_from_energy(1.0, e).unwrap(),
            0.1,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sound_speed_examples() {
        let ig = EosParams::ideal_gas(1.4);
        assert_relative_eq!(
            ig.sound_speed(1.0, 1.0).unwrap(),
            1.4f64.sqrt(),
            max_relative = 1e-15
        );
        let sg = EosParams::stiffened_gas(1.6, 2.5);
        assert_relative_eq!(
            sg.sound_speed(1.0, 0.1).unwrap(),
            4.16f64.sqrt(),
            max_relative = 1e-15
        );
        let ig16 = EosParams::ideal_gas(1.6);
        assert_relative_eq!(
            ig16.sound_speed(0.125, 0.1).unwrap(),
            1.28f64.sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn domain_errors() {
        assert!(EosParams::new(1.0, 0.0, 0.0).is_err());
        assert!(EosParams::new(1.4, -1.0, 0.0).is_err());
        let cv = EosParams::new(1.4, 0.0, 0.5).unwrap();
        assert!(cv.internal_energy(2.0, 1.0).is_err());
        assert!(cv.internal_energy(1e-13, 1.0).is_err());
        let ig = EosParams::ideal_gas(1.4);
        assert!(ig.sound_speed(1.0, 0.0).is_err());
        assert!(ig.pressure_from_energy(1.0, -1.0).is_err());
    }

    #[test]
    fn phase_identity_is_bitwise() {
        let a = EosParams::ideal_gas(1.4);
        let b = EosParams::ideal_gas(1.4 + f64::EPSILON);
        assert!(a.same_phase(&a));
        assert!(!a.same_phase(&b));
    }

    fn valid_state() -> impl Strategy<Value = (EosParams, PhaseState)> {
        (
            1.05f64..3.0,
            0.0f64..5.0,
            0.0f64..0.5,
            0.01f64..10.0,
            -5.0f64..5.0,
            0.0f64..1.0,
        )
            .prop_map(|(gamma, pi, b, rho_scale, u, p_frac)| {
                let params = EosParams { gamma, pi, b };
                // keep 1 - b rho > 0
                let rho = if b > 0.0 {
                    rho_scale.min(0.9 / b)
                } else {
                    rho_scale
                };
                let p = -pi + 1e-3 + p_frac * 10.0;
                (params, PhaseState { rho, u, p })
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn energy_pressure_round_trip((params, w) in valid_state()) {
            let e = params.internal_energy(w.rho, w.p).unwrap();
            let p = params.pressure_unchecked(w.rho, e);
            let scale = (w.p.abs()).max(params.pi).max(1e-3);
            prop_assert!((p - w.p).abs() <= 1e-12 * scale * 10.0);
            let e2 = params.internal_energy_unchecked(w.rho, p);
            prop_assert!((e2 - e).abs() <= 1e-12 * e.abs().max(1e-300) * 10.0);
        }

        #[test]
        fn conserved_round_trip((params, w) in valid_state()) {
            let u = ConservedState::from_primitive(&w, &params);
            let back = u.to_primitive(&params).unwrap();
            prop_assert!((back.rho - w.rho).abs() <= 1e-12 * w.rho);
            prop_assert!((back.u - w.u).abs() <= 1e-12 * w.u.abs().max(1.0));
            let scale = (w.p + params.pi).max(0.5 * w.rho * w.u * w.u).max(params.pi);
            prop_assert!((back.p - w.p).abs() <= 1e-11 * scale);
        }

        #[test]
        fn reductions_match_textbook_forms((params, w) in valid_state()) {
            let e = params.internal_energy_unchecked(w.rho, w.p);
            let a = params.sound_speed_unchecked(w.rho, w.p);
            let (g, pi, b, rho, p) = (params.gamma, params.pi, params.b, w.rho, w.p);
            // ideal gas
            let ig = EosParams::ideal_gas(g);
            let pp = p.abs() + 1e-3;
            prop_assert!((ig.internal_energy_unchecked(rho, pp) - pp / ((g - 1.0) * rho)).abs()
                <= 1e-12 * pp / ((g - 1.0) * rho));
            prop_assert!((ig.sound_speed_unchecked(rho, pp) - (g * pp / rho).sqrt()).abs()
                <= 1e-12 * (g * pp / rho).sqrt());
            // stiffened gas
            let sg = EosParams::stiffened_gas(g, pi);
            let e_sg = (p + g * pi) / ((g - 1.0) * rho);
            prop_assert!((sg.internal_energy_unchecked(rho, p) - e_sg).abs() <= 1e-12 * e_sg.abs().max(1e-12));
            prop_assert!((sg.sound_speed_unchecked(rho, p) - (g * (p + pi) / rho).sqrt()).abs()
                <= 1e-12 * (g * (p + pi) / rho).sqrt());
            // co-volume gas
            let cv = EosParams { gamma: g, pi: 0.0, b };
            let e_cv = pp * (1.0 - b * rho) / ((g - 1.0) * rho);
            prop_assert!((cv.internal_energy_unchecked(rho, pp) - e_cv).abs() <= 1e-12 * e_cv);
            let a_cv = (g * pp / (rho * (1.0 - b * rho))).sqrt();
            prop_assert!((cv.sound_speed_unchecked(rho, pp) - a_cv).abs() <= 1e-12 * a_cv);
            prop_assert!(e.is_finite() && a > 0.0);
        }

        #[test]
        fn sound_speed_increases_with_pressure((params, w) in valid_state(), dp in 1e-6f64..1.0) {
            let a0 = params.sound_speed_unchecked(w.rho, w.p);
            let a1 = params.sound_speed_unchecked(w.rho, w.p + dp);
            prop_assert!(a1 > a0);
        }
    }
}
