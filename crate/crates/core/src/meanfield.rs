//! Mean-field (well-mixed) approximation of the stacked contact process:
//!
//! ```text
//! u1' = λ1 u1 (1 - u1 - u2) - u1 - λ2 u2 u1 + δ u2
//! u2' = λ1 u2 (1 - u1 - u2) - u2 + λ2 u2 u1 - δ u2
//! ```
//!
//! The host density `u = u1 + u2` solves the logistic equation
//! `u' = (λ1 (1 - u) - 1) u` and converges to `u* = 1 - 1/λ1` when `λ1 > 1`.
//! On the manifold `u = u*` the infection solves `u2' = (λ2 (u* - u2) - δ) u2`,
//! so it survives iff `λ2 u* > δ`.
//!
//! Note: the solution curves usually shown for `λ1 = 4, λ2 = 2, δ = 2` do not
//! satisfy `λ2 u* > δ` (`1.5 < 2`); with those rates the infection dies out.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lattice::ParamSet;

/// Densities of healthy (`u1`) and infected (`u2`) hosts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MFState {
    pub u1: f64,
    pub u2: f64,
}

const SIMPLEX_TOL: f64 = 1e-9;

impl MFState {
    pub fn new(u1: f64, u2: f64) -> Result<Self> {
        let s = MFState { u1, u2 };
        s.check().map_err(|detail| Error::SimplexViolation { time: 0.0, detail })?;
        Ok(s)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if !(self.u1.is_finite() && self.u2.is_finite()) {
            return Err(format!("non-finite state {self:?}"));
        }
        if self.u1 < -SIMPLEX_TOL || self.u2 < -SIMPLEX_TOL || self.u1 + self.u2 > 1.0 + SIMPLEX_TOL {
            return Err(format!("state {self:?} is outside the simplex"));
        }
        Ok(())
    }

    pub fn hosts(&self) -> f64 {
        self.u1 + self.u2
    }
}

/// Right-hand side of the mean-field system.
pub fn mf_derivative(s: MFState, params: &ParamSet) -> (f64, f64) {
    let (l1, l2, d) = (params.lambda1(), params.lambda2(), params.delta());
    let free = 1.0 - s.u1 - s.u2;
    let du1 = l1 * s.u1 * free - s.u1 - l2 * s.u2 * s.u1 + d * s.u2;
    let du2 = l1 * s.u2 * free - s.u2 + l2 * s.u2 * s.u1 - d * s.u2;
    (du1, du2)
}

fn rk4_step(s: MFState, h: f64, params: &ParamSet) -> MFState {
    let at = |u1: f64, u2: f64| mf_derivative(MFState { u1, u2 }, params);
    let k1 = at(s.u1, s.u2);
    let k2 = at(s.u1 + 0.5 * h * k1.0, s.u2 + 0.5 * h * k1.1);
    let k3 = at(s.u1 + 0.5 * h * k2.0, s.u2 + 0.5 * h * k2.1);
    let k4 = at(s.u1 + h * k3.0, s.u2 + h * k3.1);
    MFState {
        u1: s.u1 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        u2: s.u2 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    }
}

/// Sampled solution.
#[derive(Clone, Debug, PartialEq)]
pub struct MfTrajectory {
    pub samples: Vec<(f64, MFState)>,
}

impl MfTrajectory {
    pub fn last(&self) -> MFState {
        self.samples.last().map(|s| s.1).expect("trajectory has at least the initial sample")
    }

    /// `t,u1,u2` rows with `#` header lines.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        out.push_str("t,u1,u2\n");
        for (t, s) in &self.samples {
            let _ = writeln!(out, "{t},{},{}", s.u1, s.u2);
        }
        out
    }
}

pub const DEFAULT_STEP: f64 = 1e-3;

/// Classical fourth-order Runge-Kutta with fixed step, sampled once per time unit.
pub fn mf_integrate(s0: MFState, params: &ParamSet, horizon: f64, step: f64) -> Result<MfTrajectory> {
    mf_integrate_sampled(s0, params, horizon, step, 1.0)
}

/// As [`mf_integrate`], sampling every `sample_every` time units (and at the horizon).
pub fn mf_integrate_sampled(
    s0: MFState,
    params: &ParamSet,
    horizon: f64,
    step: f64,
    sample_every: f64,
) -> Result<MfTrajectory> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(crate::error::invalid("step", "step must be positive"));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(crate::error::invalid("horizon", "horizon must be finite and >= 0"));
    }
    s0.check().map_err(|detail| Error::SimplexViolation { time: 0.0, detail })?;
    let n = (horizon / step).ceil() as usize;
    let per_sample = ((sample_every / step).round() as usize).max(1);
    let mut samples = vec![(0.0, s0)];
    let mut s = s0;
    for i in 1..=n {
        let t_prev = (i - 1) as f64 * step;
        let h = step.min(horizon - t_prev);
        s = rk4_step(s, h, params);
        let t = if i == n { horizon } else { i as f64 * step };
        s.check().map_err(|detail| Error::SimplexViolation { time: t, detail })?;
        if i % per_sample == 0 || i == n {
            samples.push((t, s));
        }
    }
    Ok(MfTrajectory { samples })
}

/// Stability read off the two scalar reductions (host logistic equation and
/// infection equation on the host manifold).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

/// `λ2 (1 - 1/λ1) > δ` (false when `λ1 <= 1`).
pub fn coexistence_condition(params: &ParamSet) -> bool {
    params.lambda1() > 1.0 && params.lambda2() * params.host_equilibrium() > params.delta()
}

/// Fixed points: extinction, host-only `(u*, 0)` when `λ1 > 1`, and the
/// interior point `(δ/λ2, u* - δ/λ2)` when the coexistence condition holds.
pub fn mf_equilibria(params: &ParamSet) -> Vec<(MFState, Stability)> {
    let l1 = params.lambda1();
    let mut out = Vec::with_capacity(3);
    let origin = if l1 <= 1.0 { Stability::Stable } else { Stability::Unstable };
    out.push((MFState { u1: 0.0, u2: 0.0 }, origin));
    if l1 > 1.0 {
        let ustar = params.host_equilibrium();
        let coexist = coexistence_condition(params);
        let host_only = if coexist { Stability::Unstable } else { Stability::Stable };
        out.push((MFState { u1: ustar, u2: 0.0 }, host_only));
        if coexist {
            let u1 = params.delta() / params.lambda2();
            out.push((MFState { u1, u2: ustar - u1 }, Stability::Stable));
        }
    }
    out
}
