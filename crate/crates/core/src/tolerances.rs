//! Default numerical tolerances.
//!
//! Every threshold used by the library lives here. [`Tolerances`] bundles the
//! ones a caller may want to override; it is carried by
//! [`ResolventContext`](crate::resolvent::ResolventContext) and read by every
//! downstream computation.

use serde::{Deserialize, Serialize};

use crate::inversion::Bromwich;

/// Relative guard radius around the pole of `k(p)` at `p = lambda`.
pub const POLE_GUARD_REL: f64 = 1e-9;

/// Root accuracy target: `|k(c(s)) - s| <= ROOT_TOL * (1 + s)`.
pub const ROOT_TOL: f64 = 1e-12;

/// `|D(p)|` below this (relative to `(c + s)(1 + |p|)`) is treated as a pole of `R(p, s)`.
pub const RESOLVENT_POLE_GUARD: f64 = 1e-14;

/// Radius around `z = c(s)` inside which the removable singularity of
/// `(z - c(s)) R(z, s)` is evaluated by a Taylor expansion.
pub const REMOVABLE_GUARD: f64 = 1e-4;

/// Minimum separation of partial-fraction poles.
pub const POLE_SEPARATION: f64 = 1e-8;

/// Aliasing exponent of the Fourier-series Bromwich rule; the discretisation
/// error of the shifted original is about `exp(-A)`.
pub const BROMWICH_ALIASING: f64 = 26.0;

/// Number of contour nodes before Euler summation (doubled once for the check).
pub const BROMWICH_NODES: usize = 40;

/// Binomial order of the Euler summation.
pub const BROMWICH_EULER_ORDER: usize = 24;

/// Relative agreement required between `N` and `2N` node estimates.
pub const BROMWICH_REL_TOL: f64 = 1e-9;

/// Relative tolerance of the adaptive Gauss-Kronrod quadrature.
pub const QUAD_REL_TOL: f64 = 1e-12;

/// Absolute floor of the adaptive quadrature tolerance.
pub const QUAD_ABS_TOL: f64 = 1e-15;

/// Absolute tolerance of averages over the exponential overshoot `gamma`.
pub const GAMMA_AVERAGE_TOL: f64 = 1e-10;

/// Tail horizon, in units of `1 / (lambda - c(s))`, for resolvent tail integrals.
pub const TAIL_HORIZON: f64 = 40.0;

/// The two exit representations must agree to this relative error or an
/// error is raised.
pub const REPRESENTATION_MISMATCH: f64 = 1e-5;

/// Violation of `down + up + s * survival = 1` beyond this raises an error.
pub const CLOSURE_VIOLATION: f64 = 1e-6;

/// Default Gaver-Stehfest order for time-domain inversion in `s`.
pub const GAVER_STEHFEST_ORDER: usize = 14;

/// Default per-path jump cap of the simulator.
pub const MAX_JUMPS: usize = 1_000_000;

/// Simulated clocks are stopped once `exp(-s t)` drops below `exp(-DISCOUNT_HORIZON)`.
pub const DISCOUNT_HORIZON: f64 = 50.0;

/// Overridable numerical settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub bromwich: Bromwich,
    pub quad_rel: f64,
    pub quad_abs: f64,
    pub gamma_average: f64,
    pub tail_horizon: f64,
    pub removable_guard: f64,
    pub representation_mismatch: f64,
    pub closure_violation: f64,
    pub gaver_stehfest_order: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bromwich: Bromwich::default(),
            quad_rel: QUAD_REL_TOL,
            quad_abs: QUAD_ABS_TOL,
            gamma_average: GAMMA_AVERAGE_TOL,
            tail_horizon: TAIL_HORIZON,
            removable_guard: REMOVABLE_GUARD,
            representation_mismatch: REPRESENTATION_MISMATCH,
            closure_violation: CLOSURE_VIOLATION,
            gaver_stehfest_order: GAVER_STEHFEST_ORDER,
        }
    }
}
