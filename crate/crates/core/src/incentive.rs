//! Agent best response to a sensitivity `z` of his continuation value to
//! output: the Hamiltonian `psi(a, z) = -h(a) + z phi(a) / sigma`, its
//! maximizer, and the inverse map.
//!
//! The maximizer is zero up to the threshold `z = sigma h'(0)/phi'(0)` and
//! strictly increasing beyond it, so `effort_from_z` is a bijection from
//! `{0} U (threshold, inf)` onto `[0, inf)`.

use crate::model::Primitives;

/// Newtype for the sensitivity of the agent's value to output.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EffortSensitivity(pub f64);

pub fn hamiltonian_psi<M: Primitives + ?Sized>(model: &M, a: f64, z: f64) -> f64 {
    -model.cost(a) + z * model.impact(a) / model.volatility()
}

/// `sigma h'(0) / phi'(0)`: below this sensitivity the agent exerts no effort.
pub fn effort_threshold<M: Primitives + ?Sized>(model: &M) -> f64 {
    model.volatility() * model.cost_impact_ratio(0.0)
}

pub fn effort_from_z<M: Primitives + ?Sized>(model: &M, z: EffortSensitivity) -> f64 {
    if z.0 <= effort_threshold(model) {
        return 0.0;
    }
    // z / sigma > h'(0)/phi'(0) > 0, so the inverse is defined and positive.
    model
        .ratio_inverse(z.0 / model.volatility())
        .map_or(0.0, |a| a.max(0.0))
}

pub fn z_from_effort<M: Primitives + ?Sized>(model: &M, a: f64) -> EffortSensitivity {
    if a > 0.0 {
        EffortSensitivity(model.volatility() * model.cost_impact_ratio(a))
    } else {
        EffortSensitivity(0.0)
    }
}

/// Diffusion coefficient of the agent's continuation value under effort `a`:
/// `sigma h'(a)/phi'(a)` for `a > 0`, zero otherwise.
pub fn value_volatility<M: Primitives + ?Sized>(model: &M, a: f64) -> f64 {
    z_from_effort(model, a).0
}
