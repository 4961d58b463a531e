//! Full-information contract: the principal chooses rent and effort directly,
//! subject to the agent's reservation constraint.
//!
//! The multiplier `lambda_lag` of the reservation constraint pins down
//! deterministic schedules
//!
//! ```text
//! R*_t = (U')^{-1}(e^{(lambda-delta)t} / lambda_lag)
//! A*_t = max((h'/phi')^{-1}(e^{(lambda-delta)t} / lambda_lag), 0)
//! ```
//!
//! and is the root of `G(lambda_lag) = x`, where `G` is the agent's
//! discounted utility under those schedules. `G` is increasing, so the root
//! is bracketed and bisected. The contract is offered iff the discounted
//! surplus `I(x) = int e^{-delta s} (phi(A*_s) - R*_s) ds` is positive.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Primitives;
use crate::numerics::{bisect, integrate_half_line, TailSettings};

const LAGRANGE_LO: f64 = 1e-12;
const LAGRANGE_HI: f64 = 1e12;
/// Residual target for `|G(lambda_lag) - x|`.
pub const LAGRANGE_RESIDUAL: f64 = 1e-10;

/// Optimal stopping time of the first-best contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TauStar {
    /// The contract is not offered.
    Zero,
    /// The contract runs forever.
    Infinity,
}

impl TauStar {
    pub fn as_str(self) -> &'static str {
        match self {
            TauStar::Zero => "ZERO",
            TauStar::Infinity => "INFINITY",
        }
    }
}

/// Rent, effort and instantaneous principal surplus at one date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub rent: f64,
    pub effort: f64,
    pub surplus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstBestSolution {
    pub x: f64,
    pub lambda_lag: f64,
    pub tau_star: TauStar,
    /// `I(x)`, the discounted surplus of running the contract forever.
    pub surplus_integral: f64,
    /// Principal value: `I(x)` when offered, otherwise 0.
    pub value: f64,
}

impl FirstBestSolution {
    /// Rent/effort/surplus schedule at time `t`.
    pub fn schedule<M: Primitives + ?Sized>(&self, model: &M, t: f64) -> Result<Schedule> {
        schedules(model, self.lambda_lag, t)
    }
}

fn check_multiplier(lambda_lag: f64) -> Result<()> {
    if lambda_lag > 0.0 && lambda_lag.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "lagrange multiplier",
            value: lambda_lag,
        })
    }
}

/// Time after which the effort schedule leaves zero, if it ever sits there.
fn effort_kink<M: Primitives + ?Sized>(model: &M, lambda_lag: f64) -> Option<f64> {
    let growth = model.agent_rate() - model.principal_rate();
    let k = lambda_lag * model.cost_impact_ratio(0.0);
    (growth > 0.0 && k > 1.0).then(|| k.ln() / growth)
}

fn marginal_path<M: Primitives + ?Sized>(model: &M, lambda_lag: f64, t: f64) -> f64 {
    ((model.agent_rate() - model.principal_rate()) * t).exp() / lambda_lag
}

/// `(R*_t, A*_t, H_t)` for a given multiplier.
pub fn schedules<M: Primitives + ?Sized>(model: &M, lambda_lag: f64, t: f64) -> Result<Schedule> {
    check_multiplier(lambda_lag)?;
    if !(t >= 0.0) {
        return Err(Error::Domain { what: "schedule time", value: t });
    }
    let y = marginal_path(model, lambda_lag, t);
    let rent = model.marginal_utility_inverse(y);
    let effort = model.ratio_inverse(y)?.max(0.0);
    Ok(Schedule {
        rent,
        effort,
        surplus: model.impact(effort) - rent,
    })
}

/// `G(lambda_lag)`: the agent's discounted utility of the first-best schedules,
/// by adaptive Gauss-Legendre quadrature on the half line.
pub fn reservation_integral<M: Primitives + ?Sized>(model: &M, lambda_lag: f64) -> Result<f64> {
    check_multiplier(lambda_lag)?;
    let lambda = model.agent_rate();
    let integrand = |s: f64| {
        let y = marginal_path(model, lambda_lag, s);
        let rent = model.marginal_utility_inverse(y);
        let effort = model.ratio_inverse(y).map_or(f64::NAN, |a| a.max(0.0));
        (-lambda * s).exp() * (model.utility(rent) - model.cost(effort))
    };
    let breaks: Vec<f64> = effort_kink(model, lambda_lag).into_iter().collect();
    integrate_half_line(&integrand, &breaks, TailSettings::default())
}

/// `I`: the principal's discounted surplus `int e^{-delta s} H_s ds` for a
/// given multiplier.
pub fn surplus_integral<M: Primitives + ?Sized>(model: &M, lambda_lag: f64) -> Result<f64> {
    check_multiplier(lambda_lag)?;
    let delta = model.principal_rate();
    let integrand = |s: f64| {
        let y = marginal_path(model, lambda_lag, s);
        let rent = model.marginal_utility_inverse(y);
        let effort = model.ratio_inverse(y).map_or(f64::NAN, |a| a.max(0.0));
        (-delta * s).exp() * (model.impact(effort) - rent)
    };
    let breaks: Vec<f64> = effort_kink(model, lambda_lag).into_iter().collect();
    integrate_half_line(&integrand, &breaks, TailSettings::default())
}

/// Closed form of `G` for the exponential/power family; two branches either
/// side of `lambda_lag = phi_max alpha / beta`, where the effort schedule
/// starts pinned at zero.
pub fn closed_form_g<M: Primitives + ?Sized>(model: &M, lambda_lag: f64) -> Result<f64> {
    check_multiplier(lambda_lag)?;
    let m = model.parametric().ok_or(Error::Unsupported("closed_form_g"))?;
    let (alpha, beta, phi_max) = (m.effort_impact.alpha, m.effort_cost.beta, m.effort_impact.phi_max);
    let (c, p) = (m.utility.c, m.utility.p);
    let (lambda, delta) = (m.lambda, m.delta);

    let q = p / (p - 1.0);
    let utility_term = c / ((p * c * lambda_lag).powf(q) * (lambda - q * (lambda - delta)));
    let k = phi_max * alpha / (beta * lambda_lag);
    let effort_rate = (alpha + beta) / (lambda * alpha + beta * delta);

    if lambda_lag <= phi_max * alpha / beta {
        Ok(utility_term + 1.0 / lambda - k.powf(beta / (alpha + beta)) * effort_rate)
    } else if lambda != delta {
        let kp = k.powf(lambda / (lambda - delta));
        Ok(utility_term + kp / lambda - effort_rate * kp)
    } else {
        Ok(utility_term)
    }
}

/// Root of `G(lambda_lag) = x`: geometric bracketing then bisection in
/// `ln(lambda_lag)`.
///
/// `x = 0` is accepted so that the value at the origin can be reported.
pub fn solve_lagrange<M: Primitives + ?Sized>(model: &M, x: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Domain {
            what: "reservation value",
            value: x,
        });
    }
    let g = |l: f64| reservation_integral(model, l);
    let bracket_err = || Error::BracketFailure {
        target: x,
        lo: LAGRANGE_LO,
        hi: LAGRANGE_HI,
    };

    let (mut lo, mut hi) = (1.0, 1.0);
    let mut g_lo = g(lo)?;
    while g_lo > x {
        lo *= 0.25;
        if lo < LAGRANGE_LO {
            return Err(bracket_err());
        }
        g_lo = g(lo)?;
    }
    let mut g_hi = g_lo;
    while g_hi < x {
        hi *= 4.0;
        if hi > LAGRANGE_HI {
            return Err(bracket_err());
        }
        g_hi = g(hi)?;
    }
    if (g_lo - x).abs() <= LAGRANGE_RESIDUAL {
        return Ok(lo);
    }
    if (g_hi - x).abs() <= LAGRANGE_RESIDUAL {
        return Ok(hi);
    }

    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut best = (f64::INFINITY, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let l = mid.exp();
        let r = g(l)? - x;
        if r.abs() < best.0 {
            best = (r.abs(), l);
        }
        if r.abs() <= LAGRANGE_RESIDUAL || mid <= a || mid >= b {
            break;
        }
        if r < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(best.1)
}

/// First-best contract for reservation value `x`.
pub fn principal_value_fb<M: Primitives + ?Sized>(model: &M, x: f64) -> Result<FirstBestSolution> {
    let lambda_lag = solve_lagrange(model, x)?;
    let integral = surplus_integral(model, lambda_lag)?;
    // A tie at zero surplus is reported as not offered.
    let (tau_star, value) = if integral > 0.0 {
        (TauStar::Infinity, integral)
    } else {
        (TauStar::Zero, 0.0)
    };
    Ok(FirstBestSolution {
        x,
        lambda_lag,
        tau_star,
        surplus_integral: integral,
        value,
    })
}

/// Largest reservation value at which the contract is still offered: the
/// root of `x -> I(x)`, which is decreasing. Bisection to `x_tol`.
pub fn continuation_boundary<M: Primitives + ?Sized>(model: &M, x_tol: f64) -> Result<f64> {
    let surplus = |x: f64| -> Result<f64> { surplus_integral(model, solve_lagrange(model, x)?) };
    if surplus(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while surplus(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::BracketFailure {
                target: 0.0,
                lo: 0.0,
                hi,
            });
        }
    }
    let mut failure = None;
    let root = bisect(
        |x| match surplus(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        hi,
        x_tol,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(root),
    }
}
