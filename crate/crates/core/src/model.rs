//! Economic primitives: effort impact on output, effort cost, the agent's
//! utility, and the two discount rates.
//!
//! Every solver in the crate is written against the [`Primitives`] trait.
//! [`ModelParams`] is the exponential/power family used throughout
//! (`phi(a) = phi_max (1 - e^{-alpha a})`, `h(a) = e^{beta a} - 1`,
//! `U(x) = c x^p`) and overrides every inverse with its closed form.
//! [`FunctionTriple`] accepts arbitrary user functions and falls back to
//! bisection on the monotone maps.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, InvalidParam, Result};
use crate::numerics::invert_monotone;

/// Model functions and rates shared by the first-best and second-best solvers.
pub trait Primitives: Send + Sync {
    /// Effort impact on the output drift, `phi(a)`.
    fn impact(&self, a: f64) -> f64;
    fn impact_prime(&self, a: f64) -> f64;
    /// Effort cost, `h(a)`.
    fn cost(&self, a: f64) -> f64;
    fn cost_prime(&self, a: f64) -> f64;
    /// Agent utility of the rent, `U(r)`.
    fn utility(&self, r: f64) -> f64;
    fn utility_prime(&self, r: f64) -> f64;

    /// Agent discount rate (lambda).
    fn agent_rate(&self) -> f64;
    /// Principal discount rate (delta).
    fn principal_rate(&self) -> f64;
    /// Output volatility (sigma).
    fn volatility(&self) -> f64;

    /// `U^{-1}(y)`. Arguments below zero are clamped to `U^{-1}(0) = 0`.
    fn utility_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        invert_monotone(|r| self.utility(r), y, 0.0, true)
    }

    /// `(U')^{-1}(y)` for `y > 0`.
    fn marginal_utility_inverse(&self, y: f64) -> f64 {
        invert_monotone(|r| self.utility_prime(r), y, 1e-300, false)
    }

    /// `h'(a) / phi'(a)`, strictly increasing.
    fn cost_impact_ratio(&self, a: f64) -> f64 {
        self.cost_prime(a) / self.impact_prime(a)
    }

    /// `(h'/phi')^{-1}(y)` for `y > 0`.
    ///
    /// The generic implementation only searches `a >= 0` and returns `0` when
    /// `y <= h'(0)/phi'(0)`; every caller clamps at zero anyway.
    fn ratio_inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Domain {
                what: "ratio_inverse",
                value: y,
            });
        }
        if y <= self.cost_impact_ratio(0.0) {
            return Ok(0.0);
        }
        Ok(invert_monotone(|a| self.cost_impact_ratio(a), y, 0.0, true))
    }

    /// The closed-form family behind this model, if any.
    fn parametric(&self) -> Option<&ModelParams> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffortImpact {
    pub phi_max: f64,
    pub alpha: f64,
}

impl EffortImpact {
    pub fn eval(&self, a: f64) -> f64 {
        self.phi_max * -(-self.alpha * a).exp_m1()
    }

    pub fn derivative(&self, a: f64) -> f64 {
        self.phi_max * self.alpha * (-self.alpha * a).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffortCost {
    pub beta: f64,
}

impl EffortCost {
    pub fn eval(&self, a: f64) -> f64 {
        (self.beta * a).exp_m1()
    }

    pub fn derivative(&self, a: f64) -> f64 {
        self.beta * (self.beta * a).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentUtility {
    pub c: f64,
    pub p: f64,
}

impl AgentUtility {
    pub fn eval(&self, x: f64) -> f64 {
        self.c * x.powf(self.p)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.p * self.c * x.powf(self.p - 1.0)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            (y / self.c).powf(1.0 / self.p)
        }
    }

    pub fn marginal_inverse(&self, y: f64) -> f64 {
        (y / (self.p * self.c)).powf(1.0 / (self.p - 1.0))
    }
}

/// Validated model parameters. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub effort_impact: EffortImpact,
    pub effort_cost: EffortCost,
    pub utility: AgentUtility,
    pub lambda: f64,
    pub delta: f64,
    pub sigma: f64,
    pub x_reserve: f64,
}

impl ModelParams {
    /// `(h'/phi')^{-1}(y) = ln(phi_max alpha y / beta) / (alpha + beta)`.
    /// Unclamped: negative below the kink `y = beta / (phi_max alpha)`.
    pub fn ratio_inverse_unclamped(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::Domain {
                what: "ratio_inverse",
                value: y,
            });
        }
        let EffortImpact { phi_max, alpha } = self.effort_impact;
        let beta = self.effort_cost.beta;
        Ok((phi_max * alpha * y / beta).ln() / (alpha + beta))
    }

    /// Same model with a different volatility.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        let mut raw = RawParams::from(*self);
        raw.sigma = sigma;
        raw.validate()
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        RawParams::default()
            .validate()
            .expect("default parameters are valid")
    }
}

impl Primitives for ModelParams {
    fn impact(&self, a: f64) -> f64 {
        self.effort_impact.eval(a)
    }
    fn impact_prime(&self, a: f64) -> f64 {
        self.effort_impact.derivative(a)
    }
    fn cost(&self, a: f64) -> f64 {
        self.effort_cost.eval(a)
    }
    fn cost_prime(&self, a: f64) -> f64 {
        self.effort_cost.derivative(a)
    }
    fn utility(&self, r: f64) -> f64 {
        self.utility.eval(r)
    }
    fn utility_prime(&self, r: f64) -> f64 {
        self.utility.derivative(r)
    }
    fn agent_rate(&self) -> f64 {
        self.lambda
    }
    fn principal_rate(&self) -> f64 {
        self.delta
    }
    fn volatility(&self) -> f64 {
        self.sigma
    }
    fn utility_inverse(&self, y: f64) -> f64 {
        self.utility.inverse(y)
    }
    fn marginal_utility_inverse(&self, y: f64) -> f64 {
        self.utility.marginal_inverse(y)
    }
    fn cost_impact_ratio(&self, a: f64) -> f64 {
        let EffortImpact { phi_max, alpha } = self.effort_impact;
        let beta = self.effort_cost.beta;
        beta / (phi_max * alpha) * ((alpha + beta) * a).exp()
    }
    fn ratio_inverse(&self, y: f64) -> Result<f64> {
        self.ratio_inverse_unclamped(y)
    }
    fn parametric(&self) -> Option<&ModelParams> {
        Some(self)
    }
}

/// Unvalidated parameter set, as read from a config file. Defaults are the
/// reference calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub alpha: f64,
    pub beta: f64,
    pub phi_max: f64,
    pub c: f64,
    pub p: f64,
    pub lambda: f64,
    pub delta: f64,
    pub sigma: f64,
    pub x_reserve: f64,
}

impl Default for RawParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.1,
            phi_max: 3.0,
            c: 1.0,
            p: 0.25,
            lambda: 0.2,
            delta: 0.08,
            sigma: 1.85,
            x_reserve: 0.1,
        }
    }
}

impl From<ModelParams> for RawParams {
    fn from(m: ModelParams) -> Self {
        Self {
            alpha: m.effort_impact.alpha,
            beta: m.effort_cost.beta,
            phi_max: m.effort_impact.phi_max,
            c: m.utility.c,
            p: m.utility.p,
            lambda: m.lambda,
            delta: m.delta,
            sigma: m.sigma,
            x_reserve: m.x_reserve,
        }
    }
}

impl RawParams {
    pub fn fields(&self) -> [(&'static str, f64); 9] {
        [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("phi_max", self.phi_max),
            ("c", self.c),
            ("p", self.p),
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("sigma", self.sigma),
            ("x_reserve", self.x_reserve),
        ]
    }

    pub fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "phi_max" => &mut self.phi_max,
            "c" => &mut self.c,
            "p" => &mut self.p,
            "lambda" => &mut self.lambda,
            "delta" => &mut self.delta,
            "sigma" => &mut self.sigma,
            "x_reserve" => &mut self.x_reserve,
            _ => return None,
        })
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<ModelParams> {
        let mut bad = Vec::new();
        let mut check = |ok: bool, name: &'static str, constraint: &'static str| {
            if !ok {
                bad.push(InvalidParam { name, constraint });
            }
        };
        for (name, v) in self.fields() {
            check(v.is_finite(), name, "finite");
        }
        check(self.phi_max > 0.0, "phi_max", "phi_max > 0");
        check(self.alpha > 0.0, "alpha", "alpha > 0");
        check(self.beta > 0.0, "beta", "beta > 0");
        check(self.c > 0.0, "c", "c > 0");
        check(self.p > 0.0 && self.p < 1.0, "p", "0 < p < 1");
        check(self.delta > 0.0, "delta", "delta > 0");
        check(self.lambda >= self.delta, "lambda", "lambda >= delta");
        check(self.sigma > 0.0, "sigma", "sigma > 0");
        check(self.x_reserve >= 0.0, "x_reserve", "x_reserve >= 0");
        if !bad.is_empty() {
            return Err(Error::InvalidParams(bad));
        }
        Ok(ModelParams {
            effort_impact: EffortImpact {
                phi_max: self.phi_max,
                alpha: self.alpha,
            },
            effort_cost: EffortCost { beta: self.beta },
            utility: AgentUtility { c: self.c, p: self.p },
            lambda: self.lambda,
            delta: self.delta,
            sigma: self.sigma,
            x_reserve: self.x_reserve,
        })
    }
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied `(phi, h, U)` with derivatives. Inverses are computed by
/// bisection; the caller is responsible for the monotonicity and curvature
/// assumptions (phi concave increasing bounded, h convex increasing,
/// U concave increasing with Inada limits).
pub struct FunctionTriple {
    pub impact: ScalarFn,
    pub impact_prime: ScalarFn,
    pub cost: ScalarFn,
    pub cost_prime: ScalarFn,
    pub utility: ScalarFn,
    pub utility_prime: ScalarFn,
    pub lambda: f64,
    pub delta: f64,
    pub sigma: f64,
}

impl fmt::Debug for FunctionTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionTriple")
            .field("lambda", &self.lambda)
            .field("delta", &self.delta)
            .field("sigma", &self.sigma)
            .finish_non_exhaustive()
    }
}

impl FunctionTriple {
    /// Wraps the closed-form family as opaque closures. Mostly useful for
    /// checking the bisection fallbacks against the exact inverses.
    pub fn from_params(m: &ModelParams) -> Self {
        let (fi, fc, fu) = (m.effort_impact, m.effort_cost, m.utility);
        Self {
            impact: Box::new(move |a| fi.eval(a)),
            impact_prime: Box::new(move |a| fi.derivative(a)),
            cost: Box::new(move |a| fc.eval(a)),
            cost_prime: Box::new(move |a| fc.derivative(a)),
            utility: Box::new(move |x| fu.eval(x)),
            utility_prime: Box::new(move |x| fu.derivative(x)),
            lambda: m.lambda,
            delta: m.delta,
            sigma: m.sigma,
        }
    }
}

impl Primitives for FunctionTriple {
    fn impact(&self, a: f64) -> f64 {
        (self.impact)(a)
    }
    fn impact_prime(&self, a: f64) -> f64 {
        (self.impact_prime)(a)
    }
    fn cost(&self, a: f64) -> f64 {
        (self.cost)(a)
    }
    fn cost_prime(&self, a: f64) -> f64 {
        (self.cost_prime)(a)
    }
    fn utility(&self, r: f64) -> f64 {
        (self.utility)(r)
    }
    fn utility_prime(&self, r: f64) -> f64 {
        (self.utility_prime)(r)
    }
    fn agent_rate(&self) -> f64 {
        self.lambda
    }
    fn principal_rate(&self) -> f64 {
        self.delta
    }
    fn volatility(&self) -> f64 {
        self.sigma
    }
}
