//! Forward simulation of the second-best contract.
//!
//! Euler-Maruyama on the agent's continuation value
//!
//! ```text
//! dJ = (lambda J - U(r*) + h(a*)) dt + (h'/phi')(a*) 1_{a*>0} (dX - phi(a*) dt)
//! dX = phi(a) dt + sigma dW
//! ```
//!
//! where `a` is the effort actually exerted (`a*` unless a deviation is
//! tested). Under the recommended effort `dX - phi(a*) dt = sigma dW`, which
//! gives the usual `sigma (h'/phi')(a*) dW` diffusion.
//!
//! Each path draws from its own ChaCha8 stream `(seed, path_id)`, so results
//! do not depend on the thread count. A path ends when it enters the stop
//! region (nearest-node flag), when `J <= 0` (absorbed, paid nothing), or at
//! the horizon (censored, valued at the discounted obstacle).

mod deviation;

pub use deviation::{Deviation, DeviationRegistry};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hjbvi::SecondBestSolution;
use crate::model::Primitives;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Number of leading paths whose full trajectories are kept.
    pub record_paths: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 200.0,
            n_paths: 10_000,
            seed: 42,
            record_paths: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("sim.dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("sim.horizon must be positive, got {}", self.horizon)));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("sim.n_paths must be >= 1".into()));
        }
        Ok(())
    }

    fn max_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Stopped,
    Floor,
    Censored,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Stopped => "stopped",
            Termination::Floor => "floor",
            Termination::Censored => "censored",
        }
    }
}

/// Summary of one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathOutcome {
    pub path_id: u64,
    pub tau: f64,
    pub termination: Termination,
    /// `sum e^{-delta t}(phi(a) - r) dt - e^{-delta tau} U^{-1}(J_tau)`.
    pub principal_payoff: f64,
    /// `sum e^{-lambda t}(U(r) - h(a)) dt + e^{-lambda tau} max(J_tau, 0)`.
    pub agent_objective: f64,
    pub terminal_payment: f64,
    /// Smallest recommended effort met along the path.
    pub min_effort: f64,
    /// Discrete-time agent martingale at the requested checkpoints.
    pub martingale: Vec<f64>,
}

/// Full trajectory; `j`, `x` have one more entry than `dw`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub path_id: u64,
    pub dt: f64,
    pub j: Vec<f64>,
    pub x: Vec<f64>,
    pub dw: Vec<f64>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

#[derive(Debug, Clone)]
pub struct PathBundle {
    pub x0: f64,
    pub config: SimConfig,
    pub outcomes: Vec<PathOutcome>,
    pub trajectories: Vec<Trajectory>,
    /// Step indices at which the martingale was sampled.
    pub checkpoints: Vec<usize>,
}

struct Engine<'a, M: Primitives + ?Sized> {
    model: &'a M,
    solution: &'a SecondBestSolution,
    cfg: &'a SimConfig,
    checkpoints: &'a [usize],
}

impl<M: Primitives + ?Sized> Engine<'_, M> {
    fn ratio(&self, a: f64) -> f64 {
        if a > 0.0 {
            self.model.cost_impact_ratio(a)
        } else {
            0.0
        }
    }

    fn run(&self, x0: f64, path_id: u64, dev: &dyn Deviation, record: bool) -> Result<(PathOutcome, Option<Trajectory>)> {
        let m = self.model;
        let dt = self.cfg.dt;
        let sqrt_dt = dt.sqrt();
        let sigma = m.volatility();
        let lambda = m.agent_rate();
        let delta = m.principal_rate();
        let x_max = self.solution.grid.x_max;
        let max_steps = self.cfg.max_steps();

        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(path_id);

        let decay_p = (-delta * dt).exp();
        let decay_a = (-lambda * dt).exp();
        let beta = 1.0 / (1.0 + lambda * dt);
        let (mut disc_p, mut disc_a, mut disc_m) = (1.0, 1.0, 1.0);

        let mut j = x0;
        let mut x = 0.0;
        let mut principal = 0.0;
        let mut agent = 0.0;
        let mut mart_flow = 0.0;
        let mut min_effort = f64::INFINITY;
        let mut martingale = Vec::with_capacity(self.checkpoints.len());
        let mut next_cp = 0;
        let mut traj = record.then(|| (vec![j], vec![x], Vec::new()));

        let mut k = 0;
        let termination = loop {
            while next_cp < self.checkpoints.len() && self.checkpoints[next_cp] == k {
                martingale.push(disc_m * j + mart_flow);
                next_cp += 1;
            }
            if j <= 0.0 {
                break Termination::Floor;
            }
            if j >= x_max {
                break Termination::Stopped;
            }
            let fb = self.solution.feedback(j)?;
            if fb.stop {
                break Termination::Stopped;
            }
            if k == max_steps {
                break Termination::Censored;
            }
            let (r, a) = (fb.rent, fb.effort);
            let a_dev = dev.effort(j, a);
            min_effort = min_effort.min(a);

            let z: f64 = StandardNormal.sample(&mut rng);
            let dw = sqrt_dt * z;
            let phi_a = m.impact(a);
            let phi_dev = if a_dev == a { phi_a } else { m.impact(a_dev) };
            let u_r = m.utility(r);
            // Observed dX - phi(a*) dt; exactly sigma dW when a_dev == a.
            let innovation = sigma * dw + (phi_dev - phi_a) * dt;

            principal += disc_p * (phi_dev - r) * dt;
            agent += disc_a * (u_r - m.cost(a_dev)) * dt;
            mart_flow += disc_m * beta * (u_r - m.cost(a_dev)) * dt;

            j += (lambda * j - u_r + m.cost(a)) * dt + self.ratio(a) * innovation;
            x += phi_dev * dt + sigma * dw;
            k += 1;
            disc_p *= decay_p;
            disc_a *= decay_a;
            disc_m *= beta;
            if let Some((js, xs, dws)) = traj.as_mut() {
                js.push(j);
                xs.push(x);
                dws.push(dw);
            }
        };
        while next_cp < self.checkpoints.len() {
            martingale.push(disc_m * j + mart_flow);
            next_cp += 1;
        }

        let terminal_payment = match termination {
            Termination::Floor => 0.0,
            _ => m.utility_inverse(j),
        };
        principal -= disc_p * terminal_payment;
        agent += disc_a * j.max(0.0);
        Ok((
            PathOutcome {
                path_id,
                tau: k as f64 * dt,
                termination,
                principal_payoff: principal,
                agent_objective: agent,
                terminal_payment,
                min_effort: if min_effort.is_finite() { min_effort } else { 0.0 },
                martingale,
            },
            traj.map(|(j, x, dw)| Trajectory {
                path_id,
                dt,
                j,
                x,
                dw,
                termination,
            }),
        ))
    }
}

fn check_start(solution: &SecondBestSolution, x0: f64) -> Result<()> {
    if x0 > 0.0 && x0 < solution.b_hat {
        Ok(())
    } else {
        Err(Error::PolicyOutOfRange {
            x: x0,
            x_max: solution.b_hat,
        })
    }
}

/// Runs every path with deviation `dev`; results are ordered by path id.
fn run_all<M: Primitives + ?Sized>(
    model: &M,
    solution: &SecondBestSolution,
    x0: f64,
    cfg: &SimConfig,
    dev: &dyn Deviation,
    checkpoints: &[usize],
) -> Result<(Vec<PathOutcome>, Vec<Trajectory>)> {
    cfg.validate()?;
    check_start(solution, x0)?;
    let engine = Engine {
        model,
        solution,
        cfg,
        checkpoints,
    };
    let runs: Vec<_> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|id| engine.run(x0, id, dev, (id as usize) < cfg.record_paths))
        .collect::<Result<_>>()?;
    let mut outcomes = Vec::with_capacity(runs.len());
    let mut trajectories = Vec::new();
    for (o, t) in runs {
        outcomes.push(o);
        trajectories.extend(t);
    }
    Ok((outcomes, trajectories))
}

/// Simulates the contract under the recommended policy. The martingale is
/// sampled at eight equally spaced checkpoints over the horizon.
pub fn simulate_paths<M: Primitives + ?Sized>(
    model: &M,
    solution: &SecondBestSolution,
    x0: f64,
    cfg: &SimConfig,
) -> Result<PathBundle> {
    cfg.validate()?;
    let steps = cfg.max_steps();
    let checkpoints: Vec<usize> = (0..=8).map(|q| q * steps / 8).collect();
    let baseline = DeviationRegistry::default().parse("baseline")?;
    let (outcomes, trajectories) = run_all(model, solution, x0, cfg, baseline.as_ref(), &checkpoints)?;
    Ok(PathBundle {
        x0,
        config: *cfg,
        outcomes,
        trajectories,
        checkpoints,
    })
}

/// Sample mean and standard error, summed in path order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = xs.into_iter().collect();
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloValue {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub stopped: usize,
    pub floored: usize,
    pub censored: usize,
    /// Bound on the error from valuing censored paths at the obstacle.
    pub censoring_bias_bound: f64,
}

impl MonteCarloValue {
    pub fn from_bundle<M: Primitives + ?Sized>(model: &M, solution: &SecondBestSolution, bundle: &PathBundle) -> Self {
        let est = Estimate::from_samples(bundle.outcomes.iter().map(|o| o.principal_payoff));
        let count = |t: Termination| bundle.outcomes.iter().filter(|o| o.termination == t).count();
        let censored = count(Termination::Censored);
        let x_max = solution.grid.x_max;
        let bound = (-model.principal_rate() * bundle.config.horizon).exp()
            * (solution.growth_constant + model.utility_inverse(x_max));
        Self {
            estimate: est.mean,
            std_error: est.std_error,
            n_paths: est.n,
            stopped: count(Termination::Stopped),
            floored: count(Termination::Floor),
            censored,
            censoring_bias_bound: if censored > 0 { bound } else { 0.0 },
        }
    }
}

pub fn mc_principal_value<M: Primitives + ?Sized>(
    model: &M,
    solution: &SecondBestSolution,
    x0: f64,
    cfg: &SimConfig,
) -> Result<MonteCarloValue> {
    let bundle = simulate_paths(model, solution, x0, cfg)?;
    Ok(MonteCarloValue::from_bundle(model, solution, &bundle))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationArm {
    pub name: String,
    pub agent_objective: Estimate,
    /// Baseline minus deviation, paired path by path.
    pub advantage: Estimate,
    /// Baseline falls below the deviation by more than two standard errors.
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncentiveReport {
    pub x0: f64,
    pub baseline: Estimate,
    pub arms: Vec<DeviationArm>,
}

impl IncentiveReport {
    pub fn any_violation(&self) -> bool {
        self.arms.iter().any(|a| a.violated)
    }
}

/// Agent objective under the recommended effort versus each deviation, with
/// rent and stopping left to the principal's rule and common random numbers
/// across arms.
pub fn incentive_check<M: Primitives + ?Sized>(
    model: &M,
    solution: &SecondBestSolution,
    x0: f64,
    cfg: &SimConfig,
    deviations: &[Box<dyn Deviation>],
) -> Result<IncentiveReport> {
    let registry = DeviationRegistry::default();
    let cfg = SimConfig {
        record_paths: 0,
        ..*cfg
    };
    let base = run_all(model, solution, x0, &cfg, registry.parse("baseline")?.as_ref(), &[])?.0;
    let baseline = Estimate::from_samples(base.iter().map(|o| o.agent_objective));
    let mut arms = Vec::with_capacity(deviations.len());
    for dev in deviations {
        let alt = run_all(model, solution, x0, &cfg, dev.as_ref(), &[])?.0;
        let objective = Estimate::from_samples(alt.iter().map(|o| o.agent_objective));
        let advantage = Estimate::from_samples(
            base.iter()
                .zip(&alt)
                .map(|(b, d)| b.agent_objective - d.agent_objective),
        );
        arms.push(DeviationArm {
            name: dev.name(),
            agent_objective: objective,
            violated: advantage.mean < -2.0 * advantage.std_error,
            advantage,
        });
    }
    Ok(IncentiveReport { x0, baseline, arms })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reconstruction {
    /// Paths used (recommended effort positive at every step).
    pub paths_used: usize,
    /// Paths excluded because the recommended effort hit zero.
    pub degenerate: usize,
    /// Max |dW rebuilt from X - stored dW|.
    pub max_noise_error: f64,
    /// Max |J rebuilt from X alone - stored J|.
    pub max_state_error: f64,
}

/// Rebuilds the noise `dW = (dX - phi(a*(J)) dt)/sigma` and the state path
/// (driven by `X` only) from each recorded trajectory.
pub fn reconstruct_noise<M: Primitives + ?Sized>(
    model: &M,
    solution: &SecondBestSolution,
    bundle: &PathBundle,
) -> Result<Reconstruction> {
    let sigma = model.volatility();
    let lambda = model.agent_rate();
    let mut out = Reconstruction {
        paths_used: 0,
        degenerate: 0,
        max_noise_error: 0.0,
        max_state_error: 0.0,
    };
    for t in &bundle.trajectories {
        let dt = t.dt;
        let mut noise_err: f64 = 0.0;
        let mut state_err: f64 = 0.0;
        let mut j = t.j[0];
        let mut degenerate = false;
        for k in 0..t.dw.len() {
            let a_stored = solution.feedback(t.j[k])?.effort;
            if a_stored <= 0.0 {
                degenerate = true;
                break;
            }
            let dx = t.x[k + 1] - t.x[k];
            let dw = (dx - model.impact(a_stored) * dt) / sigma;
            noise_err = noise_err.max((dw - t.dw[k]).abs());

            let fb = solution.feedback(j)?;
            let a = fb.effort;
            let ratio = if a > 0.0 { model.cost_impact_ratio(a) } else { 0.0 };
            j += (lambda * j - model.utility(fb.rent) + model.cost(a)) * dt + ratio * (dx - model.impact(a) * dt);
            state_err = state_err.max((j - t.j[k + 1]).abs());
        }
        if degenerate {
            out.degenerate += 1;
        } else {
            out.paths_used += 1;
            out.max_noise_error = out.max_noise_error.max(noise_err);
            out.max_state_error = out.max_state_error.max(state_err);
        }
    }
    Ok(out)
}

/// Largest deviation of the martingale's checkpoint means from its time-0
/// value, in units of the standard error at that checkpoint.
pub fn martingale_drift(bundle: &PathBundle) -> f64 {
    let m0 = bundle.outcomes.first().map_or(0.0, |o| o.martingale[0]);
    (1..bundle.checkpoints.len())
        .map(|c| {
            let e = Estimate::from_samples(bundle.outcomes.iter().map(|o| o.martingale[c]));
            if e.std_error > 0.0 {
                (e.mean - m0).abs() / e.std_error
            } else if (e.mean - m0).abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}
