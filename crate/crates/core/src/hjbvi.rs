//! Second-best principal problem: the HJB variational inequality
//!
//! ```text
//! min{ delta w - sup_{r,a >= 0} [L^{a,r} w + phi(a) - r],  w + U^{-1}(x) } = 0
//! L^{a,r} w = 1/2 (sigma h'(a)/phi'(a))^2 1_{a>0} w'' + (lambda x - U(r) + h(a)) w'
//! ```
//!
//! on `[0, x_max]` with `w(0) = 0` and `w(x_max) = -U^{-1}(x_max)`, solved by
//! Howard policy iteration over a monotone finite-difference scheme (central
//! second difference, upwind first difference). Every policy yields a
//! tridiagonal M-matrix, so each evaluation is a single Thomas solve.
//!
//! Policy improvement maximizes the *discrete* Hamiltonian. For a fixed
//! effort the rent problem is solved exactly: on the forward-drift side the
//! candidate is `(U')^{-1}(-1/D+w)`, on the backward side `(U')^{-1}(-1/D-w)`,
//! each clipped to its side of the zero-drift rent; the better one wins.
//! Effort is found by a log-spaced scan plus golden-section refinement.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::incentive::value_volatility;
use crate::model::Primitives;
use crate::numerics::{golden_max, Tridiagonal};

const EFFORT_SCAN_POINTS: usize = 512;
const EFFORT_SCAN_LO: f64 = 1e-4;
const EFFORT_SCAN_HI: f64 = 50.0;
const EFFORT_TOL: f64 = 1e-8;

/// Uniform mesh on `[0, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub x_max: f64,
    pub n: usize,
    pub dx: f64,
}

impl Grid {
    pub fn new(x_max: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Config(format!("grid.n must be >= 3, got {n}")));
        }
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Config(format!("grid.x_max must be positive, got {x_max}")));
        }
        Ok(Self {
            x_max,
            n,
            dx: x_max / (n - 1) as f64,
        })
    }

    /// Same spacing, different right end: `n = round(x_max / dx) + 1`.
    pub fn with_spacing(x_max: f64, dx: f64) -> Result<Self> {
        Self::new(x_max, (x_max / dx).round() as usize + 1)
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.x_max
        } else {
            i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::new(1.0, 2001).expect("default grid is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HowardConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HowardConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

/// A continuation control at one node. `drift` is stored exactly as used by
/// the upwind stencil (it is set to `0.0` at the zero-drift rent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Control {
    pub rent: f64,
    pub effort: f64,
    pub drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Action {
    Continue(Control),
    Stop,
}

impl Action {
    /// Equal as far as policy evaluation is concerned.
    fn same_evaluation(&self, other: &Action) -> bool {
        match (self, other) {
            (Action::Stop, Action::Stop) => true,
            (Action::Continue(a), Action::Continue(b)) => a == b,
            _ => false,
        }
    }
}

/// One-sided and central differences at an interior node.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    forward: f64,
    backward: f64,
    second: f64,
}

impl Stencil {
    fn at(w: &[f64], i: usize, dx: f64) -> Self {
        Self {
            forward: (w[i + 1] - w[i]) / dx,
            backward: (w[i] - w[i - 1]) / dx,
            second: (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (dx * dx),
        }
    }

    fn upwind(&self, drift: f64) -> f64 {
        if drift >= 0.0 {
            drift * self.forward
        } else {
            drift * self.backward
        }
    }
}

/// Effort-only quantities on the scan points, independent of state and value.
struct EffortTable {
    effort: Vec<f64>,
    half_var: Vec<f64>,
    impact: Vec<f64>,
    cost: Vec<f64>,
}

impl EffortTable {
    fn new<M: Primitives + ?Sized>(model: &M) -> Self {
        let ratio = (EFFORT_SCAN_HI / EFFORT_SCAN_LO).ln() / (EFFORT_SCAN_POINTS - 1) as f64;
        let effort: Vec<f64> = std::iter::once(0.0)
            .chain((0..EFFORT_SCAN_POINTS).map(|k| EFFORT_SCAN_LO * (ratio * k as f64).exp()))
            .collect();
        let half_var = effort
            .iter()
            .map(|&a| 0.5 * value_volatility(model, a).powi(2))
            .collect();
        let impact = effort.iter().map(|&a| model.impact(a)).collect();
        let cost = effort.iter().map(|&a| model.cost(a)).collect();
        Self {
            effort,
            half_var,
            impact,
            cost,
        }
    }
}

/// Exact maximization over the rent for fixed effort. Returns `(rent, drift,
/// upwind advection - rent)`.
fn best_rent<M: Primitives + ?Sized>(
    model: &M,
    x: f64,
    st: &Stencil,
    cost: f64,
    rent_forward: f64,
    rent_backward: f64,
) -> (f64, f64, f64) {
    let base = model.agent_rate() * x + cost;
    let rent_still = model.utility_inverse(base);
    let eval = |r: f64| {
        let drift = if r == rent_still { 0.0 } else { base - model.utility(r) };
        (r, drift, st.upwind(drift) - r)
    };
    let a = eval(rent_forward.clamp(0.0, rent_still));
    let b = eval(rent_backward.max(rent_still));
    if b.2 > a.2 {
        b
    } else {
        a
    }
}

/// `(U')^{-1}(-1/slope)` if the slope is negative, else 0.
fn rent_for_slope<M: Primitives + ?Sized>(model: &M, slope: f64) -> f64 {
    if slope < 0.0 {
        model.marginal_utility_inverse(-1.0 / slope)
    } else {
        0.0
    }
}

/// Maximizes the discrete Hamiltonian at one node: returns `(H, control)`.
fn maximize_node<M: Primitives + ?Sized>(model: &M, table: &EffortTable, x: f64, st: &Stencil) -> (f64, Control) {
    let rent_forward = rent_for_slope(model, st.forward);
    let rent_backward = rent_for_slope(model, st.backward);

    let value_at = |half_var: f64, impact: f64, cost: f64| {
        let (r, drift, adv) = best_rent(model, x, st, cost, rent_forward, rent_backward);
        (half_var * st.second + impact + adv, r, drift)
    };

    // a = 0 is isolated (the diffusion indicator switches off), so the best
    // positive scan point is always refined and then compared with it.
    let mut best = value_at(table.half_var[0], table.impact[0], table.cost[0]);
    let mut best_a = 0.0;
    let mut best_k = 1;
    let mut scan_best = f64::NEG_INFINITY;
    for k in 1..table.effort.len() {
        let v = value_at(table.half_var[k], table.impact[k], table.cost[k]);
        if v.0 > scan_best {
            scan_best = v.0;
            best_k = k;
        }
    }
    let lo = table.effort[best_k - 1];
    let hi = table.effort[(best_k + 1).min(table.effort.len() - 1)];
    let eval = |a: f64| {
        value_at(
            0.5 * value_volatility(model, a).powi(2),
            model.impact(a),
            model.cost(a),
        )
    };
    let (a, _) = golden_max(|a| eval(a).0, lo, hi, EFFORT_TOL);
    let (a, v) = {
        let k = table.effort[best_k];
        let refined = eval(a);
        if refined.0 >= scan_best {
            (a, refined)
        } else {
            (k, eval(k))
        }
    };
    if v.0 > best.0 {
        best = v;
        best_a = a;
    }
    (
        best.0,
        Control {
            rent: best.1,
            effort: best_a,
            drift: best.2,
        },
    )
}

/// Supremum over `(r, a) >= 0` of the continuous Hamiltonian
/// `1/2 s(a)^2 d2w + (lambda x - U(r) + h(a)) dw + phi(a) - r`.
/// Returns `(value, rent, effort)`.
pub fn hamiltonian_max<M: Primitives + ?Sized>(model: &M, x: f64, dw: f64, d2w: f64) -> (f64, f64, f64) {
    let table = EffortTable::new(model);
    let st = Stencil {
        forward: dw,
        backward: dw,
        second: d2w,
    };
    let (v, c) = maximize_node(model, &table, x, &st);
    (v, c.rent, c.effort)
}

/// Discrete `L^{a,r} w(x_i) + phi(a) - r - delta w_i` at an interior node,
/// with the first difference taken on the side the drift points to.
pub fn discretize<M: Primitives + ?Sized>(model: &M, grid: &Grid, w: &[f64], i: usize, r: f64, a: f64) -> f64 {
    assert!(i >= 1 && i + 1 < grid.n, "interior node expected");
    let x = grid.x(i);
    let st = Stencil::at(w, i, grid.dx);
    let drift = model.agent_rate() * x - model.utility(r) + model.cost(a);
    0.5 * value_volatility(model, a).powi(2) * st.second + st.upwind(drift) + model.impact(a)
        - r
        - model.principal_rate() * w[i]
}

fn obstacle<M: Primitives + ?Sized>(model: &M, grid: &Grid) -> Vec<f64> {
    grid.nodes().iter().map(|&x| -model.utility_inverse(x)).collect()
}

/// Linear system of the policy-evaluation step.
fn assemble<M: Primitives + ?Sized>(
    model: &M,
    grid: &Grid,
    policy: &[Action],
    psi: &[f64],
) -> (Tridiagonal, Vec<f64>) {
    let n = grid.n;
    let dx = grid.dx;
    let delta = model.principal_rate();
    let mut m = Tridiagonal::zeros(n);
    let mut rhs = vec![0.0; n];
    m.diag[0] = 1.0;
    m.diag[n - 1] = 1.0;
    rhs[n - 1] = psi[n - 1];
    for i in 1..n - 1 {
        match policy[i] {
            Action::Stop => {
                m.diag[i] = 1.0;
                rhs[i] = psi[i];
            }
            Action::Continue(c) => {
                let diff = 0.5 * value_volatility(model, c.effort).powi(2) / (dx * dx);
                let up = c.drift.max(0.0) / dx;
                let down = (-c.drift).max(0.0) / dx;
                m.lower[i] = -(diff + down);
                m.upper[i] = -(diff + up);
                m.diag[i] = delta + 2.0 * diff + up + down;
                rhs[i] = model.impact(c.effort) - c.rent;
            }
        }
    }
    (m, rhs)
}

fn control_hamiltonian<M: Primitives + ?Sized>(model: &M, st: &Stencil, c: &Control) -> f64 {
    0.5 * value_volatility(model, c.effort).powi(2) * st.second + st.upwind(c.drift) + model.impact(c.effort)
        - c.rent
}

/// Policy improvement. A node only switches action when that lowers its
/// residual by more than `SWITCH_MARGIN`; the effort search is inexact, and
/// without this rule the iteration can cycle between near-ties.
fn improve<M: Primitives + ?Sized>(
    model: &M,
    table: &EffortTable,
    grid: &Grid,
    w: &[f64],
    psi: &[f64],
    current: &[Action],
) -> (Vec<Action>, Vec<f64>, Vec<Control>) {
    const SWITCH_MARGIN: f64 = 1e-13;
    let delta = model.principal_rate();
    let n = grid.n;
    let mut policy = current.to_vec();
    let mut defect = vec![0.0; n];
    let mut argmax = vec![Control::default(); n];
    for i in 1..n - 1 {
        let st = Stencil::at(w, i, grid.dx);
        let (h, c) = maximize_node(model, table, grid.x(i), &st);
        argmax[i] = c;
        let cont = delta * w[i] - h;
        let stop = w[i] - psi[i];
        defect[i] = cont.min(stop);
        let held = match current[i] {
            Action::Stop => stop,
            Action::Continue(old) => delta * w[i] - control_hamiltonian(model, &st, &old),
        };
        if defect[i] < held - SWITCH_MARGIN {
            policy[i] = if stop < cont { Action::Stop } else { Action::Continue(c) };
        }
    }
    (policy, defect, argmax)
}

impl Default for Control {
    fn default() -> Self {
        Self {
            rent: 0.0,
            effort: 0.0,
            drift: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub rent: f64,
    pub effort: f64,
    pub stop: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondBestSolution {
    pub grid: Grid,
    pub w: Vec<f64>,
    pub r_star: Vec<f64>,
    pub a_star: Vec<f64>,
    /// Drift of the agent's continuation value under the stored control.
    pub drift: Vec<f64>,
    pub stop: Vec<bool>,
    /// Smallest interior node at which stopping is optimal (`x_max` if none).
    pub b_hat: f64,
    pub iterations: usize,
    /// Max HJBVI defect at the returned value vector.
    pub residual: f64,
    /// Smallest `K >= 0` with `|w| <= K + U^{-1}(x)` on the grid.
    pub growth_constant: f64,
    /// `||w^{k+1} - w^k||_inf` per Howard iteration (first entry infinite).
    pub increments: Vec<f64>,
}

impl SecondBestSolution {
    pub fn stop_index(&self) -> usize {
        (1..self.grid.n).find(|&i| self.stop[i]).unwrap_or(self.grid.n - 1)
    }

    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        if !(x >= 0.0 && x <= self.grid.x_max) {
            return Err(Error::PolicyOutOfRange {
                x,
                x_max: self.grid.x_max,
            });
        }
        let s = x / self.grid.dx;
        let i = (s.floor() as usize).min(self.grid.n - 2);
        Ok((i, s - i as f64))
    }

    fn interpolate(&self, v: &[f64], x: f64) -> Result<f64> {
        let (i, t) = self.locate(x)?;
        Ok(v[i] + t * (v[i + 1] - v[i]))
    }

    pub fn value_at(&self, x: f64) -> Result<f64> {
        self.interpolate(&self.w, x)
    }

    pub fn rent_at(&self, x: f64) -> Result<f64> {
        self.interpolate(&self.r_star, x)
    }

    pub fn effort_at(&self, x: f64) -> Result<f64> {
        self.interpolate(&self.a_star, x)
    }

    /// Stop flag of the nearest node.
    pub fn is_stop_at(&self, x: f64) -> Result<bool> {
        self.locate(x)?;
        let i = ((x / self.grid.dx).round() as usize).min(self.grid.n - 1);
        Ok(self.stop[i])
    }

    /// Interpolated rent and effort plus the nearest-node stop flag.
    pub fn feedback(&self, x: f64) -> Result<Feedback> {
        let (i, t) = self.locate(x)?;
        let nearest = if t < 0.5 { i } else { i + 1 };
        Ok(Feedback {
            rent: self.r_star[i] + t * (self.r_star[i + 1] - self.r_star[i]),
            effort: self.a_star[i] + t * (self.a_star[i + 1] - self.a_star[i]),
            stop: self.stop[nearest],
        })
    }

    /// Largest raw second difference `w[i+1] - 2w[i] + w[i-1]` over
    /// continuation nodes.
    pub fn max_second_difference(&self) -> f64 {
        (1..self.grid.n - 1)
            .filter(|&i| !self.stop[i])
            .map(|i| self.w[i + 1] - 2.0 * self.w[i] + self.w[i - 1])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Howard policy iteration. Starts from "continue with zero rent and effort"
/// everywhere; stops once the policy repeats or the value increment drops
/// below `cfg.tol`.
pub fn howard_solve<M: Primitives + ?Sized>(model: &M, grid: &Grid, cfg: &HowardConfig) -> Result<SecondBestSolution> {
    let psi = obstacle(model, grid);
    let table = EffortTable::new(model);
    let lambda = model.agent_rate();

    let mut policy: Vec<Action> = (0..grid.n)
        .map(|i| {
            Action::Continue(Control {
                rent: 0.0,
                effort: 0.0,
                drift: lambda * grid.x(i),
            })
        })
        .collect();
    let mut w_prev: Option<Vec<f64>> = None;
    let mut increments = Vec::new();

    for k in 1..=cfg.max_iter {
        let (m, rhs) = assemble(model, grid, &policy, &psi);
        debug_assert!(m.is_monotone());
        let w = m.solve(&rhs);
        let diff = w_prev.as_ref().map_or(f64::INFINITY, |p| {
            p.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        });
        increments.push(diff);
        let (next, defect, argmax) = improve(model, &table, grid, &w, &psi, &policy);
        let repeated = next
            .iter()
            .zip(&policy)
            .skip(1)
            .take(grid.n - 2)
            .all(|(a, b)| a.same_evaluation(b));
        if repeated || diff < cfg.tol {
            let residual = defect.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
            return Ok(finish(model, grid, w, &next, &argmax, residual, k, increments));
        }
        policy = next;
        w_prev = Some(w);
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        residual: increments.last().copied().unwrap_or(f64::INFINITY),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish<M: Primitives + ?Sized>(
    model: &M,
    grid: &Grid,
    w: Vec<f64>,
    policy: &[Action],
    argmax: &[Control],
    residual: f64,
    iterations: usize,
    increments: Vec<f64>,
) -> SecondBestSolution {
    let n = grid.n;
    let mut r_star = vec![0.0; n];
    let mut a_star = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut stop = vec![false; n];
    for i in 1..n - 1 {
        // Reported controls maximize the Hamiltonian at the returned w; the
        // evaluated policy may hold a near-tie from the previous iterate.
        let c = argmax[i];
        r_star[i] = c.rent;
        a_star[i] = c.effort;
        drift[i] = c.drift;
        stop[i] = matches!(policy[i], Action::Stop);
    }
    // Boundary nodes carry their neighbour's control for interpolation.
    r_star[0] = r_star[1];
    a_star[0] = a_star[1];
    drift[0] = drift[1];
    r_star[n - 1] = r_star[n - 2];
    a_star[n - 1] = a_star[n - 2];
    drift[n - 1] = drift[n - 2];
    stop[n - 1] = true;

    let b_idx = (1..n).find(|&i| stop[i]).unwrap_or(n - 1);
    let growth_constant = grid
        .nodes()
        .iter()
        .zip(&w)
        .map(|(&x, &v)| v.abs() - model.utility_inverse(x))
        .fold(0.0, f64::max);
    SecondBestSolution {
        grid: *grid,
        w,
        r_star,
        a_star,
        drift,
        stop,
        b_hat: grid.x(b_idx),
        iterations,
        residual,
        growth_constant,
        increments,
    }
}

/// Max over interior nodes of `|min(delta w_i - H_i, w_i + U^{-1}(x_i))|`,
/// where `H_i` is the discrete Hamiltonian maximized at `w`.
pub fn residual_check<M: Primitives + ?Sized>(model: &M, solution: &SecondBestSolution) -> f64 {
    node_defects(model, &solution.grid, &solution.w)
        .iter()
        .fold(0.0f64, |acc, d| acc.max(d.abs()))
}

/// Per-node `(continuation defect, obstacle defect)` at interior nodes
/// (boundary entries are zero).
pub fn defect_branches<M: Primitives + ?Sized>(model: &M, grid: &Grid, w: &[f64]) -> Vec<(f64, f64)> {
    let psi = obstacle(model, grid);
    let table = EffortTable::new(model);
    let delta = model.principal_rate();
    let mut out = vec![(0.0, 0.0); grid.n];
    for i in 1..grid.n - 1 {
        let st = Stencil::at(w, i, grid.dx);
        let (h, _) = maximize_node(model, &table, grid.x(i), &st);
        out[i] = (delta * w[i] - h, w[i] - psi[i]);
    }
    out
}

fn node_defects<M: Primitives + ?Sized>(model: &M, grid: &Grid, w: &[f64]) -> Vec<f64> {
    defect_branches(model, grid, w)
        .into_iter()
        .map(|(c, s)| c.min(s))
        .collect()
}

/// Policy matrix for an arbitrary continuation policy; exposed for scheme
/// checks.
pub fn policy_matrix<M: Primitives + ?Sized>(model: &M, grid: &Grid, controls: &[(f64, f64)]) -> Tridiagonal {
    let psi = obstacle(model, grid);
    let lambda = model.agent_rate();
    let policy: Vec<Action> = controls
        .iter()
        .enumerate()
        .map(|(i, &(r, a))| {
            Action::Continue(Control {
                rent: r,
                effort: a,
                drift: lambda * grid.x(i) - model.utility(r) + model.cost(a),
            })
        })
        .collect();
    assemble(model, grid, &policy, &psi).0
}
