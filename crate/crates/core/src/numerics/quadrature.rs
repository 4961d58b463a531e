//! Adaptive composite Gauss-Legendre quadrature on finite and half-infinite
//! intervals.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const ORDER: usize = 15;
const MAX_DEPTH: u32 = 40;

/// Nodes and weights of the `ORDER`-point Gauss-Legendre rule on [-1, 1].
fn rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(ORDER))
}

fn legendre_rule<const N: usize>(n: usize) -> ([f64; N], [f64; N]) {
    let mut x = [0.0; N];
    let mut w = [0.0; N];
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// P_n(z) and P_n'(z) by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Single-panel Gauss-Legendre estimate of the integral of `f` over `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(w.iter())
        .map(|(xi, wi)| wi * f(mid + half * xi))
        .sum::<f64>()
        * half
}

/// Adaptive composite Gauss-Legendre integration of `f` over `[a, b]`:
/// a panel is accepted once its estimate agrees with the sum over its two
/// halves to within `tol`; otherwise both halves are refined with `tol / 2`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let whole = gauss_legendre(f, a, b);
    refine(f, a, b, whole, tol, 0)
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = gauss_legendre(f, a, mid);
    let right = gauss_legendre(f, mid, b);
    let sum = left + right;
    if !sum.is_finite() {
        return Err(Error::QuadratureFailure {
            lo: a,
            hi: b,
            reason: "non-finite integrand",
        });
    }
    if (sum - whole).abs() <= tol {
        return Ok(sum);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::QuadratureFailure {
            lo: a,
            hi: b,
            reason: "refinement depth exhausted",
        });
    }
    Ok(refine(f, a, mid, left, 0.5 * tol, depth + 1)? + refine(f, mid, b, right, 0.5 * tol, depth + 1)?)
}

/// Settings for integration over `[0, +inf)`.
#[derive(Debug, Clone, Copy)]
pub struct TailSettings {
    /// Absolute tolerance per chunk.
    pub tol: f64,
    /// Integration stops once a chunk's absolute mass falls below this.
    pub tail_eps: f64,
    /// Hard truncation point.
    pub t_cap: f64,
    /// Length of the first chunk; subsequent chunks double.
    pub first_chunk: f64,
}

impl Default for TailSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            tail_eps: 1e-14,
            t_cap: 1e4,
            first_chunk: 8.0,
        }
    }
}

/// Integrates a decaying integrand over `[0, +inf)`, optionally splitting at
/// known kinks. Chunks `[T_k, T_{k+1}]` of doubling length are added until the
/// absolute mass of a chunk drops below `tail_eps`; reaching `t_cap` first is
/// a failure.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], cfg: TailSettings) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut breaks: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > 0.0 && *b < cfg.t_cap)
        .collect();
    breaks.sort_by(f64::total_cmp);
    for b in breaks {
        total += integrate(f, lo, b, cfg.tol)?;
        lo = b;
    }
    let abs_f = |s: f64| f(s).abs();
    let mut len = cfg.first_chunk;
    loop {
        let hi = (lo + len).min(cfg.t_cap);
        total += integrate(f, lo, hi, cfg.tol)?;
        let mass = gauss_legendre(&abs_f, lo, hi);
        if mass < cfg.tail_eps {
            return Ok(total);
        }
        if hi >= cfg.t_cap {
            return Err(Error::QuadratureFailure {
                lo: 0.0,
                hi: cfg.t_cap,
                reason: "integrand not negligible at truncation cap",
            });
        }
        lo = hi;
        len *= 2.0;
    }
}
