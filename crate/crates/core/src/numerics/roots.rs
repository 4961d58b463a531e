//! Scalar root finding and one-dimensional maximization.

/// Bisection on a continuous function with `f(lo)` and `f(hi)` of opposite
/// sign (zero allowed at either end). Stops when the bracket is narrower than
/// the absolute tolerance `x_tol` or stops shrinking in floating point.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= x_tol {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverts a monotone map `g` on `[lo, +inf)`: returns `x` with `g(x) = y`.
/// The upper end of the bracket is grown geometrically.
pub fn invert_monotone<G: Fn(f64) -> f64>(g: G, y: f64, lo: f64, increasing: bool) -> f64 {
    let sign = if increasing { 1.0 } else { -1.0 };
    let h = |x: f64| sign * (g(x) - y);
    let mut hi = if lo > 0.0 { 2.0 * lo } else { 1.0 };
    let mut guard = 0;
    while h(hi) < 0.0 && guard < 2000 {
        hi *= 2.0;
        guard += 1;
    }
    let mut a = lo;
    if h(a) > 0.0 {
        // Target lies below g(lo); shrink towards the lower end geometrically.
        let mut b = if lo > 0.0 { lo } else { 1.0 };
        while h(b) > 0.0 && b > f64::MIN_POSITIVE {
            b *= 0.5;
        }
        a = b;
        hi = 2.0 * b;
    }
    bisect(h, a, hi, 0.0)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of `f` on `[lo, hi]`, to abscissa tolerance `tol`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
