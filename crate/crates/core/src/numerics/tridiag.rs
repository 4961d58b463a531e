/// Relative shortfall of the diagonal tolerated by [`Tridiagonal::is_monotone`].
const DOMINANCE_SLACK: f64 = 4.0 * f64::EPSILON;

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Row-wise weak diagonal dominance with non-positive off-diagonals,
    /// i.e. the M-matrix sign pattern a monotone scheme produces. The
    /// diagonal may fall short by rounding in its sum.
    pub fn is_monotone(&self) -> bool {
        (0..self.len()).all(|i| {
            let lo = if i > 0 { self.lower[i] } else { 0.0 };
            let up = if i + 1 < self.len() { self.upper[i] } else { 0.0 };
            lo <= 0.0 && up <= 0.0 && self.diag[i] > 0.0 && self.diag[i] >= (lo.abs() + up.abs()) * (1.0 - DOMINANCE_SLACK)
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// Thomas elimination. Stable without pivoting for diagonally dominant
    /// systems, which is all this crate assembles.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = self.upper[0] / self.diag[0];
        d[0] = rhs[0] / self.diag[0];
        for i in 1..n {
            let m = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = if i + 1 < n { self.upper[i] / m } else { 0.0 };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / m;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_poisson_system() {
        let n = 50;
        let mut t = Tridiagonal::zeros(n);
        for i in 0..n {
            t.lower[i] = -1.0;
            t.diag[i] = 2.5;
            t.upper[i] = -1.0;
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let rhs = t.apply(&x_true);
        let x = t.solve(&rhs);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(t.is_monotone());
    }

    #[test]
    fn positive_off_diagonal_is_not_monotone() {
        let mut t = Tridiagonal::zeros(3);
        t.diag = vec![1.0, 1.0, 1.0];
        t.upper[0] = 0.1;
        assert!(!t.is_monotone());
    }
}
