//! Natural cubic spline interpolation with analytic derivatives.

use crate::Real;

/// A C^2 natural cubic spline through (t, y) knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    t: Vec<Real>,
    y: Vec<Real>,
    /// Second derivatives at the knots (zero at both ends).
    m: Vec<Real>,
}

impl CubicSpline {
    /// Fit a natural spline; knots must be strictly increasing, at least 2.
    pub fn fit(t: &[Real], y: &[Real]) -> Self {
        assert!(t.len() == y.len() && t.len() >= 2, "need matching knots");
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the tridiagonal curvature system.
            let mut sub = vec![0.0; n - 2];
            let mut diag = vec![0.0; n - 2];
            let mut sup = vec![0.0; n - 2];
            let mut rhs = vec![0.0; n - 2];
            for i in 1..n - 1 {
                let h0 = t[i] - t[i - 1];
                let h1 = t[i + 1] - t[i];
                sub[i - 1] = h0 / 6.0;
                diag[i - 1] = (h0 + h1) / 3.0;
                sup[i - 1] = h1 / 6.0;
                rhs[i - 1] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            }
            for i in 1..n - 2 {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut x = vec![0.0; n - 2];
            x[n - 3] = rhs[n - 3] / diag[n - 3];
            for i in (0..n - 3).rev() {
                x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&x);
        }
        CubicSpline { t: t.to_vec(), y: y.to_vec(), m }
    }

    fn segment(&self, x: Real) -> usize {
        let n = self.t.len();
        if x <= self.t[0] {
            return 0;
        }
        if x >= self.t[n - 1] {
            return n - 2;
        }
        // Binary search for the knot interval.
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.t[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn value(&self, x: Real) -> Real {
        let i = self.segment(x);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, x: Real) -> Real {
        let i = self.segment(x);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0
    }

    pub fn second_derivative(&self, x: Real) -> Real {
        let i = self.segment(x);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        a * self.m[i] + b * self.m[i + 1]
    }

    pub fn t_start(&self) -> Real {
        self.t[0]
    }

    pub fn t_end(&self) -> Real {
        *self.t.last().unwrap()
    }
}
