//! Natural cubic spline over strictly increasing knots.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    /// Returns `None` unless there are at least two knots with strictly
    /// increasing abscissae and matching ordinates.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Some(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => return self.ys[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = x1 - x;
        let b = x - x0;
        self.m[i] * a * a * a / (6.0 * h)
            + self.m[i + 1] * b * b * b / (6.0 * h)
            + (self.ys[i] - self.m[i] * h * h / 6.0) * a / h
            + (self.ys[i + 1] - self.m[i + 1] * h * h / 6.0) * b / h
    }

    pub fn second_derivatives(&self) -> &[f64] {
        &self.m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_knots() {
        assert!(NaturalCubicSpline::fit(&[0.0], &[1.0]).is_none());
        assert!(NaturalCubicSpline::fit(&[0.0, 0.0], &[1.0, 2.0]).is_none());
        assert!(NaturalCubicSpline::fit(&[0.0, 1.0], &[1.0]).is_none());
    }

    #[test]
    fn passes_through_knots() {
        let xs = [0.0, 2.0, 3.0, 7.0, 10.0];
        let ys = [1.0, -4.0, 2.5, 0.0, 3.0];
        let s = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(s.eval(*x), y);
        }
        let m = s.second_derivatives();
        assert_eq!(m[0], 0.0);
        assert_eq!(m[4], 0.0);
    }

    #[test]
    fn reproduces_lines() {
        let xs = [0.0, 1.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let s = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        for i in 0..=50 {
            let x = i as f64 * 0.1;
            assert!((s.eval(x) - (3.0 * x - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_reference_values() {
        // Frozen from scipy.interpolate.CubicSpline(xs, ys, bc_type="natural").
        let xs = [0.0, 5.0, 10.0];
        let ys = [0.0, 10.0, 4.0];
        let s = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        let expected = [(1.0, 2.768), (2.5, 6.5), (7.0, 9.136), (9.0, 5.968)];
        for (x, y) in expected {
            assert!((s.eval(x) - y).abs() < 1e-9, "x={x}: {} vs {y}", s.eval(x));
        }

        let xs = [0.0, 2.0, 3.0, 7.0, 10.0];
        let ys = [1.0, -4.0, 2.5, 0.0, 3.0];
        let s = NaturalCubicSpline::fit(&xs, &ys).unwrap();
        let expected = [
            (0.5, -1.819_670_376_712_328_8),
            (1.0, -4.011_472_602_739_726),
            (2.5, -0.985_659_246_575_342_4),
            (5.0, 5.035_958_904_109_589),
            (8.5, 0.099_721_746_575_342_22),
        ];
        for (x, y) in expected {
            assert!((s.eval(x) - y).abs() < 1e-9, "x={x}: {} vs {y}", s.eval(x));
        }
    }
}
