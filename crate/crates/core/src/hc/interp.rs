use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smooth reconstruction of a value function known on a uniform grid.
///
/// The slope at each node is the central difference of the values (second-order
/// one-sided at the ends) and the curvature the second difference. Between nodes the
/// slope is the cubic Hermite interpolant of those nodal slopes and curvatures, the
/// curvature is its exact derivative and the value its exact antiderivative (anchored
/// at the first node). Outside the grid the map continues linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueMap {
    lo: f64,
    step: f64,
    values: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    cum: Vec<f64>,
    fit: Option<Chebyshev>,
}

/// Least-squares Chebyshev series on `[a, b]` with its first two derivative series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Chebyshev {
    a: f64,
    b: f64,
    c: Vec<f64>,
    c1: Vec<f64>,
    c2: Vec<f64>,
}

fn clenshaw(c: &[f64], t: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + c.first().copied().unwrap_or(0.0)
}

/// Coefficients of `d/dt` of a Chebyshev series.
fn cheb_derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n < 2 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n + 1];
    for k in (1..n).rev() {
        d[k - 1] = d[k + 1] + 2.0 * k as f64 * c[k];
    }
    d[0] *= 0.5;
    d.truncate(n - 1);
    d
}

impl Chebyshev {
    fn fit(lo: f64, step: f64, values: &[f64], degree: usize) -> Result<Self> {
        let n = values.len();
        let (a, b) = (lo, lo + step * (n - 1) as f64);
        let m = degree + 1;
        let mut basis = DMatrix::zeros(n, m);
        for i in 0..n {
            let t = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            let (mut p, mut q) = (1.0, t);
            for k in 0..m {
                basis[(i, k)] = p;
                let r = 2.0 * t * q - p;
                p = q;
                q = r;
            }
        }
        let rhs = DVector::from_column_slice(values);
        let c = basis
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::InvalidArgument(format!("value fit failed: {e}")))?;
        let c: Vec<f64> = c.iter().copied().collect();
        let scale = 2.0 / (b - a);
        let c1: Vec<f64> = cheb_derivative(&c).into_iter().map(|v| v * scale).collect();
        let c2: Vec<f64> = cheb_derivative(&c1).into_iter().map(|v| v * scale).collect();
        Ok(Self { a, b, c, c1, c2 })
    }

    fn t(&self, s: f64) -> f64 {
        (2.0 * s - self.a - self.b) / (self.b - self.a)
    }
}

fn h00(u: f64) -> [f64; 4] {
    // Hermite basis h00, h10, h01, h11 at u
    let (u2, u3) = (u * u, u * u * u);
    [2.0 * u3 - 3.0 * u2 + 1.0, u3 - 2.0 * u2 + u, -2.0 * u3 + 3.0 * u2, u3 - u2]
}

fn dh(u: f64) -> [f64; 4] {
    let u2 = u * u;
    [6.0 * u2 - 6.0 * u, 3.0 * u2 - 4.0 * u + 1.0, -6.0 * u2 + 6.0 * u, 3.0 * u2 - 2.0 * u]
}

fn ih(u: f64) -> [f64; 4] {
    let (u2, u3, u4) = (u * u, u * u * u, u * u * u * u);
    [u4 / 2.0 - u3 + u, u4 / 4.0 - 2.0 * u3 / 3.0 + u2 / 2.0, -u4 / 2.0 + u3, u4 / 4.0 - u3 / 3.0]
}

impl ValueMap {
    /// Values at `lo, lo + step, ..`; needs at least three nodes.
    pub fn new(lo: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 3 || !(step > 0.0) {
            return Err(Error::InvalidArgument("value map needs >= 3 nodes and a positive step".into()));
        }
        let w = &values;
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for i in 1..n - 1 {
            d1[i] = (w[i + 1] - w[i - 1]) / (2.0 * step);
            d2[i] = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (step * step);
        }
        d1[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * step);
        d1[n - 1] = (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * step);
        d2[0] = d2[1];
        d2[n - 1] = d2[n - 2];
        let mut cum = vec![w[0]; n];
        for i in 0..n - 1 {
            cum[i + 1] = cum[i] + step * (0.5 * (d1[i] + d1[i + 1]) + step * (d2[i] - d2[i + 1]) / 12.0);
        }
        Ok(Self { lo, step, values, d1, d2, cum, fit: None })
    }

    /// Degree-`degree` least-squares Chebyshev fit of the nodal values; slope, curvature
    /// and value come from the fitted series, which filters grid-scale roughness out of
    /// the derivatives. Needs more nodes than coefficients.
    pub fn fitted(lo: f64, step: f64, values: Vec<f64>, degree: usize) -> Result<Self> {
        if values.len() <= degree + 1 {
            return Err(Error::InvalidArgument(format!(
                "a degree-{degree} fit needs more than {} nodes, got {}",
                degree + 1,
                values.len()
            )));
        }
        let fit = Chebyshev::fit(lo, step, &values, degree)?;
        let mut m = Self::new(lo, step, values)?;
        m.fit = Some(fit);
        Ok(m)
    }

    /// Degree of the fitted series, if any.
    pub fn fit_degree(&self) -> Option<usize> {
        self.fit.as_ref().map(|f| f.c.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.lo + self.step * (self.len() - 1) as f64)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodal_values(&self) -> &[f64] {
        &self.values
    }

    /// Central-difference slope at node `i`.
    pub fn nodal_slope(&self, i: usize) -> f64 {
        self.d1[i]
    }

    /// Segment index and local coordinate in `[0, 1]`; `None` outside the grid.
    fn locate(&self, s: f64) -> Option<(usize, f64)> {
        let (a, b) = self.domain();
        if s < a || s > b {
            return None;
        }
        let t = (s - self.lo) / self.step;
        let i = (t.floor() as usize).min(self.len() - 2);
        Some((i, (t - i as f64).clamp(0.0, 1.0)))
    }

    fn combine(&self, i: usize, c: [f64; 4]) -> f64 {
        c[0] * self.d1[i] + c[1] * self.step * self.d2[i] + c[2] * self.d1[i + 1] + c[3] * self.step * self.d2[i + 1]
    }

    pub fn slope(&self, s: f64) -> f64 {
        if let Some(f) = &self.fit {
            return clenshaw(&f.c1, f.t(s.clamp(f.a, f.b)));
        }
        match self.locate(s) {
            Some((i, u)) => self.combine(i, h00(u)),
            None if s < self.lo => self.d1[0],
            None => self.d1[self.len() - 1],
        }
    }

    pub fn curvature(&self, s: f64) -> f64 {
        if let Some(f) = &self.fit {
            return if s < f.a || s > f.b { 0.0 } else { clenshaw(&f.c2, f.t(s)) };
        }
        match self.locate(s) {
            Some((i, u)) => self.combine(i, dh(u)) / self.step,
            None => 0.0,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        let (a, b) = self.domain();
        if let Some(f) = &self.fit {
            let end = s.clamp(a, b);
            return clenshaw(&f.c, f.t(end)) + clenshaw(&f.c1, f.t(end)) * (s - end);
        }
        match self.locate(s) {
            Some((i, u)) => self.cum[i] + self.step * self.combine(i, ih(u)),
            None if s < a => self.cum[0] + self.d1[0] * (s - a),
            None => self.cum[self.len() - 1] + self.d1[self.len() - 1] * (s - b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(f: impl Fn(f64) -> f64, lo: f64, step: f64, n: usize) -> ValueMap {
        ValueMap::new(lo, step, (0..n).map(|i| f(lo + i as f64 * step)).collect()).unwrap()
    }

    #[test]
    fn reproduces_quadratics() {
        let m = sample(|s| 1.0 + 2.0 * s - 0.5 * s * s, 0.0, 0.1, 21);
        for &s in &[0.0, 0.05, 0.37, 1.0, 1.93, 2.0] {
            assert!((m.slope(s) - (2.0 - s)).abs() < 1e-9, "{s}");
            assert!((m.curvature(s) + 1.0).abs() < 1e-9, "{s}");
            assert!((m.value(s) - (1.0 + 2.0 * s - 0.5 * s * s)).abs() < 1e-9, "{s}");
        }
    }

    #[test]
    fn derivatives_are_consistent() {
        let m = sample(|s| (3.0 * s).sin() + s * s * s, 0.0, 0.05, 41);
        let h = 1e-6;
        for &s in &[0.11, 0.5, 0.77, 1.23, 1.9] {
            let fd1 = (m.value(s + h) - m.value(s - h)) / (2.0 * h);
            let fd2 = (m.slope(s + h) - m.slope(s - h)) / (2.0 * h);
            assert!((fd1 - m.slope(s)).abs() < 1e-7);
            assert!((fd2 - m.curvature(s)).abs() < 1e-5);
        }
    }

    #[test]
    fn nodal_slopes_are_central_differences() {
        let w = vec![0.0, 1.0, 4.0, 9.0, 16.0];
        let m = ValueMap::new(0.0, 1.0, w).unwrap();
        assert_eq!(m.slope(2.0), 4.0);
        assert_eq!(m.slope(1.0), 2.0);
        assert_eq!(m.curvature(2.0), 2.0);
    }

    #[test]
    fn fit_reproduces_polynomials_of_its_degree() {
        let f = |s: f64| 0.5 - s + 2.0 * s * s * s - 0.25 * s.powi(4);
        let lo = 0.2;
        let m = ValueMap::fitted(lo, 0.1, (0..19).map(|i| f(lo + 0.1 * i as f64)).collect(), 4).unwrap();
        assert_eq!(m.fit_degree(), Some(4));
        for &s in &[0.2, 0.33, 1.0, 1.7, 2.0] {
            assert!((m.value(s) - f(s)).abs() < 1e-10, "{s}");
            assert!((m.slope(s) - (-1.0 + 6.0 * s * s - s.powi(3))).abs() < 1e-9, "{s}");
            assert!((m.curvature(s) - (12.0 * s - 3.0 * s * s)).abs() < 1e-8, "{s}");
        }
        // linear continuation past the ends
        let b = 2.0;
        assert!((m.value(2.5) - (f(b) + 0.5 * m.slope(b))).abs() < 1e-10);
    }

    #[test]
    fn fit_smooths_grid_noise() {
        let n = 101;
        let step = 0.02;
        let noisy: Vec<f64> =
            (0..n).map(|i| (i as f64 * step).sin() + if i % 2 == 0 { 1e-3 } else { -1e-3 }).collect();
        let m = ValueMap::fitted(0.0, step, noisy.clone(), 6).unwrap();
        let raw = ValueMap::new(0.0, step, noisy).unwrap();
        let s = 1.01;
        assert!((m.slope(s) - s.cos()).abs() < 1e-2);
        assert!((m.curvature(s) + s.sin()).abs() < 0.1);
        assert!((raw.curvature(1.0) + 1f64.sin()).abs() > 1.0);
    }

    #[test]
    fn fit_needs_enough_nodes() {
        assert!(ValueMap::fitted(0.0, 1.0, vec![0.0; 5], 4).is_err());
    }

    #[test]
    fn constant_has_zero_slope() {
        let m = sample(|_| 3.0, -1.0, 0.25, 9);
        assert_eq!(m.slope(0.3), 0.0);
        assert_eq!(m.curvature(0.3), 0.0);
        assert!((m.value(5.0) - 3.0).abs() < 1e-15);
    }
}
