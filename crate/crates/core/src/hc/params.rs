use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `lo, lo + step, .., hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo && self.n >= 3) {
            return Err(Error::InvalidArgument(format!("grid {name} needs finite lo < hi and n >= 3")));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Index of the nearest grid point, halves rounded up, clamped to the grid.
    pub fn nearest(&self, v: f64) -> usize {
        let t = (v - self.lo) / self.step();
        if !(t > 0.0) {
            return 0;
        }
        // guard against representation error right at a midpoint
        let k = (t + 0.5 + 1e-9).floor();
        (k as usize).min(self.n - 1)
    }

    /// Index of the first grid point `>= v` (up to round-off), if any.
    pub fn first_at_least(&self, v: f64) -> Option<usize> {
        (0..self.n).find(|&i| self.point(i) >= v - 1e-9 * self.step())
    }
}

/// `pi(x) = alpha * x^(0.5 + rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionBenefit {
    pub alpha: f64,
    pub rho: f64,
}

/// `k(s, e) = kappa0 + kappa1 * e + kappa2 * (s_hi - s)`, with `s_hi` the top of the
/// state grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitoringCost {
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

/// `b(s) = beta * s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityBenefit {
    pub beta: f64,
}

/// `phi(e) = phi1 * e + gamma * e^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffortCost {
    pub phi1: f64,
    pub gamma: f64,
}

/// `d(x) = eta * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionBurden {
    pub eta: f64,
}

/// `f(s, e) = s + g * s + a * e - c * s^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Regeneration {
    pub g: f64,
    pub a: f64,
    pub c: f64,
}

/// `h(x) = lambda * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Drain {
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HcGrid {
    pub s: GridSpec,
    pub x: GridSpec,
    pub e: GridSpec,
    /// Degree of the least-squares series fitted to the equilibrium values on the
    /// viable states; 0 keeps the nodal Hermite reconstruction.
    pub fit_degree: usize,
}

/// Hegemon/client primitives, the viability floor, the discount factor and the grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HcParams {
    pub pi: ExtractionBenefit,
    pub k: MonitoringCost,
    pub b: CapacityBenefit,
    pub phi: EffortCost,
    pub d: ExtractionBurden,
    pub f: Regeneration,
    pub h: Drain,
    pub s_min: f64,
    pub discount: f64,
    pub grid: HcGrid,
}

impl Default for ExtractionBenefit {
    fn default() -> Self {
        Self { alpha: 0.7, rho: 0.25 }
    }
}

impl Default for MonitoringCost {
    fn default() -> Self {
        Self { kappa0: 0.0, kappa1: 0.0, kappa2: 1.0 }
    }
}

impl Default for CapacityBenefit {
    fn default() -> Self {
        Self { beta: 0.1 }
    }
}

impl Default for EffortCost {
    fn default() -> Self {
        Self { phi1: 0.0, gamma: 5.0 }
    }
}

impl Default for ExtractionBurden {
    fn default() -> Self {
        Self { eta: 0.1 }
    }
}

impl Default for Regeneration {
    fn default() -> Self {
        Self { g: 0.5, a: 0.5, c: 0.25 }
    }
}

impl Default for Drain {
    fn default() -> Self {
        Self { lambda: 1.0 }
    }
}

impl Default for HcGrid {
    fn default() -> Self {
        Self { s: GridSpec::new(0.0, 2.0, 101), x: GridSpec::new(0.0, 1.0, 21), e: GridSpec::new(0.0, 0.01, 21), fit_degree: 4 }
    }
}

impl Default for HcParams {
    fn default() -> Self {
        Self {
            pi: ExtractionBenefit::default(),
            k: MonitoringCost::default(),
            b: CapacityBenefit::default(),
            phi: EffortCost::default(),
            d: ExtractionBurden::default(),
            f: Regeneration::default(),
            h: Drain::default(),
            s_min: 0.8,
            discount: 0.3,
            grid: HcGrid::default(),
        }
    }
}

impl HcParams {
    pub fn with_grid(mut self, ns: usize, nx: usize, ne: usize) -> Self {
        self.grid.s.n = ns;
        self.grid.x.n = nx;
        self.grid.e.n = ne;
        self
    }

    pub fn pi(&self, x: f64) -> f64 {
        self.pi.alpha * x.max(0.0).powf(0.5 + self.pi.rho)
    }

    pub fn pi_x(&self, x: f64) -> f64 {
        let p = 0.5 + self.pi.rho;
        self.pi.alpha * p * x.powf(p - 1.0)
    }

    pub fn k(&self, s: f64, e: f64) -> f64 {
        self.k.kappa0 + self.k.kappa1 * e + self.k.kappa2 * (self.grid.s.hi - s)
    }

    pub fn k_e(&self) -> f64 {
        self.k.kappa1
    }

    pub fn b(&self, s: f64) -> f64 {
        self.b.beta * s
    }

    pub fn phi(&self, e: f64) -> f64 {
        self.phi.phi1 * e + 0.5 * self.phi.gamma * e * e
    }

    pub fn phi_e(&self, e: f64) -> f64 {
        self.phi.phi1 + self.phi.gamma * e
    }

    pub fn phi_ee(&self) -> f64 {
        self.phi.gamma
    }

    pub fn d(&self, x: f64) -> f64 {
        self.d.eta * x
    }

    pub fn f(&self, s: f64, e: f64) -> f64 {
        s + self.f.g * s + self.f.a * e - self.f.c * s * s
    }

    pub fn f_s(&self, s: f64) -> f64 {
        1.0 + self.f.g - 2.0 * self.f.c * s
    }

    pub fn f_e(&self) -> f64 {
        self.f.a
    }

    pub fn f_ee(&self) -> f64 {
        0.0
    }

    pub fn h(&self, x: f64) -> f64 {
        self.h.lambda * x
    }

    pub fn h_x(&self) -> f64 {
        self.h.lambda
    }

    /// Next state before grid rounding.
    pub fn next_state(&self, s: f64, x: f64, e: f64) -> f64 {
        self.f(s, e) - self.h(x)
    }

    pub fn leader_payoff(&self, s: f64, x: f64, e: f64) -> f64 {
        self.pi(x) - self.k(s, e)
    }

    pub fn follower_payoff(&self, s: f64, x: f64, e: f64) -> f64 {
        self.b(s) - self.phi(e) - self.d(x)
    }

    /// Checks grids, scalar ranges and the qualitative shape conditions on the grid
    /// points; a failure names the property and the offending points.
    pub fn shape_check(&self) -> Result<()> {
        self.grid.s.validate("s")?;
        self.grid.x.validate("x")?;
        self.grid.e.validate("e")?;
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidArgument(format!("discount must lie in [0, 1), got {}", self.discount)));
        }
        if !(self.s_min > self.grid.s.lo - 1e-12 && self.s_min < self.grid.s.hi) {
            return Err(Error::InvalidArgument("s_min must lie inside the state grid".into()));
        }
        if !(self.pi.rho > 0.0 && self.pi.rho <= 0.5) {
            return Err(Error::InvalidArgument(format!("rho must lie in (0, 0.5], got {}", self.pi.rho)));
        }
        if self.grid.x.lo < 0.0 || self.grid.e.lo < 0.0 {
            return Err(Error::InvalidArgument("extraction and effort grids must be nonnegative".into()));
        }
        let s = self.grid.s.points();
        let x = self.grid.x.points();
        let e = self.grid.e.points();

        fn failing(pts: &[f64], bad: impl Fn(f64, f64) -> bool) -> Vec<f64> {
            pts.windows(2).filter(|w| bad(w[0], w[1])).map(|w| w[1]).collect()
        }
        let check = |property: &str, points: Vec<f64>| -> Result<()> {
            if points.is_empty() {
                Ok(())
            } else {
                Err(Error::Shape { property: property.into(), points })
            }
        };

        check("pi strictly increasing", failing(&x, |a, b| self.pi(b) <= self.pi(a)))?;
        if self.phi_e(0.0) != 0.0 {
            return Err(Error::Shape { property: format!("phi'(0) = {} != 0", self.phi_e(0.0)), points: vec![0.0] });
        }
        check(
            "phi convex",
            e.windows(3)
                .filter(|w| self.phi(w[0]) - 2.0 * self.phi(w[1]) + self.phi(w[2]) < -1e-12)
                .map(|w| w[1])
                .collect(),
        )?;
        check("b weakly increasing", failing(&s, |a, b| self.b(b) < self.b(a)))?;
        check("d weakly increasing", failing(&x, |a, b| self.d(b) < self.d(a)))?;
        let mut bad_s = Vec::new();
        let mut bad_e = Vec::new();
        for &ev in &e {
            bad_s.extend(failing(&s, |a, b| self.f(b, ev) <= self.f(a, ev)));
        }
        for &sv in &s {
            bad_e.extend(failing(&e, |a, b| self.f(sv, b) <= self.f(sv, a)).into_iter().map(|_| sv));
        }
        bad_s.dedup();
        bad_e.dedup();
        check("f increasing in s", bad_s)?;
        check("f increasing in e", bad_e)?;
        check("h weakly increasing", failing(&x, |a, b| self.h(b) < self.h(a)))?;
        let neg_k: Vec<f64> =
            s.iter().copied().filter(|&sv| e.iter().any(|&ev| self.k(sv, ev) < 0.0)).collect();
        check("k nonnegative", neg_k)?;
        Ok(())
    }
}
