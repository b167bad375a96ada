//! Strictly convex smooth potentials on open boxes.
//!
//! A [`SmoothFunction`] is a scalar field with optional analytic first and
//! second derivatives; missing derivatives fall back to central differences.
//! [`ConvexPotential`] wraps one and enforces positive-definite Hessians.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::exp_family::ExponentialFamily;
use crate::fd;
use crate::linalg::{self, Tensor3};

/// Smallest Hessian eigenvalue accepted as positive definite.
pub const PD_EPSILON: f64 = 1e-10;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync>;

/// Axis-aligned open box; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Descriptor("domain must have positive dimension".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi || *lo == f64::INFINITY || *hi == f64::NEG_INFINITY {
                return Err(Error::Descriptor(format!(
                    "coordinate {i}: lower bound {lo} must be below upper bound {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `ℝⁿ`.
    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Strict interiority; also rejects wrong lengths and non-finite coordinates.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| x.is_finite() && lo < x && x < hi)
    }

    pub fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: p.len(),
            });
        }
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain { point: p.to_vec() })
        }
    }

    /// `true` when `self` lies inside `outer` (closure inclusion of the boxes).
    pub fn is_subset_of(&self, outer: &BoxDomain) -> bool {
        self.dim() == outer.dim()
            && (0..self.dim()).all(|i| self.lower[i] >= outer.lower[i] && self.upper[i] <= outer.upper[i])
    }

    /// Box center, with each unbounded side replaced by a bound at distance 2
    /// (both sides unbounded gives 0).
    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 1.0,
                (false, true) => hi - 1.0,
                (false, false) => 0.0,
            })
            .collect()
    }

    /// Closed sampling window for coordinate `i`: the box clipped to
    /// `[-3, 3]` (or a width-6 window next to a bound outside it), shrunk by
    /// 10% of its width on each side.
    pub fn sample_window(&self, i: usize) -> (f64, f64) {
        let (lo, hi) = (self.lower[i], self.upper[i]);
        let (mut a, mut b) = (lo.max(-3.0), hi.min(3.0));
        if a >= b {
            if lo >= 3.0 {
                a = lo;
                b = lo + 6.0;
            } else {
                a = hi - 6.0;
                b = hi;
            }
        }
        let margin = 0.1 * (b - a);
        (a + margin, b - margin)
    }

    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (a, b) = self.sample_window(i);
                rng.gen_range(a..=b)
            })
            .collect()
    }
}

/// Scalar field on a box with optional analytic derivatives.
#[derive(Clone)]
pub struct SmoothFunction {
    name: String,
    domain: BoxDomain,
    value: ValueFn,
    gradient: Option<GradientFn>,
    hessian: Option<HessianFn>,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .finish()
    }
}

impl SmoothFunction {
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        value: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            value: Arc::new(value),
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    /// The identically zero function.
    pub fn zero(domain: BoxDomain) -> Self {
        let n = domain.dim();
        Self::new("zero", domain, |_| Ok(0.0))
            .with_gradient(move |_| Ok(DVector::zeros(n)))
            .with_hessian(move |_| Ok(DMatrix::zeros(n, n)))
    }

    /// `Σ coeff·Π θ_i^{e_i}` with analytic derivatives.
    pub fn polynomial(name: impl Into<String>, domain: BoxDomain, terms: Vec<PolyTerm>) -> Result<Self> {
        let n = domain.dim();
        for t in &terms {
            if t.exponents.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: t.exponents.len(),
                });
            }
        }
        let terms = Arc::new(terms);
        let (tv, tg, th) = (terms.clone(), terms.clone(), terms);
        Ok(Self::new(name, domain, move |p| Ok(poly_value(&tv, p)))
            .with_gradient(move |p| Ok(poly_gradient(&tg, p)))
            .with_hessian(move |p| Ok(poly_hessian(&th, p))))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same function on a smaller box.
    pub fn restricted(&self, domain: BoxDomain) -> Result<Self> {
        if !domain.is_subset_of(&self.domain) {
            return Err(Error::Descriptor(format!(
                "domain {domain:?} is not inside the natural domain of {}",
                self.name
            )));
        }
        Ok(Self {
            domain,
            ..self.clone()
        })
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        self.domain.check(p)?;
        let v = (self.value)(p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { point: p.to_vec() })
        }
    }

    /// Gradient from values only, ignoring any analytic gradient.
    pub fn fd_gradient(&self, p: &[f64]) -> Result<DVector<f64>> {
        self.domain.check(p)?;
        fd::gradient_from_values(&*self.value, &self.domain, p)
    }

    /// Hessian from values only, ignoring analytic derivatives.
    pub fn fd_hessian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check(p)?;
        Ok(linalg::symmetrize(&fd::hessian_from_values(&*self.value, &self.domain, p)?))
    }

    pub fn gradient(&self, p: &[f64]) -> Result<DVector<f64>> {
        self.domain.check(p)?;
        match &self.gradient {
            Some(g) => g(p),
            None => fd::gradient_from_values(&*self.value, &self.domain, p),
        }
    }

    /// Symmetrized Hessian with no definiteness check.
    ///
    /// Uses the analytic Hessian, else the Jacobian of the analytic gradient,
    /// else second differences of values.
    pub fn hessian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check(p)?;
        let h = match (&self.hessian, &self.gradient) {
            (Some(h), _) => h(p)?,
            (None, Some(g)) => fd::jacobian(&**g, &self.domain, p, fd::first_order_root())?,
            (None, None) => fd::hessian_from_values(&*self.value, &self.domain, p)?,
        };
        Ok(linalg::symmetrize(&h))
    }

    /// Fully symmetric `∂_i∂_j∂_k` at `p`, differencing the highest analytic
    /// derivative available.
    pub fn third_derivative(&self, p: &[f64]) -> Result<Tensor3> {
        self.domain.check(p)?;
        match (&self.hessian, &self.gradient) {
            (Some(h), _) => fd::third_from_hessian(&**h, &self.domain, p),
            (None, Some(g)) => fd::third_from_gradient(&**g, &self.domain, p),
            (None, None) => fd::third_from_values(&*self.value, &self.domain, p),
        }
    }
}

/// One monomial `coeff·Π θ_i^{exponents[i]}`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

fn monomial(exps: &[u32], p: &[f64], skip: &[usize]) -> f64 {
    // `skip` lists coordinates already differentiated once each
    let mut v = 1.0;
    for (i, (&e, &x)) in exps.iter().zip(p).enumerate() {
        let d = skip.iter().filter(|&&s| s == i).count() as u32;
        if d > e {
            return 0.0;
        }
        let mut c = 1.0;
        for k in 0..d {
            c *= (e - k) as f64;
        }
        v *= c * x.powi((e - d) as i32);
    }
    v
}

fn poly_value(terms: &[PolyTerm], p: &[f64]) -> f64 {
    terms.iter().map(|t| t.coeff * monomial(&t.exponents, p, &[])).sum()
}

fn poly_gradient(terms: &[PolyTerm], p: &[f64]) -> DVector<f64> {
    DVector::from_fn(p.len(), |i, _| {
        terms.iter().map(|t| t.coeff * monomial(&t.exponents, p, &[i])).sum()
    })
}

fn poly_hessian(terms: &[PolyTerm], p: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(p.len(), p.len(), |i, j| {
        terms.iter().map(|t| t.coeff * monomial(&t.exponents, p, &[i, j])).sum()
    })
}

/// Per-point outcome of [`ConvexPotential::check_strict_convexity`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexitySample {
    pub point: Vec<f64>,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub samples: Vec<ConvexitySample>,
    pub threshold: f64,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.samples.iter().all(|s| s.min_eigenvalue > self.threshold)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.samples.iter().fold(f64::INFINITY, |m, s| m.min(s.min_eigenvalue))
    }

    pub fn first_failure(&self) -> Option<&ConvexitySample> {
        self.samples.iter().find(|s| s.min_eigenvalue <= self.threshold)
    }
}

/// A smooth, strictly convex potential on an open box.
#[derive(Debug, Clone)]
pub struct ConvexPotential {
    function: SmoothFunction,
    start: Option<Vec<f64>>,
}

impl From<SmoothFunction> for ConvexPotential {
    fn from(function: SmoothFunction) -> Self {
        Self { function, start: None }
    }
}

impl ConvexPotential {
    pub fn new(function: SmoothFunction) -> Self {
        function.into()
    }

    /// Overrides the default Newton starting point.
    pub fn with_start(mut self, start: Vec<f64>) -> Result<Self> {
        self.function.domain.check(&start)?;
        self.start = Some(start);
        Ok(self)
    }

    pub fn function(&self) -> &SmoothFunction {
        &self.function
    }

    pub fn name(&self) -> &str {
        self.function.name()
    }

    pub fn domain(&self) -> &BoxDomain {
        self.function.domain()
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }

    /// Starting point for inverse-gradient solves.
    pub fn default_start(&self) -> Vec<f64> {
        self.start.clone().unwrap_or_else(|| self.domain().center())
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.function.name = name.into();
        self
    }

    pub fn restricted(&self, domain: BoxDomain) -> Result<Self> {
        let function = self.function.restricted(domain)?;
        let start = self.start.clone().filter(|s| function.domain().contains(s));
        Ok(Self { function, start })
    }

    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        self.function.eval(theta)
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<DVector<f64>> {
        self.function.gradient(theta)
    }

    /// Symmetric positive-definite Hessian; `Convexity` error otherwise.
    pub fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let h = self.function.hessian(theta)?;
        let min = linalg::min_eigenvalue(&h);
        if min > PD_EPSILON {
            Ok(h)
        } else {
            Err(Error::Convexity {
                point: theta.to_vec(),
                min_eigenvalue: min,
            })
        }
    }

    pub fn third_derivative(&self, theta: &[f64]) -> Result<Tensor3> {
        self.function.third_derivative(theta)
    }

    pub fn check_strict_convexity(&self, sample_points: &[Vec<f64>]) -> Result<ConvexityReport> {
        let samples = sample_points
            .iter()
            .map(|p| {
                let h = self.function.hessian(p)?;
                Ok(ConvexitySample {
                    point: p.clone(),
                    min_eigenvalue: linalg::min_eigenvalue(&h),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConvexityReport {
            samples,
            threshold: PD_EPSILON,
        })
    }

    /// `|θ|²/2` on `ℝⁿ`.
    pub fn quadratic(n: usize) -> Self {
        let terms = (0..n)
            .map(|i| {
                let mut exponents = vec![0; n];
                exponents[i] = 2;
                PolyTerm { coeff: 0.5, exponents }
            })
            .collect();
        let f = SmoothFunction::polynomial("quadratic", BoxDomain::unbounded(n), terms)
            .expect("exponent lengths match");
        f.into()
    }

    /// `log(1 + e^θ)` on `ℝ`.
    pub fn bernoulli() -> Self {
        SmoothFunction::new("bernoulli", BoxDomain::unbounded(1), |p| Ok(softplus(p[0])))
            .with_gradient(|p| Ok(DVector::from_element(1, sigmoid(p[0]))))
            .with_hessian(|p| {
                let s = sigmoid(p[0]);
                Ok(DMatrix::from_element(1, 1, s * (1.0 - s)))
            })
            .into()
    }

    /// `log(1 + Σ e^{θ_i})` on `ℝⁿ` (categorical with `n + 1` outcomes).
    pub fn categorical(n: usize) -> Self {
        SmoothFunction::new("categorical", BoxDomain::unbounded(n), |p| Ok(log1p_sum_exp(p)))
            .with_gradient(|p| Ok(DVector::from_vec(softmax_tail(p))))
            .with_hessian(|p| {
                let q = softmax_tail(p);
                let n = q.len();
                Ok(DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        q[i] - q[i] * q[j]
                    } else {
                        -q[i] * q[j]
                    }
                }))
            })
            .into()
    }

    /// Truncated Poisson log-partition `log Σ_{k≤60} e^{θk}/k!` (≈ `e^θ`).
    pub fn poisson() -> Self {
        ExponentialFamily::poisson().as_potential().renamed("poisson")
    }

    /// Univariate Gaussian in natural coordinates `θ = (μ/σ², −1/(2σ²))`:
    /// `Ψ = −θ₁²/(4θ₂) − ½·log(−2θ₂) + ½·log(2π)` on `ℝ × (−∞, 0)`.
    pub fn gaussian_natural() -> Self {
        let domain = BoxDomain::new(vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY, 0.0])
            .expect("valid box");
        SmoothFunction::new("gaussian_natural", domain, |p| {
            let (a, b) = (p[0], p[1]);
            Ok(-a * a / (4.0 * b) - 0.5 * (-2.0 * b).ln() + 0.5 * (2.0 * std::f64::consts::PI).ln())
        })
        .with_gradient(|p| {
            let (a, b) = (p[0], p[1]);
            Ok(DVector::from_vec(vec![-a / (2.0 * b), a * a / (4.0 * b * b) - 0.5 / b]))
        })
        .with_hessian(|p| {
            let (a, b) = (p[0], p[1]);
            let off = a / (2.0 * b * b);
            Ok(DMatrix::from_row_slice(
                2,
                2,
                &[-0.5 / b, off, off, -a * a / (2.0 * b * b * b) + 0.5 / (b * b)],
            ))
        })
        .into()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log1p_sum_exp(p: &[f64]) -> f64 {
    let m = p.iter().fold(0.0f64, |a, &b| a.max(b));
    m + ((-m).exp() + p.iter().map(|x| (x - m).exp()).sum::<f64>()).ln()
}

fn softmax_tail(p: &[f64]) -> Vec<f64> {
    let m = p.iter().fold(0.0f64, |a, &b| a.max(b));
    let z = (-m).exp() + p.iter().map(|x| (x - m).exp()).sum::<f64>();
    p.iter().map(|x| (x - m).exp() / z).collect()
}
