//! Truncated power series in a formal parameter `u`, and potentials whose
//! value is such a series at every point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::potential::{BoxDomain, ConvexPotential, SmoothFunction, PD_EPSILON};

pub const DEFAULT_ORDER: usize = 4;

/// `a₀ + a₁u + ⋯ + a_N u^N`, all arithmetic truncated at `u^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormalSeries {
    coeffs: Vec<f64>,
}

impl FormalSeries {
    /// Series of order `coeffs.len() - 1`. An empty slice gives the order-0
    /// zero series.
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self::zero(0);
        }
        Self { coeffs }
    }

    /// Pads with zeros or truncates to exactly `order + 1` coefficients.
    pub fn with_order(mut coeffs: Vec<f64>, order: usize) -> Self {
        coeffs.resize(order + 1, 0.0);
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![0.0; order + 1] }
    }

    pub fn constant(c: f64, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// The series `u` (zero at order 0).
    pub fn variable(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order > 0 {
            s.coeffs[1] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    fn same_order(&self, other: &Self) -> Result<usize> {
        if self.order() == other.order() {
            Ok(self.order())
        } else {
            Err(Error::OrderMismatch { left: self.order(), right: other.order() })
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_order(other)?;
        Ok(Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| -a).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| c * a).collect() }
    }

    /// Cauchy product truncated at `u^N`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let n = self.same_order(other)?;
        let coeffs = (0..=n)
            .map(|k| (0..=k).map(|i| self.coeffs[i] * other.coeffs[k - i]).sum())
            .collect();
        Ok(Self { coeffs })
    }

    /// From `b' = a'b`: `b₀ = e^{a₀}`, `k·b_k = Σ_{j=1..k} j·a_j·b_{k−j}`.
    pub fn exp(&self) -> Self {
        let a = &self.coeffs;
        let mut b = vec![0.0; a.len()];
        b[0] = a[0].exp();
        for k in 1..a.len() {
            let s: f64 = (1..=k).map(|j| j as f64 * a[j] * b[k - j]).sum();
            b[k] = s / k as f64;
        }
        Self { coeffs: b }
    }

    /// From `a·c' = a'`; needs `a₀ > 0`.
    pub fn log(&self) -> Result<Self> {
        let a = &self.coeffs;
        if !(a[0] > 0.0 && a[0].is_finite()) {
            return Err(Error::InvalidLeadingCoefficient(a[0]));
        }
        let mut c = vec![0.0; a.len()];
        c[0] = a[0].ln();
        for k in 1..a.len() {
            let s: f64 = (1..k).map(|j| j as f64 * c[j] * a[k - j]).sum();
            c[k] = (k as f64 * a[k] - s) / (k as f64 * a[0]);
        }
        Ok(Self { coeffs: c })
    }

    /// Multiplicative inverse; needs `a₀ ≠ 0`.
    pub fn recip(&self) -> Result<Self> {
        let a = &self.coeffs;
        if a[0] == 0.0 || !a[0].is_finite() {
            return Err(Error::InvalidLeadingCoefficient(a[0]));
        }
        let mut b = vec![0.0; a.len()];
        b[0] = 1.0 / a[0];
        for k in 1..a.len() {
            let s: f64 = (1..=k).map(|j| a[j] * b[k - j]).sum();
            b[k] = -s / a[0];
        }
        Ok(Self { coeffs: b })
    }

    /// Drops every coefficient above `u^order`.
    pub fn truncate(&self, order: usize) -> Self {
        Self::with_order(self.coeffs[..=order.min(self.order())].to_vec(), order)
    }

    /// Numerical value of the polynomial at `u`.
    pub fn substitute(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * u + a)
    }

    /// `Σ_{k ≤ upto} a_k u^k`.
    pub fn partial_sum(&self, upto: usize, u: f64) -> f64 {
        self.truncate(upto.min(self.order())).substitute(u)
    }
}

/// Matrix-valued series stored as one matrix per power of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix {
    coeffs: Vec<DMatrix<f64>>,
}

impl SeriesMatrix {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Self {
        assert!(!coeffs.is_empty(), "series matrix needs an order-0 coefficient");
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn nrows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn ncols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    /// Coefficient matrix of `u^k`.
    pub fn coeff(&self, k: usize) -> &DMatrix<f64> {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn entry(&self, i: usize, j: usize) -> FormalSeries {
        FormalSeries::new(self.coeffs.iter().map(|m| m[(i, j)]).collect())
    }

    /// `Σ_{k ≤ upto} M_k u^k`.
    pub fn partial_sum(&self, upto: usize, u: f64) -> DMatrix<f64> {
        let upto = upto.min(self.order());
        let mut acc = self.coeffs[upto].clone();
        for k in (0..upto).rev() {
            acc = acc * u + &self.coeffs[k];
        }
        acc
    }
}

/// `Ψ(t, u) = ψ(t) + u·ψ₁(t) + ⋯ + u^N·ψ_N(t)` on a common box.
#[derive(Debug, Clone)]
pub struct FamilyPotential {
    name: String,
    domain: BoxDomain,
    coefficients: Vec<SmoothFunction>,
}

impl FamilyPotential {
    /// `coefficients[k]` multiplies `u^k`; the order is `len - 1`.
    pub fn new(name: impl Into<String>, coefficients: Vec<SmoothFunction>) -> Result<Self> {
        let first = coefficients
            .first()
            .ok_or_else(|| Error::Descriptor("family needs at least an order-0 coefficient".into()))?;
        let domain = first.domain().clone();
        for c in &coefficients[1..] {
            if c.dim() != domain.dim() {
                return Err(Error::Dimension { expected: domain.dim(), got: c.dim() });
            }
            if c.domain() != &domain {
                return Err(Error::Descriptor(format!(
                    "coefficient {} lives on a different domain than {}",
                    c.name(),
                    first.name()
                )));
            }
        }
        Ok(Self { name: name.into(), domain, coefficients })
    }

    /// Leading potential with identically zero corrections up to `order`.
    pub fn classical(leading: &ConvexPotential, order: usize) -> Self {
        let f = leading.function().clone();
        let mut coefficients = vec![f];
        coefficients.extend((0..order).map(|_| SmoothFunction::zero(leading.domain().clone())));
        Self { name: leading.name().to_string(), domain: leading.domain().clone(), coefficients }
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

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[SmoothFunction] {
        &self.coefficients
    }

    /// `ψ = Ψ(·, 0)` as a potential. Strict convexity is checked on use.
    pub fn leading(&self) -> ConvexPotential {
        ConvexPotential::new(self.coefficients[0].clone())
    }

    pub fn family_eval(&self, t: &[f64]) -> Result<FormalSeries> {
        self.domain.check(t)?;
        Ok(FormalSeries::new(self.coefficients.iter().map(|c| c.eval(t)).collect::<Result<_>>()?))
    }

    /// Gradient per coefficient; `out[i]` is the series for `∂_iΨ`.
    pub fn family_gradient(&self, t: &[f64]) -> Result<Vec<FormalSeries>> {
        self.domain.check(t)?;
        let grads = self.coefficients.iter().map(|c| c.gradient(t)).collect::<Result<Vec<DVector<f64>>>>()?;
        Ok((0..self.dim())
            .map(|i| FormalSeries::new(grads.iter().map(|g| g[i]).collect()))
            .collect())
    }

    /// Hessian per coefficient. The order-0 matrix is computed exactly as
    /// the classical Hessian of `ψ`.
    pub fn family_hessian(&self, t: &[f64]) -> Result<SeriesMatrix> {
        self.domain.check(t)?;
        Ok(SeriesMatrix::new(self.coefficients.iter().map(|c| c.hessian(t)).collect::<Result<_>>()?))
    }

    /// Strict convexity in the formal sense: the order-0 Hessian must be
    /// positive definite at every sample; higher orders are only recorded.
    pub fn formal_convexity_check(&self, sample_points: &[Vec<f64>]) -> Result<FormalConvexityReport> {
        let samples = sample_points
            .iter()
            .map(|p| {
                let h = self.family_hessian(p)?;
                Ok(FormalConvexitySample {
                    point: p.clone(),
                    min_eigenvalue: linalg::min_eigenvalue(h.coeff(0)),
                    higher_order_max_abs: h.coeffs()[1..].iter().map(|m| m.amax()).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FormalConvexityReport { samples, threshold: PD_EPSILON })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormalConvexitySample {
    pub point: Vec<f64>,
    pub min_eigenvalue: f64,
    /// `max |∂²ψ_k|` for `k = 1..N`.
    pub higher_order_max_abs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormalConvexityReport {
    pub samples: Vec<FormalConvexitySample>,
    pub threshold: f64,
}

impl FormalConvexityReport {
    pub fn passed(&self) -> bool {
        self.samples.iter().all(|s| s.min_eigenvalue > self.threshold)
    }

    pub fn first_failure(&self) -> Option<&FormalConvexitySample> {
        self.samples.iter().find(|s| s.min_eigenvalue <= self.threshold)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.samples.iter().map(|s| s.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }
}
