//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function returns a flat `Vec<f64>` laid out in fixed-width
//! rows, so the page can read it as a `Float64Array` without any glue.

use legendre_bundle::formal_series::FamilyPotential;
use legendre_bundle::hessian_qft::quantum_geometric_tensor;
use legendre_bundle::legendre::{conjugate, from_dual, to_dual};
use legendre_bundle::linalg::min_eigenvalue;
use legendre_bundle::potential::{BoxDomain, ConvexPotential, PolyTerm, SmoothFunction};
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

/// Width of a row returned by [`legendre_curve`].
pub const CURVE_ROW: usize = 6;
/// Width of a row returned by [`deformed_metric`].
pub const METRIC_ROW: usize = 4;

fn builtin(name: &str) -> Result<ConvexPotential, String> {
    match name {
        "bernoulli" => Ok(ConvexPotential::bernoulli()),
        "poisson" => Ok(ConvexPotential::poisson()),
        "quadratic" => Ok(ConvexPotential::quadratic(1)),
        other => Err(format!("unknown potential `{other}`")),
    }
}

fn grid(from: f64, to: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 || !from.is_finite() || !to.is_finite() || from >= to {
        return Err("need a finite range with from < to and at least 2 samples".into());
    }
    Ok((0..n)
        .map(|k| from + (to - from) * k as f64 / (n - 1) as f64)
        .collect())
}

/// Rows `[θ, Ψ(θ), η, Ψ*(η), g(θ), |θ − ∇Ψ*(η)|]` for a one-dimensional
/// builtin. `Ψ*` is recomputed from `η` by Newton rather than read off the
/// primal side, so the last column is the round-trip error.
pub fn legendre_curve_rows(name: &str, from: f64, to: f64, n: usize) -> Result<Vec<f64>, String> {
    let p = builtin(name)?;
    let mut out = Vec::with_capacity(n * CURVE_ROW);
    for theta in grid(from, to, n)? {
        let pair = to_dual(&p, &[theta]).map_err(|e| e.to_string())?;
        let psi_star = conjugate(&p, &pair.eta).map_err(|e| e.to_string())?;
        let back = from_dual(&p, &pair.eta, &p.default_start()).map_err(|e| e.to_string())?;
        let g = p.hessian(&[theta]).map_err(|e| e.to_string())?[(0, 0)];
        out.extend([
            theta,
            pair.psi,
            pair.eta[0],
            psi_star,
            g,
            (back[0] - theta).abs(),
        ]);
    }
    Ok(out)
}

/// Rows `[t, g₀(t), g(t, u), pd]` for `F(t, u) = t²/2 + u·λ t⁴/12` on
/// `(−3, 3)`, where `g(t, u)` is the substituted metric and `pd` is 1 when it
/// is still positive definite.
pub fn deformed_metric_rows(
    lambda: f64,
    u: f64,
    from: f64,
    to: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    let domain = BoxDomain::new(vec![-3.0], vec![3.0]).map_err(|e| e.to_string())?;
    let poly = |c: f64, e: u32| {
        SmoothFunction::polynomial(
            "c",
            domain.clone(),
            vec![PolyTerm {
                coeff: c,
                exponents: vec![e],
            }],
        )
    };
    let fam = FamilyPotential::new(
        "quartic",
        vec![poly(0.5, 2), poly(lambda / 12.0, 4)]
            .into_iter()
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(n * METRIC_ROW);
    for t in grid(from, to, n)? {
        let h = fam.family_hessian(&[t]).map_err(|e| e.to_string())?;
        let g = h.partial_sum(h.order(), u);
        let pd = if min_eigenvalue(&g) > 0.0 { 1.0 } else { 0.0 };
        out.extend([t, h.coeff(0)[(0, 0)], g[(0, 0)], pd]);
    }
    Ok(out)
}

/// `[Re Q₀₀, Re Q₀₁, Re Q₁₁, Im Q₀₁]` for the qubit state
/// `(cos(θ/2), e^{iφ} sin(θ/2))`.
pub fn bloch_qgt_entries(theta: f64, phi: f64) -> Result<Vec<f64>, String> {
    let states = |p: &[f64]| {
        Ok(vec![
            Complex64::new((p[0] / 2.0).cos(), 0.0),
            Complex64::from_polar((p[0] / 2.0).sin(), p[1]),
        ])
    };
    let q = quantum_geometric_tensor(states, &BoxDomain::unbounded(2), &[theta, phi])
        .map_err(|e| e.to_string())?;
    Ok(vec![q[(0, 0)].re, q[(0, 1)].re, q[(1, 1)].re, q[(0, 1)].im])
}

#[wasm_bindgen]
pub fn legendre_curve(name: &str, from: f64, to: f64, n: usize) -> Result<Vec<f64>, JsError> {
    legendre_curve_rows(name, from, to, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn deformed_metric(
    lambda: f64,
    u: f64,
    from: f64,
    to: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    deformed_metric_rows(lambda, u, from, to, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bloch_qgt(theta: f64, phi: f64) -> Result<Vec<f64>, JsError> {
    bloch_qgt_entries(theta, phi).map_err(|e| JsError::new(&e))
}
