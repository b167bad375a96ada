//! Legendre duality: dual coordinates, the inverse gradient map, the convex
//! conjugate and the canonical (Bregman) divergence.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::potential::ConvexPotential;

/// Gradient residual accepted by the inverse-map solver.
pub const NEWTON_TOL: f64 = 1e-10;
/// Fenchel–Young defect accepted for a matched pair.
pub const FY_TOL: f64 = 1e-9;
pub const MAX_ITER: usize = 100;

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_BACKTRACK: usize = 60;
// relative Newton step below which an iterate counts as settled
const STEP_TOL: f64 = 1e-6;
// the step that reached a converged iterate must itself be this small
// (relative); run-away iterates toward a boundary keep taking O(1) steps
const SETTLE_TOL: f64 = 1e-2;

/// Tuning for the damped Newton solve in [`from_dual_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: NEWTON_TOL,
            max_iter: MAX_ITER,
        }
    }
}

/// Matched primal/dual point.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub psi: f64,
    pub psi_star: f64,
    /// `|Ψ(θ) + Ψ*(η) − ⟨θ, η⟩|`.
    pub residual: f64,
}

/// `η = ∇Ψ(θ)` with `Ψ*(η) = ⟨θ, η⟩ − Ψ(θ)`.
pub fn to_dual(p: &ConvexPotential, theta: &[f64]) -> Result<DualPair> {
    let psi = p.eval(theta)?;
    let eta: Vec<f64> = p.gradient(theta)?.iter().copied().collect();
    let pairing = dot(theta, &eta);
    let psi_star = pairing - psi;
    Ok(DualPair {
        residual: (psi + psi_star - pairing).abs(),
        theta: theta.to_vec(),
        eta,
        psi,
        psi_star,
    })
}

/// Solves `∇Ψ(θ) = η` from `theta0` with default options.
pub fn from_dual(p: &ConvexPotential, eta: &[f64], theta0: &[f64]) -> Result<Vec<f64>> {
    from_dual_with(p, eta, theta0, &NewtonOptions::default())
}

/// Damped Newton on `Ψ(θ) − ⟨θ, η⟩` with Armijo backtracking; steps are
/// halved until the iterate is interior (and evaluable).
///
/// Convergence requires both `‖∇Ψ(θ) − η‖∞ ≤ tol` and a settled Newton step,
/// so a run-away iterate chasing a boundary `η` is reported as
/// `NonConvergence` rather than accepted on a vanishing gradient.
pub fn from_dual_with(
    p: &ConvexPotential,
    eta: &[f64],
    theta0: &[f64],
    opts: &NewtonOptions,
) -> Result<Vec<f64>> {
    let n = p.dim();
    if eta.len() != n {
        return Err(Error::Dimension { expected: n, got: eta.len() });
    }
    p.domain().check(theta0)?;
    let eta_v = DVector::from_column_slice(eta);
    let objective = |x: &[f64]| p.eval(x).map(|v| v - dot(x, eta));
    let residual_at = |x: &[f64]| p.gradient(x).map(|g| (g - &eta_v).amax());

    let mut x = theta0.to_vec();
    let mut residual = f64::INFINITY;
    let mut last_step: Option<f64> = None;
    for iteration in 0..opts.max_iter {
        let grad = p.gradient(&x)? - &eta_v;
        residual = grad.amax();
        // a numerically singular Hessian means the iterate has run off
        // toward the boundary of the dual image
        let hess = match p.hessian(&x) {
            Ok(h) => h,
            Err(Error::Convexity { .. }) => {
                return Err(Error::NonConvergence { iterations: iteration, residual })
            }
            Err(e) => return Err(e),
        };
        let Some(chol) = hess.cholesky() else {
            return Err(Error::NonConvergence { iterations: iteration, residual });
        };
        let step = -chol.solve(&grad);
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let settled = last_step.is_none_or(|s| s <= SETTLE_TOL * scale);
        if residual <= opts.tol && step.amax() <= STEP_TOL * scale && settled {
            // one more full step costs nothing and gains the quadratic rate
            let polished: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            if p.domain().contains(&polished) && residual_at(&polished).is_ok_and(|r| r <= residual) {
                return Ok(polished);
            }
            return Ok(x);
        }

        let f0 = objective(&x)?;
        let slope = grad.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut saw_interior = false;
        for _ in 0..MAX_BACKTRACK {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            if p.domain().contains(&cand) {
                saw_interior = true;
                if let Ok(fc) = objective(&cand) {
                    // a flat objective (to rounding) falls back on residual decrease
                    let flat = (fc - f0).abs() <= 1e-14 * (1.0 + f0.abs());
                    if fc <= f0 + ARMIJO * alpha * slope
                        || (flat && residual_at(&cand).is_ok_and(|r| r < residual))
                    {
                        last_step = Some(alpha * step.amax());
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            alpha *= SHRINK;
        }
        match accepted {
            Some(cand) => x = cand,
            None if !saw_interior => {
                let point = x.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
                return Err(Error::Domain { point });
            }
            None => return Err(Error::NonConvergence { iterations: iteration + 1, residual }),
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual })
}

/// `Ψ*(η) = ⟨θ̂, η⟩ − Ψ(θ̂)` with `θ̂` solving `∇Ψ(θ̂) = η` from the default start.
pub fn conjugate(p: &ConvexPotential, eta: &[f64]) -> Result<f64> {
    let theta = from_dual(p, eta, &p.default_start())?;
    Ok(dot(&theta, eta) - p.eval(&theta)?)
}

/// `Ψ(θ) + Ψ*(η) − ⟨θ, η⟩`; zero exactly when `η = ∇Ψ(θ)`, positive otherwise.
pub fn fenchel_young_residual(p: &ConvexPotential, theta: &[f64], eta: &[f64]) -> Result<f64> {
    Ok(p.eval(theta)? + conjugate(p, eta)? - dot(theta, eta))
}

/// `D(θ₁‖θ₂) = Ψ(θ₁) − Ψ(θ₂) − ⟨∇Ψ(θ₂), θ₁ − θ₂⟩`, clamped at zero.
pub fn bregman_divergence(p: &ConvexPotential, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
    let g = p.gradient(theta2)?;
    let lin: f64 = g.iter().zip(theta1.iter().zip(theta2)).map(|(gi, (a, b))| gi * (a - b)).sum();
    Ok((p.eval(theta1)? - p.eval(theta2)? - lin).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::BoxDomain;

    /// Grid search of `⟨θ, η⟩ − Ψ(θ)` over `[−30, 30]`, polished by plain
    /// Newton on the scalar derivative.
    fn conjugate_oracle_1d(psi: impl Fn(f64) -> f64, eta: f64) -> f64 {
        let obj = |t: f64| t * eta - psi(t);
        let mut best = -30.0;
        let mut k = 0;
        while k <= 60_000 {
            let t = -30.0 + k as f64 * 1e-3;
            if obj(t) > obj(best) {
                best = t;
            }
            k += 1;
        }
        let h = 1e-4;
        for _ in 0..50 {
            let d1 = (obj(best + h) - obj(best - h)) / (2.0 * h);
            let d2 = (obj(best + h) - 2.0 * obj(best) + obj(best - h)) / (h * h);
            if d2 == 0.0 {
                break;
            }
            best -= d1 / d2;
        }
        obj(best)
    }

    fn softplus(t: f64) -> f64 {
        (1.0 + t.exp()).ln()
    }

    #[test]
    fn oracle_values_match_closed_forms() {
        assert!((conjugate_oracle_1d(softplus, 0.5) + 2f64.ln()).abs() < 1e-9);
        assert!((conjugate_oracle_1d(f64::exp, 1.0) + 1.0).abs() < 1e-9);
        let neg_ent = 0.25 * 0.25f64.ln() + 0.75 * 0.75f64.ln();
        assert!((conjugate_oracle_1d(softplus, 0.25) - neg_ent).abs() < 1e-9);
    }

    #[test]
    fn to_dual_examples() {
        let b = ConvexPotential::bernoulli();
        let pair = to_dual(&b, &[0.0]).unwrap();
        assert!((pair.eta[0] - 0.5).abs() < 1e-15);
        assert!((pair.psi_star - conjugate_oracle_1d(softplus, 0.5)).abs() < 1e-9);
        assert!((pair.psi_star + std::f64::consts::LN_2).abs() < 1e-12);
        assert!(pair.residual <= 1e-10);

        let q = to_dual(&ConvexPotential::quadratic(1), &[3.0]).unwrap();
        assert_eq!((q.eta[0], q.psi_star), (3.0, 4.5));

        let pois = to_dual(&ConvexPotential::poisson(), &[0.0]).unwrap();
        assert!((pois.eta[0] - 1.0).abs() < 1e-12);
        assert!((pois.psi_star - conjugate_oracle_1d(f64::exp, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn from_dual_examples() {
        let b = ConvexPotential::bernoulli();
        assert!(from_dual(&b, &[0.5], &[2.0]).unwrap()[0].abs() < 1e-10);
        let s2 = 1.0 / (1.0 + (-2f64).exp());
        assert!((from_dual(&b, &[s2], &[0.0]).unwrap()[0] - 2.0).abs() < 1e-9);
        assert!((s2 - 0.8807971).abs() < 1e-7);
        let q = ConvexPotential::quadratic(1);
        assert!((from_dual(&q, &[-1.5], &[0.0]).unwrap()[0] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn from_dual_rejects_boundary_and_exterior_targets() {
        let b = ConvexPotential::bernoulli();
        for eta in [1.0, 0.0, 1.5, -0.2] {
            let err = from_dual(&b, &[eta], &[0.0]).unwrap_err();
            assert!(matches!(err, Error::NonConvergence { .. }), "{eta}: {err:?}");
        }
        let g = ConvexPotential::gaussian_natural();
        // second moment below squared mean is outside the image
        let err = from_dual(&g, &[1.0, 0.5], &[0.0, -1.0]).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. } | Error::Domain { .. }), "{err:?}");
    }

    #[test]
    fn from_dual_respects_bounded_boxes() {
        let g = ConvexPotential::gaussian_natural();
        // μ = 2, σ² = 0.01: the solution hugs θ₂ = −50 from a start at −1
        let theta = from_dual(&g, &[2.0, 4.01], &[0.0, -1.0]).unwrap();
        assert!((theta[0] - 200.0).abs() < 1e-6 && (theta[1] + 50.0).abs() < 1e-6);
        let boxed = ConvexPotential::quadratic(1)
            .restricted(BoxDomain::new(vec![-1.0], vec![1.0]).unwrap())
            .unwrap();
        assert!(from_dual(&boxed, &[2.0], &[0.0]).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let b = ConvexPotential::bernoulli();
        assert!((conjugate(&b, &[0.5]).unwrap() + 2f64.ln()).abs() < 1e-12);
        let c = conjugate(&b, &[0.25]).unwrap();
        assert!((c - conjugate_oracle_1d(softplus, 0.25)).abs() < 1e-9);
        assert!((c + 0.5623351).abs() < 1e-7);
        assert!((conjugate(&ConvexPotential::quadratic(1), &[2.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fenchel_young_examples() {
        let b = ConvexPotential::bernoulli();
        assert!(fenchel_young_residual(&b, &[0.0], &[0.5]).unwrap().abs() < 1e-10);
        let r = fenchel_young_residual(&b, &[0.0], &[0.25]).unwrap();
        assert!((r - (2f64.ln() + conjugate_oracle_1d(softplus, 0.25))).abs() < 1e-9);
        assert!((r - 0.1308120).abs() < 1e-7);
        let q = ConvexPotential::quadratic(1);
        assert_eq!(fenchel_young_residual(&q, &[0.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn bregman_examples() {
        let q = ConvexPotential::quadratic(1);
        assert_eq!(bregman_divergence(&q, &[3.0], &[1.0]).unwrap(), 2.0);
        let b = ConvexPotential::bernoulli();
        assert_eq!(bregman_divergence(&b, &[0.4], &[0.4]).unwrap(), 0.0);
        // D(θ₁‖θ₂) is KL(P_θ₂‖P_θ₁) = Σ_ω ρ₂(ω) log(ρ₂(ω)/ρ₀(ω)) over ω ∈ {0, 1}
        let s2 = 1.0 / (1.0 + (-2f64).exp());
        let kl = s2 * (s2 / 0.5).ln() + (1.0 - s2) * ((1.0 - s2) / 0.5).ln();
        assert!((bregman_divergence(&b, &[0.0], &[2.0]).unwrap() - kl).abs() < 1e-12);
        assert!((kl - 0.3278133).abs() < 1e-7);
    }
}
