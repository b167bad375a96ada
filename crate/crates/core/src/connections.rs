//! Dually flat structure induced by a convex potential.
//!
//! In the primal affine coordinates `θ` the flat connection `∇⁺` has vanishing
//! Christoffel symbols. The dual connection `∇⁻` has lowered symbols
//! `Γ⁻_{ij,k} = ∂_i∂_j∂_k Ψ` and mixed symbols `Γ⁻ᵏ_{ij} = g^{kl} ∂_i∂_j∂_l Ψ`;
//! it becomes trivial in the dual coordinates `η = ∇Ψ(θ)`.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd;
use crate::legendre;
use crate::linalg::{self, Tensor3};
use crate::potential::{BoxDomain, ConvexPotential, SmoothFunction};

#[derive(Debug, Clone)]
pub struct DuallyFlatManifold {
    potential: ConvexPotential,
    dual: Arc<OnceLock<ConvexPotential>>,
}

impl From<ConvexPotential> for DuallyFlatManifold {
    fn from(potential: ConvexPotential) -> Self {
        Self::new(potential)
    }
}

impl DuallyFlatManifold {
    pub fn new(potential: ConvexPotential) -> Self {
        Self {
            potential,
            dual: Arc::new(OnceLock::new()),
        }
    }

    pub fn potential(&self) -> &ConvexPotential {
        &self.potential
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    /// `g_ij = ∂_i∂_j Ψ`.
    pub fn metric(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.potential.hessian(theta)
    }

    /// `θ(η)` from the primal default start.
    pub fn primal_coordinates(&self, eta: &[f64]) -> Result<Vec<f64>> {
        legendre::from_dual(&self.potential, eta, &self.potential.default_start())
    }

    /// `Ψ*` as a potential in `η`: value is the conjugate, gradient the
    /// inverse Legendre map, Hessian the inverse primal metric.
    ///
    /// The dual image is not a box in general, so the domain is `ℝⁿ` and
    /// points outside the image fail with `NonConvergence`. Newton solves on
    /// the dual start from the image of the primal default start.
    pub fn dual_potential(&self) -> &ConvexPotential {
        self.dual.get_or_init(|| {
            let n = self.dim();
            let (pv, pg, ph) = (self.clone(), self.clone(), self.clone());
            let f = SmoothFunction::new(format!("{}*", self.potential.name()), BoxDomain::unbounded(n), move |eta| {
                let theta = pv.primal_coordinates(eta)?;
                Ok(linalg::dot(&theta, eta) - pv.potential.eval(&theta)?)
            })
            .with_gradient(move |eta| Ok(DVector::from_vec(pg.primal_coordinates(eta)?)))
            .with_hessian(move |eta| {
                let theta = ph.primal_coordinates(eta)?;
                let g = ph.potential.hessian(&theta)?;
                g.clone().try_inverse().ok_or(Error::Convexity {
                    point: theta,
                    min_eigenvalue: linalg::min_eigenvalue(&g),
                })
            });
            let dual = ConvexPotential::new(f);
            let start = self
                .potential
                .gradient(&self.potential.default_start())
                .map(|g| g.iter().copied().collect::<Vec<f64>>());
            match start {
                Ok(s) => dual.clone().with_start(s).unwrap_or(dual),
                Err(_) => dual,
            }
        })
    }

    /// `Γ⁺` in `θ`-coordinates: identically zero.
    pub fn christoffel_primal(&self, theta: &[f64]) -> Result<Tensor3> {
        self.potential.domain().check(theta)?;
        Ok(Tensor3::zeros(self.dim()))
    }

    /// Lowered dual symbols `Γ⁻_{ij,k} = ∂_i∂_j∂_k Ψ`.
    pub fn christoffel_dual_lowered(&self, theta: &[f64]) -> Result<Tensor3> {
        self.potential.third_derivative(theta)
    }

    /// Mixed dual symbols in `θ`-coordinates, stored as `get(i, j, k) = Γ⁻ᵏ_{ij}`.
    pub fn christoffel_dual_in_primal_coords(&self, theta: &[f64]) -> Result<Tensor3> {
        let g = self.metric(theta)?;
        let g_inv = g.clone().try_inverse().ok_or(Error::Convexity {
            point: theta.to_vec(),
            min_eigenvalue: linalg::min_eigenvalue(&g),
        })?;
        let t = self.christoffel_dual_lowered(theta)?;
        let n = self.dim();
        Ok(Tensor3::from_fn(n, |i, j, k| (0..n).map(|l| g_inv[(k, l)] * t.get(i, j, l)).sum()))
    }

    /// `|Z·g(X,Y) − g(∇⁺_Z X, Y) − g(X, ∇⁻_Z Y)|` for constant coordinate
    /// fields. The derivative of the metric is a fourth-order stencil along `Z`.
    pub fn duality_defect(&self, theta: &[f64], x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        let n = self.dim();
        for v in [x, y, z] {
            if v.len() != n {
                return Err(Error::Dimension { expected: n, got: v.len() });
            }
        }
        let (xv, yv, zv) = (
            DVector::from_column_slice(x),
            DVector::from_column_slice(y),
            DVector::from_column_slice(z),
        );
        let metric_xy = |p: &[f64]| self.potential.function().hessian(p).map(|g| xv.dot(&(&g * &yv)));
        let z_g_xy = fd::directional_derivative(&metric_xy, self.potential.domain(), theta, z)?;

        let g = self.metric(theta)?;
        let plus = self.christoffel_primal(theta)?;
        let minus = self.christoffel_dual_in_primal_coords(theta)?;
        let apply = |gamma: &Tensor3, a: &DVector<f64>, b: &DVector<f64>| {
            DVector::from_fn(n, |k, _| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += gamma.get(i, j, k) * a[i] * b[j];
                    }
                }
                acc
            })
        };
        let nabla_plus_zx = apply(&plus, &zv, &xv);
        let nabla_minus_zy = apply(&minus, &zv, &yv);
        let rhs = (&g * &nabla_plus_zx).dot(&yv) + xv.dot(&(&g * &nabla_minus_zy));
        Ok((z_g_xy - rhs).abs())
    }

    /// Largest defect over all coordinate basis triples.
    pub fn max_basis_duality_defect(&self, theta: &[f64]) -> Result<f64> {
        let n = self.dim();
        let e = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max(self.duality_defect(theta, &e(i), &e(j), &e(k))?);
                }
            }
        }
        Ok(worst)
    }

    /// `∂θ/∂η = g⁻¹(θ(η))`.
    fn inverse_metric_at_dual(&self, eta: &[f64]) -> Result<DMatrix<f64>> {
        let theta = self.primal_coordinates(eta)?;
        let g = self.metric(&theta)?;
        g.clone().try_inverse().ok_or(Error::Convexity {
            point: theta,
            min_eigenvalue: linalg::min_eigenvalue(&g),
        })
    }

    /// `∇⁻` in `η`-coordinates, stored as `get(a, b, c) = Γ̃ᶜ_{ab}`:
    /// `Γ̃ᶜ_{ab} = g_{ck}(Γ⁻ᵏ_{ij} ∂_aθⁱ ∂_bθʲ + ∂_a∂_bθᵏ)`, with the second
    /// derivatives of the inverse map taken by central differences in `η`.
    pub fn christoffel_dual_in_dual_coords(&self, eta: &[f64]) -> Result<Tensor3> {
        let n = self.dim();
        if eta.len() != n {
            return Err(Error::Dimension { expected: n, got: eta.len() });
        }
        let theta = self.primal_coordinates(eta)?;
        let g = self.metric(&theta)?;
        let jac = self.inverse_metric_at_dual(eta)?;
        let gamma = self.christoffel_dual_in_primal_coords(&theta)?;

        // d2[a][(k, b)] = ∂_a (∂θᵏ/∂η_b); Richardson over steps h and h/2
        // because g⁻¹ varies fast near the edge of the dual image
        let root = fd::first_order_root();
        let mut d2 = Vec::with_capacity(n);
        for a in 0..n {
            let central = |h: f64| -> Result<DMatrix<f64>> {
                let mut ep = eta.to_vec();
                let mut em = eta.to_vec();
                ep[a] += h;
                em[a] -= h;
                Ok((self.inverse_metric_at_dual(&ep)? - self.inverse_metric_at_dual(&em)?) / (2.0 * h))
            };
            let h = fd::scaled_step(root, eta[a]);
            let (coarse, fine) = (central(h)?, central(h / 2.0)?);
            d2.push((fine * 4.0 - coarse) / 3.0);
        }

        let mut out = Tensor3::zeros(n);
        for a in 0..n {
            for b in 0..n {
                let inner = DVector::from_fn(n, |k, _| {
                    let mut acc = d2[a][(k, b)];
                    for i in 0..n {
                        for j in 0..n {
                            acc += gamma.get(i, j, k) * jac[(i, a)] * jac[(j, b)];
                        }
                    }
                    acc
                });
                let lowered = &g * inner;
                for c in 0..n {
                    out.set(a, b, c, lowered[c]);
                }
            }
        }
        Ok(out)
    }

    /// Flatness defect of `∇⁻` at `η`: the larger of the largest Christoffel
    /// symbol in `η`-coordinates and the largest entry of the curvature
    /// `R^a_{bcd} = ∂_cΓ̃^a_{db} − ∂_dΓ̃^a_{cb} + Γ̃^a_{ce}Γ̃^e_{db} − Γ̃^a_{de}Γ̃^e_{cb}`.
    pub fn dual_flatness_defect(&self, eta: &[f64]) -> Result<f64> {
        let n = self.dim();
        let gamma = self.christoffel_dual_in_dual_coords(eta)?;
        // Γ̃ᵃ_{db} lives at gamma.get(d, b, a)
        let root = fd::third_order_root();
        let mut dgamma = Vec::with_capacity(n);
        for c in 0..n {
            let h = fd::scaled_step(root, eta[c]);
            let mut ep = eta.to_vec();
            let mut em = eta.to_vec();
            ep[c] += h;
            em[c] -= h;
            let gp = self.christoffel_dual_in_dual_coords(&ep)?;
            let gm = self.christoffel_dual_in_dual_coords(&em)?;
            dgamma.push(Tensor3::from_fn(n, |i, j, k| (gp.get(i, j, k) - gm.get(i, j, k)) / (2.0 * h)));
        }
        let mut worst = gamma.max_abs();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut r = dgamma[c].get(d, b, a) - dgamma[d].get(c, b, a);
                        for e in 0..n {
                            r += gamma.get(c, e, a) * gamma.get(d, b, e) - gamma.get(d, e, a) * gamma.get(c, b, e);
                        }
                        worst = worst.max(r.abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn sigma(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn primal_christoffels_vanish() {
        let b = DuallyFlatManifold::new(ConvexPotential::bernoulli());
        assert_eq!(b.christoffel_primal(&[0.0]).unwrap().as_slice(), &[0.0]);
        let c = DuallyFlatManifold::new(ConvexPotential::categorical(2));
        let g = c.christoffel_primal(&[1.0, -1.0]).unwrap();
        assert_eq!(g.as_slice(), &[0.0; 8]);
        let q = DuallyFlatManifold::new(ConvexPotential::quadratic(3));
        assert_eq!(q.christoffel_primal(&[5.0, 1.0, 2.0]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn dual_christoffel_examples() {
        let q = DuallyFlatManifold::new(ConvexPotential::quadratic(2));
        assert_eq!(q.christoffel_dual_in_primal_coords(&[0.4, 2.0]).unwrap().max_abs(), 0.0);
        let b = DuallyFlatManifold::new(ConvexPotential::bernoulli());
        assert!(b.christoffel_dual_in_primal_coords(&[0.0]).unwrap().get(0, 0, 0).abs() < 1e-10);
        // value-only third derivative over the analytic Hessian
        let values_only = SmoothFunction::new("softplus", BoxDomain::unbounded(1), |p| Ok((1.0 + p[0].exp()).ln()));
        let t = values_only.third_derivative(&[1.0]).unwrap().get(0, 0, 0);
        let oracle = t / (sigma(1.0) * (1.0 - sigma(1.0)));
        let got = b.christoffel_dual_in_primal_coords(&[1.0]).unwrap().get(0, 0, 0);
        assert!((got - oracle).abs() < 1e-4);
        assert!((got - (1.0 - 2.0 * sigma(1.0))).abs() < 1e-9);
        assert!((got + 0.4621172).abs() < 1e-7);
    }

    #[test]
    fn duality_defect_examples() {
        let b = DuallyFlatManifold::new(ConvexPotential::bernoulli());
        assert!(b.duality_defect(&[0.7], &[1.0], &[1.0], &[1.0]).unwrap() <= 1e-6);
        let q = DuallyFlatManifold::new(ConvexPotential::quadratic(2));
        assert_eq!(q.duality_defect(&[3.0, -1.0], &[1.0, 2.0], &[0.5, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        let c = DuallyFlatManifold::new(ConvexPotential::categorical(2));
        assert!(c.max_basis_duality_defect(&[0.3, -0.2]).unwrap() <= 1e-6);
        assert!(c.duality_defect(&[0.3, -0.2], &[1.0], &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn dual_flatness_examples() {
        let q = DuallyFlatManifold::new(ConvexPotential::quadratic(1));
        assert!(q.dual_flatness_defect(&[1.0]).unwrap() < 1e-12);
        let b = DuallyFlatManifold::new(ConvexPotential::bernoulli());
        assert!(b.dual_flatness_defect(&[0.5]).unwrap() <= 1e-5);
        let p = DuallyFlatManifold::new(ConvexPotential::poisson());
        assert!(p.dual_flatness_defect(&[1.0]).unwrap() <= 1e-5);
        let c = DuallyFlatManifold::new(ConvexPotential::categorical(2));
        assert!(c.dual_flatness_defect(&[0.2, 0.5]).unwrap() <= 1e-5);
        assert!(matches!(b.dual_flatness_defect(&[1.0]), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn dual_potential_inverts_the_legendre_map() {
        let m = DuallyFlatManifold::new(ConvexPotential::categorical(2));
        let theta = [0.4, -0.9];
        let eta: Vec<f64> = m.potential().gradient(&theta).unwrap().iter().copied().collect();
        let dual = m.dual_potential();
        let back = dual.gradient(&eta).unwrap();
        assert!((back[0] - theta[0]).abs() < 1e-8 && (back[1] - theta[1]).abs() < 1e-8);
        let inv = m.metric(&theta).unwrap().try_inverse().unwrap();
        assert!(max_abs_diff(&dual.hessian(&eta).unwrap(), &inv) < 1e-6);
        // biconjugation through the dual potential
        let psi = legendre::conjugate(dual, &theta).unwrap();
        assert!((psi - m.potential().eval(&theta).unwrap()).abs() < 1e-8);
    }
}
