//! Fiber algebra of the Legendre bundle `H = H⁺ ⊕ H⁻` at a base point.
//!
//! Sections are `2n`-vectors in the frame `(∂₁..∂ₙ, dθ¹..dθⁿ)`: the first
//! `n` entries are the tangent part, the last `n` the covector part.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::connections::DuallyFlatManifold;
use crate::error::{Error, Result};
use crate::linalg::{self, max_abs_diff};
use crate::potential::PD_EPSILON;
use crate::report::Report;

/// `|det ω|` below this counts as degenerate.
pub const NONDEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreBundleFiber {
    pub base_point: Vec<f64>,
    pub dim: usize,
    pub pairing: DMatrix<f64>,
    pub legendre_morphism: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub omega: DMatrix<f64>,
}

/// `[[0, I], [I, 0]]`.
pub fn canonical_pairing(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |a, b| if a + n == b || b + n == a { 1.0 } else { 0.0 })
}

/// `+1` on `H⁺`, `−1` on `H⁻`.
pub fn canonical_j(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |a, b| match (a == b, a < n) {
        (true, true) => 1.0,
        (true, false) => -1.0,
        _ => 0.0,
    })
}

/// `[[0, I], [−I, 0]]`.
pub fn canonical_symplectic(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |a, b| {
        if b == a + n {
            1.0
        } else if a == b + n {
            -1.0
        } else {
            0.0
        }
    })
}

impl LegendreBundleFiber {
    /// Assembles the fiber over a base point from the Legendre morphism
    /// matrix; pairing, `J` and `ω(X,Y) = ⟨⟨JX, Y⟩⟩` are canonical.
    pub fn from_morphism(base_point: Vec<f64>, legendre_morphism: DMatrix<f64>) -> Self {
        let n = legendre_morphism.nrows();
        let pairing = canonical_pairing(n);
        let j = canonical_j(n);
        let omega = j.transpose() * &pairing;
        Self {
            base_point,
            dim: n,
            pairing,
            legendre_morphism,
            j,
            omega,
        }
    }

    fn check_section(&self, s: &[f64]) -> Result<()> {
        if s.len() == 2 * self.dim {
            Ok(())
        } else {
            Err(Error::Dimension { expected: 2 * self.dim, got: s.len() })
        }
    }

    /// `s₁ᵀ·⟨⟨·,·⟩⟩·s₂`.
    pub fn pairing_eval(&self, s1: &[f64], s2: &[f64]) -> Result<f64> {
        self.check_section(s1)?;
        self.check_section(s2)?;
        let (a, b) = (DVector::from_column_slice(s1), DVector::from_column_slice(s2));
        Ok(a.dot(&(&self.pairing * b)))
    }

    /// Coefficients of `𝓛(X)` in the `dθ` frame.
    pub fn legendre_morphism_apply(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        Ok(&self.legendre_morphism * DVector::from_column_slice(x))
    }

    /// Tangent vector as a section of `H⁺`.
    pub fn lift_tangent(&self, x: &[f64]) -> Vec<f64> {
        let mut s = x.to_vec();
        s.resize(2 * self.dim, 0.0);
        s
    }

    /// Covector as a section of `H⁻`.
    pub fn lift_covector(&self, alpha: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        s.extend_from_slice(alpha);
        s
    }

    fn basis(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[i] = 1.0;
        v
    }

    /// `g_ij = ⟨⟨∂_i, 𝓛(∂_j)⟩⟩`.
    pub fn induced_metric(&self) -> DMatrix<f64> {
        let n = self.dim;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            let di = self.lift_tangent(&self.basis(i));
            for j in 0..n {
                let lj = self.legendre_morphism_apply(&self.basis(j)).expect("basis has fiber dimension");
                let lj = self.lift_covector(lj.as_slice());
                g[(i, j)] = self.pairing_eval(&di, &lj).expect("sections have fiber dimension");
            }
        }
        g
    }

    /// `ω^S(s₁, s₂) = ⟨⟨J s₁, s₂⟩⟩`.
    pub fn symplectic_form_eval(&self, s1: &[f64], s2: &[f64]) -> Result<f64> {
        self.check_section(s1)?;
        let js1 = &self.j * DVector::from_column_slice(s1);
        self.pairing_eval(js1.as_slice(), s2)
    }

    fn omega_eval(&self, s1: &DVector<f64>, s2: &DVector<f64>) -> f64 {
        s1.dot(&(&self.omega * s2))
    }

    /// Pointwise axioms of the Legendre bundle and of the para-Kähler fiber,
    /// each as a named check. Algebraic identities are required to hold
    /// exactly; only definiteness and non-degeneracy use thresholds.
    pub fn verify_para_kahler(&self) -> Report {
        let n = self.dim;
        let p = &self.pairing;
        let mut r = Report::new("para_kahler_fiber");

        r.exact_zero("pairing_symmetric", max_abs_diff(p, &p.transpose()));
        r.exact_zero("h_plus_isotropic", p.view((0, 0), (n, n)).amax());
        r.exact_zero("h_minus_isotropic", p.view((n, n), (n, n)).amax());
        let id = DMatrix::<f64>::identity(n, n);
        let eval = max_abs_diff(&p.view((0, n), (n, n)).into_owned(), &id)
            .max(max_abs_diff(&p.view((n, 0), (n, n)).into_owned(), &id));
        r.exact_zero("evaluation_pairing", eval);
        r.above("pairing_nondegenerate", p.determinant().abs(), NONDEGENERACY_TOL);

        let eye = DMatrix::<f64>::identity(2 * n, 2 * n);
        r.exact_zero("j_involution", max_abs_diff(&(&self.j * &self.j), &eye));
        let plus_rank = 2 * n - linalg::numerical_rank(&(&self.j - &eye), 1e-12);
        let minus_rank = 2 * n - linalg::numerical_rank(&(&self.j + &eye), 1e-12);
        let trace = self.j.trace();
        let status_ok = plus_rank == n && minus_rank == n && trace == 0.0;
        r.push(
            "j_equal_rank",
            if status_ok { crate::report::Status::Pass } else { crate::report::Status::Fail },
            trace,
            0.0,
        )
        .note(format!("rank H+ = {plus_rank}, rank H- = {minus_rank}"));
        r.exact_zero("j_eigenbundles_match_splitting", max_abs_diff(&self.j, &canonical_j(n)));

        r.exact_zero("omega_from_pairing", max_abs_diff(&self.omega, &(self.j.transpose() * p)));
        r.exact_zero("omega_skew", max_abs_diff(&self.omega, &(-self.omega.transpose())));
        r.above("omega_nondegenerate", self.omega.determinant().abs(), NONDEGENERACY_TOL);
        r.exact_zero("omega_canonical", max_abs_diff(&self.omega, &canonical_symplectic(n)));
        let mut anti = 0.0f64;
        for a in 0..2 * n {
            for b in 0..2 * n {
                let (ea, eb) = (eye.column(a).into_owned(), eye.column(b).into_owned());
                let lhs = self.omega_eval(&(&self.j * &ea), &(&self.j * &eb));
                anti = anti.max((lhs + self.omega_eval(&ea, &eb)).abs());
            }
        }
        r.exact_zero("omega_j_anti_invariant", anti);

        let mut asym = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let (ei, ej) = (self.basis(i), self.basis(j));
                let lx = self.lift_covector(self.legendre_morphism_apply(&ei).expect("dim").as_slice());
                let ly = self.lift_covector(self.legendre_morphism_apply(&ej).expect("dim").as_slice());
                let a = self.pairing_eval(&self.lift_tangent(&ei), &ly).expect("dim");
                let b = self.pairing_eval(&self.lift_tangent(&ej), &lx).expect("dim");
                asym = asym.max((a - b).abs());
            }
        }
        r.exact_zero("legendre_morphism_symmetric", asym);
        r.above(
            "legendre_morphism_positive_definite",
            linalg::min_eigenvalue(&linalg::symmetrize(&self.legendre_morphism)),
            PD_EPSILON,
        );
        r
    }

    pub fn dump(&self) -> FiberDump {
        FiberDump {
            theta: self.base_point.clone(),
            pairing: linalg::to_rows(&self.pairing),
            legendre_morphism: linalg::to_rows(&self.legendre_morphism),
            j: linalg::to_rows(&self.j),
            omega: linalg::to_rows(&self.omega),
        }
    }
}

/// JSON form of a fiber: `{ "theta", "pairing", "L", "J", "omega" }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberDump {
    pub theta: Vec<f64>,
    pub pairing: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    pub legendre_morphism: Vec<Vec<f64>>,
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
}

/// Dually flat manifold → Legendre bundle fiber at `θ`.
pub fn build_fiber(m: &DuallyFlatManifold, theta: &[f64]) -> Result<LegendreBundleFiber> {
    let l = m.metric(theta)?;
    Ok(LegendreBundleFiber::from_morphism(theta.to_vec(), l))
}

/// Builds the fiber, recovers the metric through the pairing and compares it
/// with the Hessian; also reports flatness of `∇⁺` and the duality condition.
pub fn roundtrip_equivalence(m: &DuallyFlatManifold, theta: &[f64], duality_tol: f64) -> Result<Report> {
    let fiber = build_fiber(m, theta)?;
    let hess = m.potential().hessian(theta)?;
    let mut r = Report::new("equivalence_roundtrip");
    r.exact_zero("induced_metric_equals_hessian", max_abs_diff(&fiber.induced_metric(), &hess));
    r.exact_zero("primal_connection_flat", m.christoffel_primal(theta)?.max_abs());
    r.at_most("duality_condition", m.max_basis_duality_defect(theta)?, duality_tol);
    Ok(r)
}
