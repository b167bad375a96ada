use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use legendre_bundle::bundle::build_fiber;
use legendre_bundle::connections::DuallyFlatManifold;
use legendre_bundle::exp_family::ExponentialFamily;
use legendre_bundle::formal_series::{FamilyPotential, FormalSeries};
use legendre_bundle::hessian_qft::quantum_geometric_tensor;
use legendre_bundle::legendre;
use legendre_bundle::linalg::{self, max_abs_diff};
use legendre_bundle::potential::{BoxDomain, ConvexPotential, PolyTerm, SmoothFunction};

fn builtin(i: usize) -> ConvexPotential {
    match i {
        0 => ConvexPotential::bernoulli(),
        1 => ConvexPotential::categorical(2),
        2 => ConvexPotential::categorical(3),
        3 => ConvexPotential::poisson(),
        _ => ConvexPotential::gaussian_natural(),
    }
}

/// A builtin together with an interior point drawn from its sample window.
fn builtin_point() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (0usize..5).prop_flat_map(|i| {
        let d = builtin(i).domain().clone();
        let coords: Vec<_> = (0..d.dim()).map(|k| {
            let (a, b) = d.sample_window(k);
            a..b
        }).collect();
        (Just(i), coords)
    })
}

fn family(i: usize) -> ExponentialFamily {
    match i {
        0 => ExponentialFamily::bernoulli(),
        1 => ExponentialFamily::categorical(2),
        2 => ExponentialFamily::categorical(3),
        _ => ExponentialFamily::poisson(),
    }
}

fn family_point() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (0usize..4).prop_flat_map(|i| {
        let n = family(i).dim();
        (Just(i), prop::collection::vec(-2.5..2.5f64, n), prop::collection::vec(-2.5..2.5f64, n))
    })
}

fn int_series(order: usize) -> impl Strategy<Value = FormalSeries> {
    prop::collection::vec(-9i32..=9, order + 1).prop_map(|c| FormalSeries::new(c.into_iter().map(f64::from).collect()))
}

fn series_triple() -> impl Strategy<Value = (FormalSeries, FormalSeries, FormalSeries)> {
    (0usize..=8).prop_flat_map(|n| (int_series(n), int_series(n), int_series(n)))
}

fn real_series(lead: impl Strategy<Value = f64>) -> impl Strategy<Value = FormalSeries> {
    (lead, prop::collection::vec(-1.0..1.0f64, 0..=8)).prop_map(|(a0, rest)| {
        let mut c = vec![a0];
        c.extend(rest);
        FormalSeries::new(c)
    })
}

fn max_diff(a: &FormalSeries, b: &FormalSeries) -> f64 {
    a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms_hold_exactly((a, b, c) in series_triple()) {
        prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        prop_assert_eq!(a.add(&b).unwrap().add(&c).unwrap(), a.add(&b.add(&c).unwrap()).unwrap());
        prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert_eq!(
            a.mul(&b.add(&c).unwrap()).unwrap(),
            a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()
        );
        prop_assert_eq!(a.sub(&a).unwrap(), FormalSeries::zero(a.order()));
    }

    #[test]
    fn exp_and_log_are_inverse(a in real_series(Just(0.0))) {
        prop_assert!(max_diff(&a.exp().log().unwrap(), &a) <= 1e-12);
    }

    #[test]
    fn log_then_exp_recovers_positive_series(a in real_series(0.3..3.0f64)) {
        prop_assert!(max_diff(&a.log().unwrap().exp(), &a) <= 1e-12);
    }

    #[test]
    fn reciprocal_is_inverse(a in real_series(prop_oneof![0.5..2.0f64, -2.0..-0.5f64])) {
        let one = FormalSeries::constant(1.0, a.order());
        prop_assert!(max_diff(&a.mul(&a.recip().unwrap()).unwrap(), &one) <= 1e-12);
    }

    #[test]
    fn exp_turns_sums_into_products(a in real_series(-1.0..1.0f64), shift in -1.0..1.0f64) {
        let b = FormalSeries::new(a.coeffs().iter().map(|c| c * shift).collect());
        let lhs = a.add(&b).unwrap().exp();
        let rhs = a.exp().mul(&b.exp()).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12 * lhs.coeffs()[0].abs().max(1.0));
    }

    #[test]
    fn analytic_gradient_matches_fd((i, theta) in builtin_point()) {
        let p = builtin(i);
        let g = p.gradient(&theta).unwrap();
        let fd = p.function().fd_gradient(&theta).unwrap();
        let scale = g.amax().max(1.0);
        prop_assert!((g - fd).amax() <= 1e-6 * scale);
    }

    #[test]
    fn hessian_matches_jacobian_of_gradient((i, theta) in builtin_point()) {
        let p = builtin(i);
        let h = p.hessian(&theta).unwrap();
        let f = p.function().clone();
        let jac = legendre_bundle::fd::jacobian(&|q: &[f64]| f.gradient(q), p.domain(), &theta, legendre_bundle::fd::first_order_root()).unwrap();
        prop_assert!(max_abs_diff(&h, &jac) <= 1e-5);
        prop_assert!(h.clone().cholesky().is_some());
    }

    #[test]
    fn third_derivative_is_symmetric((i, theta) in builtin_point()) {
        let p = builtin(i);
        let t = p.third_derivative(&theta).unwrap();
        let n = t.dim();
        for a in 0..n { for b in 0..n { for c in 0..n {
            let v = t.get(a, b, c);
            for w in [t.get(a, c, b), t.get(b, a, c), t.get(b, c, a), t.get(c, a, b), t.get(c, b, a)] {
                prop_assert_eq!(v, w);
            }
        }}}
        let f = p.function().clone();
        let fd = legendre_bundle::fd::jacobian(
            &|q: &[f64]| f.hessian(q).map(|h| DVector::from_column_slice(h.as_slice())),
            p.domain(), &theta, legendre_bundle::fd::first_order_root(),
        ).unwrap();
        for a in 0..n { for b in 0..n { for c in 0..n {
            prop_assert!((t.get(a, b, c) - fd[(a + n * b, c)]).abs() <= 1e-4);
        }}}
    }

    #[test]
    fn legendre_round_trip((i, theta) in builtin_point()) {
        let p = builtin(i);
        let pair = legendre::to_dual(&p, &theta).unwrap();
        prop_assert!(pair.residual <= 1e-10);
        let back = legendre::from_dual(&p, &pair.eta, &p.default_start()).unwrap();
        for (a, b) in back.iter().zip(&theta) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn gradient_is_strictly_monotone((i, a) in builtin_point(), seed in 0u64..1000) {
        use rand::SeedableRng;
        let p = builtin(i);
        let b = p.domain().sample_interior(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assume!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-6));
        let diff = p.gradient(&a).unwrap() - p.gradient(&b).unwrap();
        prop_assert!(diff.dot(&DVector::from_iterator(a.len(), a.iter().zip(&b).map(|(x, y)| x - y))) > 0.0);
    }

    #[test]
    fn fenchel_young_inequality((i, a) in builtin_point(), seed in 0u64..1000) {
        use rand::SeedableRng;
        let p = builtin(i);
        let b = p.domain().sample_interior(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let eta: Vec<f64> = p.gradient(&b).unwrap().iter().copied().collect();
        // Ψ(a) + Ψ*(∇Ψ(b)) ≥ ⟨a, ∇Ψ(b)⟩
        prop_assert!(legendre::fenchel_young_residual(&p, &a, &eta).unwrap() >= -1e-9);
    }

    #[test]
    fn bregman_is_kl((i, a, b) in family_point()) {
        let fam = family(i);
        let d = legendre::bregman_divergence(&fam.as_potential(), &a, &b).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - fam.kl_divergence(&b, &a).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn negative_entropy_satisfies_fenchel_young((i, theta, _b) in family_point()) {
        let fam = family(i);
        let eta: Vec<f64> = fam.mean_parameters(&theta).unwrap().iter().copied().collect();
        let lhs = fam.log_partition(&theta).unwrap() + fam.negative_entropy(&eta).unwrap();
        let rhs: f64 = theta.iter().zip(&eta).map(|(t, e)| t * e).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn fisher_is_positive_definite((i, theta, _b) in family_point()) {
        let g = family(i).fisher_metric(&theta).unwrap();
        prop_assert!(linalg::min_eigenvalue(&g) > 0.0);
    }

    #[test]
    fn lowered_dual_symbols_are_symmetric((i, theta) in builtin_point()) {
        let m = DuallyFlatManifold::new(builtin(i));
        let t = m.christoffel_dual_lowered(&theta).unwrap();
        let n = t.dim();
        for a in 0..n { for b in 0..n { for c in 0..n {
            prop_assert_eq!(t.get(a, b, c), t.get(b, a, c));
            prop_assert!((t.get(a, b, c) - t.get(c, b, a)).abs() <= 1e-4);
        }}}
    }

    #[test]
    fn fiber_identities((i, theta) in builtin_point()) {
        let f = build_fiber(&DuallyFlatManifold::new(builtin(i)), &theta).unwrap();
        let n = f.dim;
        let eye = DMatrix::<f64>::identity(2 * n, 2 * n);
        prop_assert_eq!(&f.j * &f.j, eye);
        prop_assert_eq!(&f.omega, &(f.j.transpose() * &f.pairing));
        prop_assert_eq!(&f.omega, &(-f.omega.transpose()));
        prop_assert_eq!(f.induced_metric(), builtin(i).hessian(&theta).unwrap());
        prop_assert!(f.verify_para_kahler().passed());
    }

    #[test]
    fn symplectic_form_is_antisymmetric(s in prop::collection::vec(-5.0..5.0f64, 4), t in prop::collection::vec(-5.0..5.0f64, 4)) {
        let f = build_fiber(&DuallyFlatManifold::new(ConvexPotential::categorical(2)), &[0.2, 0.1]).unwrap();
        let a = f.symplectic_form_eval(&s, &t).unwrap();
        let b = f.symplectic_form_eval(&t, &s).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn family_gradient_matches_fd_of_values(t in -1.5..1.5f64, c in prop::collection::vec(-2.0..2.0f64, 3)) {
        let d = BoxDomain::unbounded(1);
        let poly = |terms: Vec<(f64, u32)>| SmoothFunction::polynomial(
            "p", d.clone(), terms.into_iter().map(|(coeff, e)| PolyTerm { coeff, exponents: vec![e] }).collect()
        ).unwrap();
        let fam = FamilyPotential::new("f", vec![
            ConvexPotential::bernoulli().function().clone(),
            poly(vec![(c[0], 3), (c[1], 1)]),
            poly(vec![(c[2], 4)]),
        ]).unwrap();
        let g = fam.family_gradient(&[t]).unwrap();
        for (k, coeff) in fam.coefficients().iter().enumerate() {
            let fd = coeff.fd_gradient(&[t]).unwrap()[0];
            prop_assert!((g[0].coeffs()[k] - fd).abs() <= 1e-6);
        }
    }

    #[test]
    fn order_zero_family_is_the_potential((i, theta) in builtin_point()) {
        let p = builtin(i);
        let fam = FamilyPotential::classical(&p, 0);
        prop_assert_eq!(fam.family_eval(&theta).unwrap().coeffs()[0], p.eval(&theta).unwrap());
        let g = fam.family_gradient(&theta).unwrap();
        let pg = p.gradient(&theta).unwrap();
        for (k, s) in g.iter().enumerate() {
            prop_assert_eq!(s.coeffs()[0], pg[k]);
        }
        let h = fam.family_hessian(&theta).unwrap();
        prop_assert_eq!(h.coeff(0), &p.hessian(&theta).unwrap());
    }

    #[test]
    fn qgt_is_hermitian(theta in prop::collection::vec(0.3..2.8f64, 2), phase in -3.0..3.0f64) {
        let states = move |p: &[f64]| Ok(vec![
            Complex64::new((p[0] / 2.0).cos(), 0.0),
            Complex64::from_polar((p[0] / 2.0).sin() * (p[1]).cos(), p[1] + phase),
            Complex64::from_polar((p[0] / 2.0).sin() * (p[1]).sin(), -p[0]),
        ]);
        let q = quantum_geometric_tensor(states, &BoxDomain::unbounded(2), &theta).unwrap();
        let herm = (&q - q.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(herm <= 1e-6);
        let re = q.map(|z| z.re);
        prop_assert!(linalg::min_eigenvalue(&linalg::symmetrize(&re)) >= -1e-8);
        let im = q.map(|z| z.im);
        prop_assert!(max_abs_diff(&im, &(-im.transpose())) <= 1e-8);
    }

    #[test]
    fn real_states_have_no_berry_curvature((i, theta, _b) in family_point()) {
        let fam = family(i);
        let n = fam.dim();
        let f = fam.clone();
        let q = quantum_geometric_tensor(
            move |p: &[f64]| Ok(f.sqrt_density_state(p)?.into_iter().map(|x| Complex64::new(x, 0.0)).collect()),
            &BoxDomain::unbounded(n), &theta,
        ).unwrap();
        prop_assert!(q.iter().all(|z| z.im.abs() <= 1e-8));
        let fisher = fam.fisher_metric(&theta).unwrap();
        prop_assert!(max_abs_diff(&q.map(|z| z.re), &(fisher / 4.0)) <= 1e-5);
    }
}

#[test]
fn biconjugation_through_the_dual_potential() {
    for i in 0..5 {
        let p = builtin(i);
        let m = DuallyFlatManifold::new(p.clone());
        let theta = p.domain().center();
        let eta: Vec<f64> = p.gradient(&theta).unwrap().iter().copied().collect();
        let dual = m.dual_potential().clone();
        let pair = legendre::to_dual(&dual, &eta).unwrap();
        assert!((pair.psi_star - p.eval(&theta).unwrap()).abs() <= 1e-8, "{}", p.name());
        let g_dual = dual.hessian(&eta).unwrap();
        let g_inv = p.hessian(&theta).unwrap().try_inverse().unwrap();
        assert!(max_abs_diff(&g_dual, &g_inv) <= 1e-6);
    }
}
