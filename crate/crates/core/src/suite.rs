//! Verification suites run by `lbundle verify`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::{build_fiber, roundtrip_equivalence};
use crate::connections::DuallyFlatManifold;
use crate::error::Result;
use crate::exp_family::ExponentialFamily;
use crate::formal_series::FamilyPotential;
use crate::hessian_qft::{build_qft, verify_family_para_kahler, HessianQFT};
use crate::legendre;
use crate::linalg::max_abs_diff;
use crate::potential::{BoxDomain, ConvexPotential, PD_EPSILON};
use crate::report::{Check, Report, Status};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 20;

/// Thresholds for the numerical checks; algebraic checks are exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub fenchel_young: f64,
    pub roundtrip: f64,
    pub duality: f64,
    pub flatness: f64,
    pub fisher: f64,
    pub mean: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fenchel_young: 1e-9,
            roundtrip: 1e-8,
            duality: 1e-6,
            flatness: 1e-5,
            fisher: 1e-5,
            mean: 1e-7,
        }
    }
}

/// `count` interior points drawn from a ChaCha stream seeded with `seed`.
pub fn sample_points(domain: &BoxDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| domain.sample_interior(&mut rng)).collect()
}

/// Merges per-point reports check by check, keeping the worst outcome and,
/// for a failure, the value at the first failing point.
fn merge_worst(prefix: &str, reports: Vec<Report>, into: &mut Report) {
    let mut merged: Vec<Check> = Vec::new();
    for r in reports {
        for c in r.checks {
            match merged.iter_mut().find(|m| m.name == c.name) {
                None => merged.push(c),
                Some(m) => {
                    let rank = |s: Status| match s {
                        Status::Pass => 0,
                        Status::Flagged => 1,
                        Status::Fail => 2,
                    };
                    if rank(c.status) > rank(m.status) {
                        *m = c;
                    }
                }
            }
        }
    }
    for mut c in merged {
        c.name = format!("{prefix}{}", c.name);
        into.checks.push(c);
    }
}

fn worst<I: IntoIterator<Item = Result<f64>>>(values: I) -> Result<f64> {
    values.into_iter().try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
}

/// Convexity, Legendre duality, connections and bundle checks on samples.
pub fn verify_potential(p: &ConvexPotential, samples: &[Vec<f64>], tol: &Tolerances) -> Result<Report> {
    let m = DuallyFlatManifold::new(p.clone());
    let mut r = Report::new(p.name());

    let conv = p.check_strict_convexity(samples)?;
    r.above("strict_convexity", conv.min_eigenvalue(), PD_EPSILON);
    if !conv.passed() {
        return Ok(r);
    }

    let pairs = samples.iter().map(|t| legendre::to_dual(p, t)).collect::<Result<Vec<_>>>()?;
    r.at_most("fenchel_young", worst(pairs.iter().map(|d| Ok(d.residual)))?, tol.fenchel_young);
    let start = p.default_start();
    let roundtrip = worst(pairs.iter().map(|d| {
        let back = legendre::from_dual(p, &d.eta, &start)?;
        Ok(back.iter().zip(&d.theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }))?;
    r.at_most("legendre_roundtrip", roundtrip, tol.roundtrip);

    r.at_most("duality_condition", worst(samples.iter().map(|t| m.max_basis_duality_defect(t)))?, tol.duality);
    r.at_most(
        "dual_flatness",
        worst(pairs.iter().map(|d| m.dual_flatness_defect(&d.eta)))?,
        tol.flatness,
    );

    let fibers = samples
        .iter()
        .map(|t| Ok(build_fiber(&m, t)?.verify_para_kahler()))
        .collect::<Result<Vec<_>>>()?;
    merge_worst("para_kahler.", fibers, &mut r);
    let eq = samples
        .iter()
        .map(|t| roundtrip_equivalence(&m, t, tol.duality))
        .collect::<Result<Vec<_>>>()?;
    merge_worst("equivalence.", eq, &mut r);
    Ok(r)
}

/// Potential suite on the log-partition function plus the Fisher–Rao and
/// mean-parameter consistency checks.
pub fn verify_exponential_family(fam: &ExponentialFamily, samples: &[Vec<f64>], tol: &Tolerances) -> Result<Report> {
    let p = fam.as_potential();
    let mut r = verify_potential(&p, samples, tol)?;
    let f = p.function();
    r.at_most(
        "fisher_equals_hessian",
        worst(samples.iter().map(|t| Ok(max_abs_diff(&fam.fisher_metric(t)?, &f.fd_hessian(t)?))))?,
        tol.fisher,
    );
    r.at_most(
        "mean_equals_gradient",
        worst(samples.iter().map(|t| Ok((fam.mean_parameters(t)? - f.fd_gradient(t)?).amax())))?,
        tol.mean,
    );
    Ok(r)
}

/// Formal convexity on `grid`, then the per-point family checks.
pub fn verify_family(name: &str, fam: &FamilyPotential, grid: &[Vec<f64>]) -> Result<Report> {
    let mut r = Report::new(name);
    let conv = fam.formal_convexity_check(grid)?;
    r.above("formal_convexity", conv.min_eigenvalue(), PD_EPSILON);
    if let Some(bad) = conv.first_failure() {
        r.note(format!("order-0 Hessian degenerate at {:?}", bad.point));
        return Ok(r);
    }
    let q = build_qft(name, fam.domain().clone(), fam.clone(), grid.to_vec())?;
    verify_qft_points(&q, grid, &mut r)?;
    Ok(r)
}

pub fn verify_qft(q: &HessianQFT) -> Result<Report> {
    let mut r = Report::new(q.name());
    let conv = q.free_energy().formal_convexity_check(q.validation_grid())?;
    r.above("formal_convexity", conv.min_eigenvalue(), PD_EPSILON);
    verify_qft_points(q, q.validation_grid(), &mut r)?;
    Ok(r)
}

fn verify_qft_points(q: &HessianQFT, points: &[Vec<f64>], r: &mut Report) -> Result<()> {
    let per_point = points
        .iter()
        .map(|t| {
            let mut rep = verify_family_para_kahler(q, t)?;
            rep.checks.retain(|c| c.name != "formal_convexity");
            Ok(rep)
        })
        .collect::<Result<Vec<_>>>()?;
    merge_worst("", per_point, r);
    Ok(())
}
