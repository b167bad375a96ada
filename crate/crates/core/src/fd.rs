//! Central finite-difference stencils.
//!
//! Step sizes scale as `eps^(1/(d+2))·max(1, |x_i|)` for a derivative of order
//! `d` taken directly from the sampled function; every stencil point must lie
//! strictly inside the domain.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Tensor3;
use crate::potential::BoxDomain;

/// `eps^(1/3)`: first derivatives from values, second from gradients.
pub fn first_order_root() -> f64 {
    f64::EPSILON.cbrt()
}

/// `eps^(1/4)`: second derivatives from values.
pub fn second_order_root() -> f64 {
    f64::EPSILON.powf(0.25)
}

/// `eps^(1/5)`: third derivatives, and the extrapolated directional stencil.
pub fn third_order_root() -> f64 {
    f64::EPSILON.powf(0.2)
}

pub fn scaled_step(root: f64, x: f64) -> f64 {
    root * x.abs().max(1.0)
}

fn shifted(p: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[i] += h;
    q
}

fn in_domain(domain: &BoxDomain, q: &[f64], origin: &[f64]) -> Result<()> {
    if domain.contains(q) {
        Ok(())
    } else {
        Err(Error::Stencil {
            point: origin.to_vec(),
        })
    }
}

fn sample<F>(f: &F, domain: &BoxDomain, q: &[f64], origin: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    in_domain(domain, q, origin)?;
    f(q)
}

/// Central-difference gradient of a scalar function.
pub fn gradient_from_values<F>(f: &F, domain: &BoxDomain, p: &[f64]) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let root = first_order_root();
    let mut g = DVector::zeros(p.len());
    for i in 0..p.len() {
        let h = scaled_step(root, p[i]);
        let fp = sample(f, domain, &shifted(p, i, h), p)?;
        let fm = sample(f, domain, &shifted(p, i, -h), p)?;
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Second-difference Hessian of a scalar function with explicit per-coordinate steps.
pub fn hessian_from_values_with_steps<F>(
    f: &F,
    domain: &BoxDomain,
    p: &[f64],
    steps: &[f64],
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let n = p.len();
    let f0 = sample(f, domain, p, p)?;
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let hi = steps[i];
        let fp = sample(f, domain, &shifted(p, i, hi), p)?;
        let fm = sample(f, domain, &shifted(p, i, -hi), p)?;
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in (i + 1)..n {
            let hj = steps[j];
            let corner = |si: f64, sj: f64| {
                let mut q = p.to_vec();
                q[i] += si * hi;
                q[j] += sj * hj;
                sample(f, domain, &q, p)
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                + corner(-1.0, -1.0)?)
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// Second-difference Hessian with the default `eps^(1/4)` steps.
pub fn hessian_from_values<F>(f: &F, domain: &BoxDomain, p: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let root = second_order_root();
    let steps: Vec<f64> = p.iter().map(|&x| scaled_step(root, x)).collect();
    hessian_from_values_with_steps(f, domain, p, &steps)
}

/// Jacobian of a vector field; column `k` holds `∂g/∂x_k`.
pub fn jacobian<G>(g: &G, domain: &BoxDomain, p: &[f64], root: f64) -> Result<DMatrix<f64>>
where
    G: Fn(&[f64]) -> Result<DVector<f64>> + ?Sized,
{
    let n = p.len();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let h = scaled_step(root, p[k]);
        let (qp, qm) = (shifted(p, k, h), shifted(p, k, -h));
        in_domain(domain, &qp, p)?;
        in_domain(domain, &qm, p)?;
        cols.push((g(&qp)? - g(&qm)?) / (2.0 * h));
    }
    let m = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(m, n, |i, k| cols[k][i]))
}

/// `T_ijk = ∂_k H_ij` by central differences of a Hessian evaluator,
/// Richardson-extrapolated over steps `h` and `h/2`.
pub fn third_from_hessian<H>(hess: &H, domain: &BoxDomain, p: &[f64]) -> Result<Tensor3>
where
    H: Fn(&[f64]) -> Result<DMatrix<f64>> + ?Sized,
{
    let n = p.len();
    let root = third_order_root();
    let mut t = Tensor3::zeros(n);
    for k in 0..n {
        let central = |h: f64| -> Result<DMatrix<f64>> {
            let (qp, qm) = (shifted(p, k, h), shifted(p, k, -h));
            in_domain(domain, &qp, p)?;
            in_domain(domain, &qm, p)?;
            Ok((hess(&qp)? - hess(&qm)?) / (2.0 * h))
        };
        let h = scaled_step(root, p[k]);
        let coarse = central(h)?;
        let d = (central(h / 2.0)? * 4.0 - coarse) / 3.0;
        for i in 0..n {
            for j in 0..n {
                t.set(i, j, k, d[(i, j)]);
            }
        }
    }
    Ok(t.symmetrized())
}

/// `T_ijk = ∂_j ∂_k g_i` by second differences of a gradient evaluator.
pub fn third_from_gradient<G>(grad: &G, domain: &BoxDomain, p: &[f64]) -> Result<Tensor3>
where
    G: Fn(&[f64]) -> Result<DVector<f64>> + ?Sized,
{
    let n = p.len();
    let root = second_order_root();
    let steps: Vec<f64> = p.iter().map(|&x| scaled_step(root, x)).collect();
    let mut t = Tensor3::zeros(n);
    for i in 0..n {
        let component = |q: &[f64]| grad(q).map(|g| g[i]);
        let h = hessian_from_values_with_steps(&component, domain, p, &steps)?;
        for j in 0..n {
            for k in 0..n {
                t.set(i, j, k, h[(j, k)]);
            }
        }
    }
    Ok(t.symmetrized())
}

/// Third derivatives from values alone: central difference of the
/// second-difference Hessian, all with step `eps^(1/5)`.
pub fn third_from_values<F>(f: &F, domain: &BoxDomain, p: &[f64]) -> Result<Tensor3>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let n = p.len();
    let root = third_order_root();
    let steps: Vec<f64> = p.iter().map(|&x| scaled_step(root, x)).collect();
    let mut t = Tensor3::zeros(n);
    for k in 0..n {
        let h = steps[k];
        let hp = hessian_from_values_with_steps(f, domain, &shifted(p, k, h), &steps)
            .map_err(|_| Error::Stencil { point: p.to_vec() })?;
        let hm = hessian_from_values_with_steps(f, domain, &shifted(p, k, -h), &steps)
            .map_err(|_| Error::Stencil { point: p.to_vec() })?;
        for i in 0..n {
            for j in 0..n {
                t.set(i, j, k, (hp[(i, j)] - hm[(i, j)]) / (2.0 * h));
            }
        }
    }
    Ok(t.symmetrized())
}

/// Derivative of `s ↦ f(p + s·dir)` at `s = 0`: the fourth-order five-point
/// stencil, Richardson-extrapolated over steps `h` and `h/2`.
///
/// The step is chosen so the largest coordinate displacement equals
/// `eps^(1/5)·max(1, |p_i|)` over the coordinates `dir` moves.
pub fn directional_derivative<F>(f: &F, domain: &BoxDomain, p: &[f64], dir: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + ?Sized,
{
    let dir_norm = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if dir_norm == 0.0 {
        return Ok(0.0);
    }
    let p_norm = p
        .iter()
        .zip(dir)
        .filter(|(_, d)| **d != 0.0)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    let h = scaled_step(third_order_root(), p_norm) / dir_norm;
    let at = |s: f64| {
        let q: Vec<f64> = p.iter().zip(dir).map(|(x, d)| x + s * d).collect();
        sample(f, domain, &q, p)
    };
    let stencil = |h: f64| -> Result<f64> { Ok((-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h)) };
    let coarse = stencil(h)?;
    Ok((16.0 * stencil(h / 2.0)? - coarse) / 15.0)
}
