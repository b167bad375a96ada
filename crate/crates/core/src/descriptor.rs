//! JSON descriptors for potentials, families and Hessian field theories.
//!
//! Bounds may be numbers, `null` or the strings `"inf"` / `"-inf"`; a missing
//! or `null` bound is unbounded on that side.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exp_family::FamilyDescriptor;
use crate::formal_series::{FamilyPotential, DEFAULT_ORDER};
use crate::hessian_qft::{build_qft, HessianQFT};
use crate::potential::{BoxDomain, ConvexPotential, PolyTerm, SmoothFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Builtin,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialDescriptor {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub lower: Option<Vec<Value>>,
    #[serde(default)]
    pub upper: Option<Vec<Value>>,
    pub kind: PotentialKind,
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub poly_terms: Option<Vec<PolyTerm>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDescriptor {
    #[serde(default)]
    pub lower: Option<Vec<Value>>,
    #[serde(default)]
    pub upper: Option<Vec<Value>>,
}

/// `{ "name", "dim", "order", "coefficients": [potential descriptor per order] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyPotentialDescriptor {
    pub name: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub order: Option<usize>,
    pub coefficients: Vec<PotentialDescriptor>,
}

/// `{ "name", "domain", "free_energy", "validation_grid" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QftDescriptor {
    pub name: String,
    #[serde(default)]
    pub domain: Option<DomainDescriptor>,
    pub free_energy: FamilyPotentialDescriptor,
    pub validation_grid: Vec<Vec<f64>>,
}

fn bound(v: &Value, side: f64) -> Result<f64> {
    match v {
        Value::Null => Ok(side * f64::INFINITY),
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Descriptor(format!("bad bound {n}"))),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => Err(Error::Descriptor(format!("bad bound {other:?}"))),
        },
        other => Err(Error::Descriptor(format!("bad bound {other}"))),
    }
}

fn bounds(values: &Option<Vec<Value>>, dim: usize, side: f64) -> Result<Vec<f64>> {
    match values {
        None => Ok(vec![side * f64::INFINITY; dim]),
        Some(vs) if vs.len() != dim => Err(Error::Dimension { expected: dim, got: vs.len() }),
        Some(vs) => vs.iter().map(|v| bound(v, side)).collect(),
    }
}

fn domain_from(lower: &Option<Vec<Value>>, upper: &Option<Vec<Value>>, dim: usize) -> Result<BoxDomain> {
    BoxDomain::new(bounds(lower, dim, -1.0)?, bounds(upper, dim, 1.0)?)
}

impl DomainDescriptor {
    pub fn build(&self, dim: usize) -> Result<BoxDomain> {
        domain_from(&self.lower, &self.upper, dim)
    }
}

fn builtin(name: &str, dim: Option<usize>) -> Result<ConvexPotential> {
    let fixed = |p: ConvexPotential, n: usize| match dim {
        Some(d) if d != n => Err(Error::Dimension { expected: n, got: d }),
        _ => Ok(p),
    };
    match name {
        "bernoulli" => fixed(ConvexPotential::bernoulli(), 1),
        "poisson" => fixed(ConvexPotential::poisson(), 1),
        "gaussian_natural" | "gaussian" => fixed(ConvexPotential::gaussian_natural(), 2),
        "categorical" => Ok(ConvexPotential::categorical(dim.unwrap_or(1))),
        "quadratic" => Ok(ConvexPotential::quadratic(dim.unwrap_or(1))),
        other => Err(Error::Descriptor(format!("unknown builtin {other:?}"))),
    }
}

impl PotentialDescriptor {
    fn has_bounds(&self) -> bool {
        self.lower.is_some() || self.upper.is_some()
    }

    /// The described function, without any convexity claim.
    pub fn build_function(&self) -> Result<SmoothFunction> {
        match self.kind {
            PotentialKind::Builtin => {
                let name = self
                    .builtin
                    .as_deref()
                    .ok_or_else(|| Error::Descriptor("builtin potential without \"builtin\" name".into()))?;
                let p = builtin(name, self.dim)?;
                let mut f = p.function().clone();
                if self.has_bounds() {
                    f = f.restricted(domain_from(&self.lower, &self.upper, f.dim())?)?;
                }
                Ok(f)
            }
            PotentialKind::Polynomial => {
                let terms = self.poly_terms.clone().unwrap_or_default();
                let dim = self
                    .dim
                    .or_else(|| terms.first().map(|t| t.exponents.len()))
                    .ok_or_else(|| Error::Descriptor("polynomial needs \"dim\" or at least one term".into()))?;
                let domain = domain_from(&self.lower, &self.upper, dim)?;
                let name = self.name.clone().unwrap_or_else(|| "polynomial".into());
                SmoothFunction::polynomial(name, domain, terms)
            }
        }
    }

    pub fn build(&self) -> Result<ConvexPotential> {
        let f = self.build_function()?;
        match self.kind {
            // builtins keep their own names and Newton starts
            PotentialKind::Builtin => {
                let mut p = builtin(self.builtin.as_deref().unwrap_or_default(), self.dim)?;
                if self.has_bounds() {
                    p = p.restricted(f.domain().clone())?;
                }
                Ok(match &self.name {
                    Some(name) => p.renamed(name.clone()),
                    None => p,
                })
            }
            PotentialKind::Polynomial => Ok(ConvexPotential::new(f)),
        }
    }
}

impl FamilyPotentialDescriptor {
    /// Builds the family; coefficients above the leading one are restricted
    /// to its domain and missing orders are filled with zeros.
    pub fn build(&self) -> Result<FamilyPotential> {
        self.build_on(None)
    }

    fn build_on(&self, domain: Option<&BoxDomain>) -> Result<FamilyPotential> {
        let (first, rest) = self
            .coefficients
            .split_first()
            .ok_or_else(|| Error::Descriptor("family has no coefficients".into()))?;
        let order = self.order.unwrap_or(if self.coefficients.len() > 1 {
            self.coefficients.len() - 1
        } else {
            DEFAULT_ORDER
        });
        if self.coefficients.len() > order + 1 {
            return Err(Error::Descriptor(format!(
                "{} coefficients given for order {order}",
                self.coefficients.len()
            )));
        }
        let mut leading = first.build_function()?;
        if let Some(d) = domain {
            leading = leading.restricted(d.clone())?;
        }
        if let Some(dim) = self.dim {
            if dim != leading.dim() {
                return Err(Error::Dimension { expected: dim, got: leading.dim() });
            }
        }
        let domain = leading.domain().clone();
        let mut coefficients = vec![leading];
        for c in rest {
            coefficients.push(c.build_function()?.restricted(domain.clone())?);
        }
        while coefficients.len() < order + 1 {
            coefficients.push(SmoothFunction::zero(domain.clone()));
        }
        FamilyPotential::new(self.name.clone(), coefficients)
    }
}

impl QftDescriptor {
    pub fn build(&self) -> Result<HessianQFT> {
        let fe = match &self.domain {
            Some(d) => {
                let dim = self.free_energy.build()?.dim();
                self.free_energy.build_on(Some(&d.build(dim)?))?
            }
            None => self.free_energy.build()?,
        };
        build_qft(self.name.clone(), fe.domain().clone(), fe, self.validation_grid.clone())
    }
}

/// Any of the accepted top-level descriptors.
#[derive(Debug, Clone)]
pub enum Descriptor {
    Potential(PotentialDescriptor),
    ExponentialFamily(FamilyDescriptor),
    Family(FamilyPotentialDescriptor),
    Qft(QftDescriptor),
}

impl Descriptor {
    /// Dispatches on the distinguishing key of each schema.
    pub fn from_value(v: &Value) -> std::result::Result<Self, serde_json::Error> {
        let has = |k: &str| v.get(k).is_some();
        Ok(if has("free_energy") {
            Descriptor::Qft(serde_json::from_value(v.clone())?)
        } else if has("coefficients") {
            Descriptor::Family(serde_json::from_value(v.clone())?)
        } else if has("statistic") {
            Descriptor::ExponentialFamily(serde_json::from_value(v.clone())?)
        } else {
            Descriptor::Potential(serde_json::from_value(v.clone())?)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn potential(json: &str) -> Result<ConvexPotential> {
        serde_json::from_str::<PotentialDescriptor>(json).unwrap().build()
    }

    #[test]
    fn builtins_and_bounds() {
        let p = potential(r#"{"kind":"builtin","builtin":"bernoulli"}"#).unwrap();
        assert_eq!(p.name(), "bernoulli");
        assert!(p.domain().contains(&[100.0]));

        let p = potential(r#"{"kind":"builtin","builtin":"bernoulli","lower":[-1],"upper":[1]}"#).unwrap();
        assert!(matches!(p.eval(&[2.0]), Err(Error::Domain { .. })));

        let g = potential(r#"{"kind":"builtin","builtin":"gaussian_natural","lower":["-inf",null],"upper":["inf",-0.01]}"#).unwrap();
        assert_eq!(g.domain().upper(), &[f64::INFINITY, -0.01]);

        let c = potential(r#"{"kind":"builtin","builtin":"categorical","dim":3}"#).unwrap();
        assert_eq!(c.dim(), 3);

        assert!(potential(r#"{"kind":"builtin","builtin":"bernoulli","dim":2}"#).is_err());
        assert!(potential(r#"{"kind":"builtin","builtin":"nope"}"#).is_err());
        assert!(potential(r#"{"kind":"builtin","builtin":"gaussian_natural","lower":[0,0],"upper":[1,1]}"#).is_err());
    }

    #[test]
    fn polynomial_descriptor() {
        let p = potential(r#"{"name":"q","dim":2,"kind":"polynomial","poly_terms":[{"coeff":0.5,"exponents":[2,0]},{"coeff":1.5,"exponents":[1,1]}]}"#).unwrap();
        assert_eq!(p.eval(&[2.0, 3.0]).unwrap(), 2.0 + 9.0);
    }

    #[test]
    fn family_and_qft_descriptors() {
        let fam: FamilyPotentialDescriptor = serde_json::from_str(
            r#"{"name":"f","dim":1,"order":3,"coefficients":[
                {"kind":"polynomial","dim":1,"poly_terms":[{"coeff":0.5,"exponents":[2]}]},
                {"kind":"polynomial","dim":1,"poly_terms":[{"coeff":0.08333333333333333,"exponents":[4]}]}]}"#,
        )
        .unwrap();
        let f = fam.build().unwrap();
        assert_eq!(f.order(), 3);
        assert_eq!(f.family_eval(&[1.0]).unwrap().coeffs(), &[0.5, 1.0 / 12.0, 0.0, 0.0]);

        let q: QftDescriptor = serde_json::from_value(serde_json::json!({
            "name": "q", "domain": {"lower": [-2], "upper": [2]},
            "free_energy": fam, "validation_grid": [[-1.0], [0.0], [1.0]]
        }))
        .unwrap();
        let q = q.build().unwrap();
        assert_eq!(q.coupling_space().upper(), &[2.0]);
        assert_eq!(q.order(), 3);
    }

    #[test]
    fn dispatch() {
        let v = serde_json::json!({"kind": "builtin", "builtin": "poisson"});
        assert!(matches!(Descriptor::from_value(&v).unwrap(), Descriptor::Potential(_)));
        let v = serde_json::json!({"name": "x", "coefficients": []});
        assert!(matches!(Descriptor::from_value(&v).unwrap(), Descriptor::Family(_)));
        let v = serde_json::json!({"name": "x"});
        assert!(Descriptor::from_value(&v).is_err());
    }
}
