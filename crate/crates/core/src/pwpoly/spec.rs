//! JSON function specifications.
//!
//! ```json
//! {"kind":"builtin","name":"step","params":{}}
//! {"kind":"builtin","name":"indicator","params":{"lo":[0],"hi":[1]},"domain":{"lo":[-2],"hi":[2]}}
//! {"kind":"coeffs","path":"g.json"}
//! ```
//!
//! Builtins accept optional `dim`, `domain`, `mesh_level`, `degree`,
//! `quad_order` and `window` fields; coefficient specs accept `window`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dyadic::{Dyadic, DyadicBox, ScaleWindow};
use crate::error::{Error, Result};
use crate::harness;

use super::{ingest, Discretization, PPFunction, Piece, PieceFn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinName {
    Indicator,
    Haar,
    Poly,
    Step,
    Staircase,
    FnCounterexample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FunctionSpec {
    Builtin {
        name: BuiltinName,
        #[serde(default)]
        params: serde_json::Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<DyadicBox>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mesh_level: Option<i32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degree: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quad_order: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<ScaleWindow>,
    },
    Coeffs {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<ScaleWindow>,
    },
}

/// A materialized function plus the analysis window its spec suggests.
#[derive(Clone, Debug)]
pub struct LoadedFunction {
    pub f: PPFunction,
    pub window: Option<ScaleWindow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxParams {
    lo: Vec<f64>,
    hi: Vec<f64>,
    #[serde(default = "one")]
    value: f64,
    #[serde(default)]
    axis: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyParams {
    terms: Vec<PolyTerm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyTerm {
    beta: Vec<u32>,
    c: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepParams {
    #[serde(default)]
    axis: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DepthParams {
    m: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FnParams {
    n: u32,
}

fn one() -> f64 {
    1.0
}

fn params<T: for<'de> Deserialize<'de>>(v: &serde_json::Value) -> Result<T> {
    let v = if v.is_null() { serde_json::Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| Error::param("params", e.to_string()))
}

/// Smallest `[-2^e, 2^e]^N` (with `e >= 0`) containing `b`.
fn centered_hull(b: &DyadicBox) -> DyadicBox {
    let mut e = 0;
    while !DyadicBox::centered(b.dim(), e).contains_box(b) {
        e += 1;
    }
    DyadicBox::centered(b.dim(), e)
}

/// Mesh level needed to resolve the corners of `b` (at least 0).
fn resolving_level(b: &DyadicBox) -> i32 {
    (-b.alignment_level(0)).max(0)
}

impl FunctionSpec {
    pub fn read(path: &Path) -> Result<(Self, std::path::PathBuf)> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        let spec: FunctionSpec = serde_json::from_str(&s)?;
        Ok((spec, path.parent().map(Path::to_path_buf).unwrap_or_default()))
    }

    /// Materialize; relative coefficient paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<LoadedFunction> {
        match self {
            FunctionSpec::Coeffs { path, window } => {
                let p = base.join(path);
                Ok(LoadedFunction { f: PPFunction::read_coeffs(&p)?, window: window.clone() })
            }
            FunctionSpec::Builtin { name, params: raw, dim, domain, mesh_level, degree, quad_order, window } => {
                let build = |region: DyadicBox, pieces: Vec<Piece>, deg: usize| -> Result<PPFunction> {
                    let domain = domain.clone().unwrap_or_else(|| centered_hull(&region));
                    let m = mesh_level
                        .unwrap_or_else(|| pieces.iter().map(|p| resolving_level(&p.region)).fold(resolving_level(&region), i32::max));
                    let d = degree.unwrap_or(deg);
                    let mut disc = Discretization::new(domain, m, d);
                    if let Some(q) = quad_order {
                        disc.quad_order = *q;
                    }
                    ingest(&pieces, &disc)
                };
                let f = match name {
                    BuiltinName::Indicator | BuiltinName::Haar => {
                        let p: BoxParams = params(raw)?;
                        let region = DyadicBox::from_f64(&p.lo, &p.hi)?;
                        check_dim(*dim, region.dim())?;
                        let pieces = if *name == BuiltinName::Indicator {
                            vec![Piece { region: region.clone(), f: PieceFn::constant(p.value) }]
                        } else {
                            if p.axis >= region.dim() {
                                return Err(Error::param("params.axis", "out of range"));
                            }
                            let mid = region.center()[p.axis];
                            let mut left_hi = region.hi().to_vec();
                            left_hi[p.axis] = mid;
                            let mut right_lo = region.lo().to_vec();
                            right_lo[p.axis] = mid;
                            vec![
                                Piece {
                                    region: DyadicBox::new(region.lo().to_vec(), left_hi)?,
                                    f: PieceFn::constant(-p.value),
                                },
                                Piece {
                                    region: DyadicBox::new(right_lo, region.hi().to_vec())?,
                                    f: PieceFn::constant(p.value),
                                },
                            ]
                        };
                        build(region, pieces, 0)?
                    }
                    BuiltinName::Poly => {
                        let p: PolyParams = params(raw)?;
                        let n = dim.or(domain.as_ref().map(DyadicBox::dim)).unwrap_or(1);
                        let region = domain.clone().unwrap_or_else(|| DyadicBox::q0(n));
                        check_dim(Some(n), region.dim())?;
                        if p.terms.iter().any(|t| t.beta.len() != n) {
                            return Err(Error::param("params.terms.beta", format!("expected {n} exponents")));
                        }
                        let f = PieceFn::monomials(p.terms.into_iter().map(|t| (t.beta, t.c)).collect());
                        let deg = f.poly_degree().unwrap_or(0);
                        build(region.clone(), vec![Piece { region, f }], deg)?
                    }
                    BuiltinName::Step => {
                        let p: StepParams = params(raw)?;
                        let n = dim.or(domain.as_ref().map(DyadicBox::dim)).unwrap_or(1);
                        if p.axis >= n {
                            return Err(Error::param("params.axis", "out of range"));
                        }
                        let dom = domain.clone().unwrap_or_else(|| DyadicBox::centered(n, 3));
                        check_dim(Some(n), dom.dim())?;
                        let mut lo = dom.lo().to_vec();
                        lo[p.axis] = lo[p.axis].max(Dyadic::ZERO);
                        let region = DyadicBox::new(lo, dom.hi().to_vec())?;
                        let d = degree.unwrap_or(0);
                        let m = mesh_level.unwrap_or_else(|| resolving_level(&dom));
                        let mut disc = Discretization::new(dom.clone(), m, d);
                        if let Some(q) = quad_order {
                            disc.quad_order = *q;
                        }
                        let f = ingest(&[Piece { region, f: PieceFn::constant(1.0) }], &disc)?;
                        let window = window.clone().unwrap_or(step_window(&f)?);
                        return Ok(LoadedFunction { f, window: Some(window) });
                    }
                    BuiltinName::Staircase => {
                        let p: DepthParams = params(raw)?;
                        check_dim(*dim, 1)?;
                        harness::staircase_g(p.m)?
                    }
                    BuiltinName::FnCounterexample => {
                        let p: FnParams = params(raw)?;
                        check_dim(*dim, 1)?;
                        harness::fn_function(p.n)?
                    }
                };
                Ok(LoadedFunction { f, window: window.clone() })
            }
        }
    }
}

fn check_dim(requested: Option<usize>, actual: usize) -> Result<()> {
    match requested {
        Some(n) if n != actual => Err(Error::DimensionMismatch { expected: n, got: actual }),
        _ => Ok(()),
    }
}

/// Window for the step builtin: the central half of the domain, two levels
/// below the domain, so no cube reaches the artificial cutoff at its edge.
fn step_window(f: &PPFunction) -> Result<ScaleWindow> {
    let d = f.domain();
    let half = |v: &[Dyadic]| v.iter().map(|c| c.mul_pow2(-1)).collect::<Vec<_>>();
    let bbox = DyadicBox::new(half(d.lo()), half(d.hi()))?;
    ScaleWindow::new(-f.mesh_level() - 1, d.enclosing_level() - 2, bbox)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> LoadedFunction {
        serde_json::from_str::<FunctionSpec>(s).unwrap().load(Path::new(".")).unwrap()
    }

    #[test]
    fn builtins_materialize() {
        let f = load(r#"{"kind":"builtin","name":"indicator","params":{"lo":[0],"hi":[1]},"domain":{"lo":[-2],"hi":[2]}}"#).f;
        assert!((f.eval(&[0.5]) - 1.0).abs() < 1e-14);
        let h = load(r#"{"kind":"builtin","name":"haar","params":{"lo":[-1],"hi":[1]}}"#).f;
        assert!((h.eval(&[-0.5]) - -1.0).abs() < 1e-14);
        assert!((h.eval(&[0.5]) - 1.0).abs() < 1e-14);
        let s = load(r#"{"kind":"builtin","name":"step"}"#);
        assert!((s.f.eval(&[3.0]) - 1.0).abs() < 1e-14);
        assert!((s.f.eval(&[-3.0]) - 0.0).abs() < 1e-14);
        assert!(s.window.is_some());
        let p = load(r#"{"kind":"builtin","name":"poly","params":{"terms":[{"beta":[2],"c":1.0}]}}"#).f;
        assert!((p.eval(&[0.5]) - 0.25).abs() < 1e-15);
        let g = load(r#"{"kind":"builtin","name":"staircase","params":{"m":6}}"#).f;
        assert!((g.eval(&[0.8]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bad_params_name_the_field() {
        let spec: FunctionSpec =
            serde_json::from_str(r#"{"kind":"builtin","name":"staircase","params":{"depth":3}}"#).unwrap();
        let e = spec.load(Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("params") && e.contains("depth"), "{e}");
        let e = serde_json::from_str::<FunctionSpec>(r#"{"kind":"builtin","name":"wave"}"#).unwrap_err();
        assert!(e.to_string().contains("wave"));
    }
}
