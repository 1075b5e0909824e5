use std::path::Path;

use dyadic_lambda::atoms::{BasisFile, SpecialBasis};
use dyadic_lambda::dyadic::{Dyadic, DyadicBox, ScaleWindow};
use dyadic_lambda::pwpoly::{CoeffFile, FunctionSpec, PPFunction};
use dyadic_lambda::{Error, Result};
use serde::Deserialize;
use serde_json::Value;

pub struct Loaded {
    pub f: PPFunction,
    pub window: Option<ScaleWindow>,
}

fn read_json(path: &Path) -> Result<Value> {
    let s = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let mut v: Value = serde_json::from_str(&s)?;
    // reports written by this tool carry provenance; it is not part of the data
    if let Value::Object(o) = &mut v {
        o.remove("provenance");
    }
    Ok(v)
}

fn from_value(v: Value, base: &Path) -> Result<Loaded> {
    if v.get("kind").is_some() {
        let spec: FunctionSpec = serde_json::from_value(v)?;
        let l = spec.load(base)?;
        Ok(Loaded { f: l.f, window: l.window })
    } else {
        let c: CoeffFile = serde_json::from_value(v)?;
        Ok(Loaded { f: PPFunction::from_coeff_file(c)?, window: None })
    }
}

/// A function spec (object with `kind`) or a coefficient file.
pub fn load_function(path: &Path) -> Result<Loaded> {
    let v = read_json(path)?;
    from_value(v, path.parent().unwrap_or(Path::new("")))
}

pub fn load_basis(path: &Path) -> Result<SpecialBasis> {
    let f: BasisFile = serde_json::from_value(read_json(path)?)?;
    SpecialBasis::from_file(f)
}

/// Comma-separated coordinates, each a decimal or `a/b` with `b` a power of 2.
fn parse_point(s: &str, field: &str) -> Result<Vec<Dyadic>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let x = match t.split_once('/') {
                Some((a, b)) => {
                    let a: f64 = a.trim().parse().map_err(|_| Error::param(field, format!("`{t}` is not a number")))?;
                    let b: f64 = b.trim().parse().map_err(|_| Error::param(field, format!("`{t}` is not a number")))?;
                    a / b
                }
                None => t.parse().map_err(|_| Error::param(field, format!("`{t}` is not a number")))?,
            };
            Dyadic::from_f64(x).ok_or_else(|| Error::param(field, format!("`{t}` is not a dyadic rational")))
        })
        .collect()
}

pub fn parse_box(lo: &str, hi: &str, field: &str) -> Result<DyadicBox> {
    DyadicBox::new(parse_point(lo, field)?, parse_point(hi, field)?)
}

pub struct Term {
    pub coeff: f64,
    pub f: PPFunction,
    pub cube: DyadicBox,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TermsFile {
    terms: Vec<RawTerm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    coeff: f64,
    #[serde(rename = "fn")]
    f: Value,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

pub fn read_terms(path: &Path) -> Result<Vec<Term>> {
    let file: TermsFile = serde_json::from_value(read_json(path)?)?;
    let base = path.parent().unwrap_or(Path::new(""));
    file.terms
        .into_iter()
        .map(|t| {
            let f = match t.f {
                Value::String(p) => load_function(&base.join(p))?.f,
                v => from_value(v, base)?.f,
            };
            Ok(Term { coeff: t.coeff, f, cube: DyadicBox::from_f64(&t.lo, &t.hi)? })
        })
        .collect()
}
