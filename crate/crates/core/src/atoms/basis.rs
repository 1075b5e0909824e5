use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicBox, DyadicCube, Index, SpecialCube};
use crate::error::{Error, Result};
use crate::legendre::TensorMap;
use crate::pwpoly::{AlphaContext, PPFunction};

/// Cap on `2^N * C(N + d, N)`, the ambient dimension of the construction.
pub const MAX_AMBIENT: usize = 4096;

const ACCEPT_NORM: f64 = 1e-8;

/// Orthonormal functions `p^1 .. p^M` on `Q0 = [-1, 1]^N`, polynomial of
/// total degree `<= [alpha]` on each dyadic subcube, with vanishing moments
/// up to order `[alpha]`.
///
/// Coordinates are blocks of Legendre coefficients, one block per subcube
/// of `Q0` in subcube order.
#[derive(Clone, Debug)]
pub struct SpecialBasis {
    ctx: AlphaContext,
    vectors: Vec<Vec<f64>>,
    functions: Vec<PPFunction>,
}

impl PartialEq for SpecialBasis {
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx && self.vectors == other.vectors
    }
}

/// `(2^N - 1) * C(N + d, N)`.
pub fn expected_count(ctx: &AlphaContext) -> usize {
    ((1usize << ctx.dim()) - 1) * ctx.d_poly()
}

fn subcubes(dim: usize) -> Vec<DyadicCube> {
    SpecialCube::q0(dim).dyadic_subcubes()
}

impl SpecialBasis {
    pub fn build(ctx: &AlphaContext) -> Result<Self> {
        let dim = ctx.dim();
        if dim >= usize::BITS as usize - 1 {
            return Err(Error::ResourceLimit(format!("dimension {dim}")));
        }
        let dp = ctx.d_poly();
        let ambient = (1usize << dim).checked_mul(dp).unwrap_or(usize::MAX);
        if ambient > MAX_AMBIENT {
            return Err(Error::ResourceLimit(format!("ambient dimension {ambient} exceeds {MAX_AMBIENT}")));
        }
        let rows = constraint_rows(ctx);
        let target = expected_count(ctx);
        let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(target);
        for j in 0..ambient {
            if accepted.len() == target {
                break;
            }
            let mut v = vec![0.0; ambient];
            v[j] = 1.0;
            for _ in 0..2 {
                for r in rows.iter().chain(&accepted) {
                    let t = dot(r, &v);
                    v.iter_mut().zip(r).for_each(|(a, b)| *a -= t * b);
                }
            }
            let nv = dot(&v, &v).sqrt();
            if nv > ACCEPT_NORM {
                v.iter_mut().for_each(|a| *a /= nv);
                accepted.push(v);
            }
        }
        if accepted.len() != target {
            return Err(Error::ResourceLimit(format!(
                "null space has dimension {} instead of {target}",
                accepted.len()
            )));
        }
        for v in &mut accepted {
            fix_sign(v);
        }
        Self::from_vectors(*ctx, accepted)
    }

    fn from_vectors(ctx: AlphaContext, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dp = ctx.d_poly();
        let subs = subcubes(ctx.dim());
        let functions = vectors
            .iter()
            .map(|v| {
                let cells = subs.iter().enumerate().map(|(i, c)| (c.clone(), v[i * dp..(i + 1) * dp].to_vec())).collect();
                PPFunction::from_cells(DyadicBox::q0(ctx.dim()), 0, ctx.degree(), cells)
            })
            .collect::<Result<_>>()?;
        Ok(SpecialBasis { ctx, vectors, functions })
    }

    pub fn ctx(&self) -> &AlphaContext {
        &self.ctx
    }

    /// `M`.
    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    /// Coordinates of `p^L`, `L` counted from 1.
    pub fn vector(&self, l: usize) -> &[f64] {
        &self.vectors[l - 1]
    }

    /// `p^L` on `Q0`, `L` counted from 1.
    pub fn function(&self, l: usize) -> &PPFunction {
        &self.functions[l - 1]
    }

    pub fn functions(&self) -> &[PPFunction] {
        &self.functions
    }

    pub fn to_file(&self) -> BasisFile {
        let dp = self.ctx.d_poly();
        let subs = subcubes(self.ctx.dim());
        BasisFile {
            ctx: self.ctx,
            m: self.count(),
            atoms: self
                .vectors
                .iter()
                .enumerate()
                .map(|(l, v)| BasisAtom {
                    l: l + 1,
                    subcubes: subs
                        .iter()
                        .enumerate()
                        .map(|(i, c)| BasisPiece { n: c.level, k: c.index.to_vec(), c: v[i * dp..(i + 1) * dp].to_vec() })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(f: BasisFile) -> Result<Self> {
        let expected = expected_count(&f.ctx);
        if f.m != expected || f.atoms.len() != expected {
            return Err(Error::param("M", format!("expected {expected}, file has M={} with {} atoms", f.m, f.atoms.len())));
        }
        let dp = f.ctx.d_poly();
        let subs = subcubes(f.ctx.dim());
        let mut vectors = Vec::with_capacity(expected);
        for (l, a) in f.atoms.into_iter().enumerate() {
            if a.l != l + 1 {
                return Err(Error::param("atoms.L", format!("expected {}, got {}", l + 1, a.l)));
            }
            if a.subcubes.len() != subs.len() {
                return Err(Error::param("atoms.subcubes", format!("expected {} entries", subs.len())));
            }
            let mut v = Vec::with_capacity(subs.len() * dp);
            for (piece, cube) in a.subcubes.into_iter().zip(&subs) {
                if DyadicCube::new(piece.n, Index::from_vec(piece.k)) != *cube {
                    return Err(Error::param("atoms.subcubes", "subcube order differs from Q0's"));
                }
                if piece.c.len() != dp {
                    return Err(Error::CoefficientCount { expected: dp, got: piece.c.len() });
                }
                v.extend(piece.c);
            }
            vectors.push(v);
        }
        Self::from_vectors(f.ctx, vectors)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, s).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_file(serde_json::from_str(&s)?)
    }
}

/// Row `gamma`: the coordinates of the Legendre function `phi^{Q0}_gamma`
/// restricted to each subcube. These rows are orthonormal, and a vector is
/// orthogonal to all of them exactly when its moments up to `[alpha]` vanish.
pub fn constraint_rows(ctx: &AlphaContext) -> Vec<Vec<f64>> {
    let set = ctx.moment_set();
    let dp = set.len();
    let q0 = DyadicBox::q0(ctx.dim());
    let maps: Vec<TensorMap> = subcubes(ctx.dim()).iter().map(|c| TensorMap::new(&q0, &c.corners(), ctx.degree())).collect();
    (0..dp)
        .map(|g| {
            let mut e = vec![0.0; dp];
            e[g] = 1.0;
            maps.iter().flat_map(|t| t.forward(&set, &e, &set)).collect()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest-magnitude coordinate positive; near-ties go to the first.
fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let lead = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-12)).unwrap_or(0);
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisFile {
    pub ctx: AlphaContext,
    #[serde(rename = "M")]
    pub m: usize,
    pub atoms: Vec<BasisAtom>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisAtom {
    #[serde(rename = "L")]
    pub l: usize,
    pub subcubes: Vec<BasisPiece>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisPiece {
    pub n: i32,
    pub k: Vec<i64>,
    pub c: Vec<f64>,
}
