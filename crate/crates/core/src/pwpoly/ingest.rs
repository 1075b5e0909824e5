use std::fmt;
use std::sync::Arc;

use crate::dyadic::{DyadicBox, DyadicCube, MAX_ENUMERATION};
use crate::error::{Error, Result};
use crate::legendre::{orthonormal_values, MultiIndex, MultiIndexSet};
use crate::quadrature::gauss_legendre;

use super::{for_each_tensor_point, PPFunction};

/// The function on one piece of an explicit piecewise definition.
#[derive(Clone)]
pub enum PieceFn {
    /// `sum c * x^beta` in absolute coordinates.
    Poly(Vec<(MultiIndex, f64)>),
    Analytic(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for PieceFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PieceFn::Poly(t) => f.debug_tuple("Poly").field(t).finish(),
            PieceFn::Analytic(_) => f.write_str("Analytic(..)"),
        }
    }
}

impl PieceFn {
    pub fn constant(c: f64) -> Self {
        PieceFn::Poly(vec![(MultiIndex::new(), c)])
    }

    pub fn monomials(terms: Vec<(Vec<u32>, f64)>) -> Self {
        PieceFn::Poly(terms.into_iter().map(|(b, c)| (MultiIndex::from_vec(b), c)).collect())
    }

    pub fn analytic(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PieceFn::Analytic(Arc::new(f))
    }

    /// Total degree for polynomial pieces.
    fn as_constant(&self) -> Option<f64> {
        match self {
            PieceFn::Poly(t) if t.iter().all(|(b, _)| b.iter().all(|&e| e == 0)) => Some(t.iter().map(|(_, c)| c).sum()),
            _ => None,
        }
    }

    pub fn poly_degree(&self) -> Option<usize> {
        match self {
            PieceFn::Poly(t) => Some(t.iter().map(|(b, _)| b.iter().sum::<u32>() as usize).max().unwrap_or(0)),
            PieceFn::Analytic(_) => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PieceFn::Poly(t) => t
                .iter()
                .map(|(b, c)| c * b.iter().enumerate().map(|(i, &e)| x[i].powi(e as i32)).product::<f64>())
                .sum(),
            PieceFn::Analytic(f) => f(x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Piece {
    pub region: DyadicBox,
    pub f: PieceFn,
}

/// Target representation: domain, mesh level `m` (cells no finer than
/// `2^-m`), degree `d_rep` and Gauss points per axis `q`.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub domain: DyadicBox,
    pub mesh_level: i32,
    pub degree: usize,
    pub quad_order: usize,
}

impl Discretization {
    /// With the default `q = d_rep + 2`.
    pub fn new(domain: DyadicBox, mesh_level: i32, degree: usize) -> Self {
        Discretization { domain, mesh_level, degree, quad_order: degree + 2 }
    }
}

/// Per-cell L2 projection of a piecewise definition. Polynomial pieces of
/// degree `<= d_rep` are stored exactly on the coarsest dyadic tiling of
/// their region; other pieces are sampled on the uniform level `-m` grid.
pub fn ingest(pieces: &[Piece], disc: &Discretization) -> Result<PPFunction> {
    if disc.quad_order < disc.degree + 1 {
        return Err(Error::QuadratureOrder { q: disc.quad_order, degree: disc.degree });
    }
    let dim = disc.domain.dim();
    let set = MultiIndexSet::get(dim, disc.degree);
    let rule = gauss_legendre(disc.quad_order);
    let mut cells = Vec::new();
    for piece in pieces {
        if piece.region.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: piece.region.dim() });
        }
        if !disc.domain.contains_box(&piece.region) {
            return Err(Error::CellOutsideDomain {
                cell: piece.region.to_string(),
                domain: disc.domain.to_string(),
            });
        }
        let tiles = piece.region.dyadic_tiling(-disc.mesh_level)?;
        let exact = piece.f.poly_degree().is_some_and(|d| d <= disc.degree);
        let tiles: Vec<DyadicCube> = if exact {
            tiles
        } else {
            let total: u64 = tiles
                .iter()
                .map(|t| 1u64.checked_shl(((t.level + disc.mesh_level) as u32) * dim as u32).unwrap_or(u64::MAX))
                .fold(0u64, |a, b| a.saturating_add(b));
            if total > MAX_ENUMERATION {
                return Err(Error::ResourceLimit(format!("{total} cells at mesh level {}", disc.mesh_level)));
            }
            tiles.iter().flat_map(|t| t.descendants(-disc.mesh_level)).collect()
        };
        for cube in tiles {
            let b = cube.corners();
            let mut c = vec![0.0; set.len()];
            if let Some(v) = piece.f.as_constant() {
                c[0] = v * b.volume().sqrt();
                cells.push((cube, c));
                continue;
            }
            let axes: Vec<Vec<(f64, f64)>> =
                (0..dim).map(|a| rule.on_interval(b.lo_f64(a), b.side_f64(a)).collect()).collect();
            let mut phi: Vec<Vec<f64>> = vec![vec![0.0; disc.degree + 1]; dim];
            for_each_tensor_point(&axes, |x, w| {
                let fx = piece.f.eval(x);
                if fx == 0.0 {
                    return;
                }
                for a in 0..dim {
                    orthonormal_values(disc.degree, x[a], b.lo_f64(a), b.side_f64(a), &mut phi[a]);
                }
                for (k, beta) in set.iter().enumerate() {
                    let v: f64 = beta.iter().enumerate().map(|(a, &e)| phi[a][e as usize]).product();
                    c[k] += w * fx * v;
                }
            });
            cells.push((cube, c));
        }
    }
    PPFunction::from_cells(disc.domain.clone(), disc.mesh_level, disc.degree, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_order_checked() {
        let d = Discretization { quad_order: 1, ..Discretization::new(DyadicBox::q0(1), 0, 1) };
        assert!(matches!(ingest(&[], &d), Err(Error::QuadratureOrder { .. })));
    }

    #[test]
    fn non_dyadic_breakpoint_rejected() {
        let p = Piece { region: DyadicBox::from_f64(&[0.1], &[1.0]).unwrap(), f: PieceFn::constant(1.0) };
        let d = Discretization::new(DyadicBox::q0(1), 3, 0);
        assert!(matches!(ingest(&[p], &d), Err(Error::NonDyadicBreakpoint { .. })));
    }

    #[test]
    fn analytic_pieces_use_uniform_cells() {
        let p = Piece { region: DyadicBox::from_f64(&[0.0], &[1.0]).unwrap(), f: PieceFn::analytic(|x| x[0].exp()) };
        let f = ingest(&[p], &Discretization::new(DyadicBox::q0(1), 3, 2)).unwrap();
        assert_eq!(f.num_cells(), 8);
        assert!((f.eval(&[0.3]) - 0.3f64.exp()).abs() < 1e-4);
    }
}
