//! Special atoms `p^L_{n,k,alpha}`, the `A_alpha` supremum, atom
//! certificates and the dyadic + special splitting of atoms.

mod basis;
mod decompose;

use serde::{Deserialize, Serialize};

pub use basis::{constraint_rows, expected_count, BasisAtom, BasisFile, BasisPiece, SpecialBasis, MAX_AMBIENT};
pub use decompose::{atom_decompose, hp_split, hp_split_with, CubeStrategy, Decomposition, DyadicTerm, HpSplit, InputTerm, SpecialTerm};

use crate::dyadic::{Cube, Dyadic, DyadicBox, Family, ScaleWindow, SpecialCube};
use crate::error::{Error, Result};
use crate::lipnorm::{argmax, candidates, check_dim, first_cube, Argmax, NormReport};
use crate::par::Exec;
use crate::pwpoly::{AlphaContext, PPFunction};

/// Identifies `p^L_{n,k,alpha}(x) = 2^(n(N+alpha)) p^L(2^n x + k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialAtomId {
    #[serde(rename = "L")]
    pub l: usize,
    pub n: i32,
    pub k: Vec<i64>,
}

impl SpecialAtomId {
    pub fn new(l: usize, n: i32, k: Vec<i64>) -> Self {
        SpecialAtomId { l, n, k }
    }

    /// The support, `prod [(-1 - k_i) 2^-n, (1 - k_i) 2^-n]`.
    pub fn defining_cube(&self) -> SpecialCube {
        SpecialCube::new(-self.n, self.k.iter().map(|&k| -k).collect::<crate::dyadic::Index>())
    }

    /// The atom whose defining cube is `q`.
    pub fn on_cube(l: usize, q: &SpecialCube) -> Self {
        SpecialAtomId { l, n: -q.level, k: q.index.iter().map(|&k| -k).collect() }
    }
}

pub fn special_atom(basis: &SpecialBasis, id: &SpecialAtomId) -> Result<PPFunction> {
    let ctx = basis.ctx();
    if id.l == 0 || id.l > basis.count() {
        return Err(Error::param("L", format!("must lie in 1..={}", basis.count())));
    }
    if id.k.len() != ctx.dim() {
        return Err(Error::DimensionMismatch { expected: ctx.dim(), got: id.k.len() });
    }
    let shift: Vec<Dyadic> = id.k.iter().map(|&k| Dyadic::int(k)).collect();
    basis.function(id.l).dilate_translate(id.n, &shift, ctx.n_over_p())
}

/// `||p^L_{n,k,alpha}||_2 = 2^(n(N/2 + alpha))`.
pub fn special_atom_norm(ctx: &AlphaContext, n: i32) -> f64 {
    (n as f64 * (ctx.dim() as f64 / 2.0 + ctx.alpha())).exp2()
}

/// `<g, p^L_S>` for every `L`, with `S` the defining cube.
pub fn special_pairings(g: &PPFunction, basis: &SpecialBasis, s: &SpecialCube) -> Result<Vec<f64>> {
    let ctx = basis.ctx();
    let mut y = Vec::with_capacity((1 << ctx.dim()) * ctx.d_poly());
    for sub in s.dyadic_subcubes() {
        y.extend(g.project_coeffs(&sub.corners(), ctx.degree())?);
    }
    let scale = special_atom_norm(ctx, -s.level);
    Ok((1..=basis.count())
        .map(|l| scale * basis.vector(l).iter().zip(&y).map(|(a, b)| a * b).sum::<f64>())
        .collect())
}

pub fn a_alpha(g: &PPFunction, basis: &SpecialBasis, w: &ScaleWindow) -> Result<NormReport> {
    a_alpha_with(g, basis, w, Exec::default())
}

/// `sup |<g, p>|` over special atoms whose defining cube has level in the
/// window (special-cube level, i.e. `-n` for id level `n`) and meets its box.
pub fn a_alpha_with(g: &PPFunction, basis: &SpecialBasis, w: &ScaleWindow, exec: Exec) -> Result<NormReport> {
    let ctx = basis.ctx();
    check_dim(g, ctx)?;
    let cands = candidates(g, Family::D0, w, ctx.degree())?;
    let per_cube = exec.try_map(&cands, |c| match c {
        Cube::Special(s) => special_pairings(g, basis, s),
        Cube::Dyadic(_) => unreachable!("D0 candidates are special cubes"),
    })?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (c, vals) in cands.iter().zip(per_cube) {
        let Cube::Special(s) = c else { unreachable!() };
        for (l, v) in vals.into_iter().enumerate() {
            ids.push(SpecialAtomId::on_cube(l + 1, s));
            values.push(v.abs());
        }
    }
    let (norm, id) = match argmax(&values) {
        Some((i, v)) => (v, ids.swap_remove(i)),
        None => match first_cube(Family::D0, w)? {
            Cube::Special(s) => (0.0, SpecialAtomId::on_cube(1, &s)),
            Cube::Dyadic(_) => unreachable!(),
        },
    };
    let level = -id.n;
    let boundary_attained = norm > 0.0 && (level == w.n_min || level == w.n_max);
    Ok(NormReport { norm, argmax: Argmax::Atom(id), family: Family::D0, window: w.clone(), boundary_attained })
}

/// Measured L2 p-atom properties of `atom` against the cube `cube`.
#[derive(Clone, Debug, Serialize)]
pub struct AtomCert {
    #[serde(skip)]
    pub atom: PPFunction,
    pub cube: DyadicBox,
    pub ctx: AlphaContext,
    pub norm_l2: f64,
    /// `|Q|^(1/p) (|Q|^-1 int |a|^2)^(1/2)`.
    pub size: f64,
    pub max_moment: f64,
    pub moment_tol: f64,
    /// L2 norm of the part of `atom` outside the cube.
    pub outside_norm: f64,
    pub support_ok: bool,
    pub size_ok: bool,
    pub moments_ok: bool,
    pub pass: bool,
}

pub const SIZE_TOL: f64 = 1e-9;
pub const MOMENT_RTOL: f64 = 1e-9;

pub fn validate_atom(f: &PPFunction, q: &DyadicBox, ctx: &AlphaContext) -> Result<AtomCert> {
    check_dim(f, ctx)?;
    if q.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch { expected: ctx.dim(), got: q.dim() });
    }
    if q.is_degenerate() {
        return Err(Error::DegenerateBox(q.to_string()));
    }
    let norm_l2 = f.norm();
    let mut outside_sq = 0.0;
    for i in 0..f.num_cells() {
        let cb = f.cell(i).corners();
        let total: f64 = f.cell_coeffs(i).iter().map(|c| c * c).sum();
        if q.contains_box(&cb) {
            continue;
        }
        match cb.intersection(q) {
            None => outside_sq += total,
            Some(inner) => {
                let parts = f.cover_box(&inner)?;
                let inside: f64 = parts
                    .iter()
                    .filter(|p| p.cell == Some(i))
                    .map(|p| f.restricted(i, &p.cube).iter().map(|c| c * c).sum::<f64>())
                    .sum();
                outside_sq += (total - inside).max(0.0);
            }
        }
    }
    let outside_norm = outside_sq.sqrt();
    let vol = q.volume();
    let size = vol.powf(1.0 / ctx.p() - 0.5) * norm_l2;
    let moments = f.centered_moments(q, ctx.degree())?;
    let max_moment = moments.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let moment_tol = MOMENT_RTOL * norm_l2 * vol.sqrt() * q.diameter().powi(ctx.degree() as i32);
    let support_ok = outside_norm <= 1e-12 * norm_l2;
    let size_ok = size <= 1.0 + SIZE_TOL;
    let moments_ok = max_moment <= moment_tol;
    Ok(AtomCert {
        atom: f.clone(),
        cube: q.clone(),
        ctx: *ctx,
        norm_l2,
        size,
        max_moment,
        moment_tol,
        outside_norm,
        support_ok,
        size_ok,
        moments_ok,
        pass: support_ok && size_ok && moments_ok,
    })
}

/// `(sum |lambda_j|^p)^(1/p)`; 0 for no terms.
pub fn atomic_cost(coeffs: &[f64], p: f64) -> f64 {
    let s: f64 = coeffs.iter().map(|c| c.abs().powf(p)).sum();
    if s == 0.0 {
        0.0
    } else {
        s.powf(1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwpoly::{ingest, Discretization, Piece, PieceFn};

    fn bx(lo: &[f64], hi: &[f64]) -> DyadicBox {
        DyadicBox::from_f64(lo, hi).unwrap()
    }

    fn haar_half() -> PPFunction {
        ingest(
            &[
                Piece { region: bx(&[-1.0], &[0.0]), f: PieceFn::constant(-0.5) },
                Piece { region: bx(&[0.0], &[1.0]), f: PieceFn::constant(0.5) },
            ],
            &Discretization::new(DyadicBox::q0(1), 0, 0),
        )
        .unwrap()
    }

    #[test]
    fn special_atom_identity_and_norm() {
        let ctx = AlphaContext::new(1, 0.0).unwrap();
        let b = SpecialBasis::build(&ctx).unwrap();
        let p = special_atom(&b, &SpecialAtomId::new(1, 0, vec![0])).unwrap();
        assert_eq!(&p, b.function(1));
        let id = SpecialAtomId::new(1, 3, vec![-5]);
        let p = special_atom(&b, &id).unwrap();
        assert!((p.norm() - special_atom_norm(&ctx, 3)).abs() < 1e-12);
        assert_eq!(id.defining_cube().corners(), bx(&[4.0 / 8.0], &[6.0 / 8.0]));
        assert!(p.support_hull().unwrap() == id.defining_cube().corners());
    }

    #[test]
    fn validation_examples() {
        let ctx = AlphaContext::new(1, 0.0).unwrap();
        let a = haar_half();
        let c = validate_atom(&a, &DyadicBox::q0(1), &ctx).unwrap();
        assert!(c.pass);
        assert!((c.size - 1.0).abs() < 1e-15);
        let ind = ingest(
            &[Piece { region: bx(&[0.0], &[1.0]), f: PieceFn::constant(1.0) }],
            &Discretization::new(DyadicBox::q0(1), 0, 0),
        )
        .unwrap();
        let c = validate_atom(&ind, &DyadicBox::q0(1), &ctx).unwrap();
        assert!(!c.pass && !c.moments_ok);
        let c = validate_atom(&a.scale(10.0), &DyadicBox::q0(1), &ctx).unwrap();
        assert!(!c.pass && !c.size_ok && c.moments_ok);
        let c = validate_atom(&a, &bx(&[0.0], &[1.0]), &ctx).unwrap();
        assert!(!c.support_ok);
    }

    #[test]
    fn cost_examples() {
        assert_eq!(atomic_cost(&[1.0], 1.0), 1.0);
        assert_eq!(atomic_cost(&[1.0, 1.0], 1.0), 2.0);
        assert!((atomic_cost(&[1.0, 1.0], 0.5) - 4.0).abs() < 1e-15);
        assert_eq!(atomic_cost(&[], 0.5), 0.0);
    }
}
