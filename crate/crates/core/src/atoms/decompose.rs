//! Splitting an L2 p-atom into `2^N` dyadic atoms plus special atoms, and
//! the termwise split of an atomic sum into dyadic and special parts.

use serde::{Deserialize, Serialize};

use crate::dyadic::{recipe_special_cube, smallest_special_cube, Dyadic, DyadicBox, DyadicCube, SpecialCube};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::pwpoly::{AlphaContext, PPFunction};

use super::{atomic_cost, special_atom, validate_atom, SpecialAtomId, SpecialBasis};

/// How the enclosing special cube is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeStrategy {
    /// Side `2^(n+1)` with `2^(n-1) <= side(Q) < 2^n`, always.
    #[default]
    Recipe,
    /// `Q` itself when it is a special cube, the recipe otherwise.
    Smallest,
}

#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub special_cube: SpecialCube,
    pub strategy: CubeStrategy,
    /// Scalar factored out of the input so that the rest is a valid atom.
    pub scale: f64,
    pub d: Vec<f64>,
    pub dyadic_cubes: Vec<DyadicCube>,
    #[serde(skip)]
    pub dyadic_atoms: Vec<PPFunction>,
    pub c: Vec<f64>,
    pub special_ids: Vec<SpecialAtomId>,
    /// `||a - reconstruction||_2 / ||a||_2`.
    pub residual: f64,
    /// `||a'||_2` for the normalized input moved onto `Q0`.
    pub a_prime_norm: f64,
    /// `sqrt(M) ||a'||_2`, times `scale`.
    pub c_bound: f64,
    pub dyadic_atoms_valid: bool,
}

impl Decomposition {
    /// `sum d_i a_i + sum c_L p^L_{-n,-k,alpha}`.
    pub fn reconstruct(&self, basis: &SpecialBasis) -> Result<PPFunction> {
        let mut acc: Option<PPFunction> = None;
        let mut add = |c: f64, f: PPFunction| -> Result<()> {
            acc = Some(match acc.take() {
                None => f.scale(c),
                Some(a) => PPFunction::combine(1.0, &a, c, &f)?,
            });
            Ok(())
        };
        for (d, a) in self.d.iter().zip(&self.dyadic_atoms) {
            add(*d, a.clone())?;
        }
        for (c, id) in self.c.iter().zip(&self.special_ids) {
            add(*c, special_atom(basis, id)?)?;
        }
        acc.ok_or_else(|| Error::InvalidAtom("empty decomposition".into()))
    }
}

pub fn atom_decompose(
    a: &PPFunction,
    q: &DyadicBox,
    ctx: &AlphaContext,
    basis: &SpecialBasis,
    strategy: CubeStrategy,
) -> Result<Decomposition> {
    if basis.ctx() != ctx {
        return Err(Error::param("basis", "context does not match"));
    }
    let cert = validate_atom(a, q, ctx)?;
    if !cert.support_ok {
        return Err(Error::InvalidAtom(format!("support leaves {q} (outside norm {:e})", cert.outside_norm)));
    }
    if !cert.moments_ok {
        return Err(Error::InvalidAtom(format!(
            "moment {:e} exceeds tolerance {:e}",
            cert.max_moment, cert.moment_tol
        )));
    }
    let scale = if cert.size_ok { 1.0 } else { cert.size };
    let a0 = a.scale(1.0 / scale);

    let s = match strategy {
        CubeStrategy::Recipe => recipe_special_cube(q)?,
        CubeStrategy::Smallest => smallest_special_cube(q)?.cube,
    };
    let dim = ctx.dim();
    let n = s.level;
    let n_over_p = ctx.n_over_p();
    let shift: Vec<Dyadic> = s.index.iter().map(|&k| Dyadic::new(k, n)).collect();
    let back: Vec<Dyadic> = s.index.iter().map(|&k| Dyadic::int(-k)).collect();
    // a'(x) = 2^(nN/p) a(2^n (x + k)) lives on Q0
    let a_prime = a0.dilate_translate(n, &shift, n_over_p)?;
    let a_prime_norm = a_prime.norm();

    let me = ctx.d_poly() as f64;
    let inv_p = 1.0 / ctx.p();
    let shrink = (dim as f64 * (0.5 - inv_p)).exp2() / (me + 1.0);
    let d_i = (me + 1.0) * (dim as f64 * (inv_p - 0.5)).exp2();

    let q0_subs = SpecialCube::q0(dim).dyadic_subcubes();
    let mut y = Vec::with_capacity(q0_subs.len() * ctx.d_poly());
    let mut dyadic_atoms = Vec::with_capacity(q0_subs.len());
    let mut dyadic_atoms_valid = true;
    for (sub, image) in q0_subs.iter().zip(s.dyadic_subcubes()) {
        let b = sub.corners();
        let piece = a_prime.restrict_to_box(&b)?;
        let proj = piece.project_poly(&b, ctx.degree())?;
        let alpha_i = PPFunction::combine(1.0, &piece, -1.0, &proj.to_function(0)?)?;
        let a_i = alpha_i.scale(shrink).dilate_translate(-n, &back, n_over_p)?;
        dyadic_atoms_valid &= validate_atom(&a_i, &image.corners(), ctx)?.pass;
        y.extend(proj.coeffs);
        dyadic_atoms.push(a_i);
    }
    let c: Vec<f64> =
        (1..=basis.count()).map(|l| scale * basis.vector(l).iter().zip(&y).map(|(u, v)| u * v).sum::<f64>()).collect();
    let special_ids = (1..=basis.count()).map(|l| SpecialAtomId::new(l, -n, back.iter().map(|k| k.floor_div_pow2(0)).collect())).collect();

    let mut dec = Decomposition {
        special_cube: s.clone(),
        strategy,
        scale,
        d: vec![scale * d_i; q0_subs.len()],
        dyadic_cubes: s.dyadic_subcubes(),
        dyadic_atoms,
        c,
        special_ids,
        residual: 0.0,
        a_prime_norm,
        c_bound: scale * (basis.count() as f64).sqrt() * a_prime_norm,
        dyadic_atoms_valid,
    };
    let rec = dec.reconstruct(basis)?;
    let err = PPFunction::combine(1.0, &rec, -1.0, a)?.norm();
    let na = a.norm();
    dec.residual = if na > 0.0 { err / na } else { err };
    Ok(dec)
}

/// A general atom with its coefficient.
#[derive(Clone, Debug)]
pub struct InputTerm {
    pub coeff: f64,
    pub atom: PPFunction,
    pub cube: DyadicBox,
}

#[derive(Clone, Debug, Serialize)]
pub struct DyadicTerm {
    pub coeff: f64,
    pub cube: DyadicCube,
    #[serde(skip)]
    pub atom: PPFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialTerm {
    pub coeff: f64,
    pub id: SpecialAtomId,
}

/// `f = f_d + f_s` with atomic costs. Special terms are counted with the
/// special functions `p^L_{n,k,alpha}` themselves as the atoms.
#[derive(Clone, Debug, Serialize)]
pub struct HpSplit {
    pub dyadic: Vec<DyadicTerm>,
    pub special: Vec<SpecialTerm>,
    pub cost_dyadic: f64,
    pub cost_special: f64,
    pub cost_input: f64,
    /// `((cost_d^p + cost_s^p) / sum |lambda_j|^p)^(1/p)`.
    pub constant: f64,
}

/// Terms whose contribution is below this fraction of the input atom's
/// norm are dropped from the split.
pub const NEGLIGIBLE: f64 = 1e-12;

pub fn hp_split(
    terms: &[InputTerm],
    ctx: &AlphaContext,
    basis: &SpecialBasis,
    strategy: CubeStrategy,
) -> Result<HpSplit> {
    hp_split_with(terms, ctx, basis, strategy, Exec::default())
}

pub fn hp_split_with(
    terms: &[InputTerm],
    ctx: &AlphaContext,
    basis: &SpecialBasis,
    strategy: CubeStrategy,
    exec: Exec,
) -> Result<HpSplit> {
    for (j, t) in terms.iter().enumerate() {
        let cert = validate_atom(&t.atom, &t.cube, ctx)?;
        if !cert.pass {
            return Err(Error::InvalidAtom(format!("term {j} does not validate against {}", t.cube)));
        }
    }
    let decs = exec.try_map(terms, |t| atom_decompose(&t.atom, &t.cube, ctx, basis, strategy))?;
    let mut dyadic = Vec::new();
    let mut special = Vec::new();
    for (t, dec) in terms.iter().zip(decs) {
        let floor = NEGLIGIBLE * t.atom.norm();
        for ((d, cube), atom) in dec.d.iter().zip(dec.dyadic_cubes).zip(dec.dyadic_atoms) {
            if (d * atom.norm()).abs() > floor {
                dyadic.push(DyadicTerm { coeff: t.coeff * d, cube, atom });
            }
        }
        for (c, id) in dec.c.iter().zip(dec.special_ids) {
            if (c * super::special_atom_norm(ctx, id.n)).abs() > floor {
                special.push(SpecialTerm { coeff: t.coeff * c, id });
            }
        }
    }
    let p = ctx.p();
    let cost_dyadic = atomic_cost(&dyadic.iter().map(|t| t.coeff).collect::<Vec<_>>(), p);
    let cost_special = atomic_cost(&special.iter().map(|t| t.coeff).collect::<Vec<_>>(), p);
    let cost_input = atomic_cost(&terms.iter().map(|t| t.coeff).collect::<Vec<_>>(), p);
    let constant = if cost_input > 0.0 {
        ((cost_dyadic.powf(p) + cost_special.powf(p)) / cost_input.powf(p)).powf(1.0 / p)
    } else {
        0.0
    };
    Ok(HpSplit { dyadic, special, cost_dyadic, cost_special, cost_input, constant })
}
