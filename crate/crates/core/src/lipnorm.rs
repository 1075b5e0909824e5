//! Sharp maximal function values and the `Lambda_{alpha, J}` norms over the
//! grid families, truncated to a [`ScaleWindow`].
//!
//! Only cubes on which `g` can differ from a polynomial of degree `[alpha]`
//! are evaluated: a cube inside one cell of low degree, or inside the zero
//! region, has sharp value exactly 0 and never changes the supremum.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::atoms::{a_alpha_with, SpecialAtomId, SpecialBasis};
use crate::dyadic::{
    level_ranges, product_indices, Cube, DyadicBox, DyadicCube, Family, Index, ScaleWindow, SpecialCube,
    MAX_ENUMERATION,
};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::pwpoly::{AlphaContext, PPFunction};

/// Relative slack under which two values count as tied for the argmax.
pub const TIE_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Argmax {
    Cube(Cube),
    Atom(SpecialAtomId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm: f64,
    pub argmax: Argmax,
    pub family: Family,
    pub window: ScaleWindow,
    pub boundary_attained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremAReport {
    pub lambda_d: NormReport,
    pub a_alpha: NormReport,
    pub estimate: f64,
}

/// `|Q|^(-alpha/N) (|Q|^-1 int_Q |g - p_Q(g)|^2)^(1/2)`.
pub fn sharp_value(g: &PPFunction, q: &DyadicBox, ctx: &AlphaContext) -> Result<f64> {
    check_dim(g, ctx)?;
    let (e, _) = g.residual_energy(q, ctx.degree())?;
    let vol = q.volume();
    Ok(vol.powf(-ctx.alpha() / ctx.dim() as f64) * (e / vol).sqrt())
}

pub(crate) fn check_dim(g: &PPFunction, ctx: &AlphaContext) -> Result<()> {
    if g.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch { expected: ctx.dim(), got: g.dim() });
    }
    Ok(())
}

/// Levels `-m-1 ..= L+1` over the domain, where `L` is the domain's
/// enclosing level.
pub fn default_window(g: &PPFunction) -> ScaleWindow {
    ScaleWindow {
        n_min: -g.mesh_level() - 1,
        n_max: g.domain().enclosing_level() + 1,
        bbox: g.domain().clone(),
    }
}

pub fn lambda_norm(g: &PPFunction, ctx: &AlphaContext, family: Family, w: &ScaleWindow) -> Result<NormReport> {
    lambda_norm_with(g, ctx, family, w, Exec::default())
}

pub fn lambda_norm_with(
    g: &PPFunction,
    ctx: &AlphaContext,
    family: Family,
    w: &ScaleWindow,
    exec: Exec,
) -> Result<NormReport> {
    check_dim(g, ctx)?;
    let cands = candidates(g, family, w, ctx.degree())?;
    let values = exec.try_map(&cands, |c| sharp_value(g, &c.corners(), ctx))?;
    let best = argmax(&values);
    let (norm, cube) = match best {
        Some((i, v)) => (v, cands[i].clone()),
        None => (0.0, first_cube(family, w)?),
    };
    let boundary_attained = norm > 0.0 && (cube.level() == w.n_min || cube.level() == w.n_max);
    Ok(NormReport { norm, argmax: Argmax::Cube(cube), family, window: w.clone(), boundary_attained })
}

/// `||g||_{Lambda, D} + A_alpha(g)` with both parts.
pub fn theorem_a_estimate(
    g: &PPFunction,
    ctx: &AlphaContext,
    basis: &SpecialBasis,
    w: &ScaleWindow,
) -> Result<TheoremAReport> {
    theorem_a_estimate_with(g, ctx, basis, w, Exec::default())
}

pub fn theorem_a_estimate_with(
    g: &PPFunction,
    ctx: &AlphaContext,
    basis: &SpecialBasis,
    w: &ScaleWindow,
    exec: Exec,
) -> Result<TheoremAReport> {
    if basis.ctx() != ctx {
        return Err(Error::param("basis", "context does not match"));
    }
    let lambda_d = lambda_norm_with(g, ctx, Family::D, w, exec)?;
    let a_alpha = a_alpha_with(g, basis, w, exec)?;
    let estimate = lambda_d.norm + a_alpha.norm;
    Ok(TheoremAReport { lambda_d, a_alpha, estimate })
}

/// Index and value of the maximum; ties within [`TIE_RTOL`] go to the
/// earliest entry. `None` when every value is 0 (or there are none).
pub(crate) fn argmax(values: &[f64]) -> Option<(usize, f64)> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return None;
    }
    let i = values.iter().position(|&v| v >= max * (1.0 - TIE_RTOL)).expect("max is attained");
    Some((i, max))
}

/// The smallest cube of the window, reported when every value vanishes.
pub(crate) fn first_cube(family: Family, w: &ScaleWindow) -> Result<Cube> {
    for n in w.levels() {
        let r = level_ranges(family, n, &w.bbox);
        if r.iter().all(|(a, b)| a <= b) {
            let k: Index = r.iter().map(|&(a, _)| a).collect();
            return Ok(match family {
                Family::D => Cube::Dyadic(DyadicCube::new(n, k)),
                Family::D0 => Cube::Special(SpecialCube::new(n, k)),
            });
        }
    }
    Err(Error::param("window", "contains no cubes"))
}

/// Cubes of `family` in `w` whose sharp value can be nonzero, ordered by
/// `(level, index)`.
pub(crate) fn candidates(g: &PPFunction, family: Family, w: &ScaleWindow, d: usize) -> Result<Vec<Cube>> {
    let mut out = Vec::new();
    let mut budget = MAX_ENUMERATION;
    for n in w.levels() {
        let interesting = interesting_cubes(g, n, d, &mut budget)?;
        let mut level: Vec<Cube> = match family {
            Family::D => interesting
                .into_iter()
                .filter(|c| c.corners().interiors_intersect(&w.bbox))
                .map(Cube::Dyadic)
                .collect(),
            Family::D0 => {
                let mut seeds = interesting;
                boundary_layers(g, n, d, &mut seeds, &mut budget)?;
                let mut specials = HashSet::new();
                for s in &seeds {
                    for q in SpecialCube::containing_subcube(s) {
                        if q.corners().interiors_intersect(&w.bbox) {
                            specials.insert(q);
                        }
                    }
                }
                specials.into_iter().map(Cube::Special).collect()
            }
        };
        level.sort_by(|a, b| a.index().cmp(b.index()));
        out.extend(level);
    }
    Ok(out)
}

fn spend(budget: &mut u64, count: u64) -> Result<()> {
    if count > *budget {
        return Err(Error::ResourceLimit("too many candidate cubes; narrow the window".into()));
    }
    *budget -= count;
    Ok(())
}

fn descendant_count(c: &DyadicCube, n: i32) -> u64 {
    1u64.checked_shl(((c.level - n) as u32) * c.dim() as u32).unwrap_or(u64::MAX)
}

/// Level-`n` dyadic cubes that strictly contain a cell, or lie inside (or
/// equal) a cell carrying terms of degree above `d`.
fn interesting_cubes(g: &PPFunction, n: i32, d: usize, budget: &mut u64) -> Result<HashSet<DyadicCube>> {
    let mut set = HashSet::new();
    for i in 0..g.num_cells() {
        let c = g.cell(i);
        if c.level < n {
            set.insert(c.ancestor(n));
        } else if g.cell_exceeds_degree(i, d) {
            spend(budget, descendant_count(c, n))?;
            set.extend(c.descendants(n));
        }
    }
    Ok(set)
}

/// Adds the level-`n` cubes along the boundary of every low-degree cell of
/// level `>= n`: a special cube that meets such a cell without lying inside
/// it must contain one of these.
fn boundary_layers(
    g: &PPFunction,
    n: i32,
    d: usize,
    seeds: &mut HashSet<DyadicCube>,
    budget: &mut u64,
) -> Result<()> {
    for i in 0..g.num_cells() {
        let c = g.cell(i);
        if c.level < n || g.cell_exceeds_degree(i, d) {
            continue;
        }
        let s = (c.level - n) as u32;
        let ranges: Vec<(i64, i64)> = c.index.iter().map(|&k| (((k - 1) << s) + 1, k << s)).collect();
        for axis in 0..c.dim() {
            for end in [ranges[axis].0, ranges[axis].1] {
                let mut r = ranges.clone();
                r[axis] = (end, end);
                let count = r.iter().map(|(a, b)| (b - a + 1) as u64).product();
                spend(budget, count)?;
                seeds.extend(product_indices(&r).into_iter().map(|k| DyadicCube::new(n, k)));
            }
        }
    }
    Ok(())
}
