//! Piecewise polynomials on sparse sets of dyadic cells.
//!
//! A [`PPFunction`] is a finite set of pairwise disjoint dyadic cells, each
//! carrying coefficients in its orthonormal tensor-Legendre basis truncated
//! to total degree `degree`. The function vanishes off its cells; cells may
//! sit at different levels, so a step with a jump deep inside a long flat
//! stretch costs a handful of cells rather than a uniform mesh.

mod context;
mod ingest;
mod spec;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use context::AlphaContext;
pub use ingest::{ingest, Discretization, Piece, PieceFn};
pub use spec::{BuiltinName, FunctionSpec, LoadedFunction};

use crate::dyadic::{Dyadic, DyadicBox, DyadicCube, Index, MAX_ENUMERATION};
use crate::error::{Error, Result};
use crate::legendre::{eval_on_box, MultiIndexSet, TensorMap};
use crate::par::Exec;
use crate::quadrature::gauss_legendre;

/// A polynomial on one box, in that box's orthonormal Legendre basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyOnCell {
    pub host: DyadicBox,
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl PolyOnCell {
    pub fn set(&self) -> Arc<MultiIndexSet> {
        MultiIndexSet::get(self.host.dim(), self.degree)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval_on_box(&self.set(), &self.coeffs, &self.host, x)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// The same polynomial expressed on another box.
    pub fn rehost(&self, to: &DyadicBox) -> Vec<f64> {
        let set = self.set();
        TensorMap::new(&self.host, to, self.degree).forward(&set, &self.coeffs, &set)
    }

    /// Extend by zero off `host` into a one-cell function (the host must be a
    /// dyadic cube).
    pub fn to_function(&self, mesh_level: i32) -> Result<PPFunction> {
        let cells = self
            .host
            .dyadic_tiling(self.host.alignment_level(self.host.enclosing_level()))?
            .into_iter()
            .map(|c| {
                let coeffs = self.rehost(&c.corners());
                (c, coeffs)
            })
            .collect();
        PPFunction::from_cells(self.host.clone(), mesh_level, self.degree, cells)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Node {
    Leaf(usize),
    Internal,
}

/// One piece of a cube covered by a function: either inside the cell
/// `cell`, or (`None`) in a region where the function vanishes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Part {
    pub cell: Option<usize>,
    pub cube: DyadicCube,
}

#[derive(Clone, Debug)]
pub struct PPFunction {
    domain: DyadicBox,
    mesh_level: i32,
    degree: usize,
    set: Arc<MultiIndexSet>,
    cells: Vec<DyadicCube>,
    coeffs: Vec<f64>,
    tree: HashMap<DyadicCube, Node>,
    tops: Vec<DyadicCube>,
    top_level: i32,
}

impl PartialEq for PPFunction {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain
            && self.mesh_level == other.mesh_level
            && self.degree == other.degree
            && self.cells == other.cells
            && self.coeffs == other.coeffs
    }
}

impl PPFunction {
    /// Build from explicit cells. Cells must be pairwise disjoint, lie inside
    /// `domain`, have level `>= -mesh_level`, and carry `C(N + degree, N)`
    /// coefficients each.
    pub fn from_cells(
        domain: DyadicBox,
        mesh_level: i32,
        degree: usize,
        mut cells: Vec<(DyadicCube, Vec<f64>)>,
    ) -> Result<Self> {
        let dim = domain.dim();
        let set = MultiIndexSet::get(dim, degree);
        for (c, v) in &cells {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.dim() });
            }
            if v.len() != set.len() {
                return Err(Error::CoefficientCount { expected: set.len(), got: v.len() });
            }
            if c.level < -mesh_level {
                return Err(Error::CellTooFine { cell: format!("{c:?}"), mesh_level });
            }
            if !domain.contains_box(&c.corners()) {
                return Err(Error::CellOutsideDomain { cell: format!("{c:?}"), domain: domain.to_string() });
            }
        }
        cells.sort_by(|a, b| a.0.cmp(&b.0));
        let top_level = cells.iter().map(|(c, _)| c.level).fold(domain.enclosing_level(), i32::max);
        let mut tree = HashMap::with_capacity(cells.len() * 2);
        let mut tops = Vec::new();
        for (i, (c, _)) in cells.iter().enumerate() {
            if tree.insert(c.clone(), Node::Leaf(i)).is_some() {
                return Err(Error::OverlappingCells(format!("{c:?}")));
            }
            for l in c.level + 1..=top_level {
                let a = c.ancestor(l);
                match tree.get(&a) {
                    Some(Node::Leaf(_)) => return Err(Error::OverlappingCells(format!("{c:?} inside {a:?}"))),
                    Some(Node::Internal) => break,
                    None => {
                        tree.insert(a, Node::Internal);
                    }
                }
            }
            tops.push(c.ancestor(top_level));
        }
        tops.sort();
        tops.dedup();
        let (cells, coeffs): (Vec<DyadicCube>, Vec<Vec<f64>>) = cells.into_iter().unzip();
        Ok(PPFunction { domain, mesh_level, degree, set, cells, coeffs: coeffs.concat(), tree, tops, top_level })
    }

    pub fn zero(domain: DyadicBox, mesh_level: i32, degree: usize) -> Self {
        Self::from_cells(domain, mesh_level, degree, Vec::new()).expect("empty cell set is valid")
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &DyadicBox {
        &self.domain
    }

    /// Finest admissible cell level is `-mesh_level`.
    pub fn mesh_level(&self) -> i32 {
        self.mesh_level
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn basis_set(&self) -> &Arc<MultiIndexSet> {
        &self.set
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, i: usize) -> &DyadicCube {
        &self.cells[i]
    }

    pub fn cell_coeffs(&self, i: usize) -> &[f64] {
        let k = self.set.len();
        &self.coeffs[i * k..(i + 1) * k]
    }

    pub fn cells(&self) -> impl Iterator<Item = (&DyadicCube, &[f64])> + '_ {
        let k = self.set.len();
        self.cells.iter().zip(self.coeffs.chunks(k.max(1)))
    }

    pub fn cell_poly(&self, i: usize) -> PolyOnCell {
        PolyOnCell { host: self.cells[i].corners(), degree: self.degree, coeffs: self.cell_coeffs(i).to_vec() }
    }

    /// True when cell `i` has a nonzero coefficient of total degree above `d`.
    pub fn cell_exceeds_degree(&self, i: usize, d: usize) -> bool {
        self.set.iter().zip(self.cell_coeffs(i)).any(|(b, &c)| c != 0.0 && b.iter().sum::<u32>() as usize > d)
    }

    /// Bounding box of the cells (`None` for the zero function).
    pub fn support_hull(&self) -> Option<DyadicBox> {
        self.cells.iter().map(|c| c.corners()).reduce(|a, b| a.hull(&b))
    }

    /// Level of the coarsest cubes the cell tree is rooted at.
    pub fn top_level(&self) -> i32 {
        self.top_level
    }

    /// Cover the dyadic cube `c` by disjoint parts, each inside one cell or
    /// inside the zero region. Parts come out in depth-first child order.
    pub fn cover(&self, c: &DyadicCube) -> Vec<Part> {
        let mut out = Vec::new();
        self.cover_into(c, &mut out);
        out
    }

    fn cover_into(&self, c: &DyadicCube, out: &mut Vec<Part>) {
        if c.level > self.top_level {
            if self.tops.iter().any(|t| c.contains(t)) {
                for ch in c.children() {
                    self.cover_into(&ch, out);
                }
            } else {
                out.push(Part { cell: None, cube: c.clone() });
            }
            return;
        }
        match self.tree.get(c) {
            Some(Node::Leaf(i)) => out.push(Part { cell: Some(*i), cube: c.clone() }),
            Some(Node::Internal) => {
                for ch in c.children() {
                    self.cover_into(&ch, out);
                }
            }
            None => out.push(Part { cell: self.owner_above(c), cube: c.clone() }),
        }
    }

    /// The cell strictly containing `c`, if any.
    pub fn owner_above(&self, c: &DyadicCube) -> Option<usize> {
        for l in c.level + 1..=self.top_level {
            match self.tree.get(&c.ancestor(l)) {
                Some(Node::Leaf(i)) => return Some(*i),
                Some(Node::Internal) => return None,
                None => {}
            }
        }
        None
    }

    /// True when some cell lies strictly inside `c`.
    pub fn has_cells_below(&self, c: &DyadicCube) -> bool {
        if c.level > self.top_level {
            return self.tops.iter().any(|t| c.contains(t));
        }
        matches!(self.tree.get(c), Some(Node::Internal))
    }

    /// Parts covering an arbitrary dyadic-cornered box.
    pub fn cover_box(&self, b: &DyadicBox) -> Result<Vec<Part>> {
        let mut out = Vec::new();
        for c in tile(b)? {
            self.cover_into(&c, &mut out);
        }
        Ok(out)
    }

    /// Coefficients of cell `cell` re-expressed on the sub-cube `part`.
    pub fn restricted(&self, cell: usize, part: &DyadicCube) -> Vec<f64> {
        if self.cells[cell] == *part {
            return self.cell_coeffs(cell).to_vec();
        }
        TensorMap::new(&self.cells[cell].corners(), &part.corners(), self.degree).forward(
            &self.set,
            self.cell_coeffs(cell),
            &self.set,
        )
    }

    /// Point value; cells own their lower faces, and the domain's upper face
    /// belongs to the adjacent cell. Zero outside the domain.
    pub fn eval(&self, x: &[f64]) -> f64 {
        if x.len() != self.dim() || !self.domain.contains_point(x) {
            return 0.0;
        }
        let mut level = self.top_level;
        loop {
            let c = self.owning_cube(x, level);
            match self.tree.get(&c) {
                Some(Node::Leaf(i)) => {
                    return eval_on_box(&self.set, self.cell_coeffs(*i), &self.cells[*i].corners(), x);
                }
                Some(Node::Internal) => level -= 1,
                None => return 0.0,
            }
        }
    }

    fn owning_cube(&self, x: &[f64], level: i32) -> DyadicCube {
        let mut c = DyadicCube::containing_point(x, level);
        let scale = crate::dyadic::pow2f(-level);
        for (i, k) in c.index.iter_mut().enumerate() {
            let t = x[i] * scale;
            if x[i] == self.domain.hi_f64(i) && t == t.floor() {
                *k = t as i64;
            }
        }
        c
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, c: f64) -> PPFunction {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Same function with `degree` raised to at least `d` (zero padding).
    pub fn with_degree(&self, d: usize) -> PPFunction {
        if d <= self.degree {
            return self.clone();
        }
        let k = MultiIndexSet::get(self.dim(), d).len();
        let cells = self
            .cells()
            .map(|(c, v)| {
                let mut w = v.to_vec();
                w.resize(k, 0.0);
                (c.clone(), w)
            })
            .collect();
        PPFunction::from_cells(self.domain.clone(), self.mesh_level, d, cells).expect("padding keeps validity")
    }

    /// `c1 f + c2 g` on the common refinement.
    pub fn combine(c1: f64, f: &PPFunction, c2: f64, g: &PPFunction) -> Result<PPFunction> {
        if f.dim() != g.dim() {
            return Err(Error::DimensionMismatch { expected: f.dim(), got: g.dim() });
        }
        let degree = f.degree.max(g.degree);
        let set = MultiIndexSet::get(f.dim(), degree);
        let mut cells: Vec<(DyadicCube, Vec<f64>)> = Vec::new();
        let padded = |v: Vec<f64>, s: f64| -> Vec<f64> {
            let mut w: Vec<f64> = v.into_iter().map(|x| s * x).collect();
            w.resize(set.len(), 0.0);
            w
        };
        for (i, fc) in f.cells.iter().enumerate() {
            for part in g.cover(fc) {
                let mut v = padded(f.restricted(i, &part.cube), c1);
                if let Some(j) = part.cell {
                    let w = g.restricted(j, &part.cube);
                    v.iter_mut().zip(w).for_each(|(a, b)| *a += c2 * b);
                }
                cells.push((part.cube, v));
            }
        }
        for (j, gc) in g.cells.iter().enumerate() {
            for part in f.cover(gc) {
                if part.cell.is_none() {
                    cells.push((part.cube.clone(), padded(g.restricted(j, &part.cube), c2)));
                }
            }
        }
        PPFunction::from_cells(f.domain.hull(&g.domain), f.mesh_level.max(g.mesh_level), degree, cells)
    }

    pub fn inner_product(&self, g: &PPFunction) -> f64 {
        self.inner_product_with(g, Exec::default())
    }

    /// Exact L2 pairing. Per-cell partial sums are reduced in cell order.
    pub fn inner_product_with(&self, g: &PPFunction, exec: Exec) -> f64 {
        let idx: Vec<usize> = (0..self.cells.len()).collect();
        let partial = exec.map(&idx, |&i| {
            let mut s = 0.0;
            for part in g.cover(&self.cells[i]) {
                if let Some(j) = part.cell {
                    let a = self.restricted(i, &part.cube);
                    let b = g.restricted(j, &part.cube);
                    s += a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            s
        });
        partial.iter().sum()
    }

    /// Coefficients of the L2(q) projection onto total degree `<= d`, in the
    /// orthonormal basis of `q`.
    pub fn project_coeffs(&self, q: &DyadicBox, d: usize) -> Result<Vec<f64>> {
        let parts = self.cover_box(q)?;
        Ok(self.project_parts(q, d, &parts))
    }

    fn project_parts(&self, q: &DyadicBox, d: usize, parts: &[Part]) -> Vec<f64> {
        let set_q = MultiIndexSet::get(self.dim(), d);
        let top = d.max(self.degree);
        let mut out = vec![0.0; set_q.len()];
        for part in parts {
            let Some(i) = part.cell else { continue };
            let y = self.restricted(i, &part.cube);
            let t = TensorMap::new(q, &part.cube.corners(), top);
            let v = t.adjoint(&set_q, &y, &self.set);
            out.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        out
    }

    /// `p_Q(f)`.
    pub fn project_poly(&self, q: &DyadicBox, d: usize) -> Result<PolyOnCell> {
        Ok(PolyOnCell { host: q.clone(), degree: d, coeffs: self.project_coeffs(q, d)? })
    }

    /// `int_q |f - p_q(f)|^2` and the projection coefficients. Every term of
    /// the sum is a nonnegative square, so polynomial inputs give exactly 0.
    pub fn residual_energy(&self, q: &DyadicBox, d: usize) -> Result<(f64, Vec<f64>)> {
        let parts = self.cover_box(q)?;
        let c = self.project_parts(q, d, &parts);
        let set_q = MultiIndexSet::get(self.dim(), d);
        let top = d.max(self.degree);
        let set_top = MultiIndexSet::get(self.dim(), top);
        let mut e = 0.0;
        for part in &parts {
            let p = TensorMap::new(q, &part.cube.corners(), top).forward(&set_q, &c, &set_top);
            match part.cell {
                Some(i) => {
                    let mut g = self.restricted(i, &part.cube);
                    g.resize(set_top.len(), 0.0);
                    e += g.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                }
                None => e += p.iter().map(|v| v * v).sum::<f64>(),
            }
        }
        Ok((e, c))
    }

    /// `(int_q f(y) y^beta dy)` for `|beta| <= d`, in graded order.
    pub fn moments(&self, q: &DyadicBox, d: usize) -> Result<Vec<f64>> {
        self.moments_about(q, d, &vec![0.0; self.dim()])
    }

    /// Moments against `(y - center(q))^beta`.
    pub fn centered_moments(&self, q: &DyadicBox, d: usize) -> Result<Vec<f64>> {
        let c: Vec<f64> = q.center().iter().map(|v| v.to_f64()).collect();
        self.moments_about(q, d, &c)
    }

    fn moments_about(&self, q: &DyadicBox, d: usize, origin: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim();
        let set_m = MultiIndexSet::get(dim, d);
        let rule = gauss_legendre((self.degree + d) / 2 + 1);
        let mut out = vec![0.0; set_m.len()];
        for part in self.cover_box(q)? {
            let Some(i) = part.cell else { continue };
            let b = part.cube.corners();
            let coeffs = self.restricted(i, &part.cube);
            let axes: Vec<Vec<(f64, f64)>> =
                (0..dim).map(|a| rule.on_interval(b.lo_f64(a), b.side_f64(a)).collect()).collect();
            for_each_tensor_point(&axes, |x, w| {
                let f = eval_on_box(&self.set, &coeffs, &b, x);
                for (k, beta) in set_m.iter().enumerate() {
                    let mono: f64 =
                        beta.iter().enumerate().map(|(a, &e)| (x[a] - origin[a]).powi(e as i32)).product();
                    out[k] += w * f * mono;
                }
            });
        }
        Ok(out)
    }

    /// `x -> 2^(n s) f(2^n x + shift)`. Cells coarser than the alignment of
    /// `shift` are split first so every image cell is dyadic.
    pub fn dilate_translate(&self, n: i32, shift: &[Dyadic], s: f64) -> Result<PPFunction> {
        if shift.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: shift.len() });
        }
        let align = shift.iter().filter_map(|v| v.valuation()).min();
        let factor = (n as f64 * (s - self.dim() as f64 / 2.0)).exp2();
        let mut cells = Vec::with_capacity(self.cells.len());
        let mut finest = -self.mesh_level;
        for (i, c) in self.cells.iter().enumerate() {
            let pieces = match align {
                Some(v) if c.level > v => {
                    let count = 1u64.checked_shl(((c.level - v) as u32) * self.dim() as u32).unwrap_or(u64::MAX);
                    if count > MAX_ENUMERATION {
                        return Err(Error::ResourceLimit(format!("splitting {c:?} to level {v}")));
                    }
                    c.descendants(v)
                }
                _ => vec![c.clone()],
            };
            for p in pieces {
                finest = finest.min(p.level);
                let image = p.corners().preimage(n, shift);
                let cube = match crate::dyadic::Cube::from_box(crate::dyadic::Family::D, &image) {
                    Some(crate::dyadic::Cube::Dyadic(d)) => d,
                    _ => unreachable!("aligned dyadic cube maps to a dyadic cube"),
                };
                let v: Vec<f64> = self.restricted(i, &p).into_iter().map(|x| x * factor).collect();
                cells.push((cube, v));
            }
        }
        PPFunction::from_cells(self.domain.preimage(n, shift), -(finest - n), self.degree, cells)
    }

    /// The function times the indicator of the dyadic-cornered box `q`.
    pub fn restrict_to_box(&self, q: &DyadicBox) -> Result<PPFunction> {
        let mut cells = Vec::new();
        let mut finest = -self.mesh_level;
        for part in self.cover_box(q)? {
            if let Some(i) = part.cell {
                finest = finest.min(part.cube.level);
                let v = self.restricted(i, &part.cube);
                cells.push((part.cube, v));
            }
        }
        let domain = self.domain.intersection(q).unwrap_or_else(|| q.clone());
        let domain = if cells.iter().all(|(c, _)| domain.contains_box(&c.corners())) { domain } else { q.clone() };
        PPFunction::from_cells(domain, -finest, self.degree, cells)
    }

    pub fn to_coeff_file(&self) -> CoeffFile {
        CoeffFile {
            dim: self.dim(),
            mesh_level: self.mesh_level,
            degree: self.degree,
            domain: self.domain.clone(),
            cells: self
                .cells()
                .map(|(c, v)| CoeffCell { n: c.level, k: c.index.to_vec(), c: v.to_vec() })
                .collect(),
        }
    }

    pub fn from_coeff_file(f: CoeffFile) -> Result<PPFunction> {
        if f.domain.dim() != f.dim {
            return Err(Error::DimensionMismatch { expected: f.dim, got: f.domain.dim() });
        }
        let cells = f.cells.into_iter().map(|c| (DyadicCube::new(c.n, Index::from_vec(c.k)), c.c)).collect();
        PPFunction::from_cells(f.domain, f.mesh_level, f.degree, cells)
    }

    pub fn write_coeffs(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(&self.to_coeff_file())?;
        std::fs::write(path, s).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }

    pub fn read_coeffs(path: &Path) -> Result<PPFunction> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_coeff_file(serde_json::from_str(&s)?)
    }
}

/// Coefficient file layout: header plus one entry per cell in `(n, k)`
/// order, `c` in graded multi-index order of the cell's orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffFile {
    pub dim: usize,
    pub mesh_level: i32,
    pub degree: usize,
    pub domain: DyadicBox,
    pub cells: Vec<CoeffCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffCell {
    pub n: i32,
    pub k: Vec<i64>,
    pub c: Vec<f64>,
}

/// Maximal dyadic cubes tiling `b`.
pub(crate) fn tile(b: &DyadicBox) -> Result<Vec<DyadicCube>> {
    let top = b.enclosing_level();
    b.dyadic_tiling(b.alignment_level(top))
}

/// Visit every point of a tensor grid given per-axis `(node, weight)` lists.
pub(crate) fn for_each_tensor_point(axes: &[Vec<(f64, f64)>], mut f: impl FnMut(&[f64], f64)) {
    let dim = axes.len();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    loop {
        let mut w = 1.0;
        for a in 0..dim {
            let (xa, wa) = axes[a][idx[a]];
            x[a] = xa;
            w *= wa;
        }
        f(&x, w);
        let mut a = dim;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
}
