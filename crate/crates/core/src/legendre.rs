//! Orthonormal tensor Legendre bases on boxes, truncated to total degree,
//! and the exact linear maps between bases on different boxes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use smallvec::SmallVec;

use crate::dyadic::DyadicBox;
use crate::quadrature::gauss_legendre;

pub type MultiIndex = SmallVec<[u32; 4]>;

/// `{beta : |beta| <= degree}` in graded order (total degree, then
/// lexicographic).
#[derive(Debug, PartialEq, Eq)]
pub struct MultiIndexSet {
    dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl MultiIndexSet {
    fn build(dim: usize, degree: usize) -> Self {
        let mut indices = Vec::new();
        for total in 0..=degree {
            let mut cur = MultiIndex::from_elem(0, dim);
            collect(&mut cur, 0, total as u32, &mut indices);
        }
        let lookup = indices.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        MultiIndexSet { dim, degree, indices, lookup }
    }

    /// Shared instance for `(dim, degree)`.
    pub fn get(dim: usize, degree: usize) -> Arc<MultiIndexSet> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MultiIndexSet>>>> = OnceLock::new();
        let mut map = CACHE.get_or_init(Default::default).lock().expect("multi-index cache poisoned");
        map.entry((dim, degree)).or_insert_with(|| Arc::new(Self::build(dim, degree))).clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    pub fn get_index(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn position(&self, beta: &[u32]) -> Option<usize> {
        self.lookup.get(beta).copied()
    }
}

fn collect(cur: &mut MultiIndex, axis: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if axis + 1 == cur.len() {
        cur[axis] = remaining;
        out.push(cur.clone());
        return;
    }
    // lexicographic ascending in the first axis
    for v in 0..=remaining {
        cur[axis] = v;
        collect(cur, axis + 1, remaining - v, out);
    }
}

/// `C(dim + degree, dim)`.
pub fn poly_space_dim(dim: usize, degree: usize) -> usize {
    (1..=dim).fold(1usize, |acc, i| acc * (degree + i) / i)
}

/// `P_0(t) .. P_deg(t)`.
pub fn legendre_values(deg: usize, t: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if deg >= 1 {
        out[1] = t;
    }
    for k in 2..=deg {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * t * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// Orthonormal Legendre functions of the interval `[lo, lo + h]` at `x`.
pub fn orthonormal_values(deg: usize, x: f64, lo: f64, h: f64, out: &mut [f64]) {
    let t = 2.0 * (x - lo) / h - 1.0;
    legendre_values(deg, t, out);
    for (j, v) in out.iter_mut().enumerate().take(deg + 1) {
        *v *= ((2 * j + 1) as f64 / h).sqrt();
    }
}

/// Evaluate `sum_beta c_beta phi_beta(x)` for the orthonormal basis of `b`.
pub fn eval_on_box(set: &MultiIndexSet, coeffs: &[f64], b: &DyadicBox, x: &[f64]) -> f64 {
    let deg = set.degree();
    let per_axis: Vec<Vec<f64>> = (0..set.dim())
        .map(|i| {
            let mut v = vec![0.0; deg + 1];
            orthonormal_values(deg, x[i], b.lo_f64(i), b.side_f64(i), &mut v);
            v
        })
        .collect();
    set.iter()
        .zip(coeffs)
        .map(|(beta, c)| c * beta.iter().enumerate().map(|(i, &b)| per_axis[i][b as usize]).product::<f64>())
        .sum()
}

/// One-dimensional change of basis: `m[i][j] = int_to phi^from_i phi^to_j`.
#[derive(Debug, Clone)]
struct AxisMap {
    identity: bool,
    size: usize,
    m: Vec<f64>,
}

impl AxisMap {
    fn new(deg: usize, from: (f64, f64), to: (f64, f64)) -> Self {
        let size = deg + 1;
        if from == to {
            return AxisMap { identity: true, size, m: Vec::new() };
        }
        let rule = gauss_legendre(size);
        let mut m = vec![0.0; size * size];
        let mut a = vec![0.0; size];
        let mut b = vec![0.0; size];
        for (x, w) in rule.on_interval(to.0, to.1) {
            orthonormal_values(deg, x, from.0, from.1, &mut a);
            orthonormal_values(deg, x, to.0, to.1, &mut b);
            for i in 0..size {
                for j in 0..=i {
                    m[i * size + j] += w * a[i] * b[j];
                }
            }
        }
        AxisMap { identity: false, size, m }
    }

    #[inline]
    fn get(&self, i: u32, j: u32) -> f64 {
        if self.identity {
            if i == j {
                1.0
            } else {
                0.0
            }
        } else if j > i {
            0.0
        } else {
            self.m[i as usize * self.size + j as usize]
        }
    }
}

/// Maps polynomial coefficients from the orthonormal basis of one box to the
/// orthonormal basis of another. Restricting a polynomial to a sub-box and
/// extending it beyond its box are both exact; mapping into a lower degree
/// is the L2 projection on the target box.
#[derive(Debug, Clone)]
pub struct TensorMap {
    axes: Vec<AxisMap>,
}

impl TensorMap {
    pub fn new(from: &DyadicBox, to: &DyadicBox, degree: usize) -> Self {
        let axes = (0..from.dim())
            .map(|i| {
                AxisMap::new(degree, (from.lo_f64(i), from.side_f64(i)), (to.lo_f64(i), to.side_f64(i)))
            })
            .collect();
        TensorMap { axes }
    }

    pub fn is_identity(&self) -> bool {
        self.axes.iter().all(|a| a.identity)
    }

    #[inline]
    fn entry(&self, beta: &[u32], gamma: &[u32]) -> f64 {
        let mut v = 1.0;
        for (i, ax) in self.axes.iter().enumerate() {
            v *= ax.get(beta[i], gamma[i]);
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    /// Coefficients on the target box.
    pub fn forward(&self, set_in: &MultiIndexSet, c: &[f64], set_out: &MultiIndexSet) -> Vec<f64> {
        let mut out = vec![0.0; set_out.len()];
        if self.is_identity() {
            for (beta, v) in set_in.iter().zip(c) {
                if let Some(j) = set_out.position(beta) {
                    out[j] = *v;
                }
            }
            return out;
        }
        for (beta, &cb) in set_in.iter().zip(c) {
            if cb == 0.0 {
                continue;
            }
            for (j, gamma) in set_out.iter().enumerate() {
                out[j] += cb * self.entry(beta, gamma);
            }
        }
        out
    }

    /// Transpose of [`TensorMap::forward`]: for coefficients `y` of a
    /// polynomial on the target box, returns `<phi^from_beta, y>` over the
    /// target box.
    pub fn adjoint(&self, set_in: &MultiIndexSet, y: &[f64], set_out: &MultiIndexSet) -> Vec<f64> {
        let mut out = vec![0.0; set_in.len()];
        if self.is_identity() {
            for (i, beta) in set_in.iter().enumerate() {
                if let Some(j) = set_out.position(beta) {
                    out[i] = y[j];
                }
            }
            return out;
        }
        for (i, beta) in set_in.iter().enumerate() {
            let mut acc = 0.0;
            for (gamma, &yg) in set_out.iter().zip(y) {
                if yg != 0.0 {
                    acc += yg * self.entry(beta, gamma);
                }
            }
            out[i] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(lo: &[f64], hi: &[f64]) -> DyadicBox {
        DyadicBox::from_f64(lo, hi).unwrap()
    }

    #[test]
    fn set_sizes_and_order() {
        assert_eq!(MultiIndexSet::get(2, 1).len(), 3);
        assert_eq!(MultiIndexSet::get(3, 2).len(), poly_space_dim(3, 2));
        assert_eq!(poly_space_dim(3, 2), 10);
        let s = MultiIndexSet::get(2, 1);
        let v: Vec<Vec<u32>> = s.iter().map(|b| b.to_vec()).collect();
        assert_eq!(v, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn restriction_then_evaluation_agrees() {
        let set = MultiIndexSet::get(2, 3);
        let from = bx(&[-1.0, 0.0], &[1.0, 2.0]);
        let to = bx(&[0.25, 0.5], &[0.5, 0.75]);
        let c: Vec<f64> = (0..set.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let m = TensorMap::new(&from, &to, 3);
        let c2 = m.forward(&set, &c, &set);
        for x in [[0.3, 0.6], [0.49, 0.51], [0.26, 0.74]] {
            let a = eval_on_box(&set, &c, &from, &x);
            let b = eval_on_box(&set, &c2, &to, &x);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn orthonormality_on_box() {
        let set = MultiIndexSet::get(1, 4);
        let b = bx(&[2.0], &[2.5]);
        let rule = gauss_legendre(6);
        for i in 0..5 {
            for j in 0..5 {
                let mut v = [0.0; 5];
                let s: f64 = rule
                    .on_interval(2.0, 0.5)
                    .map(|(x, w)| {
                        orthonormal_values(4, x, 2.0, 0.5, &mut v);
                        w * v[i] * v[j]
                    })
                    .sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
        assert_eq!(set.len(), 5);
        let _ = b;
    }
}
