//! Exact dyadic geometry.
//!
//! Coordinates are dyadic rationals `m * 2^e` held exactly, so cube
//! membership, containment and tiling never depend on floating-point
//! rounding. Cubes are identified by integer `(level, index)` pairs:
//!
//! * a [`DyadicCube`] `(n, k)` is `prod_i [(k_i - 1) 2^n, k_i 2^n]`;
//! * a [`SpecialCube`] `(n, k)` is `prod_i [(k_i - 1) 2^n, (k_i + 1) 2^n]`,
//!   of side `2^(n+1)`. Special cubes with all `k_i` odd are dyadic.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Integer index vector of a cube; inline for dimensions up to 4.
pub type Index = SmallVec<[i64; 4]>;

/// Upper bound on the number of cubes materialized by a single enumeration.
pub const MAX_ENUMERATION: u64 = 1 << 26;

/// An exact dyadic rational `mant * 2^exp`, normalized so that `mant` is odd
/// (or the value is zero with `exp == 0`).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mant: i64,
    exp: i32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { mant: 0, exp: 0 };

    pub fn new(mant: i64, exp: i32) -> Self {
        if mant == 0 {
            return Self::ZERO;
        }
        let tz = mant.trailing_zeros() as i32;
        Dyadic { mant: mant >> tz, exp: exp + tz }
    }

    fn from_wide(mant: i128, exp: i32) -> Self {
        if mant == 0 {
            return Self::ZERO;
        }
        let tz = mant.trailing_zeros();
        let m = i64::try_from(mant >> tz).expect("dyadic mantissa exceeds 64 bits");
        Dyadic { mant: m, exp: exp + tz as i32 }
    }

    pub fn int(v: i64) -> Self {
        Self::new(v, 0)
    }

    pub fn pow2(e: i32) -> Self {
        Dyadic { mant: 1, exp: e }
    }

    /// Exact conversion; every finite double is a dyadic rational.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::ZERO);
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i64;
        let (m, e) = if biased == 0 { (frac, -1074) } else { (frac | (1 << 52), biased - 1075) };
        Some(Self::new(if negative { -m } else { m }, e))
    }

    pub fn to_f64(self) -> f64 {
        self.mant as f64 * pow2f(self.exp)
    }

    pub fn mantissa(self) -> i64 {
        self.mant
    }

    pub fn exponent(self) -> i32 {
        self.exp
    }

    pub fn is_zero(self) -> bool {
        self.mant == 0
    }

    pub fn signum(self) -> i64 {
        self.mant.signum()
    }

    pub fn abs(self) -> Self {
        Dyadic { mant: self.mant.abs(), exp: self.exp }
    }

    pub fn mul_pow2(self, e: i32) -> Self {
        if self.is_zero() {
            self
        } else {
            Dyadic { mant: self.mant, exp: self.exp + e }
        }
    }

    pub fn mul_int(self, v: i64) -> Self {
        Self::from_wide(self.mant as i128 * v as i128, self.exp)
    }

    /// Largest `e` with `self` a multiple of `2^e`; `None` for zero.
    pub fn valuation(self) -> Option<i32> {
        (!self.is_zero()).then_some(self.exp)
    }

    pub fn is_multiple_of_pow2(self, e: i32) -> bool {
        self.is_zero() || self.exp >= e
    }

    pub fn is_pow2(self) -> bool {
        self.mant == 1
    }

    /// `floor(log2 |self|)`; panics on zero.
    pub fn log2_floor(self) -> i32 {
        assert!(!self.is_zero(), "log2 of zero");
        self.exp + 63 - self.mant.unsigned_abs().leading_zeros() as i32
    }

    /// `floor(self / 2^e)`.
    pub fn floor_div_pow2(self, e: i32) -> i64 {
        let shift = self.exp - e;
        if shift >= 0 {
            assert!(shift < 63 && self.mant.unsigned_abs() < (1u64 << (63 - shift)), "dyadic index overflow");
            self.mant << shift
        } else if -shift >= 63 {
            if self.mant < 0 {
                -1
            } else {
                0
            }
        } else {
            self.mant >> (-shift)
        }
    }

    /// `ceil(self / 2^e)`.
    pub fn ceil_div_pow2(self, e: i32) -> i64 {
        -(-self).floor_div_pow2(e)
    }

    fn aligned(self, other: Dyadic) -> (i128, i128, i32) {
        if self.is_zero() {
            return (0, other.mant as i128, other.exp);
        }
        if other.is_zero() {
            return (self.mant as i128, 0, self.exp);
        }
        let e = self.exp.min(other.exp);
        let (sa, sb) = (self.exp - e, other.exp - e);
        assert!(sa <= 62 && sb <= 62, "dyadic operands too far apart in scale");
        ((self.mant as i128) << sa, (other.mant as i128) << sb, e)
    }
}

pub(crate) fn pow2f(e: i32) -> f64 {
    if (-1022..=1023).contains(&e) {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        2f64.powi(e)
    }
}

impl std::ops::Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(rhs);
        Dyadic::from_wide(a + b, e)
    }
}

impl std::ops::Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        self + (-rhs)
    }
}

impl std::ops::Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mant: -self.mant, exp: self.exp }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb || sa == 0 {
            return sa.cmp(&sb);
        }
        let (la, lb) = (self.log2_floor(), other.log2_floor());
        if la != lb {
            return if sa > 0 { la.cmp(&lb) } else { lb.cmp(&la) };
        }
        let (a, b, _) = self.aligned(*other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mant, self.exp)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl Serialize for Dyadic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        Dyadic::from_f64(x).ok_or_else(|| serde::de::Error::custom("non-finite coordinate"))
    }
}

/// Axis-aligned box with dyadic-rational corners.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr")]
pub struct DyadicBox {
    lo: Vec<Dyadic>,
    hi: Vec<Dyadic>,
}

#[derive(Deserialize)]
struct BoxRepr {
    lo: Vec<Dyadic>,
    hi: Vec<Dyadic>,
}

impl TryFrom<BoxRepr> for DyadicBox {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        DyadicBox::new(r.lo, r.hi)
    }
}

impl DyadicBox {
    pub fn new(lo: Vec<Dyadic>, hi: Vec<Dyadic>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.is_empty() {
            return Err(Error::DegenerateBox("zero-dimensional box".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::DegenerateBox("lower corner exceeds upper corner".into()));
        }
        Ok(DyadicBox { lo, hi })
    }

    pub fn from_f64(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let conv = |v: &[f64]| -> Result<Vec<Dyadic>> {
            v.iter()
                .map(|&x| Dyadic::from_f64(x).ok_or_else(|| Error::param("box", "non-finite coordinate")))
                .collect()
        };
        Self::new(conv(lo)?, conv(hi)?)
    }

    /// The cube `[-r, r]^dim` with `r = 2^e`.
    pub fn centered(dim: usize, e: i32) -> Self {
        let r = Dyadic::pow2(e);
        DyadicBox { lo: vec![-r; dim], hi: vec![r; dim] }
    }

    /// `[-1, 1]^dim`, the reference special cube.
    pub fn q0(dim: usize) -> Self {
        Self::centered(dim, 0)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[Dyadic] {
        &self.lo
    }

    pub fn hi(&self) -> &[Dyadic] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> Dyadic {
        self.hi[axis] - self.lo[axis]
    }

    /// Common side length if all sides agree.
    pub fn cube_side(&self) -> Option<Dyadic> {
        let s = self.side(0);
        (1..self.dim()).all(|i| self.side(i) == s).then_some(s)
    }

    pub fn is_degenerate(&self) -> bool {
        (0..self.dim()).any(|i| self.side(i).is_zero())
    }

    pub fn lo_f64(&self, axis: usize) -> f64 {
        self.lo[axis].to_f64()
    }

    pub fn hi_f64(&self, axis: usize) -> f64 {
        self.hi[axis].to_f64()
    }

    pub fn side_f64(&self, axis: usize) -> f64 {
        self.side(axis).to_f64()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side_f64(i)).product()
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|i| self.side_f64(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<Dyadic> {
        self.lo.iter().zip(&self.hi).map(|(&a, &b)| (a + b).mul_pow2(-1)).collect()
    }

    pub fn contains_box(&self, other: &DyadicBox) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| self.lo_f64(i) <= v && v <= self.hi_f64(i))
    }

    pub fn interiors_intersect(&self, other: &DyadicBox) -> bool {
        (0..self.dim()).all(|i| self.lo[i] < other.hi[i] && other.lo[i] < self.hi[i])
    }

    /// Intersection, if it has nonempty interior.
    pub fn intersection(&self, other: &DyadicBox) -> Option<DyadicBox> {
        if !self.interiors_intersect(other) {
            return None;
        }
        let lo = self.lo.iter().zip(&other.lo).map(|(a, b)| *a.max(b)).collect();
        let hi = self.hi.iter().zip(&other.hi).map(|(a, b)| *a.min(b)).collect();
        Some(DyadicBox { lo, hi })
    }

    pub fn hull(&self, other: &DyadicBox) -> DyadicBox {
        let lo = self.lo.iter().zip(&other.lo).map(|(a, b)| *a.min(b)).collect();
        let hi = self.hi.iter().zip(&other.hi).map(|(a, b)| *a.max(b)).collect();
        DyadicBox { lo, hi }
    }

    /// Preimage under `x -> 2^n x + shift`.
    pub fn preimage(&self, n: i32, shift: &[Dyadic]) -> DyadicBox {
        let map = |v: &[Dyadic]| v.iter().zip(shift).map(|(&c, &s)| (c - s).mul_pow2(-n)).collect();
        DyadicBox { lo: map(&self.lo), hi: map(&self.hi) }
    }

    /// Smallest level `L` with `2^L >= ` every side.
    pub fn enclosing_level(&self) -> i32 {
        (0..self.dim())
            .map(|i| {
                let s = self.side(i);
                if s.is_zero() {
                    i32::MIN
                } else if s.is_pow2() {
                    s.log2_floor()
                } else {
                    s.log2_floor() + 1
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// Coarsest level `l` such that every corner is a multiple of `2^l`
    /// (capped at `cap`).
    pub fn alignment_level(&self, cap: i32) -> i32 {
        self.lo
            .iter()
            .chain(&self.hi)
            .filter_map(|c| c.valuation())
            .fold(cap, i32::min)
    }

    /// Maximal dyadic cubes of level in `[min_level, ..]` tiling this box.
    /// Fails when the box corners are finer than `2^min_level`.
    pub fn dyadic_tiling(&self, min_level: i32) -> Result<Vec<DyadicCube>> {
        for c in self.lo.iter().chain(&self.hi) {
            if !c.is_multiple_of_pow2(min_level) {
                return Err(Error::NonDyadicBreakpoint {
                    value: c.to_f64(),
                    level: min_level,
                    mesh_level: -min_level,
                });
            }
        }
        let mut out = Vec::new();
        if self.is_degenerate() {
            return Ok(out);
        }
        let top = self.enclosing_level();
        let mut stack: Vec<DyadicCube> = cubes_meeting(self, top);
        stack.reverse();
        while let Some(c) = stack.pop() {
            let b = c.corners();
            if !b.interiors_intersect(self) {
                continue;
            }
            if self.contains_box(&b) {
                out.push(c);
                if out.len() as u64 > MAX_ENUMERATION {
                    return Err(Error::ResourceLimit("dyadic tiling too large".into()));
                }
            } else {
                let mut ch = c.children();
                ch.reverse();
                stack.extend(ch);
            }
        }
        out.sort();
        Ok(out)
    }
}

impl fmt::Debug for DyadicBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for DyadicBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.dim()).map(|i| format!("[{}, {}]", self.lo[i], self.hi[i])).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// All level-`n` dyadic cubes whose interior meets `b`, in lexicographic order.
fn cubes_meeting(b: &DyadicBox, n: i32) -> Vec<DyadicCube> {
    let ranges = level_ranges(Family::D, n, b);
    product_indices(&ranges).into_iter().map(|k| DyadicCube::new(n, k)).collect()
}

pub(crate) fn product_indices(ranges: &[(i64, i64)]) -> Vec<Index> {
    if ranges.iter().any(|(a, b)| a > b) {
        return Vec::new();
    }
    let mut out: Vec<Index> = vec![Index::new()];
    for &(a, b) in ranges {
        let mut next = Vec::with_capacity(out.len() * (b - a + 1) as usize);
        for prefix in &out {
            for k in a..=b {
                let mut v = prefix.clone();
                v.push(k);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// A cube of the dyadic family D.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub level: i32,
    pub index: Index,
}

impl DyadicCube {
    pub fn new(level: i32, index: impl AsRef<[i64]>) -> Self {
        DyadicCube { level, index: Index::from_slice(index.as_ref()) }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> Dyadic {
        Dyadic::pow2(self.level)
    }

    pub fn corners(&self) -> DyadicBox {
        let lo = self.index.iter().map(|&k| Dyadic::new(k - 1, self.level)).collect();
        let hi = self.index.iter().map(|&k| Dyadic::new(k, self.level)).collect();
        DyadicBox { lo, hi }
    }

    pub fn parent(&self) -> DyadicCube {
        self.ancestor(self.level + 1)
    }

    /// The unique cube at `level >= self.level` containing `self`.
    pub fn ancestor(&self, level: i32) -> DyadicCube {
        debug_assert!(level >= self.level);
        let s = (level - self.level) as u32;
        if s == 0 {
            return self.clone();
        }
        let index = self
            .index
            .iter()
            .map(|&k| if s >= 63 { i64::from(k > 0) } else { -((-k).div_euclid(1i64 << s)) })
            .collect();
        DyadicCube { level, index }
    }

    /// The `2^N` children in lexicographic index order.
    pub fn children(&self) -> Vec<DyadicCube> {
        let n = self.dim();
        (0..1usize << n)
            .map(|code| {
                let index = self
                    .index
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| 2 * k - 1 + ((code >> (n - 1 - j)) & 1) as i64)
                    .collect();
                DyadicCube { level: self.level - 1, index }
            })
            .collect()
    }

    /// All descendants at `level <= self.level`, lexicographic.
    pub fn descendants(&self, level: i32) -> Vec<DyadicCube> {
        let s = (self.level - level) as u32;
        let ranges: Vec<(i64, i64)> =
            self.index.iter().map(|&k| (((k - 1) << s) + 1, k << s)).collect();
        product_indices(&ranges).into_iter().map(|k| DyadicCube::new(level, k)).collect()
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.level <= self.level && other.ancestor(self.level) == *self
    }

    /// Level-`level` cube owning `x` under the half-open convention.
    pub fn containing_point(x: &[f64], level: i32) -> DyadicCube {
        let scale = pow2f(-level);
        DyadicCube { level, index: x.iter().map(|&v| (v * scale).floor() as i64 + 1).collect() }
    }

    pub fn as_special(&self) -> SpecialCube {
        SpecialCube { level: self.level - 1, index: self.index.iter().map(|&k| 2 * k - 1).collect() }
    }
}

impl fmt::Debug for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D(n={}, k={:?})", self.level, self.index.as_slice())
    }
}

/// A cube of the shifted family D0: side `2^(level+1)`, centered at `index * 2^level`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpecialCube {
    pub level: i32,
    pub index: Index,
}

impl SpecialCube {
    pub fn new(level: i32, index: impl AsRef<[i64]>) -> Self {
        SpecialCube { level, index: Index::from_slice(index.as_ref()) }
    }

    /// `[-1, 1]^dim`.
    pub fn q0(dim: usize) -> Self {
        SpecialCube { level: 0, index: smallvec::smallvec![0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn corners(&self) -> DyadicBox {
        let lo = self.index.iter().map(|&k| Dyadic::new(k - 1, self.level)).collect();
        let hi = self.index.iter().map(|&k| Dyadic::new(k + 1, self.level)).collect();
        DyadicBox { lo, hi }
    }

    /// The `2^N` dyadic subcubes; binary left/right code with left = 0 and the
    /// first axis most significant, ascending.
    pub fn dyadic_subcubes(&self) -> Vec<DyadicCube> {
        let n = self.dim();
        (0..1usize << n)
            .map(|code| {
                let index = self
                    .index
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| k + ((code >> (n - 1 - j)) & 1) as i64)
                    .collect();
                DyadicCube { level: self.level, index }
            })
            .collect()
    }

    /// The dyadic cube this special cube coincides with, if any.
    pub fn as_dyadic(&self) -> Option<DyadicCube> {
        self.index.iter().all(|k| k.rem_euclid(2) == 1).then(|| DyadicCube {
            level: self.level + 1,
            index: self.index.iter().map(|&k| (k + 1) / 2).collect(),
        })
    }

    /// All special cubes of the same level having `c` as a dyadic subcube.
    pub(crate) fn containing_subcube(c: &DyadicCube) -> Vec<SpecialCube> {
        let ranges: Vec<(i64, i64)> = c.index.iter().map(|&k| (k - 1, k)).collect();
        product_indices(&ranges).into_iter().map(|k| SpecialCube::new(c.level, k)).collect()
    }
}

impl fmt::Debug for SpecialCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D0(n={}, k={:?})", self.level, self.index.as_slice())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    D,
    D0,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::D => "D",
            Family::D0 => "D0",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D" => Ok(Family::D),
            "D0" => Ok(Family::D0),
            _ => Err(Error::param("family", format!("expected D or D0, got `{s}`"))),
        }
    }
}

/// A member of either family, ordered by `(level, index)`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Cube {
    Dyadic(DyadicCube),
    Special(SpecialCube),
}

impl Cube {
    pub fn family(&self) -> Family {
        match self {
            Cube::Dyadic(_) => Family::D,
            Cube::Special(_) => Family::D0,
        }
    }

    pub fn level(&self) -> i32 {
        match self {
            Cube::Dyadic(c) => c.level,
            Cube::Special(c) => c.level,
        }
    }

    pub fn index(&self) -> &Index {
        match self {
            Cube::Dyadic(c) => &c.index,
            Cube::Special(c) => &c.index,
        }
    }

    pub fn corners(&self) -> DyadicBox {
        match self {
            Cube::Dyadic(c) => c.corners(),
            Cube::Special(c) => c.corners(),
        }
    }

    /// Dyadic pieces the cube is made of (itself, or the 2^N subcubes).
    pub fn dyadic_parts(&self) -> Vec<DyadicCube> {
        match self {
            Cube::Dyadic(c) => vec![c.clone()],
            Cube::Special(c) => c.dyadic_subcubes(),
        }
    }

    pub fn key(&self) -> (i32, &[i64]) {
        (self.level(), self.index().as_slice())
    }

    /// Recognize a box as a member of `family`.
    pub fn from_box(family: Family, b: &DyadicBox) -> Option<Cube> {
        let side = b.cube_side()?;
        if side.is_zero() || !side.is_pow2() {
            return None;
        }
        let e = side.log2_floor();
        match family {
            Family::D => {
                let index: Option<Index> = b
                    .lo()
                    .iter()
                    .map(|c| c.is_multiple_of_pow2(e).then(|| c.floor_div_pow2(e) + 1))
                    .collect();
                Some(Cube::Dyadic(DyadicCube::new(e, index?)))
            }
            Family::D0 => {
                let n = e - 1;
                let index: Option<Index> = b
                    .lo()
                    .iter()
                    .map(|c| c.is_multiple_of_pow2(n).then(|| c.floor_div_pow2(n) + 1))
                    .collect();
                Some(Cube::Special(SpecialCube::new(n, index?)))
            }
        }
    }
}

impl Serialize for Cube {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CubeRepr { family: self.family(), n: self.level(), k: self.index().to_vec() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cube {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CubeRepr::deserialize(d)?;
        Ok(match r.family {
            Family::D => Cube::Dyadic(DyadicCube::new(r.n, Index::from_vec(r.k))),
            Family::D0 => Cube::Special(SpecialCube::new(r.n, Index::from_vec(r.k))),
        })
    }
}

impl Serialize for DyadicCube {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CubeRepr { family: Family::D, n: self.level, k: self.index.to_vec() }.serialize(s)
    }
}

impl Serialize for SpecialCube {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CubeRepr { family: Family::D0, n: self.level, k: self.index.to_vec() }.serialize(s)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CubeRepr {
    family: Family,
    n: i32,
    k: Vec<i64>,
}

/// Finite truncation of a supremum over all cubes: levels `n_min..=n_max`
/// (in each family's own level convention) and a bounding box.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleWindow {
    pub n_min: i32,
    pub n_max: i32,
    #[serde(rename = "box")]
    pub bbox: DyadicBox,
}

impl ScaleWindow {
    pub fn new(n_min: i32, n_max: i32, bbox: DyadicBox) -> Result<Self> {
        if n_min > n_max {
            return Err(Error::param("window", format!("n_min {n_min} > n_max {n_max}")));
        }
        Ok(ScaleWindow { n_min, n_max, bbox })
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<i32> {
        self.n_min..=self.n_max
    }

    pub fn contains_level(&self, n: i32) -> bool {
        self.levels().contains(&n)
    }

    /// The window seen by `x -> g(2^j x)`: levels and box shifted by `-j`.
    pub fn dilated(&self, j: i32) -> ScaleWindow {
        let zero = vec![Dyadic::ZERO; self.bbox.dim()];
        ScaleWindow { n_min: self.n_min - j, n_max: self.n_max - j, bbox: self.bbox.preimage(j, &zero) }
    }
}

/// Per-axis index ranges of the level-`n` cubes of `family` whose interior
/// meets the interior of `b`.
pub(crate) fn level_ranges(family: Family, n: i32, b: &DyadicBox) -> Vec<(i64, i64)> {
    (0..b.dim())
        .map(|i| {
            let (lo, hi) = (b.lo()[i], b.hi()[i]);
            if lo == hi {
                return (1, 0);
            }
            match family {
                Family::D => (lo.floor_div_pow2(n) + 1, hi.ceil_div_pow2(n)),
                Family::D0 => (lo.floor_div_pow2(n), hi.ceil_div_pow2(n)),
            }
        })
        .collect()
}

/// All cubes of `family` in the window, ordered by `(level, index)`.
pub fn enumerate_cubes(family: Family, w: &ScaleWindow) -> Result<Vec<Cube>> {
    let mut total: u64 = 0;
    for n in w.levels() {
        let count = level_ranges(family, n, &w.bbox)
            .iter()
            .map(|&(a, b)| if a > b { 0 } else { (b - a + 1) as u64 })
            .try_fold(1u64, |acc, c| acc.checked_mul(c))
            .unwrap_or(u64::MAX);
        total = total.saturating_add(count);
    }
    if total > MAX_ENUMERATION {
        return Err(Error::ResourceLimit(format!("window contains {total} cubes")));
    }
    let mut out = Vec::with_capacity(total as usize);
    for n in w.levels() {
        for k in product_indices(&level_ranges(family, n, &w.bbox)) {
            out.push(match family {
                Family::D => Cube::Dyadic(DyadicCube::new(n, k)),
                Family::D0 => Cube::Special(SpecialCube::new(n, k)),
            });
        }
    }
    Ok(out)
}

/// Result of [`smallest_special_cube`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecialCubeChoice {
    pub cube: SpecialCube,
    /// The box was itself a member of D0 and was returned unchanged.
    pub fast_path: bool,
}

/// The box itself as a special cube, when it is one.
pub fn as_special_cube(b: &DyadicBox) -> Option<SpecialCube> {
    match Cube::from_box(Family::D0, b)? {
        Cube::Special(s) => Some(s),
        Cube::Dyadic(_) => None,
    }
}

/// Special cube containing the cube `b`: `b` itself when `b` is in D0,
/// otherwise [`recipe_special_cube`].
pub fn smallest_special_cube(b: &DyadicBox) -> Result<SpecialCubeChoice> {
    check_cube(b)?;
    if let Some(cube) = as_special_cube(b) {
        return Ok(SpecialCubeChoice { cube, fast_path: true });
    }
    Ok(SpecialCubeChoice { cube: recipe_special_cube(b)?, fast_path: false })
}

fn check_cube(b: &DyadicBox) -> Result<Dyadic> {
    let side = b.cube_side().ok_or_else(|| Error::NotACube(b.to_string()))?;
    if side.is_zero() {
        return Err(Error::DegenerateBox(b.to_string()));
    }
    Ok(side)
}

/// The level-`n` special cube, `2^(n-1) <= side < 2^n`, that contains `b`.
/// Among containing indices the one whose center is nearest the box center
/// wins; remaining ties go to the smaller index on each axis.
pub fn recipe_special_cube(b: &DyadicBox) -> Result<SpecialCube> {
    let side = check_cube(b)?;
    let n = side.log2_floor() + 1;
    let center = b.center();
    let index = (0..b.dim())
        .map(|i| {
            let kmin = b.hi()[i].ceil_div_pow2(n) - 1;
            let kmax = b.lo()[i].floor_div_pow2(n) + 1;
            debug_assert!(kmin <= kmax);
            (kmin..=kmax)
                .min_by(|&a, &c| {
                    let da = (Dyadic::new(a, n) - center[i]).abs();
                    let dc = (Dyadic::new(c, n) - center[i]).abs();
                    da.cmp(&dc).then(a.cmp(&c))
                })
                .expect("nonempty candidate range")
        })
        .collect();
    Ok(SpecialCube { level: n, index })
}
