//! Hypercube vertices as bitmasks, subcube spans, distance-k neighbourhoods
//! and exhaustive isoperimetry checks for small cubes.
//!
//! Vertex `v` of `Q^d` is the integer whose bit `i` is coordinate `i`.

use std::fmt;

use crate::error::{LabError, Result};
use crate::graph::{edge_boundary, Graph};

pub type VertexId = u64;

/// Largest dimension for which a full `2^d` vertex bitset is allocated.
pub const MAX_MATERIALIZED_DIM: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(d: u32) -> Result<Self> {
        if (1..=63).contains(&d) {
            Ok(Self(d))
        } else {
            Err(LabError::InvalidDimension(d))
        }
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// `2^d`; panics above 63 which the constructor excludes.
    #[inline]
    pub fn vertex_count(self) -> u64 {
        1u64 << self.0
    }

    #[inline]
    pub fn mask(self) -> u64 {
        if self.0 == 64 {
            u64::MAX
        } else {
            (1u64 << self.0) - 1
        }
    }

    pub fn contains(self, v: VertexId) -> bool {
        v & !self.mask() == 0
    }

    pub fn ensure_materializable(self) -> Result<()> {
        if self.0 > MAX_MATERIALIZED_DIM {
            Err(LabError::guard(format!(
                "d = {} exceeds {MAX_MATERIALIZED_DIM}, vertex sets cannot be materialized",
                self.0
            )))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Flat membership bitset over a universe `0..len`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VertexSet {
    words: Vec<u64>,
    len: usize,
}

impl VertexSet {
    pub fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    /// Empty subset of `V(Q^d)`.
    pub fn for_cube(d: Dimension) -> Result<Self> {
        d.ensure_materializable()?;
        Ok(Self::new(d.vertex_count() as usize))
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::new(len);
        for w in s.words.iter_mut() {
            *w = u64::MAX;
        }
        s.trim();
        s
    }

    pub fn from_indices(len: usize, items: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new(len);
        for i in items {
            s.insert(i);
        }
        s
    }

    pub fn from_words(len: usize, mut words: Vec<u64>) -> Result<Self> {
        if words.len() != len.div_ceil(64) {
            return Err(LabError::parse(format!(
                "bitset payload has {} words, expected {}",
                words.len(),
                len.div_ceil(64)
            )));
        }
        let extra = words.len() * 64 - len;
        if extra > 0 {
            let last = words.last_mut().expect("nonempty");
            if *last >> (64 - extra) != 0 {
                return Err(LabError::parse("bitset payload has bits beyond its length"));
            }
        }
        Ok(Self { words, len })
    }

    fn trim(&mut self) {
        let extra = self.words.len() * 64 - self.len;
        if extra > 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= u64::MAX >> extra;
            }
        }
    }

    #[inline]
    pub fn universe(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "index {i} outside universe {}", self.len);
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        if i < self.len {
            self.words[i >> 6] &= !(1 << (i & 63));
        }
    }

    pub fn set(&mut self, i: usize, value: bool) {
        if value {
            self.insert(i)
        } else {
            self.remove(i)
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn complement(&self) -> VertexSet {
        let mut out = Self {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        out.trim();
        out
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[inline]
pub fn hamming(u: VertexId, v: VertexId) -> u32 {
    (u ^ v).count_ones()
}

/// The smallest face `Q^d[u, v]` containing both endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SubcubeSpan {
    pub base: VertexId,
    pub free_mask: u64,
}

impl SubcubeSpan {
    pub fn new(base: VertexId, free_mask: u64) -> Result<Self> {
        if base & free_mask != 0 {
            return Err(LabError::param(format!(
                "span base {base:#x} overlaps free mask {free_mask:#x}"
            )));
        }
        Ok(Self { base, free_mask })
    }

    pub fn dimension(&self) -> u32 {
        self.free_mask.count_ones()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v & !self.free_mask == self.base
    }

    /// Submasks of `free_mask` in increasing integer order, each OR-ed onto
    /// the base; the resulting vertices are increasing too.
    pub fn iter(&self) -> SpanIter {
        SpanIter {
            base: self.base,
            mask: self.free_mask,
            next: Some(0),
        }
    }
}

pub struct SpanIter {
    base: VertexId,
    mask: u64,
    next: Option<u64>,
}

impl Iterator for SpanIter {
    type Item = VertexId;

    #[inline]
    fn next(&mut self) -> Option<VertexId> {
        let sub = self.next?;
        // next submask in increasing order
        self.next = if sub == self.mask {
            None
        } else {
            Some(((sub | !self.mask).wrapping_add(1)) & self.mask)
        };
        Some(self.base | sub)
    }
}

pub fn subcube_between(u: VertexId, v: VertexId) -> SubcubeSpan {
    let free_mask = u ^ v;
    SubcubeSpan {
        base: u & !free_mask,
        free_mask,
    }
}

pub fn enumerate_span(s: &SubcubeSpan) -> Vec<VertexId> {
    s.iter().collect()
}

/// All `w` with `hamming(v, w) == k` inside `Q^d`, in increasing order of the
/// flipped-coordinate mask (Gosper's hack).
pub fn distance_k_neighbors(v: VertexId, k: u32, d: Dimension) -> impl Iterator<Item = VertexId> {
    KSubsets::new(d.get(), k).map(move |mask| v ^ mask)
}

/// `k`-element subsets of `{0..n}` as bitmasks in increasing integer order.
pub struct KSubsets {
    current: Option<u64>,
    limit: u64,
}

impl KSubsets {
    pub fn new(n: u32, k: u32) -> Self {
        let current = if k > n {
            None
        } else if k == 0 {
            Some(0)
        } else {
            Some(u64::MAX >> (64 - k))
        };
        Self {
            current,
            limit: if n == 64 { u64::MAX } else { (1u64 << n) - 1 },
        }
    }
}

impl Iterator for KSubsets {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let x = self.current?;
        self.current = if x == 0 {
            None
        } else {
            let c = x & x.wrapping_neg();
            let r = x.checked_add(c);
            match r {
                Some(r) if r <= self.limit => {
                    let next = (((r ^ x) >> 2) / c) | r;
                    (next <= self.limit).then_some(next)
                }
                _ => None,
            }
        };
        Some(x)
    }
}

/// Harper's edge-isoperimetric lower bound `(d - log2 s) * s`.
pub fn harper_edge_bound(d: u32, s: u64) -> Result<f64> {
    if s == 0 || d >= 64 || s > 1u64 << d {
        return Err(LabError::param(format!("set size {s} out of range for d = {d}")));
    }
    Ok((d as f64 - (s as f64).log2()) * s as f64)
}

/// Exact form of `e >= (d - log2 s) s`, i.e. `s^s 2^e >= 2^(d s)`.
fn meets_edge_bound(d: u32, s: u32, e: u32) -> bool {
    // s^s * 2^e >= 2^(d s)
    let Some(need) = (d * s).checked_sub(e) else {
        return true;
    };
    num_bigint::BigUint::from(s).pow(s) >= num_bigint::BigUint::from(1u8) << need
}

/// The checked vertex-isoperimetry slack parameters `eps`, as fractions.
pub const VERTEX_EPSILONS: [(u32, u32); 2] = [(1, 4), (1, 2)];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IsoperimetryViolation {
    Edge { boundary: u32 },
    Vertex { eps: (u32, u32), neighbourhood: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsoperimetryCounterexample {
    pub set_mask: u64,
    pub size: u32,
    pub violation: IsoperimetryViolation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsoperimetryReport {
    pub d: u32,
    pub subsets_checked: u64,
    pub counterexample: Option<IsoperimetryCounterexample>,
}

impl IsoperimetryReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Checks the edge bound and the crude vertex bound
/// `|N(S)| >= eps |S| / (10 sqrt d)` for every nonempty `S` of `Q^d`, `d <= 4`.
pub fn exhaustive_isoperimetry_check(d: u32) -> Result<IsoperimetryReport> {
    if !(1..=4).contains(&d) {
        return Err(LabError::guard(format!(
            "exhaustive isoperimetry needs 1 <= d <= 4, got {d}"
        )));
    }
    let n = 1usize << d;
    let cube = Graph::hypercube(Dimension::new(d)?);
    // neighbourhood masks of single vertices
    let nbr: Vec<u64> = (0..n as u64)
        .map(|v| (0..d).fold(0u64, |m, i| m | 1 << (v ^ (1 << i))))
        .collect();
    let mut checked = 0u64;
    for set in 1u64..(1u64 << n) {
        checked += 1;
        let s = set.count_ones();
        let members = VertexSet::from_indices(n, (0..n).filter(|&i| set >> i & 1 == 1));
        let boundary = edge_boundary(&cube, &members) as u32;
        if !meets_edge_bound(d, s, boundary) {
            return Ok(IsoperimetryReport {
                d,
                subsets_checked: checked,
                counterexample: Some(IsoperimetryCounterexample {
                    set_mask: set,
                    size: s,
                    violation: IsoperimetryViolation::Edge { boundary },
                }),
            });
        }
        let closed = (0..n).filter(|&i| set >> i & 1 == 1).fold(0u64, |m, i| m | nbr[i]);
        let neighbourhood = (closed & !set).count_ones();
        for eps in VERTEX_EPSILONS {
            let (a, b) = (eps.0 as u128, eps.1 as u128);
            // |S| <= (1 - eps) 2^d
            if (s as u128) * b > (b - a) * n as u128 {
                continue;
            }
            // |N| * 10 sqrt(d) >= eps |S|  <=>  (10 b |N|)^2 d >= (a |S|)^2
            let lhs = (10 * b * neighbourhood as u128).pow(2) * d as u128;
            let rhs = (a * s as u128).pow(2);
            if lhs < rhs {
                return Ok(IsoperimetryReport {
                    d,
                    subsets_checked: checked,
                    counterexample: Some(IsoperimetryCounterexample {
                        set_mask: set,
                        size: s,
                        violation: IsoperimetryViolation::Vertex { eps, neighbourhood },
                    }),
                });
            }
        }
    }
    Ok(IsoperimetryReport {
        d,
        subsets_checked: checked,
        counterexample: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: u32) -> Dimension {
        Dimension::new(d).unwrap()
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(0b0110, 0b0110), 0);
        assert_eq!(hamming(0b0110, 0b0011), 2);
        assert_eq!(hamming(0b000, 0b111), 3);
    }

    #[test]
    fn dimension_bounds() {
        assert!(Dimension::new(0).is_err());
        assert!(Dimension::new(64).is_err());
        assert_eq!(Dimension::new(63).unwrap().mask(), u64::MAX >> 1);
        assert!(dim(31).ensure_materializable().is_err());
    }

    #[test]
    fn subcube_between_examples() {
        assert_eq!(
            subcube_between(0b101, 0b101),
            SubcubeSpan { base: 0b101, free_mask: 0 }
        );
        let s = subcube_between(0b000, 0b011);
        assert_eq!(s, SubcubeSpan { base: 0, free_mask: 0b011 });
        assert_eq!(enumerate_span(&s), vec![0b00, 0b01, 0b10, 0b11]);
        let s = subcube_between(0b110, 0b011);
        assert_eq!(s, SubcubeSpan { base: 0b010, free_mask: 0b101 });
        assert_eq!(s.iter().count(), 4);
    }

    #[test]
    fn enumerate_span_examples() {
        assert_eq!(
            enumerate_span(&SubcubeSpan::new(0b100, 0).unwrap()),
            vec![0b100]
        );
        assert_eq!(
            enumerate_span(&SubcubeSpan::new(0, 0b11).unwrap()),
            vec![0, 1, 2, 3]
        );
        // direct expansion of base 010 with free coordinates {0, 2}
        assert_eq!(
            enumerate_span(&SubcubeSpan::new(0b010, 0b101).unwrap()),
            vec![0b010, 0b011, 0b110, 0b111]
        );
        assert!(SubcubeSpan::new(0b1, 0b1).is_err());
    }

    #[test]
    fn distance_k_examples() {
        assert_eq!(distance_k_neighbors(0, 3, dim(3)).collect::<Vec<_>>(), vec![0b111]);
        let mut one: Vec<_> = distance_k_neighbors(0, 1, dim(3)).collect();
        one.sort();
        assert_eq!(one, vec![0b001, 0b010, 0b100]);
        for v in 0..32 {
            let ws: Vec<_> = distance_k_neighbors(v, 2, dim(5)).collect();
            assert_eq!(ws.len(), 10);
            assert!(ws.iter().all(|&w| hamming(v, w) == 2 && w < 32));
        }
    }

    #[test]
    fn k_subsets_count_and_edges() {
        assert_eq!(KSubsets::new(5, 0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(KSubsets::new(3, 4).count(), 0);
        assert_eq!(KSubsets::new(6, 6).collect::<Vec<_>>(), vec![0b111111]);
        assert_eq!(KSubsets::new(10, 3).count(), 120);
        assert_eq!(KSubsets::new(63, 1).count(), 63);
        assert_eq!(KSubsets::new(64, 1).count(), 64);
    }

    #[test]
    fn harper_bound_examples() {
        assert_eq!(harper_edge_bound(3, 2).unwrap(), 4.0);
        assert_eq!(harper_edge_bound(3, 8).unwrap(), 0.0);
        assert!(harper_edge_bound(3, 0).is_err());
        assert!(harper_edge_bound(3, 9).is_err());
    }

    #[test]
    fn min_boundary_of_two_sets_in_q3_is_four() {
        let cube = Graph::hypercube(dim(3));
        let mut best = u64::MAX;
        for a in 0..8 {
            for b in a + 1..8 {
                let s = VertexSet::from_indices(8, [a, b]);
                best = best.min(edge_boundary(&cube, &s));
            }
        }
        assert_eq!(best, 4);
    }

    #[test]
    fn exact_edge_bound_agrees_with_float() {
        for d in 1..=4u32 {
            for s in 1..=(1u32 << d) {
                for e in 0..=(d * s) {
                    let float = e as f64 >= harper_edge_bound(d, s as u64).unwrap() - 1e-9;
                    assert_eq!(meets_edge_bound(d, s, e), float, "d={d} s={s} e={e}");
                }
            }
        }
    }

    #[test]
    fn exhaustive_isoperimetry_passes_small_cubes() {
        for d in 1..=3 {
            let r = exhaustive_isoperimetry_check(d).unwrap();
            assert!(r.passed(), "{r:?}");
            assert_eq!(r.subsets_checked, (1u64 << (1u64 << d)) - 1);
        }
        assert!(exhaustive_isoperimetry_check(5).is_err());
    }

    #[test]
    fn vertex_set_basics() {
        let mut s = VertexSet::new(70);
        s.insert(0);
        s.insert(69);
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 69]);
        assert_eq!(s.complement().len(), 68);
        assert!(!s.contains(70));
        s.remove(0);
        assert!(s.is_subset(&VertexSet::full(70)));
        assert!(VertexSet::from_words(70, vec![0, 1 << 10]).is_err());
    }
}
