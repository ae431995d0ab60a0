//! Exact 1-skeletons of 0/1 polytopes.
//!
//! # Adjacency criterion
//!
//! Let `X ⊆ {0,1}^d` and `u ≠ v ∈ X`, with `W = X \ {u, v}`. Every point of
//! `X` is a vertex of `conv(X)` (it is a vertex of the cube). Then
//!
//! > `uv` is an edge of `conv(X)` iff `conv(W)` does not meet the segment
//! > `[u, v]`,
//!
//! equivalently iff the midpoint `(u + v)/2` has no convex representation
//! over `X` that gives positive weight to a point of `W`.
//!
//! *Edge ⇒ no meeting point.* A supporting hyperplane `⟨a, x⟩ = c` of the
//! edge has `⟨a, w⟩ > c` for all `w ∈ W`, hence on `conv(W)`, while the
//! segment lies on the hyperplane.
//!
//! *No edge ⇒ meeting point.* Let `F` be the smallest face containing `u`
//! and `v`. Since `u, v` are vertices and `uv` is not an edge, `dim F ≥ 2`,
//! and the midpoint `m` lies in the relative interior of `F`. A relative
//! interior point is a convex combination of all vertices of `F` with
//! strictly positive weights, and `F` has a vertex in `W`; so
//! `m = α u + β v + s z` with `z ∈ conv(W)`, `s > 0`. Solving for `z` puts
//! it on the line through `u` and `v`. It cannot lie outside the open
//! segment: `z = v + τ (v - u)` with `τ ≥ 0` would make `v` a convex
//! combination of `z` and `u`, contradicting that `v` is a vertex (and
//! symmetrically for `u`).
//!
//! Note that asking only whether `m ∈ conv(W)` is *not* equivalent: for
//! `u = 000`, `v = 111`, `W = {100, 010, 001}` the segment crosses
//! `conv(W)` at `(1/3, 1/3, 1/3)`, so `uv` is not an edge, but
//! `(1/2, 1/2, 1/2) ∉ conv(W)`.
//!
//! The test is the exact LP `Σ λ_w w + t (u - v) = u, Σ λ_w = 1, λ, t ≥ 0`:
//! feasible iff `conv(W)` meets the line through `u, v` at parameter `t`,
//! which by the argument above can only happen inside the segment.
//!
//! # Locality
//!
//! Whether `uv` is an edge depends only on the retained points of the face
//! `Q^d[u, v]`: that face is cut out of the cube by a supporting hyperplane,
//! and the hull meets it in the hull of the points it contains. The local
//! test restricts the LP to those points and to the `k = hamming(u, v)`
//! free coordinates; the global test is kept as a cross-validation oracle.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::cube::{hamming, subcube_between, Dimension, VertexId};
use crate::error::{LabError, Result};
use crate::graph::Graph;
use crate::lp::EqualitySystem;
use crate::models::{Occupancy, PercolationSample};
use crate::rational::{Probability, Rational};

/// Largest Hamming distance handled by local enumeration (`2^k` points).
pub const MAX_LOCAL_DISTANCE: u32 = 20;

/// Largest `k` for which `q(p, k)` is computed by enumeration.
pub const MAX_EXACT_Q_DISTANCE: u32 = 4;

/// Whether `conv(others)` meets the segment `[u, v]`; coordinates
/// `0..dim`.
fn hull_meets_segment(others: &[VertexId], u: VertexId, v: VertexId, dim: u32) -> bool {
    if others.is_empty() {
        return false;
    }
    let cols = others.len() + 1;
    let mut sys = EqualitySystem::new(cols);
    let mut row = vec![0i64; cols];
    for i in 0..dim {
        let ui = (u >> i & 1) as i64;
        let vi = (v >> i & 1) as i64;
        for (c, w) in others.iter().enumerate() {
            row[c] = (w >> i & 1) as i64;
        }
        row[cols - 1] = ui - vi;
        sys.push_row(&row, ui);
    }
    row[..cols - 1].fill(1);
    row[cols - 1] = 0;
    sys.push_row(&row, 1);
    sys.is_feasible()
}

/// Adjacency of `u` and `v` on `conv(points)`, decided by an exact LP over
/// all of `points` (the global oracle).
pub fn midpoint_adjacency(points: &[VertexId], u: VertexId, v: VertexId, dim: u32) -> Result<bool> {
    if u == v {
        return Err(LabError::param("adjacency needs two distinct vertices"));
    }
    if dim == 0 || dim > 63 {
        return Err(LabError::InvalidDimension(dim));
    }
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(LabError::DuplicatePoint(w[0]));
    }
    let limit = 1u64 << dim;
    if let Some(&w) = sorted.iter().find(|&&w| w >= limit) {
        return Err(LabError::param(format!("point {w:#x} outside Q^{dim}")));
    }
    for x in [u, v] {
        if sorted.binary_search(&x).is_err() {
            return Err(LabError::MissingVertex(x));
        }
    }
    let others: Vec<VertexId> = sorted.into_iter().filter(|&w| w != u && w != v).collect();
    Ok(!hull_meets_segment(&others, u, v, dim))
}

fn ensure_retained<O: Occupancy + ?Sized>(occ: &O, u: VertexId, v: VertexId) -> Result<()> {
    for x in [u, v] {
        if !occ.is_retained(x) {
            return Err(LabError::MissingVertex(x));
        }
    }
    if u == v {
        return Err(LabError::param("adjacency needs two distinct vertices"));
    }
    Ok(())
}

/// True iff no vertex of `Q^d[u, v]` other than `u, v` is retained; this
/// suffices (but is not necessary) for `uv` to be an edge.
pub fn sufficient_empty_cube<O: Occupancy + ?Sized>(occ: &O, u: VertexId, v: VertexId) -> Result<bool> {
    ensure_retained(occ, u, v)?;
    Ok(subcube_between(u, v)
        .iter()
        .all(|w| w == u || w == v || !occ.is_retained(w)))
}

/// Packs the bits of `x` selected by `mask` into the low bits.
#[inline]
fn extract_bits(x: u64, mask: u64) -> u64 {
    let mut out = 0u64;
    let mut m = mask;
    let mut k = 0;
    while m != 0 {
        let b = m.trailing_zeros();
        out |= (x >> b & 1) << k;
        k += 1;
        m &= m - 1;
    }
    out
}

/// Adjacency decided from the retained points of `Q^d[u, v]` only.
pub fn local_adjacency<O: Occupancy + ?Sized>(occ: &O, u: VertexId, v: VertexId) -> Result<bool> {
    ensure_retained(occ, u, v)?;
    let span = subcube_between(u, v);
    let k = span.dimension();
    if k > MAX_LOCAL_DISTANCE {
        return Err(LabError::guard(format!(
            "distance {k} exceeds the local enumeration limit {MAX_LOCAL_DISTANCE}"
        )));
    }
    if k == 1 {
        return Ok(true);
    }
    let others: Vec<VertexId> = span
        .iter()
        .filter(|&w| w != u && w != v && occ.is_retained(w))
        .map(|w| extract_bits(w, span.free_mask))
        .collect();
    let lu = extract_bits(u, span.free_mask);
    let lv = extract_bits(v, span.free_mask);
    Ok(!hull_meets_segment(&others, lu, lv, k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjacencyRoute {
    /// LP restricted to the face `Q^d[u, v]`.
    Local,
    /// LP over every retained point.
    Global,
}

#[derive(Clone, Debug)]
pub struct SkeletonOptions {
    /// Largest Hamming distance examined; `None` means `d`.
    pub k_max: Option<u32>,
    /// Upper bound on `Σ 2^hamming(u, v)` over examined pairs.
    pub work_budget: u64,
    pub route: AdjacencyRoute,
}

impl Default for SkeletonOptions {
    fn default() -> Self {
        Self {
            k_max: None,
            work_budget: 1 << 34,
            route: AdjacencyRoute::Local,
        }
    }
}

impl SkeletonOptions {
    pub fn with_k_max(k_max: u32) -> Self {
        Self {
            k_max: Some(k_max),
            ..Self::default()
        }
    }
}

/// Edges of `conv(sample)` grouped by Hamming distance; pairs are stored
/// `(u, v)` with `u < v`, each class sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkeletonGraph {
    pub d: Dimension,
    pub p: Probability,
    pub seed: u64,
    pub k_max: u32,
    pub vertices: Vec<VertexId>,
    pub edges_by_distance: BTreeMap<u32, Vec<(VertexId, VertexId)>>,
}

impl SkeletonGraph {
    pub fn edge_count(&self) -> usize {
        self.edges_by_distance.values().map(Vec::len).sum()
    }

    pub fn class(&self, k: u32) -> &[(VertexId, VertexId)] {
        self.edges_by_distance.get(&k).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Whether pairs at distance `k` were examined.
    pub fn has_class(&self, k: u32) -> bool {
        k >= 1 && k <= self.k_max
    }

    /// `(k, u, v)` triples sorted ascending.
    pub fn triples(&self) -> impl Iterator<Item = (u32, VertexId, VertexId)> + '_ {
        self.edges_by_distance
            .iter()
            .flat_map(|(&k, list)| list.iter().map(move |&(u, v)| (k, u, v)))
    }

    pub fn index_of(&self, v: VertexId) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// The skeleton (all stored classes) as a graph on vertex indices.
    pub fn graph(&self) -> Graph {
        self.graph_of_classes(|_| true)
    }

    pub fn class_graph(&self, k: u32) -> Graph {
        self.graph_of_classes(|c| c == k)
    }

    fn graph_of_classes(&self, keep: impl Fn(u32) -> bool) -> Graph {
        let pairs = self
            .triples()
            .filter(|(k, _, _)| keep(*k))
            .map(|(_, u, v)| {
                (
                    self.index_of(u).expect("edge endpoint is a vertex"),
                    self.index_of(v).expect("edge endpoint is a vertex"),
                )
            });
        Graph::from_edges(self.vertices.clone(), pairs).expect("valid")
    }

    /// Degree of each vertex (by index) within class `k`.
    pub fn class_degrees(&self, k: u32) -> Vec<usize> {
        let mut deg = vec![0usize; self.vertices.len()];
        for &(u, v) in self.class(k) {
            deg[self.index_of(u).expect("vertex")] += 1;
            deg[self.index_of(v).expect("vertex")] += 1;
        }
        deg
    }

    pub fn sample_key(&self) -> (u32, String, u64, u32) {
        (self.d.get(), self.p.to_string(), self.seed, self.k_max)
    }
}

fn candidate_pairs(vertices: &[VertexId], k_max: u32) -> Vec<(VertexId, VertexId)> {
    let mut out = Vec::new();
    for (i, &u) in vertices.iter().enumerate() {
        for &v in &vertices[i + 1..] {
            if hamming(u, v) <= k_max {
                out.push((u, v));
            }
        }
    }
    out
}

pub fn estimated_work(vertices: &[VertexId], k_max: u32) -> u64 {
    let mut total = 0u64;
    for (i, &u) in vertices.iter().enumerate() {
        for &v in &vertices[i + 1..] {
            let h = hamming(u, v);
            if h <= k_max {
                total = total.saturating_add(1u64 << h.min(63));
            }
        }
    }
    total
}

pub fn build_skeleton(sample: &PercolationSample, opts: &SkeletonOptions) -> Result<SkeletonGraph> {
    let d = sample.d.get();
    let k_max = opts.k_max.unwrap_or(d).min(d);
    if k_max == 0 {
        return Err(LabError::param("k_max must be at least 1"));
    }
    let vertices = sample.retained();
    let work = estimated_work(&vertices, k_max);
    if work > opts.work_budget {
        return Err(LabError::guard(format!(
            "skeleton work estimate {work} exceeds budget {}",
            opts.work_budget
        )));
    }
    if opts.route == AdjacencyRoute::Local && k_max > MAX_LOCAL_DISTANCE {
        return Err(LabError::guard(format!(
            "k_max {k_max} exceeds the local enumeration limit {MAX_LOCAL_DISTANCE}"
        )));
    }
    let pairs = candidate_pairs(&vertices, k_max);
    let verdicts: Vec<bool> = pairs
        .par_iter()
        .map(|&(u, v)| match opts.route {
            AdjacencyRoute::Local => local_adjacency(sample, u, v).expect("retained pair"),
            AdjacencyRoute::Global => midpoint_adjacency(&vertices, u, v, d).expect("retained pair"),
        })
        .collect();
    let mut edges_by_distance: BTreeMap<u32, Vec<(VertexId, VertexId)>> = BTreeMap::new();
    for (&(u, v), edge) in pairs.iter().zip(verdicts) {
        if edge {
            edges_by_distance.entry(hamming(u, v)).or_default().push((u, v));
        }
    }
    for list in edges_by_distance.values_mut() {
        list.sort_unstable();
    }
    Ok(SkeletonGraph {
        d: sample.d,
        p: sample.p.clone(),
        seed: sample.seed,
        k_max,
        vertices,
        edges_by_distance,
    })
}

/// For `k <= 4`: entry `j` counts the sets `T` of `j` interior vertices of
/// `Q^k[0, 1^k]` for which `0` and `1^k` stay adjacent on the hull of
/// `T ∪ {0, 1^k}`.
pub fn long_edge_adjacency_counts(k: u32) -> Result<&'static [u64]> {
    static CACHE: [OnceLock<Vec<u64>>; 5] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    if !(1..=MAX_EXACT_Q_DISTANCE).contains(&k) {
        return Err(LabError::guard(format!(
            "exact q(p, k) needs 1 <= k <= {MAX_EXACT_Q_DISTANCE}, got {k}"
        )));
    }
    Ok(CACHE[k as usize].get_or_init(|| {
        let full = (1u64 << k) - 1;
        let interior: Vec<VertexId> = (1..full).collect();
        let n = interior.len();
        let per_subset: Vec<(u32, bool)> = (0u64..1 << n)
            .into_par_iter()
            .map(|t| {
                let mut points = vec![0, full];
                points.extend((0..n).filter(|&i| t >> i & 1 == 1).map(|i| interior[i]));
                let edge = midpoint_adjacency(&points, 0, full, k).expect("valid points");
                (t.count_ones(), edge)
            })
            .collect();
        let mut counts = vec![0u64; n + 1];
        for (j, edge) in per_subset {
            if edge {
                counts[j as usize] += 1;
            }
        }
        counts
    }))
}

/// `q(p, k)`: probability that two retained antipodes of a `k`-face are
/// adjacent, summed exactly over all interior configurations.
pub fn exact_edge_probability_q(p: &Rational, k: u32) -> Result<Rational> {
    if *p < Rational::zero() || *p > Rational::one() {
        return Err(LabError::InvalidProbability(crate::rational::format_rational(p)));
    }
    let counts = long_edge_adjacency_counts(k)?;
    let n = counts.len() - 1;
    let miss = Rational::one() - p;
    let mut q = Rational::zero();
    for (j, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let term = num_traits::pow(p.clone(), j) * num_traits::pow(miss.clone(), n - j);
        q += term * Rational::from_integer(BigInt::from(c));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample_vertex_percolation;
    use crate::rational::ratio;

    fn dim(d: u32) -> Dimension {
        Dimension::new(d).unwrap()
    }

    fn prob(n: i64, d: i64) -> Probability {
        Probability::from_ratio(n, d).unwrap()
    }

    #[test]
    fn midpoint_examples() {
        assert!(midpoint_adjacency(&[0b00, 0b11], 0b00, 0b11, 2).unwrap());
        assert!(!midpoint_adjacency(&[0b00, 0b01, 0b10, 0b11], 0b00, 0b11, 2).unwrap());
        assert!(midpoint_adjacency(&[0b00, 0b01, 0b11], 0b00, 0b11, 2).unwrap());
    }

    #[test]
    fn bipyramid_diagonal_is_not_an_edge() {
        let pts = [0b000, 0b001, 0b010, 0b100, 0b111];
        assert!(!midpoint_adjacency(&pts, 0b000, 0b111, 3).unwrap());
        // but every apex-to-equator pair is
        for w in [0b001, 0b010, 0b100] {
            assert!(midpoint_adjacency(&pts, 0, w, 3).unwrap());
            assert!(midpoint_adjacency(&pts, 0b111, w, 3).unwrap());
        }
    }

    #[test]
    fn midpoint_errors() {
        assert!(matches!(
            midpoint_adjacency(&[0, 3], 0, 1, 2),
            Err(LabError::MissingVertex(1))
        ));
        assert!(matches!(
            midpoint_adjacency(&[0, 3, 3], 0, 3, 2),
            Err(LabError::DuplicatePoint(3))
        ));
        assert!(midpoint_adjacency(&[0, 3], 0, 0, 2).is_err());
    }

    #[test]
    fn empty_cube_examples() {
        let s = sample_vertex_percolation(dim(3), prob(1, 1), 0).unwrap();
        assert!(sufficient_empty_cube(&s, 0b000, 0b001).unwrap());
        let only = crate::cube::VertexSet::from_indices(8, [0, 7]);
        let s = PercolationSample::from_vertices(dim(3), prob(1, 2), 0, only).unwrap();
        assert!(sufficient_empty_cube(&s, 0, 7).unwrap());
        assert!(local_adjacency(&s, 0, 7).unwrap());
        assert!(sufficient_empty_cube(&s, 0, 1).is_err());
    }

    #[test]
    fn sufficiency_is_not_necessity() {
        let pts = crate::cube::VertexSet::from_indices(4, [0b00, 0b01, 0b11]);
        let s = PercolationSample::from_vertices(dim(2), prob(1, 2), 0, pts).unwrap();
        assert!(!sufficient_empty_cube(&s, 0b00, 0b11).unwrap());
        assert!(local_adjacency(&s, 0b00, 0b11).unwrap());
        assert!(midpoint_adjacency(&[0b00, 0b01, 0b11], 0b00, 0b11, 2).unwrap());
    }

    #[test]
    fn full_cube_skeleton_is_the_cube() {
        for d in 2..=5 {
            let s = sample_vertex_percolation(dim(d), prob(1, 1), 0).unwrap();
            let sk = build_skeleton(&s, &SkeletonOptions::default()).unwrap();
            assert_eq!(sk.class(1).len(), (d as usize) << (d - 1));
            assert_eq!(sk.edge_count(), sk.class(1).len());
            assert_eq!(sk.graph(), Graph::hypercube(dim(d)));
        }
    }

    #[test]
    fn two_point_sample_is_k2() {
        let pts = crate::cube::VertexSet::from_indices(32, [3, 28]);
        let s = PercolationSample::from_vertices(dim(5), prob(1, 2), 0, pts).unwrap();
        let sk = build_skeleton(&s, &SkeletonOptions::default()).unwrap();
        assert_eq!(sk.triples().collect::<Vec<_>>(), vec![(5, 3, 28)]);
    }

    #[test]
    fn local_and_global_skeletons_agree_at_d5() {
        let s = sample_vertex_percolation(dim(5), prob(1, 2), 1).unwrap();
        let local = build_skeleton(&s, &SkeletonOptions::default()).unwrap();
        let global = build_skeleton(
            &s,
            &SkeletonOptions {
                route: AdjacencyRoute::Global,
                ..SkeletonOptions::default()
            },
        )
        .unwrap();
        assert_eq!(local, global);
    }

    #[test]
    fn k_max_restricts_classes_and_budget_guards() {
        let s = sample_vertex_percolation(dim(6), prob(1, 2), 2).unwrap();
        let sk = build_skeleton(&s, &SkeletonOptions::with_k_max(2)).unwrap();
        assert!(sk.edges_by_distance.keys().all(|&k| k <= 2));
        assert!(!sk.has_class(3));
        let tight = SkeletonOptions {
            work_budget: 10,
            ..SkeletonOptions::default()
        };
        assert!(matches!(build_skeleton(&s, &tight), Err(LabError::Guard(_))));
    }

    #[test]
    fn q_small_k() {
        assert_eq!(exact_edge_probability_q(&ratio(1, 3), 1).unwrap(), ratio(1, 1));
        for i in 0..=10 {
            let p = ratio(i, 10);
            let expected = Rational::one() - &p * &p;
            assert_eq!(exact_edge_probability_q(&p, 2).unwrap(), expected);
        }
        assert!(exact_edge_probability_q(&ratio(1, 2), 5).is_err());
        assert!(exact_edge_probability_q(&ratio(3, 2), 2).is_err());
    }

    #[test]
    fn q_counts_shape() {
        let c3 = long_edge_adjacency_counts(3).unwrap();
        assert_eq!(c3.len(), 7);
        // empty interior is always an edge; full interior never
        assert_eq!(c3[0], 1);
        assert_eq!(c3[6], 0);
        // one interior point never blocks the diagonal
        assert_eq!(c3[1], 6);
    }

    #[test]
    fn extract_bits_packs() {
        assert_eq!(extract_bits(0b1010_1010, 0b1111_0000), 0b1010);
        assert_eq!(extract_bits(0b101, 0b101), 0b11);
    }
}
