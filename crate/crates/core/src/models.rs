//! Seeded vertex percolation `Q^d_p`, mixed percolation `Q^d_{p,q}`,
//! thinning, and the fibre projection used for renormalisation.
//!
//! Vertex `v` is retained iff the word at `(seed, Vertex, v)` is below the
//! threshold of `p`. Two samples with the same seed and `p' <= p` are
//! therefore nested, and retention of a single vertex can be queried at any
//! dimension without materialising `V(Q^d)`.

use std::collections::BTreeMap;

use num_traits::{One, Pow};

use crate::cube::{Dimension, VertexId, VertexSet};
use crate::error::{LabError, Result};
use crate::graph::Graph;
use crate::rational::{Probability, Rational};
use crate::rng::{CounterRng, Domain};

/// Read access to a set of retained hypercube vertices.
pub trait Occupancy: Sync {
    fn dimension(&self) -> Dimension;
    fn is_retained(&self, v: VertexId) -> bool;
}

/// Parameters of `Q^d_p` with lazy per-vertex queries. Valid for any
/// `d <= 63`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexPercolation {
    pub d: Dimension,
    pub p: Probability,
    pub seed: u64,
}

impl VertexPercolation {
    pub fn new(d: Dimension, p: Probability, seed: u64) -> Self {
        Self { d, p, seed }
    }

    pub fn materialize(&self) -> Result<PercolationSample> {
        sample_vertex_percolation(self.d, self.p.clone(), self.seed)
    }
}

impl Occupancy for VertexPercolation {
    fn dimension(&self) -> Dimension {
        self.d
    }

    fn is_retained(&self, v: VertexId) -> bool {
        self.d.contains(v) && self.p.accepts(CounterRng::new(self.seed).word(Domain::Vertex, v))
    }
}

/// A materialised realisation of `Q^d_p`.
///
/// Samples produced by [`project`] carry the parent's seed; their vertex set
/// is derived from the parent rather than drawn from `(d, p, seed)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PercolationSample {
    pub d: Dimension,
    pub p: Probability,
    pub seed: u64,
    pub vertices: VertexSet,
}

impl PercolationSample {
    pub fn from_vertices(d: Dimension, p: Probability, seed: u64, vertices: VertexSet) -> Result<Self> {
        d.ensure_materializable()?;
        if vertices.universe() != d.vertex_count() as usize {
            return Err(LabError::param(format!(
                "vertex set universe {} does not match 2^{d}",
                vertices.universe()
            )));
        }
        Ok(Self { d, p, seed, vertices })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Retained vertices in increasing order.
    pub fn retained(&self) -> Vec<VertexId> {
        self.vertices.iter().map(|i| i as VertexId).collect()
    }
}

impl Occupancy for PercolationSample {
    fn dimension(&self) -> Dimension {
        self.d
    }

    #[inline]
    fn is_retained(&self, v: VertexId) -> bool {
        self.vertices.contains(v as usize)
    }
}

pub fn sample_vertex_percolation(d: Dimension, p: Probability, seed: u64) -> Result<PercolationSample> {
    d.ensure_materializable()?;
    let n = d.vertex_count() as usize;
    let mut vertices = VertexSet::new(n);
    let words = CounterRng::new(seed).words(Domain::Vertex, 0);
    for (v, w) in words.take(n).enumerate() {
        if p.accepts(w) {
            vertices.insert(v);
        }
    }
    Ok(PercolationSample { d, p, seed, vertices })
}

/// Keeps each retained vertex independently with probability `r`, using the
/// thinning domain of the sample's seed.
pub fn thin(sample: &PercolationSample, r: &Probability) -> PercolationSample {
    let rng = CounterRng::new(sample.seed);
    let mut vertices = VertexSet::new(sample.vertices.universe());
    for v in sample.vertices.iter() {
        if r.accepts(rng.word(Domain::Thin, v as u64)) {
            vertices.insert(v);
        }
    }
    PercolationSample {
        d: sample.d,
        p: Probability::new(sample.p.value() * r.value()).expect("product of probabilities"),
        seed: sample.seed,
        vertices,
    }
}

/// Index of the hypercube edge `{v, v ^ (1 << i)}`, addressed by its lower
/// endpoint (bit `i` of `v` clear).
#[inline]
pub fn edge_index(d: Dimension, lower: VertexId, i: u32) -> u64 {
    lower * d.get() as u64 + i as u64
}

/// A realisation of `Q^d_{p,q}`: independent vertex and edge retention.
/// The edge bitset is stored raw; graph queries intersect it with the
/// retained vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedSample {
    pub d: Dimension,
    pub p: Probability,
    pub q: Probability,
    pub seed: u64,
    pub vertices: VertexSet,
    /// Bit `edge_index(d, lower, i)`; bits for non-lower endpoints stay clear.
    pub edges: VertexSet,
}

pub fn sample_mixed(d: Dimension, p: Probability, q: Probability, seed: u64) -> Result<MixedSample> {
    let base = sample_vertex_percolation(d, p, seed)?;
    let n = d.vertex_count();
    let dd = d.get() as u64;
    let mut edges = VertexSet::new((n * dd) as usize);
    let words = CounterRng::new(seed).words(Domain::Edge, 0);
    for (idx, w) in words.take((n * dd) as usize).enumerate() {
        let lower = idx as u64 / dd;
        let i = (idx as u64 % dd) as u32;
        if lower >> i & 1 == 0 && q.accepts(w) {
            edges.insert(idx);
        }
    }
    Ok(MixedSample {
        d,
        p: base.p,
        q,
        seed,
        vertices: base.vertices,
        edges,
    })
}

impl MixedSample {
    pub fn edge_retained(&self, u: VertexId, v: VertexId) -> bool {
        let x = u ^ v;
        if x.count_ones() != 1 {
            return false;
        }
        let i = x.trailing_zeros();
        self.edges.contains(edge_index(self.d, u.min(v), i) as usize)
    }

    /// The induced graph on retained vertices using retained edges.
    pub fn graph(&self) -> Graph {
        let labels: Vec<VertexId> = self.vertices.iter().map(|v| v as VertexId).collect();
        let mut index = vec![u32::MAX; self.vertices.universe()];
        for (i, &v) in labels.iter().enumerate() {
            index[v as usize] = i as u32;
        }
        let mut pairs = Vec::new();
        for (a, &v) in labels.iter().enumerate() {
            for i in 0..self.d.get() {
                let w = v ^ (1 << i);
                if w > v && self.vertices.contains(w as usize) && self.edge_retained(v, w) {
                    pairs.push((a, index[w as usize] as usize));
                }
            }
        }
        Graph::from_edges(labels, pairs).expect("valid indices")
    }
}

/// The projected sample over `Q^{d-b}`: fibre `u` is occupied iff some
/// retained `w` has `π(w) = u`, where `π` keeps the low `d - b` coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenormalizedView {
    pub b: u32,
    pub rho: Rational,
    pub projected: PercolationSample,
}

/// `1 - (1 - p)^(2^b)`, exactly.
pub fn fibre_occupancy_probability(p: &Probability, b: u32) -> Rational {
    let miss: Rational = p.complement();
    Rational::one() - Pow::pow(miss, 1u64 << b)
}

#[inline]
pub fn project_vertex(w: VertexId, d: Dimension, b: u32) -> VertexId {
    w & ((1u64 << (d.get() - b)) - 1)
}

/// The vertices `w` of `Q^d` with `π(w) = u`, in increasing order.
pub fn fibre(u: VertexId, d: Dimension, b: u32) -> impl Iterator<Item = VertexId> {
    let shift = d.get() - b;
    (0..1u64 << b).map(move |x| u | x << shift)
}

pub fn project(sample: &PercolationSample, b: u32) -> Result<RenormalizedView> {
    let d = sample.d.get();
    if b >= d {
        return Err(LabError::param(format!("fibre dimension b = {b} must be < d = {d}")));
    }
    if b == 0 {
        return Ok(RenormalizedView {
            b,
            rho: sample.p.value().clone(),
            projected: sample.clone(),
        });
    }
    let rho = fibre_occupancy_probability(&sample.p, b);
    let low = Dimension::new(d - b)?;
    let mut vertices = VertexSet::new(low.vertex_count() as usize);
    for w in sample.vertices.iter() {
        vertices.insert(project_vertex(w as u64, sample.d, b) as usize);
    }
    Ok(RenormalizedView {
        b,
        projected: PercolationSample {
            d: low,
            p: Probability::new(rho.clone())?,
            seed: sample.seed,
            vertices,
        },
        rho,
    })
}

/// Histogram: retained-count per fibre -> number of fibres with that count.
pub fn fiber_census(sample: &PercolationSample, b: u32) -> Result<BTreeMap<u32, u64>> {
    let d = sample.d.get();
    if b >= d {
        return Err(LabError::param(format!("fibre dimension b = {b} must be < d = {d}")));
    }
    let fibres = 1u64 << (d - b);
    let mut counts = vec![0u32; fibres as usize];
    for w in sample.vertices.iter() {
        counts[project_vertex(w as u64, sample.d, b) as usize] += 1;
    }
    let mut hist = BTreeMap::new();
    for c in counts {
        *hist.entry(c).or_insert(0u64) += 1;
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn dim(d: u32) -> Dimension {
        Dimension::new(d).unwrap()
    }

    fn prob(n: i64, d: i64) -> Probability {
        Probability::from_ratio(n, d).unwrap()
    }

    #[test]
    fn extremes() {
        for seed in 0..5 {
            assert_eq!(sample_vertex_percolation(dim(3), prob(1, 1), seed).unwrap().len(), 8);
            assert_eq!(sample_vertex_percolation(dim(3), prob(0, 1), seed).unwrap().len(), 0);
        }
        assert!(sample_vertex_percolation(dim(31), prob(1, 2), 0).is_err());
    }

    #[test]
    fn lazy_queries_match_materialized() {
        let lazy = VertexPercolation::new(dim(9), prob(1, 3), 17);
        let s = lazy.materialize().unwrap();
        for v in 0..512 {
            assert_eq!(lazy.is_retained(v), s.is_retained(v));
        }
        // large d works lazily
        let big = VertexPercolation::new(dim(54), prob(1, 2), 3);
        let hits = (0..1000u64).filter(|&v| big.is_retained(v << 20)).count();
        assert!((350..650).contains(&hits));
    }

    #[test]
    fn monotone_in_p() {
        let lo = sample_vertex_percolation(dim(10), prob(1, 4), 9).unwrap();
        let hi = sample_vertex_percolation(dim(10), prob(3, 5), 9).unwrap();
        assert!(lo.vertices.is_subset(&hi.vertices));
    }

    #[test]
    fn mixed_extremes() {
        let ms = sample_mixed(dim(4), prob(1, 2), prob(0, 1), 1).unwrap();
        assert_eq!(ms.graph().edge_count(), 0);
        let full = sample_mixed(dim(4), prob(1, 1), prob(1, 1), 1).unwrap();
        assert_eq!(full.graph(), Graph::hypercube(dim(4)));
    }

    #[test]
    fn mixed_graph_edges_have_retained_endpoints() {
        let ms = sample_mixed(dim(7), prob(1, 2), prob(2, 3), 5).unwrap();
        let g = ms.graph();
        for (a, b) in g.edges() {
            let (u, v) = (g.label(a), g.label(b));
            assert!(ms.vertices.contains(u as usize) && ms.vertices.contains(v as usize));
            assert!(ms.edge_retained(u, v));
        }
    }

    #[test]
    fn rho_examples() {
        assert_eq!(fibre_occupancy_probability(&prob(1, 2), 1), ratio(3, 4));
        assert_eq!(fibre_occupancy_probability(&prob(1, 2), 2), ratio(15, 16));
        assert_eq!(fibre_occupancy_probability(&prob(1, 4), 0), ratio(1, 4));
    }

    #[test]
    fn project_identity_at_b_zero() {
        let s = sample_vertex_percolation(dim(5), prob(1, 2), 3).unwrap();
        let view = project(&s, 0).unwrap();
        assert_eq!(view.projected, s);
        assert_eq!(view.rho, ratio(1, 2));
        assert!(project(&s, 5).is_err());
    }

    #[test]
    fn projection_matches_brute_force_fibre_scan() {
        let s = sample_vertex_percolation(dim(6), prob(1, 4), 7).unwrap();
        let view = project(&s, 2).unwrap();
        assert_eq!(view.rho, ratio(175, 256));
        for u in 0..16u64 {
            let occupied = (0..64u64).any(|w| w & 0xf == u && s.is_retained(w));
            assert_eq!(view.projected.is_retained(u), occupied, "fibre {u}");
        }
    }

    #[test]
    fn census_extremes_and_mass() {
        let full = sample_vertex_percolation(dim(5), prob(1, 1), 0).unwrap();
        assert_eq!(fiber_census(&full, 1).unwrap(), BTreeMap::from([(2, 16)]));
        let empty = sample_vertex_percolation(dim(5), prob(0, 1), 0).unwrap();
        assert_eq!(fiber_census(&empty, 3).unwrap(), BTreeMap::from([(0, 4)]));
        let s = sample_vertex_percolation(dim(8), prob(1, 2), 11).unwrap();
        let hist = fiber_census(&s, 2).unwrap();
        let mass: u64 = hist.iter().map(|(c, m)| *c as u64 * m).sum();
        assert_eq!(mass as usize, s.len());
        assert_eq!(hist.values().sum::<u64>(), 64);
    }

    #[test]
    fn thinning_is_a_subset() {
        let s = sample_vertex_percolation(dim(10), prob(1, 2), 4).unwrap();
        let t = thin(&s, &prob(1, 2));
        assert!(t.vertices.is_subset(&s.vertices));
        assert_eq!(t.p, prob(1, 4));
        let frac = t.len() as f64 / s.len() as f64;
        assert!((0.4..0.6).contains(&frac), "{frac}");
    }
}
