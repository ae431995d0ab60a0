//! Empirical checks that long polytope edges inside one subcube behave like
//! mixed percolation on that cube.
//!
//! Inside a cube `H` of the family, cube edges join vertices at distance
//! `k`. Whether such a pair is a polytope edge depends only on the retained
//! interior points of the `k`-face it spans, and those faces have pairwise
//! disjoint interiors. So the retained vertices of `H` together with its
//! polytope edges should follow the product law of `Q^m_{p,q}` with
//! `q = q(p, k)`. The test here samples fresh polytopes, records the full
//! configuration of one fixed cube, and runs a chi-square fit against that
//! law.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::cube::{Dimension, VertexId};
use crate::error::{LabError, Result};
use crate::family::{gbox_adjacent, random_adjacent, random_handle, DirectionSet, SubcubeHandle};
use crate::gof::{chi_square_gof, GofResult};
use crate::models::VertexPercolation;
use crate::rational::{to_f64, Probability, Rational};
use crate::rng::{derive_seed, sequential};
use crate::skeleton::{exact_edge_probability_q, local_adjacency, SkeletonGraph, MAX_EXACT_Q_DISTANCE};

pub const MAX_COUPLING_DIM: u32 = 12;
pub const MAX_COUPLING_CUBE_DIM: u32 = 3;
const PROBE_STREAM: u64 = 0x636f_6e64;

#[derive(Clone, Debug)]
pub struct CouplingParams {
    pub d: u32,
    pub k: u32,
    pub m: u32,
    pub p: Probability,
    pub trials: u64,
    pub significance: f64,
    pub seed: u64,
}

/// Edges of the `m`-cube as pairs of block-subset indices `(a, a | 1<<j)`,
/// in a fixed order.
fn cube_edges(m: u32) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for a in 0..1u64 << m {
        for j in 0..m {
            if a >> j & 1 == 0 {
                out.push((a, a | 1 << j));
            }
        }
    }
    out
}

/// Configuration key: vertex bits first, then one bit per cube edge.
fn encode(vertices: u64, edges: u64, m: u32) -> u64 {
    vertices | edges << (1u32 << m)
}

/// The product law of `Q^m_{p,q}` over configuration keys.
pub fn product_law(m: u32, p: f64, q: f64) -> BTreeMap<u64, f64> {
    let n = 1u32 << m;
    let edges = cube_edges(m);
    let mut law = BTreeMap::new();
    for vs in 0..1u64 << n {
        let present = vs.count_ones() as i32;
        let pv = p.powi(present) * (1.0 - p).powi(n as i32 - present);
        if pv == 0.0 {
            continue;
        }
        let live: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| vs >> a & 1 == 1 && vs >> b & 1 == 1)
            .map(|(i, _)| i)
            .collect();
        for sub in 0..1u64 << live.len() {
            let on = sub.count_ones() as i32;
            let pe = q.powi(on) * (1.0 - q).powi(live.len() as i32 - on);
            if pe == 0.0 {
                continue;
            }
            let mask = live
                .iter()
                .enumerate()
                .filter(|(j, _)| sub >> j & 1 == 1)
                .fold(0u64, |acc, (_, &i)| acc | 1 << i);
            law.insert(encode(vs, mask, m), pv * pe);
        }
    }
    law
}

/// One configuration drawn directly from the product law.
pub fn sample_product_law<R: Rng + ?Sized>(m: u32, p: f64, q: f64, rng: &mut R) -> u64 {
    let n = 1u32 << m;
    let vs = (0..n).fold(0u64, |acc, i| if rng.random_bool(p) { acc | 1 << i } else { acc });
    let mut mask = 0u64;
    for (i, &(a, b)) in cube_edges(m).iter().enumerate() {
        if vs >> a & 1 == 1 && vs >> b & 1 == 1 && rng.random_bool(q) {
            mask |= 1 << i;
        }
    }
    encode(vs, mask, m)
}

/// The cube used by the test: consecutive blocks from coordinate 0,
/// anchored at the origin.
pub fn standard_handle(d: u32, k: u32, m: u32) -> Result<SubcubeHandle> {
    let block = (1u64 << k) - 1;
    let blocks = (0..m).map(|j| block << (j * k)).collect();
    SubcubeHandle::new(DirectionSet::new(d, k, blocks)?, 0)
}

fn observe(h: &SubcubeHandle, occ: &VertexPercolation, m: u32) -> Result<u64> {
    let members: Vec<VertexId> = (0..1u64 << m).map(|a| h.vertex(a)).collect();
    let vs = members
        .iter()
        .enumerate()
        .filter(|(_, &v)| crate::models::Occupancy::is_retained(occ, v))
        .fold(0u64, |acc, (i, _)| acc | 1 << i);
    let mut mask = 0u64;
    for (i, &(a, b)) in cube_edges(m).iter().enumerate() {
        if vs >> a & 1 == 1 && vs >> b & 1 == 1 && local_adjacency(occ, members[a as usize], members[b as usize])? {
            mask |= 1 << i;
        }
    }
    Ok(encode(vs, mask, m))
}

#[derive(Clone, Debug)]
pub struct CouplingReport {
    pub params: CouplingParams,
    pub handle: SubcubeHandle,
    pub q: Rational,
    pub gof: GofResult,
    /// Trials where both ends of a cube edge were retained, summed over edges.
    pub edge_opportunities: u64,
    pub edges_present: u64,
    /// `(observed - q) / standard error` for the conditional edge frequency.
    pub edge_z: f64,
    /// Trials with every cube vertex retained.
    pub full_trials: u64,
    /// Largest `|r| sqrt(n)` over pairs of edge indicators on full trials.
    pub max_correlation_z: f64,
    pub correlation_pairs: usize,
    pub pass: bool,
}

impl CouplingReport {
    pub fn edge_frequency(&self) -> f64 {
        if self.edge_opportunities == 0 {
            f64::NAN
        } else {
            self.edges_present as f64 / self.edge_opportunities as f64
        }
    }
}

fn check_params(params: &CouplingParams) -> Result<()> {
    let CouplingParams { d, k, m, .. } = *params;
    if d > MAX_COUPLING_DIM {
        return Err(LabError::guard(format!("coupling test limited to d <= {MAX_COUPLING_DIM}")));
    }
    if !(1..=MAX_EXACT_Q_DISTANCE).contains(&k) {
        return Err(LabError::guard(format!(
            "coupling test needs 1 <= k <= {MAX_EXACT_Q_DISTANCE}"
        )));
    }
    if !(1..=MAX_COUPLING_CUBE_DIM).contains(&m) {
        return Err(LabError::guard(format!(
            "coupling test needs 1 <= m <= {MAX_COUPLING_CUBE_DIM}"
        )));
    }
    if k * m > d {
        return Err(LabError::param(format!("need km <= d, got k={k} m={m} d={d}")));
    }
    if params.trials == 0 {
        return Err(LabError::param("trials must be positive"));
    }
    if !(0.0..1.0).contains(&params.significance) {
        return Err(LabError::param("significance must lie in [0, 1)"));
    }
    Ok(())
}

/// Samples `trials` independent polytopes and fits the configuration of one
/// fixed cube against the product law.
pub fn coupling_distribution_test(params: &CouplingParams) -> Result<CouplingReport> {
    check_params(params)?;
    let CouplingParams { d, k, m, .. } = *params;
    let dim = Dimension::new(d)?;
    let handle = standard_handle(d, k, m)?;
    let q = exact_edge_probability_q(params.p.value(), k)?;
    let (pf, qf) = (params.p.to_f64(), to_f64(&q));

    let configs: Vec<u64> = (0..params.trials)
        .into_par_iter()
        .map(|t| {
            let occ = VertexPercolation::new(dim, params.p.clone(), derive_seed(params.seed, t));
            observe(&handle, &occ, m)
        })
        .collect::<Result<_>>()?;

    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &c in &configs {
        *counts.entry(c).or_default() += 1;
    }
    let gof = chi_square_gof(&counts, &product_law(m, pf, qf))?;

    let n = 1u32 << m;
    let edges = cube_edges(m);
    let mut opportunities = 0u64;
    let mut present = 0u64;
    for &c in &configs {
        let vs = c & ((1u64 << n) - 1);
        let es = c >> n;
        for (i, &(a, b)) in edges.iter().enumerate() {
            if vs >> a & 1 == 1 && vs >> b & 1 == 1 {
                opportunities += 1;
                present += es >> i & 1;
            }
        }
    }
    let edge_z = if opportunities == 0 || qf <= 0.0 || qf >= 1.0 {
        0.0
    } else {
        let freq = present as f64 / opportunities as f64;
        (freq - qf) / (qf * (1.0 - qf) / opportunities as f64).sqrt()
    };

    let full = (1u64 << n) - 1;
    let full_rows: Vec<u64> = configs.iter().filter(|&&c| c & full == full).map(|&c| c >> n).collect();
    let mut max_z: f64 = 0.0;
    let mut pairs = 0usize;
    let rows = full_rows.len() as f64;
    if full_rows.len() >= 2 {
        for i in 0..edges.len() {
            for j in i + 1..edges.len() {
                let xi: Vec<f64> = full_rows.iter().map(|r| (r >> i & 1) as f64).collect();
                let xj: Vec<f64> = full_rows.iter().map(|r| (r >> j & 1) as f64).collect();
                let (mi, mj) = (xi.iter().sum::<f64>() / rows, xj.iter().sum::<f64>() / rows);
                let cov: f64 = xi.iter().zip(&xj).map(|(a, b)| (a - mi) * (b - mj)).sum();
                let vi: f64 = xi.iter().map(|a| (a - mi).powi(2)).sum();
                let vj: f64 = xj.iter().map(|b| (b - mj).powi(2)).sum();
                if vi > 0.0 && vj > 0.0 {
                    let r = cov / (vi * vj).sqrt();
                    max_z = max_z.max(r.abs() * rows.sqrt());
                    pairs += 1;
                }
            }
        }
    }

    let pass = gof.passes(params.significance);
    Ok(CouplingReport {
        params: params.clone(),
        handle,
        q,
        gof,
        edge_opportunities: opportunities,
        edges_present: present,
        edge_z,
        full_trials: full_rows.len() as u64,
        max_correlation_z: max_z,
        correlation_pairs: pairs,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionsReport {
    pub d: u32,
    pub k: u32,
    pub m: u32,
    pub epsilon: f64,
    /// `| |V| / 2^d - p |`
    pub density_deviation: f64,
    pub cubes_sampled: usize,
    /// Fraction of sampled cubes whose retained count leaves `(1 ± eps) p 2^m`.
    pub cube_violation: f64,
    pub pairs_sampled: usize,
    /// Fraction of sampled adjacent pairs whose shared retained count leaves
    /// `(1/2 ± eps) p 2^m`.
    pub pair_violation: f64,
}

/// Measures the global density and how evenly random cubes, and random
/// half-overlapping cube pairs, meet the retained vertex set.
pub fn conditions_i_iii_probe(
    sk: &SkeletonGraph,
    k: u32,
    m: u32,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<ConditionsReport> {
    let d = sk.d.get();
    if d > MAX_COUPLING_DIM {
        return Err(LabError::guard(format!("conditions probe limited to d <= {MAX_COUPLING_DIM}")));
    }
    if !sk.has_class(k) {
        return Err(LabError::param(format!("skeleton lacks distance class {k}")));
    }
    if m == 0 || k * m > d {
        return Err(LabError::param(format!("need 1 <= m and km <= d, got k={k} m={m} d={d}")));
    }
    let samples = samples.min(1000);
    let retained = |v: VertexId| sk.index_of(v).is_some();
    let p = sk.p.to_f64();
    let mass = p * (1u64 << m) as f64;
    let density_deviation = (sk.vertices.len() as f64 / (1u64 << d) as f64 - p).abs();
    let count_in = |h: &SubcubeHandle| (0..1u64 << m).filter(|&a| retained(h.vertex(a))).count() as f64;

    let mut rng = sequential(derive_seed(seed, PROBE_STREAM));
    let mut cube_bad = 0usize;
    let mut pair_bad = 0usize;
    for _ in 0..samples {
        let h = random_handle(d, k, m, &mut rng)?;
        let c = count_in(&h);
        if c < (1.0 - epsilon) * mass || c > (1.0 + epsilon) * mass {
            cube_bad += 1;
        }
        let g = random_adjacent(&h, &mut rng)?;
        debug_assert!(gbox_adjacent(&h, &g)?);
        let shared = (0..1u64 << m)
            .map(|a| h.vertex(a))
            .filter(|&v| g.contains(v) && retained(v))
            .count() as f64;
        if shared < (0.5 - epsilon) * mass || shared > (0.5 + epsilon) * mass {
            pair_bad += 1;
        }
    }
    let frac = |bad: usize| if samples == 0 { 0.0 } else { bad as f64 / samples as f64 };
    Ok(ConditionsReport {
        d,
        k,
        m,
        epsilon,
        density_deviation,
        cubes_sampled: samples,
        cube_violation: frac(cube_bad),
        pairs_sampled: samples,
        pair_violation: frac(pair_bad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample_vertex_percolation;
    use crate::skeleton::{build_skeleton, SkeletonOptions};
    use rand::SeedableRng;

    fn params(d: u32, k: u32, m: u32, trials: u64, seed: u64) -> CouplingParams {
        CouplingParams {
            d,
            k,
            m,
            p: Probability::from_ratio(1, 2).unwrap(),
            trials,
            significance: 0.01,
            seed,
        }
    }

    #[test]
    fn product_law_is_a_distribution() {
        for m in 1..=3 {
            let law = product_law(m, 0.3, 0.6);
            assert!((law.values().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // m = 1: four vertex states, one of which splits on the edge
        assert_eq!(product_law(1, 0.5, 0.75).len(), 5);
    }

    #[test]
    fn self_test_passes_mostly() {
        let law = product_law(2, 0.5, 0.75);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut passes = 0;
        for _ in 0..100 {
            let mut counts = BTreeMap::new();
            for _ in 0..2000 {
                *counts.entry(sample_product_law(2, 0.5, 0.75, &mut rng)).or_insert(0u64) += 1;
            }
            if chi_square_gof(&counts, &law).unwrap().passes(0.01) {
                passes += 1;
            }
        }
        assert!(passes >= 95, "{passes}");
    }

    #[test]
    fn short_edges_always_present() {
        // k = 1: every retained neighbour pair is a polytope edge
        let r = coupling_distribution_test(&params(5, 1, 2, 400, 3)).unwrap();
        assert_eq!(r.q, Rational::from_integer(1.into()));
        assert_eq!(r.edges_present, r.edge_opportunities);
        assert!(r.pass);
    }

    #[test]
    fn distance_two_frequency() {
        let r = coupling_distribution_test(&params(4, 2, 1, 10_000, 8)).unwrap();
        assert_eq!(to_f64(&r.q), 0.75);
        assert!(r.edge_z.abs() <= 3.0, "z = {}", r.edge_z);
    }

    #[test]
    fn guards() {
        assert!(coupling_distribution_test(&params(13, 3, 2, 10, 0)).is_err());
        assert!(coupling_distribution_test(&params(7, 5, 1, 10, 0)).is_err());
        assert!(coupling_distribution_test(&params(7, 3, 3, 10, 0)).is_err());
        assert!(coupling_distribution_test(&params(9, 3, 4, 10, 0)).is_err());
    }

    #[test]
    fn conditions_on_full_cube() {
        let sample = sample_vertex_percolation(Dimension::new(8).unwrap(), Probability::one(), 0).unwrap();
        let sk = build_skeleton(&sample, &SkeletonOptions::with_k_max(3)).unwrap();
        let r = conditions_i_iii_probe(&sk, 3, 2, 0.1, 200, 1).unwrap();
        assert_eq!(r.density_deviation, 0.0);
        assert_eq!(r.cube_violation, 0.0);
        assert_eq!(r.pair_violation, 0.0);
    }

    #[test]
    fn conditions_are_reproducible() {
        let sample =
            sample_vertex_percolation(Dimension::new(10).unwrap(), Probability::from_ratio(1, 2).unwrap(), 4)
                .unwrap();
        let sk = build_skeleton(&sample, &SkeletonOptions::with_k_max(3)).unwrap();
        let a = conditions_i_iii_probe(&sk, 3, 2, 0.5, 500, 7).unwrap();
        let b = conditions_i_iii_probe(&sk, 3, 2, 0.5, 500, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.cube_violation > 0.0 && a.cube_violation < 1.0);
    }
}
