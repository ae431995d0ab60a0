use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::cube::{VertexId, VertexSet};
use crate::error::{LabError, Result};
use crate::rational::{int, Rational};
use crate::skeleton::SkeletonGraph;

/// Degrees of the skeleton's vertices, overall and per distance class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeProfile {
    pub vertices: Vec<VertexId>,
    pub total: Vec<usize>,
    pub by_class: BTreeMap<u32, Vec<usize>>,
}

impl DegreeProfile {
    pub fn class(&self, k: u32) -> Option<&[usize]> {
        self.by_class.get(&k).map(Vec::as_slice)
    }

    pub fn min_degree(&self) -> Option<usize> {
        self.total.iter().copied().min()
    }

    /// Degree sum of class `k` (twice its edge count).
    pub fn class_sum(&self, k: u32) -> usize {
        self.class(k).map(|c| c.iter().sum()).unwrap_or(0)
    }
}

pub fn degree_profile(sk: &SkeletonGraph) -> DegreeProfile {
    let mut by_class = BTreeMap::new();
    for k in 1..=sk.k_max {
        by_class.insert(k, sk.class_degrees(k));
    }
    let mut total = vec![0usize; sk.vertices.len()];
    for degs in by_class.values() {
        for (t, d) in total.iter_mut().zip(degs) {
            *t += d;
        }
    }
    DegreeProfile {
        vertices: sk.vertices.clone(),
        total,
        by_class,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DichotomyReport {
    pub k: u32,
    pub alpha: Rational,
    /// `(1 - alpha) d`
    pub short_threshold: Rational,
    /// `p (1-p)^(2^k - 2) alpha^k C(d, k) / 4`
    pub long_threshold: Rational,
    pub vertices: usize,
    /// Retained vertices below both thresholds, ascending.
    pub violators: Vec<VertexId>,
}

impl DichotomyReport {
    pub fn violation_fraction(&self) -> f64 {
        if self.vertices == 0 {
            0.0
        } else {
            self.violators.len() as f64 / self.vertices as f64
        }
    }
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Checks every retained vertex against the two degree thresholds: many
/// short edges, or enough edges at distance `k`.
pub fn degree_dichotomy_stats(sk: &SkeletonGraph, alpha: &Rational, k: u32) -> Result<DichotomyReport> {
    if !sk.has_class(1) || !sk.has_class(k) {
        return Err(LabError::param(format!(
            "skeleton examined distances up to {} and lacks class {}",
            sk.k_max,
            if sk.has_class(1) { k } else { 1 }
        )));
    }
    if *alpha < Rational::zero() || *alpha > int(1) {
        return Err(LabError::param("alpha must lie in [0, 1]"));
    }
    let d = sk.d.get();
    if k > 20 {
        return Err(LabError::guard("distance class too large for the threshold"));
    }
    let p = sk.p.value().clone();
    let miss = int(1) - &p;
    let short_threshold = (int(1) - alpha) * int(d as i64);
    let long_threshold = &p
        * num_traits::pow(miss, (1usize << k) - 2)
        * num_traits::pow(alpha.clone(), k as usize)
        * Rational::from_integer(binomial(d, k))
        / int(4);

    let short = sk.class_degrees(1);
    let long = sk.class_degrees(k);
    let violators = sk
        .vertices
        .iter()
        .enumerate()
        .filter(|&(i, _)| {
            int(short[i] as i64) < short_threshold && int(long[i] as i64) < long_threshold
        })
        .map(|(_, &v)| v)
        .collect();
    Ok(DichotomyReport {
        k,
        alpha: alpha.clone(),
        short_threshold,
        long_threshold,
        vertices: sk.vertices.len(),
        violators,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CubeDensity {
    Dense,
    Moderate,
    Sparse,
}

impl CubeDensity {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dense => "dense",
            Self::Moderate => "moderate",
            Self::Sparse => "sparse",
        }
    }
}

/// Classifies an `m`-dimensional subcube by how many of its vertices lie in
/// `s`: dense from `(2/3) p 2^m` up, moderate from `(1/7) p 2^m` up, sparse
/// below. Both lower thresholds are inclusive.
pub fn classify_cube_density(
    s: &VertexSet,
    cube_vertices: &[VertexId],
    p: &Rational,
    m: u32,
) -> Result<CubeDensity> {
    if m >= 63 || cube_vertices.len() as u64 != 1u64 << m {
        return Err(LabError::param(format!(
            "a {m}-dimensional cube lists 2^{m} vertices, got {}",
            cube_vertices.len()
        )));
    }
    let count = cube_vertices
        .iter()
        .filter(|&&v| (v as usize) < s.universe() && s.contains(v as usize))
        .count() as i64;
    let mass = p * Rational::from_integer(BigInt::from(1u64 << m));
    let c = int(count);
    Ok(if int(3) * &c >= int(2) * &mass {
        CubeDensity::Dense
    } else if int(7) * &c >= mass {
        CubeDensity::Moderate
    } else {
        CubeDensity::Sparse
    })
}
