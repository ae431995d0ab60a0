use rayon::prelude::*;

use super::{Certificate, CutEvaluation};
use crate::cube::VertexSet;
use crate::error::{LabError, Result};
use crate::graph::Graph;

pub const DEFAULT_MAX_EXACT_VERTICES: usize = 26;
const HARD_MAX_EXACT_VERTICES: usize = 40;

#[derive(Clone, Debug)]
pub struct CheegerOptions {
    pub max_vertices: usize,
}

impl Default for CheegerOptions {
    fn default() -> Self {
        Self {
            max_vertices: DEFAULT_MAX_EXACT_VERTICES,
        }
    }
}

#[derive(Clone, Copy)]
struct Best {
    boundary: u64,
    size: u32,
    set: u64,
}

impl Best {
    #[inline]
    fn offer(&mut self, boundary: u64, size: u32, set: u64) {
        // strict improvement keeps the first minimiser found
        if (boundary as u128) * (self.size as u128) < (self.boundary as u128) * (size as u128) {
            *self = Best { boundary, size, set };
        }
    }
}

/// Exact `h(G)` with a witness, for graphs with at most
/// `opts.max_vertices` vertices.
///
/// Every admissible `S` either avoids the last vertex or is the complement
/// of a set that does, so it suffices to walk the `2^(n-1)` subsets of the
/// first `n - 1` vertices in Gray-code order, scoring each subset and its
/// complement. The boundary is updated in O(1) per toggle from adjacency
/// bitmasks. The walk is sharded on the top index bits.
pub fn cheeger_exact(g: &Graph, opts: &CheegerOptions) -> Result<CutEvaluation> {
    let n = g.vertex_count();
    let limit = opts.max_vertices.min(HARD_MAX_EXACT_VERTICES);
    if n > limit {
        return Err(LabError::guard(format!(
            "exact Cheeger enumeration limited to {limit} vertices, graph has {n}"
        )));
    }
    if n < 2 {
        return Err(LabError::param("edge-expansion needs at least two vertices"));
    }
    let comps = g.components();
    if comps.len() > 1 {
        let smallest = comps.iter().min_by_key(|c| c.len()).expect("nonempty");
        let set = VertexSet::from_indices(n, smallest.iter().copied());
        return Ok(CutEvaluation::new(set, 0, Certificate::ExactMin));
    }

    let adj: Vec<u64> = (0..n)
        .map(|v| g.neighbours(v).iter().fold(0u64, |m, &w| m | 1 << w))
        .collect();
    let deg: Vec<u64> = (0..n).map(|v| g.degree(v) as u64).collect();
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let half = (n / 2) as u32;
    let free = n - 1;
    let shard_bits = if free >= 16 { 6.min(free) } else { 0 };
    let low_bits = free - shard_bits;

    let boundary_of = |set: u64| -> u64 {
        (0..n)
            .filter(|&v| set >> v & 1 == 1)
            .map(|v| (adj[v] & !set).count_ones() as u64)
            .sum()
    };

    let shard_best = |shard: u64| -> Best {
        let mut best = Best {
            boundary: u64::MAX,
            size: 1,
            set: 0,
        };
        let mut set = shard << low_bits;
        let mut boundary = boundary_of(set);
        let mut size = set.count_ones();
        let score = |set: u64, boundary: u64, size: u32, best: &mut Best| {
            if size >= 1 && size <= half {
                best.offer(boundary, size, set);
            }
            let csize = n as u32 - size;
            if csize >= 1 && csize <= half {
                best.offer(boundary, csize, full & !set);
            }
        };
        score(set, boundary, size, &mut best);
        for i in 1u64..(1u64 << low_bits) {
            let b = i.trailing_zeros() as usize;
            let bit = 1u64 << b;
            if set & bit == 0 {
                boundary = boundary + deg[b] - 2 * (adj[b] & set).count_ones() as u64;
                set |= bit;
                size += 1;
            } else {
                set &= !bit;
                boundary = boundary + 2 * (adj[b] & set).count_ones() as u64 - deg[b];
                size -= 1;
            }
            score(set, boundary, size, &mut best);
        }
        best
    };

    let shards: Vec<Best> = (0u64..1 << shard_bits).into_par_iter().map(shard_best).collect();
    let mut best = shards[0];
    for s in &shards[1..] {
        best.offer(s.boundary, s.size, s.set);
    }
    let set = VertexSet::from_indices(n, (0..n).filter(|&v| best.set >> v & 1 == 1));
    Ok(CutEvaluation::new(set, best.boundary, Certificate::ExactMin))
}
