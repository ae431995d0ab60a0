//! Direction sets of disjoint `k`-blocks and the subcubes of `Q^d(k)` they
//! span.
//!
//! A direction set `D = {e_1, .., e_m}` holds `m` pairwise disjoint
//! coordinate masks of popcount `k`. Together with any anchor `v` it spans
//! the `m`-dimensional cube `{ v ^ (union of a subset of D) }`, whose
//! edges join vertices at Hamming distance exactly `k`. Every member of the
//! cube spans the same cube, so handles store the minimum member, which is
//! the anchor with the top bit of every block cleared.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::cube::VertexId;
use crate::error::{LabError, Result};

/// Largest cube dimension whose vertices are ever listed.
pub const MAX_LISTED_CUBE_DIM: u32 = 20;
/// Largest ambient dimension for whole-cube partition enumeration.
pub const MAX_PARTITION_DIM: u32 = 20;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectionSet {
    d: u32,
    k: u32,
    /// ascending
    blocks: Vec<u64>,
}

impl DirectionSet {
    pub fn new(d: u32, k: u32, mut blocks: Vec<u64>) -> Result<Self> {
        if !(1..=63).contains(&d) {
            return Err(LabError::InvalidDimension(d));
        }
        if k == 0 || k > d {
            return Err(LabError::param(format!("block size k = {k} must lie in 1..={d}")));
        }
        let universe = (1u64 << d) - 1;
        let mut seen = 0u64;
        for &b in &blocks {
            if b.count_ones() != k {
                return Err(LabError::param(format!("block {b:#x} does not have {k} coordinates")));
            }
            if b & !universe != 0 {
                return Err(LabError::param(format!("block {b:#x} leaves Q^{d}")));
            }
            if b & seen != 0 {
                return Err(LabError::param(format!("block {b:#x} overlaps another block")));
            }
            seen |= b;
        }
        blocks.sort_unstable();
        Ok(Self { d, k, blocks })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn m(&self) -> u32 {
        self.blocks.len() as u32
    }

    pub fn blocks(&self) -> &[u64] {
        &self.blocks
    }

    /// Union of all blocks.
    pub fn support(&self) -> u64 {
        self.blocks.iter().fold(0, |acc, b| acc | b)
    }

    /// The set with `old` replaced by `new`.
    pub fn replace(&self, old: u64, new: u64) -> Result<Self> {
        let Some(pos) = self.blocks.iter().position(|&b| b == old) else {
            return Err(LabError::param(format!("block {old:#x} is not in the set")));
        };
        let mut blocks = self.blocks.clone();
        blocks[pos] = new;
        Self::new(self.d, self.k, blocks)
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.d == other.d && self.k == other.k && self.m() == other.m()
    }
}

/// The subcube `Q(D, v)` with its anchor canonicalised to the minimum member.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubcubeHandle {
    directions: DirectionSet,
    anchor: VertexId,
}

impl SubcubeHandle {
    pub fn new(directions: DirectionSet, v: VertexId) -> Result<Self> {
        if v >> directions.d != 0 {
            return Err(LabError::param(format!("anchor {v:#x} outside Q^{}", directions.d)));
        }
        let anchor = canonical_anchor(&directions, v);
        Ok(Self { directions, anchor })
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.directions
    }

    pub fn anchor(&self) -> VertexId {
        self.anchor
    }

    pub fn contains(&self, v: VertexId) -> bool {
        let x = v ^ self.anchor;
        if x & !self.directions.support() != 0 {
            return false;
        }
        self.directions.blocks.iter().all(|&b| x & b == 0 || x & b == b)
    }

    /// The member reached by flipping the blocks selected by `bits`.
    pub fn vertex(&self, bits: u64) -> VertexId {
        self.directions
            .blocks
            .iter()
            .enumerate()
            .filter(|(i, _)| bits >> i & 1 == 1)
            .fold(self.anchor, |acc, (_, b)| acc ^ b)
    }

    /// The same directions anchored at another vertex.
    pub fn with_anchor(&self, v: VertexId) -> Result<Self> {
        Self::new(self.directions.clone(), v)
    }
}

impl fmt::Display for SubcubeHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks: Vec<String> = self.directions.blocks.iter().map(|b| format!("{b:#x}")).collect();
        write!(f, "{} @{:#x}", blocks.join(","), self.anchor)
    }
}

fn canonical_anchor(directions: &DirectionSet, v: VertexId) -> VertexId {
    directions.blocks.iter().fold(v, |acc, &b| {
        let top = 1u64 << (63 - b.leading_zeros());
        if acc & top != 0 {
            acc ^ b
        } else {
            acc
        }
    })
}

/// The `2^m` members, indexed by the subset of blocks flipped.
pub fn subcube_vertices(h: &SubcubeHandle) -> Result<Vec<VertexId>> {
    let m = h.directions.m();
    if m > MAX_LISTED_CUBE_DIM {
        return Err(LabError::guard(format!(
            "cube dimension {m} exceeds {MAX_LISTED_CUBE_DIM}"
        )));
    }
    Ok((0..1u64 << m).map(|bits| h.vertex(bits)).collect())
}

/// Whether every member of `Q(D, v)` yields the same canonical handle.
pub fn anchor_invariance_check(directions: &DirectionSet, v: VertexId) -> Result<bool> {
    let h = SubcubeHandle::new(directions.clone(), v)?;
    Ok(subcube_vertices(&h)?
        .into_iter()
        .all(|u| canonical_anchor(directions, u) == h.anchor))
}

/// Whether the cubes `Q(D, v)` over all `v` form exactly `2^(d-m)` classes
/// that partition `Q^d`.
pub fn partition_check(directions: &DirectionSet) -> Result<bool> {
    let d = directions.d;
    if d > MAX_PARTITION_DIM {
        return Err(LabError::guard(format!(
            "partition enumeration limited to d <= {MAX_PARTITION_DIM}"
        )));
    }
    let m = directions.m();
    let anchors: BTreeSet<VertexId> =
        (0..1u64 << d).map(|v| canonical_anchor(directions, v)).collect();
    if anchors.len() as u64 != 1u64 << (d - m) {
        return Ok(false);
    }
    let mut covered = vec![false; 1usize << d];
    for &a in &anchors {
        let h = SubcubeHandle {
            directions: directions.clone(),
            anchor: a,
        };
        for u in subcube_vertices(&h)? {
            if std::mem::replace(&mut covered[u as usize], true) {
                return Ok(false);
            }
        }
    }
    Ok(covered.iter().all(|&c| c))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilySize {
    /// `|D_{k,m}| = d! / ((k!)^m m! (d-km)!)`
    pub direction_sets: BigUint,
    /// `2^(d-m) |D_{k,m}|`
    pub cubes: BigUint,
    /// Whether `cubes <= d^(2d)`, i.e. at most `e^(2 d ln d)`.
    pub within_bound: bool,
}

fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn family_size(d: u32, k: u32, m: u32) -> Result<FamilySize> {
    if d == 0 {
        return Err(LabError::InvalidDimension(d));
    }
    if k == 0 || (k as u64) * (m as u64) > d as u64 {
        return Err(LabError::param(format!("need k >= 1 and km <= d, got k={k} m={m} d={d}")));
    }
    let denom = factorial(k).pow(m) * factorial(m) * factorial(d - k * m);
    let direction_sets = factorial(d) / denom;
    let cubes = &direction_sets << (d - m) as usize;
    let within_bound = cubes <= BigUint::from(d).pow(2 * d);
    Ok(FamilySize {
        direction_sets,
        cubes,
        within_bound,
    })
}

/// Number of shared members, by listing the first cube.
pub fn intersection_size(h1: &SubcubeHandle, h2: &SubcubeHandle) -> Result<u64> {
    if !h1.directions.same_shape(&h2.directions) {
        return Err(LabError::param("handles come from different (d, k, m) families"));
    }
    Ok(subcube_vertices(h1)?.into_iter().filter(|&v| h2.contains(v)).count() as u64)
}

/// Two cubes are joined when they share exactly half their vertices.
pub fn gbox_adjacent(h1: &SubcubeHandle, h2: &SubcubeHandle) -> Result<bool> {
    let m = h1.directions.m();
    if m == 0 {
        return Ok(false);
    }
    Ok(intersection_size(h1, h2)? == 1u64 << (m - 1))
}

pub fn random_direction_set<R: Rng + ?Sized>(d: u32, k: u32, m: u32, rng: &mut R) -> Result<DirectionSet> {
    if k == 0 || (k as u64) * (m as u64) > d as u64 {
        return Err(LabError::param(format!("need k >= 1 and km <= d, got k={k} m={m} d={d}")));
    }
    let mut coords: Vec<u32> = (0..d).collect();
    coords.shuffle(rng);
    let blocks = coords
        .chunks(k as usize)
        .take(m as usize)
        .map(|c| c.iter().fold(0u64, |acc, &i| acc | 1 << i))
        .collect();
    DirectionSet::new(d, k, blocks)
}

pub fn random_handle<R: Rng + ?Sized>(d: u32, k: u32, m: u32, rng: &mut R) -> Result<SubcubeHandle> {
    let directions = random_direction_set(d, k, m, rng)?;
    let v = rng.random::<u64>() & ((1u64 << d) - 1);
    SubcubeHandle::new(directions, v)
}

/// A random neighbour of `h`: one block swapped for a different random
/// `k`-set disjoint from the other blocks, anchored at a random member of
/// `h`. The two cubes then share exactly the members spanned by the
/// common blocks.
pub fn random_adjacent<R: Rng + ?Sized>(h: &SubcubeHandle, rng: &mut R) -> Result<SubcubeHandle> {
    let dirs = &h.directions;
    let (d, k, m) = (dirs.d, dirs.k, dirs.m());
    if m == 0 {
        return Err(LabError::param("a 0-dimensional cube has no neighbours"));
    }
    let old = dirs.blocks[rng.random_range(0..m as usize)];
    let others = dirs.support() & !old;
    let mut free: Vec<u32> = (0..d).filter(|&i| others >> i & 1 == 0).collect();
    if free.len() <= k as usize {
        return Err(LabError::param("no room for a replacement block"));
    }
    let new = loop {
        free.shuffle(rng);
        let new = free[..k as usize].iter().fold(0u64, |acc, &i| acc | 1 << i);
        if new != old {
            break new;
        }
    };
    let anchor = h.vertex(rng.random_range(0..1u64 << m));
    SubcubeHandle::new(dirs.replace(old, new)?, anchor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn dirs(d: u32, k: u32, blocks: &[u64]) -> DirectionSet {
        DirectionSet::new(d, k, blocks.to_vec()).unwrap()
    }

    #[test]
    fn direction_set_validation() {
        assert!(DirectionSet::new(3, 2, vec![0b011, 0b110]).is_err());
        assert!(DirectionSet::new(3, 2, vec![0b111]).is_err());
        assert!(DirectionSet::new(3, 3, vec![0b1110]).is_err());
        assert_eq!(dirs(6, 2, &[0b110000, 0b11]).blocks(), &[0b11, 0b110000]);
    }

    #[test]
    fn small_cubes() {
        let h = SubcubeHandle::new(dirs(4, 2, &[]), 0b1010).unwrap();
        assert_eq!(subcube_vertices(&h).unwrap(), vec![0b1010]);

        let h = SubcubeHandle::new(dirs(3, 3, &[0b111]), 0).unwrap();
        assert_eq!(subcube_vertices(&h).unwrap(), vec![0, 0b111]);

        let h = SubcubeHandle::new(dirs(7, 3, &[0b0000111, 0b0111000]), 0).unwrap();
        let vs = subcube_vertices(&h).unwrap();
        assert_eq!(vs, vec![0, 0b0000111, 0b0111000, 0b0111111]);
        for i in 0..4usize {
            for j in i + 1..4 {
                let x = vs[i] ^ vs[j];
                let blocks = (i ^ j).count_ones();
                assert_eq!(x.count_ones(), 3 * blocks);
            }
        }
    }

    #[test]
    fn anchor_is_minimum_member() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let h = random_handle(9, 3, 2, &mut rng).unwrap();
            let vs = subcube_vertices(&h).unwrap();
            assert_eq!(h.anchor(), *vs.iter().min().unwrap());
            assert!(anchor_invariance_check(h.directions(), h.anchor()).unwrap());
            assert!(vs.iter().all(|&v| h.contains(v)));
            // a single flipped bit outside the support leaves the cube
            let outside = (0..9).find(|&i| h.directions().support() >> i & 1 == 0).unwrap();
            let other = h.with_anchor(h.anchor() ^ 1 << outside).unwrap();
            assert_ne!(other, h);
        }
    }

    #[test]
    fn partitions() {
        assert!(partition_check(&dirs(3, 3, &[0b111])).unwrap());
        assert!(partition_check(&dirs(7, 3, &[0b0000111, 0b0111000])).unwrap());
        assert!(partition_check(&dirs(4, 1, &[1, 2, 4, 8])).unwrap());
        assert!(partition_check(&dirs(21, 1, &[1])).is_err());
    }

    #[test]
    fn family_sizes() {
        let f = family_size(3, 3, 1).unwrap();
        assert_eq!(f.direction_sets, BigUint::from(1u8));
        assert_eq!(f.cubes, BigUint::from(4u8));
        let f = family_size(7, 3, 2).unwrap();
        assert_eq!(f.direction_sets, BigUint::from(70u8));
        assert_eq!(f.cubes, BigUint::from(2240u32));
        assert_eq!(family_size(5, 2, 0).unwrap().cubes, BigUint::from(32u8));
        assert!(family_size(5, 2, 3).is_err());
    }

    #[test]
    fn adjacency() {
        let a = SubcubeHandle::new(dirs(9, 3, &[0b111, 0b111000]), 0).unwrap();
        assert!(!gbox_adjacent(&a, &a).unwrap());
        let disjoint = a.with_anchor(1 << 6).unwrap();
        assert_eq!(intersection_size(&a, &disjoint).unwrap(), 0);
        assert!(!gbox_adjacent(&a, &disjoint).unwrap());
        let b = SubcubeHandle::new(dirs(9, 3, &[0b111, 0b111000000]), 0).unwrap();
        assert!(gbox_adjacent(&a, &b).unwrap());
        let other_k = SubcubeHandle::new(dirs(9, 2, &[0b11, 0b1100]), 0).unwrap();
        assert!(gbox_adjacent(&a, &other_k).is_err());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let h = random_handle(12, 3, 3, &mut rng).unwrap();
            let g = random_adjacent(&h, &mut rng).unwrap();
            assert!(gbox_adjacent(&h, &g).unwrap());
        }
    }

    #[test]
    fn display_format() {
        let h = SubcubeHandle::new(dirs(6, 3, &[0b111000, 0b111]), 0b111111).unwrap();
        assert_eq!(h.to_string(), "0x7,0x38 @0x0");
    }
}
