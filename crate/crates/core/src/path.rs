//! Short walks between subcubes of `Q^d(k)`.
//!
//! Two cubes are neighbours when they share half their vertices, which
//! happens whenever they have the same anchor and direction sets differing
//! in one block. A walk from `H` to `H'` picks close members `u` of `H` and
//! `v` of `H'`, then fixes the coordinates where they differ one at a time.
//! A single coordinate flip is three distance-`k` steps along blocks
//! `e`, `f`, `g` with `|e ∩ f| = (k-1)/2` and `e Δ f = g ∪ {i}`, which needs
//! `k` odd. Before each step the blocks of the current direction set that
//! meet the step are swapped for unused coordinates, then one block is
//! swapped for the step itself, after which the cube also contains the
//! moved vertex. At `v` the directions are exchanged for those of `H'`
//! through a family of blocks disjoint from both.

use std::fmt;

use crate::cube::{hamming, VertexId};
use crate::error::{LabError, Result};
use crate::family::{gbox_adjacent, subcube_vertices, DirectionSet, SubcubeHandle};

/// Largest cube dimension for which the closest member pair is searched.
const MAX_PAIR_SEARCH_DIM: u32 = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubePath {
    pub d: u32,
    pub k: u32,
    pub m: u32,
    pub handles: Vec<SubcubeHandle>,
}

impl CubePath {
    /// Number of steps.
    pub fn len(&self) -> usize {
        self.handles.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `4 k d`
    pub fn length_bound(&self) -> usize {
        4 * self.k as usize * self.d as usize
    }

    /// Checks every step (equal or adjacent) and the length bound.
    pub fn validate(&self) -> Result<()> {
        if self.handles.is_empty() {
            return Err(LabError::Invariant("empty cube path".into()));
        }
        for (i, pair) in self.handles.windows(2).enumerate() {
            if pair[0] != pair[1] && !gbox_adjacent(&pair[0], &pair[1])? {
                return Err(LabError::Invariant(format!(
                    "step {i}: {} and {} are not adjacent",
                    pair[0], pair[1]
                )));
            }
        }
        if self.len() > self.length_bound() {
            return Err(LabError::Invariant(format!(
                "path has {} steps, bound is {}",
                self.len(),
                self.length_bound()
            )));
        }
        Ok(())
    }

    /// Header line, then one handle per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("cube-path d={} k={} m={}\n", self.d, self.k, self.m);
        for h in &self.handles {
            out.push_str(&h.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| LabError::parse("empty cube path"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("cube-path") {
            return Err(LabError::parse(format!("bad cube path header {header:?}")));
        }
        let mut get = |name: &str| -> Result<u32> {
            let field = fields
                .next()
                .ok_or_else(|| LabError::parse(format!("missing {name} in header")))?;
            field
                .strip_prefix(name)
                .and_then(|s| s.strip_prefix('='))
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| LabError::parse(format!("bad header field {field:?}")))
        };
        let (d, k, m) = (get("d")?, get("k")?, get("m")?);
        let mut handles = Vec::new();
        for line in lines {
            let (blocks, anchor) = line
                .split_once('@')
                .ok_or_else(|| LabError::parse(format!("handle line without anchor: {line:?}")))?;
            let blocks = blocks
                .trim()
                .split(',')
                .filter(|s| !s.is_empty())
                .map(parse_hex)
                .collect::<Result<Vec<_>>>()?;
            let anchor = parse_hex(anchor.trim())?;
            let dirs = DirectionSet::new(d, k, blocks)?;
            if dirs.m() != m {
                return Err(LabError::parse(format!("handle {line:?} does not have {m} blocks")));
            }
            let h = SubcubeHandle::new(dirs, anchor)?;
            if h.anchor() != anchor {
                return Err(LabError::parse(format!("anchor in {line:?} is not canonical")));
            }
            handles.push(h);
        }
        Ok(Self { d, k, m, handles })
    }
}

impl fmt::Display for CubePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn parse_hex(s: &str) -> Result<u64> {
    let digits = s
        .strip_prefix("0x")
        .ok_or_else(|| LabError::parse(format!("expected hex value, got {s:?}")))?;
    u64::from_str_radix(digits, 16).map_err(|e| LabError::parse(format!("{s:?}: {e}")))
}

fn mask_of(coords: impl IntoIterator<Item = u32>) -> u64 {
    coords.into_iter().fold(0, |acc, i| acc | 1 << i)
}

/// The lowest `n` coordinates outside `avoid`, preferring those outside
/// `prefer_avoid` as well.
fn lowest_coords(d: u32, n: usize, avoid: u64, prefer_avoid: u64) -> Vec<u32> {
    let mut out: Vec<u32> = (0..d)
        .filter(|&i| (avoid | prefer_avoid) >> i & 1 == 0)
        .take(n)
        .collect();
    if out.len() < n {
        let taken = mask_of(out.iter().copied());
        out.extend(
            (0..d)
                .filter(|&i| (avoid | taken) >> i & 1 == 0)
                .take(n - out.len()),
        );
    }
    out.sort_unstable();
    out
}

/// Three `k`-sets whose symmetric sum is the single coordinate `i`.
fn flip_triple(d: u32, k: u32, i: u32, support: u64) -> [u64; 3] {
    let half = ((k - 1) / 2) as usize;
    let bit = 1u64 << i;
    let rest = lowest_coords(d, (k - 1) as usize, bit, support);
    let e = bit | mask_of(rest.iter().copied());
    let shared = mask_of(rest[..half].iter().copied());
    let outside = mask_of(lowest_coords(d, half + 1, e, support));
    let f = shared | outside;
    let g = (e ^ f) & !bit;
    debug_assert_eq!((e & f).count_ones() as usize, half);
    debug_assert_eq!(e ^ f ^ g, bit);
    [e, f, g]
}

fn closest_members(from: &SubcubeHandle, to: &SubcubeHandle) -> Result<(VertexId, VertexId)> {
    if from.directions().m() > MAX_PAIR_SEARCH_DIM {
        return Ok((from.anchor(), to.anchor()));
    }
    let a = subcube_vertices(from)?;
    let b = subcube_vertices(to)?;
    let mut best = (u32::MAX, 0, 0);
    for &u in &a {
        for &v in &b {
            let key = (hamming(u, v), u, v);
            if key < best {
                best = key;
            }
        }
    }
    Ok((best.1, best.2))
}

/// Builds and validates a walk from `from` to `to` in the cube graph.
///
/// Requires `k` odd and at least 3, `m >= 1` and `d >= 2 k^2 (m + 1)` so
/// that replacement blocks always fit.
pub fn construct_gbox_path(from: &SubcubeHandle, to: &SubcubeHandle) -> Result<CubePath> {
    let (d, k, m) = (from.directions().d(), from.directions().k(), from.directions().m());
    let target = to.directions();
    if (target.d(), target.k(), target.m()) != (d, k, m) {
        return Err(LabError::param("handles come from different (d, k, m) families"));
    }
    if k < 3 || k % 2 == 0 {
        return Err(LabError::param(format!("k must be odd and at least 3, got {k}")));
    }
    if m == 0 {
        return Err(LabError::param("cube paths need m >= 1"));
    }
    if (d as u64) < 2 * (k as u64).pow(2) * (m as u64 + 1) {
        return Err(LabError::param(format!(
            "need d >= 2k^2(m+1) = {}, got d = {d}",
            2 * k * k * (m + 1)
        )));
    }
    let mut path = CubePath {
        d,
        k,
        m,
        handles: vec![from.clone()],
    };
    if from == to {
        return Ok(path);
    }

    let (mut w, v) = closest_members(from, to)?;
    let mut dirs = from.directions().clone();
    let mut diff = w ^ v;
    while diff != 0 {
        let i = diff.trailing_zeros();
        diff &= diff - 1;
        for step in flip_triple(d, k, i, dirs.support()) {
            let hit: Vec<u64> = dirs.blocks().iter().copied().filter(|b| b & step != 0).collect();
            for old in hit {
                let fresh = mask_of(lowest_coords(d, k as usize, step | dirs.support(), 0));
                dirs = dirs.replace(old, fresh)?;
                path.handles.push(SubcubeHandle::new(dirs.clone(), w)?);
            }
            let old = dirs.blocks()[0];
            dirs = dirs.replace(old, step)?;
            path.handles.push(SubcubeHandle::new(dirs.clone(), w)?);
            w ^= step;
        }
    }
    debug_assert_eq!(w, v);

    if dirs != *target {
        let outgoing: Vec<u64> = dirs
            .blocks()
            .iter()
            .copied()
            .filter(|b| !target.blocks().contains(b))
            .collect();
        let incoming: Vec<u64> = target
            .blocks()
            .iter()
            .copied()
            .filter(|b| !dirs.blocks().contains(b))
            .collect();
        let free = lowest_coords(
            d,
            k as usize * outgoing.len(),
            dirs.support() | target.support(),
            0,
        );
        let bridge: Vec<u64> = free.chunks(k as usize).map(|c| mask_of(c.iter().copied())).collect();
        for (&old, &b) in outgoing.iter().zip(&bridge) {
            dirs = dirs.replace(old, b)?;
            path.handles.push(SubcubeHandle::new(dirs.clone(), v)?);
        }
        for (&b, &new) in bridge.iter().zip(&incoming) {
            dirs = dirs.replace(b, new)?;
            path.handles.push(SubcubeHandle::new(dirs.clone(), v)?);
        }
    }
    let last = path.handles.last().expect("nonempty");
    if last != to {
        return Err(LabError::Invariant(format!("path ends at {last}, expected {to}")));
    }
    path.validate()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::random_handle;
    use rand::SeedableRng;

    #[test]
    fn triples_sum_to_one_coordinate() {
        for k in [3u32, 5, 7] {
            for i in 0..20 {
                let [e, f, g] = flip_triple(40, k, i, 0b1011 << 10);
                for s in [e, f, g] {
                    assert_eq!(s.count_ones(), k);
                }
                assert_eq!((e & f).count_ones(), (k - 1) / 2);
                assert_eq!(e ^ f, g | 1 << i);
                assert_eq!(g >> i & 1, 0);
            }
        }
    }

    #[test]
    fn trivial_and_invalid_paths() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let h = random_handle(36, 3, 1, &mut rng).unwrap();
        let p = construct_gbox_path(&h, &h).unwrap();
        assert!(p.is_empty());
        let small = random_handle(20, 3, 1, &mut rng).unwrap();
        assert!(construct_gbox_path(&small, &small).is_err());
        let even = random_handle(40, 2, 1, &mut rng).unwrap();
        assert!(construct_gbox_path(&even, &even).is_err());
    }

    #[test]
    fn random_paths_validate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for (d, m) in [(36u32, 1u32), (54, 2)] {
            for _ in 0..25 {
                let a = random_handle(d, 3, m, &mut rng).unwrap();
                let b = random_handle(d, 3, m, &mut rng).unwrap();
                let p = construct_gbox_path(&a, &b).unwrap();
                assert_eq!(p.handles.first(), Some(&a));
                assert_eq!(p.handles.last(), Some(&b));
                assert!(p.len() <= 4 * 3 * d as usize);
                p.validate().unwrap();
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a = random_handle(54, 3, 2, &mut rng).unwrap();
        let b = random_handle(54, 3, 2, &mut rng).unwrap();
        let p = construct_gbox_path(&a, &b).unwrap();
        let text = p.to_text();
        assert!(text.starts_with("cube-path d=54 k=3 m=2\n"));
        assert_eq!(CubePath::from_text(&text).unwrap(), p);
        assert!(CubePath::from_text("cube-path d=54 k=3 m=2\n0x7,0x38 @0x4\n").is_err());
    }

    #[test]
    fn validate_rejects_jumps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let a = random_handle(36, 3, 1, &mut rng).unwrap();
        let outside = (0..36).find(|&i| a.directions().support() >> i & 1 == 0).unwrap();
        let far = a.with_anchor(a.anchor() ^ 1 << outside).unwrap();
        let p = CubePath {
            d: 36,
            k: 3,
            m: 1,
            handles: vec![a, far],
        };
        assert!(p.validate().is_err());
    }
}
