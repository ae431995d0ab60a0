//! On-disk formats for samples and skeletons.
//!
//! A sample is a text manifest of `key=value` lines next to a binary payload
//! of little-endian `u64` bitset words. A skeleton file starts with the
//! same kind of manifest, extended with `k_max`, and then lists the retained
//! vertices and the `(k, u, v)` edge triples in ascending order, either as
//! text lines or as a binary block. Writes go to a temporary sibling first
//! and are renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use rand::Rng;

use crate::cube::{Dimension, VertexId, VertexSet};
use crate::error::{LabError, Result};
use crate::models::{MixedSample, PercolationSample};
use crate::rational::{Probability, Rational};
use crate::rng::{derive_seed, sequential};
use crate::skeleton::{local_adjacency, SkeletonGraph};

pub const FORMAT_VERSION: u32 = 1;
const BINARY_MARKER: &str = "binary";
const VERIFY_STREAM: u64 = 0x7665_7269_6679;

/// Ordered `key=value` record.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| LabError::parse(format!("manifest lacks {key}")))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| LabError::parse(format!("manifest {key}={raw:?} is malformed")))
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Parses lines up to the first blank line or the end of input.
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::parse(format!("manifest line {line:?} lacks '='")))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }
}

fn put_probability(m: &mut Manifest, prefix: &str, p: &Probability) -> Result<()> {
    let (n, d) = p.as_u64_pair()?;
    m.set(&format!("{prefix}_num"), n).set(&format!("{prefix}_den"), d);
    Ok(())
}

fn get_probability(m: &Manifest, prefix: &str) -> Result<Probability> {
    let n: u64 = m.get_parsed(&format!("{prefix}_num"))?;
    let d: u64 = m.get_parsed(&format!("{prefix}_den"))?;
    if d == 0 {
        return Err(LabError::parse(format!("{prefix}_den is zero")));
    }
    Probability::new(Rational::new(BigInt::from(n), BigInt::from(d)))
}

fn check_version(m: &Manifest) -> Result<()> {
    let v: u32 = m.get_parsed("format_version")?;
    if v != FORMAT_VERSION {
        return Err(LabError::parse(format!(
            "format version {v} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| LabError::param(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn words_to_bytes(words: &[u64]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

fn bytes_to_words(bytes: &[u8]) -> Result<Vec<u64>> {
    if bytes.len() % 8 != 0 {
        return Err(LabError::parse("payload length is not a multiple of 8"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn payload_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bits")
}

fn sample_manifest(kind: &str, d: Dimension, p: &Probability, q: &Probability, seed: u64) -> Result<Manifest> {
    let mut m = Manifest::new();
    m.set("format_version", FORMAT_VERSION).set("kind", kind).set("d", d.get());
    put_probability(&mut m, "p", p)?;
    put_probability(&mut m, "q", q)?;
    m.set("seed", seed);
    Ok(m)
}

/// Writes `<path>` (manifest) and `<path>.bits` (payload); returns the
/// payload path.
pub fn write_sample(path: &Path, sample: &PercolationSample) -> Result<PathBuf> {
    let mut m = sample_manifest("vertex", sample.d, &sample.p, &Probability::zero(), sample.seed)?;
    let payload = payload_path(path);
    m.set("vertices", sample.len());
    m.set("payload", payload.file_name().expect("file").to_string_lossy());
    write_atomic(&payload, &words_to_bytes(sample.vertices.words()))?;
    write_atomic(path, m.to_text().as_bytes())?;
    Ok(payload)
}

fn read_manifest_and_payload(path: &Path, kind: &str) -> Result<(Manifest, Vec<u64>)> {
    let m = Manifest::parse(&fs::read_to_string(path)?)?;
    check_version(&m)?;
    if m.get("kind")? != kind {
        return Err(LabError::parse(format!("expected a {kind} sample, found {}", m.get("kind")?)));
    }
    let payload = path.with_file_name(m.get("payload")?);
    Ok((m, bytes_to_words(&fs::read(payload)?)?))
}

pub fn read_sample(path: &Path) -> Result<PercolationSample> {
    let (m, words) = read_manifest_and_payload(path, "vertex")?;
    let d = Dimension::new(m.get_parsed("d")?)?;
    d.ensure_materializable()?;
    let vertices = VertexSet::from_words(d.vertex_count() as usize, words)?;
    let expected: usize = m.get_parsed("vertices")?;
    if vertices.len() != expected {
        return Err(LabError::parse("payload does not match the manifest vertex count"));
    }
    PercolationSample::from_vertices(d, get_probability(&m, "p")?, m.get_parsed("seed")?, vertices)
}

/// Mixed samples store the vertex words followed by the edge words.
pub fn write_mixed(path: &Path, sample: &MixedSample) -> Result<PathBuf> {
    let mut m = sample_manifest("mixed", sample.d, &sample.p, &sample.q, sample.seed)?;
    let payload = payload_path(path);
    m.set("vertices", sample.vertices.len());
    m.set("edges", sample.edges.len());
    m.set("payload", payload.file_name().expect("file").to_string_lossy());
    let mut words = sample.vertices.words().to_vec();
    words.extend_from_slice(sample.edges.words());
    write_atomic(&payload, &words_to_bytes(&words))?;
    write_atomic(path, m.to_text().as_bytes())?;
    Ok(payload)
}

pub fn read_mixed(path: &Path) -> Result<MixedSample> {
    let (m, words) = read_manifest_and_payload(path, "mixed")?;
    let d = Dimension::new(m.get_parsed("d")?)?;
    d.ensure_materializable()?;
    let n = d.vertex_count() as usize;
    let split = n.div_ceil(64);
    if words.len() < split {
        return Err(LabError::parse("payload too short"));
    }
    let edge_words = words[split..].to_vec();
    let vertices = VertexSet::from_words(n, words[..split].to_vec())?;
    let edges = VertexSet::from_words(n * d.get() as usize, edge_words)?;
    if vertices.len() != m.get_parsed::<usize>("vertices")? || edges.len() != m.get_parsed::<usize>("edges")? {
        return Err(LabError::parse("payload does not match the manifest counts"));
    }
    Ok(MixedSample {
        d,
        p: get_probability(&m, "p")?,
        q: get_probability(&m, "q")?,
        seed: m.get_parsed("seed")?,
        vertices,
        edges,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheFormat {
    Text,
    Binary,
}

impl CacheFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Text => "skel",
            Self::Binary => "skelb",
        }
    }
}

/// File name determined by `(d, p, seed, k_max, format_version)`.
pub fn skeleton_cache_name(d: u32, p: &Probability, seed: u64, k_max: u32, format: CacheFormat) -> String {
    let p = p.value();
    format!(
        "skeleton-d{d}-p{}_{}-s{seed}-k{k_max}-v{FORMAT_VERSION}.{}",
        p.numer(),
        p.denom(),
        format.extension()
    )
}

fn skeleton_manifest(sk: &SkeletonGraph, format: CacheFormat) -> Result<Manifest> {
    let mut m = sample_manifest("skeleton", sk.d, &sk.p, &Probability::zero(), sk.seed)?;
    m.set("k_max", sk.k_max)
        .set("vertices", sk.vertices.len())
        .set("edges", sk.edge_count());
    if format == CacheFormat::Binary {
        m.set("encoding", BINARY_MARKER);
    }
    Ok(m)
}

pub fn encode_skeleton(sk: &SkeletonGraph, format: CacheFormat) -> Result<Vec<u8>> {
    let mut out = skeleton_manifest(sk, format)?.to_text().into_bytes();
    out.push(b'\n');
    match format {
        CacheFormat::Text => {
            for v in &sk.vertices {
                out.extend_from_slice(format!("v {v}\n").as_bytes());
            }
            for (k, u, v) in sk.triples() {
                out.extend_from_slice(format!("e {k} {u} {v}\n").as_bytes());
            }
        }
        CacheFormat::Binary => {
            for v in &sk.vertices {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for (k, u, v) in sk.triples() {
                out.extend_from_slice(&k.to_le_bytes());
                out.extend_from_slice(&u.to_le_bytes());
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_skeleton(bytes: &[u8]) -> Result<SkeletonGraph> {
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| LabError::parse("skeleton file lacks a header terminator"))?;
    let header = std::str::from_utf8(&bytes[..split + 1])
        .map_err(|_| LabError::parse("skeleton header is not UTF-8"))?;
    let body = &bytes[split + 2..];
    let m = Manifest::parse(header)?;
    check_version(&m)?;
    if m.get("kind")? != "skeleton" {
        return Err(LabError::parse("not a skeleton file"));
    }
    let d = Dimension::new(m.get_parsed("d")?)?;
    let n_vertices: usize = m.get_parsed("vertices")?;
    let n_edges: usize = m.get_parsed("edges")?;
    let binary = m.get("encoding").map(|e| e == BINARY_MARKER).unwrap_or(false);

    let mut vertices = Vec::with_capacity(n_vertices);
    let mut triples = Vec::with_capacity(n_edges);
    if binary {
        let need = n_vertices * 8 + n_edges * 20;
        if body.len() != need {
            return Err(LabError::parse(format!("binary body has {} bytes, expected {need}", body.len())));
        }
        let u64_at = |i: usize| u64::from_le_bytes(body[i..i + 8].try_into().expect("8 bytes"));
        for i in 0..n_vertices {
            vertices.push(u64_at(8 * i));
        }
        let base = n_vertices * 8;
        for j in 0..n_edges {
            let at = base + 20 * j;
            let k = u32::from_le_bytes(body[at..at + 4].try_into().expect("4 bytes"));
            triples.push((k, u64_at(at + 4), u64_at(at + 12)));
        }
    } else {
        let text = std::str::from_utf8(body).map_err(|_| LabError::parse("skeleton body is not UTF-8"))?;
        let bad = |line: &str| LabError::parse(format!("bad skeleton line {line:?}"));
        for line in text.lines() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => vertices.push(parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(line))?),
                Some("e") => {
                    let mut nums = parts.map(|s| s.parse::<u64>());
                    let mut next = || nums.next().and_then(|r| r.ok()).ok_or_else(|| bad(line));
                    let (k, u, v) = (next()?, next()?, next()?);
                    triples.push((k as u32, u, v));
                }
                None => {}
                Some(_) => return Err(bad(line)),
            }
        }
        if vertices.len() != n_vertices || triples.len() != n_edges {
            return Err(LabError::parse("skeleton body does not match the manifest counts"));
        }
    }
    if !vertices.windows(2).all(|w| w[0] < w[1]) || !triples.windows(2).all(|w| w[0] < w[1]) {
        return Err(LabError::parse("skeleton listing is not strictly ascending"));
    }
    let k_max: u32 = m.get_parsed("k_max")?;
    let mut edges_by_distance: BTreeMap<u32, Vec<(VertexId, VertexId)>> = BTreeMap::new();
    for (k, u, v) in triples {
        if u >= v || (u ^ v).count_ones() != k || k > k_max {
            return Err(LabError::parse(format!("inconsistent edge ({k}, {u}, {v})")));
        }
        if vertices.binary_search(&u).is_err() || vertices.binary_search(&v).is_err() {
            return Err(LabError::parse(format!("edge ({u}, {v}) leaves the vertex list")));
        }
        edges_by_distance.entry(k).or_default().push((u, v));
    }
    Ok(SkeletonGraph {
        d,
        p: get_probability(&m, "p")?,
        seed: m.get_parsed("seed")?,
        k_max,
        vertices,
        edges_by_distance,
    })
}

pub fn write_skeleton(path: &Path, sk: &SkeletonGraph, format: CacheFormat) -> Result<()> {
    write_atomic(path, &encode_skeleton(sk, format)?)
}

pub fn read_skeleton(path: &Path) -> Result<SkeletonGraph> {
    decode_skeleton(&fs::read(path)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheVerification {
    pub pairs_checked: usize,
    pub mismatches: Vec<(VertexId, VertexId)>,
    pub vertices_match: bool,
}

impl CacheVerification {
    pub fn ok(&self) -> bool {
        self.vertices_match && self.mismatches.is_empty()
    }
}

/// Re-samples the vertex set and recomputes adjacency for a random
/// `fraction` of the candidate pairs (at least one when any exist).
pub fn verify_cached_skeleton(sk: &SkeletonGraph, fraction: f64, seed: u64) -> Result<CacheVerification> {
    let sample = crate::models::sample_vertex_percolation(sk.d, sk.p.clone(), sk.seed)?;
    let vertices_match = sample.retained() == sk.vertices;
    let mut rng = sequential(derive_seed(seed, VERIFY_STREAM));
    let mut candidates = Vec::new();
    for (i, &u) in sk.vertices.iter().enumerate() {
        for &v in &sk.vertices[i + 1..] {
            if (u ^ v).count_ones() <= sk.k_max {
                candidates.push((u, v));
            }
        }
    }
    let mut chosen: Vec<(VertexId, VertexId)> =
        candidates.iter().copied().filter(|_| rng.random_bool(fraction.clamp(0.0, 1.0))).collect();
    if chosen.is_empty() && !candidates.is_empty() {
        chosen.push(candidates[rng.random_range(0..candidates.len())]);
    }
    let mut mismatches = Vec::new();
    if vertices_match {
        for &(u, v) in &chosen {
            let k = (u ^ v).count_ones();
            let cached = sk.class(k).binary_search(&(u, v)).is_ok();
            if local_adjacency(&sample, u, v)? != cached {
                mismatches.push((u, v));
            }
        }
    }
    Ok(CacheVerification {
        pairs_checked: chosen.len(),
        mismatches,
        vertices_match,
    })
}
