//! Experiment drivers. Each driver expands the configured grid, runs the
//! grid points on the worker pool and returns rows in grid order together
//! with an overall status.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use polylab_core::coupling::{coupling_distribution_test, conditions_i_iii_probe, CouplingParams, CouplingReport};
use polylab_core::cube::{exhaustive_isoperimetry_check, Dimension, VertexId};
use polylab_core::expansion::{
    cheeger_exact, cheeger_spectral_lower, cheeger_sweep_upper, degree_dichotomy_stats, degree_profile,
    high_degree_set_probe, CheegerOptions, CutEvaluation, SpectralCertificate, DEFAULT_MAX_EXACT_VERTICES,
    MAX_SPECTRAL_VERTICES, SPECTRAL_SLACK,
};
use polylab_core::family::random_handle;
use polylab_core::gof::median;
use polylab_core::graph::Graph;
use polylab_core::models::{fibre, project, sample_mixed, sample_vertex_percolation, Occupancy, PercolationSample};
use polylab_core::path::{construct_gbox_path, CubePath};
use polylab_core::persist::{
    read_skeleton, skeleton_cache_name, verify_cached_skeleton, write_mixed, write_sample, write_skeleton, CacheFormat,
};
use polylab_core::rational::{format_rational, int, to_f64, Probability, Rational};
use polylab_core::rng::{derive_seed, sequential};
use polylab_core::skeleton::{build_skeleton, SkeletonGraph, SkeletonOptions};
use polylab_core::{LabError, Result};
use rayon::prelude::*;

use crate::config::{CacheEncoding, CheegerMethod, ExperimentConfig};
use crate::output::{ResultRow, RowBuilder, Value};

/// Fraction of candidate pairs recomputed by `--verify-cache`.
pub const VERIFY_FRACTION: f64 = 0.01;

/// Bound on standardised pairwise edge correlations in the coupling test.
pub const CORRELATION_SIGMAS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Budget exhausted before every grid point ran.
    Partial(String),
    Statistical(String),
    Invariant(String),
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::Partial(_) => 1,
            Self::Invariant(_) => 2,
            Self::Statistical(_) => 3,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Self::Ok => 0,
            Self::Partial(_) => 1,
            Self::Statistical(_) => 2,
            Self::Invariant(_) => 3,
        }
    }

    fn worst(self, other: Self) -> Self {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub status: Status,
}

struct Point {
    rows: Vec<ResultRow>,
    status: Status,
}

impl Point {
    fn ok(rows: Vec<ResultRow>) -> Self {
        Self { rows, status: Status::Ok }
    }
}

fn params(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn micros(start: Instant) -> u64 {
    start.elapsed().as_micros().min(u64::MAX as u128) as u64
}

/// Runs `f` over `points` in parallel and merges in grid order. Points not
/// started before the budget ran out are reported as skipped rows.
fn run_grid<P, F>(experiment: &str, points: &[P], describe: impl Fn(&P) -> (String, u64), budget: Option<u64>, f: F) -> Result<Outcome>
where
    P: Sync,
    F: Fn(&P) -> Result<Point> + Sync,
{
    let start = Instant::now();
    let limit = budget.map(Duration::from_secs);
    let results: Vec<Option<Result<Point>>> = points
        .par_iter()
        .map(|p| {
            if limit.is_some_and(|l| start.elapsed() >= l) {
                None
            } else {
                Some(f(p))
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut status = Status::Ok;
    let mut skipped = 0usize;
    for (p, r) in points.iter().zip(results) {
        match r {
            Some(r) => {
                let point = r?;
                rows.extend(point.rows);
                status = status.worst(point.status);
            }
            None => {
                skipped += 1;
                let (params, seed) = describe(p);
                rows.push(ResultRow::new(experiment, &params, seed, "skipped_budget", Value::Flag(true), 0));
            }
        }
    }
    if skipped > 0 {
        status = status.worst(Status::Partial(format!(
            "budget of {}s exhausted; {skipped} of {} grid points skipped",
            budget.unwrap_or(0),
            points.len()
        )));
    }
    Ok(Outcome { rows, status })
}

fn probability(r: &Rational) -> Result<Probability> {
    Probability::new(r.clone())
}

fn dim(d: u32) -> Result<Dimension> {
    Dimension::new(d)
}

fn hex_labels(g: &Graph, cut: &CutEvaluation) -> String {
    cut.set.iter().map(|i| format!("{:#x}", g.label(i))).collect::<Vec<_>>().join(" ")
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.experiment.as_str() {
        "sample" => cmd_sample(cfg),
        "skeleton" => cmd_skeleton(cfg),
        "cheeger" => cmd_cheeger(cfg),
        "expansion-scan" => cmd_expansion_scan(cfg),
        "renorm-check" => cmd_renorm_check(cfg),
        "coupling" => cmd_coupling(cfg),
        "diameter-path" => cmd_diameter_path(cfg),
        "isoperimetry" => cmd_isoperimetry(cfg),
        "mixed-probe" => cmd_mixed_probe(cfg),
        "degree-stats" => cmd_degree_stats(cfg),
        other => Err(LabError::InvalidParameter(format!("unknown experiment {other:?}"))),
    }
}

fn data_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    let dir = cfg.data_dir.as_deref().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    Ok(dir)
}

fn grid_dps(cfg: &ExperimentConfig) -> Vec<(u32, Rational, u64)> {
    let mut out = Vec::new();
    for &d in &cfg.d {
        for p in &cfg.p {
            for s in cfg.seed_list() {
                out.push((d, p.clone(), s));
            }
        }
    }
    out
}

fn dps_params(&(d, ref p, s): &(u32, Rational, u64)) -> (String, u64) {
    (params(&[("d", d.to_string()), ("p", format_rational(p))]), s)
}

fn cmd_sample(cfg: &ExperimentConfig) -> Result<Outcome> {
    let dir = data_dir(cfg)?;
    let qs: Vec<Option<Rational>> = if cfg.q.is_empty() {
        vec![None]
    } else {
        cfg.q.iter().cloned().map(Some).collect()
    };
    let mut points = Vec::new();
    for (d, p, s) in grid_dps(cfg) {
        for q in &qs {
            points.push((d, p.clone(), q.clone(), s));
        }
    }
    let describe = |(d, p, q, s): &(u32, Rational, Option<Rational>, u64)| {
        let mut pp = vec![("d", d.to_string()), ("p", format_rational(p))];
        if let Some(q) = q {
            pp.push(("q", format_rational(q)));
        }
        (params(&pp), *s)
    };
    run_grid("sample", &points, describe, cfg.budget_seconds, |pt| {
        let t = Instant::now();
        let (d, p, q, s) = pt;
        let (pp, seed) = describe(pt);
        let prob = probability(p)?;
        let mut b = RowBuilder::new("sample", pp, seed);
        let expected = p * int(1i64 << d);
        match q {
            None => {
                let sample = sample_vertex_percolation(dim(*d)?, prob.clone(), *s)?;
                let name = format!("sample-d{d}-p{}_{}-s{s}.manifest", p.numer(), p.denom());
                write_sample(&dir.join(&name), &sample)?;
                b.push("retained", Value::count(sample.len()))
                    .push("expected_retained", Value::Rational(expected))
                    .push("manifest", Value::Text(name));
            }
            Some(q) => {
                let sample = sample_mixed(dim(*d)?, prob.clone(), probability(q)?, *s)?;
                let name = format!(
                    "mixed-d{d}-p{}_{}-q{}_{}-s{s}.manifest",
                    p.numer(),
                    p.denom(),
                    q.numer(),
                    q.denom()
                );
                write_mixed(&dir.join(&name), &sample)?;
                b.push("retained", Value::count(sample.vertices.len()))
                    .push("expected_retained", Value::Rational(expected))
                    .push("retained_edge_slots", Value::count(sample.edges.len()))
                    .push("manifest", Value::Text(name));
            }
        }
        Ok(Point::ok(b.finish(micros(t))))
    })
}

/// Loads the cached skeleton for `(d, p, seed, k_max)` from `dir`, or builds
/// and caches it. Returns the skeleton, its file name, and whether it was a
/// cache hit.
pub fn cached_skeleton(
    dir: &Path,
    sample: &PercolationSample,
    k_max: u32,
    encoding: CacheEncoding,
) -> Result<(SkeletonGraph, String, bool)> {
    let format = match encoding {
        CacheEncoding::Text => CacheFormat::Text,
        CacheEncoding::Binary => CacheFormat::Binary,
    };
    let k_max = k_max.min(sample.d.get());
    let name = skeleton_cache_name(sample.d.get(), &sample.p, sample.seed, k_max, format);
    let path = dir.join(&name);
    if path.exists() {
        let sk = read_skeleton(&path)?;
        if sk.d != sample.d || sk.p != sample.p || sk.seed != sample.seed || sk.k_max != k_max {
            return Err(LabError::Invariant(format!("{name} holds a different sample")));
        }
        return Ok((sk, name, true));
    }
    let sk = build_skeleton(sample, &SkeletonOptions::with_k_max(k_max))?;
    write_skeleton(&path, &sk, format)?;
    Ok((sk, name, false))
}

fn cmd_skeleton(cfg: &ExperimentConfig) -> Result<Outcome> {
    let dir = data_dir(cfg)?;
    let points = grid_dps(cfg);
    run_grid("skeleton", &points, dps_params, cfg.budget_seconds, |pt| {
        let t = Instant::now();
        let (d, p, s) = pt;
        let (pp, seed) = dps_params(pt);
        let sample = sample_vertex_percolation(dim(*d)?, probability(p)?, *s)?;
        let k_max = cfg.k.first().copied().unwrap_or(*d);
        let (sk, name, hit) = cached_skeleton(dir, &sample, k_max, cfg.cache_format.unwrap_or_default())?;
        if hit {
            eprintln!("cache hit: {name}");
        }
        let mut b = RowBuilder::new("skeleton", pp, seed);
        b.push("vertices", Value::count(sk.vertices.len()))
            .push("edges", Value::count(sk.edge_count()));
        for k in 1..=sk.k_max {
            b.push(format!("edges_k{k}"), Value::count(sk.class(k).len()));
        }
        b.push("cache_file", Value::Text(name.clone()));
        let mut status = Status::Ok;
        if cfg.verify_cache {
            let v = verify_cached_skeleton(&sk, VERIFY_FRACTION, *s)?;
            b.push("verify_pairs_checked", Value::count(v.pairs_checked))
                .push("verify_mismatches", Value::count(v.mismatches.len()))
                .push("verify_vertices_match", Value::Flag(v.vertices_match));
            if !v.ok() {
                status = Status::Invariant(format!("{name} disagrees with recomputation"));
            }
        }
        Ok(Point {
            rows: b.finish(micros(t)),
            status,
        })
    })
}

/// Cheeger certificates for one skeleton.
#[derive(Clone, Debug)]
pub struct ExpansionMetrics {
    pub graph: Graph,
    pub connected: bool,
    pub exact: Option<CutEvaluation>,
    pub spectral: Option<SpectralCertificate>,
    pub sweep: Option<CutEvaluation>,
}

impl ExpansionMetrics {
    /// `Some(ok)` when all three certificates are present.
    pub fn sandwich(&self) -> Option<bool> {
        let (exact, lower, upper) = (self.exact.as_ref()?, self.spectral.as_ref()?, self.sweep.as_ref()?);
        Some(lower.lower_bound - SPECTRAL_SLACK <= to_f64(&exact.ratio) && exact.ratio <= upper.ratio)
    }
}

/// Computes the requested certificates. The exact value is skipped above
/// `max_exact` vertices unless `require_exact` is set, in which case the
/// size guard is an error. Graphs with fewer than two vertices get none.
pub fn expansion_metrics(
    sk: &SkeletonGraph,
    method: CheegerMethod,
    max_exact: usize,
    require_exact: bool,
) -> Result<ExpansionMetrics> {
    let graph = sk.graph();
    let n = graph.vertex_count();
    let mut m = ExpansionMetrics {
        connected: graph.is_connected(),
        graph,
        exact: None,
        spectral: None,
        sweep: None,
    };
    if n < 2 {
        return Ok(m);
    }
    if method.exact() && (n <= max_exact || require_exact) {
        m.exact = Some(cheeger_exact(&m.graph, &CheegerOptions { max_vertices: max_exact })?);
    }
    if n <= MAX_SPECTRAL_VERTICES {
        if method.spectral() {
            m.spectral = Some(cheeger_spectral_lower(&m.graph)?);
        }
        if method.sweep() {
            m.sweep = Some(cheeger_sweep_upper(&m.graph)?);
        }
    }
    Ok(m)
}

fn push_metrics(b: &mut RowBuilder<'_>, m: &ExpansionMetrics) {
    if let Some(e) = &m.exact {
        b.push("exact_h", Value::Rational(e.ratio.clone()))
            .push("exact_set_size", Value::count(e.size()))
            .push("exact_boundary", Value::int(e.boundary))
            .push("exact_witness", Value::Text(hex_labels(&m.graph, e)));
    }
    if let Some(s) = &m.spectral {
        b.push("spectral_lambda2", Value::decimal(s.lambda2))
            .push("spectral_lower", Value::decimal(s.lower_bound))
            .push("spectral_residual", Value::decimal(s.residual));
    }
    if let Some(w) = &m.sweep {
        b.push("sweep_upper", Value::Rational(w.ratio.clone()))
            .push("sweep_witness", Value::Text(hex_labels(&m.graph, w)));
    }
}

fn sandwich_status(m: &ExpansionMetrics, what: &str) -> Status {
    match m.sandwich() {
        Some(false) => Status::Invariant(format!("{what}: certificates out of order")),
        _ => Status::Ok,
    }
}

fn cmd_cheeger(cfg: &ExperimentConfig) -> Result<Outcome> {
    let points = grid_dps(cfg);
    let method = cfg.method();
    let max_exact = cfg.max_exact.unwrap_or(DEFAULT_MAX_EXACT_VERTICES);
    run_grid("cheeger", &points, dps_params, cfg.budget_seconds, |pt| {
        let t = Instant::now();
        let (d, p, s) = pt;
        let (pp, seed) = dps_params(pt);
        let sample = sample_vertex_percolation(dim(*d)?, probability(p)?, *s)?;
        let sk = build_skeleton(&sample, &SkeletonOptions::default())?;
        if sk.vertices.len() < 2 {
            return Err(LabError::InvalidParameter(format!(
                "sample has {} vertices; edge-expansion needs two",
                sk.vertices.len()
            )));
        }
        let m = expansion_metrics(&sk, method, max_exact, true)?;
        let mut b = RowBuilder::new("cheeger", pp.clone(), seed);
        b.push("vertices", Value::count(sk.vertices.len()))
            .push("edges", Value::count(sk.edge_count()))
            .push("connected", Value::Flag(m.connected));
        push_metrics(&mut b, &m);
        Ok(Point {
            status: sandwich_status(&m, &pp),
            rows: b.finish(micros(t)),
        })
    })
}

/// Per-sample results of the expansion scan, kept for the summaries.
struct ScanSample {
    exact: Option<Rational>,
    lower: Option<f64>,
    connected: bool,
}

fn cmd_expansion_scan(cfg: &ExperimentConfig) -> Result<Outcome> {
    let points = grid_dps(cfg);
    let method = cfg.method();
    let max_exact = cfg.max_exact.unwrap_or(DEFAULT_MAX_EXACT_VERTICES);
    let scan = |pt: &(u32, Rational, u64)| -> Result<(Point, ScanSample)> {
        let t = Instant::now();
        let (d, p, s) = pt;
        let (pp, seed) = dps_params(pt);
        let sample = sample_vertex_percolation(dim(*d)?, probability(p)?, *s)?;
        let sk = build_skeleton(&sample, &SkeletonOptions::default())?;
        let m = expansion_metrics(&sk, method, max_exact, false)?;
        let profile = degree_profile(&sk);
        let mut b = RowBuilder::new("expansion-scan", pp.clone(), seed);
        b.push("vertices", Value::count(sk.vertices.len()))
            .push("edges", Value::count(sk.edge_count()))
            .push("connected", Value::Flag(m.connected));
        if sk.vertices.len() < 2 {
            b.push("degenerate", Value::Flag(true));
        } else if method.exact() && m.exact.is_none() {
            b.push("exact_unreachable", Value::Flag(true));
        }
        push_metrics(&mut b, &m);
        if let Some(md) = profile.min_degree() {
            b.push("min_degree", Value::count(md));
        }
        for k in 1..=sk.k_max {
            let sum = profile.class_sum(k);
            if sum > 0 {
                b.push(format!("degree_sum_k{k}"), Value::count(sum));
            }
        }
        let summary = ScanSample {
            exact: m.exact.as_ref().map(|e| e.ratio.clone()),
            lower: m.spectral.as_ref().map(|s| s.lower_bound),
            connected: m.connected && sk.vertices.len() >= 2,
        };
        Ok((
            Point {
                status: sandwich_status(&m, &format!("{pp};seed={seed}")),
                rows: b.finish(micros(t)),
            },
            summary,
        ))
    };
    // the per-sample summaries travel beside the rows
    let collected = std::sync::Mutex::new(BTreeMap::new());
    let indexed: Vec<(usize, (u32, Rational, u64))> = points.iter().cloned().enumerate().collect();
    let mut outcome = run_grid(
        "expansion-scan",
        &indexed,
        |(_, pt)| dps_params(pt),
        cfg.budget_seconds,
        |(i, pt)| {
            let (point, summary) = scan(pt)?;
            collected.lock().expect("summary lock").insert(*i, summary);
            Ok(point)
        },
    )?;
    let collected = collected.into_inner().expect("summary lock");
    for &d in &cfg.d {
        for p in &cfg.p {
            let group: Vec<&ScanSample> = indexed
                .iter()
                .filter(|(_, (pd, pp, _))| *pd == d && pp == p)
                .filter_map(|(i, _)| collected.get(i))
                .collect();
            let pp = params(&[("d", d.to_string()), ("p", format_rational(p))]);
            let mut b = RowBuilder::new("expansion-scan", pp, cfg.seed);
            b.push("summary_samples", Value::count(group.len()));
            let exact: Vec<f64> = group.iter().filter_map(|g| g.exact.as_ref().map(to_f64)).collect();
            if let Some(med) = median(&exact) {
                b.push("summary_exact_count", Value::count(exact.len()))
                    .push("summary_median_exact_h", Value::decimal(med));
            }
            let lower: Vec<f64> = group.iter().filter_map(|g| g.lower).collect();
            if let Some(med) = median(&lower) {
                b.push("summary_median_spectral_lower", Value::decimal(med));
            }
            if !group.is_empty() {
                let connected = group.iter().filter(|g| g.connected).count();
                b.push(
                    "summary_connected_fraction",
                    Value::Rational(polylab_core::rational::ratio(connected as i64, group.len() as i64)),
                );
            }
            outcome.rows.extend(b.finish(0));
        }
    }
    Ok(outcome)
}

/// Outcome of checking that every projected edge lifts to the full cube.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenormReport {
    pub d: u32,
    pub b: u32,
    pub projected_vertices: usize,
    pub projected_edges: usize,
    pub original_edges: usize,
    /// `(w, target fibre)` checks performed.
    pub checks: u64,
    /// `(u, v, w)`: projected edge `uv` and a retained `w` over `u` with no
    /// skeleton edge into the fibre over `v`.
    pub violations: Vec<(VertexId, VertexId, VertexId)>,
}

/// For every skeleton edge `uv` of the projected sample (in both
/// orientations) and every retained `w` over `u`, looks for a skeleton edge
/// of the original sample from `w` to a retained vertex over `v`.
pub fn renorm_check(sample: &PercolationSample, b: u32) -> Result<RenormReport> {
    let d = sample.d.get();
    if d > 8 || b > 2 {
        return Err(LabError::Guard(format!("renorm-check needs d <= 8 and b <= 2, got d={d} b={b}")));
    }
    let view = project(sample, b)?;
    let projected = build_skeleton(&view.projected, &SkeletonOptions::default())?;
    let original = build_skeleton(sample, &SkeletonOptions::default())?;
    let edges: HashSet<(VertexId, VertexId)> = original.triples().map(|(_, u, v)| (u, v)).collect();
    let adjacent = |x: VertexId, y: VertexId| edges.contains(&(x.min(y), x.max(y)));

    let mut checks = 0u64;
    let mut violations = Vec::new();
    for (_, u, v) in projected.triples() {
        for (from, to) in [(u, v), (v, u)] {
            for w in fibre(from, sample.d, b).filter(|&w| sample.is_retained(w)) {
                checks += 1;
                let lifted = fibre(to, sample.d, b).any(|x| sample.is_retained(x) && adjacent(w, x));
                if !lifted {
                    violations.push((from, to, w));
                }
            }
        }
    }
    Ok(RenormReport {
        d,
        b,
        projected_vertices: projected.vertices.len(),
        projected_edges: projected.edge_count(),
        original_edges: original.edge_count(),
        checks,
        violations,
    })
}

fn cmd_renorm_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut points = Vec::new();
    for &d in &cfg.d {
        for &b in cfg.b_values() {
            for p in &cfg.p {
                for s in cfg.seed_list() {
                    points.push((d, b, p.clone(), s));
                }
            }
        }
    }
    let describe = |(d, b, p, s): &(u32, u32, Rational, u64)| {
        (params(&[("d", d.to_string()), ("b", b.to_string()), ("p", format_rational(p))]), *s)
    };
    run_grid("renorm-check", &points, describe, cfg.budget_seconds, |pt| {
        let t = Instant::now();
        let (d, b, p, s) = pt;
        let (pp, seed) = describe(pt);
        let sample = sample_vertex_percolation(dim(*d)?, probability(p)?, *s)?;
        let report = renorm_check(&sample, *b)?;
        let mut rb = RowBuilder::new("renorm-check", pp.clone(), seed);
        rb.push("rho", Value::Rational(project(&sample, *b)?.rho))
            .push("vertices", Value::count(sample.len()))
            .push("projected_vertices", Value::count(report.projected_vertices))
            .push("projected_edges", Value::count(report.projected_edges))
            .push("original_edges", Value::count(report.original_edges))
            .push("checks", Value::int(report.checks))
            .push("violations", Value::count(report.violations.len()));
        if let Some(&(u, v, w)) = report.violations.first() {
            rb.push("first_violation", Value::Text(format!("{u:#x}-{v:#x} at {w:#x}")));
        }
        let status = if report.violations.is_empty() {
            Status::Ok
        } else {
            Status::Invariant(format!("{pp};seed={seed}: {} lift violations", report.violations.len()))
        };
        Ok(Point {
            rows: rb.finish(micros(t)),
            status,
        })
    })
}

/// Whether the coupling report passes both the goodness of fit and the
/// pairwise correlation check.
pub fn coupling_passes(r: &CouplingReport) -> (bool, bool) {
    (r.pass, r.max_correlation_z <= CORRELATION_SIGMAS)
}

fn cmd_coupling(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut points = Vec::new();
    for &d in &cfg.d {
        for &k in &cfg.k {
            for &m in &cfg.m {
                for p in &cfg.p {
                    points.push((d, k, m, p.clone()));
                }
            }
        }
    }
    // Bonferroni over the grid
    let significance = cfg.significance() / points.len().max(1) as f64;
    let trials = cfg.trials.unwrap_or(10_000);
    let describe = |(d, k, m, p): &(u32, u32, u32, Rational)| {
        (
            params(&[
                ("d", d.to_string()),
                ("k", k.to_string()),
                ("m", m.to_string()),
                ("p", format_rational(p)),
                ("trials", trials.to_string()),
            ]),
            cfg.seed,
        )
    };
    run_grid("coupling", &points, describe, cfg.budget_seconds, |pt| {
        let t = Instant::now();
        let (d, k, m, p) = pt;
        let (pp, seed) = describe(pt);
        let report = coupling_distribution_test(&CouplingParams {
            d: *d,
            k: *k,
            m: *m,
            p: probability(p)?,
            trials,
            significance,
            seed,
        })?;
        let (fit, corr) = coupling_passes(&report);
        let mut b = RowBuilder::new("coupling", pp.clone(), seed);
        b.push("q", Value::Rational(report.q.clone()))
            .push("chi2_statistic", Value::decimal(report.gof.statistic))
            .push("chi2_df", Value::count(report.gof.degrees_of_freedom))
            .push("chi2_p_value", Value::decimal(report.gof.p_value))
            .push("chi2_unexpected", Value::int(report.gof.unexpected))
            .push("significance", Value::decimal(significance))
            .push("edge_frequency", Value::decimal(report.edge_frequency()))
            .push("edge_z", Value::decimal(report.edge_z))
            .push("full_trials", Value::int(report.full_trials))
            .push("max_correlation_z", Value::decimal(report.max_correlation_z))
            .push("pass_fit", Value::Flag(fit))
            .push("pass_correlation", Value::Flag(corr));
        let status = if fit && corr {
            Status::Ok
        } else {
            Status::Statistical(format!("{pp}: fit={fit} correlation={corr}"))
        };
        Ok(Point {
            rows: b.finish(micros(t)),
            status,
        })
    })
}

/// Paths between random handle pairs; pair `i` draws both ends from the
/// stream `derive_seed(seed, i)`.
pub fn random_pair_paths(d: u32, k: u32, m: u32, pairs: u64, seed: u64) -> Result<Vec<Result<CubePath>>> {
    (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = sequential(derive_seed(seed, i));
            let from = random_handle(d, k, m, &mut rng)?;
            let to = random_handle(d, k, m, &mut rng)?;
            Ok(construct_gbox_path(&from, &to).and_then(|path| {
                path.validate()?;
                if path.handles.first() != Some(&from) || path.handles.last() != Some(&to) {
                    return Err(LabError::Invariant("path endpoints differ from the request".into()));
                }
                Ok(path)
            }))
        })
        .collect()
}

fn cmd_diameter_path(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut points = Vec::new();
    for &d in &cfg.d {
        for &k in &cfg.k {
            for &m in &cfg.m {
                points.push((d, k, m));
            }
        }
    }
    let pairs = cfg.pairs.unwrap_or(10);
    let dump = cfg.data_dir.as_deref();
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir)?;
    }
    let describe = |(d, k, m): &(u32, u32, u32)| {
        (params(&[("d", d.to_string()), ("k", k.to_string()), ("m", m.to_string())]), cfg.seed)
    };
    run_grid("diameter-path", &points, describe, cfg.budget_seconds, |pt| {
        let t = Instant::now();
        let &(d, k, m) = pt;
        let (pp, seed) = describe(pt);
        let results = random_pair_paths(d, k, m, pairs, seed)?;
        let mut lengths = Vec::new();
        let mut failures = Vec::new();
        for (i, r) in results.iter().enumerate() {
            match r {
                Ok(path) => {
                    lengths.push(path.len());
                    if let Some(dir) = dump {
                        let name = format!("path-d{d}-k{k}-m{m}-s{seed}-{i}.txt");
                        polylab_core::persist::write_atomic(&dir.join(name), path.to_text().as_bytes())?;
                    }
                }
                Err(e) => failures.push(format!("pair {i}: {e}")),
            }
        }
        let bound = 4 * k as usize * d as usize;
        let mut b = RowBuilder::new("diameter-path", pp.clone(), seed);
        b.push("pairs", Value::int(pairs))
            .push("valid", Value::count(lengths.len()))
            .push("length_bound", Value::count(bound));
        if let Some(&max) = lengths.iter().max() {
            let total: usize = lengths.iter().sum();
            b.push("max_length", Value::count(max))
                .push("mean_length", Value::Rational(polylab_core::rational::ratio(total as i64, lengths.len() as i64)));
        }
        if let Some(f) = failures.first() {
            b.push("first_failure", Value::Text(f.clone()));
        }
        let status = if failures.is_empty() {
            Status::Ok
        } else {
            Status::Invariant(format!("{pp}: {} of {pairs} paths failed", failures.len()))
        };
        Ok(Point {
            rows: b.finish(micros(t)),
            status,
        })
    })
}

fn cmd_isoperimetry(cfg: &ExperimentConfig) -> Result<Outcome> {
    let describe = |d: &u32| (params(&[("d", d.to_string())]), cfg.seed);
    run_grid("isoperimetry", &cfg.d, describe, cfg.budget_seconds, |d| {
        let t = Instant::now();
        let report = exhaustive_isoperimetry_check(*d)?;
        let (pp, seed) = describe(d);
        let mut b = RowBuilder::new("isoperimetry", pp.clone(), seed);
        b.push("subsets_checked", Value::int(report.subsets_checked))
            .push("passed", Value::Flag(report.passed()));
        let status = match &report.counterexample {
            None => Status::Ok,
            Some(c) => {
                b.push("counterexample", Value::Text(format!("{:#x} {:?}", c.set_mask, c.violation)));
                Status::Invariant(format!("{pp}: counterexample {:#x}", c.set_mask))
            }
        };
        Ok(Point {
            rows: b.finish(micros(t)),
            status,
        })
    })
}

fn cmd_mixed_probe(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut points = Vec::new();
    for (d, p, s) in grid_dps(cfg) {
        for q in &cfg.q {
            for a in &cfg.alpha {
                points.push((d, p.clone(), q.clone(), a.clone(), s));
            }
        }
    }
    let restarts = cfg.trials.unwrap_or(16).min(u32::MAX as u64) as u32;
    let describe = |(d, p, q, a, s): &(u32, Rational, Rational, Rational, u64)| {
        (
            params(&[
                ("d", d.to_string()),
                ("p", format_rational(p)),
                ("q", format_rational(q)),
                ("alpha", format_rational(a)),
            ]),
            *s,
        )
    };
    run_grid("mixed-probe", &points, describe, cfg.budget_seconds, |pt| {
        let t = Instant::now();
        let (d, p, q, a, s) = pt;
        let (pp, seed) = describe(pt);
        let sample = sample_mixed(dim(*d)?, probability(p)?, probability(q)?, *s)?;
        let report = high_degree_set_probe(&sample, to_f64(a), restarts)?;
        let mut b = RowBuilder::new("mixed-probe", pp, seed);
        b.push("retained", Value::count(report.retained))
            .push("admissible", Value::count(report.admissible))
            .push("restarts", Value::int(report.restarts));
        if let Some(w) = &report.best {
            b.push("best_size", Value::count(w.set.len()))
                .push("best_neighbourhood", Value::count(w.neighbourhood))
                .push("best_estimate", Value::decimal(w.estimate));
        }
        b.push("summary", Value::Text(report.summary()));
        Ok(Point::ok(b.finish(micros(t))))
    })
}

fn cmd_degree_stats(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut points = Vec::new();
    for (d, p, s) in grid_dps(cfg) {
        for &k in &cfg.k {
            for a in &cfg.alpha {
                points.push((d, p.clone(), k, a.clone(), s));
            }
        }
    }
    let samples = cfg.trials.unwrap_or(200) as usize;
    let describe = |(d, p, k, a, _): &(u32, Rational, u32, Rational, u64)| {
        params(&[
            ("d", d.to_string()),
            ("p", format_rational(p)),
            ("k", k.to_string()),
            ("alpha", format_rational(a)),
        ])
    };
    run_grid("degree-stats", &points, |pt| (describe(pt), pt.4), cfg.budget_seconds, |pt| {
        let t = Instant::now();
        let (d, p, k, a, s) = pt;
        let sample = sample_vertex_percolation(dim(*d)?, probability(p)?, *s)?;
        let k_max = (*k).min(*d);
        let sk = build_skeleton(&sample, &SkeletonOptions::with_k_max(k_max))?;
        let profile = degree_profile(&sk);
        let report = degree_dichotomy_stats(&sk, a, *k)?;
        let mut b = RowBuilder::new("degree-stats", describe(pt), *s);
        b.push("vertices", Value::count(sk.vertices.len()));
        if let Some(md) = profile.min_degree() {
            b.push("min_degree", Value::count(md));
        }
        for c in 1..=k_max {
            b.push(format!("degree_sum_k{c}"), Value::count(profile.class_sum(c)));
        }
        b.push("short_threshold", Value::Rational(report.short_threshold.clone()))
            .push("long_threshold", Value::Rational(report.long_threshold.clone()))
            .push("violators", Value::count(report.violators.len()))
            .push("violation_fraction", Value::decimal(report.violation_fraction()));
        for &m in &cfg.m {
            for eps in &cfg.epsilon {
                if *k * m > *d {
                    continue;
                }
                let c = conditions_i_iii_probe(&sk, *k, m, to_f64(eps), samples, *s)?;
                let tag = format!("m{m}_eps{}_{}", eps.numer(), eps.denom());
                b.push("density_deviation", Value::decimal(c.density_deviation))
                    .push(format!("cube_violation_{tag}"), Value::decimal(c.cube_violation))
                    .push(format!("pair_violation_{tag}"), Value::decimal(c.pair_violation));
            }
        }
        Ok(Point::ok(b.finish(micros(t))))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use polylab_core::rational::ratio;

    fn prob(n: i64, d: i64) -> Probability {
        Probability::from_ratio(n, d).unwrap()
    }

    #[test]
    fn renorm_b_zero_is_tautological() {
        for seed in 0..5 {
            let s = sample_vertex_percolation(dim(5).unwrap(), prob(1, 2), seed).unwrap();
            let r = renorm_check(&s, 0).unwrap();
            assert!(r.violations.is_empty());
            assert_eq!(r.projected_edges, r.original_edges);
            assert_eq!(r.checks, 2 * r.projected_edges as u64);
        }
    }

    #[test]
    fn renorm_small_cases_lift() {
        for seed in 0..10 {
            let s = sample_vertex_percolation(dim(5).unwrap(), prob(1, 2), seed).unwrap();
            for b in 1..=2 {
                assert!(renorm_check(&s, b).unwrap().violations.is_empty(), "seed {seed} b {b}");
            }
        }
    }

    #[test]
    fn renorm_full_cube_counts() {
        // the projection is the full Q^3, whose skeleton is the cube graph;
        // each of its 12 edges is checked from both ends for two points
        let s = sample_vertex_percolation(dim(4).unwrap(), prob(1, 1), 0).unwrap();
        let r = renorm_check(&s, 1).unwrap();
        assert_eq!(r.projected_vertices, 8);
        assert_eq!(r.projected_edges, 12);
        assert_eq!(r.original_edges, 32);
        assert_eq!(r.checks, 12 * 2 * 2);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn renorm_guards() {
        let s = sample_vertex_percolation(dim(9).unwrap(), prob(1, 2), 0).unwrap();
        assert!(matches!(renorm_check(&s, 1), Err(LabError::Guard(_))));
        let s = sample_vertex_percolation(dim(6).unwrap(), prob(1, 2), 0).unwrap();
        assert!(matches!(renorm_check(&s, 3), Err(LabError::Guard(_))));
    }

    #[test]
    fn status_ordering() {
        let s = Status::Ok.worst(Status::Partial("x".into()));
        assert_eq!(s.exit_code(), 1);
        let s = s.worst(Status::Invariant("y".into())).worst(Status::Statistical("z".into()));
        assert_eq!(s.exit_code(), 2);
    }

    #[test]
    fn cheeger_on_full_cube() {
        let mut cfg = ExperimentConfig::new("cheeger");
        cfg.d = vec![3];
        cfg.p = vec![ratio(1, 1)];
        let out = run(&cfg).unwrap();
        assert_eq!(out.status, Status::Ok);
        let h = out.rows.iter().find(|r| r.metric == "exact_h").unwrap();
        assert_eq!(h.value, "1/1");
        let up = out.rows.iter().find(|r| r.metric == "sweep_upper").unwrap();
        assert_eq!(up.value, "1/1");
    }

    #[test]
    fn rows_are_reproducible() {
        let mut cfg = ExperimentConfig::new("expansion-scan");
        cfg.d = vec![4];
        cfg.p = vec![ratio(1, 2)];
        cfg.seeds = Some(4);
        let a = run(&cfg).unwrap().rows;
        let b = run(&cfg).unwrap().rows;
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.same_result(y)));
    }

    #[test]
    fn zero_budget_flags_partial_output() {
        let mut cfg = ExperimentConfig::new("isoperimetry");
        cfg.d = vec![2, 3];
        cfg.budget_seconds = Some(0);
        let out = run(&cfg).unwrap();
        assert_eq!(out.status.exit_code(), 1);
        assert!(out.rows.iter().all(|r| r.metric == "skipped_budget"));
        assert_eq!(out.rows.len(), 2);
    }

    #[test]
    fn diameter_paths_validate() {
        let paths = random_pair_paths(36, 3, 1, 5, 9).unwrap();
        for p in paths {
            let p = p.unwrap();
            assert!(p.len() <= 4 * 3 * 36);
        }
    }

    #[test]
    fn degree_stats_rows() {
        let mut cfg = ExperimentConfig::new("degree-stats");
        cfg.d = vec![6];
        cfg.p = vec![ratio(1, 2)];
        cfg.k = vec![2];
        cfg.alpha = vec![ratio(1, 2)];
        cfg.m = vec![1];
        cfg.epsilon = vec![ratio(1, 2)];
        cfg.trials = Some(20);
        let out = run(&cfg).unwrap();
        assert_eq!(out.status, Status::Ok);
        assert!(out.rows.iter().any(|r| r.metric == "long_threshold"));
        assert!(out.rows.iter().any(|r| r.metric.starts_with("pair_violation")));
    }
}
