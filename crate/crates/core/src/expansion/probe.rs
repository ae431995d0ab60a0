use rand::seq::IndexedRandom;

use crate::cube::{hamming, VertexId};
use crate::error::{LabError, Result};
use crate::graph::Graph;
use crate::models::MixedSample;
use crate::rng::{derive_seed, sequential};

const MAX_PROBE_DIM: u32 = 16;
const PROBE_STREAM: u64 = 0x7072_6f62_65;
const GREEDY_ROUNDS: usize = 32;
const GREEDY_CANDIDATES: usize = 64;

/// Smallest observed `|N(S)| * sqrt(d) / |S|` together with its witness.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeWitness {
    /// Retained vertex labels, ascending.
    pub set: Vec<VertexId>,
    pub neighbourhood: usize,
    pub estimate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub alpha: f64,
    pub retained: usize,
    pub admissible: usize,
    pub restarts: u32,
    /// `None` when no admissible set exists.
    pub best: Option<ProbeWitness>,
}

impl ProbeReport {
    pub fn summary(&self) -> String {
        match &self.best {
            None => "no admissible S".to_string(),
            Some(w) => format!(
                "gamma-estimate {:.6} (|S| = {}, |N(S)| = {})",
                w.estimate,
                w.set.len(),
                w.neighbourhood
            ),
        }
    }
}

/// Growing set with incremental outer neighbourhood.
struct Growth<'a> {
    g: &'a Graph,
    inside: Vec<bool>,
    /// Neighbours in `S`, per vertex.
    touch: Vec<u32>,
    members: Vec<usize>,
    outer: usize,
}

impl<'a> Growth<'a> {
    fn new(g: &'a Graph) -> Self {
        let n = g.vertex_count();
        Self {
            g,
            inside: vec![false; n],
            touch: vec![0; n],
            members: Vec::new(),
            outer: 0,
        }
    }

    fn outer_after_adding(&self, v: usize) -> usize {
        let mut outer = self.outer;
        if self.touch[v] > 0 {
            outer -= 1;
        }
        for &w in self.g.neighbours(v) {
            let w = w as usize;
            if !self.inside[w] && self.touch[w] == 0 {
                outer += 1;
            }
        }
        outer
    }

    fn add(&mut self, v: usize) {
        self.outer = self.outer_after_adding(v);
        self.inside[v] = true;
        self.members.push(v);
        for &w in self.g.neighbours(v) {
            self.touch[w as usize] += 1;
        }
    }
}

/// Randomised search for sets of high-degree vertices with small outer
/// neighbourhood in `Q^d_{p,q}`.
///
/// A vertex is admissible when its degree in the sampled graph is at least
/// `alpha * d`. Each restart picks a random admissible centre and grows a
/// set through the admissible vertices in Hamming-ball order, scoring every
/// prefix of size at most `3|V|/4`; the best prefix is then extended
/// greedily while that lowers the ratio. The result is an empirical upper
/// estimate of the expansion constant, not a bound.
pub fn high_degree_set_probe(ms: &MixedSample, alpha: f64, budget: u32) -> Result<ProbeReport> {
    let d = ms.d.get();
    if d > MAX_PROBE_DIM {
        return Err(LabError::guard(format!(
            "high-degree probe limited to d <= {MAX_PROBE_DIM}"
        )));
    }
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(LabError::param(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let g = ms.graph();
    let n = g.vertex_count();
    let threshold = alpha * d as f64;
    // sets must consist of vertices with positive degree, whatever alpha is
    let admissible: Vec<usize> = (0..n)
        .filter(|&v| g.degree(v) > 0 && g.degree(v) as f64 >= threshold)
        .collect();
    let cap = 3 * n / 4;
    let mut report = ProbeReport {
        alpha,
        retained: n,
        admissible: admissible.len(),
        restarts: 0,
        best: None,
    };
    if admissible.is_empty() || cap == 0 {
        return Ok(report);
    }
    let root_d = (d as f64).sqrt();
    let mut rng = sequential(derive_seed(ms.seed, PROBE_STREAM));
    let mut best: Option<(usize, usize, Vec<usize>)> = None;
    let better = |outer: usize, size: usize, best: &Option<(usize, usize, Vec<usize>)>| match best {
        None => true,
        Some((o, s, _)) => outer * s < o * size,
    };

    for _ in 0..budget.max(1) {
        report.restarts += 1;
        let centre = g.label(*admissible.choose(&mut rng).expect("nonempty"));
        let mut order = admissible.clone();
        order.sort_by_key(|&v| (hamming(g.label(v), centre), v));
        let mut growth = Growth::new(&g);
        let mut local: Option<(usize, usize, Vec<usize>)> = None;
        for &v in order.iter().take(cap) {
            growth.add(v);
            let size = growth.members.len();
            if better(growth.outer, size, &local) {
                local = Some((growth.outer, size, Vec::new()));
            }
        }
        let (_, best_size, _) = local.expect("at least one prefix");

        let mut growth = Growth::new(&g);
        for &v in &order[..best_size] {
            growth.add(v);
        }
        let is_admissible = |v: usize| g.degree(v) > 0 && g.degree(v) as f64 >= threshold;
        for _ in 0..GREEDY_ROUNDS {
            if growth.members.len() >= cap {
                break;
            }
            let size = growth.members.len();
            let mut frontier: Vec<usize> = growth
                .members
                .iter()
                .flat_map(|&v| g.neighbours(v).iter().map(|&w| w as usize))
                .filter(|&w| !growth.inside[w] && is_admissible(w))
                .collect();
            frontier.sort_unstable();
            frontier.dedup();
            let pick = frontier
                .iter()
                .take(GREEDY_CANDIDATES)
                .map(|&w| (growth.outer_after_adding(w), w))
                .min();
            match pick {
                Some((outer, w)) if outer * size < growth.outer * (size + 1) => growth.add(w),
                _ => break,
            }
        }
        if better(growth.outer, growth.members.len(), &best) {
            best = Some((growth.outer, growth.members.len(), growth.members.clone()));
        }
    }

    let (outer, size, members) = best.expect("at least one restart");
    let mut set: Vec<VertexId> = members.iter().map(|&v| g.label(v)).collect();
    set.sort_unstable();
    report.best = Some(ProbeWitness {
        set,
        neighbourhood: outer,
        estimate: outer as f64 * root_d / size as f64,
    });
    Ok(report)
}
