//! Experiment configuration: a parameter grid plus run settings, stored as a
//! flat `key=value` file whose keys mirror the command-line flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use polylab_core::cube::Dimension;
use polylab_core::rational::{format_rational, parse_rational, Probability, Rational};
use polylab_core::{LabError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(LabError::Parse(format!("unknown output format {s:?}"))),
        }
    }
}

/// Which certificates `cheeger` computes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CheegerMethod {
    Exact,
    Spectral,
    Sweep,
    #[default]
    All,
}

impl CheegerMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Spectral => "spectral",
            Self::Sweep => "sweep",
            Self::All => "all",
        }
    }

    pub fn exact(self) -> bool {
        matches!(self, Self::Exact | Self::All)
    }

    pub fn spectral(self) -> bool {
        matches!(self, Self::Spectral | Self::All)
    }

    pub fn sweep(self) -> bool {
        matches!(self, Self::Sweep | Self::All)
    }
}

impl FromStr for CheegerMethod {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "spectral" => Ok(Self::Spectral),
            "sweep" => Ok(Self::Sweep),
            "all" => Ok(Self::All),
            _ => Err(LabError::Parse(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CacheEncoding {
    #[default]
    Text,
    Binary,
}

impl CacheEncoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Text => "text",
            Self::Binary => "binary",
        }
    }
}

impl FromStr for CacheEncoding {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "binary" => Ok(Self::Binary),
            _ => Err(LabError::Parse(format!("unknown cache format {s:?}"))),
        }
    }
}

/// One experiment run. List-valued fields form a grid that is expanded in
/// the order the lists are written.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub d: Vec<u32>,
    pub p: Vec<Rational>,
    pub q: Vec<Rational>,
    pub k: Vec<u32>,
    pub m: Vec<u32>,
    pub b: Vec<u32>,
    pub alpha: Vec<Rational>,
    pub epsilon: Vec<Rational>,
    pub seed: u64,
    /// Number of consecutive seeds starting at `seed`.
    pub seeds: Option<u64>,
    pub trials: Option<u64>,
    pub pairs: Option<u64>,
    pub significance: Option<f64>,
    pub method: Option<CheegerMethod>,
    pub max_exact: Option<usize>,
    pub verify_cache: bool,
    pub cache_format: Option<CacheEncoding>,
    pub data_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub threads: Option<usize>,
    pub budget_seconds: Option<u64>,
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

fn split<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

fn number<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| LabError::Parse(format!("{key}: not a number: {s:?}")))
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self {
            experiment: experiment.into(),
            ..Self::default()
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        let n = self.seeds.unwrap_or(1);
        (0..n).map(|i| self.seed.wrapping_add(i)).collect()
    }

    pub fn method(&self) -> CheegerMethod {
        self.method.unwrap_or_default()
    }

    pub fn format(&self) -> OutputFormat {
        self.format.unwrap_or_default()
    }

    pub fn significance(&self) -> f64 {
        self.significance.unwrap_or(0.01)
    }

    pub fn probabilities(&self, values: &[Rational]) -> Result<Vec<Probability>> {
        values.iter().cloned().map(Probability::new).collect()
    }

    /// Fields not set in `self` are taken from `base`.
    pub fn merged_over(mut self, base: &ExperimentConfig) -> Self {
        fn fill<T: Clone>(v: &mut Vec<T>, b: &[T]) {
            if v.is_empty() {
                v.extend_from_slice(b);
            }
        }
        fn pick<T: Clone>(v: &mut Option<T>, b: &Option<T>) {
            if v.is_none() {
                v.clone_from(b);
            }
        }
        if self.experiment.is_empty() {
            self.experiment.clone_from(&base.experiment);
        }
        fill(&mut self.d, &base.d);
        fill(&mut self.p, &base.p);
        fill(&mut self.q, &base.q);
        fill(&mut self.k, &base.k);
        fill(&mut self.m, &base.m);
        fill(&mut self.b, &base.b);
        fill(&mut self.alpha, &base.alpha);
        fill(&mut self.epsilon, &base.epsilon);
        if self.seed == 0 {
            self.seed = base.seed;
        }
        pick(&mut self.seeds, &base.seeds);
        pick(&mut self.trials, &base.trials);
        pick(&mut self.pairs, &base.pairs);
        pick(&mut self.significance, &base.significance);
        pick(&mut self.method, &base.method);
        pick(&mut self.max_exact, &base.max_exact);
        self.verify_cache |= base.verify_cache;
        pick(&mut self.cache_format, &base.cache_format);
        pick(&mut self.data_dir, &base.data_dir);
        pick(&mut self.out, &base.out);
        pick(&mut self.format, &base.format);
        pick(&mut self.threads, &base.threads);
        pick(&mut self.budget_seconds, &base.budget_seconds);
        self
    }

    /// Serialises every set field, one `key=value` per line.
    pub fn to_text(&self) -> String {
        let mut lines = vec![format!("experiment={}", self.experiment)];
        let mut put = |key: &str, value: String| {
            if !value.is_empty() {
                lines.push(format!("{key}={value}"));
            }
        };
        put("d", join(&self.d, u32::to_string));
        put("p", join(&self.p, format_rational));
        put("q", join(&self.q, format_rational));
        put("k", join(&self.k, u32::to_string));
        put("m", join(&self.m, u32::to_string));
        put("b", join(&self.b, u32::to_string));
        put("alpha", join(&self.alpha, format_rational));
        put("epsilon", join(&self.epsilon, format_rational));
        put("seed", self.seed.to_string());
        let opt = |v: Option<String>| v.unwrap_or_default();
        put("seeds", opt(self.seeds.map(|v| v.to_string())));
        put("trials", opt(self.trials.map(|v| v.to_string())));
        put("pairs", opt(self.pairs.map(|v| v.to_string())));
        put("significance", opt(self.significance.map(|v| v.to_string())));
        put("method", opt(self.method.map(|v| v.as_str().to_string())));
        put("max_exact", opt(self.max_exact.map(|v| v.to_string())));
        if self.verify_cache {
            put("verify_cache", "true".to_string());
        }
        put("cache_format", opt(self.cache_format.map(|v| v.as_str().to_string())));
        put("data_dir", opt(self.data_dir.as_ref().map(|v| v.display().to_string())));
        put("out", opt(self.out.as_ref().map(|v| v.display().to_string())));
        put("format", opt(self.format.map(|v| v.as_str().to_string())));
        put("threads", opt(self.threads.map(|v| v.to_string())));
        put("budget_seconds", opt(self.budget_seconds.map(|v| v.to_string())));
        lines.join("\n") + "\n"
    }

    /// Parses the format written by [`to_text`](Self::to_text). Blank lines
    /// and lines starting with `#` are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LabError::Parse(format!("line {}: expected key=value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let u32s = |v: &str| split(v, |s| number::<u32>(key, s));
            match key {
                "experiment" => cfg.experiment = value.to_string(),
                "d" => cfg.d = u32s(value)?,
                "p" => cfg.p = split(value, parse_rational)?,
                "q" => cfg.q = split(value, parse_rational)?,
                "k" => cfg.k = u32s(value)?,
                "m" => cfg.m = u32s(value)?,
                "b" => cfg.b = u32s(value)?,
                "alpha" => cfg.alpha = split(value, parse_rational)?,
                "epsilon" => cfg.epsilon = split(value, parse_rational)?,
                "seed" => cfg.seed = number(key, value)?,
                "seeds" => cfg.seeds = Some(number(key, value)?),
                "trials" => cfg.trials = Some(number(key, value)?),
                "pairs" => cfg.pairs = Some(number(key, value)?),
                "significance" => cfg.significance = Some(number(key, value)?),
                "method" => cfg.method = Some(value.parse()?),
                "max_exact" => cfg.max_exact = Some(number(key, value)?),
                "verify_cache" => cfg.verify_cache = number(key, value)?,
                "cache_format" => cfg.cache_format = Some(value.parse()?),
                "data_dir" => cfg.data_dir = Some(PathBuf::from(value)),
                "out" => cfg.out = Some(PathBuf::from(value)),
                "format" => cfg.format = Some(value.parse()?),
                "threads" => cfg.threads = Some(number(key, value)?),
                "budget_seconds" => cfg.budget_seconds = Some(number(key, value)?),
                _ => return Err(LabError::Parse(format!("line {}: unknown key {key:?}", no + 1))),
            }
        }
        Ok(cfg)
    }

    /// Checks every grid entry against the preconditions of the experiment
    /// before anything runs.
    pub fn validate(&self) -> Result<()> {
        let need = |name: &str, empty: bool| {
            if empty {
                Err(LabError::InvalidParameter(format!("{}: --{name} is required", self.experiment)))
            } else {
                Ok(())
            }
        };
        for &d in &self.d {
            Dimension::new(d)?;
        }
        self.probabilities(&self.p)?;
        self.probabilities(&self.q)?;
        self.probabilities(&self.alpha)?;
        if self.seeds == Some(0) {
            return Err(LabError::InvalidParameter("seeds must be positive".into()));
        }
        if let Some(s) = self.significance {
            if !(0.0..1.0).contains(&s) {
                return Err(LabError::InvalidParameter(format!("significance {s} outside [0, 1)")));
            }
        }
        let guard = |msg: String| Err(LabError::Guard(msg));
        match self.experiment.as_str() {
            "sample" | "skeleton" | "cheeger" | "expansion-scan" => {
                need("d", self.d.is_empty())?;
                need("p", self.p.is_empty())?;
                for &d in &self.d {
                    if d > polylab_core::cube::MAX_MATERIALIZED_DIM {
                        return guard(format!("d = {d} is too large to materialise"));
                    }
                }
                if self.experiment == "skeleton" && self.k.iter().any(|&k| k == 0) {
                    return Err(LabError::InvalidParameter("k_max must be at least 1".into()));
                }
            }
            "renorm-check" => {
                need("d", self.d.is_empty())?;
                need("p", self.p.is_empty())?;
                for &d in &self.d {
                    if d > 8 {
                        return guard(format!("renorm-check needs d <= 8, got {d}"));
                    }
                    for &b in self.b_values() {
                        if b > 2 {
                            return guard(format!("renorm-check needs b <= 2, got {b}"));
                        }
                        if b >= d {
                            return Err(LabError::InvalidParameter(format!("need b < d, got b={b} d={d}")));
                        }
                    }
                }
            }
            "coupling" => {
                need("d", self.d.is_empty())?;
                need("k", self.k.is_empty())?;
                need("m", self.m.is_empty())?;
                need("p", self.p.is_empty())?;
                for &d in &self.d {
                    for &k in &self.k {
                        for &m in &self.m {
                            if d > polylab_core::coupling::MAX_COUPLING_DIM || !(1..=4).contains(&k) || !(1..=3).contains(&m) {
                                return guard(format!("coupling needs d <= 12, 1 <= k <= 4, 1 <= m <= 3; got d={d} k={k} m={m}"));
                            }
                            if k * m > d {
                                return Err(LabError::InvalidParameter(format!("need km <= d, got k={k} m={m} d={d}")));
                            }
                        }
                    }
                }
            }
            "diameter-path" => {
                need("d", self.d.is_empty())?;
                need("k", self.k.is_empty())?;
                need("m", self.m.is_empty())?;
                for &d in &self.d {
                    for &k in &self.k {
                        for &m in &self.m {
                            if k < 3 || k % 2 == 0 || m == 0 {
                                return Err(LabError::InvalidParameter(format!("paths need odd k >= 3 and m >= 1, got k={k} m={m}")));
                            }
                            if d > 63 || (d as u64) < 2 * (k as u64).pow(2) * (m as u64 + 1) {
                                return guard(format!("paths need 2k^2(m+1) <= d <= 63, got d={d} k={k} m={m}"));
                            }
                        }
                    }
                }
            }
            "isoperimetry" => {
                need("d", self.d.is_empty())?;
                if let Some(&d) = self.d.iter().find(|&&d| d > 4) {
                    return guard(format!("exhaustive isoperimetry needs d <= 4, got {d}"));
                }
            }
            "mixed-probe" => {
                need("d", self.d.is_empty())?;
                need("p", self.p.is_empty())?;
                need("q", self.q.is_empty())?;
                need("alpha", self.alpha.is_empty())?;
                if let Some(&d) = self.d.iter().find(|&&d| d > 16) {
                    return guard(format!("mixed-probe needs d <= 16, got {d}"));
                }
            }
            "degree-stats" => {
                need("d", self.d.is_empty())?;
                need("p", self.p.is_empty())?;
                need("k", self.k.is_empty())?;
                need("alpha", self.alpha.is_empty())?;
                if let Some(&d) = self.d.iter().find(|&&d| d > polylab_core::cube::MAX_MATERIALIZED_DIM) {
                    return guard(format!("d = {d} is too large to materialise"));
                }
                if let Some(&k) = self.k.iter().find(|&&k| k == 0 || k > 20) {
                    return Err(LabError::InvalidParameter(format!("degree-stats needs 1 <= k <= 20, got {k}")));
                }
            }
            other => return Err(LabError::InvalidParameter(format!("unknown experiment {other:?}"))),
        }
        Ok(())
    }

    /// `b` defaults to a single value 1.
    pub fn b_values(&self) -> &[u32] {
        if self.b.is_empty() {
            &[1]
        } else {
            &self.b
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
