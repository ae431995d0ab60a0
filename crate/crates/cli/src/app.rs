//! Command-line parsing and the exit-code contract: 0 success, 1 guard
//! violation or bad input, 2 broken invariant, 3 failed statistical test.

use std::ffi::OsString;
use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use polylab_core::rational::{parse_rational, Rational};
use polylab_core::LabError;

use crate::config::{CacheEncoding, CheegerMethod, ExperimentConfig, OutputFormat};
use crate::experiments::{run, Status};
use crate::output::{append_rows, write_rows};

#[derive(Debug, Parser)]
#[command(name = "polylab", version, about = "Experiments on random 0/1 polytopes and hypercube percolation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample vertex (or, with --q, mixed) percolation and write manifest + payload files
    Sample(Flags),
    /// Build the polytope skeleton and write it to the cache directory
    Skeleton(Flags),
    /// Exact, spectral and sweep edge-expansion certificates for one skeleton
    Cheeger(Flags),
    /// Expansion certificates and degree sums over a (d, p, seed) grid
    ExpansionScan(Flags),
    /// Check that projected skeleton edges lift to the full cube
    RenormCheck(Flags),
    /// Goodness of fit of one cube's configuration against the product law
    Coupling(Flags),
    /// Build and validate cube-family paths between random handle pairs
    DiameterPath(Flags),
    /// Exhaustive edge and vertex isoperimetry check on small cubes
    Isoperimetry(Flags),
    /// Search mixed percolation for high-degree sets with small neighbourhoods
    MixedProbe(Flags),
    /// Degree dichotomy and cube-density statistics of a skeleton
    DegreeStats(Flags),
}

impl Command {
    fn split(self) -> (&'static str, Flags) {
        match self {
            Self::Sample(f) => ("sample", f),
            Self::Skeleton(f) => ("skeleton", f),
            Self::Cheeger(f) => ("cheeger", f),
            Self::ExpansionScan(f) => ("expansion-scan", f),
            Self::RenormCheck(f) => ("renorm-check", f),
            Self::Coupling(f) => ("coupling", f),
            Self::DiameterPath(f) => ("diameter-path", f),
            Self::Isoperimetry(f) => ("isoperimetry", f),
            Self::MixedProbe(f) => ("mixed-probe", f),
            Self::DegreeStats(f) => ("degree-stats", f),
        }
    }
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn parsed<T: std::str::FromStr<Err = LabError>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: LabError| e.to_string())
}

/// Flags shared by every subcommand. List flags take comma-separated values
/// and form the parameter grid.
#[derive(Debug, Args)]
pub struct Flags {
    #[arg(long, value_delimiter = ',')]
    pub d: Vec<u32>,
    /// Vertex retention probability, e.g. 1/2
    #[arg(long, value_delimiter = ',', value_parser = rational)]
    pub p: Vec<Rational>,
    /// Edge retention probability (mixed percolation)
    #[arg(long, value_delimiter = ',', value_parser = rational)]
    pub q: Vec<Rational>,
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<u32>,
    /// Fibre dimension for renorm-check
    #[arg(long, value_delimiter = ',')]
    pub b: Vec<u32>,
    #[arg(long, value_delimiter = ',', value_parser = rational)]
    pub alpha: Vec<Rational>,
    #[arg(long, value_delimiter = ',', value_parser = rational)]
    pub epsilon: Vec<Rational>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds starting at --seed
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Random handle pairs for diameter-path
    #[arg(long)]
    pub pairs: Option<u64>,
    /// Significance level before the Bonferroni split
    #[arg(long)]
    pub significance: Option<f64>,
    /// exact, spectral, sweep or all
    #[arg(long, value_parser = parsed::<CheegerMethod>)]
    pub method: Option<CheegerMethod>,
    /// Vertex limit for exact edge-expansion
    #[arg(long)]
    pub max_exact: Option<usize>,
    /// Recompute a random 1% of pairs of each cached skeleton
    #[arg(long)]
    pub verify_cache: bool,
    /// text or binary
    #[arg(long, value_parser = parsed::<CacheEncoding>)]
    pub cache_format: Option<CacheEncoding>,
    /// Directory for samples, skeleton caches and path dumps
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Append result rows here instead of printing them
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json
    #[arg(long, value_parser = parsed::<OutputFormat>)]
    pub format: Option<OutputFormat>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub budget_seconds: Option<u64>,
    /// Key/value file supplying defaults for unset flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Flags {
    fn into_config(self, experiment: &str) -> Result<ExperimentConfig, LabError> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        let cfg = ExperimentConfig {
            experiment: experiment.to_string(),
            d: self.d,
            p: self.p,
            q: self.q,
            k: self.k,
            m: self.m,
            b: self.b,
            alpha: self.alpha,
            epsilon: self.epsilon,
            seed: self.seed.unwrap_or(base.seed),
            seeds: self.seeds,
            trials: self.trials,
            pairs: self.pairs,
            significance: self.significance,
            method: self.method,
            max_exact: self.max_exact,
            verify_cache: self.verify_cache,
            cache_format: self.cache_format,
            data_dir: self.data_dir,
            out: self.out,
            format: self.format,
            threads: self.threads,
            budget_seconds: self.budget_seconds,
        };
        let seed = cfg.seed;
        let mut merged = cfg.merged_over(&base);
        merged.seed = seed;
        Ok(merged)
    }
}

pub fn error_exit_code(e: &LabError) -> i32 {
    match e {
        LabError::Invariant(_) => 2,
        _ => 1,
    }
}

fn execute(cfg: &ExperimentConfig) -> Result<Status, LabError> {
    let outcome = match cfg.threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| LabError::InvalidParameter(format!("thread pool: {e}")))?
            .install(|| run(cfg))?,
        _ => run(cfg)?,
    };
    match &cfg.out {
        Some(path) => append_rows(path, &outcome.rows, cfg.format())?,
        None => write_rows(io::stdout().lock(), &outcome.rows, cfg.format(), true)?,
    }
    Ok(outcome.status)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, flags) = cli.command.split();
    let result = flags.into_config(name).and_then(|cfg| execute(&cfg));
    match result {
        Ok(Status::Ok) => 0,
        Ok(status) => {
            let (Status::Partial(msg) | Status::Statistical(msg) | Status::Invariant(msg)) = &status else {
                unreachable!("ok handled above")
            };
            eprintln!("polylab {name}: {msg}");
            status.exit_code()
        }
        Err(e) => {
            eprintln!("polylab {name}: {e}");
            error_exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_build_a_config() {
        let cli = Cli::try_parse_from(["polylab", "renorm-check", "--d", "6,7", "--b", "1", "--p", "1/4,0.5", "--seeds", "3"]).unwrap();
        let (name, flags) = cli.command.split();
        let cfg = flags.into_config(name).unwrap();
        assert_eq!(cfg.experiment, "renorm-check");
        assert_eq!(cfg.d, vec![6, 7]);
        assert_eq!(cfg.p, vec![polylab_core::rational::ratio(1, 4), polylab_core::rational::ratio(1, 2)]);
        assert_eq!(cfg.seed_list(), vec![0, 1, 2]);
    }

    #[test]
    fn parse_failures_exit_with_one() {
        assert_eq!(main_with_args(["polylab", "cheeger", "--p", "x/y"]), 1);
        assert_eq!(main_with_args(["polylab", "frobnicate"]), 1);
        assert_eq!(main_with_args(["polylab", "--help"]), 0);
    }

    #[test]
    fn guard_violations_exit_with_one() {
        assert_eq!(main_with_args(["polylab", "isoperimetry", "--d", "5"]), 1);
        assert_eq!(main_with_args(["polylab", "renorm-check", "--d", "9", "--p", "1/2"]), 1);
    }
}
