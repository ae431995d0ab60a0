//! Edge-expansion `h(G) = min e(S, V∖S)/|S|` over `0 < |S| <= |V|/2`,
//! with three routes: exact subset enumeration, a spectral lower
//! certificate and a Fiedler sweep upper certificate. Ground truth is always
//! the exact enumerator; the spectral routines run in floating point and
//! are certificates with slack.

mod exact;
mod probe;
mod spectral;
mod stats;

pub use exact::{cheeger_exact, CheegerOptions, DEFAULT_MAX_EXACT_VERTICES};
pub use probe::{high_degree_set_probe, ProbeReport};
pub use spectral::{
    cheeger_spectral_lower, cheeger_sweep_upper, symmetric_eigen, Eigen, SpectralCertificate,
    MAX_SPECTRAL_VERTICES, RESIDUAL_TOLERANCE, SPECTRAL_SLACK,
};
pub use stats::{
    classify_cube_density, degree_dichotomy_stats, degree_profile, CubeDensity, DegreeProfile,
    DichotomyReport,
};

use num_bigint::BigInt;

use crate::cube::VertexSet;
use crate::graph::{outer_neighbourhood, Graph};
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certificate {
    ExactMin,
    SpectralLower,
    SweepUpper,
}

impl Certificate {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExactMin => "exact-min",
            Self::SpectralLower => "spectral-lower",
            Self::SweepUpper => "sweep-upper",
        }
    }
}

/// A cut `S` (indices into the graph) with its exact boundary ratio.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutEvaluation {
    pub set: VertexSet,
    pub boundary: u64,
    pub ratio: Rational,
    pub certificate: Certificate,
}

impl CutEvaluation {
    pub(crate) fn new(set: VertexSet, boundary: u64, certificate: Certificate) -> Self {
        let size = set.len() as i64;
        debug_assert!(size > 0);
        Self {
            ratio: Rational::new(BigInt::from(boundary), BigInt::from(size)),
            set,
            boundary,
            certificate,
        }
    }

    pub fn size(&self) -> usize {
        self.set.len()
    }
}

/// `|N_G(S)|`, excluding `S` itself.
pub fn vertex_expansion(g: &Graph, s: &VertexSet) -> usize {
    outer_neighbourhood(g, s)
}
