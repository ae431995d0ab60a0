//! A desk-scale laboratory for random 0/1 polytopes: exact skeletons and
//! edge-expansion of `conv(Q^d_p)`, vertex and mixed percolation on the
//! hypercube, and the subcube families that couple long polytope edges to
//! mixed percolation.

pub mod coupling;
pub mod cube;
pub mod error;
pub mod expansion;
pub mod family;
pub mod gof;
pub mod graph;
pub mod lp;
pub mod models;
pub mod path;
pub mod persist;
pub mod rational;
pub mod rng;
pub mod skeleton;

pub use error::{LabError, Result};
