//! Recursive projected compressive sensing (ReProCS) for online separation
//! of a stream `m_t = x_t + ℓ_t` into a sparse part and a part lying in a
//! slowly changing low-dimensional subspace.
//!
//! The crate also contains the synthetic data models, a batch principal
//! components pursuit comparator and numerical checkers for the structural
//! quantities and inequalities behind the algorithm's guarantees.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod pcp;
pub mod reprocs;
pub mod rng;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use linalg::BasisMatrix;
pub use reprocs::{ReProCSParams, ReProCSState};
pub use solver::{BpdnMethod, BpdnOptions, BpdnProblem, BpdnSolution};
pub use synth::{StreamSample, SubspaceModel, SupportSequence};
pub use analysis::{MetricsLog, TheoremParams};
pub use experiment::ExperimentConfig;
pub use pcp::{PcpOptions, PcpSolution};
