//! Gaussian process parameter estimation with Vecchia's likelihood
//! approximation.
//!
//! The likelihood, its gradient and the Fisher information are all produced
//! by one pass over the ordered observations ([`vecchia::evaluate`]). The
//! [`optimizer`] module drives those quantities with penalized Fisher
//! scoring and also carries a Nelder-Mead baseline that only looks at the
//! likelihood.

pub mod benchmark;
pub mod covariance;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod optimizer;
pub mod simulate;
pub mod vecchia;

pub use covariance::{CovMatrixPair, CovarianceModel, Family};
pub use error::{Error, Result};
pub use geometry::{ConditioningPlan, ObservationSet};
pub use optimizer::{two_stage_fit, FitOptions, FitResult, Optimizer};

pub use vecchia::{LikelihoodReport, SinglePassState};
