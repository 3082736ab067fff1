//! The JSON document written by a fit.

use serde::{Deserialize, Serialize};

use crate::covariance::Family;
use crate::error::Result;
use crate::optimizer::{FitOptions, FitResult};

/// Everything needed to repeat a fit and compare against its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub input: Option<String>,
    pub family: Family,
    /// Covariate columns used, `None` meaning all of them.
    pub covariates: Option<Vec<String>>,
    pub intercept: bool,
    pub options: FitOptions,
    pub fit: FitResult,
    /// Nugget variance `σ²η` and its delta-method standard error.
    pub nugget_variance: f64,
    pub nugget_variance_se: Option<f64>,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
