//! Exact Gaussian process simulation by dense Cholesky factorization.
//!
//! Random numbers come from ChaCha20 seeded with a 64-bit seed, and normal
//! variates use the ziggurat sampler of `rand_distr::StandardNormal`, so a
//! seed pins the dataset on every platform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::{CovMatrixPair, CovarianceModel, Family};
use crate::error::{Error, Result};
use crate::geometry::ObservationSet;

/// Largest dataset the dense simulator accepts.
pub const MAX_SIM_SIZE: usize = 20_000;

/// Where the simulated locations go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Evenly spaced square grid on [0,1]², endpoints included. `n` must be a
    /// perfect square.
    Grid,
    /// Independent uniform points on [0,1]^d.
    Uniform,
    /// Uniform points on the unit sphere in R³.
    Sphere,
    /// Uniform sphere points with a uniform time coordinate on [0,1].
    SphereTime,
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::Grid => "grid",
            Layout::Uniform => "uniform",
            Layout::Sphere => "sphere",
            Layout::SphereTime => "sphere-time",
        }
    }

    /// The natural layout for fitting `family` to simulated data.
    pub fn default_for(family: Family) -> Layout {
        match family {
            Family::MaternSphereWarp => Layout::Sphere,
            Family::MaternSpacetimeWarp => Layout::SphereTime,
            _ => Layout::Grid,
        }
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Layout::Grid),
            "uniform" => Ok(Layout::Uniform),
            "sphere" => Ok(Layout::Sphere),
            "sphere-time" => Ok(Layout::SphereTime),
            other => Err(Error::Input(format!("unknown layout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub layout: Layout,
    pub n: usize,
    /// Dimension for the uniform layout; ignored otherwise.
    pub dim: usize,
    pub family: Family,
    pub params: Vec<f64>,
    pub mean: f64,
    pub seed: u64,
}

impl SimConfig {
    /// The 70×70 grid exponential setup with (σ², α, τ²) = (2, 0.3, 0.2).
    pub fn grid_exponential(seed: u64) -> Self {
        Self {
            layout: Layout::Grid,
            n: 4900,
            dim: 2,
            family: Family::Exponential,
            params: vec![2.0, 0.3, 0.1],
            mean: 0.0,
            seed,
        }
    }
}

/// Locations for a layout, row-major `n×dim`. The location draw uses its own
/// stream so coordinates do not depend on the response seed.
pub fn locations(layout: Layout, n: usize, dim: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Input("cannot simulate an empty dataset".into()));
    }
    if n > MAX_SIM_SIZE {
        return Err(Error::Input(format!(
            "n = {n} exceeds the dense simulation limit of {MAX_SIM_SIZE}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    match layout {
        Layout::Grid => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(Error::Input(format!(
                    "grid layout needs a square n, got {n}"
                )));
            }
            let coord = |k: usize| {
                if side == 1 {
                    0.5
                } else {
                    k as f64 / (side - 1) as f64
                }
            };
            Ok(DMatrix::from_fn(n, 2, |i, c| {
                if c == 0 {
                    coord(i % side)
                } else {
                    coord(i / side)
                }
            }))
        }
        Layout::Uniform => {
            if dim == 0 {
                return Err(Error::Input("uniform layout needs dim >= 1".into()));
            }
            let vals: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
            Ok(DMatrix::from_row_slice(n, dim, &vals))
        }
        Layout::Sphere | Layout::SphereTime => {
            let cols = if layout == Layout::Sphere { 3 } else { 4 };
            let mut out = DMatrix::zeros(n, cols);
            for i in 0..n {
                let v: [f64; 3] = loop {
                    let v = [0; 3].map(|_| rng.sample::<f64, _>(StandardNormal));
                    if v.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
                        break v;
                    }
                };
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for c in 0..3 {
                    out[(i, c)] = v[c] / norm;
                }
                if cols == 4 {
                    out[(i, 3)] = rng.random::<f64>();
                }
            }
            Ok(out)
        }
    }
}

/// Dense simulator for one set of locations and one model. Holds the
/// Cholesky factor so repeated draws only cost a triangular product.
pub struct Simulator {
    template: ObservationSet,
    factor: DMatrix<f64>,
    mean: f64,
}

impl Simulator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        let coords = locations(config.layout, config.n, config.dim, config.seed)?;
        Self::at(coords, config.family, &config.params, config.mean)
    }

    /// Simulator at caller-supplied locations, with the constant design.
    pub fn at(coords: DMatrix<f64>, family: Family, params: &[f64], mean: f64) -> Result<Self> {
        let n = coords.nrows();
        if n > MAX_SIM_SIZE {
            return Err(Error::Input(format!(
                "n = {n} exceeds the dense simulation limit of {MAX_SIM_SIZE}"
            )));
        }
        let template = ObservationSet::with_intercept(coords, DVector::zeros(n))?;
        let model = CovarianceModel::for_data(family, params, &template)?;
        let all: Vec<usize> = (0..n).collect();
        let mut block = CovMatrixPair::default();
        model.cov_block(&template, &all, false, &mut block);
        let sigma = DMatrix::from_row_slice(n, n, block.value());
        drop(block);
        let factor = sigma
            .cholesky()
            .ok_or_else(|| {
                Error::Numerical("simulation covariance is not positive definite".into())
            })?
            .unpack();
        Ok(Self {
            template,
            factor,
            mean,
        })
    }

    pub fn len(&self) -> usize {
        self.template.len()
    }

    pub fn is_empty(&self) -> bool {
        self.template.is_empty()
    }

    /// One draw `y = μ + L z`.
    pub fn draw(&self, seed: u64) -> ObservationSet {
        let n = self.len();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut out = DVector::from_element(n, self.mean);
        out.gemv(1.0, &self.factor, &z, 1.0);
        self.template
            .with_response(out)
            .expect("response length matches the template")
    }
}

/// Simulates one dataset from `config`.
pub fn simulate(config: &SimConfig) -> Result<ObservationSet> {
    Ok(Simulator::new(config)?.draw(config.seed))
}
