//! Covariance model zoo: values and parameter derivatives of `K_θ` on
//! blocks of observations.
//!
//! Every family shares the form
//!
//! ```text
//! K(a, b) = σ² · V(a, b) · M_ν(x(a, b)) + σ² η · 1[a = b]
//! ```
//!
//! where `M_ν` is the unit Matérn correlation, `x` a family-specific scaled
//! distance and `V` a variance modulation (identically 1 except for the
//! nonstationary-variance family). Derivatives are returned on the natural
//! parameter scale; the optimizer applies its own transforms.

pub mod basis;
pub mod bessel;
pub mod warp;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ObservationSet;

pub use basis::{build_orthogonal_basis, BASIS_SIZE};
pub use bessel::{bessel_k, ln_gamma, matern_corr, MaternKernel};
pub use warp::{harmonic_gradients, warp_location, WARP_SIZE};

/// Relative step for the central difference in the smoothness parameter.
pub const NU_STEP: f64 = 1e-4;

/// Largest accepted smoothness. Bessel evaluation cost grows linearly in ν,
/// and beyond this the kernel is indistinguishable from its squared
/// exponential limit at double precision anyway.
pub const MAX_SMOOTHNESS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `σ² exp(−d/α)` plus nugget: `[σ², α, η]`.
    Exponential,
    /// `[σ², α, ν, η]`.
    MaternIsotropic,
    /// Distance `‖L(s₁ − s₂)‖` with `L` lower triangular: `[σ², L11, L21, L22, ν, η]`.
    MaternAnisotropic2d,
    /// Variance modulated by `exp(Σ b_j(φ_j(s₁) + φ_j(s₂)))`: `[σ², α, ν, η, b1..b8]`.
    MaternNonstatVar,
    /// Unit-sphere locations warped by harmonic gradients: `[σ², α, ν, η, b1..b5]`.
    MaternSphereWarp,
    /// Warped sphere locations plus a time column: `[σ², α_space, α_time, ν, η, b1..b5]`.
    MaternSpacetimeWarp,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Exponential,
        Family::MaternIsotropic,
        Family::MaternAnisotropic2d,
        Family::MaternNonstatVar,
        Family::MaternSphereWarp,
        Family::MaternSpacetimeWarp,
    ];

    /// The four planar families used in the timing study.
    pub const PLANAR: [Family; 4] = [
        Family::Exponential,
        Family::MaternIsotropic,
        Family::MaternAnisotropic2d,
        Family::MaternNonstatVar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::MaternIsotropic => "matern_isotropic",
            Family::MaternAnisotropic2d => "matern_anisotropic2d",
            Family::MaternNonstatVar => "matern_nonstat_var",
            Family::MaternSphereWarp => "matern_sphere_warp",
            Family::MaternSpacetimeWarp => "matern_spacetime_warp",
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            Family::Exponential => 3,
            Family::MaternIsotropic => 4,
            Family::MaternAnisotropic2d => 6,
            Family::MaternNonstatVar => 4 + BASIS_SIZE,
            Family::MaternSphereWarp => 4 + WARP_SIZE,
            Family::MaternSpacetimeWarp => 5 + WARP_SIZE,
        }
    }

    pub fn param_names(self) -> Vec<String> {
        let fixed: &[&str] = match self {
            Family::Exponential => &["sigma2", "range", "nugget"],
            Family::MaternIsotropic | Family::MaternNonstatVar | Family::MaternSphereWarp => {
                &["sigma2", "range", "smoothness", "nugget"]
            }
            Family::MaternAnisotropic2d => &["sigma2", "l11", "l21", "l22", "smoothness", "nugget"],
            Family::MaternSpacetimeWarp => &[
                "sigma2",
                "range_space",
                "range_time",
                "smoothness",
                "nugget",
            ],
        };
        let mut names: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
        let extra = self.n_params() - fixed.len();
        names.extend((1..=extra).map(|j| format!("b{j}")));
        names
    }

    /// Which parameters are constrained positive on the natural scale.
    pub fn positive(self) -> Vec<bool> {
        let l = self.layout();
        (0..self.n_params())
            .map(|j| j == 0 || j == l.nugget || l.nu == Some(j) || (l.positive_geo.contains(&j)))
            .collect()
    }

    /// Number of coordinate columns the family expects, if fixed.
    pub fn coord_dim(self) -> Option<usize> {
        match self {
            Family::Exponential | Family::MaternIsotropic => None,
            Family::MaternAnisotropic2d | Family::MaternNonstatVar => Some(2),
            Family::MaternSphereWarp => Some(3),
            Family::MaternSpacetimeWarp => Some(4),
        }
    }

    /// Index of the nugget ratio η in the parameter vector.
    pub fn nugget_index(self) -> usize {
        self.layout().nugget
    }

    /// Index of the smoothness ν, if the family has one.
    pub fn smoothness_index(self) -> Option<usize> {
        self.layout().nu
    }

    /// Indices of the range-type parameters (ranges, or the diagonal of L).
    pub fn range_indices(self) -> Vec<usize> {
        self.layout().positive_geo.to_vec()
    }

    fn layout(self) -> Layout {
        match self {
            Family::Exponential => Layout {
                nu: None,
                nugget: 2,
                geo: &[1],
                positive_geo: &[1],
                var_coefs: None,
            },
            Family::MaternIsotropic => Layout {
                nu: Some(2),
                nugget: 3,
                geo: &[1],
                positive_geo: &[1],
                var_coefs: None,
            },
            Family::MaternAnisotropic2d => Layout {
                nu: Some(4),
                nugget: 5,
                geo: &[1, 2, 3],
                positive_geo: &[1, 3],
                var_coefs: None,
            },
            Family::MaternNonstatVar => Layout {
                nu: Some(2),
                nugget: 3,
                geo: &[1],
                positive_geo: &[1],
                var_coefs: Some(4),
            },
            Family::MaternSphereWarp => Layout {
                nu: Some(2),
                nugget: 3,
                geo: &[1, 4, 5, 6, 7, 8],
                positive_geo: &[1],
                var_coefs: None,
            },
            Family::MaternSpacetimeWarp => Layout {
                nu: Some(3),
                nugget: 4,
                geo: &[1, 2, 5, 6, 7, 8, 9],
                positive_geo: &[1, 2],
                var_coefs: None,
            },
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown covariance family `{s}`")))
    }
}

/// Positions of parameter groups within a family's vector.
struct Layout {
    nu: Option<usize>,
    nugget: usize,
    /// Parameters entering only through the scaled distance `x`.
    geo: &'static [usize],
    positive_geo: &'static [usize],
    /// First of the `BASIS_SIZE` variance coefficients.
    var_coefs: Option<usize>,
}

/// Per-location quantities reused across a block.
#[derive(Debug, Clone, Copy, Default)]
struct Site {
    warped: [f64; 3],
    grads: [[f64; 3]; WARP_SIZE],
    log_var: f64,
}

/// Covariance of a block of observations and its parameter derivatives.
///
/// All matrices are `k×k` row-major; `deriv(j)` is `∂/∂θ_j` on the natural
/// scale. Buffers are reused between calls.
#[derive(Debug, Clone, Default)]
pub struct CovMatrixPair {
    k: usize,
    q: usize,
    value: Vec<f64>,
    derivs: Vec<f64>,
    sites: Vec<Site>,
}

impl CovMatrixPair {
    pub fn size(&self) -> usize {
        self.k
    }

    /// Number of derivative matrices held (0 when only values were asked for).
    pub fn n_derivs(&self) -> usize {
        self.q
    }

    pub fn value(&self) -> &[f64] {
        &self.value[..self.k * self.k]
    }

    pub fn deriv(&self, j: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.derivs[j * kk..(j + 1) * kk]
    }

    pub fn value_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k, self.k, self.value())
    }

    pub fn deriv_matrix(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k, self.k, self.deriv(j))
    }

    fn reset(&mut self, k: usize, q: usize) {
        self.k = k;
        self.q = q;
        if self.value.len() < k * k {
            self.value.resize(k * k, 0.0);
        }
        if self.derivs.len() < q * k * k {
            self.derivs.resize(q * k * k, 0.0);
        }
        self.derivs[..q * k * k].fill(0.0);
        self.sites.clear();
    }
}

/// `exp(Σ_j b_j (φ_j(s₁) + φ_j(s₂)))`.
pub fn nonstat_variance_factor(b: &[f64], phi1: &[f64], phi2: &[f64]) -> f64 {
    b.iter()
        .zip(phi1.iter().zip(phi2))
        .map(|(b, (p, q))| b * (p + q))
        .sum::<f64>()
        .exp()
}

/// A covariance family with concrete parameter values.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    family: Family,
    params: Vec<f64>,
    /// `n×BASIS_SIZE` values indexed by original observation.
    basis: Option<Arc<DMatrix<f64>>>,
    kernel: MaternKernel,
    kernel_up: MaternKernel,
    kernel_down: MaternKernel,
}

impl CovarianceModel {
    /// Model for families that need no per-location basis.
    pub fn new(family: Family, params: &[f64]) -> Result<Self> {
        if family == Family::MaternNonstatVar {
            return Err(Error::Input(
                "the nonstationary-variance family needs a basis; use with_basis or for_data"
                    .into(),
            ));
        }
        Self::build(family, params, None)
    }

    pub fn with_basis(family: Family, params: &[f64], basis: Arc<DMatrix<f64>>) -> Result<Self> {
        if basis.ncols() != BASIS_SIZE {
            return Err(Error::Basis(format!(
                "expected {BASIS_SIZE} basis columns, got {}",
                basis.ncols()
            )));
        }
        Self::build(family, params, Some(basis))
    }

    /// Builds whatever per-dataset structure the family needs.
    pub fn for_data(family: Family, params: &[f64], data: &ObservationSet) -> Result<Self> {
        let model = if family == Family::MaternNonstatVar {
            let phi = build_orthogonal_basis(data.coords(), data.dim())?;
            Self::with_basis(family, params, Arc::new(phi))?
        } else {
            Self::new(family, params)?
        };
        model.check_data(data)?;
        Ok(model)
    }

    fn build(family: Family, params: &[f64], basis: Option<Arc<DMatrix<f64>>>) -> Result<Self> {
        if params.len() != family.n_params() {
            return Err(Error::Input(format!(
                "{family} takes {} parameters, got {}",
                family.n_params(),
                params.len()
            )));
        }
        let names = family.param_names();
        let layout = family.layout();
        for (j, &v) in params.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Parameter {
                    name: names[j].clone(),
                    value: v,
                    reason: "must be finite",
                });
            }
        }
        for (j, pos) in family.positive().into_iter().enumerate() {
            let v = params[j];
            if j == layout.nugget {
                if v < 0.0 {
                    return Err(Error::Parameter {
                        name: names[j].clone(),
                        value: v,
                        reason: "nugget ratio must be nonnegative",
                    });
                }
            } else if pos && (v.is_nan() || v <= 0.0) {
                return Err(Error::Parameter {
                    name: names[j].clone(),
                    value: v,
                    reason: "must be positive",
                });
            }
        }
        if let Some(i) = layout.nu {
            if params[i] > MAX_SMOOTHNESS {
                return Err(Error::Parameter {
                    name: names[i].clone(),
                    value: params[i],
                    reason: "smoothness above the supported maximum of 100",
                });
            }
        }
        let nu = layout.nu.map_or(0.5, |i| params[i]);
        let h = NU_STEP * nu;
        Ok(Self {
            family,
            params: params.to_vec(),
            basis,
            kernel: MaternKernel::new(nu),
            kernel_up: MaternKernel::new(nu + h),
            kernel_down: MaternKernel::new(nu - h),
        })
    }

    /// Same family and per-dataset structure, new parameters.
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        Self::build(self.family, params, self.basis.clone())
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn basis(&self) -> Option<&Arc<DMatrix<f64>>> {
        self.basis.as_ref()
    }

    pub fn sigma2(&self) -> f64 {
        self.params[0]
    }

    /// Nugget variance `τ² = σ² η`.
    pub fn nugget_variance(&self) -> f64 {
        self.params[0] * self.params[self.family.nugget_index()]
    }

    /// Checks that a dataset has the coordinates this model needs.
    pub fn check_data(&self, data: &ObservationSet) -> Result<()> {
        if let Some(d) = self.family.coord_dim() {
            if data.dim() != d {
                return Err(Error::Input(format!(
                    "{} needs {d} coordinate columns, dataset has {}",
                    self.family,
                    data.dim()
                )));
            }
        }
        if let Some(phi) = &self.basis {
            if phi.nrows() != data.len() {
                return Err(Error::Basis(format!(
                    "basis has {} rows for {} observations",
                    phi.nrows(),
                    data.len()
                )));
            }
        }
        if matches!(
            self.family,
            Family::MaternSphereWarp | Family::MaternSpacetimeWarp
        ) {
            for i in 0..data.len() {
                let s = &data.point(i)[..3];
                let r2: f64 = s.iter().map(|v| v * v).sum();
                if (r2.sqrt() - 1.0).abs() > 1e-6 {
                    return Err(Error::Input(format!(
                        "observation {i} is not on the unit sphere"
                    )));
                }
            }
        }
        Ok(())
    }

    fn site(&self, data: &ObservationSet, obs: usize) -> Site {
        let mut site = Site::default();
        match self.family {
            Family::MaternSphereWarp | Family::MaternSpacetimeWarp => {
                let first = if self.family == Family::MaternSphereWarp {
                    4
                } else {
                    5
                };
                let s = &data.point(obs)[..3];
                site.grads = harmonic_gradients(s);
                site.warped = warp_location(s, &self.params[first..first + WARP_SIZE]);
            }
            Family::MaternNonstatVar => {
                let phi = self
                    .basis
                    .as_ref()
                    .expect("nonstationary model carries a basis");
                site.log_var = (0..BASIS_SIZE)
                    .map(|j| self.params[4 + j] * phi[(obs, j)])
                    .sum();
            }
            _ => {}
        }
        site
    }

    /// Scaled distance and its partials with respect to the layout's
    /// geometric parameters (same order as `layout.geo`).
    fn scaled_distance(
        &self,
        data: &ObservationSet,
        (oa, sa): (usize, &Site),
        (ob, sb): (usize, &Site),
        partials: &mut [f64],
    ) -> f64 {
        let p = &self.params;
        match self.family {
            Family::Exponential | Family::MaternIsotropic | Family::MaternNonstatVar => {
                let d = sq_dist(data.point(oa), data.point(ob)).sqrt();
                let x = d / p[1];
                partials[0] = -x / p[1];
                x
            }
            Family::MaternAnisotropic2d => {
                let (a, b) = (data.point(oa), data.point(ob));
                let (d1, d2) = (a[0] - b[0], a[1] - b[1]);
                let u1 = p[1] * d1;
                let u2 = p[2] * d1 + p[3] * d2;
                let x = (u1 * u1 + u2 * u2).sqrt();
                if x > 0.0 {
                    partials[0] = u1 * d1 / x;
                    partials[1] = u2 * d1 / x;
                    partials[2] = u2 * d2 / x;
                } else {
                    partials[..3].fill(0.0);
                }
                x
            }
            Family::MaternSphereWarp => {
                let dw = sub3(&sa.warped, &sb.warped);
                let alpha = p[1];
                let x = norm3(&dw) / alpha;
                partials[0] = -x / alpha;
                for k in 0..WARP_SIZE {
                    partials[1 + k] = if x > 0.0 {
                        dot3(&dw, &sub3(&sa.grads[k], &sb.grads[k])) / (alpha * alpha * x)
                    } else {
                        0.0
                    };
                }
                x
            }
            Family::MaternSpacetimeWarp => {
                let dw = sub3(&sa.warped, &sb.warped);
                let dt = data.point(oa)[3] - data.point(ob)[3];
                let (as_, at) = (p[1], p[2]);
                let ds2 = dot3(&dw, &dw);
                let x = (ds2 / (as_ * as_) + dt * dt / (at * at)).sqrt();
                if x > 0.0 {
                    partials[0] = -ds2 / (as_ * as_ * as_ * x);
                    partials[1] = -dt * dt / (at * at * at * x);
                    for k in 0..WARP_SIZE {
                        partials[2 + k] =
                            dot3(&dw, &sub3(&sa.grads[k], &sb.grads[k])) / (as_ * as_ * x);
                    }
                } else {
                    partials[..2 + WARP_SIZE].fill(0.0);
                }
                x
            }
        }
    }

    fn correlation(&self, x: f64) -> (f64, f64) {
        if self.family == Family::Exponential {
            let e = (-x).exp();
            (e, -e)
        } else {
            self.kernel.value_and_slope(x)
        }
    }

    /// Covariance block over observations `obs` (original indices). With
    /// `derivs` the natural-scale parameter derivatives are filled too.
    pub fn cov_block(
        &self,
        data: &ObservationSet,
        obs: &[usize],
        derivs: bool,
        out: &mut CovMatrixPair,
    ) {
        let k = obs.len();
        let q = if derivs { self.n_params() } else { 0 };
        out.reset(k, q);
        for &o in obs {
            let s = self.site(data, o);
            out.sites.push(s);
        }
        let layout = self.family.layout();
        let sigma2 = self.params[0];
        let eta = self.params[layout.nugget];
        let kk = k * k;
        let nu_h = NU_STEP * self.kernel.nu();
        let mut partials = [0.0; 8];

        for a in 0..k {
            for b in 0..=a {
                let sa = out.sites[a];
                let sb = out.sites[b];
                let x = self.scaled_distance(data, (obs[a], &sa), (obs[b], &sb), &mut partials);
                let (corr, slope) = if derivs {
                    self.correlation(x)
                } else if self.family == Family::Exponential {
                    ((-x).exp(), 0.0)
                } else {
                    (self.kernel.value(x), 0.0)
                };
                let vfac = if layout.var_coefs.is_some() {
                    (sa.log_var + sb.log_var).exp()
                } else {
                    1.0
                };
                let diag = a == b;
                let base = sigma2 * vfac * corr;
                let v = base + if diag { sigma2 * eta } else { 0.0 };
                out.value[a * k + b] = v;
                out.value[b * k + a] = v;
                if !derivs {
                    continue;
                }
                let mut set = |j: usize, val: f64| {
                    out.derivs[j * kk + a * k + b] = val;
                    out.derivs[j * kk + b * k + a] = val;
                };
                set(0, vfac * corr + if diag { eta } else { 0.0 });
                if diag {
                    set(layout.nugget, sigma2);
                }
                if let Some(jn) = layout.nu {
                    let dm = if x > 0.0 {
                        (self.kernel_up.value(x) - self.kernel_down.value(x)) / (2.0 * nu_h)
                    } else {
                        0.0
                    };
                    set(jn, sigma2 * vfac * dm);
                }
                if x > 0.0 {
                    for (slot, &j) in layout.geo.iter().enumerate() {
                        set(j, sigma2 * vfac * slope * partials[slot]);
                    }
                }
                if let Some(first) = layout.var_coefs {
                    let phi = self
                        .basis
                        .as_ref()
                        .expect("nonstationary model carries a basis");
                    for j in 0..BASIS_SIZE {
                        set(first + j, base * (phi[(obs[a], j)] + phi[(obs[b], j)]));
                    }
                }
            }
        }
    }

    /// Covariance between two observations, nugget included when `a == b`.
    pub fn covariance(&self, data: &ObservationSet, a: usize, b: usize) -> f64 {
        let mut out = CovMatrixPair::default();
        if a == b {
            self.cov_block(data, &[a], false, &mut out);
            out.value[0]
        } else {
            self.cov_block(data, &[a, b], false, &mut out);
            out.value[1]
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
