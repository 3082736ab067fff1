//! Parameter estimation: penalized Fisher scoring, a Nelder–Mead baseline,
//! and the coarse-then-fine neighbor schedule that drives both.

pub mod penalty;
pub mod scoring;
pub mod simplex;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{CovarianceModel, Family};
use crate::error::{Error, Result};
use crate::geometry::{plan_for, ConditioningPlan, ObservationSet};
use crate::vecchia::{evaluate_with, EvalOptions, LikelihoodReport};

pub use penalty::{penalty, PenaltyTerms};
pub use scoring::{fisher_scoring, Convergence, Evaluation, Objective, ScoringConfig};
pub use simplex::{nelder_mead, SimplexConfig};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Log,
    Identity,
}

/// Names and working-scale transforms of a family's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub names: Vec<String>,
    pub transforms: Vec<Transform>,
}

impl ParamSpec {
    /// Positive parameters go through a log; the rest are left alone.
    pub fn for_family(family: Family) -> Self {
        Self {
            names: family.param_names(),
            transforms: family
                .positive()
                .into_iter()
                .map(|p| {
                    if p {
                        Transform::Log
                    } else {
                        Transform::Identity
                    }
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn to_working(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.transforms)
            .map(|(&v, t)| match t {
                Transform::Log => v.ln(),
                Transform::Identity => v,
            })
            .collect()
    }

    pub fn to_natural(&self, w: &[f64]) -> Vec<f64> {
        w.iter()
            .zip(&self.transforms)
            .map(|(&v, t)| match t {
                Transform::Log => v.exp(),
                Transform::Identity => v,
            })
            .collect()
    }

    /// Diagonal of `dθ/dw` at natural-scale `theta`.
    pub fn jacobian(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.transforms)
            .map(|(&v, t)| match t {
                Transform::Log => v,
                Transform::Identity => 1.0,
            })
            .collect()
    }
}

/// Residual variance of the least-squares fit of `y` on the design.
pub fn ols_residual_variance(data: &ObservationSet) -> Result<f64> {
    let x = data.design();
    let y = data.y();
    let n = data.len();
    let p = x.ncols();
    let resid = if p == 0 {
        y.clone()
    } else {
        let xtx = x.transpose() * x;
        let beta = xtx
            .cholesky()
            .ok_or(Error::RankDeficientDesign)?
            .solve(&(x.transpose() * y));
        y - x * beta
    };
    let dof = if n > p { n - p } else { n.max(1) };
    let s2 = resid.norm_squared() / dof as f64;
    if s2 > 0.0 && s2.is_finite() {
        Ok(s2)
    } else {
        Err(Error::Input("response has no residual variation".into()))
    }
}

/// Starting values: σ² at the least-squares residual variance, ranges at a
/// tenth of the domain diameter, smoothness 0.8, nugget ratio 0.1, the rest 0.
pub fn default_start(family: Family, data: &ObservationSet) -> Result<Vec<f64>> {
    let sigma2 = ols_residual_variance(data)?;
    let d = data.dim();
    let diam = |cols: std::ops::Range<usize>| {
        let v = data.bbox_diameter(cols);
        if v > 0.0 {
            v
        } else {
            1.0
        }
    };
    let mut theta = vec![0.0; family.n_params()];
    theta[0] = sigma2;
    theta[family.nugget_index()] = 0.1;
    if let Some(i) = family.smoothness_index() {
        theta[i] = 0.8;
    }
    match family {
        Family::MaternAnisotropic2d => {
            let inv = 1.0 / (0.1 * diam(0..d));
            theta[1] = inv;
            theta[3] = inv;
        }
        Family::MaternSpacetimeWarp => {
            theta[1] = 0.1 * diam(0..3);
            theta[2] = 0.1 * diam(3..4);
        }
        Family::MaternSphereWarp => theta[1] = 0.1 * diam(0..3),
        _ => theta[1] = 0.1 * diam(0..d),
    }
    Ok(theta)
}

/// Penalized Vecchia loglikelihood on the working scale.
pub struct VecchiaObjective<'a> {
    pub data: &'a ObservationSet,
    pub plan: &'a ConditioningPlan,
    pub model: CovarianceModel,
    pub spec: ParamSpec,
    /// `σ̃²` for the penalties, or `None` for the plain loglikelihood.
    pub penalty_scale: Option<f64>,
    pub threads: usize,
}

impl Objective for VecchiaObjective<'_> {
    fn evaluate(&mut self, w: &[f64]) -> Result<Evaluation> {
        let theta = self.spec.to_natural(w);
        let model = self.model.with_params(&theta)?;
        let opts = EvalOptions {
            derivs: true,
            threads: self.threads,
        };
        let rep = evaluate_with(self.data, self.plan, &model, opts)?;
        let jac = DVector::from_vec(self.spec.jacobian(&theta));
        let mut grad = rep.grad.component_mul(&jac);
        let mut info = DMatrix::from_fn(jac.len(), jac.len(), |a, b| {
            jac[a] * rep.fisher[(a, b)] * jac[b]
        });
        let mut value = rep.loglik;
        if let Some(s) = self.penalty_scale {
            let pen = penalty(self.model.family(), &theta, s);
            value += pen.value;
            grad += &pen.grad;
            info -= &pen.hess;
        }
        Ok(Evaluation {
            value,
            grad,
            info,
            report: Some(rep),
        })
    }
}

/// Vecchia loglikelihood with σ² maximized out in closed form, evaluated at
/// unit variance. Returns `(profiled loglik, σ̂²)`.
pub fn profiled_loglik(
    data: &ObservationSet,
    plan: &ConditioningPlan,
    model: &CovarianceModel,
    threads: usize,
) -> Result<(f64, f64)> {
    let opts = EvalOptions {
        derivs: false,
        threads,
    };
    let rep = evaluate_with(data, plan, model, opts)?;
    let n = rep.n as f64;
    let sigma2 = rep.quad_form / n;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Numerical("profiled variance is not positive".into()));
    }
    let value = -0.5 * n * (LN_2PI + 1.0 + sigma2.ln()) - 0.5 * rep.logdet;
    Ok((value, sigma2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Fisher,
    NelderMead,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Fisher => "fisher",
            Optimizer::NelderMead => "nelder-mead",
        }
    }
}

impl std::fmt::Display for Optimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fisher" => Ok(Optimizer::Fisher),
            "nelder-mead" => Ok(Optimizer::NelderMead),
            other => Err(Error::Input(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub optimizer: Optimizer,
    /// Neighbor counts, one stage each, warm-started in order.
    pub neighbors: Vec<usize>,
    /// Penalties apply to Fisher scoring only.
    pub penalties: bool,
    pub scoring: ScoringConfig,
    pub simplex: SimplexConfig,
    pub threads: usize,
    /// Natural-scale starting point; default starts when absent.
    pub start: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Fisher,
            neighbors: vec![10, 30],
            penalties: true,
            scoring: ScoringConfig::default(),
            simplex: SimplexConfig::default(),
            threads: 1,
            start: None,
        }
    }
}

impl FitOptions {
    pub fn with_optimizer(optimizer: Optimizer) -> Self {
        Self {
            optimizer,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub neighbors: usize,
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub step_halvings: usize,
    pub wall_time: f64,
    pub convergence: Convergence,
    /// Accepted objective values, starting point first.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub optimizer: Optimizer,
    pub param_names: Vec<String>,
    /// Natural-scale estimates.
    pub theta: Vec<f64>,
    /// From the inverse Fisher information; `None` where it is unavailable.
    pub std_errors: Vec<Option<f64>>,
    pub beta: Vec<f64>,
    pub beta_cov: Vec<Vec<f64>>,
    /// Unpenalized Vecchia loglikelihood at the final neighbor count.
    pub loglik: f64,
    /// Objective the optimizer maximized, penalties included.
    pub objective: f64,
    /// Norm of the natural-scale loglikelihood gradient.
    pub grad_norm: f64,
    /// `stepᵀ grad` at exit, for Fisher scoring.
    pub step_dot_grad: Option<f64>,
    /// Natural-scale Fisher information of the loglikelihood.
    pub fisher: Vec<Vec<f64>>,
    pub iterations: usize,
    pub evaluations: usize,
    pub step_halvings: usize,
    /// Seconds spent in the optimizer across all stages.
    pub wall_time: f64,
    pub convergence: Convergence,
    pub neighbors: Vec<usize>,
    pub stages: Vec<StageSummary>,
    /// Accepted objective values of the final stage.
    pub trace: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

struct StageOutput {
    summary: StageSummary,
    objective: f64,
    step_dot_grad: Option<f64>,
    report: Option<LikelihoodReport>,
}

fn run_stage(
    data: &ObservationSet,
    template: &CovarianceModel,
    plan: &ConditioningPlan,
    theta0: &[f64],
    opts: &FitOptions,
    sigma2_tilde: f64,
) -> Result<StageOutput> {
    let family = template.family();
    let spec = ParamSpec::for_family(family);
    let clock = Instant::now();
    match opts.optimizer {
        Optimizer::Fisher => {
            let mut obj = VecchiaObjective {
                data,
                plan,
                model: template.clone(),
                spec: spec.clone(),
                penalty_scale: opts.penalties.then_some(sigma2_tilde),
                threads: opts.threads,
            };
            let out = fisher_scoring(&mut obj, &spec.to_working(theta0), &opts.scoring)?;
            let wall_time = clock.elapsed().as_secs_f64();
            let theta = spec.to_natural(&out.w);
            let report = out.last.report.clone();
            let loglik = report.as_ref().map_or(out.last.value, |r| r.loglik);
            Ok(StageOutput {
                summary: StageSummary {
                    neighbors: plan.max_neighbors,
                    theta,
                    loglik,
                    iterations: out.iterations,
                    evaluations: out.evaluations,
                    step_halvings: out.step_halvings,
                    wall_time,
                    convergence: out.convergence,
                    trace: out.trace,
                },
                objective: out.last.value,
                step_dot_grad: Some(out.step_dot_grad),
                report,
            })
        }
        Optimizer::NelderMead => {
            let sub = ParamSpec {
                names: spec.names[1..].to_vec(),
                transforms: spec.transforms[1..].to_vec(),
            };
            let unit_theta = |u: &[f64]| {
                let mut th = vec![1.0];
                th.extend(sub.to_natural(u));
                th
            };
            let mut f = |u: &[f64]| {
                template
                    .with_params(&unit_theta(u))
                    .and_then(|m| profiled_loglik(data, plan, &m, opts.threads))
                    .map_or(f64::NEG_INFINITY, |(v, _)| v)
            };
            let out = nelder_mead(&mut f, &sub.to_working(&theta0[1..]), &opts.simplex);
            let mut theta = unit_theta(&out.x);
            let (_, sigma2) =
                profiled_loglik(data, plan, &template.with_params(&theta)?, opts.threads)?;
            let wall_time = clock.elapsed().as_secs_f64();
            theta[0] = sigma2;
            Ok(StageOutput {
                summary: StageSummary {
                    neighbors: plan.max_neighbors,
                    theta,
                    loglik: out.value,
                    iterations: out.iterations,
                    evaluations: out.evaluations + 1,
                    step_halvings: 0,
                    wall_time,
                    convergence: if out.converged {
                        Convergence::Converged
                    } else {
                        Convergence::MaxIter
                    },
                    trace: out.trace,
                },
                objective: out.value,
                step_dot_grad: None,
                report: None,
            })
        }
    }
}

/// Fits `family` with one optimizer stage per entry of `opts.neighbors`,
/// each warm-started from the previous estimate.
pub fn two_stage_fit(
    data: &ObservationSet,
    family: Family,
    opts: &FitOptions,
) -> Result<FitResult> {
    if opts.neighbors.is_empty() {
        return Err(Error::Input("neighbor schedule is empty".into()));
    }
    let sigma2_tilde = ols_residual_variance(data)?;
    let start = match &opts.start {
        Some(s) => s.clone(),
        None => default_start(family, data)?,
    };
    let template = CovarianceModel::for_data(family, &start, data)?;

    let mut stages: Vec<StageSummary> = Vec::new();
    let mut last: Option<(StageOutput, ConditioningPlan)> = None;
    let mut theta = start;
    for (k, &m) in opts.neighbors.iter().enumerate() {
        let clock = Instant::now();
        let stage = plan_for(data, m).and_then(|plan| {
            let mut out = run_stage(data, &template, &plan, &theta, opts, sigma2_tilde)?;
            out.summary.wall_time = clock.elapsed().as_secs_f64();
            Ok((out, plan))
        });
        match stage {
            Ok((out, plan)) => {
                theta = out.summary.theta.clone();
                stages.push(out.summary.clone());
                last = Some((out, plan));
            }
            Err(e) if k == 0 => return Err(e),
            Err(_) => {
                let (out, _) = last.as_mut().expect("an earlier stage succeeded");
                out.summary.convergence = Convergence::Stalled;
                if let Some(prev) = stages.last_mut() {
                    prev.convergence = Convergence::Stalled;
                }
                break;
            }
        }
    }
    let (out, plan) = last.expect("at least one stage ran");

    // Final report at the estimate, outside the timed region.
    let report = match out.report {
        Some(r) => r,
        None => {
            let model = template.with_params(&out.summary.theta)?;
            evaluate_with(
                data,
                &plan,
                &model,
                EvalOptions {
                    derivs: true,
                    threads: opts.threads,
                },
            )?
        }
    };
    let std_errors = match report.fisher.clone().cholesky() {
        Some(c) => c
            .inverse()
            .diagonal()
            .iter()
            .map(|v| (*v > 0.0).then(|| v.sqrt()))
            .collect(),
        None => vec![None; family.n_params()],
    };
    Ok(FitResult {
        family,
        optimizer: opts.optimizer,
        param_names: family.param_names(),
        theta: out.summary.theta.clone(),
        std_errors,
        beta: report.betahat.iter().copied().collect(),
        beta_cov: rows(&report.betacov),
        loglik: report.loglik,
        objective: out.objective,
        grad_norm: report.grad.norm(),
        step_dot_grad: out.step_dot_grad,
        fisher: rows(&report.fisher),
        iterations: stages.iter().map(|s| s.iterations).sum(),
        evaluations: stages.iter().map(|s| s.evaluations).sum(),
        step_halvings: stages.iter().map(|s| s.step_halvings).sum(),
        wall_time: stages.iter().map(|s| s.wall_time).sum(),
        convergence: out.summary.convergence,
        neighbors: stages.iter().map(|s| s.neighbors).collect(),
        trace: out.summary.trace.clone(),
        stages,
    })
}

impl FitResult {
    /// Nugget variance `τ² = σ²η` with its delta-method standard error.
    pub fn nugget_variance(&self) -> (f64, Option<f64>) {
        let ie = self.family.nugget_index();
        let (s, e) = (self.theta[0], self.theta[ie]);
        let tau2 = s * e;
        let info = DMatrix::from_fn(self.fisher.len(), self.fisher.len(), |a, b| {
            self.fisher[a][b]
        });
        let se = info.cholesky().and_then(|c| {
            let cov = c.inverse();
            let v = e * e * cov[(0, 0)] + 2.0 * e * s * cov[(0, ie)] + s * s * cov[(ie, ie)];
            (v > 0.0).then(|| v.sqrt())
        });
        (tau2, se)
    }
}
