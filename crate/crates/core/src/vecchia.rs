//! Single-pass evaluation of Vecchia's loglikelihood, its gradient, the
//! Fisher information and the profile estimate of the mean coefficients.
//!
//! For ordered position `i` let `B_i` be the covariance of
//! `(y_{g(i)}, y_i)` and `A_i` its leading block, the covariance of the
//! conditioning set. With `B_i = L Lᵀ`, the factor of `A_i` is the leading
//! block of `L`, so every "B-term minus A-term" difference collapses onto the
//! last row of a triangular solve:
//!
//! * `log det B − log det A = 2 log L[t,t]`
//! * `vᵀB⁻¹v − uᵀA⁻¹u = w[t]²` with `w = L⁻¹v`
//! * with `C_j = L⁻¹ B_j L⁻ᵀ`, all derivative and trace differences only
//!   involve the last row `c_j = C_j[t,:] = (L⁻¹ B_j r)ᵀ`, `r = L⁻ᵀ e_t`.
//!
//! A single Cholesky factorization per position therefore serves both
//! blocks, and no inverse is ever formed.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::covariance::{CovMatrixPair, CovarianceModel};
use crate::error::{BlockKind, Error, Result};
use crate::geometry::{ConditioningPlan, ObservationSet};
use crate::linalg;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// The nine running sums of the single pass. `q` is the number of
/// covariance parameters, `p` the number of mean coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePassState {
    /// Number of observations accumulated.
    pub n: usize,
    pub logdet: f64,
    pub dlogdet: DVector<f64>,
    pub ysy: f64,
    pub xsy: DVector<f64>,
    pub xsx: DMatrix<f64>,
    pub dysy: DVector<f64>,
    /// Column `j` is `dXSy_j`.
    pub dxsy: DMatrix<f64>,
    pub dxsx: Vec<DMatrix<f64>>,
    pub tr: DMatrix<f64>,
}

impl SinglePassState {
    /// Empty state; `q = 0` accumulates the likelihood terms only.
    pub fn new(p: usize, q: usize) -> Self {
        Self {
            n: 0,
            logdet: 0.0,
            dlogdet: DVector::zeros(q),
            ysy: 0.0,
            xsy: DVector::zeros(p),
            xsx: DMatrix::zeros(p, p),
            dysy: DVector::zeros(q),
            dxsy: DMatrix::zeros(p, q),
            dxsx: vec![DMatrix::zeros(p, p); q],
            tr: DMatrix::zeros(q, q),
        }
    }

    pub fn n_params(&self) -> usize {
        self.dlogdet.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.xsy.len()
    }

    /// Adds another partial state; partial sums over disjoint sets of
    /// positions combine this way.
    pub fn merge(&mut self, other: &SinglePassState) {
        self.n += other.n;
        self.logdet += other.logdet;
        self.dlogdet += &other.dlogdet;
        self.ysy += other.ysy;
        self.xsy += &other.xsy;
        self.xsx += &other.xsx;
        self.dysy += &other.dysy;
        self.dxsy += &other.dxsy;
        for (a, b) in self.dxsx.iter_mut().zip(&other.dxsx) {
            *a += b;
        }
        self.tr += &other.tr;
    }

    /// Adds one position's contribution.
    ///
    /// `block` is the covariance of `(y_{g(i)}, y_i)` with the response being
    /// predicted last; the conditioning block is its leading submatrix and
    /// needs no separate input. `v` holds the responses in the same order
    /// and `design` the matching design rows, row-major `(k+1)×p`. On
    /// failure returns the block that is not positive definite.
    pub fn accumulate_block(
        &mut self,
        block: &CovMatrixPair,
        v: &[f64],
        design: &[f64],
        ws: &mut BlockWorkspace,
    ) -> std::result::Result<(), BlockKind> {
        let kb = block.size();
        let t = kb - 1;
        let p = self.n_covariates();
        let q = self.n_params();
        debug_assert_eq!(v.len(), kb);
        debug_assert_eq!(design.len(), kb * p);
        debug_assert!(q == 0 || block.n_derivs() == q);

        ws.resize(kb, p, q);
        let l = &mut ws.chol[..kb * kb];
        l.copy_from_slice(block.value());
        linalg::cholesky_in_place(l, kb).map_err(|pivot| {
            if pivot < t {
                BlockKind::Conditioning
            } else {
                BlockKind::Joint
            }
        })?;
        let l = &ws.chol[..kb * kb];

        // Columns of L⁻¹ [v | X].
        let w = &mut ws.whitened[..(p + 1) * kb];
        w[..kb].copy_from_slice(v);
        for c in 0..p {
            for a in 0..kb {
                w[(c + 1) * kb + a] = design[a * p + c];
            }
        }
        for col in w.chunks_exact_mut(kb) {
            linalg::solve_lower(l, kb, col);
        }
        let w = &ws.whitened[..(p + 1) * kb];
        let col = |c: usize| &w[c * kb..(c + 1) * kb];

        self.n += 1;
        self.logdet += 2.0 * l[t * kb + t].ln();
        let wy = col(0)[t];
        self.ysy += wy * wy;
        for a in 0..p {
            let xa = col(a + 1)[t];
            self.xsy[a] += xa * wy;
            for b in 0..p {
                self.xsx[(a, b)] += xa * col(b + 1)[t];
            }
        }
        if q == 0 {
            return Ok(());
        }

        // r = L⁻ᵀ e_t, then c_j = L⁻¹ B_j r is the last row of C_j.
        let r = &mut ws.r[..kb];
        r.fill(0.0);
        r[t] = 1.0;
        linalg::solve_lower_transpose(l, kb, r);
        for j in 0..q {
            let cj = &mut ws.last_rows[j * kb..(j + 1) * kb];
            linalg::mat_vec(block.deriv(j), kb, &ws.r[..kb], cj);
            linalg::solve_lower(l, kb, cj);
        }

        let gam = &mut ws.gamma[..(p + 1) * q];
        for j in 0..q {
            let cj = &ws.last_rows[j * kb..(j + 1) * kb];
            for c in 0..=p {
                gam[j * (p + 1) + c] = linalg::dot(cj, col(c));
            }
        }
        let gam = &ws.gamma[..(p + 1) * q];
        for j in 0..q {
            let cj = &ws.last_rows[j * kb..(j + 1) * kb];
            let ctt = cj[t];
            let g = &gam[j * (p + 1)..(j + 1) * (p + 1)];
            // x'C_j y minus its leading-block counterpart.
            let bil = |x: usize, y: usize| {
                let (xt, yt) = (col(x)[t], col(y)[t]);
                xt * g[y] + yt * g[x] - xt * yt * ctt
            };
            self.dlogdet[j] += ctt;
            self.dysy[j] -= bil(0, 0);
            for a in 0..p {
                self.dxsy[(a, j)] -= bil(a + 1, 0);
                for b in 0..=a {
                    let v = bil(a + 1, b + 1);
                    self.dxsx[j][(a, b)] -= v;
                    if a != b {
                        self.dxsx[j][(b, a)] -= v;
                    }
                }
            }
            for m in 0..=j {
                let cm = &ws.last_rows[m * kb..(m + 1) * kb];
                let s = 2.0 * linalg::dot(&cj[..t], &cm[..t]) + ctt * cm[t];
                self.tr[(j, m)] += s;
                if m != j {
                    self.tr[(m, j)] += s;
                }
            }
        }
        Ok(())
    }
}

/// Scratch buffers for one worker; sized for the largest block seen.
#[derive(Debug, Clone, Default)]
pub struct BlockWorkspace {
    chol: Vec<f64>,
    whitened: Vec<f64>,
    r: Vec<f64>,
    last_rows: Vec<f64>,
    gamma: Vec<f64>,
    cov: CovMatrixPair,
    obs: Vec<usize>,
    v: Vec<f64>,
    design: Vec<f64>,
}

impl BlockWorkspace {
    fn resize(&mut self, kb: usize, p: usize, q: usize) {
        grow(&mut self.chol, kb * kb);
        grow(&mut self.whitened, (p + 1) * kb);
        grow(&mut self.r, kb);
        grow(&mut self.last_rows, q * kb);
        grow(&mut self.gamma, q * (p + 1));
    }
}

fn grow(buf: &mut Vec<f64>, len: usize) {
    if buf.len() < len {
        buf.resize(len, 0.0);
    }
}

/// Likelihood, gradient and Fisher information at one parameter value, all
/// with the mean coefficients profiled out.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodReport {
    pub loglik: f64,
    /// Natural-scale gradient; empty when derivatives were not requested.
    pub grad: DVector<f64>,
    pub fisher: DMatrix<f64>,
    pub betahat: DVector<f64>,
    /// Column `j` is `∂β̂/∂θ_j`.
    pub dbeta: DMatrix<f64>,
    /// `(XSX)⁻¹`, the covariance of `β̂`.
    pub betacov: DMatrix<f64>,
    /// `log det` part of the likelihood.
    pub logdet: f64,
    /// Profiled quadratic form `ySy − 2 XSyᵀβ̂ + β̂ᵀ XSX β̂`.
    pub quad_form: f64,
    pub n: usize,
}

/// Profile estimate `β̂ = XSX⁻¹ XSy` and its derivatives
/// `∂β̂/∂θ_j = XSX⁻¹ (dXSy_j − dXSX_j β̂)`.
pub fn profile_beta(state: &SinglePassState) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = state.n_covariates();
    let q = state.n_params();
    if p == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, q)));
    }
    let chol = state
        .xsx
        .clone()
        .cholesky()
        .ok_or(Error::RankDeficientDesign)?;
    let beta = chol.solve(&state.xsy);
    let mut dbeta = DMatrix::zeros(p, q);
    for j in 0..q {
        let rhs = state.dxsy.column(j) - &state.dxsx[j] * &beta;
        dbeta.set_column(j, &chol.solve(&rhs));
    }
    Ok((beta, dbeta))
}

/// Assembles the profile loglikelihood, gradient and Fisher information
/// from a completed pass.
pub fn finalize(state: &SinglePassState) -> Result<LikelihoodReport> {
    let p = state.n_covariates();
    let q = state.n_params();
    let (beta, dbeta) = profile_beta(state)?;
    let betacov = if p == 0 {
        DMatrix::zeros(0, 0)
    } else {
        state
            .xsx
            .clone()
            .cholesky()
            .ok_or(Error::RankDeficientDesign)?
            .inverse()
    };
    let quad_form = state.ysy - 2.0 * state.xsy.dot(&beta) + beta.dot(&(&state.xsx * &beta));
    let n = state.n as f64;
    let loglik = -0.5 * n * LN_2PI - 0.5 * state.logdet - 0.5 * quad_form;

    let mut grad = DVector::zeros(q);
    let xsx_beta = &state.xsx * &beta;
    for j in 0..q {
        let db = dbeta.column(j);
        let direct = state.dysy[j] - 2.0 * state.dxsy.column(j).dot(&beta)
            + beta.dot(&(&state.dxsx[j] * &beta));
        let through_beta = -2.0 * state.xsy.dot(&db) + 2.0 * xsx_beta.dot(&db);
        grad[j] = -0.5 * state.dlogdet[j] - 0.5 * direct - 0.5 * through_beta;
    }
    let fisher = &state.tr * 0.5;
    Ok(LikelihoodReport {
        loglik,
        grad,
        fisher,
        betahat: beta,
        dbeta,
        betacov,
        logdet: state.logdet,
        quad_form,
        n: state.n,
    })
}

/// How to run a single pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Accumulate gradient and Fisher terms.
    pub derivs: bool,
    /// Number of contiguous chunks evaluated in parallel; 1 runs inline.
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            derivs: true,
            threads: 1,
        }
    }
}

fn accumulate_range(
    data: &ObservationSet,
    plan: &ConditioningPlan,
    model: &CovarianceModel,
    positions: std::ops::Range<usize>,
    derivs: bool,
) -> Result<SinglePassState> {
    let p = data.n_covariates();
    let q = if derivs { model.n_params() } else { 0 };
    let mut state = SinglePassState::new(p, q);
    let mut ws = BlockWorkspace::default();
    let design = data.design();
    let y = data.y();
    for i in positions {
        let mut cov = std::mem::take(&mut ws.cov);
        let mut obs = std::mem::take(&mut ws.obs);
        let mut v = std::mem::take(&mut ws.v);
        let mut rows = std::mem::take(&mut ws.design);
        obs.clear();
        obs.extend(plan.neighbors[i].iter().map(|&j| plan.order[j]));
        obs.push(plan.order[i]);
        v.clear();
        v.extend(obs.iter().map(|&o| y[o]));
        rows.clear();
        for &o in &obs {
            rows.extend((0..p).map(|c| design[(o, c)]));
        }
        model.cov_block(data, &obs, derivs, &mut cov);
        let res = state.accumulate_block(&cov, &v, &rows, &mut ws);
        ws.cov = cov;
        ws.obs = obs;
        ws.v = v;
        ws.design = rows;
        res.map_err(|kind| Error::NotPositiveDefinite { index: i, kind })?;
    }
    Ok(state)
}

/// Runs the single pass and returns the raw accumulators.
pub fn single_pass(
    data: &ObservationSet,
    plan: &ConditioningPlan,
    model: &CovarianceModel,
    opts: EvalOptions,
) -> Result<SinglePassState> {
    let n = data.len();
    if plan.len() != n || plan.neighbors.len() != n {
        return Err(Error::Input(format!(
            "plan covers {} positions, dataset has {n}",
            plan.len()
        )));
    }
    if opts.threads <= 1 || n < 2 * opts.threads {
        return accumulate_range(data, plan, model, 0..n, opts.derivs);
    }
    let chunk = n.div_ceil(opts.threads);
    let parts: Vec<Result<SinglePassState>> = (0..opts.threads)
        .into_par_iter()
        .map(|w| {
            let lo = (w * chunk).min(n);
            let hi = ((w + 1) * chunk).min(n);
            accumulate_range(data, plan, model, lo..hi, opts.derivs)
        })
        .collect();
    let mut iter = parts.into_iter();
    let mut state = iter.next().expect("at least one chunk")?;
    for part in iter {
        state.merge(&part?);
    }
    Ok(state)
}

/// Loglikelihood, gradient and Fisher information in one pass.
pub fn evaluate(
    data: &ObservationSet,
    plan: &ConditioningPlan,
    model: &CovarianceModel,
) -> Result<LikelihoodReport> {
    evaluate_with(data, plan, model, EvalOptions::default())
}

pub fn evaluate_with(
    data: &ObservationSet,
    plan: &ConditioningPlan,
    model: &CovarianceModel,
    opts: EvalOptions,
) -> Result<LikelihoodReport> {
    finalize(&single_pass(data, plan, model, opts)?)
}
