//! Soft barriers keeping the nugget and smoothness away from zero, and a
//! softplus cap on runaway variance.
//!
//! Values, gradients and Hessians are with respect to the working (log)
//! scale. The total is added to the loglikelihood being maximized.

use nalgebra::{DMatrix, DVector};

use crate::covariance::Family;

const BARRIER_WEIGHT: f64 = 0.01;
const NUGGET_SCALE: f64 = 0.01;
const SMOOTHNESS_SCALE: f64 = 0.2;
const VARIANCE_OFFSET: f64 = 6.0;

/// Nugget barrier `−0.01 log(1 + 0.01/τ²)`.
pub fn nugget_barrier(tau2: f64) -> f64 {
    -BARRIER_WEIGHT * (NUGGET_SCALE / tau2).ln_1p()
}

/// Smoothness barrier `−0.01 log(1 + 0.2/ν)`.
pub fn smoothness_barrier(nu: f64) -> f64 {
    -BARRIER_WEIGHT * (SMOOTHNESS_SCALE / nu).ln_1p()
}

/// Variance penalty `log(1 + exp(σ²/σ̃² − 6))`, subtracted from the objective.
pub fn variance_penalty(sigma2: f64, sigma2_tilde: f64) -> f64 {
    softplus(sigma2 / sigma2_tilde - VARIANCE_OFFSET)
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Barrier `−w log(1 + c e^{−u})` in `u = log x`: value, first and second
/// derivative.
fn barrier_in_log(u: f64, c: f64) -> (f64, f64, f64) {
    let r = c * (-u).exp();
    let value = -BARRIER_WEIGHT * r.ln_1p();
    let d1 = BARRIER_WEIGHT * r / (1.0 + r);
    let d2 = -BARRIER_WEIGHT * r / ((1.0 + r) * (1.0 + r));
    (value, d1, d2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyTerms {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Total penalty at natural-scale `theta`, differentiated on the working
/// scale where σ², η and ν enter through their logs.
pub fn penalty(family: Family, theta: &[f64], sigma2_tilde: f64) -> PenaltyTerms {
    let q = theta.len();
    let mut grad = DVector::zeros(q);
    let mut hess = DMatrix::zeros(q, q);
    let ie = family.nugget_index();

    let (v_tau, d1, d2) = barrier_in_log(theta[0].ln() + theta[ie].ln(), NUGGET_SCALE);
    for a in [0, ie] {
        grad[a] += d1;
        for b in [0, ie] {
            hess[(a, b)] += d2;
        }
    }
    let mut value = v_tau;

    if let Some(inu) = family.smoothness_index() {
        let (v, d1, d2) = barrier_in_log(theta[inu].ln(), SMOOTHNESS_SCALE);
        value += v;
        grad[inu] += d1;
        hess[(inu, inu)] += d2;
    }

    let s = theta[0] / sigma2_tilde;
    let z = s - VARIANCE_OFFSET;
    let p = logistic(z);
    value -= softplus(z);
    grad[0] -= p * s;
    hess[(0, 0)] -= p * (1.0 - p) * s * s + p * s;

    PenaltyTerms { value, grad, hess }
}
