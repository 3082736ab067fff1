//! Independent oracles shared by the integration tests: dense multivariate
//! normal quantities and finite differences.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vecfish::{CovMatrixPair, CovarianceModel, ObservationSet};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub struct Dense {
    pub loglik: f64,
    pub beta: DVector<f64>,
    pub grad: DVector<f64>,
    pub fisher: DMatrix<f64>,
}

/// Exact Gaussian loglikelihood with the mean profiled by GLS, plus its
/// gradient and Fisher information, from the full n×n covariance.
pub fn dense(data: &ObservationSet, model: &CovarianceModel) -> Dense {
    let n = data.len();
    let q = model.n_params();
    let all: Vec<usize> = (0..n).collect();
    let mut pair = CovMatrixPair::default();
    model.cov_block(data, &all, true, &mut pair);
    let sigma = pair.value_matrix();
    let chol = sigma.clone().cholesky().expect("dense covariance is PD");
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let x = data.design();
    let y = data.y();
    let (beta, resid) = if x.ncols() == 0 {
        (DVector::zeros(0), y.clone())
    } else {
        let sx = chol.solve(x);
        let sy = chol.solve(y);
        let beta = (x.transpose() * &sx)
            .cholesky()
            .expect("GLS normal equations")
            .solve(&(x.transpose() * &sy));
        let resid = y - x * &beta;
        (beta, resid)
    };
    let s_inv_r = chol.solve(&resid);
    let loglik = -0.5 * n as f64 * LN_2PI - 0.5 * logdet - 0.5 * resid.dot(&s_inv_r);
    let s_inv_d: Vec<DMatrix<f64>> = (0..q).map(|j| chol.solve(&pair.deriv_matrix(j))).collect();
    let grad = DVector::from_fn(q, |j, _| {
        -0.5 * s_inv_d[j].trace() + 0.5 * s_inv_r.dot(&(pair.deriv_matrix(j) * &s_inv_r))
    });
    let fisher = DMatrix::from_fn(q, q, |j, k| 0.5 * (&s_inv_d[j] * &s_inv_d[k]).trace());
    Dense {
        loglik,
        beta,
        grad,
        fisher,
    }
}

/// Fourth-order central difference of `f` at `x` along coordinate `j`.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut at = |t: f64| {
        let mut z = x.to_vec();
        z[j] += t;
        f(&z)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(a.abs()).max(1e-300)
}

/// Relative error with a floor on the denominator, for gradient entries that
/// may be close to zero.
pub fn rel_err_floor(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform random points in the unit cube with a constant design and
/// smooth-ish synthetic responses.
pub fn random_planar(n: usize, dim: usize, seed: u64) -> ObservationSet {
    let mut r = rng(seed);
    let coords = DMatrix::from_fn(n, dim, |_, _| r.random::<f64>());
    let y = DVector::from_fn(n, |i, _| {
        let s = coords.row(i).sum();
        (3.0 * s).sin() + 0.5 * r.random::<f64>() - 0.25
    });
    ObservationSet::with_intercept(coords, y).unwrap()
}

/// Random unit-sphere locations, optionally with a time column in [0, 10].
pub fn random_sphere(n: usize, with_time: bool, seed: u64) -> ObservationSet {
    let mut r = rng(seed);
    let dim = if with_time { 4 } else { 3 };
    let mut coords = DMatrix::zeros(n, dim);
    for i in 0..n {
        let z: f64 = 2.0 * r.random::<f64>() - 1.0;
        let phi: f64 = 2.0 * std::f64::consts::PI * r.random::<f64>();
        let rho = (1.0 - z * z).sqrt();
        coords[(i, 0)] = rho * phi.cos();
        coords[(i, 1)] = rho * phi.sin();
        coords[(i, 2)] = z;
        if with_time {
            coords[(i, 3)] = 10.0 * r.random::<f64>();
        }
    }
    let y = DVector::from_fn(n, |i, _| coords[(i, 2)] + 0.3 * r.random::<f64>());
    ObservationSet::with_intercept(coords, y).unwrap()
}

/// A well-conditioned random parameter point for `family`.
pub fn random_params(family: vecfish::Family, r: &mut ChaCha8Rng) -> Vec<f64> {
    use vecfish::Family::*;
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * r.random::<f64>();
    match family {
        Exponential => vec![u(0.5, 2.0), u(0.1, 0.4), u(0.05, 0.3)],
        MaternIsotropic => vec![u(0.5, 2.0), u(0.1, 0.4), u(0.3, 2.0), u(0.05, 0.3)],
        MaternAnisotropic2d => vec![
            u(0.5, 2.0),
            u(2.0, 8.0),
            u(-2.0, 2.0),
            u(2.0, 8.0),
            u(0.3, 2.0),
            u(0.05, 0.3),
        ],
        MaternNonstatVar => {
            let mut p = vec![u(0.5, 2.0), u(0.1, 0.4), u(0.3, 2.0), u(0.05, 0.3)];
            p.extend((0..8).map(|_| u(-0.3, 0.3)));
            p
        }
        MaternSphereWarp => {
            let mut p = vec![u(0.5, 2.0), u(0.2, 0.6), u(0.3, 2.0), u(0.05, 0.3)];
            p.extend((0..5).map(|_| u(-0.1, 0.1)));
            p
        }
        MaternSpacetimeWarp => {
            let mut p = vec![
                u(0.5, 2.0),
                u(0.2, 0.6),
                u(1.0, 5.0),
                u(0.3, 2.0),
                u(0.05, 0.3),
            ];
            p.extend((0..5).map(|_| u(-0.1, 0.1)));
            p
        }
    }
}

/// A random dataset shaped for `family`.
pub fn dataset_for(family: vecfish::Family, n: usize, seed: u64) -> ObservationSet {
    use vecfish::Family::*;
    match family {
        MaternSphereWarp => random_sphere(n, false, seed),
        MaternSpacetimeWarp => random_sphere(n, true, seed),
        _ => random_planar(n, 2, seed),
    }
}

/// Finite-difference step for parameter value `v`.
pub fn step_for(v: f64, rel: f64) -> f64 {
    rel * v.abs().max(1.0)
}
