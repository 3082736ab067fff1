//! Fisher scoring with step halving and a gradient fallback.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::vecchia::LikelihoodReport;

/// Objective value with working-scale gradient and information.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad: DVector<f64>,
    pub info: DMatrix<f64>,
    /// The underlying likelihood report, when the objective has one.
    pub report: Option<LikelihoodReport>,
}

/// Something to maximize with first derivatives and an information matrix.
pub trait Objective {
    fn evaluate(&mut self, w: &[f64]) -> Result<Evaluation>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Converged,
    MaxIter,
    Stalled,
}

impl std::fmt::Display for Convergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convergence::Converged => "converged",
            Convergence::MaxIter => "max_iter",
            Convergence::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// Stop when `|stepᵀ grad|` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// How many times the ridge is multiplied by ten before giving up on
    /// the information matrix.
    pub ridge_retries: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 100,
            max_halvings: 10,
            ridge_retries: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoringOutcome {
    pub w: Vec<f64>,
    pub last: Evaluation,
    pub iterations: usize,
    pub step_halvings: usize,
    pub evaluations: usize,
    pub convergence: Convergence,
    /// `stepᵀ grad` for the scoring step at the returned point.
    pub step_dot_grad: f64,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
}

/// Solves `info · d = grad`, adding a ridge when `info` is not positive
/// definite. `None` means the caller should use the gradient.
pub fn scoring_direction(
    info: &DMatrix<f64>,
    grad: &DVector<f64>,
    retries: usize,
) -> Option<DVector<f64>> {
    if let Some(chol) = info.clone().cholesky() {
        let d = chol.solve(grad);
        if d.iter().all(|v| v.is_finite()) {
            return Some(d);
        }
    }
    let q = info.nrows();
    let trace = info.trace();
    if !(trace > 0.0 && trace.is_finite()) || q == 0 {
        return None;
    }
    let mut eps = 1e-8 * trace / q as f64;
    for _ in 0..retries {
        let ridged = info + DMatrix::identity(q, q) * eps;
        if let Some(chol) = ridged.cholesky() {
            let d = chol.solve(grad);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        eps *= 10.0;
    }
    None
}

fn try_point(
    obj: &mut dyn Objective,
    w: &[f64],
    current: f64,
    evals: &mut usize,
) -> Option<Evaluation> {
    *evals += 1;
    match obj.evaluate(w) {
        Ok(e) if e.value.is_finite() && e.value > current => Some(e),
        _ => None,
    }
}

/// Line search along `dir` from `w`, halving from a unit step.
fn halving_search(
    obj: &mut dyn Objective,
    w: &[f64],
    dir: &DVector<f64>,
    current: f64,
    cfg: &ScoringConfig,
    halvings: &mut usize,
    evals: &mut usize,
) -> Option<(Vec<f64>, Evaluation)> {
    let mut gamma = 1.0;
    for h in 0..=cfg.max_halvings {
        if h > 0 {
            *halvings += 1;
            gamma *= 0.5;
        }
        let trial: Vec<f64> = w
            .iter()
            .zip(dir.iter())
            .map(|(a, d)| a + gamma * d)
            .collect();
        if let Some(e) = try_point(obj, &trial, current, evals) {
            return Some((trial, e));
        }
    }
    None
}

/// Maximizes `obj` from `w0` by Fisher scoring.
pub fn fisher_scoring(
    obj: &mut dyn Objective,
    w0: &[f64],
    cfg: &ScoringConfig,
) -> Result<ScoringOutcome> {
    let mut w = w0.to_vec();
    let mut cur = obj.evaluate(&w)?;
    let mut evaluations = 1;
    let mut step_halvings = 0;
    let mut trace = vec![cur.value];
    let mut iterations = 0;
    let mut convergence = Convergence::MaxIter;
    let mut step_dot_grad;

    loop {
        let dir = scoring_direction(&cur.info, &cur.grad, cfg.ridge_retries);
        step_dot_grad = match &dir {
            Some(d) => d.dot(&cur.grad),
            None => cur.grad.dot(&cur.grad),
        };
        if step_dot_grad.abs() < cfg.tol {
            convergence = Convergence::Converged;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;

        let mut accepted = None;
        if let Some(d) = &dir {
            accepted = halving_search(
                obj,
                &w,
                d,
                cur.value,
                cfg,
                &mut step_halvings,
                &mut evaluations,
            );
        }
        if accepted.is_none() {
            let norm = cur.grad.norm();
            if norm > 0.0 && norm.is_finite() {
                let g = &cur.grad / norm;
                accepted = halving_search(
                    obj,
                    &w,
                    &g,
                    cur.value,
                    cfg,
                    &mut step_halvings,
                    &mut evaluations,
                );
            }
        }
        match accepted {
            Some((next, e)) => {
                w = next;
                cur = e;
                trace.push(cur.value);
            }
            None => {
                convergence = Convergence::Stalled;
                break;
            }
        }
    }

    Ok(ScoringOutcome {
        w,
        last: cur,
        iterations,
        step_halvings,
        evaluations,
        convergence,
        step_dot_grad,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Concave quadratic `−½ (w−c)ᵀ H (w−c)` with a chosen information.
    struct Quadratic {
        h: DMatrix<f64>,
        c: DVector<f64>,
        info: DMatrix<f64>,
    }

    impl Objective for Quadratic {
        fn evaluate(&mut self, w: &[f64]) -> Result<Evaluation> {
            let r = DVector::from_column_slice(w) - &self.c;
            let hr = &self.h * &r;
            Ok(Evaluation {
                value: -0.5 * r.dot(&hr),
                grad: -hr,
                info: self.info.clone(),
                report: None,
            })
        }
    }

    fn quad(info: Option<DMatrix<f64>>) -> Quadratic {
        let h = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        Quadratic {
            info: info.unwrap_or_else(|| h.clone()),
            h,
            c: DVector::from_vec(vec![0.7, -1.2]),
        }
    }

    #[test]
    fn exact_information_converges_in_one_step() {
        let mut q = quad(None);
        let out = fisher_scoring(&mut q, &[5.0, 9.0], &ScoringConfig::default()).unwrap();
        assert_eq!(out.convergence, Convergence::Converged);
        assert_eq!(out.iterations, 1);
        assert!((out.w[0] - 0.7).abs() < 1e-12 && (out.w[1] + 1.2).abs() < 1e-12);
    }

    #[test]
    fn identity_information_steps_along_gradient() {
        let info = DMatrix::identity(2, 2);
        let g = DVector::from_vec(vec![0.3, -2.0]);
        assert_eq!(scoring_direction(&info, &g, 3).unwrap(), g);
    }

    #[test]
    fn trace_is_nondecreasing_with_poor_information() {
        let mut q = quad(Some(DMatrix::identity(2, 2) * 0.05));
        let out = fisher_scoring(&mut q, &[5.0, 9.0], &ScoringConfig::default()).unwrap();
        assert!(out.trace.windows(2).all(|p| p[1] >= p[0]));
        assert!(out.step_halvings > 0);
        assert_eq!(out.convergence, Convergence::Converged);
        assert!(out.step_dot_grad.abs() < 1e-4);
    }

    #[test]
    fn indefinite_information_falls_back() {
        let info = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -5.0]);
        let g = DVector::from_vec(vec![1.0, 1.0]);
        assert!(scoring_direction(&info, &g, 3).is_none());
        let mut q = quad(Some(info));
        let out = fisher_scoring(&mut q, &[1.0, 1.0], &ScoringConfig::default()).unwrap();
        assert!(out.trace.last().unwrap() > &out.trace[0]);
    }
}
