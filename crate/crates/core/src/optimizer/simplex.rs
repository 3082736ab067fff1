//! Derivative-free Nelder–Mead simplex search, maximizing.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Offset of each initial vertex from the start along one axis.
    pub spread: f64,
    /// Stop when the simplex values differ by less than
    /// `reltol · (|best| + reltol)`.
    pub reltol: f64,
    /// Evaluation budget; `None` means `10 · 500 · dim`.
    pub max_evals: Option<usize>,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            spread: 0.1,
            reltol: 1.49e-8,
            max_evals: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best value at the start and after every iteration.
    pub trace: Vec<f64>,
}

/// Maximizes `f` from `x0`. Non-finite values count as `−∞`.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    cfg: &SimplexConfig,
) -> SimplexOutcome {
    let dim = x0.len();
    let budget = cfg.max_evals.unwrap_or(10 * 500 * dim.max(1));
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(dim + 1);
    pts.push(x0.to_vec());
    vals.push(eval(x0, &mut evaluations));
    for k in 0..dim {
        let mut p = x0.to_vec();
        p[k] += cfg.spread;
        vals.push(eval(&p, &mut evaluations));
        pts.push(p);
    }
    if dim == 0 {
        return SimplexOutcome {
            x: pts.remove(0),
            value: vals[0],
            evaluations,
            iterations: 0,
            converged: true,
            trace: vec![vals[0]],
        };
    }

    let mut order: Vec<usize> = (0..=dim).collect();
    let mut iterations = 0;
    let mut converged = false;
    let mut trace = Vec::new();
    loop {
        // Best first.
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        let best = order[0];
        let worst = order[dim];
        let second = order[dim - 1];
        trace.push(vals[best]);
        if vals[best].is_finite()
            && vals[best] - vals[worst] <= cfg.reltol * (vals[best].abs() + cfg.reltol)
        {
            converged = true;
            break;
        }
        if evaluations >= budget {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for &i in &order[..dim] {
            for (c, x) in centroid.iter_mut().zip(&pts[i]) {
                *c += x / dim as f64;
            }
        }
        let toward = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, x)| c + t * (x - c))
                .collect()
        };

        let xr = toward(-cfg.reflection, &pts[worst]);
        let fr = eval(&xr, &mut evaluations);
        if fr > vals[best] {
            let xe = toward(-cfg.reflection * cfg.expansion, &pts[worst]);
            let fe = eval(&xe, &mut evaluations);
            if fe > fr {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr > vals[second] {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        let (xc, fc, ok) = if fr > vals[worst] {
            let xc = toward(-cfg.reflection * cfg.contraction, &pts[worst]);
            let fc = eval(&xc, &mut evaluations);
            let ok = fc >= fr;
            (xc, fc, ok)
        } else {
            let xc = toward(cfg.contraction, &pts[worst]);
            let fc = eval(&xc, &mut evaluations);
            let ok = fc > vals[worst];
            (xc, fc, ok)
        };
        if ok {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            let p: Vec<f64> = anchor
                .iter()
                .zip(&pts[i])
                .map(|(a, x)| a + cfg.shrink * (x - a))
                .collect();
            vals[i] = eval(&p, &mut evaluations);
            pts[i] = p;
        }
    }

    let best = order[0];
    SimplexOutcome {
        x: pts[best].clone(),
        value: vals[best],
        evaluations,
        iterations,
        converged,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concave_quadratic_maximizer() {
        let mut f = |x: &[f64]| -((x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.25).powi(2) + x[0] * x[1]);
        let cfg = SimplexConfig {
            reltol: 1e-16,
            ..Default::default()
        };
        let out = nelder_mead(&mut f, &[0.0, 0.0], &cfg);
        // Stationary point of the quadratic: solve [2 1; 1 6] x = [3, -1.5].
        let (a, b) = ((3.0 * 6.0 + 1.5) / 11.0, (-1.5 * 2.0 - 3.0) / 11.0);
        assert!(
            (out.x[0] - a).abs() < 1e-6 && (out.x[1] - b).abs() < 1e-6,
            "{:?}",
            out.x
        );
        assert!(out.trace.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn rosenbrock() {
        let mut f = |x: &[f64]| -(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        let cfg = SimplexConfig {
            reltol: 1e-20,
            ..Default::default()
        };
        let out = nelder_mead(&mut f, &[-1.2, 1.0], &cfg);
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn failed_evaluations_are_avoided() {
        let mut f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                -(x[0] - 0.3).powi(2)
            }
        };
        let out = nelder_mead(&mut f, &[0.05], &SimplexConfig::default());
        assert!((out.x[0] - 0.3).abs() < 1e-3);
    }

    #[test]
    fn budget_is_respected() {
        let mut f = |x: &[f64]| -x.iter().map(|v| v * v).sum::<f64>();
        let cfg = SimplexConfig {
            reltol: 0.0,
            max_evals: Some(50),
            ..Default::default()
        };
        let out = nelder_mead(&mut f, &[1.0, 2.0, 3.0], &cfg);
        assert!(!out.converged);
        assert!(out.evaluations <= 50 + 4);
    }
}
