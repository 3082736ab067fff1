//! Timing comparison of Fisher scoring against Nelder–Mead on replicated
//! simulated datasets.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::Family;
use crate::error::{Error, Result};
use crate::optimizer::{two_stage_fit, Convergence, FitOptions, Optimizer};
use crate::simulate::{SimConfig, Simulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub replicates: usize,
    pub families: Vec<Family>,
    pub optimizers: Vec<Optimizer>,
    /// Simulation setup; replicate `r` draws with seed `sim.seed + r`.
    pub sim: SimConfig,
    /// Shared fit settings; the optimizer field is overridden per cell.
    pub fit: FitOptions,
    /// Replicates processed concurrently.
    pub workers: usize,
}

impl BenchConfig {
    /// The four planar families on the 70×70 exponential grid.
    pub fn standard(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            families: Family::PLANAR.to_vec(),
            optimizers: vec![Optimizer::Fisher, Optimizer::NelderMead],
            sim: SimConfig::grid_exponential(seed),
            fit: FitOptions::default(),
            workers: 1,
        }
    }
}

/// One fit in the tidy output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub replicate: usize,
    pub family: Family,
    pub optimizer: Optimizer,
    pub seconds: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub convergence: Option<Convergence>,
    /// Set when the fit failed; the numeric fields are then NaN or zero.
    pub error: Option<String>,
    /// `|stepᵀ grad|` at exit, Fisher scoring only.
    pub step_dot_grad: Option<f64>,
    /// Whether the accepted objective trace never decreased.
    pub monotone: bool,
}

/// Runs every replicate, reporting each finished row to `progress`.
/// Failed fits are recorded and the run continues.
pub fn run_benchmark(
    cfg: &BenchConfig,
    progress: &(dyn Fn(&BenchRow) + Sync),
) -> Result<Vec<BenchRow>> {
    if cfg.replicates == 0 {
        return Err(Error::Input("need at least one replicate".into()));
    }
    let sim = Simulator::new(&cfg.sim)?;
    let one = |r: usize| -> Vec<BenchRow> {
        let data = sim.draw(cfg.sim.seed.wrapping_add(r as u64));
        let mut rows = Vec::new();
        for &family in &cfg.families {
            for &optimizer in &cfg.optimizers {
                let opts = FitOptions {
                    optimizer,
                    ..cfg.fit.clone()
                };
                let row = match two_stage_fit(&data, family, &opts) {
                    Ok(fit) => BenchRow {
                        replicate: r,
                        family,
                        optimizer,
                        seconds: fit.wall_time,
                        loglik: fit.loglik,
                        iterations: fit.iterations,
                        evaluations: fit.evaluations,
                        convergence: Some(fit.convergence),
                        error: None,
                        step_dot_grad: fit.step_dot_grad,
                        monotone: fit
                            .stages
                            .iter()
                            .all(|s| s.trace.windows(2).all(|w| w[1] >= w[0])),
                    },
                    Err(e) => BenchRow {
                        replicate: r,
                        family,
                        optimizer,
                        seconds: f64::NAN,
                        loglik: f64::NAN,
                        iterations: 0,
                        evaluations: 0,
                        convergence: None,
                        error: Some(e.to_string()),
                        step_dot_grad: None,
                        monotone: false,
                    },
                };
                progress(&row);
                rows.push(row);
            }
        }
        rows
    };
    let rows: Vec<Vec<BenchRow>> = if cfg.workers <= 1 {
        (0..cfg.replicates).map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.replicates).into_par_iter().map(one).collect())
    };
    Ok(rows.into_iter().flatten().collect())
}

/// Median of the finite values, or NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub family: Family,
    pub optimizer: Optimizer,
    pub fits: usize,
    pub failures: usize,
    pub median_seconds: f64,
}

/// Median time per family and optimizer, in first-seen order.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryCell> {
    let mut cells: Vec<(Family, Optimizer)> = Vec::new();
    for r in rows {
        if !cells.contains(&(r.family, r.optimizer)) {
            cells.push((r.family, r.optimizer));
        }
    }
    cells
        .into_iter()
        .map(|(family, optimizer)| {
            let mine: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.family == family && r.optimizer == optimizer)
                .collect();
            let times: Vec<f64> = mine
                .iter()
                .filter(|r| r.error.is_none())
                .map(|r| r.seconds)
                .collect();
            SummaryCell {
                family,
                optimizer,
                fits: mine.len(),
                failures: mine.iter().filter(|r| r.error.is_some()).count(),
                median_seconds: median(&times),
            }
        })
        .collect()
}

/// Tidy per-fit CSV.
pub fn write_rows<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Input(format!("writing CSV: {e}"));
    out.write_record([
        "replicate",
        "family",
        "optimizer",
        "seconds",
        "loglik",
        "iterations",
        "evaluations",
        "convergence",
        "error",
    ])
    .map_err(err)?;
    for r in rows {
        out.write_record([
            r.replicate.to_string(),
            r.family.to_string(),
            r.optimizer.to_string(),
            r.seconds.to_string(),
            r.loglik.to_string(),
            r.iterations.to_string(),
            r.evaluations.to_string(),
            r.convergence.map_or(String::new(), |c| c.to_string()),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(w: W, cells: &[SummaryCell]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Input(format!("writing CSV: {e}"));
    out.write_record(["family", "optimizer", "fits", "failures", "median_seconds"])
        .map_err(err)?;
    for c in cells {
        out.write_record([
            c.family.to_string(),
            c.optimizer.to_string(),
            c.fits.to_string(),
            c.failures.to_string(),
            c.median_seconds.to_string(),
        ])
        .map_err(err)?;
    }
    out.flush()?;
    Ok(())
}
