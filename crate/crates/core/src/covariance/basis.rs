//! Orthonormal variance basis for the nonstationary Matérn model.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Number of basis functions kept.
pub const BASIS_SIZE: usize = 8;

const CENTERS_1D: [f64; 3] = [1.0 / 6.0, 0.5, 5.0 / 6.0];
const BANDWIDTH: f64 = 1.0 / 3.0;

/// Builds `n×8` basis values at 2-d locations (row-major `coords`).
///
/// Nine Gaussian bumps on a 3×3 grid of centers are mean-centered and
/// orthonormalized by modified Gram-Schmidt (two sweeps), in center order,
/// under the inner product `<f, g> = (1/n) Σ f(s_i) g(s_i)`. The last
/// direction is dropped. Columns therefore sum to zero and satisfy
/// `ΦᵀΦ / n = I`. Coordinates outside the unit square are rescaled per axis
/// onto it first.
pub fn build_orthogonal_basis(coords: &[f64], dim: usize) -> Result<DMatrix<f64>> {
    if dim != 2 {
        return Err(Error::Basis(format!("needs 2-d coordinates, got {dim}")));
    }
    if coords.is_empty() || !coords.len().is_multiple_of(2) || coords.iter().any(|v| !v.is_finite())
    {
        return Err(Error::Basis(
            "coordinates must be a finite n×2 buffer".into(),
        ));
    }
    let n = coords.len() / 2;
    let mut scaled = coords.to_vec();
    for axis in 0..2 {
        let vals = || coords.iter().skip(axis).step_by(2);
        let lo = vals().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo < 0.0 || hi > 1.0 {
            let span = hi - lo;
            for v in scaled.iter_mut().skip(axis).step_by(2) {
                *v = if span > 0.0 { (*v - lo) / span } else { 0.5 };
            }
        }
    }

    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(9);
    for &cx in &CENTERS_1D {
        for &cy in &CENTERS_1D {
            let col: Vec<f64> = (0..n)
                .map(|i| {
                    let dx = scaled[2 * i] - cx;
                    let dy = scaled[2 * i + 1] - cy;
                    (-(dx * dx + dy * dy) / (2.0 * BANDWIDTH * BANDWIDTH)).exp()
                })
                .collect();
            cols.push(col);
        }
    }
    let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n as f64;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(BASIS_SIZE);
    for mut col in cols.into_iter().take(BASIS_SIZE) {
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        let start = inner(&col, &col).sqrt();
        for _sweep in 0..2 {
            for q in &basis {
                let r = inner(&col, q);
                col.iter_mut().zip(q).for_each(|(v, qv)| *v -= r * qv);
            }
        }
        let norm = inner(&col, &col).sqrt();
        if norm.is_nan() || norm <= 1e-8 * start {
            return Err(Error::Basis(format!(
                "direction {} is rank deficient at these locations",
                basis.len() + 1
            )));
        }
        col.iter_mut().for_each(|v| *v /= norm);
        basis.push(col);
    }
    Ok(DMatrix::from_fn(n, BASIS_SIZE, |i, j| basis[j][i]))
}
