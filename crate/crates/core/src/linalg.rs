//! Dense kernels for the small per-observation blocks.
//!
//! Matrices are row-major `n×n` slices. Only the lower triangle of a
//! Cholesky factor is meaningful; the strict upper triangle is left as-is.

/// In-place lower Cholesky factorization.
///
/// On failure returns the pivot index whose Schur complement was not
/// positive.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), usize> {
    debug_assert!(a.len() >= n * n);
    for j in 0..n {
        let rj = j * n;
        let d = a[rj + j] - dot(&a[rj..rj + j], &a[rj..rj + j]);
        if !(d > 0.0 && d.is_finite()) {
            return Err(j);
        }
        let d = d.sqrt();
        a[rj + j] = d;
        for i in (j + 1)..n {
            let ri = i * n;
            let s = a[ri + j] - dot(&a[ri..ri + j], &a[rj..rj + j]);
            a[ri + j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L x = b` in place.
pub fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place.
pub fn solve_lower_transpose(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// `y = A x` for a row-major `n×n` matrix.
pub fn mat_vec(a: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate().take(n) {
        *yi = a[i * n..(i + 1) * n]
            .iter()
            .zip(x)
            .map(|(a, x)| a * x)
            .sum();
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
