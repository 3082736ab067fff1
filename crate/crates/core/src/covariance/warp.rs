//! Warping of unit-sphere locations by gradients of degree-2 harmonics.

/// Number of degree-2 harmonics, and so of warp coefficients.
pub const WARP_SIZE: usize = 5;

/// Gradients in ℝ³ of the degree-2 solid harmonics
/// `xy, yz, xz, x² − y², 2z² − x² − y²` at `s`.
///
/// The last polynomial is `3z² − 1` written homogeneously; on the unit
/// sphere the two agree.
pub fn harmonic_gradients(s: &[f64]) -> [[f64; 3]; WARP_SIZE] {
    let (x, y, z) = (s[0], s[1], s[2]);
    [
        [y, x, 0.0],
        [0.0, z, y],
        [z, 0.0, x],
        [2.0 * x, -2.0 * y, 0.0],
        [-2.0 * x, -2.0 * y, 4.0 * z],
    ]
}

/// `s + Σ_k b_k ∇h_k(s)`.
pub fn warp_location(s: &[f64], b: &[f64]) -> [f64; 3] {
    let grads = harmonic_gradients(s);
    let mut out = [s[0], s[1], s[2]];
    for (bk, g) in b.iter().zip(&grads) {
        for c in 0..3 {
            out[c] += bk * g[c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficients_leave_points_fixed() {
        let s = [0.6, 0.0, 0.8];
        assert_eq!(warp_location(&s, &[0.0; 5]), s);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let polys: [fn(f64, f64, f64) -> f64; 5] = [
            |x, y, _| x * y,
            |_, y, z| y * z,
            |x, _, z| x * z,
            |x, y, _| x * x - y * y,
            |x, y, z| 2.0 * z * z - x * x - y * y,
        ];
        let s = [0.3, -0.5, 0.81];
        let g = harmonic_gradients(&s);
        let h = 1e-6;
        for (k, p) in polys.iter().enumerate() {
            for c in 0..3 {
                let mut up = s;
                let mut dn = s;
                up[c] += h;
                dn[c] -= h;
                let fd = (p(up[0], up[1], up[2]) - p(dn[0], dn[1], dn[2])) / (2.0 * h);
                assert!((fd - g[k][c]).abs() < 1e-9);
            }
        }
        assert_eq!(g[3], [0.6, 1.0, 0.0]);
    }
}
