//! Modified Bessel function of the second kind for fractional order, and the
//! Matérn correlation built on it.
//!
//! For `x < 2` the base pair `K_μ, K_{μ+1}` with `|μ| ≤ 1/2` comes from
//! Temme's series; otherwise from Steed's continued fraction (CF2). Higher
//! orders follow by forward recurrence, which is stable for `K`.

use crate::error::{Error, Result};

/// Taylor coefficients of `1/Γ(z)` about zero, `c[k]` multiplying `z^(k+1)`.
#[allow(clippy::excessive_precision)]
const RGAMMA_TAYLOR: [f64; 30] = [
    1.0,
    0.5772156649015328606065,
    -0.655878071520253881077,
    -0.042002635034095235529,
    0.1665386113822914895017,
    -0.04219773455554433674821,
    -0.009621971527876973562115,
    0.007218943246663099542395,
    -0.001165167591859065112114,
    -0.0002152416741149509728157,
    0.0001280502823881161861532,
    -0.00002013485478078823865569,
    -0.000001250493482142670657345,
    0.000001133027231981695882374,
    -2.05633841697760710345e-7,
    6.116095104481415817862e-9,
    5.002007644469222930056e-9,
    -1.181274570487020144588e-9,
    1.043426711691100510492e-10,
    7.78226343990507125405e-12,
    -3.696805618642205708188e-12,
    5.100370287454475979015e-13,
    -2.058326053566506783222e-14,
    -5.34812253942301798237e-15,
    1.226778628238260790159e-15,
    -1.181259301697458769514e-16,
    1.18669225475160033258e-18,
    1.412380655318031781556e-18,
    -2.298745684435370206592e-19,
    1.714406321927337433384e-20,
];

/// Temme's auxiliary gamma quantities for `|μ| ≤ 1/2`:
/// `g1 = (1/Γ(1−μ) − 1/Γ(1+μ)) / 2μ` and `g2 = (1/Γ(1−μ) + 1/Γ(1+μ)) / 2`.
///
/// Splitting the series by parity gives both without cancellation.
fn temme_gammas(mu: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    // 1/Γ(1+μ) = Σ c[k] μ^k; Horner over μ² for each parity class.
    let (mut odd_powers, mut even_powers) = (0.0, 0.0);
    for k in (0..RGAMMA_TAYLOR.len()).rev() {
        if k % 2 == 0 {
            even_powers = even_powers * mu2 + RGAMMA_TAYLOR[k];
        } else {
            odd_powers = odd_powers * mu2 + RGAMMA_TAYLOR[k];
        }
    }
    (-odd_powers, even_powers)
}

/// `1/Γ(1+μ)` for `|μ| ≤ 1/2`.
fn rgamma_1p(mu: f64) -> f64 {
    let (g1, g2) = temme_gammas(mu);
    g2 - mu * g1
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x >= 30.0 {
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let series =
            inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
        return (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series;
    }
    if x < 0.5 {
        return -rgamma_1p(x).ln() - x.ln();
    }
    let n = (x + 0.5).floor() as usize;
    let mu = x - n as f64;
    let mut acc = -rgamma_1p(mu).ln();
    for j in 1..n {
        acc += (mu + j as f64).ln();
    }
    acc
}

const MAX_ITER: usize = 10_000;

/// The parts of Temme's series that depend only on the order.
#[derive(Debug, Clone, Copy)]
struct TemmeConsts {
    mu: f64,
    fact: f64,
    gam1: f64,
    gam2: f64,
    gampl: f64,
    gammi: f64,
}

impl TemmeConsts {
    fn new(mu: f64) -> Self {
        let pimu = std::f64::consts::PI * mu;
        let fact = if pimu.abs() < f64::EPSILON {
            1.0
        } else {
            pimu / pimu.sin()
        };
        let (gam1, gam2) = temme_gammas(mu);
        Self {
            mu,
            fact,
            gam1,
            gam2,
            gampl: gam2 - mu * gam1,
            gammi: gam2 + mu * gam1,
        }
    }

    /// `K_μ(x)` and `K_{μ+1}(x)` for small x, unscaled. `ln_x` is `ln x`.
    fn series(&self, x: f64, ln_x: f64) -> (f64, f64) {
        let mu = self.mu;
        let half_x = 0.5 * x;
        let d = std::f64::consts::LN_2 - ln_x;
        let e = mu * d;
        let ee = e.exp();
        let inv_ee = 1.0 / ee;
        let cosh = 0.5 * (ee + inv_ee);
        let sinh_over = if e.abs() < 1e-4 {
            1.0 + e * e / 6.0
        } else {
            0.5 * (ee - inv_ee) / e
        };

        let mut ff = self.fact * (self.gam1 * cosh + self.gam2 * sinh_over * d);
        let mut sum = ff;
        let mut p = 0.5 * ee / self.gampl;
        let mut q = 0.5 * inv_ee / self.gammi;
        let mut c = 1.0;
        let dd = half_x * half_x;
        let mut sum1 = p;
        let mu2 = mu * mu;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            let del1 = c * (p - fi * ff);
            sum1 += del1;
            if del.abs() < sum.abs() * f64::EPSILON && del1.abs() < sum1.abs() * f64::EPSILON {
                break;
            }
        }
        (sum, sum1 * (2.0 / x))
    }
}

/// `e^x K_μ(x)` and `e^x K_{μ+1}(x)` by Steed's CF2, `|μ| ≤ 1/2`, `x ≥ 2`.
fn steed_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    h *= a1;
    let k_mu = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    (k_mu, k_mu1)
}

/// `K_{ν−1}(x)` and `K_ν(x)` as mantissas sharing the factor `exp(ln_scale)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledPair {
    pub lower: f64,
    pub upper: f64,
    pub ln_scale: f64,
}

const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_LN: f64 = 575.646_273_248_511_4; // 250 ln 10

/// Everything about an order `ν` that can be prepared before seeing `x`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Order {
    /// Base order in `[−1/2, 1/2]`.
    mu: f64,
    /// Forward recurrence steps from the base pair.
    steps: usize,
    /// For `ν ≤ 1/2` the base pair is read back to front.
    reflect: bool,
    temme: TemmeConsts,
}

impl Order {
    pub(crate) fn new(nu: f64) -> Self {
        let (mu, steps, reflect) = if nu <= 0.5 {
            (-nu, 0, true)
        } else {
            let n = (nu + 0.5).floor() as usize;
            (nu - n as f64, n - 1, false)
        };
        Self {
            mu,
            steps,
            reflect,
            temme: TemmeConsts::new(mu),
        }
    }

    /// `ln_x` must equal `x.ln()`; callers usually need it anyway.
    pub(crate) fn pair(&self, x: f64, ln_x: f64) -> ScaledPair {
        let (k0, k1, mut ln_scale) = if x < 2.0 {
            let (a, b) = self.temme.series(x, ln_x);
            (a, b, 0.0)
        } else {
            let (a, b) = steed_cf2(self.mu, x);
            (a, b, -x)
        };
        if self.reflect {
            // K_{−ν} = K_ν and K_{1−ν} = K_{ν−1}.
            return ScaledPair {
                lower: k1,
                upper: k0,
                ln_scale,
            };
        }
        let (mut lower, mut upper) = (k0, k1);
        for j in 1..=self.steps {
            let next = 2.0 * (self.mu + j as f64) / x * upper + lower;
            lower = upper;
            upper = next;
            if upper.abs() > RESCALE_ABOVE {
                lower /= RESCALE_ABOVE;
                upper /= RESCALE_ABOVE;
                ln_scale += RESCALE_LN;
            }
        }
        ScaledPair {
            lower,
            upper,
            ln_scale,
        }
    }
}

pub(crate) fn k_pair(nu: f64, x: f64) -> ScaledPair {
    Order::new(nu).pair(x, x.ln())
}

/// Modified Bessel function of the second kind, `K_ν(x)`, for real order
/// `ν ≥ 0` and `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 || x.is_infinite() {
        return Err(Error::Parameter {
            name: "x".into(),
            value: x,
            reason: "Bessel K needs a positive finite argument",
        });
    }
    if nu.is_nan() || nu < 0.0 || nu.is_infinite() {
        return Err(Error::Parameter {
            name: "nu".into(),
            value: nu,
            reason: "order must be nonnegative and finite",
        });
    }
    let p = k_pair(nu, x);
    Ok(p.upper * p.ln_scale.exp())
}

/// Unit-variance Matérn correlation in the scaled distance `x = d/α`, with
/// the normalizing constant precomputed for one smoothness.
#[derive(Debug, Clone, Copy)]
pub struct MaternKernel {
    nu: f64,
    ln_norm: f64,
    order: Order,
}

impl MaternKernel {
    pub fn new(nu: f64) -> Self {
        Self {
            nu,
            ln_norm: ln_gamma(nu) + (nu - 1.0) * std::f64::consts::LN_2,
            order: Order::new(nu),
        }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let ln_x = x.ln();
        let p = self.order.pair(x, ln_x);
        p.upper * (self.nu * ln_x + p.ln_scale - self.ln_norm).exp()
    }

    /// Correlation and its derivative in `x`, using
    /// `d/dx [x^ν K_ν(x)] = −x^ν K_{ν−1}(x)`.
    pub fn value_and_slope(&self, x: f64) -> (f64, f64) {
        if x <= 0.0 {
            let slope = if self.nu > 0.5 {
                0.0
            } else if self.nu == 0.5 {
                -1.0
            } else {
                f64::NEG_INFINITY
            };
            return (1.0, slope);
        }
        let ln_x = x.ln();
        let p = self.order.pair(x, ln_x);
        let f = (self.nu * ln_x + p.ln_scale - self.ln_norm).exp();
        (p.upper * f, -p.lower * f)
    }
}

/// Matérn correlation `(d/α)^ν K_ν(d/α) / (Γ(ν) 2^{ν−1})`, equal to 1 at d = 0.
pub fn matern_corr(d: f64, alpha: f64, nu: f64) -> f64 {
    MaternKernel::new(nu).value(d / alpha)
}
