//! Central and noncentral chi-square distributions and the gamma-function
//! helpers behind them.
//!
//! The noncentral pdf and cdf are Poisson mixtures of central ones. The
//! mixture is summed outward from the modal Poisson index so that large
//! noncentralities (up to several thousand) keep full precision.

use crate::error::{domain, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Poisson weights below this are dropped from the mixture sums.
const POISSON_CUTOFF: f64 = 1e-17;

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;
const FPMIN: f64 = 1e-300;

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma needs a positive argument");
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma function `P(a, x)`.
///
/// Series below `x = a + 1`, Lentz continued fraction for the complement above.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_continued_fraction(a, x)
    }
}

fn prefactor(a: f64, x: f64) -> f64 {
    (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * prefactor(a, x)
}

fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    prefactor(a, x) * h
}

fn ln_chi2_pdf(y: f64, dof: f64) -> f64 {
    let half = 0.5 * dof;
    (half - 1.0) * y.ln() - 0.5 * y - half * std::f64::consts::LN_2 - ln_gamma(half)
}

/// Central chi-square density with `dof` degrees of freedom.
pub fn chi2_pdf(y: f64, dof: u32) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    if y == 0.0 {
        return match dof {
            1 => f64::INFINITY,
            2 => 0.5,
            _ => 0.0,
        };
    }
    ln_chi2_pdf(y, dof as f64).exp()
}

/// Central chi-square distribution function.
pub fn chi2_cdf(y: f64, dof: u32) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    gamma_p(0.5 * dof as f64, 0.5 * y)
}

/// Central chi-square survival function `1 - F`.
pub fn chi2_sf(y: f64, dof: u32) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * dof as f64, 0.5 * y)
}

/// Quantile of the central chi-square distribution.
///
/// Bisection on the cdf, bracketed around the Wilson-Hilferty approximation.
pub fn chi2_quantile(dof: u32, prob: f64) -> Result<f64> {
    if dof == 0 {
        return domain("chi-square quantile needs dof >= 1");
    }
    if !(prob > 0.0 && prob < 1.0) {
        return domain(format!(
            "chi-square quantile needs 0 < prob < 1, got {prob}"
        ));
    }
    let k = dof as f64;
    let z = normal_quantile_approx(prob);
    let c = 2.0 / (9.0 * k);
    let seed = (k * (1.0 - c + z * c.sqrt()).powi(3)).max(1e-8 * k);

    let mut lo = seed * 0.5;
    let mut hi = seed * 2.0;
    while chi2_cdf(lo, dof) > prob && lo > 1e-300 {
        lo *= 0.25;
    }
    while chi2_cdf(hi, dof) < prob {
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, dof) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rational approximation to the standard normal quantile (|error| < 4.5e-4),
/// good enough to seed a bracket.
fn normal_quantile_approx(prob: f64) -> f64 {
    let (q, sign) = if prob < 0.5 {
        (prob, -1.0)
    } else {
        (1.0 - prob, 1.0)
    };
    let t = (-2.0 * q.ln()).sqrt();
    let num = 2.515_517 + 0.802_853 * t + 0.010_328 * t * t;
    let den = 1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t;
    sign * (t - num / den)
}

/// Noncentral chi-square distribution of `‖X‖²` for `X ~ N(θ, I_p)`, with
/// `dof = p` and `noncentrality = ‖θ‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncentralChi2 {
    dof: u32,
    noncentrality: f64,
}

impl NoncentralChi2 {
    pub fn new(dof: u32, noncentrality: f64) -> Result<Self> {
        if dof == 0 {
            return domain("noncentral chi-square needs dof >= 1");
        }
        if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
            return domain(format!(
                "noncentrality must be finite and nonnegative, got {noncentrality}"
            ));
        }
        Ok(Self { dof, noncentrality })
    }

    pub fn dof(&self) -> u32 {
        self.dof
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    pub fn pdf(&self, y: f64) -> f64 {
        nc_chi2_pdf(y, self)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        nc_chi2_cdf(y, self)
    }

    /// `1 - F(y)`, summed directly so small tails keep relative precision.
    pub fn sf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        let half = 0.5 * self.dof as f64;
        poisson_mixture(self.noncentrality, |j| gamma_q(half + j as f64, 0.5 * y)).min(1.0)
    }
}

/// Sums `Σ_j w_j term(j)` over Poisson(λ/2) weights, starting at the mode and
/// walking outward until the weights fall below [`POISSON_CUTOFF`]. The sum is
/// normalized by the retained weight mass.
fn poisson_mixture(lambda: f64, mut term: impl FnMut(usize) -> f64) -> f64 {
    if lambda == 0.0 {
        return term(0);
    }
    let mu = 0.5 * lambda;
    let mode = mu.floor() as usize;
    let ln_mu = mu.ln();
    let ln_w_mode = -mu + mode as f64 * ln_mu - ln_gamma(mode as f64 + 1.0);
    let w_mode = ln_w_mode.exp();

    let mut weight_sum = w_mode;
    let mut sum = w_mode * term(mode);

    let mut w = w_mode;
    let mut j = mode;
    loop {
        j += 1;
        w *= mu / j as f64;
        if w < POISSON_CUTOFF {
            break;
        }
        weight_sum += w;
        sum += w * term(j);
    }

    let mut w = w_mode;
    let mut j = mode;
    while j > 0 {
        w *= j as f64 / mu;
        j -= 1;
        if w < POISSON_CUTOFF {
            break;
        }
        weight_sum += w;
        sum += w * term(j);
    }
    sum / weight_sum
}

/// Noncentral chi-square density `f(y; p, λ)`.
pub fn nc_chi2_pdf(y: f64, dist: &NoncentralChi2) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    if y == 0.0 {
        // only the j = 0 term can be nonzero at the origin
        let w0 = (-0.5 * dist.noncentrality).exp();
        return w0 * chi2_pdf(0.0, dist.dof);
    }
    let half = 0.5 * dist.dof as f64;
    let ln_y = y.ln();
    let base = ln_chi2_pdf(y, dist.dof as f64);
    let base_half = half;
    // ln f_{p+2j}(y) = ln f_p(y) + j ln(y/2) - ln Γ(p/2 + j) + ln Γ(p/2)
    let ln_gamma_base = ln_gamma(base_half);
    poisson_mixture(dist.noncentrality, |j| {
        if j == 0 {
            return base.exp();
        }
        let jf = j as f64;
        (base + jf * (ln_y - std::f64::consts::LN_2) - ln_gamma(base_half + jf) + ln_gamma_base)
            .exp()
    })
}

/// Noncentral chi-square distribution function `F(y; p, λ)`.
pub fn nc_chi2_cdf(y: f64, dist: &NoncentralChi2) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y.is_infinite() {
        return 1.0;
    }
    let half = 0.5 * dist.dof as f64;
    poisson_mixture(dist.noncentrality, |j| gamma_p(half + j as f64, 0.5 * y)).clamp(0.0, 1.0)
}
