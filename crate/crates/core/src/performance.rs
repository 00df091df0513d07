//! Coverage probability `CP(γ)` and scaled expected volume `SEV(γ)` of a
//! recentered confidence sphere, as functions of `γ = ‖θ‖`.
//!
//! Coverage is computed in polar coordinates around `θ`: with `R = ‖X‖` and
//! `U` the cosine of the angle between `X` and `θ`, the joint density is
//!
//! ```text
//! κ_p r^{p−1} exp(−(r² + γ²)/2) exp(γ r u) (1 − u²)^m,   m = (p − 3)/2,
//! ```
//!
//! and `θ` is covered iff `a²r² − 2 a r γ u + γ² ≤ b²`. For fixed `r` that is a
//! half-line in `u`, so the inner integral is the angular integral
//! `∫ e^{βu}(1 − u²)^m du` over a sub-interval of `[−1, 1]`, which has a closed
//! form for integer `m`. The outer integral over `r` is split wherever the
//! integrand loses smoothness and each piece goes to progressive Simpson.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::distributions::{chi2_cdf, chi2_sf, ln_gamma, NoncentralChi2};
use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::sphere::{a_plus, RadiusFunction, RadiusKind, RcsSpec};

/// Below this value of `|β|·(hi − lo)` the angular integral is evaluated by
/// Gauss-Legendre quadrature; above it by the closed form.
pub const CLOSED_FORM_MIN_EXPONENT: f64 = 30.0;

const GAUSS_NODES: usize = 32;

/// Tail allowance on either side of `γ` for the radial integral, added to `√p`.
const RADIAL_TAIL: f64 = 9.0;

/// Sub-samples per piece when searching for kinks of the coverage integrand.
const ROOT_SCAN: usize = 32;

/// Resolution of the grid scans over `r`.
const SCAN_STEP: f64 = 1e-3;

/// Absolute floor for pieces of probability-scale integrals; a piece smaller
/// than this in magnitude only has to settle to within it.
const PROBABILITY_FLOOR: f64 = 1e-15;

fn probability_config(cfg: &QuadratureConfig) -> QuadratureConfig {
    QuadratureConfig {
        abs_floor: cfg.abs_floor.max(PROBABILITY_FLOOR),
        ..*cfg
    }
}

fn angular_quadrature_config() -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: 1e-13,
        abs_floor: 1e-300,
        ..QuadratureConfig::default()
    }
}

/// Parameters of `G = ∫_{lo}^{hi} e^{βu} (1 − u²)^m du`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularIntegralParams {
    pub m: u32,
    pub beta: f64,
    pub lo: f64,
    pub hi: f64,
}

impl AngularIntegralParams {
    pub fn new(m: u32, beta: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&lo) || !(-1.0..=1.0).contains(&hi) || lo > hi {
            return domain(format!("need −1 ≤ lo ≤ hi ≤ 1, got [{lo}, {hi}]"));
        }
        if !beta.is_finite() {
            return domain("beta must be finite");
        }
        Ok(Self { m, beta, lo, hi })
    }
}

/// `∫_{lo}^{hi} e^{βu} (1 − u²)^m du`.
pub fn angular_integral(params: &AngularIntegralParams) -> f64 {
    let (scaled, shift) = angular_scaled(params.m, params.beta, params.lo, params.hi);
    scaled * shift.exp()
}

/// Same integral by quadrature only; an independent route for checks.
pub fn angular_integral_quadrature(params: &AngularIntegralParams) -> f64 {
    let (scaled, shift) = if params.beta >= 0.0 {
        (
            angular_by_quadrature(params.m, params.beta, params.lo, params.hi),
            params.beta * params.hi,
        )
    } else {
        (
            angular_by_quadrature(params.m, -params.beta, -params.hi, -params.lo),
            params.beta * params.lo,
        )
    };
    scaled * shift.exp()
}

/// Returns `(G e^{−s}, s)` with `s = max(β lo, β hi)`, so that the scaled
/// value never overflows.
fn angular_scaled(m: u32, beta: f64, lo: f64, hi: f64) -> (f64, f64) {
    if beta < 0.0 {
        return angular_scaled(m, -beta, -hi, -lo);
    }
    let shift = beta * hi;
    if hi <= lo {
        return (0.0, shift);
    }
    if beta * (hi - lo) < CLOSED_FORM_MIN_EXPONENT {
        (angular_gauss_legendre(m, beta, lo, hi), shift)
    } else {
        (angular_closed_form(m, beta, lo, hi), shift)
    }
}

/// `e^{−β hi} ∫_{lo}^{hi} e^{βu}(1 − u²)^m du` for `β > 0`.
///
/// Substituting `t = hi − u` gives `∫_0^{hi−lo} e^{−βt} (a + t)^m (b − t)^m dt`
/// with `a = 1 − hi`, `b = 1 + hi`. Expanding the polynomial in powers of `t`,
/// each term is `c_n ∫_0^T t^n e^{−βt} dt = c_n n!/β^{n+1} P(n + 1, βT)`.
fn angular_closed_form(m: u32, beta: f64, lo: f64, hi: f64) -> f64 {
    let m = m as usize;
    let a = 1.0 - hi;
    let b = 1.0 + hi;
    let span = hi - lo;
    let binom = binomial_row(m);

    let mut coeffs = vec![0.0; 2 * m + 1];
    for (i, ci) in binom.iter().enumerate() {
        let left = ci * a.powi((m - i) as i32);
        if left == 0.0 {
            continue;
        }
        for (j, cj) in binom.iter().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[i + j] += left * sign * cj * b.powi((m - j) as i32);
        }
    }

    let z = beta * span;
    let ln_beta = beta.ln();
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(n, c)| {
            let order = n as f64 + 1.0;
            let p = crate::distributions::gamma_p(order, z);
            c * (ln_gamma(order) - order * ln_beta).exp() * p
        })
        .sum()
}

/// Fixed 32-point Gauss-Legendre rule for `e^{−β hi} ∫ e^{βu}(1 − u²)^m du`.
/// The integrand is a polynomial of degree `2m ≤ 16` times an exponential whose
/// exponent spans less than [`CLOSED_FORM_MIN_EXPONENT`], which the rule
/// integrates to rounding error.
fn angular_gauss_legendre(m: u32, beta: f64, lo: f64, hi: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let m = m as i32;
    let sum: f64 = nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| {
            let u = mid + half * x;
            w * (beta * (u - hi)).exp() * ((1.0 - u) * (1.0 + u)).powi(m)
        })
        .sum();
    half * sum
}

fn gauss_legendre() -> &'static ([f64; GAUSS_NODES], [f64; GAUSS_NODES]) {
    static RULE: OnceLock<([f64; GAUSS_NODES], [f64; GAUSS_NODES])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_NODES;
        let mut nodes = [0.0; GAUSS_NODES];
        let mut weights = [0.0; GAUSS_NODES];
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn angular_by_quadrature(m: u32, beta: f64, lo: f64, hi: f64) -> f64 {
    let m = m as i32;
    integrate(
        |u| (beta * (u - hi)).exp() * (1.0 - u * u).max(0.0).powi(m),
        lo,
        hi,
        &angular_quadrature_config(),
    )
    .value
}

fn binomial_row(m: usize) -> Vec<f64> {
    let mut row = vec![1.0; m + 1];
    for k in 1..m {
        row[k] = row[k - 1] * (m - k + 1) as f64 / k as f64;
    }
    row
}

/// `ln κ_p` with `κ_p = 1 / (2^{(p−2)/2} Γ((p−1)/2) √π)`.
fn ln_kappa(p: u32) -> f64 {
    let pf = p as f64;
    -(0.5 * (pf - 2.0)) * std::f64::consts::LN_2
        - ln_gamma(0.5 * (pf - 1.0))
        - 0.5 * std::f64::consts::PI.ln()
}

/// Radial integration range `[max(0, γ − √p − 9), γ + √p + 9]`.
fn radial_range(p: u32, gamma: f64) -> (f64, f64) {
    let reach = (p as f64).sqrt() + RADIAL_TAIL;
    ((gamma - reach).max(0.0), gamma + reach)
}

struct CoverageIntegrand<'a> {
    p: u32,
    m: u32,
    sqrt_p: f64,
    gamma: f64,
    ln_kappa: f64,
    radius: &'a RadiusFunction,
}

impl<'a> CoverageIntegrand<'a> {
    fn new(spec: &'a RcsSpec, gamma: f64) -> Self {
        let p = spec.p();
        Self {
            p,
            m: (p - 3) / 2,
            sqrt_p: (p as f64).sqrt(),
            gamma,
            ln_kappa: ln_kappa(p),
            radius: spec.radius(),
        }
    }

    fn shrink_and_radius(&self, r: f64) -> (f64, f64) {
        let t = r / self.sqrt_p;
        (a_plus(t, self.p), self.radius.eval(t))
    }

    /// Angular mass of the acceptance set, scaled by `e^{−γ r}`.
    fn angular_mass(&self, r: f64) -> f64 {
        let (a, b) = self.shrink_and_radius(r);
        let g = self.gamma;
        let beta = g * r;
        if a == 0.0 {
            return if g <= b {
                angular_scaled(self.m, beta, -1.0, 1.0).0
            } else {
                0.0
            };
        }
        let ell = (a * a * r * r + g * g - b * b) / (2.0 * a * r * g);
        if ell >= 1.0 {
            0.0
        } else {
            angular_scaled(self.m, beta, ell.max(-1.0), 1.0).0
        }
    }

    fn radial_weight(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let dr = r - self.gamma;
        (self.ln_kappa + (self.p - 1) as f64 * r.ln() - 0.5 * dr * dr).exp()
    }

    fn eval(&self, r: f64) -> f64 {
        let w = self.radial_weight(r);
        if w == 0.0 {
            return 0.0;
        }
        w * self.angular_mass(r)
    }

    /// Zero where `ℓ(r) = 1`.
    fn upper_switch(&self, r: f64) -> f64 {
        let (a, b) = self.shrink_and_radius(r);
        let s = a * r - self.gamma;
        s * s - b * b
    }

    /// Zero where `ℓ(r) = −1`.
    fn lower_switch(&self, r: f64) -> f64 {
        let (a, b) = self.shrink_and_radius(r);
        a * r + self.gamma - b
    }

    /// Endpoints of the smooth pieces of the radial integrand on `[lo, hi]`.
    fn pieces(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![lo, hi, (self.p as f64 - 2.0).sqrt()];
        pts.extend(self.radius.breakpoints().iter().map(|x| x * self.sqrt_p));
        let mut pts = clean_points(pts, lo, hi);

        let mut roots = Vec::new();
        for w in pts.windows(2) {
            find_sign_changes(|r| self.upper_switch(r), w[0], w[1], ROOT_SCAN, &mut roots);
            find_sign_changes(|r| self.lower_switch(r), w[0], w[1], ROOT_SCAN, &mut roots);
        }
        pts.extend(roots);
        clean_points(pts, lo, hi)
    }
}

fn clean_points(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|&x| x >= lo && x <= hi);
    pts.sort_by(f64::total_cmp);
    let tol = 1e-12 * hi.abs().max(1.0);
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for x in pts {
        match out.last() {
            Some(&last) if x - last <= tol => {}
            _ => out.push(x),
        }
    }
    if let Some(last) = out.last_mut() {
        *last = hi;
    }
    out
}

/// Appends bisected roots of every sign change of `f` found on a uniform
/// `n`-step scan of `[lo, hi]`.
fn find_sign_changes(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize, out: &mut Vec<f64>) {
    let step = (hi - lo) / n as f64;
    let mut x0 = lo;
    let mut f0 = f(lo);
    for i in 1..=n {
        let x1 = if i == n { hi } else { lo + i as f64 * step };
        let f1 = f(x1);
        if (f0 > 0.0) != (f1 > 0.0) {
            out.push(bisect(&f, x0, x1, f0));
        }
        x0 = x1;
        f0 = f1;
    }
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let positive_at_a = fa > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if (f(mid) > 0.0) == positive_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return domain(format!("gamma must be finite and nonnegative, got {gamma}"));
    }
    Ok(())
}

/// Coverage probability of the sphere when `‖θ‖ = gamma`.
pub fn coverage_probability(spec: &RcsSpec, gamma: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Ok(coverage_at_origin(spec));
    }
    let integrand = CoverageIntegrand::new(spec, gamma);
    let (lo, hi) = radial_range(spec.p(), gamma);
    let pts = integrand.pieces(lo, hi);
    let cfg = probability_config(cfg);
    let mut total = 0.0;
    for w in pts.windows(2) {
        // the integrand may jump at a piece boundary, so endpoints are
        // evaluated just inside the piece
        let inset = 1e-12 * (w[1] - w[0]);
        let (lo, hi) = (w[0] + inset, w[1] - inset);
        let piece = integrate(|r| integrand.eval(r.clamp(lo, hi)), w[0], w[1], &cfg);
        if !piece.converged {
            return Err(Error::Quadrature {
                gamma,
                lo: w[0],
                hi: w[1],
                evaluations: piece.evaluations,
            });
        }
        total += piece.value;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// At `θ = 0` coverage is `P(a⁺(T)‖X‖ ≤ b(T))` with `‖X‖² ~ χ²_p`, a union of
/// radial intervals whose probabilities come from the central cdf.
fn coverage_at_origin(spec: &RcsSpec) -> f64 {
    let p = spec.p();
    let pf = p as f64;
    let sqrt_p = pf.sqrt();
    let radius = spec.radius();
    let excess = |r: f64| a_plus(r / sqrt_p, p) * r - radius.eval(r / sqrt_p);

    // a⁺ vanishes below r0, so every such r is accepted; beyond r_end,
    // a⁺ r > d ≥ b and nothing is.
    let r0 = (pf - 2.0).sqrt();
    let d = spec.d();
    let r_end = 0.5 * (d + (d * d + 4.0 * (pf - 2.0)).sqrt()) + 1e-9;
    let steps = (((r_end - r0) / SCAN_STEP).ceil() as usize).max(1);
    let mut crossings = Vec::new();
    find_sign_changes(excess, r0, r_end, steps, &mut crossings);

    // accepted intervals alternate, starting with [0, first crossing]
    let mut prob = 0.0;
    let mut start = 0.0;
    let mut inside = true;
    for &c in &crossings {
        if inside {
            prob += chi2_cdf(c * c, p) - chi2_cdf(start * start, p);
        } else {
            start = c;
        }
        inside = !inside;
    }
    if inside {
        prob += chi2_sf(start * start, p);
    }
    prob.clamp(0.0, 1.0)
}

/// Mass of the polar joint density of `(R, U)` over the whole space; equals 1
/// up to quadrature error.
pub fn polar_density_mass(p: u32, gamma: f64, cfg: &QuadratureConfig) -> Result<f64> {
    crate::sphere::check_dimension(p)?;
    check_gamma(gamma)?;
    let m = (p - 3) / 2;
    let lk = ln_kappa(p);
    let (lo, hi) = radial_range(p, gamma);
    let f = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let dr = r - gamma;
        (lk + (p - 1) as f64 * r.ln() - 0.5 * dr * dr).exp()
            * angular_scaled(m, gamma * r, -1.0, 1.0).0
    };
    let res = integrate(f, lo, hi, cfg);
    if !res.converged {
        return Err(Error::Quadrature {
            gamma,
            lo,
            hi,
            evaluations: res.evaluations,
        });
    }
    Ok(res.value)
}

/// Scaled expected volume `E[(b(T)/d)^p]` when `‖θ‖ = gamma`.
///
/// The integral over `[0, p k²]` in `y = ‖X‖²` is split at the knot images
/// `p x_i²`; each piece is integrated in `x = √(y/p)`, which removes the
/// `√y` behaviour of the density at the origin. Segments where `b` is
/// constant use the cdf directly. Beyond the cut `c` (see `volume_end`) the
/// tail contributes `(b(∞)/d)^p (1 − F(p c²))`.
pub fn sev(spec: &RcsSpec, gamma: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_gamma(gamma)?;
    let radius = spec.radius();
    let p = spec.p();
    let pf = p as f64;
    let d = spec.d();
    if radius.kind() == RadiusKind::Constant {
        return Ok((radius.limit() / d).powi(p as i32));
    }
    let dist = NoncentralChi2::new(p, gamma * gamma)?;
    let knots = radius.breakpoints();
    let cfg = probability_config(cfg);
    let values: Option<&[f64]> = radius.spline().map(|s| s.values());
    let mut total = 0.0;
    for (i, w) in knots.windows(2).enumerate() {
        let (x0, x1) = (w[0], w[1]);
        if let Some(v) = values {
            if v[i] == v[i + 1] {
                let scale = (v[i] / d).powi(p as i32);
                total += scale * (dist.cdf(pf * x1 * x1) - dist.cdf(pf * x0 * x0));
                continue;
            }
        }
        let piece = integrate(
            |x| {
                let ratio = radius.eval(x) / d;
                ratio.powi(p as i32) * dist.pdf(pf * x * x) * 2.0 * pf * x
            },
            x0,
            x1,
            &cfg,
        );
        if !piece.converged {
            return Err(Error::Quadrature {
                gamma,
                lo: x0,
                hi: x1,
                evaluations: piece.evaluations,
            });
        }
        total += piece.value;
    }
    let k = radius.k();
    let end = volume_end(radius, gamma);
    if end > k {
        let piece = integrate(
            |x| (radius.eval(x) / d).powi(p as i32) * dist.pdf(pf * x * x) * 2.0 * pf * x,
            k,
            end,
            &cfg,
        );
        if !piece.converged {
            return Err(Error::Quadrature {
                gamma,
                lo: k,
                hi: end,
                evaluations: piece.evaluations,
            });
        }
        total += piece.value;
    }
    total += (radius.limit() / d).powi(p as i32) * dist.sf(pf * end * end);
    Ok(total)
}

/// Abscissa beyond which `b` is replaced by its limit in volume integrals:
/// `k` when `b` is constant past the cap, else the end of the radial range
/// (the Casella-Hwang radius only approaches `d`).
fn volume_end(radius: &RadiusFunction, gamma: f64) -> f64 {
    let k = radius.k();
    match radius.kind() {
        RadiusKind::CasellaHwang => {
            let (_, hi) = radial_range(radius.p(), gamma);
            k.max(hi / (radius.p() as f64).sqrt())
        }
        _ => k,
    }
}

/// `∫_0^{upper} (b(√(y/p))/d)^p f(y; p, γ²) dy` as a single quadrature in `√y`.
pub fn sev_first_form(
    b: impl Fn(f64) -> f64,
    p: u32,
    d: f64,
    gamma: f64,
    upper: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_gamma(gamma)?;
    let dist = NoncentralChi2::new(p, gamma * gamma)?;
    let pf = p as f64;
    // y = s² removes the √y behaviour of the density at the origin for p = 3
    let res = integrate(
        |s| {
            let y = s * s;
            (b((y / pf).sqrt()) / d).powi(p as i32) * dist.pdf(y) * 2.0 * s
        },
        0.0,
        upper.sqrt(),
        cfg,
    );
    if !res.converged {
        return Err(Error::Quadrature {
            gamma,
            lo: 0.0,
            hi: upper,
            evaluations: res.evaluations,
        });
    }
    Ok(res.value)
}

/// SEV by one quadrature in `y` up to the same cut as [`sev`] plus the same
/// tail term; the independent route for checking the piecewise sum.
pub fn sev_single_domain(spec: &RcsSpec, gamma: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let radius = spec.radius();
    let p = spec.p();
    let pf = p as f64;
    let end = volume_end(radius, gamma);
    let body = sev_first_form(|x| radius.eval(x), p, spec.d(), gamma, pf * end * end, cfg)?;
    let dist = NoncentralChi2::new(p, gamma * gamma)?;
    Ok(body + (radius.limit() / spec.d()).powi(p as i32) * dist.sf(pf * end * end))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Coverage,
    Sev,
}

/// Paired `(γ, value)` samples of a performance measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceCurve {
    pub kind: CurveKind,
    pub gamma: Vec<f64>,
    pub value: Vec<f64>,
}

impl PerformanceCurve {
    /// Smallest value and the `γ` where it occurs.
    pub fn min(&self) -> Option<(f64, f64)> {
        self.gamma
            .iter()
            .zip(&self.value)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(g, v)| (*v, *g))
    }
}

/// Evaluates coverage or SEV at each `γ`; points are computed in parallel.
pub fn curve(
    spec: &RcsSpec,
    gammas: &[f64],
    kind: CurveKind,
    cfg: &QuadratureConfig,
) -> Result<PerformanceCurve> {
    let value = gammas
        .par_iter()
        .enumerate()
        .map(|(index, &g)| {
            let v = match kind {
                CurveKind::Coverage => coverage_probability(spec, g, cfg),
                CurveKind::Sev => sev(spec, g, cfg),
            };
            v.map_err(|e| Error::Curve {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PerformanceCurve {
        kind,
        gamma: gammas.to_vec(),
        value,
    })
}

/// Infimum of `CP` over `γ ≥ 0` estimated from the grid `gammas`: the grid
/// minimum, capped at the limit `1 − α` that coverage approaches as
/// `γ → ∞`. Returns the value and where it is attained (`∞` for the limit).
pub fn coverage_infimum(
    spec: &RcsSpec,
    gammas: &[f64],
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let limit = 1.0 - spec.alpha();
    let c = curve(spec, gammas, CurveKind::Coverage, cfg)?;
    Ok(match c.min() {
        Some((v, g)) if v < limit => (v, g),
        _ => (limit, f64::INFINITY),
    })
}

/// For each direction cosine `u` on a uniform grid of `[−1, 1]`, checks that
/// the accepted radii `{r : a²r² − 2 a r γ u + γ² ≤ b²}` form a single
/// interval (an empty set counts). Radii are scanned at a 1e-3 resolution.
pub fn acceptance_interval_diagnostic(spec: &RcsSpec, gamma: f64, directions: usize) -> bool {
    let p = spec.p();
    let sqrt_p = (p as f64).sqrt();
    let (_, r_max) = radial_range(p, gamma);
    let steps = (r_max / SCAN_STEP).ceil() as usize;
    let samples: Vec<(f64, f64, f64)> = (1..=steps)
        .map(|i| {
            let r = r_max * i as f64 / steps as f64;
            let t = r / sqrt_p;
            (r, a_plus(t, p), spec.radius().eval(t))
        })
        .collect();
    let directions = directions.max(2);
    (0..directions).all(|j| {
        let u = -1.0 + 2.0 * j as f64 / (directions - 1) as f64;
        let mut runs = 0;
        let mut inside = false;
        for &(r, a, b) in &samples {
            let accepted = a * a * r * r - 2.0 * a * r * gamma * u + gamma * gamma <= b * b;
            if accepted && !inside {
                runs += 1;
            }
            inside = accepted;
        }
        runs <= 1
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{ch_radius, default_knots, standard_radius};

    fn ch_spec(p: u32) -> RcsSpec {
        let d = standard_radius(p, 0.05).unwrap();
        RcsSpec::new(0.05, RadiusFunction::casella_hwang(p, d).unwrap()).unwrap()
    }

    fn flat_spec(p: u32) -> RcsSpec {
        let d = standard_radius(p, 0.05).unwrap();
        let knots = default_knots(p, d, 10.0).unwrap();
        RcsSpec::new(0.05, RadiusFunction::hermite_flat(p, d, knots).unwrap()).unwrap()
    }

    #[test]
    fn angular_examples() {
        let e = std::f64::consts::E;
        let g = angular_integral(&AngularIntegralParams::new(0, 1.0, -1.0, 1.0).unwrap());
        assert!((g - (e - 1.0 / e)).abs() < 1e-13);
        let g = angular_integral(&AngularIntegralParams::new(1, 0.0, -1.0, 1.0).unwrap());
        assert!((g - 4.0 / 3.0).abs() < 1e-13);
        let g = angular_integral(&AngularIntegralParams::new(0, 0.0, -0.3, 0.6).unwrap());
        assert!((g - 0.9).abs() < 1e-14);
    }

    #[test]
    fn angular_branches_agree() {
        let cases = [
            (2, 3.7, -0.4, 1.0),
            (0, 0.5, -1.0, 1.0),
            (8, 1e-3, -1.0, 1.0),
            (8, 14.9, -1.0, 1.0),
            (8, 15.1, -1.0, 1.0),
            (8, 40.0, -1.0, 1.0),
            (8, 400.0, 0.9, 1.0),
            (1, 31.0, 0.0, 1.0),
            (0, 1e-9, -1.0, 1.0),
            (8, 0.1, -1.0, 1.0),
            (8, 1.0, -1.0, 1.0),
            (8, 25.0, 0.2, 1.0),
            (5, -4.0, -0.7, 0.9),
            (3, 12.0, -0.5, 0.5),
        ];
        for (m, beta, lo, hi) in cases {
            let params = AngularIntegralParams::new(m, beta, lo, hi).unwrap();
            let closed = angular_integral(&params);
            let quad = angular_integral_quadrature(&params);
            assert!(
                ((closed - quad) / quad).abs() < 1e-10,
                "m {m} beta {beta}: {closed} vs {quad}"
            );
        }
    }

    #[test]
    fn angular_large_beta_is_finite_when_scaled() {
        let (s, shift) = angular_scaled(8, 5000.0, -1.0, 1.0);
        assert!(s.is_finite() && s > 0.0);
        assert_eq!(shift, 5000.0);
        // leading behaviour m! 2^m / β^{m+1}
        let lead = 40320.0 * 256.0 / 5000f64.powi(9);
        assert!((s / lead - 1.0).abs() < 0.01);
    }

    #[test]
    fn params_validation() {
        assert!(AngularIntegralParams::new(1, 0.0, 0.5, 0.2).is_err());
        assert!(AngularIntegralParams::new(1, 0.0, -1.5, 0.2).is_err());
        assert!(AngularIntegralParams::new(1, f64::NAN, -1.0, 1.0).is_err());
    }

    #[test]
    fn joint_density_is_normalized() {
        let cfg = QuadratureConfig::default();
        for p in [3, 7, 19] {
            for gamma in [0.0, 0.5, 5.0, 50.0] {
                let mass = polar_density_mass(p, gamma, &cfg).unwrap();
                assert!((mass - 1.0).abs() < 1e-8, "p {p} gamma {gamma}: {mass}");
            }
        }
    }

    #[test]
    fn coverage_is_continuous_at_origin() {
        let cfg = QuadratureConfig::default();
        for spec in [ch_spec(3), ch_spec(7), flat_spec(5)] {
            let c0 = coverage_probability(&spec, 0.0, &cfg).unwrap();
            let c1 = coverage_probability(&spec, 1e-4, &cfg).unwrap();
            assert!((c0 - c1).abs() < 1e-6, "{c0} vs {c1}");
        }
    }

    #[test]
    fn coverage_tends_to_nominal_level() {
        let cfg = QuadratureConfig::default();
        for spec in [ch_spec(3), flat_spec(3), ch_spec(15)] {
            let c = coverage_probability(&spec, 65.0, &cfg).unwrap();
            assert!((c - 0.95).abs() < 5e-4, "{c}");
        }
    }

    #[test]
    fn sev_of_flat_radius_is_one() {
        let cfg = QuadratureConfig::default();
        let spec = flat_spec(3);
        for gamma in [0.0, 1.0, 5.0, 20.0, 65.0] {
            assert!((sev(&spec, gamma, &cfg).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sev_of_constant_fraction() {
        let cfg = QuadratureConfig::default();
        let d = standard_radius(3, 0.05).unwrap();
        let c: f64 = 0.6;
        for gamma in [0.0, 2.0] {
            let upper = 400.0;
            let v = sev_first_form(|_| c * d, 3, d, gamma, upper, &cfg).unwrap();
            assert!((v - c.powi(3)).abs() < 1e-10);
        }
        let spec =
            RcsSpec::new(0.05, RadiusFunction::constant_value(3, d, c * d).unwrap()).unwrap();
        assert_eq!(sev(&spec, 3.0, &cfg).unwrap(), (c * d / d).powi(3));
    }

    #[test]
    fn casella_hwang_volume_past_the_cap() {
        // b stays below d for every x, so the tail must not assume b = d
        let cfg = QuadratureConfig::default();
        for (p, gamma) in [(3u32, 20.0), (5, 30.0), (15, 8.0)] {
            let d = standard_radius(p, 0.05).unwrap();
            let spec = RcsSpec::new(0.05, RadiusFunction::casella_hwang(p, d).unwrap()).unwrap();
            let dist = NoncentralChi2::new(p, gamma * gamma).unwrap();
            let pf = p as f64;
            let hi = gamma + pf.sqrt() + 12.0;
            let n = 400_000;
            let h = hi / n as f64;
            let oracle: f64 = (0..n)
                .map(|i| {
                    let r = (i as f64 + 0.5) * h;
                    let b = ch_radius(r / pf.sqrt(), p, d).unwrap();
                    (b / d).powi(p as i32) * dist.pdf(r * r) * 2.0 * r * h
                })
                .sum();
            let v = sev(&spec, gamma, &cfg).unwrap();
            assert!(
                (v - oracle).abs() < 1e-8,
                "p {p} γ {gamma}: {v} vs {oracle}"
            );
            let w =
                sev_single_domain(&spec, gamma, &QuadratureConfig::with_rel_tol(1e-11)).unwrap();
            assert!((v - w).abs() < 1e-8);
        }
    }

    #[test]
    fn interval_diagnostic_on_flat_radius() {
        assert!(acceptance_interval_diagnostic(&flat_spec(3), 0.5, 101));
        assert!(acceptance_interval_diagnostic(&flat_spec(3), 200.0, 5));
    }

    #[test]
    fn curve_reports_failing_index() {
        let spec = flat_spec(3);
        let err = curve(
            &spec,
            &[0.0, -1.0],
            CurveKind::Sev,
            &QuadratureConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Curve { index: 1, .. }));
        let ok = curve(
            &spec,
            &[0.0, 1.0, 2.0],
            CurveKind::Sev,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!(ok.value.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }
}
