//! Progressive composite Simpson quadrature.
//!
//! The number of equal-length segments doubles at each stage and every
//! previously evaluated abscissa is reused. Stages stop when successive
//! estimates agree to a relative tolerance.

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Stop when `|Q_2s - Q_s| <= rel_tol * |Q_2s|`.
    pub rel_tol: f64,
    /// Segments used by the first stage. Must be even.
    pub min_segments: usize,
    /// Maximum number of doublings after the first stage.
    pub max_doublings: u32,
    /// Below this magnitude the relative test becomes `|Q_2s - Q_s| <= abs_floor`.
    pub abs_floor: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            min_segments: 8,
            max_doublings: 22,
            abs_floor: 1e-300,
        }
    }
}

impl QuadratureConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return domain(format!("rel_tol must be positive, got {}", self.rel_tol));
        }
        if self.min_segments == 0 || !self.min_segments.is_multiple_of(2) {
            return domain(format!(
                "min_segments must be even and positive, got {}",
                self.min_segments
            ));
        }
        if self.max_doublings == 0 {
            return domain("max_doublings must be at least 1");
        }
        if !(self.abs_floor >= 0.0) {
            return domain("abs_floor must be nonnegative");
        }
        Ok(())
    }
}

/// Outcome of [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Integrates `f` over `[lo, hi]` by progressive Simpson quadrature.
///
/// Non-convergence is reported through [`Integral::converged`]; the caller
/// decides whether it is fatal.
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Integral
where
    F: FnMut(f64) -> f64,
{
    if lo == hi {
        return Integral {
            value: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    let mut segments = cfg.min_segments.max(2);
    let width = hi - lo;

    let ends = f(lo) + f(hi);
    let mut odd = 0.0;
    let mut even = 0.0;
    let h = width / segments as f64;
    for i in 1..segments {
        let v = f(lo + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    let mut evaluations = segments + 1;
    let mut previous = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);

    for _ in 0..cfg.max_doublings {
        if !previous.is_finite() {
            break;
        }
        segments *= 2;
        let h = width / segments as f64;
        even += odd;
        odd = 0.0;
        for i in (1..segments).step_by(2) {
            odd += f(lo + i as f64 * h);
        }
        evaluations += segments / 2;
        let current = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        let change = (current - previous).abs();
        let done = if current.abs() < cfg.abs_floor {
            change <= cfg.abs_floor
        } else {
            change <= cfg.rel_tol * current.abs()
        };
        if done {
            return Integral {
                value: current,
                converged: true,
                evaluations,
            };
        }
        previous = current;
    }
    Integral {
        value: previous,
        converged: false,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{chi2_pdf, NoncentralChi2};
    use std::f64::consts::PI;

    #[test]
    fn exact_for_cubics_at_first_comparison() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x| x * x, 0.0, 1.0, &cfg);
        assert!(r.converged);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.evaluations, 2 * cfg.min_segments + 1);
    }

    // the change between stages overstates the error of the returned value by
    // about 15x for smooth integrands, so 1e-10 accuracy needs a tighter stop
    #[test]
    fn sine_over_half_period() {
        let r = integrate(f64::sin, 0.0, PI, &QuadratureConfig::with_rel_tol(1e-10));
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn chi2_density_up_to_quantile() {
        let cfg = QuadratureConfig::with_rel_tol(1e-10);
        let r = integrate(|y| chi2_pdf(y, 3), 0.0, 7.814_727_903, &cfg);
        assert!(r.converged);
        assert!((r.value - 0.95).abs() < 1e-9);
    }

    #[test]
    fn evaluation_count_follows_doublings() {
        let cfg = QuadratureConfig::default();
        let mut calls = 0usize;
        let r = integrate(
            |x| {
                calls += 1;
                (5.0 * x).exp() * x.sqrt()
            },
            0.0,
            2.0,
            &cfg,
        );
        assert_eq!(calls, r.evaluations);
        let ratio = (r.evaluations - 1) / cfg.min_segments;
        assert!(ratio.is_power_of_two());
    }

    #[test]
    fn zero_integrand_uses_absolute_floor() {
        let r = integrate(|_| 0.0, 0.0, 1.0, &QuadratureConfig::default());
        assert!(r.converged);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn nonconvergence_is_flagged() {
        let cfg = QuadratureConfig {
            max_doublings: 2,
            ..QuadratureConfig::default()
        };
        let r = integrate(|x: f64| if x < 0.3 { 0.0 } else { 1.0 }, 0.0, 1.0, &cfg);
        assert!(!r.converged);
        assert_eq!(r.evaluations, cfg.min_segments * 4 + 1);
    }

    #[test]
    fn nan_integrand_stops_early() {
        let r = integrate(|_| f64::NAN, 0.0, 1.0, &QuadratureConfig::default());
        assert!(!r.converged);
        assert!(r.evaluations < 100);
    }

    #[test]
    fn density_integral_matches_cdf() {
        let dist = NoncentralChi2::new(5, 9.0).unwrap();
        let cfg = QuadratureConfig::default();
        let upper = 120.0;
        assert!(1.0 - dist.cdf(upper) < 1e-12);
        let r = integrate(|y| dist.pdf(y), 0.0, upper, &cfg);
        assert!((r.value - dist.cdf(upper)).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::default().validate().is_ok());
        let odd = QuadratureConfig {
            min_segments: 7,
            ..QuadratureConfig::default()
        };
        assert!(odd.validate().is_err());
        assert!(QuadratureConfig::with_rel_tol(0.0).validate().is_err());
    }
}
