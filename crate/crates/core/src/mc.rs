//! Monte Carlo estimates of coverage and scaled expected volume.
//!
//! Samples are drawn in fixed-size batches; batch `i` uses the ChaCha stream
//! `i` of the configured seed, so estimates do not depend on how batches are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::sphere::{a_plus, RcsSpec};

const BATCH: u64 = 1 << 16;

/// Direction of `θ`; estimates depend on `θ` only through `γ = ‖θ‖`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ThetaDirection {
    #[default]
    FirstAxis,
    /// Any nonzero vector of length `p`; it is normalized.
    Along(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub direction: ThetaDirection,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 0x5eed,
            direction: ThetaDirection::FirstAxis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub cp: f64,
    pub cp_se: f64,
    pub sev: f64,
    pub sev_se: f64,
    pub samples: u64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    covered: u64,
    // SEV terms are accumulated relative to a fixed reference value
    shifted_sum: f64,
    shifted_sq: f64,
}

/// Simulates `X = θ + Z` with `‖θ‖ = gamma` and reports the covered fraction
/// and the mean of `(b(T)/d)^p`, each with its standard error.
pub fn estimate(spec: &RcsSpec, gamma: f64, cfg: &McConfig) -> Result<McEstimate> {
    if cfg.samples == 0 {
        return domain("Monte Carlo needs at least one sample");
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return domain(format!("gamma must be finite and nonnegative, got {gamma}"));
    }
    let p = spec.p() as usize;
    let theta = theta_vector(p, gamma, &cfg.direction)?;
    let radius = spec.radius();
    let d = spec.d();
    let sqrt_p = (p as f64).sqrt();
    let reference = (radius.eval(gamma / sqrt_p) / d).powi(p as i32);

    let batches = cfg.samples.div_ceil(BATCH);
    let tallies: Vec<Tally> = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(batch);
            let n = BATCH.min(cfg.samples - batch * BATCH);
            let mut x = vec![0.0; p];
            let mut tally = Tally::default();
            for _ in 0..n {
                let mut norm2 = 0.0;
                for (xi, ti) in x.iter_mut().zip(&theta) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *xi = ti + z;
                    norm2 += *xi * *xi;
                }
                let t = norm2.sqrt() / sqrt_p;
                let a = a_plus(t, spec.p());
                let b = radius.eval(t);
                let dist2: f64 = x
                    .iter()
                    .zip(&theta)
                    .map(|(xi, ti)| {
                        let diff = a * xi - ti;
                        diff * diff
                    })
                    .sum();
                if dist2 <= b * b {
                    tally.covered += 1;
                }
                let dev = (b / d).powi(p as i32) - reference;
                tally.shifted_sum += dev;
                tally.shifted_sq += dev * dev;
            }
            tally
        })
        .collect();

    let mut total = Tally::default();
    for t in &tallies {
        total.covered += t.covered;
        total.shifted_sum += t.shifted_sum;
        total.shifted_sq += t.shifted_sq;
    }
    let n = cfg.samples as f64;
    let cp = total.covered as f64 / n;
    let mean_dev = total.shifted_sum / n;
    let var = if cfg.samples > 1 {
        ((total.shifted_sq - n * mean_dev * mean_dev) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        cp,
        cp_se: (cp * (1.0 - cp) / n).sqrt(),
        sev: reference + mean_dev,
        sev_se: (var / n).sqrt(),
        samples: cfg.samples,
    })
}

fn theta_vector(p: usize, gamma: f64, direction: &ThetaDirection) -> Result<Vec<f64>> {
    let mut theta = vec![0.0; p];
    match direction {
        ThetaDirection::FirstAxis => theta[0] = gamma,
        ThetaDirection::Along(v) => {
            if v.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    got: v.len(),
                });
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return domain("theta direction must be a nonzero finite vector");
            }
            for (t, x) in theta.iter_mut().zip(v) {
                *t = gamma * x / norm;
            }
        }
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{standard_radius, RadiusFunction};

    fn ch_spec(p: u32) -> RcsSpec {
        let d = standard_radius(p, 0.05).unwrap();
        RcsSpec::new(0.05, RadiusFunction::casella_hwang(p, d).unwrap()).unwrap()
    }

    #[test]
    fn constant_radius_has_exact_sev() {
        let d = standard_radius(5, 0.05).unwrap();
        let c: f64 = 0.7;
        let spec =
            RcsSpec::new(0.05, RadiusFunction::constant_value(5, d, c * d).unwrap()).unwrap();
        let cfg = McConfig {
            samples: 50_000,
            ..McConfig::default()
        };
        let est = estimate(&spec, 1.5, &cfg).unwrap();
        assert_eq!(est.sev, (c * d / d).powi(5));
        assert_eq!(est.sev_se, 0.0);
    }

    #[test]
    fn seed_determinism() {
        let cfg = McConfig {
            samples: 100_000,
            seed: 42,
            ..McConfig::default()
        };
        let a = estimate(&ch_spec(3), 2.0, &cfg).unwrap();
        let b = estimate(&ch_spec(3), 2.0, &cfg).unwrap();
        assert_eq!(a, b);
        let other = McConfig { seed: 43, ..cfg };
        assert_ne!(a, estimate(&ch_spec(3), 2.0, &other).unwrap());
    }

    #[test]
    fn direction_does_not_matter() {
        let spec = ch_spec(5);
        let base = McConfig {
            samples: 200_000,
            seed: 7,
            ..McConfig::default()
        };
        let a = estimate(&spec, 2.0, &base).unwrap();
        let tilted = McConfig {
            direction: ThetaDirection::Along(vec![1.0, -2.0, 0.5, 3.0, 1.0]),
            seed: 8,
            ..base
        };
        let b = estimate(&spec, 2.0, &tilted).unwrap();
        let cp_se = (a.cp_se.powi(2) + b.cp_se.powi(2)).sqrt();
        let sev_se = (a.sev_se.powi(2) + b.sev_se.powi(2)).sqrt();
        assert!((a.cp - b.cp).abs() < 4.0 * cp_se);
        assert!((a.sev - b.sev).abs() < 4.0 * sev_se);
    }

    #[test]
    fn standard_error_scales_with_samples() {
        let spec = ch_spec(3);
        let small = McConfig {
            samples: 100_000,
            seed: 1,
            ..McConfig::default()
        };
        let large = McConfig {
            samples: 400_000,
            ..small.clone()
        };
        let a = estimate(&spec, 1.0, &small).unwrap();
        let b = estimate(&spec, 1.0, &large).unwrap();
        let ratio = a.cp_se / b.cp_se;
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
        let ratio = a.sev_se / b.sev_se;
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn rejects_bad_input() {
        let spec = ch_spec(3);
        let zero = McConfig {
            samples: 0,
            ..McConfig::default()
        };
        assert!(estimate(&spec, 1.0, &zero).is_err());
        let wrong_dim = McConfig {
            direction: ThetaDirection::Along(vec![1.0, 0.0]),
            ..McConfig::default()
        };
        assert!(estimate(&spec, 1.0, &wrong_dim).is_err());
        assert!(estimate(&spec, -1.0, &McConfig::default()).is_err());
    }
}
