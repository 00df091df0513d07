//! Geometry of recentered confidence spheres.
//!
//! A sphere is centered on the positive-part James-Stein estimate `a⁺(T)·X`,
//! `T = ‖X‖/√p`, and has radius `b(T)` for a nondecreasing radius function
//! `b` bounded by the standard radius `d`.

use crate::distributions::chi2_quantile;
use crate::error::{domain, Error, Result};
use crate::interpolation::HermiteSpline;

/// Cap point beyond which the radius function equals `d`.
pub const DEFAULT_CAP: f64 = 10.0;

/// Relative tolerance for matching a stored `d` against `(p, alpha)`.
const D_CONSISTENCY_TOL: f64 = 1e-9;

pub fn check_dimension(p: u32) -> Result<()> {
    if p < 3 || p.is_multiple_of(2) {
        return domain(format!("dimension must be an odd integer >= 3, got {p}"));
    }
    Ok(())
}

/// Radius `d` of the standard sphere: `P(χ²_p ≤ d²) = 1 − alpha`.
pub fn standard_radius(p: u32, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(chi2_quantile(p, 1.0 - alpha)?.sqrt())
}

/// Positive-part James-Stein shrinkage factor `max{0, 1 − (1 − 2/p)/x²}`.
///
/// `a_plus(0, p)` is 0.
pub fn a_plus(x: f64, p: u32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let shrink = 1.0 - 2.0 / p as f64;
    (1.0 - shrink / (x * x)).max(0.0)
}

/// The `T` value below which `a⁺` vanishes.
pub fn a_plus_zero(p: u32) -> f64 {
    (1.0 - 2.0 / p as f64).sqrt()
}

/// Empirical-Bayes radius function of Casella and Hwang.
pub fn ch_radius(x: f64, p: u32, d: f64) -> Result<f64> {
    let pf = p as f64;
    let d2 = d * d;
    if !(d2 > pf - 2.0) {
        return domain(format!("need d² > p − 2, got d = {d}, p = {p}"));
    }
    Ok(ch_radius_unchecked(x, pf, d))
}

fn ch_radius_unchecked(x: f64, p: f64, d: f64) -> f64 {
    let d2 = d * d;
    let scale = if x * x * p <= d2 { d2 } else { p * x * x };
    let s = 1.0 - (p - 2.0) / scale;
    (s * (d2 - p * s.ln())).sqrt()
}

/// Seven knots: `0`, `d/√p`, two more spaced `c` apart, then `k/2`, `3k/4`
/// and `k`, where `c = (k/2 − d/√p)/3`.
pub fn default_knots(p: u32, d: f64, k: f64) -> Result<Vec<f64>> {
    let first = d / (p as f64).sqrt();
    if !(0.5 * k > first) {
        return domain(format!("need k/2 > d/√p, got k = {k}, d/√p = {first}"));
    }
    let c = (0.5 * k - first) / 3.0;
    Ok(vec![
        0.0,
        first,
        first + c,
        first + 2.0 * c,
        0.5 * k,
        0.75 * k,
        k,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusKind {
    Hermite,
    CasellaHwang,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Hermite(HermiteSpline),
    CasellaHwang,
    Constant(f64),
}

/// A nondecreasing radius rule `b(·)` with `0 < b ≤ d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusFunction {
    p: u32,
    d: f64,
    k: f64,
    shape: Shape,
}

impl RadiusFunction {
    /// Hermite radius through `(knots[i], values[i])`, equal to `d` beyond the
    /// last knot. The first knot must be 0; the last value must equal `d`.
    pub fn hermite(p: u32, d: f64, knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_dimension(p)?;
        check_d(d)?;
        if knots.first() != Some(&0.0) {
            return Err(Error::Construction("the first knot must be 0".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Construction(
                "knot values must be nondecreasing".into(),
            ));
        }
        if values.iter().any(|&v| !(v > 0.0 && v <= d)) {
            return Err(Error::Construction(format!(
                "knot values must lie in (0, d] with d = {d}"
            )));
        }
        let mut values = values;
        match values.last_mut() {
            Some(last) if (*last - d).abs() <= 1e-12 * d => *last = d,
            _ => {
                return Err(Error::Construction(
                    "the last knot value must equal d".into(),
                ))
            }
        }
        let spline = HermiteSpline::new(knots, values)?;
        Ok(Self {
            p,
            d,
            k: spline.upper(),
            shape: Shape::Hermite(spline),
        })
    }

    /// Hermite radius with no checks on the values; used for finite-difference
    /// probes, which may step outside the admissible set.
    pub(crate) fn hermite_unchecked(
        p: u32,
        d: f64,
        knots: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let spline = HermiteSpline::new(knots, values)?;
        Ok(Self {
            p,
            d,
            k: spline.upper(),
            shape: Shape::Hermite(spline),
        })
    }

    /// Hermite radius with every knot value equal to `d`.
    pub fn hermite_flat(p: u32, d: f64, knots: Vec<f64>) -> Result<Self> {
        let values = vec![d; knots.len()];
        Self::hermite(p, d, knots, values)
    }

    pub fn casella_hwang(p: u32, d: f64) -> Result<Self> {
        Self::casella_hwang_with_cap(p, d, DEFAULT_CAP)
    }

    /// Casella-Hwang radius; `k` is only used to split volume integrals.
    pub fn casella_hwang_with_cap(p: u32, d: f64, k: f64) -> Result<Self> {
        check_dimension(p)?;
        check_d(d)?;
        ch_radius(0.0, p, d)?;
        check_cap(k)?;
        Ok(Self {
            p,
            d,
            k,
            shape: Shape::CasellaHwang,
        })
    }

    /// Constant radius `b ≡ d`.
    pub fn constant(p: u32, d: f64) -> Result<Self> {
        Self::constant_value(p, d, d)
    }

    /// Constant radius `b ≡ value` with `0 < value ≤ d`.
    pub fn constant_value(p: u32, d: f64, value: f64) -> Result<Self> {
        check_dimension(p)?;
        check_d(d)?;
        if !(value > 0.0 && value <= d) {
            return Err(Error::Construction(format!(
                "constant radius must lie in (0, d], got {value}"
            )));
        }
        Ok(Self {
            p,
            d,
            k: DEFAULT_CAP,
            shape: Shape::Constant(value),
        })
    }

    pub fn kind(&self) -> RadiusKind {
        match self.shape {
            Shape::Hermite(_) => RadiusKind::Hermite,
            Shape::CasellaHwang => RadiusKind::CasellaHwang,
            Shape::Constant(_) => RadiusKind::Constant,
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Cap point `k`.
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn spline(&self) -> Option<&HermiteSpline> {
        match &self.shape {
            Shape::Hermite(s) => Some(s),
            _ => None,
        }
    }

    /// `b(x)` for `x ≥ 0`.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Hermite(s) => {
                if x >= self.k {
                    self.d
                } else {
                    s.eval_unchecked(x)
                }
            }
            Shape::CasellaHwang => ch_radius_unchecked(x, self.p as f64, self.d),
            Shape::Constant(v) => *v,
        }
    }

    /// `lim b(x)` as `x → ∞`.
    pub fn limit(&self) -> f64 {
        match self.shape {
            Shape::Constant(v) => v,
            _ => self.d,
        }
    }

    /// Points of `[0, k]` where `b` may fail to be smooth, including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Hermite(s) => s.knots().to_vec(),
            Shape::CasellaHwang => {
                let junction = self.d / (self.p as f64).sqrt();
                if junction < self.k {
                    vec![0.0, junction, self.k]
                } else {
                    vec![0.0, self.k]
                }
            }
            Shape::Constant(_) => vec![0.0, self.k],
        }
    }
}

fn check_d(d: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return domain(format!("d must be positive and finite, got {d}"));
    }
    Ok(())
}

fn check_cap(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return domain(format!("k must be positive and finite, got {k}"));
    }
    Ok(())
}

/// A complete recentered confidence sphere `J(b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RcsSpec {
    alpha: f64,
    radius: RadiusFunction,
}

impl RcsSpec {
    /// Checks that the radius function's `d` is the standard radius for
    /// `(p, alpha)`.
    pub fn new(alpha: f64, radius: RadiusFunction) -> Result<Self> {
        let d = standard_radius(radius.p(), alpha)?;
        if (radius.d() - d).abs() > D_CONSISTENCY_TOL * d {
            return domain(format!(
                "radius function has d = {}, but (p = {}, alpha = {alpha}) gives d = {d}",
                radius.d(),
                radius.p()
            ));
        }
        Ok(Self { alpha, radius })
    }

    pub fn p(&self) -> u32 {
        self.radius.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d(&self) -> f64 {
        self.radius.d
    }

    pub fn radius(&self) -> &RadiusFunction {
        &self.radius
    }

    /// Whether `theta` lies in the sphere computed from observation `x`.
    pub fn contains(&self, x: &[f64], theta: &[f64]) -> Result<bool> {
        let p = self.p() as usize;
        for v in [x, theta] {
            if v.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    got: v.len(),
                });
            }
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let t = norm / (p as f64).sqrt();
        let a = a_plus(t, self.p());
        let dist2: f64 = x
            .iter()
            .zip(theta)
            .map(|(xi, ti)| {
                let diff = a * xi - ti;
                diff * diff
            })
            .sum();
        let b = self.radius.eval(t);
        Ok(dist2 <= b * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d3() -> f64 {
        standard_radius(3, 0.05).unwrap()
    }

    #[test]
    fn a_plus_values() {
        for p in [3, 5, 19] {
            assert!(a_plus(a_plus_zero(p), p).abs() < 1e-15);
            assert_eq!(a_plus(0.0, p), 0.0);
        }
        assert!((a_plus(1.0, 3) - 2.0 / 3.0).abs() < 1e-15);
        assert!((a_plus(100.0, 3) - (1.0 - 1e-4 / 3.0)).abs() < 1e-15);
        assert!(a_plus(1e8, 7) < 1.0);
    }

    #[test]
    fn standard_radius_for_three_dimensions() {
        assert!((d3() - 2.795_483).abs() < 1e-6);
    }

    #[test]
    fn ch_radius_values() {
        let d = d3();
        // direct evaluation of the closed form
        let s = 1.0 - 1.0 / (d * d);
        let expected = (s * (d * d - 3.0 * s.ln())).sqrt();
        assert!((ch_radius(0.0, 3, d).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 2.678_23).abs() < 1e-5);
        assert!((ch_radius(1e6, 3, d).unwrap() - d).abs() < 1e-6);
        let j = d / 3f64.sqrt();
        let left = ch_radius(j - 1e-9, 3, d).unwrap();
        let right = ch_radius(j + 1e-9, 3, d).unwrap();
        assert!((left - right).abs() < 1e-6);
        assert!(ch_radius(0.0, 5, 1.5).is_err());
    }

    #[test]
    fn ch_radius_is_nondecreasing() {
        for p in [3, 7, 15] {
            let d = standard_radius(p, 0.05).unwrap();
            let mut prev = 0.0;
            for i in 0..5000 {
                let b = ch_radius(i as f64 * 0.01, p, d).unwrap();
                assert!(b >= prev - 1e-15);
                prev = b;
            }
        }
    }

    #[test]
    fn default_knot_rule() {
        let d = d3();
        let knots = default_knots(3, d, 10.0).unwrap();
        let first = d / 3f64.sqrt();
        let c = (5.0 - first) / 3.0;
        let expected = [0.0, first, first + c, first + 2.0 * c, 5.0, 7.5, 10.0];
        for (a, b) in knots.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((knots[1] - 1.613_97).abs() < 1e-5);
        assert!((knots[2] - 2.742_65).abs() < 1e-5);
        assert!((knots[3] - 3.871_32).abs() < 1e-5);
        assert!(((knots[4] - knots[3]) - c).abs() < 1e-12);
        assert!(((knots[3] - knots[2]) - c).abs() < 1e-12);
    }

    #[test]
    fn default_knots_increase_for_all_dimensions() {
        for p in (3..=19).step_by(2) {
            let d = standard_radius(p, 0.05).unwrap();
            let knots = default_knots(p, d, 10.0).unwrap();
            assert!(knots.windows(2).all(|w| w[1] > w[0]), "p = {p}");
        }
        assert!(default_knots(3, 2.795, 3.0).is_err());
    }

    #[test]
    fn hermite_radius_eval() {
        let d = d3();
        let knots = default_knots(3, d, 10.0).unwrap();
        let flat = RadiusFunction::hermite_flat(3, d, knots.clone()).unwrap();
        for i in 0..200 {
            assert_eq!(flat.eval(i as f64 * 0.1), d);
        }
        let values = vec![0.5, 0.9, 1.4, 2.0, 2.5, 2.7, d];
        let r = RadiusFunction::hermite(3, d, knots.clone(), values.clone()).unwrap();
        assert_eq!(r.eval(15.0), d);
        for (x, v) in knots.iter().zip(&values) {
            assert_eq!(r.eval(*x), *v);
        }
        let mut prev = 0.0;
        for i in 0..=12_000 {
            let b = r.eval(i as f64 * 1e-3);
            assert!(b >= prev - 1e-12);
            prev = b;
        }
    }

    #[test]
    fn hermite_validation() {
        let d = d3();
        let knots = default_knots(3, d, 10.0).unwrap();
        let bad_order = vec![0.5, 0.4, 1.4, 2.0, 2.5, 2.7, d];
        assert!(RadiusFunction::hermite(3, d, knots.clone(), bad_order).is_err());
        let bad_last = vec![0.5, 0.9, 1.4, 2.0, 2.5, 2.7, 2.7];
        assert!(RadiusFunction::hermite(3, d, knots.clone(), bad_last).is_err());
        let too_big = vec![0.5, 0.9, 1.4, 2.0, 2.5, 2.9, 2.9];
        assert!(RadiusFunction::hermite(3, d, knots.clone(), too_big).is_err());
        assert!(RadiusFunction::hermite(4, d, knots.clone(), vec![d; 7]).is_err());
        let mut shifted = knots;
        shifted[0] = 0.1;
        assert!(RadiusFunction::hermite(3, d, shifted, vec![d; 7]).is_err());
    }

    #[test]
    fn spec_checks_d() {
        let d = d3();
        let r = RadiusFunction::casella_hwang(3, d).unwrap();
        assert!(RcsSpec::new(0.05, r.clone()).is_ok());
        assert!(RcsSpec::new(0.10, r).is_err());
    }

    #[test]
    fn containment() {
        let d = d3();
        let spec = RcsSpec::new(0.05, RadiusFunction::casella_hwang(3, d).unwrap()).unwrap();
        assert!(spec.contains(&[0.0; 3], &[0.0; 3]).unwrap());
        let x = [1e6, -2e6, 3e5];
        assert!(spec.contains(&x, &x).unwrap());
        assert!(spec.contains(&[0.0; 2], &[0.0; 3]).is_err());
        // centre lies in its own sphere
        let x = [0.7, -1.2, 2.2];
        let t = (x.iter().map(|v| v * v).sum::<f64>() / 3.0).sqrt();
        let a = a_plus(t, 3);
        let centre: Vec<f64> = x.iter().map(|v| a * v).collect();
        assert!(spec.contains(&x, &centre).unwrap());
        // far away point is excluded
        assert!(!spec.contains(&x, &[10.0, 10.0, 10.0]).unwrap());
    }
}
