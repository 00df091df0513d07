//! Monotone piecewise cubic Hermite interpolation (Fritsch-Carlson slopes).

use crate::error::{Error, Result};

/// Shape-preserving cubic Hermite interpolant through `(knots[i], values[i])`.
///
/// Slopes are limited so that nondecreasing data give a nondecreasing
/// interpolant whose range is `[values[0], values[q-1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::Construction(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(Error::Construction("need at least two knots".into()));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Construction(
                "knots and values must be finite".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Construction(
                "knots must be strictly increasing".into(),
            ));
        }
        let slopes = fritsch_carlson_slopes(&knots, &values);
        Ok(Self {
            knots,
            values,
            slopes,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Evaluates the interpolant on `[x_1, x_q]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= self.lower() && x <= self.upper()) {
            return Err(Error::Domain(format!(
                "x = {x} outside [{}, {}]",
                self.lower(),
                self.upper()
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without the range check. Arguments outside the knot range
    /// are clamped to it.
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        if x <= self.knots[0] {
            return self.values[0];
        }
        // index of the interval [x_i, x_{i+1}) containing x
        let i = self.knots.partition_point(|&k| k <= x) - 1;
        if self.values[i] == self.values[i + 1]
            && self.slopes[i] == 0.0
            && self.slopes[i + 1] == 0.0
        {
            return self.values[i];
        }
        let h = self.knots[i + 1] - self.knots[i];
        let t = (x - self.knots[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i]
            + h10 * h * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.slopes[i + 1]
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

    if n == 2 {
        return vec![delta[0], delta[0]];
    }

    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (prev, next) = (delta[i - 1], delta[i]);
        if prev == 0.0 || next == 0.0 || (prev > 0.0) != (next > 0.0) {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / prev + w2 / next);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// One-sided three-point slope, clipped to keep the end interval monotone.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    if del0 == 0.0 {
        return 0.0;
    }
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if (d > 0.0) != (del0 > 0.0) || d == 0.0 {
        0.0
    } else if (del0 > 0.0) != (del1 > 0.0) && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}
