//! Minimization of `SEV(0)` over the knot values of a Hermite radius function
//! subject to the coverage floor `CP(γ_j) ≥ 1 − α` on a grid of `γ`.
//!
//! The free variables are the knot values `v_1 … v_{q−1}` in units of `d`; the
//! last value is pinned to `d`. Monotonicity and the bounds
//! `[value_floor, d]` are linear constraints. After each solve the coverage is
//! swept on a fine grid; dips below `1 − α − 1e-4` are added to the constraint
//! grid and the solve is repeated.

pub mod sqp;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::performance::{coverage_probability, curve, sev, CurveKind};
use crate::quadrature::QuadratureConfig;
use crate::sphere::{
    ch_radius, check_dimension, default_knots, standard_radius, RadiusFunction, RcsSpec,
    DEFAULT_CAP,
};

use sqp::{Evaluation, LinearConstraints, Model, Settings};

/// Fine-sweep resolution used after each solve.
pub const DEFAULT_FINE_STEP: f64 = 0.05;

/// Upper end of the fine sweep.
pub const DEFAULT_GAMMA_MAX: f64 = 70.0;

/// How far below `1 − α` the fine sweep may dip before the grid is refined.
pub const SWEEP_TOLERANCE: f64 = 1e-4;

const MAX_REFINEMENTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub p: u32,
    pub alpha: f64,
    /// Cap point; must equal the last knot.
    pub k: f64,
    pub knots: Vec<f64>,
    /// `γ` values where the coverage floor is imposed. An empty grid leaves
    /// only the bounds and monotonicity and disables grid refinement.
    pub gamma_grid: Vec<f64>,
    /// Lower bound on knot values.
    pub value_floor: f64,
    /// The floor is `CP(γ_j) ≥ 1 − α − coverage_slack`.
    pub coverage_slack: f64,
    pub quadrature: QuadratureConfig,
    /// Iteration cap for each SQP run.
    pub max_iterations: usize,
}

impl OptimizationProblem {
    /// Default knots at cap 10, grid `0, 1, …, 65`, floor `1e-3·d`, slack 1e-6.
    pub fn new(p: u32, alpha: f64) -> Result<Self> {
        Self::with_cap(p, alpha, DEFAULT_CAP)
    }

    pub fn with_cap(p: u32, alpha: f64, k: f64) -> Result<Self> {
        check_dimension(p)?;
        let d = standard_radius(p, alpha)?;
        Ok(Self {
            p,
            alpha,
            k,
            knots: default_knots(p, d, k)?,
            gamma_grid: (0..=65).map(f64::from).collect(),
            value_floor: 1e-3 * d,
            coverage_slack: 1e-6,
            quadrature: QuadratureConfig::default(),
            max_iterations: Settings::default().max_iterations,
        })
    }

    /// Checks the invariants and returns `d`.
    pub fn validate(&self) -> Result<f64> {
        check_dimension(self.p)?;
        let d = standard_radius(self.p, self.alpha)?;
        if self.knots.len() < 2 || self.knots[0] != 0.0 {
            return domain("knots must start at 0 and contain at least two points");
        }
        if self.knots.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("knots must be strictly increasing");
        }
        if self.knots.last() != Some(&self.k) {
            return domain(format!("the last knot must equal k = {}", self.k));
        }
        if self
            .gamma_grid
            .iter()
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return domain("gamma grid values must be finite and nonnegative");
        }
        if self.gamma_grid.windows(2).any(|w| w[1] < w[0]) {
            return domain("gamma grid must be sorted");
        }
        if !(self.value_floor > 0.0 && self.value_floor < d) {
            return domain(format!("value_floor must lie in (0, d) with d = {d}"));
        }
        if !(self.coverage_slack >= 0.0 && self.coverage_slack.is_finite()) {
            return domain("coverage_slack must be finite and nonnegative");
        }
        self.quadrature.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub radius: RadiusFunction,
    pub sev_at_zero: f64,
    /// Smallest coverage over the final constraint grid.
    pub min_coverage_on_grid: f64,
    /// Smallest coverage over the fine sweep.
    pub global_min_coverage: f64,
    pub global_argmin_gamma: f64,
    /// `|CP(γ_max) − (1 − α)|` from the fine sweep.
    pub asymptote_gap: f64,
    /// Constraint grid after refinement.
    pub gamma_grid: Vec<f64>,
    /// SQP iterations of the run that produced the returned radius.
    pub iterations: usize,
    pub converged: bool,
}

/// Outcome of [`verify_global_coverage`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSweep {
    pub min_cp: f64,
    pub argmin_gamma: f64,
    pub asymptote_gap: f64,
    pub gamma: Vec<f64>,
    pub coverage: Vec<f64>,
}

impl CoverageSweep {
    /// Local minima of the sweep lying below `level`.
    pub fn dips_below(&self, level: f64) -> Vec<f64> {
        let c = &self.coverage;
        (0..c.len())
            .filter(|&i| {
                c[i] < level
                    && (i == 0 || c[i] <= c[i - 1])
                    && (i + 1 == c.len() || c[i] <= c[i + 1])
            })
            .map(|i| self.gamma[i])
            .collect()
    }
}

/// Coverage on `{0, fine_step, …, gamma_max}`: its minimum, where it occurs,
/// and the gap `|CP(gamma_max) − (1 − α)|`.
pub fn verify_global_coverage(
    radius: &RadiusFunction,
    alpha: f64,
    fine_step: f64,
    gamma_max: f64,
    cfg: &QuadratureConfig,
) -> Result<CoverageSweep> {
    if !(fine_step > 0.0 && fine_step.is_finite()) {
        return domain(format!("fine_step must be positive, got {fine_step}"));
    }
    if !(gamma_max >= 0.0 && gamma_max.is_finite()) {
        return domain(format!(
            "gamma_max must be finite and nonnegative, got {gamma_max}"
        ));
    }
    let spec = RcsSpec::new(alpha, radius.clone())?;
    let gammas = sweep_grid(fine_step, gamma_max);
    let c = curve(&spec, &gammas, CurveKind::Coverage, cfg)?;
    let (min_cp, argmin_gamma) = c.min().unwrap_or((f64::NAN, 0.0));
    let last = *c.value.last().unwrap_or(&f64::NAN);
    Ok(CoverageSweep {
        min_cp,
        argmin_gamma,
        asymptote_gap: (last - (1.0 - alpha)).abs(),
        gamma: c.gamma,
        coverage: c.value,
    })
}

/// `{0, step, 2·step, …}` up to `max`, always ending exactly at `max`
/// unless `step > max`.
pub fn sweep_grid(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    if let Some(last) = g.last_mut() {
        if (*last - max).abs() < 1e-9 * step {
            *last = max;
        }
    }
    g
}

struct SevModel<'a> {
    problem: &'a OptimizationProblem,
    d: f64,
    grid: &'a [f64],
    level: f64,
}

enum Task {
    Sev,
    Coverage(f64),
}

impl SevModel<'_> {
    fn radius(&self, x: &[f64]) -> Result<RadiusFunction> {
        let mut values: Vec<f64> = x.iter().map(|v| v * self.d).collect();
        values.push(self.d);
        RadiusFunction::hermite_unchecked(
            self.problem.p,
            self.d,
            self.problem.knots.clone(),
            values,
        )
    }
}

impl Model for SevModel<'_> {
    fn dim(&self) -> usize {
        self.problem.knots.len() - 1
    }

    fn evaluate(&self, points: &[Vec<f64>]) -> Result<Vec<Evaluation>> {
        let specs = points
            .iter()
            .map(|x| RcsSpec::new(self.problem.alpha, self.radius(x)?))
            .collect::<Result<Vec<_>>>()?;
        let tasks: Vec<(usize, Task)> = (0..points.len())
            .flat_map(|i| {
                std::iter::once((i, Task::Sev))
                    .chain(self.grid.iter().map(move |&g| (i, Task::Coverage(g))))
            })
            .collect();
        let cfg = &self.problem.quadrature;
        let values = tasks
            .par_iter()
            .map(|(i, task)| match task {
                Task::Sev => sev(&specs[*i], 0.0, cfg),
                Task::Coverage(g) => coverage_probability(&specs[*i], *g, cfg),
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(values
            .chunks(self.grid.len() + 1)
            .map(|chunk| Evaluation {
                objective: chunk[0],
                constraints: chunk[1..].iter().map(|c| c - self.level).collect(),
            })
            .collect())
    }
}

/// `x_0 ≥ floor`, `x_{i+1} ≥ x_i`, `x_{n−1} ≤ 1`.
fn linear_constraints(n: usize, floor: f64) -> LinearConstraints {
    let mut lc = LinearConstraints::default();
    let mut row = vec![0.0; n];
    row[0] = 1.0;
    lc.rows.push(row);
    lc.rhs.push(floor);
    for i in 0..n - 1 {
        let mut row = vec![0.0; n];
        row[i] = -1.0;
        row[i + 1] = 1.0;
        lc.rows.push(row);
        lc.rhs.push(0.0);
    }
    let mut row = vec![0.0; n];
    row[n - 1] = -1.0;
    lc.rows.push(row);
    lc.rhs.push(-1.0);
    lc
}

/// Clips to `[floor, 1]` and makes the sequence nondecreasing.
fn project(mut x: Vec<f64>, floor: f64) -> Vec<f64> {
    let mut running = floor;
    for v in x.iter_mut() {
        running = running.max(v.clamp(floor, 1.0));
        *v = running;
    }
    x
}

/// Normalized starting points: Casella-Hwang values, all `d`, and a ramp
/// from `d/2` at 0 to `d` at `k`.
fn starting_points(problem: &OptimizationProblem, d: f64, floor: f64) -> Vec<Vec<f64>> {
    let free = &problem.knots[..problem.knots.len() - 1];
    let mut starts = Vec::new();
    if let Ok(ch) = free
        .iter()
        .map(|&x| ch_radius(x, problem.p, d).map(|b| b / d))
        .collect::<Result<Vec<f64>>>()
    {
        starts.push(ch);
    }
    starts.push(vec![1.0; free.len()]);
    starts.push(free.iter().map(|x| 0.5 + 0.5 * x / problem.k).collect());
    starts.into_iter().map(|s| project(s, floor)).collect()
}

struct Candidate {
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

fn solve_on_grid(
    problem: &OptimizationProblem,
    d: f64,
    grid: &[f64],
    extra_start: Option<&[f64]>,
) -> Result<Option<Candidate>> {
    let model = SevModel {
        problem,
        d,
        grid,
        level: 1.0 - problem.alpha - problem.coverage_slack,
    };
    let floor = problem.value_floor / d;
    let linear = linear_constraints(model.dim(), floor);
    let settings = Settings {
        max_iterations: problem.max_iterations,
        ..Settings::default()
    };
    let mut starts = starting_points(problem, d, floor);
    if let Some(x) = extra_start {
        starts.insert(0, x.to_vec());
    }
    let mut best: Option<Candidate> = None;
    for x0 in starts {
        let out = sqp::minimize(&model, x0, &linear, &settings, problem.coverage_slack)?;
        if let Some(p) = out.best_feasible {
            let (x, objective) =
                polish(&model, p.x, p.eval.objective, floor, problem.coverage_slack)?;
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(Candidate {
                    x,
                    objective,
                    iterations: out.iterations,
                    converged: out.converged,
                });
            }
        }
    }
    Ok(best)
}

/// Moves each value, in order, down to its lower admissible bound when that
/// keeps the point feasible and does not raise the objective. Catches
/// directions along which the objective is too flat for finite differences.
fn polish(
    model: &SevModel<'_>,
    mut x: Vec<f64>,
    mut objective: f64,
    floor: f64,
    margin: f64,
) -> Result<(Vec<f64>, f64)> {
    for i in 0..x.len() {
        let bound = if i == 0 { floor } else { x[i - 1] };
        if x[i] <= bound {
            continue;
        }
        let mut trial = x.clone();
        trial[i] = bound;
        let e = model.evaluate(std::slice::from_ref(&trial))?.remove(0);
        let feasible = e.constraints.iter().all(|c| *c >= -margin);
        if feasible && e.objective <= objective {
            x = trial;
            objective = e.objective;
        }
    }
    Ok((x, objective))
}

/// Knot values in units of `d`, made exactly admissible.
fn finalize_values(x: &[f64], d: f64, floor: f64) -> Vec<f64> {
    let mut values: Vec<f64> = project(x.to_vec(), floor / d)
        .iter()
        .map(|v| (v * d).min(d))
        .collect();
    values.push(d);
    values
}

/// Solves the problem with multi-start SQP, then verifies coverage on the
/// fine sweep, refining the constraint grid when it dips.
pub fn solve(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    let d = problem.validate()?;
    let target = 1.0 - problem.alpha;
    let mut grid = problem.gamma_grid.clone();
    let gamma_max = DEFAULT_GAMMA_MAX.max(grid.last().copied().unwrap_or(0.0));
    let mut warm: Option<Vec<f64>> = None;

    for round in 0..=MAX_REFINEMENTS {
        let Some(best) = solve_on_grid(problem, d, &grid, warm.as_deref())? else {
            return Err(infeasible(problem, d));
        };
        let values = finalize_values(&best.x, d, problem.value_floor);
        let radius = RadiusFunction::hermite(problem.p, d, problem.knots.clone(), values)?;
        let spec = RcsSpec::new(problem.alpha, radius.clone())?;
        let sweep = verify_global_coverage(
            &radius,
            problem.alpha,
            DEFAULT_FINE_STEP,
            gamma_max,
            &problem.quadrature,
        )?;
        let dips = sweep.dips_below(target - SWEEP_TOLERANCE);
        let new_points: Vec<f64> = dips
            .into_iter()
            .filter(|g| !grid.iter().any(|x| (x - g).abs() < 1e-12))
            .collect();
        if new_points.is_empty() || round == MAX_REFINEMENTS || problem.gamma_grid.is_empty() {
            let on_grid = curve(&spec, &grid, CurveKind::Coverage, &problem.quadrature)?;
            return Ok(OptimizationResult {
                sev_at_zero: sev(&spec, 0.0, &problem.quadrature)?,
                min_coverage_on_grid: on_grid.min().map_or(f64::NAN, |m| m.0),
                global_min_coverage: sweep.min_cp,
                global_argmin_gamma: sweep.argmin_gamma,
                asymptote_gap: sweep.asymptote_gap,
                gamma_grid: grid,
                iterations: best.iterations,
                converged: best.converged,
                radius,
            });
        }
        grid.extend(new_points);
        grid.sort_by(f64::total_cmp);
        warm = Some(best.x);
    }
    unreachable!("the last refinement round always returns")
}

fn infeasible(problem: &OptimizationProblem, d: f64) -> Error {
    let flat = RadiusFunction::hermite_flat(problem.p, d, problem.knots.clone())
        .and_then(|r| RcsSpec::new(problem.alpha, r));
    let level = 1.0 - problem.alpha - problem.coverage_slack;
    let flat_min = flat.and_then(|spec| {
        curve(
            &spec,
            &problem.gamma_grid,
            CurveKind::Coverage,
            &problem.quadrature,
        )
    });
    match flat_min.ok().and_then(|c| c.min()) {
        Some((m, g)) if m < level => Error::Infeasible(format!(
            "even the constant radius d misses the coverage floor: CP({g}) = {m} < {level}"
        )),
        _ => Error::Infeasible("no start reached a feasible point".into()),
    }
}
