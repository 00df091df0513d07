//! Sequential quadratic programming for small, dense problems
//!
//! ```text
//! minimize f(x)  subject to  c(x) ≥ 0,  G x ≥ h,
//! ```
//!
//! with forward-difference gradients. Each subproblem is the elastic
//! quadratic program
//!
//! ```text
//! minimize ½ dᵀBd + ∇fᵀd + ρ Σ s   s.t.  c + J d + s ≥ 0,  s ≥ 0,
//!                                        G(x + d) ≥ h,  |d_i| ≤ Δ,
//! ```
//!
//! which is always feasible when `x` satisfies the linear constraints. Steps
//! are accepted on the ℓ1 merit function `f + ρ Σ max(0, −c)` by backtracking,
//! and `B` is a damped BFGS approximation of the Lagrangian Hessian.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Objective and nonlinear constraint values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub constraints: Vec<f64>,
}

/// A smooth problem whose evaluations can be batched.
pub trait Model: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, points: &[Vec<f64>]) -> Result<Vec<Evaluation>>;
}

/// Rows of `G x ≥ h`.
#[derive(Debug, Clone, Default)]
pub struct LinearConstraints {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearConstraints {
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, h)| dot(row, x) - h)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub max_iterations: usize,
    pub fd_step: f64,
    pub penalty: f64,
    pub initial_radius: f64,
    pub max_radius: f64,
    pub step_tol: f64,
    /// Total violation `Σ max(0, −c)` regarded as feasible.
    pub feasibility_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iterations: 150,
            fd_step: 1e-5,
            penalty: 1e4,
            initial_radius: 0.25,
            max_radius: 1.0,
            step_tol: 1e-7,
            feasibility_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Point {
    pub x: Vec<f64>,
    pub eval: Evaluation,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub last: Point,
    /// Lowest-objective iterate whose constraints are all `≥ −feasible_margin`.
    pub best_feasible: Option<Point>,
    pub iterations: usize,
    pub converged: bool,
}

struct Linearization {
    eval: Evaluation,
    grad: DVector<f64>,
    jac: DMatrix<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn violation(c: &[f64]) -> f64 {
    c.iter().map(|v| (-v).max(0.0)).sum()
}

fn min_constraint(c: &[f64]) -> f64 {
    c.iter().copied().fold(f64::INFINITY, f64::min)
}

fn linearize<M: Model>(
    model: &M,
    x: &[f64],
    base: Option<Evaluation>,
    h: f64,
) -> Result<Linearization> {
    let n = x.len();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    if base.is_none() {
        points.push(x.to_vec());
    }
    for i in 0..n {
        let mut y = x.to_vec();
        y[i] += h;
        points.push(y);
    }
    let mut evals = model.evaluate(&points)?;
    let base = match base {
        Some(b) => b,
        None => evals.remove(0),
    };
    let m = base.constraints.len();
    let mut grad = DVector::zeros(n);
    let mut jac = DMatrix::zeros(m, n);
    for (i, e) in evals.iter().enumerate() {
        grad[i] = (e.objective - base.objective) / h;
        for j in 0..m {
            jac[(j, i)] = (e.constraints[j] - base.constraints[j]) / h;
        }
    }
    Ok(Linearization {
        eval: base,
        grad,
        jac,
    })
}

/// Solves the elastic subproblem; returns the step and the multipliers of
/// the nonlinear constraints.
fn solve_subproblem(
    b: &DMatrix<f64>,
    lin: &Linearization,
    linear: &LinearConstraints,
    linear_residual: &[f64],
    radius: f64,
    penalty: f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = b.nrows();
    let m = lin.eval.constraints.len();
    let nz = n + m;

    let mut p = vec![vec![0.0; nz]; nz];
    for i in 0..n {
        for j in 0..n {
            p[i][j] = 0.5 * (b[(i, j)] + b[(j, i)]);
        }
    }
    let mut q = vec![0.0; nz];
    q[..n].copy_from_slice(lin.grad.as_slice());
    for j in 0..m {
        q[n + j] = penalty;
    }

    // rows of A z ≤ rhs
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..m {
        let mut row = vec![0.0; nz];
        for (i, r) in row[..n].iter_mut().enumerate() {
            *r = -lin.jac[(j, i)];
        }
        row[n + j] = -1.0;
        a.push(row);
        rhs.push(lin.eval.constraints[j]);
    }
    for j in 0..m {
        let mut row = vec![0.0; nz];
        row[n + j] = -1.0;
        a.push(row);
        rhs.push(0.0);
    }
    for (g, r) in linear.rows.iter().zip(linear_residual) {
        let mut row = vec![0.0; nz];
        for i in 0..n {
            row[i] = -g[i];
        }
        a.push(row);
        rhs.push(r.max(0.0));
    }
    for i in 0..n {
        let mut row = vec![0.0; nz];
        row[i] = 1.0;
        a.push(row.clone());
        rhs.push(radius);
        row[i] = -1.0;
        a.push(row);
        rhs.push(radius);
    }

    let p = CscMatrix::from(&p);
    let a = CscMatrix::from(&a);
    let cones: [SupportedConeT<f64>; 1] = [NonnegativeConeT(rhs.len())];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .build()
        .ok()?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &rhs, &cones, settings).ok()?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        _ => return None,
    }
    let x = &solver.solution.x;
    let z = &solver.solution.z;
    let step = DVector::from_iterator(n, x[..n].iter().copied());
    let multipliers = DVector::from_iterator(m, z[..m].iter().map(|v| v.max(0.0)));
    Some((step, multipliers))
}

fn damped_bfgs(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 0.0) {
        return;
    }
    let sy = s.dot(y);
    let y = if sy < 0.2 * sbs {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    } else {
        y.clone()
    };
    let sy = s.dot(&y);
    if !(sy > 0.0) {
        return;
    }
    *b += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
}

/// Runs SQP from `x0`, which must satisfy the linear constraints.
/// `feasible_margin` is the constraint level accepted as feasible when
/// tracking the best iterate.
pub fn minimize<M: Model>(
    model: &M,
    x0: Vec<f64>,
    linear: &LinearConstraints,
    settings: &Settings,
    feasible_margin: f64,
) -> Result<Outcome> {
    let n = model.dim();
    if x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    let mut x = x0;
    let mut lin = linearize(model, &x, None, settings.fd_step)?;
    let scale = lin.eval.objective.abs().max(f64::MIN_POSITIVE);
    let rho = settings.penalty;
    // penalty of the merit function; kept above the multipliers
    let mut mu = 1.0;
    let merit = |e: &Evaluation, mu: f64| e.objective / scale + mu * violation(&e.constraints);

    let mut b = DMatrix::<f64>::identity(n, n);
    let mut radius = settings.initial_radius;
    let mut best: Option<Point> = None;
    let track = |x: &[f64], e: &Evaluation, best: &mut Option<Point>| {
        if min_constraint(&e.constraints) >= -feasible_margin
            && best.as_ref().is_none_or(|p| e.objective < p.eval.objective)
        {
            *best = Some(Point {
                x: x.to_vec(),
                eval: e.clone(),
            });
        }
    };
    track(&x, &lin.eval, &mut best);

    let mut iterations = 0;
    let mut converged = false;
    let mut stalls = 0;
    while iterations < settings.max_iterations {
        iterations += 1;
        let scaled = Linearization {
            eval: Evaluation {
                objective: lin.eval.objective / scale,
                constraints: lin.eval.constraints.clone(),
            },
            grad: &lin.grad / scale,
            jac: lin.jac.clone(),
        };
        let residual = linear.residuals(&x);
        let Some((d, lambda)) = solve_subproblem(&b, &scaled, linear, &residual, radius, rho)
        else {
            radius *= 0.25;
            if radius < 1e-10 {
                break;
            }
            continue;
        };
        let step_norm = d.amax();
        let viol = violation(&lin.eval.constraints);
        if step_norm <= settings.step_tol && viol <= settings.feasibility_tol {
            converged = true;
            break;
        }

        let lambda_max = lambda.amax();
        if mu < 1.1 * lambda_max {
            mu = 1.5 * lambda_max;
        }
        let jd = &scaled.jac * &d;
        let linear_c: Vec<f64> = lin
            .eval
            .constraints
            .iter()
            .zip(jd.iter())
            .map(|(c, v)| c + v)
            .collect();
        let predicted =
            -(scaled.grad.dot(&d) + 0.5 * d.dot(&(&b * &d))) + mu * (viol - violation(&linear_c));
        let phi = merit(&lin.eval, mu);

        if !(predicted > 0.0) {
            if step_norm <= 10.0 * settings.step_tol {
                converged = viol <= settings.feasibility_tol;
                break;
            }
            radius = 0.5 * step_norm;
            continue;
        }

        let shifted = |t: f64, d: &DVector<f64>| -> Vec<f64> {
            x.iter().zip(d.iter()).map(|(xi, di)| xi + t * di).collect()
        };
        let mut t = 1.0;
        let mut accepted = None;
        let full = shifted(1.0, &d);
        let e_full = model.evaluate(std::slice::from_ref(&full))?.remove(0);
        if merit(&e_full, mu) <= phi - 1e-4 * predicted {
            accepted = Some((full, e_full));
        } else {
            // second-order correction: re-solve with the constraint values
            // observed at the full step
            let corrected = Linearization {
                eval: Evaluation {
                    objective: scaled.eval.objective,
                    constraints: e_full
                        .constraints
                        .iter()
                        .zip(jd.iter())
                        .map(|(c, v)| c - v)
                        .collect(),
                },
                grad: scaled.grad.clone(),
                jac: scaled.jac.clone(),
            };
            if let Some((d_soc, _)) =
                solve_subproblem(&b, &corrected, linear, &residual, radius, rho)
            {
                let trial = shifted(1.0, &d_soc);
                let e = model.evaluate(std::slice::from_ref(&trial))?.remove(0);
                if merit(&e, mu) <= phi - 1e-4 * predicted {
                    accepted = Some((trial, e));
                }
            }
            if accepted.is_none() {
                for _ in 0..7 {
                    t *= 0.5;
                    let trial = shifted(t, &d);
                    let e = model.evaluate(std::slice::from_ref(&trial))?.remove(0);
                    if merit(&e, mu) <= phi - 1e-4 * t * predicted {
                        accepted = Some((trial, e));
                        break;
                    }
                }
            }
        }
        let Some((x_new, e_new)) = accepted else {
            radius = 0.25 * step_norm.min(radius);
            if radius < 1e-9 {
                converged = viol <= settings.feasibility_tol;
                break;
            }
            continue;
        };

        let phi_new = merit(&e_new, mu);
        track(&x_new, &e_new, &mut best);
        let new_lin = linearize(model, &x_new, Some(e_new), settings.fd_step)?;

        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let grad_l = |l: &Linearization| &l.grad / scale - l.jac.transpose() * &lambda;
        let y = grad_l(&new_lin) - grad_l(&lin);
        damped_bfgs(&mut b, &s, &y);

        if t == 1.0 && step_norm >= 0.9 * radius {
            radius = (2.0 * radius).min(settings.max_radius);
        } else if t < 1.0 {
            radius = (t * step_norm).max(1e-6);
        }
        x = x_new;
        lin = new_lin;

        let small = (phi - phi_new).abs() <= 1e-12 * phi.abs().max(1.0);
        stalls = if small { stalls + 1 } else { 0 };
        if stalls >= 3 && violation(&lin.eval.constraints) <= settings.feasibility_tol {
            converged = true;
            break;
        }
    }

    Ok(Outcome {
        last: Point { x, eval: lin.eval },
        best_feasible: best,
        iterations,
        converged,
    })
}
