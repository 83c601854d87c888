//! Small dense Levenberg–Marquardt minimizer with central-difference Jacobians.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when the accepted step is shorter than this.
    pub xtol: f64,
    pub initial_lambda: f64,
    pub max_lambda: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            max_iterations: 200,
            ftol: 1e-8,
            xtol: 1e-10,
            initial_lambda: 1e-3,
            max_lambda: 1e16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmStatus {
    Converged,
    MaxIterations,
    /// Damping overflowed before any step was accepted; parameters are the input.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub status: LmStatus,
}

pub trait LeastSquares {
    fn num_params(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut Vec<f64>);
    /// Maps a trial point back into the feasible set.
    fn project(&self, _params: &mut [f64]) {}
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Central differences with step `1e-6·max(1, |θ|)`.
pub fn numeric_jacobian<P: LeastSquares>(problem: &P, params: &[f64], m: usize) -> DMatrix<f64> {
    let n = params.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = params.to_vec();
    let (mut plus, mut minus) = (Vec::with_capacity(m), Vec::with_capacity(m));
    for j in 0..n {
        let h = 1e-6 * params[j].abs().max(1.0);
        probe[j] = params[j] + h;
        problem.residuals(&probe, &mut plus);
        probe[j] = params[j] - h;
        problem.residuals(&probe, &mut minus);
        probe[j] = params[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Monotone LM: uphill steps are rejected, so the returned cost never
/// exceeds the cost at `x0`.
pub fn minimize<P: LeastSquares>(problem: &P, x0: &[f64], cfg: &LmConfig) -> LmOutcome {
    let n = problem.num_params();
    assert_eq!(x0.len(), n, "parameter vector length");
    let mut x = x0.to_vec();
    let mut r = Vec::new();
    problem.residuals(&x, &mut r);
    let m = r.len();
    let mut cost = cost_of(&r);
    if !cost.is_finite() {
        return LmOutcome { params: x, cost, iterations: 0, status: LmStatus::Diverged };
    }
    if cost < 1e-30 {
        return LmOutcome { params: x, cost, iterations: 0, status: LmStatus::Converged };
    }

    let mut lambda = cfg.initial_lambda;
    let mut accepted = 0usize;
    let mut trial_r = Vec::with_capacity(m);
    for iter in 0..cfg.max_iterations {
        let jac = numeric_jacobian(problem, &x, m);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-300);

        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-9 * max_diag);
            }
            let step = match a.cholesky() {
                Some(ch) => -ch.solve(&g),
                None => {
                    lambda *= 10.0;
                    if lambda > cfg.max_lambda {
                        return stalled(x, cost, iter, accepted);
                    }
                    continue;
                }
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            problem.project(&mut trial);
            problem.residuals(&trial, &mut trial_r);
            let trial_cost = cost_of(&trial_r);
            if trial_cost.is_finite() && trial_cost < cost {
                let step_norm = x
                    .iter()
                    .zip(&trial)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let rel = (cost - trial_cost) / cost;
                x = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                accepted += 1;
                lambda = (lambda / 10.0).max(1e-12);
                if rel < cfg.ftol || step_norm < cfg.xtol || cost < 1e-30 {
                    return LmOutcome { params: x, cost, iterations: iter + 1, status: LmStatus::Converged };
                }
                break;
            }
            lambda *= 10.0;
            if lambda > cfg.max_lambda {
                return stalled(x, cost, iter + 1, accepted);
            }
        }
    }
    LmOutcome { params: x, cost, iterations: cfg.max_iterations, status: LmStatus::MaxIterations }
}

fn stalled(x: Vec<f64>, cost: f64, iterations: usize, accepted: usize) -> LmOutcome {
    let status = if accepted == 0 { LmStatus::Diverged } else { LmStatus::Converged };
    LmOutcome { params: x, cost, iterations, status }
}
