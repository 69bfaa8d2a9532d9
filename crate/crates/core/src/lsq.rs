//! Small dense Levenberg–Marquardt solver shared by the psychometric and
//! channel fits. Problems here have two or three parameters, so normal
//! equations solved by Gaussian elimination are adequate.

/// A nonlinear least-squares problem `min_p Σ r_i(p)²`.
pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;

    fn n_residuals(&self) -> usize;

    /// Residuals at `params`, written into `out` (length `n_residuals`).
    fn residuals(&self, params: &[f64], out: &mut [f64]);

    /// Row-major Jacobian `∂r_i/∂p_j`, written into `out`
    /// (length `n_residuals * n_params`).
    fn jacobian(&self, params: &[f64], out: &mut [f64]);

    /// Map an iterate back onto the feasible set.
    fn project(&self, _params: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Converged when an accepted step satisfies `‖δ‖ ≤ tol · (‖p‖ + tol)`.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub params: Vec<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual sum of squares after every outer iteration.
    pub residual_trace: Vec<f64>,
}

fn rss(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve `a x = b` for a small dense square system, in place, with partial
/// pivoting. Returns `None` when the matrix is numerically singular.
pub(crate) fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if a[pivot * n + col].abs() <= scale * 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Damped Gauss–Newton (Marquardt scaling) from a fixed starting point.
pub fn minimize<P: LeastSquaresProblem>(problem: &P, init: &[f64], opts: SolverOptions) -> Solution {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut params = init.to_vec();
    problem.project(&mut params);

    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    let mut trial_r = vec![0.0; m];
    problem.residuals(&params, &mut r);
    let mut cost = rss(&r);
    let mut lambda = opts.initial_damping;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        problem.jacobian(&params, &mut jac);

        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for i in 0..m {
            let row = &jac[i * n..(i + 1) * n];
            for a in 0..n {
                jtr[a] += row[a] * r[i];
                for b in 0..n {
                    jtj[a * n + b] += row[a] * row[b];
                }
            }
        }
        let diag_floor = (0..n).map(|k| jtj[k * n + k]).fold(0.0f64, f64::max) * 1e-12 + 1e-300;

        let mut accepted = false;
        loop {
            let mut damped = jtj.clone();
            for k in 0..n {
                damped[k * n + k] += lambda * jtj[k * n + k].max(diag_floor);
            }
            let neg_g: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let Some(delta) = solve_dense(damped, neg_g) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break;
                }
                continue;
            };
            let mut candidate: Vec<f64> = params.iter().zip(&delta).map(|(p, d)| p + d).collect();
            problem.project(&mut candidate);
            let step: Vec<f64> = candidate.iter().zip(&params).map(|(c, p)| c - p).collect();
            let small_step = norm(&step) <= opts.step_tolerance * (norm(&params) + opts.step_tolerance);

            problem.residuals(&candidate, &mut trial_r);
            let trial_cost = rss(&trial_r);
            if trial_cost.is_finite() && trial_cost <= cost {
                params = candidate;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if small_step {
                    converged = true;
                }
                break;
            }
            if small_step {
                // No representable descent remains.
                converged = true;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                converged = true;
                break;
            }
        }
        trace.push(cost);
        if converged || (!accepted && lambda > 1e16) {
            converged = true;
            break;
        }
    }

    Solution {
        params,
        rss: cost,
        iterations,
        converged,
        residual_trace: trace,
    }
}
