//! Dense Levenberg-Marquardt for small least-squares problems.
//!
//! The residual closure may fail (an unintegrable parameter point); a failed
//! trial is treated like an uphill step and the damping raised, so the
//! optimizer backs away from bad regions instead of aborting.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative RSS improvement of an accepted step drops
    /// below this.
    pub rss_tol: f64,
    /// Stop when the gradient infinity norm drops below this.
    pub grad_tol: f64,
    pub lambda_init: f64,
    /// Relative step for the central-difference Jacobian.
    pub fd_rel_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            rss_tol: 1e-10,
            grad_tol: 1e-8,
            lambda_init: 1e-3,
            fd_rel_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    SmallImprovement,
    SmallGradient,
    MaxIterations,
    /// Residuals or the Jacobian became unevaluable and damping could not
    /// recover.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub theta: Vec<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Jacobian at the final point, for covariance estimation.
    pub jacobian: DMatrix<f64>,
}

const LAMBDA_MAX: f64 = 1e14;

/// Minimizes |f(theta)|^2 from `theta0`. `f` returns None when the model is
/// not evaluable at a point.
pub fn minimize<F>(mut f: F, theta0: &[f64], opts: &LmOptions) -> Result<LmResult>
where
    F: FnMut(&[f64]) -> Option<DVector<f64>>,
{
    let p = theta0.len();
    let mut theta = DVector::from_column_slice(theta0);
    let mut residuals = eval(&mut f, theta.as_slice())
        .ok_or_else(|| Error::Fit("residuals are undefined at the starting point".into()))?;
    let mut rss = residuals.norm_squared();
    let mut lambda = opts.lambda_init;

    let mut jacobian = jacobian_fd(&mut f, theta.as_slice(), opts.fd_rel_step)
        .ok_or_else(|| Error::Fit("Jacobian is undefined at the starting point".into()))?;

    for iteration in 0..opts.max_iterations {
        let gradient = jacobian.transpose() * &residuals;
        if gradient.amax() < opts.grad_tol {
            return Ok(LmResult {
                theta: theta.as_slice().to_vec(),
                rss,
                iterations: iteration,
                converged: true,
                stop: StopReason::SmallGradient,
                jacobian,
            });
        }

        let normal = jacobian.transpose() * &jacobian;
        let mut accepted = false;
        let mut improvement = f64::INFINITY;
        while lambda <= LAMBDA_MAX {
            let mut damped = normal.clone();
            for i in 0..p {
                damped[(i, i)] += lambda * normal[(i, i)].max(1e-12);
            }
            let step = damped
                .cholesky()
                .map(|ch| ch.solve(&(-&gradient)))
                .filter(|s| s.iter().all(|v| v.is_finite()));
            if let Some(step) = step {
                let trial = &theta + &step;
                if let Some(trial_residuals) = eval(&mut f, trial.as_slice()) {
                    let trial_rss = trial_residuals.norm_squared();
                    if trial_rss < rss {
                        improvement = (rss - trial_rss) / rss.max(f64::MIN_POSITIVE);
                        theta = trial;
                        residuals = trial_residuals;
                        rss = trial_rss;
                        lambda = (lambda / 10.0).max(1e-12);
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            return Ok(LmResult {
                theta: theta.as_slice().to_vec(),
                rss,
                iterations: iteration,
                converged: false,
                stop: StopReason::Stalled,
                jacobian,
            });
        }

        match jacobian_fd(&mut f, theta.as_slice(), opts.fd_rel_step) {
            Some(j) => jacobian = j,
            None => {
                return Ok(LmResult {
                    theta: theta.as_slice().to_vec(),
                    rss,
                    iterations: iteration + 1,
                    converged: false,
                    stop: StopReason::Stalled,
                    jacobian,
                })
            }
        }

        if improvement < opts.rss_tol {
            return Ok(LmResult {
                theta: theta.as_slice().to_vec(),
                rss,
                iterations: iteration + 1,
                converged: true,
                stop: StopReason::SmallImprovement,
                jacobian,
            });
        }
    }

    Ok(LmResult {
        theta: theta.as_slice().to_vec(),
        rss,
        iterations: opts.max_iterations,
        converged: false,
        stop: StopReason::MaxIterations,
        jacobian,
    })
}

fn eval<F>(f: &mut F, theta: &[f64]) -> Option<DVector<f64>>
where
    F: FnMut(&[f64]) -> Option<DVector<f64>>,
{
    f(theta).filter(|r| r.iter().all(|v| v.is_finite()))
}

/// Central-difference Jacobian with per-component step
/// `rel * max(|theta_i|, 1)`.
pub fn jacobian_fd<F>(f: &mut F, theta: &[f64], rel: f64) -> Option<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Option<DVector<f64>>,
{
    let p = theta.len();
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut point = theta.to_vec();
    for i in 0..p {
        let h = rel * theta[i].abs().max(1.0);
        point[i] = theta[i] + h;
        let plus = eval(f, &point)?;
        point[i] = theta[i] - h;
        let minus = eval(f, &point)?;
        point[i] = theta[i];
        columns.push((plus - minus) / (2.0 * h));
    }
    let n = columns.first().map(|c| c.len()).unwrap_or(0);
    Some(DMatrix::from_fn(n, p, |r, c| columns[c][r]))
}

#[derive(Debug, Clone)]
pub struct Covariance {
    pub matrix: DMatrix<f64>,
    pub rank_deficient: bool,
}

/// Estimates the parameter covariance sigma^2 (J^T J)^-1 with
/// sigma^2 = rss / (n - p), using an SVD pseudo-inverse. None when there are
/// no degrees of freedom (n <= p).
pub fn covariance(jacobian: &DMatrix<f64>, rss: f64) -> Option<Covariance> {
    let (n, p) = jacobian.shape();
    if n <= p {
        return None;
    }
    let sigma_sq = rss / (n - p) as f64;
    let svd = jacobian.clone().svd(true, true);
    let v_t = svd.v_t.as_ref()?;
    let max_singular = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = max_singular * n.max(p) as f64 * f64::EPSILON;
    let mut rank_deficient = false;
    let mut matrix = DMatrix::zeros(p, p);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            rank_deficient = true;
            continue;
        }
        let row = v_t.row(k);
        let weight = sigma_sq / (s * s);
        for i in 0..p {
            for j in 0..p {
                matrix[(i, j)] += weight * row[i] * row[j];
            }
        }
    }
    if svd.singular_values.len() < p {
        rank_deficient = true;
    }
    Some(Covariance {
        matrix,
        rank_deficient,
    })
}
