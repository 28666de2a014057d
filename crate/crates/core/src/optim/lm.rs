//! Damped Gauss–Newton (Levenberg–Marquardt) least squares.

use nalgebra::{DMatrix, DVector};

use super::OptimError;

/// Termination and step-control settings for [`lm_fit`].
#[derive(Debug, Clone)]
pub struct LmSettings {
    /// Stop once the proposed parameter step norm falls below this value.
    pub delta_stop: f64,
    /// Hard clamp on the parameter update norm per iteration.
    pub search_radius: f64,
    /// Iteration budget (accepted and rejected steps both count).
    pub max_iters: usize,
    /// Initial damping factor added to the normal-equation diagonal.
    pub initial_damping: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            delta_stop: 1e-10,
            search_radius: 10.0,
            max_iters: 500,
            initial_damping: 1e-3,
        }
    }
}

/// One accepted iteration of [`lm_fit`].
#[derive(Debug, Clone, Copy)]
pub struct AcceptedStep {
    /// Cost (sum of squared residuals) after the step.
    pub cost: f64,
    /// Norm of the parameter update.
    pub step_norm: f64,
}

/// Result of a [`lm_fit`] run.
#[derive(Debug, Clone)]
pub struct LmFit {
    /// Final parameter vector.
    pub params: Vec<f64>,
    /// Final cost (sum of squared residuals).
    pub cost: f64,
    /// Number of iterations performed (accepted plus rejected).
    pub iterations: usize,
    /// Trace of the accepted steps, in order.
    pub accepted: Vec<AcceptedStep>,
}

const DAMPING_MIN: f64 = 1e-15;
const DAMPING_MAX: f64 = 1e15;

/// Minimize the sum of squared residuals of `residual_fn` starting at
/// `initial`.
///
/// The Jacobian is formed by forward finite differences with per-parameter
/// step `1e-6 * max(1, |p|)`. Each iteration solves the damped normal
/// equations `(JᵀJ + λI) δ = −Jᵀr`, clamps `‖δ‖` to
/// [`LmSettings::search_radius`], and accepts the step only if the cost
/// decreases (damping ×0.1 on accept, ×10 on reject). Iteration stops when a
/// proposed step norm falls below [`LmSettings::delta_stop`] or the budget
/// runs out.
pub fn lm_fit<F>(
    residual_fn: F,
    initial: &[f64],
    settings: &LmSettings,
) -> Result<LmFit, OptimError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = initial.len();
    let mut params = DVector::from_column_slice(initial);
    let mut residual = DVector::from_vec(residual_fn(params.as_slice()));
    if !residual.iter().all(|v| v.is_finite()) {
        return Err(OptimError::NonFiniteResidual);
    }
    let m = residual.len();
    let mut cost = residual.norm_squared();
    let mut damping = settings.initial_damping;
    let mut accepted = Vec::new();
    let mut iterations = 0;

    if n == 0 {
        return Ok(LmFit {
            params: Vec::new(),
            cost,
            iterations,
            accepted,
        });
    }

    while iterations < settings.max_iters {
        iterations += 1;

        // Forward-difference Jacobian around the current point.
        let mut jacobian = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            let h = 1e-6 * params[j].abs().max(1.0);
            let mut shifted = params.clone();
            shifted[j] += h;
            let r_shift = residual_fn(shifted.as_slice());
            if r_shift.len() != m {
                return Err(OptimError::DimMismatch {
                    expected: m,
                    got: r_shift.len(),
                });
            }
            for i in 0..m {
                let v = (r_shift[i] - residual[i]) / h;
                if !v.is_finite() {
                    return Err(OptimError::NonFiniteResidual);
                }
                jacobian[(i, j)] = v;
            }
        }

        let jt_j = jacobian.transpose() * &jacobian;
        let jt_r = jacobian.transpose() * &residual;

        let mut system = jt_j.clone();
        for d in 0..n {
            system[(d, d)] += damping;
        }
        let Some(chol) = system.cholesky() else {
            damping = (damping * 10.0).min(DAMPING_MAX);
            continue;
        };
        let mut step = chol.solve(&(-&jt_r));

        let norm = step.norm();
        if norm > settings.search_radius {
            step *= settings.search_radius / norm;
        }
        let step_norm = step.norm();

        let trial = &params + &step;
        let r_trial = DVector::from_vec(residual_fn(trial.as_slice()));
        let trial_cost = if r_trial.len() == m && r_trial.iter().all(|v| v.is_finite()) {
            r_trial.norm_squared()
        } else {
            f64::INFINITY
        };

        if trial_cost < cost {
            params = trial;
            residual = r_trial;
            cost = trial_cost;
            damping = (damping * 0.1).max(DAMPING_MIN);
            accepted.push(AcceptedStep { cost, step_norm });
        } else {
            damping = (damping * 10.0).min(DAMPING_MAX);
        }

        // A vanishing proposal means we are at a stationary point whether or
        // not the step improved the cost.
        if step_norm < settings.delta_stop {
            break;
        }
    }

    Ok(LmFit {
        params: params.as_slice().to_vec(),
        cost,
        iterations,
        accepted,
    })
}
