//! Damped least squares (Levenberg–Marquardt) with finite-difference
//! Jacobians, used by the Lorentzian and squeezing-model fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease of an accepted step falls below this.
    pub ftol: f64,
    /// Stop when the step is this small relative to the parameters.
    pub xtol: f64,
    /// Stop when the scaled gradient falls below this.
    pub gtol: f64,
    /// Forward-difference step, relative to `max(|x|, 1)`.
    pub fd_step: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            ftol: 1e-14,
            xtol: 1e-12,
            gtol: 1e-12,
            fd_step: 1e-6,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    CostConverged,
    StepConverged,
    GradientConverged,
    ZeroResidual,
    DampingExhausted,
    MaxIterations,
}

impl Termination {
    pub fn converged(&self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Clone, Debug)]
pub struct LmReport {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `½ Σ r²`.
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Cost after the initial point and after every accepted step.
    pub cost_history: Vec<f64>,
    /// Forward-difference Jacobian at `x`.
    pub jacobian: DMatrix<f64>,
}

fn half_sum_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

pub fn forward_jacobian<F>(f: &F, x: &[f64], r0: &[f64], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let rp = f(&xp)?;
        xp[j] = x[j];
        for i in 0..r0.len() {
            jac[(i, j)] = (rp[i] - r0[i]) / h;
        }
    }
    Ok(jac)
}

pub fn central_jacobian<F>(f: &F, x: &[f64], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let m = f(x)?.len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let rp = f(&xp)?;
        xp[j] = x[j] - h;
        let rm = f(&xp)?;
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Minimises `½ Σ fᵢ(x)²` from `x0`.
///
/// A residual evaluation that fails at a trial point is treated as a
/// rejected step; a failure at `x0` is returned.
pub fn minimize<F>(f: F, x0: &[f64], opts: &LmOptions) -> Result<LmReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    if r.len() < n {
        return Err(Error::domain(format!(
            "need at least as many residuals ({}) as parameters ({n})",
            r.len()
        )));
    }
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite residuals at the initial point".into()));
    }
    let mut cost = half_sum_sq(&r);
    let mut evaluations = 1;
    let mut history = vec![cost];
    let mut damping = opts.initial_damping;
    let mut iterations = 0;
    let mut jac = forward_jacobian(&f, &x, &r, opts.fd_step)?;
    evaluations += n;

    let termination = loop {
        if cost == 0.0 {
            break Termination::ZeroResidual;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        // Cosine between the residual vector and the Jacobian columns.
        if gmax <= opts.gtol * jac.norm() * (2.0 * cost).sqrt() {
            break Termination::GradientConverged;
        }

        let mut accepted = false;
        let mut small_step = false;
        while damping < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                let d = jtj[(i, i)].max(1e-12 * (1.0 + jtj.diagonal().amax()));
                a[(i, i)] += damping * d;
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    damping *= 10.0;
                    continue;
                }
            };
            let x_new: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let step_norm = step.norm();
            let x_norm = DVector::from_column_slice(&x).norm();
            evaluations += 1;
            let trial = f(&x_new).ok().filter(|r| r.iter().all(|v| v.is_finite()));
            match trial {
                Some(r_new) if half_sum_sq(&r_new) < cost => {
                    let new_cost = half_sum_sq(&r_new);
                    let rel_drop = (cost - new_cost) / cost;
                    x = x_new;
                    r = r_new;
                    cost = new_cost;
                    history.push(cost);
                    damping = (damping * 0.3).max(1e-15);
                    accepted = true;
                    small_step = rel_drop < opts.ftol || step_norm <= opts.xtol * (x_norm + opts.xtol);
                    break;
                }
                _ => {
                    if step_norm <= opts.xtol * (x_norm + opts.xtol) {
                        small_step = true;
                        break;
                    }
                    damping *= 10.0;
                }
            }
        }
        if accepted {
            jac = forward_jacobian(&f, &x, &r, opts.fd_step)?;
            evaluations += n;
        }
        if small_step {
            break if accepted {
                Termination::CostConverged
            } else {
                Termination::StepConverged
            };
        }
        if !accepted {
            break Termination::DampingExhausted;
        }
    };

    Ok(LmReport {
        x,
        residuals: r,
        cost,
        iterations,
        evaluations,
        termination,
        cost_history: history,
        jacobian: jac,
    })
}

/// Residual-based parameter covariance `s² (JᵀJ)⁻¹`, `s² = Σr²/(m-n)`.
pub fn parameter_covariance(jac: &DMatrix<f64>, residuals: &[f64]) -> Option<DMatrix<f64>> {
    let (m, n) = jac.shape();
    if m <= n {
        return None;
    }
    let s2 = residuals.iter().map(|v| v * v).sum::<f64>() / (m - n) as f64;
    let jtj = jac.transpose() * jac;
    let inv = jtj.clone().try_inverse().or_else(|| jtj.pseudo_inverse(1e-14).ok())?;
    Some(inv * s2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_model(x: &[f64], t: &[f64], y: &[f64]) -> Vec<f64> {
        t.iter()
            .zip(y)
            .map(|(t, y)| x[0] * (-x[1] * t).exp() + x[2] - y)
            .collect()
    }

    #[test]
    fn recovers_exponential_decay() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-1.3 * t).exp() + 0.4).collect();
        let report = minimize(|x| Ok(exp_model(x, &t, &y)), &[1.0, 0.5, 0.0], &LmOptions::default()).unwrap();
        assert!(report.termination.converged());
        assert!((report.x[0] - 2.5).abs() < 1e-7);
        assert!((report.x[1] - 1.3).abs() < 1e-7);
        assert!((report.x[2] - 0.4).abs() < 1e-7);
    }

    #[test]
    fn accepted_costs_decrease() {
        let t: Vec<f64> = (0..30).map(|i| i as f64 * 0.2).collect();
        let y: Vec<f64> = t.iter().map(|t| (0.7 * t).sin() + 0.1 * t).collect();
        let report = minimize(
            |x| Ok(t.iter().zip(&y).map(|(t, y)| (x[0] * t).sin() + x[1] * t - y).collect()),
            &[0.6, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        assert!(report.cost_history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn forward_jacobian_matches_central() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let y = vec![0.0; t.len()];
        let f = |x: &[f64]| Ok(exp_model(x, &t, &y));
        let x = [1.7, 0.9, -0.2];
        let r0 = f(&x).unwrap();
        let fwd = forward_jacobian(&f, &x, &r0, 1e-6).unwrap();
        let cen = central_jacobian(&f, &x, 1e-5).unwrap();
        assert!((fwd - cen).amax() < 1e-5);
    }

    #[test]
    fn too_few_residuals_is_error() {
        assert!(minimize(|x| Ok(vec![x[0]]), &[1.0, 2.0], &LmOptions::default()).is_err());
    }

    #[test]
    fn iteration_budget_is_reported() {
        let opts = LmOptions {
            max_iterations: 1,
            ..LmOptions::default()
        };
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-1.3 * t).exp()).collect();
        let report = minimize(|x| Ok(exp_model(x, &t, &y)), &[0.1, 5.0, 1.0], &opts).unwrap();
        assert_eq!(report.termination, Termination::MaxIterations);
    }
}
