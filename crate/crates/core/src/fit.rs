//! Fitting the dephasing model `λ(τ; ω₂, η)` to measured squeezing curves.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{minimize, parameter_covariance, LmOptions, LmReport, Termination};
use crate::noise::{initial_thermal, propagate_pulse, squeezing_db_noisy, DephasingModel};
use crate::squeeze::TrapPair;

/// Starting values of η tried by [`fit_squeezing_curve`]. The grid point
/// nearest the caller's η is replaced by it.
pub const ETA_START_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Distance from 0 or 1 below which a fitted η is reported as pinned.
pub const ETA_BOUND_TOL: f64 = 1e-6;

/// Predicted squeezing in dB after a pulse of length `tau` on a thermal
/// state with occupancy `n1`. The occupancy cancels; it is accepted so the
/// full propagation path is exercised.
pub fn model_lambda(tau: f64, omega1: f64, omega2: f64, eta: f64, n1: f64) -> Result<f64> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::domain(format!("tau must be >= 0, got {tau}")));
    }
    let trap = TrapPair::new(omega1, omega2)?;
    let state = initial_thermal(n1)?;
    let after = propagate_pulse(&state, &trap, tau, &DephasingModel::new(eta)?)?;
    squeezing_db_noisy(&after, n1)
}

/// Squeezing versus pulse duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingCurve {
    /// s, strictly increasing.
    pub taus: Vec<f64>,
    /// dB
    pub lambdas: Vec<f64>,
    /// One-sigma uncertainties in dB, if known.
    pub uncertainties: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    tau_s: f64,
    lambda_db: f64,
    #[serde(default)]
    sigma_db: Option<f64>,
}

impl SqueezingCurve {
    pub fn new(taus: Vec<f64>, lambdas: Vec<f64>, uncertainties: Option<Vec<f64>>) -> Result<Self> {
        let curve = SqueezingCurve {
            taus,
            lambdas,
            uncertainties,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if self.taus.len() != self.lambdas.len() {
            return Err(Error::validation("lambdas", "length differs from taus"));
        }
        if let Some(u) = &self.uncertainties {
            if u.len() != self.taus.len() {
                return Err(Error::validation("uncertainties", "length differs from taus"));
            }
            if u.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::validation("uncertainties", "must be positive"));
            }
        }
        if self.taus.iter().chain(&self.lambdas).any(|v| !v.is_finite()) {
            return Err(Error::validation("taus", "non-finite value"));
        }
        if self.taus.first().is_some_and(|t| *t < 0.0) {
            return Err(Error::validation("taus", "must be >= 0"));
        }
        if self.taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("taus", "must be strictly increasing"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Reads `tau_s,lambda_db[,sigma_db]` with a header row.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut taus = Vec::new();
        let mut lambdas = Vec::new();
        let mut sigmas = Vec::new();
        for (i, row) in rdr.deserialize::<CurveRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("row {}: {e}", i + 1),
            })?;
            taus.push(row.tau_s);
            lambdas.push(row.lambda_db);
            sigmas.push(row.sigma_db);
        }
        let uncertainties = if sigmas.iter().all(Option::is_some) && !sigmas.is_empty() {
            Some(sigmas.into_iter().flatten().collect())
        } else if sigmas.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: "sigma_db must be given on every row or on none".into(),
            });
        };
        SqueezingCurve::new(taus, lambdas, uncertainties)
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        match &self.uncertainties {
            Some(u) => {
                w.write_record(["tau_s", "lambda_db", "sigma_db"])?;
                for ((t, l), s) in self.taus.iter().zip(&self.lambdas).zip(u) {
                    w.write_record(&[t.to_string(), l.to_string(), s.to_string()])?;
                }
            }
            None => {
                w.write_record(["tau_s", "lambda_db"])?;
                for (t, l) in self.taus.iter().zip(&self.lambdas) {
                    w.write_record(&[t.to_string(), l.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitInit {
    /// rad/s
    pub omega2: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// rad/s
    pub omega2: f64,
    pub eta: f64,
    pub omega2_std: f64,
    pub eta_std: f64,
    /// Correlation between the two estimates.
    pub correlation: f64,
    /// `√Σr²` of the weighted residuals.
    pub residual_norm: f64,
    /// Weighted residuals `(model − data)/σ` in curve order.
    pub residuals: Vec<f64>,
    pub weighted: bool,
    pub iterations: usize,
    pub termination: Termination,
    pub eta_at_bound: bool,
    /// Final cost of every start, in the order tried.
    pub start_costs: Vec<f64>,
    pub eta_starts: Vec<f64>,
    /// Cost after every accepted step of the winning start.
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn predict(&self, tau: f64, omega1: f64) -> Result<f64> {
        model_lambda(tau, omega1, self.omega2, self.eta, 1.0)
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Starting η values: the fixed grid with the entry nearest `eta` replaced.
pub fn eta_starts(eta: f64) -> Vec<f64> {
    let mut grid = ETA_START_GRID.to_vec();
    let nearest = (0..grid.len())
        .min_by(|&a, &b| (grid[a] - eta).abs().total_cmp(&(grid[b] - eta).abs()))
        .expect("non-empty grid");
    grid[nearest] = eta;
    grid.sort_by(|a, b| b.total_cmp(a));
    grid
}

/// Weighted least-squares fit of `(ω₂, η)`, with `ω₂ = ω₂,init·e^{q₀}` and
/// `η = logistic(q₁)`.
pub fn fit_squeezing_curve(curve: &SqueezingCurve, omega1: f64, init: FitInit) -> Result<FitResult> {
    curve.validate()?;
    if curve.len() < 4 {
        return Err(Error::domain(format!("need at least 4 points, got {}", curve.len())));
    }
    if !(omega1.is_finite() && omega1 > 0.0 && init.omega2.is_finite() && init.omega2 > 0.0) {
        return Err(Error::domain("omega1 and the omega2 guess must be positive"));
    }
    if !(init.eta > 0.0 && init.eta < 1.0) {
        return Err(Error::domain(format!("eta guess must be in (0, 1), got {}", init.eta)));
    }
    let weights: Vec<f64> = match &curve.uncertainties {
        Some(u) => u.iter().map(|s| 1.0 / s).collect(),
        None => vec![1.0; curve.len()],
    };
    let residuals = |q: &[f64]| -> Result<Vec<f64>> {
        let omega2 = init.omega2 * q[0].exp();
        let eta = logistic(q[1]);
        curve
            .taus
            .iter()
            .zip(&curve.lambdas)
            .zip(&weights)
            .map(|((t, l), w)| Ok((model_lambda(*t, omega1, omega2, eta, 1.0)? - l) * w))
            .collect()
    };
    let opts = LmOptions::default();
    let starts = eta_starts(init.eta);
    let mut best: Option<LmReport> = None;
    let mut failed: Option<LmReport> = None;
    let mut start_costs = Vec::with_capacity(starts.len());
    for &eta0 in &starts {
        let report = minimize(residuals, &[0.0, logit(eta0)], &opts)?;
        start_costs.push(report.cost);
        let slot = if report.termination.converged() { &mut best } else { &mut failed };
        if slot.as_ref().is_none_or(|b| report.cost < b.cost) {
            *slot = Some(report);
        }
    }
    let Some(report) = best else {
        let f = failed.expect("at least one start");
        return Err(Error::FitFailure {
            iterations: f.iterations,
            reason: format!("{:?} from every start", f.termination),
            best_cost: f.cost,
            best_params: vec![init.omega2 * f.x[0].exp(), logistic(f.x[1])],
        });
    };
    let omega2 = init.omega2 * report.x[0].exp();
    let eta = logistic(report.x[1]);
    let d = [omega2, eta * (1.0 - eta)];
    let (omega2_std, eta_std, correlation) = match parameter_covariance(&report.jacobian, &report.residuals) {
        Some(c) => {
            let (v0, v1) = (c[(0, 0)] * d[0] * d[0], c[(1, 1)] * d[1] * d[1]);
            let c01 = c[(0, 1)] * d[0] * d[1];
            (v0.sqrt(), v1.sqrt(), c01 / (v0 * v1).sqrt())
        }
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    Ok(FitResult {
        omega2,
        eta,
        omega2_std,
        eta_std,
        correlation,
        residual_norm: (2.0 * report.cost).sqrt(),
        residuals: report.residuals,
        weighted: curve.uncertainties.is_some(),
        iterations: report.iterations,
        termination: report.termination,
        eta_at_bound: !(ETA_BOUND_TOL..=1.0 - ETA_BOUND_TOL).contains(&eta),
        start_costs,
        eta_starts: starts,
        cost_history: report.cost_history,
    })
}
