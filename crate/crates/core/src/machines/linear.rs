//! Ridge and lasso regressors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{require_task, Output, Predictor};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "penalty", rename_all = "snake_case")]
pub enum LinearPenalty {
    Ridge {
        lambda: f64,
    },
    Lasso {
        lambda: f64,
        iterations: usize,
        /// False when `max_iter` sweeps ran out before the tolerance was met.
        /// The coefficients are still usable.
        converged: bool,
        /// Objective value after each sweep, on the standardized problem.
        objective_trace: Vec<f64>,
    },
}

/// `y = intercept + coefficients . x`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub penalty: LinearPenalty,
}

impl LinearModel {
    pub fn converged(&self) -> bool {
        match self.penalty {
            LinearPenalty::Ridge { .. } => true,
            LinearPenalty::Lasso { converged, .. } => converged,
        }
    }
}

impl Predictor for LinearModel {
    fn task(&self) -> Task {
        Task::Regression
    }

    fn dim(&self) -> usize {
        self.coefficients.len()
    }

    fn predict(&self, x: &[f64]) -> Result<Output> {
        let dot: f64 = self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum();
        Ok(Output::Real(self.intercept + dot))
    }
}

fn column_means(data: &Dataset) -> Vec<f64> {
    let n = data.len() as f64;
    let mut means = vec![0.0; data.dim()];
    for row in data.features().iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    means
}

/// Ridge regression on centered data: solves `(XcᵀXc + λI) β = Xcᵀyc` and sets
/// the intercept to `ȳ - x̄·β`.
pub fn train_ridge(data: &Dataset, lambda: f64) -> Result<LinearModel> {
    require_task(data, Task::Regression, "ridge")?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge lambda must be a non-negative real, got {lambda}"
        )));
    }
    let y = data.responses()?;
    let (n, d) = (data.len(), data.dim());
    let x_mean = column_means(data);
    let y_mean = super::mean(y.iter().copied());

    let xc = DMatrix::from_fn(n, d, |i, j| data.row(i)[j] - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut gram = xc.transpose() * &xc;
    for j in 0..d {
        gram[(j, j)] += lambda;
    }
    let rhs = xc.transpose() * yc;

    let scale = (0..d).map(|j| gram[(j, j)]).fold(0.0f64, f64::max);
    let beta = if scale == 0.0 {
        // Zero design after centering with no penalty.
        return Err(Error::SingularSystem { lambda });
    } else {
        let chol = gram.clone().cholesky().ok_or(Error::SingularSystem { lambda })?;
        let l = chol.l();
        let min_pivot = (0..d).map(|j| l[(j, j)] * l[(j, j)]).fold(f64::INFINITY, f64::min);
        if min_pivot <= scale * 1e-12 {
            return Err(Error::SingularSystem { lambda });
        }
        chol.solve(&rhs)
    };

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        coefficients,
        intercept,
        penalty: LinearPenalty::Ridge { lambda },
    })
}

/// `sign(z) * max(|z| - gamma, 0)`
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Lasso by cyclic coordinate descent on standardized features.
///
/// Features are centered and scaled to unit population variance and the
/// response is centered; descent minimizes
/// `(1/2n)‖yc − Zβ‖² + λ‖β‖₁` over the standardized coefficients and stops
/// once no coefficient moves by `tol` or more in a sweep. Coefficients are
/// mapped back to the original feature scale. Constant features get a zero
/// coefficient.
pub fn train_lasso(data: &Dataset, lambda: f64, max_iter: usize, tol: f64) -> Result<LinearModel> {
    require_task(data, Task::Regression, "lasso")?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lasso lambda must be a non-negative real, got {lambda}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lasso tolerance must be positive, got {tol}"
        )));
    }
    let y = data.responses()?;
    let (n, d) = (data.len(), data.dim());
    let nf = n as f64;
    let x_mean = column_means(data);
    let mut x_sd = vec![0.0; d];
    for row in data.features().iter_rows() {
        for j in 0..d {
            x_sd[j] += (row[j] - x_mean[j]).powi(2);
        }
    }
    x_sd.iter_mut().for_each(|s| *s = (*s / nf).sqrt());
    let y_mean = super::mean(y.iter().copied());

    // Column-major standardized design.
    let z: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            (0..n)
                .map(|i| {
                    if x_sd[j] > 0.0 {
                        (data.row(i)[j] - x_mean[j]) / x_sd[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let col_sq: Vec<f64> = z.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf).collect();
    let mut residual: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut beta = vec![0.0; d];

    let objective = |residual: &[f64], beta: &[f64]| {
        residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * nf) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut max_change = 0.0f64;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let zj = &z[j];
            let rho = zj.iter().zip(&residual).map(|(a, r)| a * r).sum::<f64>() / nf + col_sq[j] * beta[j];
            let updated = soft_threshold(rho, lambda) / col_sq[j];
            let delta = updated - beta[j];
            if delta != 0.0 {
                for (r, a) in residual.iter_mut().zip(zj) {
                    *r -= a * delta;
                }
                beta[j] = updated;
            }
            max_change = max_change.max(delta.abs());
        }
        trace.push(objective(&residual, &beta));
        if max_change < tol {
            converged = true;
            break;
        }
    }

    let coefficients: Vec<f64> = (0..d)
        .map(|j| if x_sd[j] > 0.0 { beta[j] / x_sd[j] } else { 0.0 })
        .collect();
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        coefficients,
        intercept,
        penalty: LinearPenalty::Lasso {
            lambda,
            iterations,
            converged,
            objective_trace: trace,
        },
    })
}
