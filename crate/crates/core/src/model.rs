//! Logistic model and maximum likelihood fitting.
//!
//! The model is `y_i ~ Bernoulli(pi_i)` with `pi_i = exp(x_i' b)/(1 + exp(x_i' b))`
//! over an `n x (p+1)` design whose first column is the intercept. Fitting is
//! iteratively reweighted least squares: each step solves the weighted normal
//! equations with weights `w_i = pi_i (1 - pi_i)`, which is the Newton step on
//! the Bernoulli log-likelihood. The converged state (coefficients, weights,
//! working response, information matrix `C = X' W X`) is what every shrinkage
//! estimator downstream consumes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Fitted probabilities closer than this to 0 or 1 make the IRLS weight
/// numerically meaningless; they are an error, never silently clamped.
pub const WEIGHT_FLOOR: f64 = 1e-10;

/// Design matrix with intercept column plus a binary response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    /// Build a dataset from raw predictors (no intercept column); the
    /// intercept column of ones is prepended here.
    pub fn new(predictors: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = predictors.nrows();
        let p = predictors.ncols();
        let mut x = DMatrix::from_element(n, p + 1, 1.0);
        x.view_mut((0, 1), (n, p)).copy_from(&predictors);
        Self::with_intercept(x, y)
    }

    /// Build a dataset from a design matrix whose first column is already the
    /// intercept. Validates every invariant.
    pub fn with_intercept(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                context: "dataset response length vs design rows",
                expected: n,
                found: y.len(),
            });
        }
        if x.ncols() == 0 || (0..n).any(|i| x[(i, 0)] != 1.0) {
            return Err(Error::InvalidInput(
                "first design column must be identically 1 (intercept)".into(),
            ));
        }
        if let Some(i) = (0..n).find(|&i| y[i] != 0.0 && y[i] != 1.0) {
            return Err(Error::InvalidInput(format!(
                "response must be 0/1; row {i} has {}",
                y[i]
            )));
        }
        if n <= x.ncols() {
            return Err(Error::InvalidInput(format!(
                "need more observations than coefficients: n = {n}, p+1 = {}",
                x.ncols()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of explanatory variables (excluding the intercept).
    pub fn p(&self) -> usize {
        self.x.ncols() - 1
    }
}

/// IRLS controls. `start` defaults to the zero vector, which puts every
/// fitted probability at 0.5 and keeps the first weight matrix
/// well-conditioned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    /// Stop when the max-norm coefficient change drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional starting coefficients (length p+1).
    pub start: Option<Vec<f64>>,
    /// Halve the step while the log-likelihood would decrease. Plain IRLS can
    /// oscillate on near-separated data.
    pub step_halving: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            start: None,
            step_halving: true,
        }
    }
}

/// Converged IRLS state.
///
/// All fields refer to the final coefficient vector: `pi_hat` are its fitted
/// probabilities, `weights[i] = pi_hat[i] * (1 - pi_hat[i])`, `z_hat` is the
/// working response, `info` is `C = X' W X` and `xtwz` is `X' W z`. At
/// convergence `beta` solves `info * beta = xtwz` up to a residual of the
/// order of the squared tolerance.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub beta: DVector<f64>,
    pub pi_hat: DVector<f64>,
    pub weights: DVector<f64>,
    pub z_hat: DVector<f64>,
    pub info: DMatrix<f64>,
    pub xtwz: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each accepted step, starting value included.
    pub loglik_path: Vec<f64>,
}

impl MleFit {
    /// Log-likelihood at the final coefficients.
    pub fn log_likelihood(&self) -> f64 {
        *self.loglik_path.last().unwrap_or(&f64::NAN)
    }

    /// Assemble a fit directly from an information matrix and coefficients.
    /// The analysis and tuning formulas only read `info`, `beta` and `xtwz`;
    /// randomized fixtures in tests use this instead of running IRLS.
    pub fn from_information(info: DMatrix<f64>, beta: DVector<f64>) -> Self {
        let xtwz = &info * &beta;
        let n = beta.len();
        Self {
            beta,
            pi_hat: DVector::zeros(n),
            weights: DVector::zeros(n),
            z_hat: DVector::zeros(n),
            info,
            xtwz,
            iterations: 0,
            converged: true,
            loglik_path: Vec::new(),
        }
    }
}

/// Numerically stable logistic function, exact at 0 and monotone, with the
/// output kept strictly inside (0, 1).
pub fn sigmoid(eta: f64) -> f64 {
    let p = if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `log(1 + exp(eta))` without overflow.
fn log1p_exp(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Bernoulli log-likelihood at linear predictor `eta`.
fn log_likelihood_eta(y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    y.iter()
        .zip(eta.iter())
        .map(|(&yi, &ei)| yi * ei - log1p_exp(ei))
        .sum()
}

/// Fitted probabilities `pi_i = logistic(x_i' beta)` for every row of `x`.
pub fn logistic_probs(x: &DMatrix<f64>, beta: &DVector<f64>) -> Result<DVector<f64>> {
    if x.ncols() != beta.len() {
        return Err(Error::DimensionMismatch {
            context: "logistic_probs design columns vs coefficient length",
            expected: x.ncols(),
            found: beta.len(),
        });
    }
    Ok((x * beta).map(sigmoid))
}

/// Working response `z_i = eta_i + (y_i - pi_i) / (pi_i (1 - pi_i))` for the
/// logit link. Errors on any probability at the weight floor, naming the row.
pub fn working_response(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            context: "working_response response length vs design rows",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let eta = x * beta;
    let mut z = DVector::zeros(y.len());
    for i in 0..y.len() {
        let pi = sigmoid(eta[i]);
        let w = pi * (1.0 - pi);
        if w < WEIGHT_FLOOR {
            return Err(Error::DegenerateWeight { row: i, pi });
        }
        z[i] = eta[i] + (y[i] - pi) / w;
    }
    Ok(z)
}

/// Fit the maximum likelihood estimator by IRLS.
///
/// Starts from `opts.start` (zero by default) and iterates Newton steps with
/// optional step-halving until the max-norm coefficient change falls below
/// `opts.tol`, or returns `converged = false` with the last iterate when the
/// iteration cap is hit. An all-0/all-1 response or a weight collapsing to
/// the floor is a separation error; a singular information matrix is a
/// conditioning error.
pub fn fit_mle(data: &Dataset, opts: &FitOptions) -> Result<MleFit> {
    let x = data.design();
    let y = data.response();
    let n = data.n();
    let m = x.ncols();

    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::Separation(format!(
            "response is all {}; the likelihood has no maximizer",
            if ones == 0 { "zeros" } else { "ones" }
        )));
    }

    let mut beta = match &opts.start {
        Some(s) => {
            if s.len() != m {
                return Err(Error::DimensionMismatch {
                    context: "fit_mle starting vector length",
                    expected: m,
                    found: s.len(),
                });
            }
            DVector::from_column_slice(s)
        }
        None => DVector::zeros(m),
    };

    let mut eta = x * &beta;
    let mut loglik = log_likelihood_eta(y, &eta);
    let mut loglik_path = vec![loglik];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;

        let pi = eta.map(sigmoid);
        let mut w = DVector::zeros(n);
        for i in 0..n {
            let wi = pi[i] * (1.0 - pi[i]);
            if wi < WEIGHT_FLOOR {
                return Err(Error::Separation(format!(
                    "weight collapsed at row {i} (fitted probability {:e}) during iteration {iterations}; \
                     the data are completely or quasi-completely separated",
                    pi[i]
                )));
            }
            w[i] = wi;
        }

        // C = X'WX and the score X'(y - pi); the Newton step solves C d = score.
        let mut xw = x.clone();
        for i in 0..n {
            let wi = w[i];
            for j in 0..m {
                xw[(i, j)] *= wi;
            }
        }
        let info = linalg::symmetrize(&(x.transpose() * &xw));
        let score = x.transpose() * (y - &pi);
        let mut step = linalg::spd_solve_vec(&info, &score, "fit_mle information matrix")
            .map_err(|_| {
                Error::Singular(format!(
                    "information matrix X'WX singular at iteration {iterations}; \
                     predictors are collinear or the fit is separating"
                ))
            })?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(format!(
                "non-finite Newton step at iteration {iterations}"
            )));
        }

        if opts.step_halving {
            let mut halvings = 0;
            loop {
                let trial = &beta + &step;
                let trial_eta = x * &trial;
                let trial_loglik = log_likelihood_eta(y, &trial_eta);
                if trial_loglik >= loglik || halvings >= 30 {
                    beta = trial;
                    eta = trial_eta;
                    loglik = trial_loglik;
                    break;
                }
                step *= 0.5;
                halvings += 1;
            }
        } else {
            beta += &step;
            eta = x * &beta;
            loglik = log_likelihood_eta(y, &eta);
        }
        loglik_path.push(loglik);

        if step.amax() < opts.tol {
            converged = true;
            break;
        }
    }

    // Final state at the accepted coefficients. Quadratic convergence makes
    // the fixed-point residual O(tol^2) here, so C^{-1} X'W z reproduces beta
    // far inside the documented 10*tol bound.
    let pi_hat = eta.map(sigmoid);
    let mut weights = DVector::zeros(n);
    let mut z_hat = DVector::zeros(n);
    for i in 0..n {
        let wi = pi_hat[i] * (1.0 - pi_hat[i]);
        if wi < WEIGHT_FLOOR {
            return Err(Error::Separation(format!(
                "weight collapsed at row {i} in the converged state (fitted probability {:e})",
                pi_hat[i]
            )));
        }
        weights[i] = wi;
        z_hat[i] = eta[i] + (y[i] - pi_hat[i]) / wi;
    }
    let mut xw = x.clone();
    for i in 0..n {
        for j in 0..m {
            xw[(i, j)] *= weights[i];
        }
    }
    let info = linalg::symmetrize(&(x.transpose() * &xw));
    let xtwz = xw.transpose() * &z_hat;

    Ok(MleFit {
        beta,
        pi_hat,
        weights,
        z_hat,
        info,
        xtwz,
        iterations,
        converged,
        loglik_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_fixture() -> Dataset {
        // n = 20, p = 2, handpicked to be comfortably non-separated.
        let preds = DMatrix::from_row_slice(
            20,
            2,
            &[
                0.5, -1.2, -0.3, 0.8, 1.1, 0.4, -0.7, -0.5, 0.2, 1.3, -1.5, 0.6, 0.9, -0.9, 0.1,
                0.3, -0.4, -1.1, 1.4, 0.7, -0.2, 0.5, 0.6, -0.6, -1.0, 1.0, 0.8, 0.2, -0.8, -0.3,
                0.4, 1.2, -0.6, -1.4, 1.5, 0.9, -1.3, 0.1, 0.0, -0.7,
            ],
        );
        let y = DVector::from_column_slice(&[
            1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0,
            1.0, 0.0, 1.0,
        ]);
        Dataset::new(preds, y).unwrap()
    }

    #[test]
    fn sigmoid_known_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_relative_eq!(sigmoid(3f64.ln()), 0.75, epsilon = 1e-15);
        assert!(sigmoid(800.0) < 1.0 && sigmoid(800.0) > 0.999);
        assert!(sigmoid(-800.0) > 0.0 && sigmoid(-800.0) < 1e-3);
    }

    #[test]
    fn probs_at_zero_beta_are_half() {
        let data = small_fixture();
        let beta = DVector::zeros(3);
        let pi = logistic_probs(data.design(), &beta).unwrap();
        assert!(pi.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn probs_dimension_mismatch() {
        let data = small_fixture();
        let beta = DVector::zeros(5);
        assert!(matches!(
            logistic_probs(data.design(), &beta),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn working_response_zero_eta() {
        // eta = 0, y = 1 => z = 0 + (1 - 0.5)/0.25 = 2.
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let beta = DVector::zeros(1);
        let y = DVector::from_column_slice(&[1.0, 0.0]);
        let z = working_response(&x, &beta, &y).unwrap();
        assert_relative_eq!(z[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(z[1], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn working_response_matches_straight_line_form() {
        // Independent straight-line evaluation of eta + W^{-1}(y - pi).
        let data = small_fixture();
        let beta = DVector::from_column_slice(&[0.3, -0.4, 0.7]);
        let z = working_response(data.design(), &beta, data.response()).unwrap();
        for i in 0..data.n() {
            let mut eta = 0.0;
            for j in 0..3 {
                eta += data.design()[(i, j)] * beta[j];
            }
            let pi = 1.0 / (1.0 + (-eta).exp());
            let expect = eta + (data.response()[i] - pi) / (pi * (1.0 - pi));
            assert_relative_eq!(z[i], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn working_response_degenerate_weight_names_row() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 50.0, 1.0, 0.0]);
        let beta = DVector::from_column_slice(&[0.0, 1.0]);
        let y = DVector::from_column_slice(&[0.0, 1.0, 1.0]);
        match working_response(&x, &beta, &y) {
            Err(Error::DegenerateWeight { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected degenerate weight, got {other:?}"),
        }
    }

    #[test]
    fn intercept_only_fit_is_logit_of_mean() {
        let preds = DMatrix::zeros(8, 0);
        let y = DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let data = Dataset::new(preds, y).unwrap();
        let fit = fit_mle(&data, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        // mean 0.25 => intercept = logit(1/4) = ln(1/3)
        assert_relative_eq!(fit.beta[0], (1.0f64 / 3.0).ln(), epsilon = 1e-8);
    }

    #[test]
    fn fit_satisfies_fixed_point_and_score() {
        let data = small_fixture();
        let opts = FitOptions::default();
        let fit = fit_mle(&data, &opts).unwrap();
        assert!(fit.converged);

        let refit = crate::linalg::spd_solve_vec(&fit.info, &fit.xtwz, "test").unwrap();
        assert!((&refit - &fit.beta).amax() < 10.0 * opts.tol);

        let score = data.design().transpose() * (data.response() - &fit.pi_hat);
        assert!(score.amax() < 10.0 * opts.tol);
    }

    #[test]
    fn weights_identity_is_exact() {
        let data = small_fixture();
        let fit = fit_mle(&data, &FitOptions::default()).unwrap();
        for i in 0..data.n() {
            let w = fit.pi_hat[i] * (1.0 - fit.pi_hat[i]);
            assert_eq!(w, fit.weights[i]);
        }
    }

    #[test]
    fn loglik_is_monotone_across_accepted_steps() {
        let data = small_fixture();
        let fit = fit_mle(&data, &FitOptions::default()).unwrap();
        for pair in fit.loglik_path.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12);
        }
    }

    #[test]
    fn separated_data_never_returns_silent_answer() {
        // y = 1 exactly when the predictor is positive.
        let mut vals = Vec::new();
        let mut ys = Vec::new();
        for i in 0..16 {
            let v = (i as f64 - 7.5) / 2.0;
            vals.push(v);
            ys.push(if v > 0.0 { 1.0 } else { 0.0 });
        }
        let data = Dataset::new(
            DMatrix::from_column_slice(16, 1, &vals),
            DVector::from_column_slice(&ys),
        )
        .unwrap();
        match fit_mle(&data, &FitOptions::default()) {
            Err(Error::Separation(_)) | Err(Error::Singular(_)) => {}
            Ok(fit) => assert!(!fit.converged, "separated fit must not converge"),
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn all_one_response_is_complete_separation() {
        let preds = DMatrix::from_column_slice(6, 1, &[0.1, 0.4, -0.3, 0.9, -0.6, 0.2]);
        let y = DVector::from_element(6, 1.0);
        let data = Dataset::new(preds, y).unwrap();
        assert!(matches!(
            fit_mle(&data, &FitOptions::default()),
            Err(Error::Separation(_))
        ));
    }

    #[test]
    fn dataset_rejects_bad_inputs() {
        let preds = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let bad_y = DVector::from_column_slice(&[0.0, 2.0, 1.0, 0.0]);
        assert!(Dataset::new(preds.clone(), bad_y).is_err());

        let short_y = DVector::from_column_slice(&[0.0, 1.0]);
        assert!(Dataset::new(preds, short_y).is_err());

        let no_intercept = DMatrix::from_column_slice(4, 2, &[0.5; 8]);
        let y = DVector::from_column_slice(&[0.0, 1.0, 0.0, 1.0]);
        assert!(Dataset::with_intercept(no_intercept, y).is_err());
    }
}
