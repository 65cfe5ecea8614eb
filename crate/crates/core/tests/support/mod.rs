//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles deliberately avoid the library's solve paths: the Newton
//! maximizer uses LU solves, its own link/likelihood code and a gradient
//! stopping rule; the stacked least-squares oracle goes through QR.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shrinklogit::model::{fit_mle, Dataset, FitOptions, MleFit};
use shrinklogit::simulation::{self, BetaScheme};
use shrinklogit::RestrictionSpec;

/// Independent damped Newton-Raphson maximizer of the Bernoulli
/// log-likelihood. Returns `None` when it fails to drive the gradient to
/// zero (separation or iteration cap).
pub fn newton_oracle(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let n = x.nrows();
    let m = x.ncols();
    let mut beta = DVector::<f64>::zeros(m);

    fn loglik(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
        let eta = x * beta;
        let mut total = 0.0;
        for i in 0..y.len() {
            let e = eta[i];
            let softplus = if e > 0.0 {
                e + (-e).exp().ln_1p()
            } else {
                e.exp().ln_1p()
            };
            total += y[i] * e - softplus;
        }
        total
    }

    let mut value = loglik(x, y, &beta);
    for _ in 0..200 {
        let eta = x * &beta;
        let mut grad = DVector::<f64>::zeros(m);
        let mut hess = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            let pi = 1.0 / (1.0 + (-eta[i]).exp());
            let w = pi * (1.0 - pi);
            let resid = y[i] - pi;
            for a in 0..m {
                grad[a] += x[(i, a)] * resid;
                for b in 0..m {
                    hess[(a, b)] += w * x[(i, a)] * x[(i, b)];
                }
            }
        }
        if grad.amax() < 1e-9 {
            return Some(beta);
        }
        let step = hess.lu().solve(&grad)?;
        if !step.iter().all(|v| v.is_finite()) || step.amax() > 1e8 {
            return None;
        }

        // Armijo backtracking on the log-likelihood.
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let trial = &beta + t * &step;
            let trial_value = loglik(x, y, &trial);
            if trial_value >= value + 1e-4 * t * slope {
                beta = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    None
}

/// Stacked generalized least squares via QR: solves
/// `argmin |W^{1/2}(z - X b)|^2 + |Psi^{-1/2}(h - H b)|^2`.
pub fn gls_stacked_oracle(
    x: &DMatrix<f64>,
    weights: &DVector<f64>,
    z: &DVector<f64>,
    restriction: &RestrictionSpec,
) -> DVector<f64> {
    let n = x.nrows();
    let m = x.ncols();
    let q = restriction.q();

    let mut stacked = DMatrix::<f64>::zeros(n + q, m);
    let mut rhs = DVector::<f64>::zeros(n + q);
    for i in 0..n {
        let s = weights[i].sqrt();
        for j in 0..m {
            stacked[(i, j)] = s * x[(i, j)];
        }
        rhs[i] = s * z[i];
    }
    if q > 0 {
        // Psi = L L' so the whitened rows are L^{-1} H and L^{-1} h.
        let l = restriction.covariance().clone().cholesky().unwrap().l();
        let wh = l.solve_lower_triangular(restriction.matrix()).unwrap();
        let whv = l.solve_lower_triangular(restriction.values()).unwrap();
        for r in 0..q {
            for j in 0..m {
                stacked[(n + r, j)] = wh[(r, j)];
            }
            rhs[n + r] = whv[r];
        }
    }

    let qr = stacked.qr();
    let qt_rhs = qr.q().transpose() * rhs;
    qr.r().solve_upper_triangular(&qt_rhs).unwrap()
}

/// A reproducible logistic dataset drawn from the simulation generators.
pub fn drawn_dataset(seed: u64, n: usize, p: usize, rho: f64) -> Dataset {
    let mut rng = simulation::cell_rng(seed, n, rho);
    let x = simulation::gen_design(n, p, rho, &mut rng).unwrap();
    let beta = simulation::gen_beta(p, &BetaScheme::OnesNormalized, &mut rng).unwrap();
    let y = simulation::gen_response(&x, &beta, &mut rng).unwrap();
    Dataset::with_intercept(x, y).unwrap()
}

/// A converged p = 4 fit with the first-difference restriction, mirroring
/// the simulation setup at moderate collinearity.
pub fn standard_fixture(seed: u64) -> (Dataset, MleFit, RestrictionSpec) {
    let p = 4;
    let n = 80;
    let rho = 0.9;
    let mut rng = simulation::cell_rng(seed, n, rho);
    let x = simulation::gen_design(n, p, rho, &mut rng).unwrap();
    let beta = simulation::gen_beta(p, &BetaScheme::OnesNormalized, &mut rng).unwrap();
    let y = simulation::gen_response(&x, &beta, &mut rng).unwrap();
    let data = Dataset::with_intercept(x, y).unwrap();
    let fit = fit_mle(&data, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let template = simulation::default_template(p);
    let restriction = simulation::gen_restriction(&beta, &template, &mut rng).unwrap();
    (data, fit, restriction)
}

/// Random synthetic fit (SPD information with log-uniform spectrum), a
/// full-row-rank restriction with `q` rows, and a random true coefficient
/// vector. Fast enough for hundreds of fixtures.
pub fn random_fixture(
    rng: &mut ChaCha8Rng,
    m: usize,
    q: usize,
) -> (MleFit, RestrictionSpec, DVector<f64>) {
    let gauss = DMatrix::<f64>::from_fn(m, m, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let q_mat = gauss.qr().q();
    let lambda = DVector::<f64>::from_fn(m, |_, _| 10f64.powf(rng.random_range(-2.0..2.0)));
    let info = &q_mat * DMatrix::from_diagonal(&lambda) * q_mat.transpose();
    let info = shrinklogit::linalg::symmetrize(&info);
    let beta_hat = DVector::<f64>::from_fn(m, |_, _| rng.random_range(-1.5..1.5));
    let fit = MleFit::from_information(info, beta_hat);

    let restriction = loop {
        let h = DMatrix::<f64>::from_fn(q, m, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::<f64>::from_fn(q, q, |_, _| rng.random_range(-0.5..0.5));
        let psi =
            shrinklogit::linalg::symmetrize(&(&b * b.transpose())) + DMatrix::identity(q, q) * 0.2;
        let values = DVector::<f64>::from_fn(q, |_, _| rng.random_range(-1.0..1.0));
        if let Ok(spec) = RestrictionSpec::new(h, values, psi) {
            break spec;
        }
    };
    let beta_true = DVector::<f64>::from_fn(m, |_, _| rng.random_range(-1.5..1.5));
    (fit, restriction, beta_true)
}
