//! Monte Carlo comparison of the estimator family.
//!
//! For each grid cell (sample size `n`, collinearity level `rho`) the harness
//! draws a collinear design
//!
//! ```text
//! x_ij = sqrt(1 - rho^2) w_ij + rho w_i(p+1),   w ~ N(0, 1) iid,
//! ```
//!
//! (so `rho^2` is the population correlation between any two predictors),
//! centers and standardizes the columns, attaches the intercept, samples
//! `y_i ~ Bernoulli(logistic(x_i' beta))` for a unit-norm `beta`, and draws a
//! stochastic restriction `h = H beta + v`, `v ~ N(0, Psi)`. Every configured
//! estimator is then fit and its squared coefficient error and squared
//! predicted-probability error are accumulated:
//!
//! ```text
//! MSE  = sum_r |beta_r - beta|^2  / successes
//! PMSE = sum_r |pi_r  -  pi |^2   / successes
//! ```
//!
//! The reference probabilities `pi` are computed once per cell on a
//! cell-level reference design, while `pi_r` uses replication `r`'s own
//! (regenerated) design; with the design held fixed the two coincide. This
//! is what makes PMSE an n-term sum that grows with the sample size.
//!
//! Replications where IRLS fails (separation, singularity, no convergence)
//! are counted and excluded; the divisor is the number of successes.
//!
//! # Determinism
//!
//! Every replication owns a counter-derived random stream keyed by
//! `(seed, n, rho, replication)`, and per-cell accumulation is a fixed-order
//! fold over replication indices. Reports are therefore byte-identical for a
//! given `(config, seed)` no matter how many threads execute the
//! replications, and independent of grid order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    self, EstimatorKind, EstimatorParams, RestrictionSpec,
};
use crate::linalg;
use crate::model::{fit_mle, logistic_probs, Dataset, FitOptions};
use crate::tuning;

/// Seed used when none is given, so the default run is reproducible.
pub const DEFAULT_SEED: u64 = 0x5EED;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expand `(seed, n, rho)` into a 256-bit ChaCha key. Cell streams depend on
/// the cell coordinates, not on the cell's position in the grid, so partial
/// grids and resumed runs see identical draws.
fn cell_key(seed: u64, n: usize, rho: f64) -> [u8; 32] {
    let mut state = 0u64;
    for w in [seed, n as u64, rho.to_bits()] {
        state = splitmix64(state ^ w);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Stream for cell-level draws (the true coefficient vector, and the design
/// when it is held fixed across replications).
pub fn cell_rng(seed: u64, n: usize, rho: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(cell_key(seed, n, rho));
    rng.set_stream(0);
    rng
}

/// Stream for one replication; stream ids start at 1 (0 is the cell stream).
pub fn rep_rng(seed: u64, n: usize, rho: f64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(cell_key(seed, n, rho));
    rng.set_stream(rep as u64 + 1);
    rng
}

/// How the unit-norm true coefficient vector is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", content = "value", rename_all = "kebab-case")]
pub enum BetaScheme {
    /// `p+1` uniform(0,1) draws from the cell stream, normalized.
    UniformNormalized,
    /// Every entry `1/sqrt(p+1)`; identical across implementations.
    OnesNormalized,
    /// A user vector, normalized to unit length.
    Supplied(Vec<f64>),
}

/// Restriction template: the `H` matrix (full width, intercept column
/// included) and the noise covariance `Psi`. `h` itself is generated per
/// replication as `H beta + v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictionTemplate {
    #[serde(rename = "H")]
    pub matrix: Vec<Vec<f64>>,
    #[serde(rename = "Psi")]
    pub covariance: Vec<Vec<f64>>,
}

/// First differences over the `p` slopes, zero-padded for the intercept,
/// with `Psi = I`. For `p = 4` this is the 3x5 system
/// `beta_1 - beta_2, beta_2 - beta_3, beta_3 - beta_4`.
pub fn default_template(p: usize) -> RestrictionTemplate {
    let q = p.saturating_sub(1);
    let mut h = vec![vec![0.0; p + 1]; q];
    for (i, row) in h.iter_mut().enumerate() {
        row[i + 1] = 1.0;
        row[i + 2] = -1.0;
    }
    let mut psi = vec![vec![0.0; q]; q];
    for (i, row) in psi.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    RestrictionTemplate {
        matrix: h,
        covariance: psi,
    }
}

/// Full experiment description. The defaults mirror the standard setup:
/// `n` in {50, 100, 200}, `p = 4`, `rho` in {0.9, 0.99, 0.999}, 5000
/// replications, all six estimators, first-difference restriction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n_values: Vec<usize>,
    pub p: usize,
    pub rho_values: Vec<f64>,
    pub reps: usize,
    pub beta_scheme: BetaScheme,
    /// `None` means the default first-difference template for `p`.
    pub restriction: Option<RestrictionTemplate>,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    /// Redraw the design every replication (default). When false the design
    /// is drawn once per cell and only `v` and `y` vary.
    pub regenerate_design: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_values: vec![50, 100, 200],
            p: 4,
            rho_values: vec![0.9, 0.99, 0.999],
            reps: 5000,
            beta_scheme: BetaScheme::UniformNormalized,
            restriction: None,
            seed: DEFAULT_SEED,
            estimators: EstimatorKind::ALL.to_vec(),
            regenerate_design: true,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidInput("p must be at least 1".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.n_values.is_empty() {
            return Err(Error::InvalidInput("n_values must not be empty".into()));
        }
        for &n in &self.n_values {
            if n <= self.p + 1 {
                return Err(Error::InvalidInput(format!(
                    "sample size {n} does not exceed the coefficient count {}",
                    self.p + 1
                )));
            }
        }
        for &rho in &self.rho_values {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidInput(format!(
                    "collinearity level must lie in [0, 1), got {rho}"
                )));
            }
        }
        if self.rho_values.is_empty() {
            return Err(Error::InvalidInput("rho_values must not be empty".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidInput("estimator list must not be empty".into()));
        }
        for (i, a) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(a) {
                return Err(Error::InvalidInput(format!("duplicate estimator {a}")));
            }
        }
        if let BetaScheme::Supplied(v) = &self.beta_scheme {
            if v.len() != self.p + 1 {
                return Err(Error::InvalidInput(format!(
                    "supplied beta has length {}, expected p+1 = {}",
                    v.len(),
                    self.p + 1
                )));
            }
            if v.iter().map(|x| x * x).sum::<f64>() <= 0.0 {
                return Err(Error::InvalidInput("supplied beta has zero norm".into()));
            }
        }
        self.resolved_template()?;
        Ok(())
    }

    /// The restriction template in matrix form, validated.
    pub fn resolved_template(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let template = match &self.restriction {
            Some(t) => t.clone(),
            None => default_template(self.p),
        };
        let h = linalg::from_rows(&template.matrix, "restriction template H")?;
        let psi = linalg::from_rows(&template.covariance, "restriction template Psi")?;
        if h.nrows() > 0 && h.ncols() != self.p + 1 {
            return Err(Error::InvalidInput(format!(
                "restriction template is {} columns wide, expected p+1 = {}",
                h.ncols(),
                self.p + 1
            )));
        }
        // Rank and SPD checks ride on the spec constructor.
        RestrictionSpec::new(h.clone(), DVector::zeros(h.nrows()), psi.clone())?;
        Ok((h, psi))
    }
}

/// Draw the collinear design: `p` predictor columns built from `p+1` shared
/// normals per row, centered and scaled to unit sample standard deviation
/// (divisor `n-1`), intercept column prepended afterwards.
pub fn gen_design<R: Rng>(n: usize, p: usize, rho: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!(
            "collinearity level must lie in [0, 1), got {rho}"
        )));
    }
    let root = (1.0 - rho * rho).sqrt();
    let mut w = DMatrix::<f64>::zeros(n, p + 1);
    for i in 0..n {
        for j in 0..=p {
            w[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut x = DMatrix::from_element(n, p + 1, 1.0);
    for j in 0..p {
        let mut mean = 0.0;
        for i in 0..n {
            let v = root * w[(i, j)] + rho * w[(i, p)];
            x[(i, j + 1)] = v;
            mean += v;
        }
        mean /= n as f64;
        let mut ss = 0.0;
        for i in 0..n {
            let c = x[(i, j + 1)] - mean;
            x[(i, j + 1)] = c;
            ss += c * c;
        }
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "generated predictor column {j} is constant"
            )));
        }
        for i in 0..n {
            x[(i, j + 1)] /= sd;
        }
    }
    Ok(x)
}

/// Draw/construct the unit-norm true coefficient vector (length `p+1`).
pub fn gen_beta<R: Rng>(p: usize, scheme: &BetaScheme, rng: &mut R) -> Result<DVector<f64>> {
    let m = p + 1;
    let raw = match scheme {
        BetaScheme::UniformNormalized => DVector::from_fn(m, |_, _| rng.random::<f64>()),
        BetaScheme::OnesNormalized => DVector::from_element(m, 1.0),
        BetaScheme::Supplied(v) => {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    context: "supplied beta length",
                    expected: m,
                    found: v.len(),
                });
            }
            DVector::from_column_slice(v)
        }
    };
    let norm = raw.norm();
    if norm <= 0.0 {
        return Err(Error::InvalidInput("beta vector has zero norm".into()));
    }
    Ok(raw / norm)
}

/// Bernoulli draws with the given success probabilities.
fn bernoulli_from<R: Rng>(pi: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(pi.len(), |i, _| {
        if rng.random::<f64>() < pi[i] {
            1.0
        } else {
            0.0
        }
    })
}

/// Draw the binary response `y_i ~ Bernoulli(logistic(x_i' beta))`.
pub fn gen_response<R: Rng>(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let pi = logistic_probs(x, beta)?;
    Ok(bernoulli_from(&pi, rng))
}

/// Assemble a restriction from template matrices and an explicit noise
/// vector: `h = H beta + v`. This is the noise-free entry point used by
/// tests; [`gen_restriction`] draws `v ~ N(0, Psi)`.
pub fn restriction_from_noise(
    beta_true: &DVector<f64>,
    h_mat: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    v: &DVector<f64>,
) -> Result<RestrictionSpec> {
    if h_mat.nrows() == 0 {
        return Ok(RestrictionSpec::empty(h_mat.ncols().max(beta_true.len())));
    }
    if h_mat.ncols() != beta_true.len() {
        return Err(Error::DimensionMismatch {
            context: "restriction template columns vs beta length",
            expected: beta_true.len(),
            found: h_mat.ncols(),
        });
    }
    let values = h_mat * beta_true + v;
    RestrictionSpec::new(h_mat.clone(), values, psi.clone())
}

/// Draw `v ~ N(0, Psi)` and build the replication's restriction.
pub fn gen_restriction<R: Rng>(
    beta_true: &DVector<f64>,
    template: &RestrictionTemplate,
    rng: &mut R,
) -> Result<RestrictionSpec> {
    let h_mat = linalg::from_rows(&template.matrix, "restriction template H")?;
    let psi = linalg::from_rows(&template.covariance, "restriction template Psi")?;
    gen_restriction_parts(beta_true, &h_mat, &psi, rng)
}

fn gen_restriction_parts<R: Rng>(
    beta_true: &DVector<f64>,
    h_mat: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    rng: &mut R,
) -> Result<RestrictionSpec> {
    let q = h_mat.nrows();
    if q == 0 {
        return restriction_from_noise(beta_true, h_mat, psi, &DVector::zeros(0));
    }
    let g = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let chol = linalg::spd_cholesky(psi, "restriction template Psi")?;
    let v = chol.l() * g;
    restriction_from_noise(beta_true, h_mat, psi, &v)
}

/// Per-estimator cell summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub kind: EstimatorKind,
    pub mse: f64,
    pub pmse: f64,
    /// Mean selected `k` over successful replications, where applicable.
    pub mean_k: Option<f64>,
    /// Mean selected `d` over successful replications, where applicable.
    pub mean_d: Option<f64>,
}

/// One (n, rho) cell of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub n: usize,
    pub rho: f64,
    pub beta_true: Vec<f64>,
    pub failures: usize,
    pub successes: usize,
    /// True when every replication failed; `estimators` is then empty.
    pub failed: bool,
    pub estimators: Vec<EstimatorSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub version: String,
    /// Divisor policy for the averages ("successes": failed replications are
    /// excluded and counted).
    pub divisor: String,
    pub config: SimulationConfig,
}

/// Full simulation output: metadata plus one report per grid cell, in
/// `rho`-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub metadata: ReportMetadata,
    pub cells: Vec<CellReport>,
}

impl SimulationReport {
    pub fn cell(&self, n: usize, rho: f64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.n == n && c.rho == rho)
    }

    pub fn summary(&self, n: usize, rho: f64, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.cell(n, rho)?.estimators.iter().find(|e| e.kind == kind)
    }
}

type RepValues = Vec<(f64, f64, Option<EstimatorParams>)>;

#[allow(clippy::too_many_arguments)]
fn run_rep(
    config: &SimulationConfig,
    n: usize,
    rho: f64,
    beta_true: &DVector<f64>,
    h_mat: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    fixed_x: Option<&DMatrix<f64>>,
    pi_ref: &DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> Option<RepValues> {
    let x = match fixed_x {
        Some(x) => x.clone(),
        None => gen_design(n, config.p, rho, rng).ok()?,
    };
    let restriction = gen_restriction_parts(beta_true, h_mat, psi, rng).ok()?;
    let pi_rep = logistic_probs(&x, beta_true).ok()?;
    let y = bernoulli_from(&pi_rep, rng);

    let data = Dataset::with_intercept(x.clone(), y).ok()?;
    let fit = fit_mle(&data, &FitOptions::default()).ok()?;
    if !fit.converged {
        return None;
    }

    let mut out = Vec::with_capacity(config.estimators.len());
    for &kind in &config.estimators {
        let (beta_est, params) = match kind {
            EstimatorKind::Mle => (fit.beta.clone(), None),
            EstimatorKind::Le => {
                let p = tuning::default_params_for(kind, &fit).ok()?;
                (estimators::liu(&fit, p.d).ok()?.beta, Some(p))
            }
            EstimatorKind::Lte => {
                let p = tuning::default_params_for(kind, &fit).ok()?;
                (estimators::liu_type(&fit, p.k, p.d).ok()?.beta, Some(p))
            }
            EstimatorKind::Sre => (estimators::sre(&fit, &restriction).ok()?.beta, None),
            EstimatorKind::Srle => {
                let p = tuning::default_params_for(kind, &fit).ok()?;
                (estimators::srle(&fit, &restriction, p.d).ok()?.beta, Some(p))
            }
            EstimatorKind::Srlte => {
                let ctx = tuning::spectral_context(&fit, Some(&restriction)).ok()?;
                let sel = tuning::select_params(&ctx);
                (
                    estimators::srlte(&fit, &restriction, sel.k, sel.d).ok()?.beta,
                    Some(sel.params()),
                )
            }
        };
        let sq_beta = (&beta_est - beta_true).norm_squared();
        let pi_est = logistic_probs(&x, &beta_est).ok()?;
        let sq_pi = (&pi_est - pi_ref).norm_squared();
        if !sq_beta.is_finite() || !sq_pi.is_finite() {
            return None;
        }
        out.push((sq_beta, sq_pi, params));
    }
    Some(out)
}

/// Run one grid cell. Replications execute in parallel on the current rayon
/// pool; accumulation is a fixed-order fold over replication indices.
pub fn run_cell(config: &SimulationConfig, n: usize, rho: f64) -> Result<CellReport> {
    config.validate()?;
    let (h_mat, psi) = config.resolved_template()?;

    // Cell-level draws: the true coefficients, then the reference design the
    // PMSE target probabilities are evaluated on (it doubles as the fixed
    // design when regeneration is off).
    let mut cell_stream = cell_rng(config.seed, n, rho);
    let beta_true = gen_beta(config.p, &config.beta_scheme, &mut cell_stream)?;
    let reference_x = gen_design(n, config.p, rho, &mut cell_stream)?;
    let pi_ref = logistic_probs(&reference_x, &beta_true)?;
    let fixed_x = (!config.regenerate_design).then_some(&reference_x);

    let outcomes: Vec<Option<RepValues>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(config.seed, n, rho, rep);
            run_rep(
                config,
                n,
                rho,
                &beta_true,
                &h_mat,
                &psi,
                fixed_x,
                &pi_ref,
                &mut rng,
            )
        })
        .collect();

    let m = config.estimators.len();
    let mut successes = 0usize;
    let mut sum_beta = vec![0.0_f64; m];
    let mut sum_pi = vec![0.0_f64; m];
    let mut sum_k = vec![0.0_f64; m];
    let mut sum_d = vec![0.0_f64; m];
    for outcome in &outcomes {
        let Some(values) = outcome else { continue };
        successes += 1;
        for (j, (sq_beta, sq_pi, params)) in values.iter().enumerate() {
            sum_beta[j] += sq_beta;
            sum_pi[j] += sq_pi;
            if let Some(p) = params {
                sum_k[j] += p.k;
                sum_d[j] += p.d;
            }
        }
    }

    let failures = config.reps - successes;
    let failed = successes == 0;
    let estimators = if failed {
        Vec::new()
    } else {
        config
            .estimators
            .iter()
            .enumerate()
            .map(|(j, &kind)| {
                let denom = successes as f64;
                let (mean_k, mean_d) = match kind {
                    EstimatorKind::Lte | EstimatorKind::Srlte => {
                        (Some(sum_k[j] / denom), Some(sum_d[j] / denom))
                    }
                    EstimatorKind::Le | EstimatorKind::Srle => (None, Some(sum_d[j] / denom)),
                    _ => (None, None),
                };
                EstimatorSummary {
                    kind,
                    mse: sum_beta[j] / denom,
                    pmse: sum_pi[j] / denom,
                    mean_k,
                    mean_d,
                }
            })
            .collect()
    };

    Ok(CellReport {
        n,
        rho,
        beta_true: beta_true.iter().copied().collect(),
        failures,
        successes,
        failed,
        estimators,
    })
}

/// Run the full grid sequentially (cells in `rho`-major order).
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationReport> {
    run_simulation_with(config, |_, _| None, |_| {})
}

/// Grid runner with hooks: `resume` may supply an already-computed cell
/// (skipping it), `on_cell` observes each freshly computed cell as soon as
/// it finishes.
pub fn run_simulation_with(
    config: &SimulationConfig,
    mut resume: impl FnMut(usize, f64) -> Option<CellReport>,
    mut on_cell: impl FnMut(&CellReport),
) -> Result<SimulationReport> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.rho_values.len() * config.n_values.len());
    for &rho in &config.rho_values {
        for &n in &config.n_values {
            let cell = match resume(n, rho) {
                Some(existing) => existing,
                None => {
                    let fresh = run_cell(config, n, rho)?;
                    on_cell(&fresh);
                    fresh
                }
            };
            cells.push(cell);
        }
    }
    Ok(SimulationReport {
        metadata: ReportMetadata {
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            divisor: "successes".to_string(),
            config: config.clone(),
        },
        cells,
    })
}
