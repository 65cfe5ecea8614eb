//! The shrinkage / restricted estimator family.
//!
//! All estimators are deterministic transformations of a converged [`MleFit`]:
//!
//! - `LE(d)    = F_d  beta_MLE`                       with `F_d  = (C+I)^{-1}(C+dI)`, `0 < d < 1`
//! - `LTE(k,d) = F_kd beta_MLE`                       with `F_kd = (C+kI)^{-1}(C-dI)`, `k > 0`
//! - `SRE      = (C + H'Psi^{-1}H)^{-1} (X'Wz + H'Psi^{-1}h)`
//! - `SRLE(d)  = F_d  beta_SRE`
//! - `SRLTE(k,d) = F_kd beta_SRE`
//!
//! where `C = X'WX` is the information matrix of the fit and `(H, h, Psi)` is
//! a stochastic linear restriction `h = H beta + v`, `Cov(v) = Psi`. SRLTE
//! contains every other member as a special case: `k = -d` gives SRE, `k = 1`
//! with `d` negated gives SRLE, and an empty restriction reduces the
//! restricted members to their unrestricted counterparts.
//!
//! `Psi` always enters through its inverse, applied via an SPD factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::MleFit;

/// Estimator tags, in the column order used by reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Mle,
    Le,
    Lte,
    Sre,
    Srle,
    Srlte,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Mle,
        EstimatorKind::Le,
        EstimatorKind::Lte,
        EstimatorKind::Sre,
        EstimatorKind::Srle,
        EstimatorKind::Srlte,
    ];

    /// Uppercase label used in table headers.
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Mle => "MLE",
            EstimatorKind::Le => "LE",
            EstimatorKind::Lte => "LTE",
            EstimatorKind::Sre => "SRE",
            EstimatorKind::Srle => "SRLE",
            EstimatorKind::Srlte => "SRLTE",
        }
    }

    /// Does this estimator take biasing parameters?
    pub fn uses_params(self) -> bool {
        matches!(
            self,
            EstimatorKind::Le | EstimatorKind::Lte | EstimatorKind::Srle | EstimatorKind::Srlte
        )
    }

    /// Does this estimator consume a stochastic restriction?
    pub fn uses_restriction(self) -> bool {
        matches!(
            self,
            EstimatorKind::Sre | EstimatorKind::Srle | EstimatorKind::Srlte
        )
    }

    pub fn parse(s: &str) -> Option<EstimatorKind> {
        match s.to_ascii_lowercase().as_str() {
            "mle" => Some(EstimatorKind::Mle),
            "le" => Some(EstimatorKind::Le),
            "lte" => Some(EstimatorKind::Lte),
            "sre" => Some(EstimatorKind::Sre),
            "srle" => Some(EstimatorKind::Srle),
            "srlte" => Some(EstimatorKind::Srlte),
            _ => None,
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Biasing parameters. `k` drives the ridge-type filter and must be positive
/// for LTE/SRLTE; `d` is the Liu parameter, restricted to (0, 1) for LE/SRLE
/// and unrestricted in sign for the Liu-type members. For the pure Liu
/// members `k` plays no role and is recorded as 1 (they coincide with the
/// Liu-type filter at `k = 1`, `d` negated).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub k: f64,
    pub d: f64,
}

impl EstimatorParams {
    pub fn new(k: f64, d: f64) -> Self {
        Self { k, d }
    }

    pub fn liu(d: f64) -> Self {
        Self { k: 1.0, d }
    }
}

/// Stochastic linear restriction `h = H beta + v` with `E(v) = 0`,
/// `Cov(v) = Psi`. `H` is `q x (p+1)` with full row rank, `Psi` is `q x q`
/// symmetric positive definite, and `q <= p+1`. The empty restriction
/// (`q = 0`) is the canonical encoding of "no restriction"; literal zero rows
/// would violate the rank invariant and are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RestrictionSpecRaw", into = "RestrictionSpecRaw")]
pub struct RestrictionSpec {
    matrix: DMatrix<f64>,
    values: DVector<f64>,
    covariance: DMatrix<f64>,
}

/// On-disk JSON schema: `{"H": [[...]], "h": [...], "Psi": [[...]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RestrictionSpecRaw {
    #[serde(rename = "H")]
    h_matrix: Vec<Vec<f64>>,
    #[serde(rename = "h")]
    h_values: Vec<f64>,
    #[serde(rename = "Psi")]
    psi: Vec<Vec<f64>>,
}

impl TryFrom<RestrictionSpecRaw> for RestrictionSpec {
    type Error = Error;

    fn try_from(raw: RestrictionSpecRaw) -> Result<Self> {
        let matrix = linalg::from_rows(&raw.h_matrix, "restriction matrix H")?;
        let covariance = linalg::from_rows(&raw.psi, "restriction covariance Psi")?;
        RestrictionSpec::new(
            matrix,
            DVector::from_vec(raw.h_values),
            covariance,
        )
    }
}

impl From<RestrictionSpec> for RestrictionSpecRaw {
    fn from(spec: RestrictionSpec) -> Self {
        Self {
            h_matrix: linalg::to_rows(&spec.matrix),
            h_values: spec.values.iter().copied().collect(),
            psi: linalg::to_rows(&spec.covariance),
        }
    }
}

impl RestrictionSpec {
    pub fn new(matrix: DMatrix<f64>, values: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let q = matrix.nrows();
        if values.len() != q {
            return Err(Error::DimensionMismatch {
                context: "restriction values length vs H rows",
                expected: q,
                found: values.len(),
            });
        }
        if covariance.nrows() != q || covariance.ncols() != q {
            return Err(Error::DimensionMismatch {
                context: "restriction covariance order vs H rows",
                expected: q,
                found: covariance.nrows(),
            });
        }
        if q > 0 {
            if q > matrix.ncols() {
                return Err(Error::InvalidInput(format!(
                    "restriction has more rows (q = {q}) than coefficients ({})",
                    matrix.ncols()
                )));
            }
            let svd = matrix.clone().svd(false, false);
            let max_sv = svd.singular_values.max();
            let min_sv = svd.singular_values.min();
            if max_sv <= 0.0 || min_sv <= 1e-10 * max_sv {
                return Err(Error::InvalidInput(
                    "restriction matrix H is rank-deficient (needs full row rank)".into(),
                ));
            }
            linalg::spd_cholesky(&covariance, "restriction covariance Psi")?;
        }
        Ok(Self {
            matrix,
            values,
            covariance,
        })
    }

    /// Restriction with no rows: estimators reduce to their unrestricted
    /// counterparts.
    pub fn empty(ncoef: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(0, ncoef),
            values: DVector::zeros(0),
            covariance: DMatrix::zeros(0, 0),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Number of restriction rows.
    pub fn q(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncoef(&self) -> usize {
        self.matrix.ncols()
    }

    fn check_against(&self, fit: &MleFit) -> Result<()> {
        if self.q() > 0 && self.ncoef() != fit.beta.len() {
            return Err(Error::DimensionMismatch {
                context: "restriction columns vs coefficient length",
                expected: fit.beta.len(),
                found: self.ncoef(),
            });
        }
        Ok(())
    }

    /// `H' Psi^{-1} H`, the precision contributed by the restriction
    /// (zero matrix for `q = 0`).
    pub fn penalty(&self, ncoef: usize) -> Result<DMatrix<f64>> {
        if self.q() == 0 {
            return Ok(DMatrix::zeros(ncoef, ncoef));
        }
        let psi_inv_h = linalg::spd_solve_mat(&self.covariance, &self.matrix, "restriction Psi")?;
        Ok(linalg::symmetrize(&(self.matrix.transpose() * psi_inv_h)))
    }

    /// `H' Psi^{-1} h` (zero vector for `q = 0`).
    pub fn penalty_rhs(&self, ncoef: usize) -> Result<DVector<f64>> {
        if self.q() == 0 {
            return Ok(DVector::zeros(ncoef));
        }
        let psi_inv_h = linalg::spd_solve_vec(&self.covariance, &self.values, "restriction Psi")?;
        Ok(self.matrix.transpose() * psi_inv_h)
    }

    /// `C + H' Psi^{-1} H`.
    pub fn augmented_information(&self, info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(info + self.penalty(info.nrows())?)
    }
}

/// A computed estimate, carrying the provenance needed to reproduce it.
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub kind: EstimatorKind,
    pub beta: DVector<f64>,
    pub params: Option<EstimatorParams>,
    pub restriction: Option<RestrictionSpec>,
}

fn require_converged(fit: &MleFit) -> Result<()> {
    if !fit.converged {
        return Err(Error::NotConverged(
            "shrinkage estimators require a converged maximum likelihood fit".into(),
        ));
    }
    Ok(())
}

/// Liu filter `F_d = (C+I)^{-1}(C+dI)`.
pub fn filter_fd(c: &DMatrix<f64>, d: f64) -> Result<DMatrix<f64>> {
    let id = DMatrix::identity(c.nrows(), c.ncols());
    linalg::spd_solve_mat(&(c + &id), &(c + d * &id), "Liu filter C+I")
}

/// Liu-type filter `F_kd = (C+kI)^{-1}(C-dI)`.
pub fn filter_fkd(c: &DMatrix<f64>, k: f64, d: f64) -> Result<DMatrix<f64>> {
    let id = DMatrix::identity(c.nrows(), c.ncols());
    linalg::spd_solve_mat(&(c + k * &id), &(c - d * &id), "Liu-type filter C+kI")
}

/// The maximum likelihood estimate wrapped as an [`EstimateResult`].
pub fn mle_estimate(fit: &MleFit) -> Result<EstimateResult> {
    require_converged(fit)?;
    Ok(EstimateResult {
        kind: EstimatorKind::Mle,
        beta: fit.beta.clone(),
        params: None,
        restriction: None,
    })
}

/// Liu estimator `F_d beta_MLE`, `0 < d < 1`.
pub fn liu(fit: &MleFit, d: f64) -> Result<EstimateResult> {
    require_converged(fit)?;
    if !(0.0 < d && d < 1.0) {
        return Err(Error::ParamDomain(format!(
            "Liu estimator needs 0 < d < 1, got d = {d}"
        )));
    }
    let beta = filter_fd(&fit.info, d)? * &fit.beta;
    Ok(EstimateResult {
        kind: EstimatorKind::Le,
        beta,
        params: Some(EstimatorParams::liu(d)),
        restriction: None,
    })
}

/// Liu-type estimator `F_kd beta_MLE`, `k > 0`, `d` unrestricted.
pub fn liu_type(fit: &MleFit, k: f64, d: f64) -> Result<EstimateResult> {
    require_converged(fit)?;
    if k <= 0.0 {
        return Err(Error::ParamDomain(format!(
            "Liu-type estimator needs k > 0, got k = {k}"
        )));
    }
    let beta = filter_fkd(&fit.info, k, d)? * &fit.beta;
    Ok(EstimateResult {
        kind: EstimatorKind::Lte,
        beta,
        params: Some(EstimatorParams::new(k, d)),
        restriction: None,
    })
}

/// Stochastic restricted estimator
/// `(C + H'Psi^{-1}H)^{-1} (X'Wz + H'Psi^{-1}h)`.
pub fn sre(fit: &MleFit, restriction: &RestrictionSpec) -> Result<EstimateResult> {
    require_converged(fit)?;
    restriction.check_against(fit)?;
    let augmented = restriction.augmented_information(&fit.info)?;
    let rhs = &fit.xtwz + restriction.penalty_rhs(fit.beta.len())?;
    let beta = linalg::spd_solve_vec(&augmented, &rhs, "restricted information C + H'Psi^{-1}H")?;
    Ok(EstimateResult {
        kind: EstimatorKind::Sre,
        beta,
        params: None,
        restriction: Some(restriction.clone()),
    })
}

/// Stochastic restricted Liu estimator `F_d beta_SRE`, `0 < d < 1`.
pub fn srle(fit: &MleFit, restriction: &RestrictionSpec, d: f64) -> Result<EstimateResult> {
    if !(0.0 < d && d < 1.0) {
        return Err(Error::ParamDomain(format!(
            "stochastic restricted Liu estimator needs 0 < d < 1, got d = {d}"
        )));
    }
    let base = sre(fit, restriction)?;
    let beta = filter_fd(&fit.info, d)? * base.beta;
    Ok(EstimateResult {
        kind: EstimatorKind::Srle,
        beta,
        params: Some(EstimatorParams::liu(d)),
        restriction: Some(restriction.clone()),
    })
}

/// Stochastic restricted Liu-type estimator `F_kd beta_SRE`, `k > 0`,
/// `d` unrestricted. This is the general member of the family.
pub fn srlte(fit: &MleFit, restriction: &RestrictionSpec, k: f64, d: f64) -> Result<EstimateResult> {
    if k <= 0.0 {
        return Err(Error::ParamDomain(format!(
            "stochastic restricted Liu-type estimator needs k > 0, got k = {k}"
        )));
    }
    let base = sre(fit, restriction)?;
    let beta = filter_fkd(&fit.info, k, d)? * base.beta;
    Ok(EstimateResult {
        kind: EstimatorKind::Srlte,
        beta,
        params: Some(EstimatorParams::new(k, d)),
        restriction: Some(restriction.clone()),
    })
}

/// Compute one estimator by tag. `params`/`restriction` must be present when
/// the tag calls for them.
pub fn estimate(
    kind: EstimatorKind,
    fit: &MleFit,
    restriction: Option<&RestrictionSpec>,
    params: Option<EstimatorParams>,
) -> Result<EstimateResult> {
    let need_params = || {
        params.ok_or_else(|| {
            Error::InvalidInput(format!("estimator {kind} requires biasing parameters"))
        })
    };
    let need_restriction = || {
        restriction.ok_or_else(|| {
            Error::InvalidInput(format!("estimator {kind} requires a stochastic restriction"))
        })
    };
    match kind {
        EstimatorKind::Mle => mle_estimate(fit),
        EstimatorKind::Le => liu(fit, need_params()?.d),
        EstimatorKind::Lte => {
            let p = need_params()?;
            liu_type(fit, p.k, p.d)
        }
        EstimatorKind::Sre => sre(fit, need_restriction()?),
        EstimatorKind::Srle => srle(fit, need_restriction()?, need_params()?.d),
        EstimatorKind::Srlte => {
            let p = need_params()?;
            srlte(fit, need_restriction()?, p.k, p.d)
        }
    }
}
