//! Spectral SMSE of SRLTE and the two-step selection of its biasing
//! parameters `(k, d)`.
//!
//! Write `C = Q L Q'` for the eigendecomposition of the information matrix
//! (eigenvalues descending), `alpha = Q' beta_MLE`, and let `b_ii` be the
//! diagonal of `Q' (C + H'Psi^{-1}H)^{-1} Q`. The scalar MSE of SRLTE is
//!
//! ```text
//! SMSE(k, d) = sum_i ((l_i - d)^2 b_ii + (d + k)^2 alpha_i^2) / (l_i + k)^2
//! ```
//!
//! Selection runs in two steps: `d` is the smallest of the per-index upper
//! bounds `l_i b_ii / (b_ii + 1)`, then `k` is the smallest positive
//! per-index stationary point of the summands above (each summand's
//! derivative in `k` vanishes at `k_i = ((l_i - d) b_ii - d alpha_i^2) /
//! alpha_i^2`), with a deterministic fallback of `1 / |alpha|^2` when no
//! stationary point is positive.
//!
//! When a restriction is present, `(C + H'Psi^{-1}H)^{-1}` is generally not
//! diagonal in the eigenbasis of `C`; `b_ii` keeps only the diagonal of the
//! congruence and the discarded off-diagonal energy is reported as a
//! diagnostic ratio. With no restriction the congruence is exactly diagonal
//! (`b_ii = 1/l_i`) and the spectral SMSE equals the trace of the LTE MSEM.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, EstimatorParams, RestrictionSpec};
use crate::linalg;
use crate::model::MleFit;

/// Indices with `alpha_i^2` below this are excluded from the per-index `k`
/// candidates (the stationary point blows up).
pub const ALPHA_FLOOR: f64 = 1e-12;

/// Eigenstructure of the converged fit, as consumed by the selection rules.
#[derive(Debug, Clone)]
pub struct SpectralContext {
    /// Eigenvalues of `C`, descending.
    pub lambda: DVector<f64>,
    /// Matching eigenvectors (columns).
    pub q_mat: DMatrix<f64>,
    /// `Q' beta_MLE`.
    pub alpha: DVector<f64>,
    /// Diagonal of `Q' (C + H'Psi^{-1}H)^{-1} Q`.
    pub b_diag: DVector<f64>,
    /// Frobenius fraction of the congruence living off the diagonal;
    /// exactly the information the spectral formula discards.
    pub offdiag_ratio: f64,
}

/// Eigendecompose the fit and project the (optionally restricted) inverse
/// information onto the eigenbasis of `C`.
pub fn spectral_context(fit: &MleFit, restriction: Option<&RestrictionSpec>) -> Result<SpectralContext> {
    let (lambda, q_mat) = linalg::sym_eigen_desc(&fit.info, "spectral_context information matrix")?;
    let m = lambda.len();
    if lambda[m - 1] <= 0.0 {
        return Err(Error::Singular(format!(
            "information matrix is not positive definite (min eigenvalue {:e})",
            lambda[m - 1]
        )));
    }
    let augmented = match restriction {
        Some(r) if r.q() > 0 => r.augmented_information(&fit.info)?,
        _ => fit.info.clone(),
    };
    let inv = linalg::spd_inverse(&augmented, "spectral_context restricted information")?;
    let congruence = q_mat.transpose() * inv * &q_mat;
    let alpha = q_mat.transpose() * &fit.beta;

    let mut b_diag = DVector::zeros(m);
    let mut diag_sq = 0.0;
    let mut off_sq = 0.0;
    for i in 0..m {
        b_diag[i] = congruence[(i, i)];
        for j in 0..m {
            let v = congruence[(i, j)] * congruence[(i, j)];
            if i == j {
                diag_sq += v;
            } else {
                off_sq += v;
            }
        }
    }
    if b_diag.min() <= 0.0 {
        return Err(Error::Singular(
            "restricted inverse information has a non-positive diagonal in the eigenbasis".into(),
        ));
    }
    let total = diag_sq + off_sq;
    let offdiag_ratio = if total > 0.0 {
        (off_sq / total).sqrt()
    } else {
        0.0
    };

    Ok(SpectralContext {
        lambda,
        q_mat,
        alpha,
        b_diag,
        offdiag_ratio,
    })
}

/// The spectral SMSE of SRLTE at `(k, d)`; `k > 0` is assumed.
pub fn smse_spectral(ctx: &SpectralContext, k: f64, d: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..ctx.lambda.len() {
        total += smse_summand(ctx, i, k, d);
    }
    total
}

/// Summand `i` of the spectral SMSE.
pub fn smse_summand(ctx: &SpectralContext, i: usize, k: f64, d: f64) -> f64 {
    let l = ctx.lambda[i];
    let b = ctx.b_diag[i];
    let a2 = ctx.alpha[i] * ctx.alpha[i];
    ((l - d) * (l - d) * b + (d + k) * (d + k) * a2) / ((l + k) * (l + k))
}

/// Per-index upper bounds `l_i b_ii / (b_ii + 1)` for `d`.
pub fn d_upper_bounds(ctx: &SpectralContext) -> DVector<f64> {
    DVector::from_fn(ctx.lambda.len(), |i, _| {
        ctx.lambda[i] * ctx.b_diag[i] / (ctx.b_diag[i] + 1.0)
    })
}

/// Step 1: the smallest of the per-index bounds (first index wins ties).
pub fn select_d(ctx: &SpectralContext) -> f64 {
    let bounds = d_upper_bounds(ctx);
    let mut best = bounds[0];
    for i in 1..bounds.len() {
        if bounds[i] < best {
            best = bounds[i];
        }
    }
    best
}

/// Outcome of step 2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSelection {
    /// The chosen `k`.
    pub k: f64,
    /// Per-index stationary points; `None` where `alpha_i^2` is below
    /// [`ALPHA_FLOOR`].
    pub candidates: Vec<Option<f64>>,
    /// True when no candidate was positive and the fallback `1/|alpha|^2`
    /// was used.
    pub fallback: bool,
}

/// Step 2: per-index stationary points of the SMSE summands at the given
/// `d`, filtered to positive values, smallest taken (first index wins ties).
pub fn select_k(ctx: &SpectralContext, d: f64) -> KSelection {
    let m = ctx.lambda.len();
    let mut candidates = Vec::with_capacity(m);
    let mut best: Option<f64> = None;
    for i in 0..m {
        let a2 = ctx.alpha[i] * ctx.alpha[i];
        if a2 < ALPHA_FLOOR {
            candidates.push(None);
            continue;
        }
        let k_i = ((ctx.lambda[i] - d) * ctx.b_diag[i] - d * a2) / a2;
        candidates.push(Some(k_i));
        if k_i > 0.0 && best.is_none_or(|b| k_i < b) {
            best = Some(k_i);
        }
    }
    match best {
        Some(k) => KSelection {
            k,
            candidates,
            fallback: false,
        },
        None => {
            let norm_sq = ctx.alpha.norm_squared();
            let k = if norm_sq > ALPHA_FLOOR { 1.0 / norm_sq } else { 1.0 };
            KSelection {
                k,
                candidates,
                fallback: true,
            }
        }
    }
}

/// Full two-step selection with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSelection {
    pub k: f64,
    pub d: f64,
    /// Per-index upper bounds for `d`.
    pub d_bounds: Vec<f64>,
    /// Per-index `k` stationary points (`None` where skipped).
    pub k_candidates: Vec<Option<f64>>,
    pub k_fallback: bool,
    /// Off-diagonal energy discarded by the spectral approximation.
    pub offdiag_ratio: f64,
}

impl ParamSelection {
    pub fn params(&self) -> EstimatorParams {
        EstimatorParams::new(self.k, self.d)
    }
}

/// Run both selection steps on a spectral context.
pub fn select_params(ctx: &SpectralContext) -> ParamSelection {
    let d = select_d(ctx);
    let ks = select_k(ctx, d);
    ParamSelection {
        k: ks.k,
        d,
        d_bounds: d_upper_bounds(ctx).iter().copied().collect(),
        k_candidates: ks.candidates,
        k_fallback: ks.fallback,
        offdiag_ratio: ctx.offdiag_ratio,
    }
}

/// Library defaults for the comparison estimators' parameters.
///
/// These are plug-in choices, overridable from the CLI:
/// - LE / SRLE: `d = min_i (alpha_i^2 - 1/l_i) / (1/l_i + alpha_i^2)`,
///   floored into (0, 1) at 1e-6;
/// - LTE: `k` from the unrestricted step-2 rule at `d = 0` (which reduces to
///   `1 / max_i alpha_i^2`), then `d` from the unrestricted step-1 bound.
pub fn default_params_for(kind: EstimatorKind, fit: &MleFit) -> Result<EstimatorParams> {
    let ctx = spectral_context(fit, None)?;
    match kind {
        EstimatorKind::Le | EstimatorKind::Srle => {
            let mut d = f64::INFINITY;
            for i in 0..ctx.lambda.len() {
                let a2 = ctx.alpha[i] * ctx.alpha[i];
                let inv_l = 1.0 / ctx.lambda[i];
                d = d.min((a2 - inv_l) / (inv_l + a2));
            }
            let d = d.clamp(1e-6, 1.0 - 1e-6);
            Ok(EstimatorParams::liu(d))
        }
        EstimatorKind::Lte => {
            let k = select_k(&ctx, 0.0).k;
            let d = select_d(&ctx);
            Ok(EstimatorParams::new(k, d))
        }
        other => Err(Error::InvalidInput(format!(
            "no default biasing parameters for {other}; SRLTE uses select_params"
        ))),
    }
}
