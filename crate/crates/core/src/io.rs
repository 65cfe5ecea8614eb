//! File formats: dataset CSV ingestion, JSON report documents, and the
//! simulation CSV tables.
//!
//! Dataset CSVs are RFC-4180 with a mandatory header row; the response
//! column is picked by name, every other column is a predictor (in header
//! order) and the intercept column is attached automatically. Machine CSVs
//! print floats in shortest round-trip form; the human-readable tables use
//! five decimals.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::MsemReport;
use crate::error::{Error, Result};
use crate::estimators::{EstimateResult, EstimatorKind, EstimatorParams};
use crate::linalg;
use crate::model::{Dataset, MleFit};
use crate::simulation::SimulationReport;

/// Read a dataset from CSV: header row required, `response` names the 0/1
/// column, remaining columns are predictors.
pub fn read_dataset_csv(path: &Path, response: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?
        .clone();
    let response_idx = headers.iter().position(|h| h == response).ok_or_else(|| {
        Error::InvalidInput(format!(
            "{}: response column '{response}' not found (columns: {})",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(", ")
        ))
    })?;

    let mut y_values = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(headers.len().saturating_sub(1));
        for (idx, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "{}:{line}: column '{}': cannot parse '{field}' as a number",
                    path.display(),
                    &headers[idx]
                ))
            })?;
            if idx == response_idx {
                y_values.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: no data rows",
            path.display()
        )));
    }

    let predictors = linalg::from_rows(&rows, "dataset predictors")?;
    Dataset::new(predictors, DVector::from_vec(y_values))
}

/// JSON document for a maximum likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    /// Eigenvalue ratio of the information matrix `C`.
    pub condition_number: f64,
    /// Eigenvalues of `C`, descending.
    pub eigenvalues: Vec<f64>,
    pub n: usize,
    pub p: usize,
}

impl FitReport {
    pub fn from_fit(fit: &MleFit, data: &Dataset) -> Result<Self> {
        let eigenvalues = linalg::sym_eigenvalues_desc(&fit.info, "fit report information")?;
        let min = eigenvalues[eigenvalues.len() - 1];
        let condition_number = if min > 0.0 {
            eigenvalues[0] / min
        } else {
            f64::INFINITY
        };
        Ok(Self {
            coefficients: fit.beta.iter().copied().collect(),
            iterations: fit.iterations,
            converged: fit.converged,
            log_likelihood: fit.log_likelihood(),
            condition_number,
            eigenvalues: eigenvalues.iter().copied().collect(),
            n: data.n(),
            p: data.p(),
        })
    }
}

/// JSON document for one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    pub kind: EstimatorKind,
    pub coefficients: Vec<f64>,
    pub params: Option<EstimatorParams>,
}

impl From<&EstimateResult> for EstimateDoc {
    fn from(est: &EstimateResult) -> Self {
        Self {
            kind: est.kind,
            coefficients: est.beta.iter().copied().collect(),
            params: est.params,
        }
    }
}

/// JSON document for an MSEM report; matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsemDoc {
    pub kind: EstimatorKind,
    pub bias: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub msem: Vec<Vec<f64>>,
    pub smse: f64,
}

impl From<&MsemReport> for MsemDoc {
    fn from(report: &MsemReport) -> Self {
        Self {
            kind: report.kind,
            bias: report.bias.iter().copied().collect(),
            cov: linalg::to_rows(&report.cov),
            msem: linalg::to_rows(&report.msem),
            smse: report.smse,
        }
    }
}

/// Pretty JSON with a trailing newline; shortest round-trip floats.
pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Which simulation metric a table shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mse,
    Pmse,
}

impl Metric {
    fn pick(self, summary: &crate::simulation::EstimatorSummary) -> f64 {
        match self {
            Metric::Mse => summary.mse,
            Metric::Pmse => summary.pmse,
        }
    }
}

fn estimator_columns(report: &SimulationReport) -> Vec<EstimatorKind> {
    report.metadata.config.estimators.clone()
}

/// Machine CSV for one metric: `rho,n,<estimator...>` with one row per grid
/// cell (rho-major order). Failed cells leave their value fields empty.
pub fn metric_csv(report: &SimulationReport, metric: Metric) -> String {
    let columns = estimator_columns(report);
    let mut out = String::from("rho,n");
    for kind in &columns {
        out.push(',');
        out.push_str(kind.label());
    }
    out.push('\n');
    for cell in &report.cells {
        let _ = write!(out, "{},{}", cell.rho, cell.n);
        for kind in &columns {
            out.push(',');
            if let Some(summary) = cell.estimators.iter().find(|e| e.kind == *kind) {
                let _ = write!(out, "{}", metric.pick(summary));
            }
        }
        out.push('\n');
    }
    out
}

/// Human-readable table with five decimals and one block per `rho`, mirroring
/// the usual presentation of simulation studies.
pub fn metric_table(report: &SimulationReport, metric: Metric) -> String {
    let columns = estimator_columns(report);
    let mut out = String::new();
    let title = match metric {
        Metric::Mse => "MSE",
        Metric::Pmse => "PMSE",
    };
    for &rho in &report.metadata.config.rho_values {
        let _ = writeln!(out, "{title}  (rho = {rho})");
        let _ = write!(out, "{:>6}", "n");
        for kind in &columns {
            let _ = write!(out, "{:>12}", kind.label());
        }
        out.push('\n');
        for cell in report.cells.iter().filter(|c| c.rho == rho) {
            let _ = write!(out, "{:>6}", cell.n);
            for kind in &columns {
                match cell.estimators.iter().find(|e| e.kind == *kind) {
                    Some(summary) => {
                        let _ = write!(out, "{:>12.5}", metric.pick(summary));
                    }
                    None => {
                        let _ = write!(out, "{:>12}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
