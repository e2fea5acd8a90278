//! Error statistics: RMSE, max error and population standard deviation.

use crate::error::{Error, Result};
use crate::eval::solution::TrajectorySolution;
use crate::types::GroundTruthTrack;

/// Root mean square of `x - x_hat`.
pub fn rmse(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    check_pair(x, x_hat)?;
    let sum: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / x.len() as f64).sqrt())
}

fn check_pair(x: &[f64], x_hat: &[f64]) -> Result<()> {
    if x.len() != x_hat.len() {
        return Err(Error::Shape(format!(
            "series lengths differ ({} vs {})",
            x.len(),
            x_hat.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidInput("empty error series".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub rmse: f64,
    pub max: f64,
    pub std: f64,
    pub n: usize,
}

impl ErrorStats {
    /// Statistics of a signed (or non-negative) error series.
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::InvalidInput("empty error series".into()));
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        Ok(ErrorStats {
            rmse: (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
            max: errors.iter().fold(0.0, |m: f64, e| m.max(e.abs())),
            std: var.sqrt(),
            n: errors.len(),
        })
    }

    /// Arithmetic mean of each field across a set of statistics.
    pub fn mean_of(stats: &[ErrorStats]) -> Option<Self> {
        if stats.is_empty() {
            return None;
        }
        let n = stats.len() as f64;
        Some(ErrorStats {
            rmse: stats.iter().map(|s| s.rmse).sum::<f64>() / n,
            max: stats.iter().map(|s| s.max).sum::<f64>() / n,
            std: stats.iter().map(|s| s.std).sum::<f64>() / n,
            n: stats.iter().map(|s| s.n).sum(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub stats: ErrorStats,
    pub trajectory_length_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rmse_m: f64,
    pub max_error_m: f64,
    pub std_m: f64,
    pub trajectory_length_m: f64,
    /// Horizontal-only statistics, present for trajectory-level reports.
    pub horizontal: Option<ErrorStats>,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn stats(&self) -> ErrorStats {
        ErrorStats {
            rmse: self.rmse_m,
            max: self.max_error_m,
            std: self.std_m,
            n: 0,
        }
    }
}

/// Metrics of an aligned scalar series; the length is the polyline length of `gt`.
pub fn compute_metrics(gt: &[f64], est: &[f64]) -> Result<EvalReport> {
    check_pair(gt, est)?;
    let errors: Vec<f64> = gt.iter().zip(est).map(|(a, b)| a - b).collect();
    let s = ErrorStats::from_errors(&errors)?;
    Ok(EvalReport {
        rmse_m: s.rmse,
        max_error_m: s.max,
        std_m: s.std,
        trajectory_length_m: gt.windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
        horizontal: None,
        rows: Vec::new(),
    })
}

/// Per-sample Euclidean position errors of `est` against ground truth
/// interpolated at the solution timestamps. Returns `(3-D, horizontal)`.
pub fn position_errors(
    gt: &GroundTruthTrack,
    est: &TrajectorySolution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut full = Vec::with_capacity(est.len());
    let mut horiz = Vec::with_capacity(est.len());
    for s in est.samples() {
        let truth = gt.interpolate(s.t).ok_or_else(|| {
            Error::InvalidInput(format!("ground truth does not cover t = {}", s.t))
        })?;
        let d = s.p - truth;
        full.push(d.norm());
        horiz.push(d.x.hypot(d.y));
    }
    Ok((full, horiz))
}

/// Trajectory-level report: 3-D error statistics, horizontal statistics
/// alongside, and the ground-truth path length.
pub fn trajectory_metrics(gt: &GroundTruthTrack, est: &TrajectorySolution) -> Result<EvalReport> {
    let (full, horiz) = position_errors(gt, est)?;
    let s = ErrorStats::from_errors(&full)?;
    Ok(EvalReport {
        rmse_m: s.rmse,
        max_error_m: s.max,
        std_m: s.std,
        trajectory_length_m: gt.path_length(),
        horizontal: Some(ErrorStats::from_errors(&horiz)?),
        rows: Vec::new(),
    })
}
