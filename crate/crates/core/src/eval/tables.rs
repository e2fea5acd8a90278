//! CSV writers for report tables and traces.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::metrics::{ErrorStats, ReportRow};
use crate::eval::solution::TrajectorySolution;
use crate::fusion::CombinationRow;

pub const COMBINATION_HEADER: [&str; 5] = ["k", "n_subsets", "rmse_m", "max_m", "std_m"];
pub const SCENARIO_HEADER: [&str; 5] = ["scenario", "rmse_m", "max_m", "std_m", "length_m"];
pub const EPOCH_HEADER: [&str; 3] = ["epoch", "gt_m", "pred_m"];
pub const TRACK_HEADER: [&str; 4] = ["t", "n", "e", "d"];

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(csv::Writer::from_path(path)?)
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per `k`: the performance-versus-IMU-count layout.
pub fn write_combination_table(path: &Path, rows: &[CombinationRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(COMBINATION_HEADER)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.n_subsets.to_string(),
            r.rmse_m.to_string(),
            r.max_m.to_string(),
            r.std_m.to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn read_combination_table(path: &Path) -> Result<Vec<CombinationRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != COMBINATION_HEADER {
        return Err(Error::Data {
            path: path.to_owned(),
            row: 0,
            message: format!("expected header {}", COMBINATION_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |_| Error::Data {
            path: path.to_owned(),
            row: i + 1,
            message: "unparsable value".into(),
        };
        rows.push(CombinationRow {
            k: rec[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            n_subsets: rec[1].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            n_skipped: 0,
            rmse_m: rec[2].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            max_m: rec[3].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            std_m: rec[4].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
        });
    }
    Ok(rows)
}

/// Per-scenario rows followed by a `Mean` row.
pub fn write_scenario_table(path: &Path, rows: &[ReportRow]) -> Result<()> {
    write_rows(path, rows, true)
}

/// Same layout as [`write_scenario_table`] without the `Mean` row, for rows
/// that should not be averaged together.
pub fn write_metrics_table(path: &Path, rows: &[ReportRow]) -> Result<()> {
    write_rows(path, rows, false)
}

fn write_rows(path: &Path, rows: &[ReportRow], with_mean: bool) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SCENARIO_HEADER)?;
    let fmt_len = |l: Option<f64>| l.map_or_else(String::new, |v| v.to_string());
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.stats.rmse.to_string(),
            r.stats.max.to_string(),
            r.stats.std.to_string(),
            fmt_len(r.trajectory_length_m),
        ])?;
    }
    if let Some(mean) = mean_row(rows).filter(|_| with_mean) {
        w.write_record([
            mean.label,
            mean.stats.rmse.to_string(),
            mean.stats.max.to_string(),
            mean.stats.std.to_string(),
            fmt_len(mean.trajectory_length_m),
        ])?;
    }
    finish(w, path)
}

/// Reads a scenario table back, including any `Mean` row.
pub fn read_scenario_table(path: &Path) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != SCENARIO_HEADER {
        return Err(Error::Data {
            path: path.to_owned(),
            row: 0,
            message: format!("expected header {}", SCENARIO_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| Error::Data {
                path: path.to_owned(),
                row: i + 1,
                message: format!("unparsable value '{}'", &rec[j]),
            })
        };
        rows.push(ReportRow {
            label: rec[0].to_owned(),
            stats: ErrorStats {
                rmse: num(1)?,
                max: num(2)?,
                std: num(3)?,
                n: 0,
            },
            trajectory_length_m: if rec[4].is_empty() { None } else { Some(num(4)?) },
        });
    }
    Ok(rows)
}

/// Field-wise mean of a table, as in the `Mean` line of the result tables.
pub fn mean_row(rows: &[ReportRow]) -> Option<ReportRow> {
    let stats: Vec<ErrorStats> = rows.iter().map(|r| r.stats).collect();
    let lengths: Option<Vec<f64>> = rows.iter().map(|r| r.trajectory_length_m).collect();
    Some(ReportRow {
        label: "Mean".into(),
        stats: ErrorStats::mean_of(&stats)?,
        trajectory_length_m: lengths.map(|l| l.iter().sum::<f64>() / l.len() as f64),
    })
}

/// Ground-truth and predicted increment for every epoch.
pub fn write_epoch_trace(path: &Path, gt: &[f64], pred: &[f64]) -> Result<()> {
    if gt.len() != pred.len() {
        return Err(Error::Shape(format!("{} labels but {} predictions", gt.len(), pred.len())));
    }
    let mut w = writer(path)?;
    w.write_record(EPOCH_HEADER)?;
    for (i, (g, p)) in gt.iter().zip(pred).enumerate() {
        w.write_record([(i + 1).to_string(), g.to_string(), p.to_string()])?;
    }
    finish(w, path)
}

pub fn write_track(path: &Path, sol: &TrajectorySolution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRACK_HEADER)?;
    for s in sol.samples() {
        w.write_record([s.t, s.p.x, s.p.y, s.p.z].map(|v| v.to_string()))?;
    }
    finish(w, path)
}
