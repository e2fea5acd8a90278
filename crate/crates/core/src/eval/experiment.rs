//! End-to-end pipelines: strapdown baseline, QuadNet reconstruction, and the
//! train/evaluate sweep that fills the per-`k` tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attitude::circular_mean;
use crate::data::{build_split, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::metrics::{trajectory_metrics, EvalReport, ReportRow};
use crate::eval::reconstruct::reconstruct;
use crate::eval::solution::{SolutionMeta, TrajectorySolution};
use crate::eval::tables::{write_combination_table, write_epoch_trace, write_scenario_table, write_track};
use crate::fusion::{evaluate_combinations, fused_predictions, rda_average, CombinationRow, FusionMode, ImuSubset, ModelSet, Regressor};
use nalgebra::{Vector2, Vector3};

use crate::attitude::quat_to_euler;
use crate::qdr::{detect_peaks, estimate_heading, qdr_run, QdrParams, QdrRun};
use crate::quadnet::{ArchSpec, QuadNet, TrainConfig, TrainHistory};
use crate::strapdown::{ins_run, NavState};
use crate::types::{ImuSequence, MimuRecording};
use crate::window::{Target, Window};

/// The subset's raw-averaged sequence (a single IMU passes through).
fn subset_sequence(rec: &MimuRecording, subset: &ImuSubset) -> Result<ImuSequence> {
    if subset.len() == 1 {
        rec.imu(subset.indices()[0])
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("recording {} has no IMU {}", rec.id(), subset.indices()[0])))
    } else {
        rda_average(rec, subset)
    }
}

/// Pure-inertial solution from ground-truth initial conditions.
pub fn ins_baseline(rec: &MimuRecording, subset: &ImuSubset, g: f64) -> Result<(TrajectorySolution, EvalReport)> {
    let seq = subset_sequence(rec, subset)?;
    let t0 = seq
        .start_time()
        .ok_or_else(|| Error::InvalidInput(format!("recording {} is empty", rec.id())))?;
    let init = NavState::from_ground_truth(rec.gt(), t0)?;
    let mut sol = ins_run(&seq, &init, g)?.solution;
    // The last propagated state can sit one sample past the ground truth.
    let end = rec.gt().end_time().unwrap_or(f64::INFINITY);
    if sol.last().is_some_and(|p| p.t > end + 1e-9) {
        let kept: Vec<_> = sol.samples().iter().filter(|p| p.t <= end + 1e-9).copied().collect();
        sol = TrajectorySolution::new(kept, sol.source)?;
    }
    sol.meta = SolutionMeta {
        split: None,
        mode: Some(if subset.len() > 1 { "rda".into() } else { "single".into() }),
        k: Some(subset.len()),
    };
    let report = trajectory_metrics(rec.gt(), &sol)?;
    Ok((sol, report))
}

/// One row per recording; pass `k = 1` for IMU 1 alone, or the IMU count
/// to average all of them first.
pub fn baseline_table(recs: &[MimuRecording], k: usize, g: f64) -> Result<Vec<ReportRow>> {
    recs.iter()
        .map(|rec| {
            let subset = ImuSubset::all(k.min(rec.n_imus()))?;
            let (_, r) = ins_baseline(rec, &subset, g)?;
            Ok(ReportRow {
                label: rec.id().to_owned(),
                stats: r.stats(),
                trajectory_length_m: Some(r.trajectory_length_m),
            })
        })
        .collect()
}

/// Model-based QDR on the subset's sequence, started from ground truth at
/// the first peak. QDR is planar, so the report's headline numbers are the
/// horizontal errors; `None` when too few peaks were found.
pub fn qdr_baseline(rec: &MimuRecording, subset: &ImuSubset, params: &QdrParams) -> Result<(QdrRun, Option<EvalReport>)> {
    let seq = subset_sequence(rec, subset)?;
    let t0 = seq
        .start_time()
        .ok_or_else(|| Error::InvalidInput(format!("recording {} is empty", rec.id())))?;
    let init_yaw = quat_to_euler(&NavState::from_ground_truth(rec.gt(), t0)?.att).yaw;
    let peaks = detect_peaks(&seq, params)?;
    let start = match peaks.indices.first() {
        Some(&i) => {
            let t = seq.samples()[i].t;
            rec.gt()
                .interpolate(t)
                .ok_or_else(|| Error::InvalidInput(format!("ground truth does not cover first peak at t = {t}")))?
        }
        None => Vector3::zeros(),
    };
    let run = qdr_run(&seq, params, Vector2::new(start.x, start.y), init_yaw)?;
    if run.solution.is_empty() {
        return Ok((run, None));
    }
    let full = trajectory_metrics(rec.gt(), &run.solution)?;
    let h = full.horizontal.expect("trajectory metrics always carry horizontal stats");
    let report = EvalReport {
        rmse_m: h.rmse,
        max_error_m: h.max,
        std_m: h.std,
        ..full
    };
    Ok((run, Some(report)))
}

/// Circular mean of the boundary headings that fall inside each epoch.
pub fn epoch_headings(seq: &ImuSequence, init_yaw: f64, t_start: &[f64], t_end: &[f64]) -> Result<Vec<f64>> {
    let track = estimate_heading(seq, init_yaw)?;
    t_start
        .iter()
        .zip(t_end)
        .map(|(&a, &b)| {
            let lo = track.t.partition_point(|&t| t < a - 1e-9);
            let hi = track.t.partition_point(|&t| t <= b + 1e-9);
            circular_mean(&track.yaw[lo..hi])
                .ok_or_else(|| Error::InvalidInput(format!("no heading samples in epoch [{a}, {b}]")))
        })
        .collect()
}

/// Models for one reconstruction. Altitude may be absent for purely
/// horizontal flights, in which case height is held constant.
pub struct Regressors<'a> {
    pub distance: ModelSet<'a>,
    pub altitude: Option<ModelSet<'a>>,
}

#[derive(Debug, Clone)]
pub struct QuadnetTrajectory {
    pub solution: TrajectorySolution,
    pub report: EvalReport,
    pub distance_labels: Vec<f64>,
    pub distance_pred: Vec<f64>,
    pub clamped: usize,
}

/// Chain regressed per-epoch distance and height with gyro heading into a
/// 3-D track starting at the ground-truth position and heading.
pub fn quadnet_trajectory(
    mode: FusionMode,
    models: &Regressors<'_>,
    rec: &MimuRecording,
    subset: &ImuSubset,
) -> Result<QuadnetTrajectory> {
    let dist = fused_predictions(mode, &models.distance, rec, subset, Target::Distance)?;
    if dist.predictions.is_empty() {
        return Err(Error::InvalidInput(format!("recording {} is shorter than one epoch", rec.id())));
    }
    let alt = match &models.altitude {
        Some(m) => fused_predictions(mode, m, rec, subset, Target::Altitude)?.predictions,
        None => vec![0.0; dist.predictions.len()],
    };
    let t0 = dist.t_start[0];
    let init = NavState::from_ground_truth(rec.gt(), t0)?;
    let init_yaw = quat_to_euler(&init.att).yaw;
    let yaw = epoch_headings(&subset_sequence(rec, subset)?, init_yaw, &dist.t_start, &dist.t_end)?;
    let r = reconstruct(&dist.predictions, &alt, &yaw, &dist.t_end, init.p)?;
    let mut solution = r.solution;
    solution.meta = SolutionMeta {
        split: None,
        mode: Some(mode.to_string()),
        k: Some(subset.len()),
    };
    let report = trajectory_metrics(rec.gt(), &solution)?;
    Ok(QuadnetTrajectory {
        solution,
        report,
        distance_labels: dist.labels,
        distance_pred: dist.predictions,
        clamped: r.clamped,
    })
}

/// How ARA gets its per-IMU networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AraModels {
    /// One network trained on the split's windows, used for every IMU.
    Shared,
    /// A network per IMU trained on that IMU's windows only.
    PerImu,
}

impl std::str::FromStr for AraModels {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(AraModels::Shared),
            "per-imu" => Ok(AraModels::PerImu),
            other => Err(Error::Config(format!("unknown ARA model policy '{other}', expected shared or per-imu"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub split: SplitSpec,
    pub modes: Vec<FusionMode>,
    /// Nominal IMU count of the array; subsets are drawn from `1..=n_imus`.
    pub n_imus: usize,
    pub arch: ArchSpec,
    pub train: TrainConfig,
    pub ara_models: AraModels,
    /// Train an altitude network as well as the distance one.
    pub altitude: bool,
    pub gravity: f64,
}

impl ExperimentConfig {
    pub fn new(split: SplitSpec) -> Self {
        ExperimentConfig {
            split,
            modes: vec![FusionMode::Rda],
            n_imus: 4,
            arch: ArchSpec::canonical(),
            train: TrainConfig::default(),
            ara_models: AraModels::Shared,
            altitude: true,
            gravity: crate::strapdown::DEFAULT_GRAVITY,
        }
    }

    /// Contradictions that would otherwise surface after training.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.arch.validate_quadnet()?;
        if self.modes.is_empty() {
            return Err(Error::Config("experiment needs at least one fusion mode".into()));
        }
        if self.n_imus == 0 {
            return Err(Error::Config("n_imus must be >= 1".into()));
        }
        if self.split.train_stride == 0 {
            return Err(Error::Config("train stride must be >= 1".into()));
        }
        if let Some(imus) = &self.split.train_imus {
            if imus.iter().any(|&i| i == 0 || i > self.n_imus) {
                return Err(Error::Config(format!(
                    "split {} trains on IMUs {imus:?}, outside 1..={}",
                    self.split.id, self.n_imus
                )));
            }
            if self.ara_models == AraModels::PerImu && self.modes.contains(&FusionMode::Ara) && imus.len() < self.n_imus {
                return Err(Error::Config(format!(
                    "per-IMU ARA needs training data for every IMU, but split {} trains on {imus:?} only",
                    self.split.id
                )));
            }
        }
        if !(self.gravity.is_finite() && self.gravity > 0.0) {
            return Err(Error::Config(format!("gravity must be positive, got {}", self.gravity)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub distance: QuadNet,
    pub altitude: Option<QuadNet>,
    /// Per-IMU networks (index `i - 1`), when requested.
    pub per_imu_distance: Vec<QuadNet>,
    pub per_imu_altitude: Vec<QuadNet>,
    pub histories: Vec<(String, TrainHistory)>,
}

/// `(mode, target, rows for k = 1..)` for every evaluated combination.
pub type ModeTables = Vec<(FusionMode, Target, Vec<CombinationRow>)>;

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub tables: ModeTables,
    pub diagnostics: Vec<String>,
    /// Reconstruction from IMU 1 alone.
    pub trajectory: QuadnetTrajectory,
    pub baseline: EvalReport,
    pub models: TrainedModels,
}

fn fit(windows: &[Window], target: Target, cfg: &ExperimentConfig, tag: &str, hist: &mut Vec<(String, TrainHistory)>) -> Result<QuadNet> {
    log::info!("training {tag} on {} windows", windows.len());
    let (m, h) = QuadNet::fit(windows, target, &cfg.arch, &cfg.train)?;
    hist.push((tag.to_owned(), h));
    Ok(m)
}

/// Train every network the configuration needs.
pub fn train_models(split: &Split, cfg: &ExperimentConfig) -> Result<TrainedModels> {
    if split.train.is_empty() {
        return Err(Error::InvalidInput(format!("split {} has no training windows", cfg.split.id)));
    }
    let mut histories = Vec::new();
    let distance = fit(&split.train, Target::Distance, cfg, "distance", &mut histories)?;
    let altitude = cfg
        .altitude
        .then(|| fit(&split.train, Target::Altitude, cfg, "altitude", &mut histories))
        .transpose()?;
    let mut per_imu_distance = Vec::new();
    let mut per_imu_altitude = Vec::new();
    if cfg.modes.contains(&FusionMode::Ara) && cfg.ara_models == AraModels::PerImu {
        for i in 1..=cfg.n_imus {
            let own: Vec<Window> = split.train.iter().filter(|w| w.origin.imu == i).cloned().collect();
            if own.is_empty() {
                return Err(Error::InvalidInput(format!("no training windows for IMU {i}")));
            }
            per_imu_distance.push(fit(&own, Target::Distance, cfg, &format!("distance-imu{i}"), &mut histories)?);
            if cfg.altitude {
                per_imu_altitude.push(fit(&own, Target::Altitude, cfg, &format!("altitude-imu{i}"), &mut histories)?);
            }
        }
    }
    Ok(TrainedModels {
        distance,
        altitude,
        per_imu_distance,
        per_imu_altitude,
        histories,
    })
}

fn model_set<'a>(mode: FusionMode, policy: AraModels, shared: &'a QuadNet, per: &'a [QuadNet]) -> ModelSet<'a> {
    if mode == FusionMode::Ara && policy == AraModels::PerImu {
        ModelSet::PerImu(per.iter().map(|m| Some(m as &dyn Regressor)).collect())
    } else {
        ModelSet::Shared(shared)
    }
}

/// Sweep `k = 1..=n_imus` for every mode and target on the held-out
/// recording of an already trained model set.
pub fn evaluate_models(
    models: &TrainedModels,
    test: &MimuRecording,
    cfg: &ExperimentConfig,
) -> Result<(ModeTables, Vec<String>)> {
    let mut tables = Vec::new();
    let mut diagnostics = Vec::new();
    let mut targets = vec![(Target::Distance, &models.distance, &models.per_imu_distance)];
    if let Some(a) = &models.altitude {
        targets.push((Target::Altitude, a, &models.per_imu_altitude));
    }
    for &mode in &cfg.modes {
        for &(target, shared, per) in &targets {
            let set = model_set(mode, cfg.ara_models, shared, per);
            let mut rows = Vec::new();
            for k in 1..=cfg.n_imus {
                let r = evaluate_combinations(mode, &set, test, cfg.n_imus, k, target)?;
                diagnostics.extend(r.diagnostics);
                rows.push(r.row);
            }
            tables.push((mode, target, rows));
        }
    }
    Ok((tables, diagnostics))
}

/// Train on the split, evaluate every mode and `k`, reconstruct the test
/// trajectory, and write all CSVs into `out_dir` when given.
///
/// Files: `table_<split>_<mode>_<target>.csv`, `epochs_<split>.csv`,
/// `track_<split>.csv`, `baseline_<split>.csv`.
pub fn run_experiment(cfg: &ExperimentConfig, corpus: &[MimuRecording], out_dir: Option<&Path>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let split = build_split(&cfg.split, corpus)?;
    let models = train_models(&split, cfg)?;
    let test = &split.test_recording;
    let (tables, diagnostics) = evaluate_models(&models, test, cfg)?;

    let one = ImuSubset::new(vec![1])?;
    let regs = Regressors {
        distance: ModelSet::Shared(&models.distance),
        altitude: models.altitude.as_ref().map(|m| ModelSet::Shared(m as &dyn Regressor)),
    };
    let mut trajectory = quadnet_trajectory(FusionMode::Rda, &regs, test, &one)?;
    trajectory.solution.meta.split = Some(cfg.split.id.to_string());
    let (_, baseline) = ins_baseline(test, &one, cfg.gravity)?;

    if let Some(dir) = out_dir {
        let id = cfg.split.id;
        for (mode, target, rows) in &tables {
            write_combination_table(&dir.join(format!("table_{id}_{mode}_{target}.csv")), rows)?;
        }
        write_epoch_trace(
            &dir.join(format!("epochs_{id}.csv")),
            &trajectory.distance_labels,
            &trajectory.distance_pred,
        )?;
        write_track(&dir.join(format!("track_{id}.csv")), &trajectory.solution)?;
        let rows = [
            ReportRow {
                label: "ins".into(),
                stats: baseline.stats(),
                trajectory_length_m: Some(baseline.trajectory_length_m),
            },
            ReportRow {
                label: "quadnet".into(),
                stats: trajectory.report.stats(),
                trajectory_length_m: Some(trajectory.report.trajectory_length_m),
            },
        ];
        write_scenario_table(&dir.join(format!("baseline_{id}.csv")), &rows)?;
    }
    Ok(ExperimentOutput {
        tables,
        diagnostics,
        trajectory,
        baseline,
        models,
    })
}
