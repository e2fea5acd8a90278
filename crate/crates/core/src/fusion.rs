//! Combining aligned IMUs: average the raw channels before one network (RDA)
//! or average per-IMU network outputs (ARA), evaluated over every subset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ErrorStats;
use crate::quadnet::{Network, QuadNet};
use crate::types::{ImuSample, ImuSequence, MimuRecording};
use crate::window::{make_windows, Target, Window, WINDOW_SIZE};

/// Sorted, 1-based IMU indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImuSubset(Vec<usize>);

impl ImuSubset {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.is_empty() || indices[0] == 0 || indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "IMU subset must be non-empty distinct 1-based indices, got {indices:?}"
            )));
        }
        Ok(ImuSubset(indices))
    }

    pub fn all(n: usize) -> Result<Self> {
        Self::new((1..=n).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> usize {
        *self.0.last().unwrap()
    }
}

impl std::fmt::Display for ImuSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "{{{}}}", s.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Rda,
    Ara,
}

impl std::str::FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rda" => Ok(FusionMode::Rda),
            "ara" => Ok(FusionMode::Ara),
            other => Err(Error::Config(format!("unknown fusion mode '{other}', expected rda or ara"))),
        }
    }
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionMode::Rda => "rda",
            FusionMode::Ara => "ara",
        })
    }
}

/// All `C(n, k)` subsets of `{1..n}` in lexicographic order.
pub fn enumerate_subsets(n: usize, k: usize) -> Result<Vec<ImuSubset>> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("subset size must satisfy 1 <= k <= n, got k={k}, n={n}")));
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (1..=k).collect();
    loop {
        out.push(ImuSubset(idx.clone()));
        // Rightmost position that can still advance.
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - (k - 1 - i)) else {
            return Ok(out);
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Running mean; exact for identical inputs and for `(a, -a)` pairs.
fn running_mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut m = 0.0;
    let mut n = 0usize;
    for v in values {
        n += 1;
        m = if n == 1 { v } else { m + (v - m) / n as f64 };
    }
    (n > 0).then_some(m)
}

/// Per-sample, per-axis mean of the IMUs in `subset`.
pub fn rda_average(rec: &MimuRecording, subset: &ImuSubset) -> Result<ImuSequence> {
    let seqs: Vec<&ImuSequence> = subset
        .indices()
        .iter()
        .map(|&i| {
            rec.imu(i).ok_or_else(|| {
                Error::InvalidInput(format!("recording {} has no IMU {i} (has {})", rec.id(), rec.n_imus()))
            })
        })
        .collect::<Result<_>>()?;
    let first = seqs[0];
    for (s, &i) in seqs.iter().zip(subset.indices()).skip(1) {
        if s.len() != first.len() || s.rate_hz() != first.rate_hz() {
            return Err(Error::InvalidInput(format!("IMU {i} is not synchronized with IMU {}", subset.indices()[0])));
        }
        if let Some(j) = s
            .samples()
            .iter()
            .zip(first.samples())
            .position(|(a, b)| (a.t - b.t).abs() > 1e-9)
        {
            return Err(Error::InvalidInput(format!(
                "IMU {i} timestamp at sample {j} differs from IMU {}",
                subset.indices()[0]
            )));
        }
    }
    let samples = (0..first.len())
        .map(|j| {
            let mut ch = [0.0; 6];
            for (c, slot) in ch.iter_mut().enumerate() {
                *slot = running_mean(seqs.iter().map(|s| s.samples()[j].channels()[c])).unwrap();
            }
            ImuSample {
                t: first.samples()[j].t,
                f: [ch[0], ch[1], ch[2]].into(),
                w: [ch[3], ch[4], ch[5]].into(),
            }
        })
        .collect();
    ImuSequence::new(samples, first.rate_hz())
}

pub fn ara_average(predictions: &[f64]) -> Result<f64> {
    running_mean(predictions.iter().copied())
        .ok_or_else(|| Error::InvalidInput("ARA needs at least one prediction".into()))
}

/// Anything that maps a window to a scalar increment.
pub trait Regressor {
    fn predict_window(&self, w: &Window) -> Result<f64>;
}

impl Regressor for QuadNet {
    fn predict_window(&self, w: &Window) -> Result<f64> {
        self.predict(w)
    }
}

impl Regressor for Network {
    fn predict_window(&self, w: &Window) -> Result<f64> {
        self.forward(w)
    }
}

/// Models available to a fusion pipeline.
pub enum ModelSet<'a> {
    /// One network used for every IMU (and for RDA).
    Shared(&'a dyn Regressor),
    /// Network for IMU `i` at position `i - 1`; `None` when not trained.
    PerImu(Vec<Option<&'a dyn Regressor>>),
}

impl<'a> ModelSet<'a> {
    fn for_imu(&self, i: usize) -> Option<&'a dyn Regressor> {
        match self {
            ModelSet::Shared(m) => Some(*m),
            ModelSet::PerImu(v) => v.get(i.wrapping_sub(1)).copied().flatten(),
        }
    }
}

/// Per-epoch output of one fused pipeline on one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedEpochs {
    pub t_start: Vec<f64>,
    pub t_end: Vec<f64>,
    pub labels: Vec<f64>,
    pub predictions: Vec<f64>,
}

impl FusedEpochs {
    pub fn errors(&self) -> Vec<f64> {
        self.predictions.iter().zip(&self.labels).map(|(p, l)| p - l).collect()
    }

    pub fn stats(&self) -> Result<ErrorStats> {
        ErrorStats::from_errors(&self.errors())
    }
}

fn epochs_of(seq: &ImuSequence, rec: &MimuRecording) -> Result<Vec<Window>> {
    Ok(make_windows(seq, rec.gt(), WINDOW_SIZE, WINDOW_SIZE)?.windows)
}

/// Run one mode over one subset and return non-overlapping per-epoch
/// predictions alongside their labels.
pub fn fused_predictions(
    mode: FusionMode,
    models: &ModelSet<'_>,
    rec: &MimuRecording,
    subset: &ImuSubset,
    target: Target,
) -> Result<FusedEpochs> {
    if subset.max() > rec.n_imus() {
        return Err(Error::InvalidInput(format!(
            "recording {} has {} IMU(s), subset {subset} needs {}",
            rec.id(),
            rec.n_imus(),
            subset.max()
        )));
    }
    let (windows, predictions) = match mode {
        FusionMode::Rda => {
            let model = match models {
                ModelSet::Shared(m) => *m,
                ModelSet::PerImu(_) => {
                    return Err(Error::Config("RDA runs a single network; pass a shared model".into()))
                }
            };
            let windows = epochs_of(&rda_average(rec, subset)?, rec)?;
            let preds = windows.iter().map(|w| model.predict_window(w)).collect::<Result<Vec<_>>>()?;
            (windows, preds)
        }
        FusionMode::Ara => {
            let mut per_imu = Vec::new();
            let mut windows = Vec::new();
            for &i in subset.indices() {
                let model = models
                    .for_imu(i)
                    .ok_or_else(|| Error::InvalidInput(format!("no trained model for IMU {i}")))?;
                let w = epochs_of(rec.imu(i).unwrap(), rec)?;
                per_imu.push(w.iter().map(|w| model.predict_window(w)).collect::<Result<Vec<_>>>()?);
                windows = w;
            }
            let preds = (0..windows.len())
                .map(|j| ara_average(&per_imu.iter().map(|p| p[j]).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            (windows, preds)
        }
    };
    Ok(FusedEpochs {
        t_start: windows.iter().map(|w| w.t_start).collect(),
        t_end: windows.iter().map(|w| w.t_end).collect(),
        labels: windows.iter().map(|w| w.label(target)).collect(),
        predictions,
    })
}

/// One row of a performance-versus-IMU-count table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationRow {
    pub k: usize,
    /// Subsets actually evaluated.
    pub n_subsets: usize,
    pub n_skipped: usize,
    pub rmse_m: f64,
    pub max_m: f64,
    pub std_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationResult {
    pub row: CombinationRow,
    pub diagnostics: Vec<String>,
}

/// Mean epoch-level RMSE / max / STD over all `C(n_total, k)` subsets.
/// Subsets that need an absent IMU or model are skipped and reported.
pub fn evaluate_combinations(
    mode: FusionMode,
    models: &ModelSet<'_>,
    rec: &MimuRecording,
    n_total: usize,
    k: usize,
    target: Target,
) -> Result<CombinationResult> {
    let mut stats = Vec::new();
    let mut diagnostics = Vec::new();
    let subsets = enumerate_subsets(n_total, k)?;
    for subset in &subsets {
        let missing_imu = subset.max() > rec.n_imus();
        let missing_model = mode == FusionMode::Ara && subset.indices().iter().any(|&i| models.for_imu(i).is_none());
        if missing_imu || missing_model {
            let why = if missing_imu { "IMU data" } else { "model" };
            diagnostics.push(format!("{}: subset {subset} skipped, missing {why}", rec.id()));
            continue;
        }
        stats.push(fused_predictions(mode, models, rec, subset, target)?.stats()?);
    }
    let mean = ErrorStats::mean_of(&stats);
    for d in &diagnostics {
        log::warn!("{d}");
    }
    Ok(CombinationResult {
        row: CombinationRow {
            k,
            n_subsets: stats.len(),
            n_skipped: subsets.len() - stats.len(),
            rmse_m: mean.map_or(f64::NAN, |s| s.rmse),
            max_m: mean.map_or(f64::NAN, |s| s.max),
            std_m: mean.map_or(f64::NAN, |s| s.std),
        },
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_mimu, gen_trajectory, ImuErrorModel, TrajectorySpec};
    use crate::types::TrajectoryKind;

    fn binomial(n: usize, k: usize) -> usize {
        if k == 0 || k == n {
            1
        } else {
            binomial(n - 1, k - 1) + binomial(n - 1, k)
        }
    }

    fn recording(n: usize, sigma: f64) -> MimuRecording {
        let mut spec = TrajectorySpec::preset(TrajectoryKind::HorizontalPeriodic);
        spec.duration = 6.0;
        let traj = gen_trajectory(&spec, 120.0).unwrap();
        let models: Vec<_> = (0..n).map(|i| ImuErrorModel::white(sigma, sigma / 10.0, 40 + i as u64)).collect();
        gen_mimu(&traj, &models, 120.0, crate::strapdown::DEFAULT_GRAVITY, "t").unwrap()
    }

    #[test]
    fn subsets_match_listed_pairs() {
        let got: Vec<Vec<usize>> = enumerate_subsets(4, 2).unwrap().iter().map(|s| s.indices().to_vec()).collect();
        assert_eq!(got, vec![vec![1, 2], vec![1, 3], vec![1, 4], vec![2, 3], vec![2, 4], vec![3, 4]]);
        assert_eq!(enumerate_subsets(4, 4).unwrap(), vec![ImuSubset::all(4).unwrap()]);
        assert_eq!(enumerate_subsets(4, 1).unwrap().len(), 4);
        assert!(enumerate_subsets(3, 4).is_err());
        assert!(enumerate_subsets(3, 0).is_err());
    }

    #[test]
    fn subset_counts_match_recursive_binomial() {
        for n in 1..=8 {
            for k in 1..=n {
                let s = enumerate_subsets(n, k).unwrap();
                assert_eq!(s.len(), binomial(n, k));
                assert!(s.windows(2).all(|w| w[0] < w[1]));
                assert!(s.iter().all(|x| x.max() <= n && x.len() == k));
            }
        }
    }

    #[test]
    fn subset_validation() {
        assert_eq!(ImuSubset::new(vec![3, 1]).unwrap().indices(), &[1, 3]);
        assert!(ImuSubset::new(vec![]).is_err());
        assert!(ImuSubset::new(vec![0, 1]).is_err());
        assert!(ImuSubset::new(vec![2, 2]).is_err());
        assert_eq!(ImuSubset::new(vec![2, 4]).unwrap().to_string(), "{2,4}");
    }

    #[test]
    fn rda_of_duplicates_is_bit_identical() {
        let rec = recording(1, 0.05);
        let seq = rec.imus()[0].clone();
        let dup = MimuRecording::new(vec![seq.clone(); 4], rec.gt().clone(), "d", rec.kind()).unwrap();
        for k in 1..=4 {
            for s in enumerate_subsets(4, k).unwrap() {
                assert_eq!(rda_average(&dup, &s).unwrap(), seq);
            }
        }
    }

    #[test]
    fn rda_of_opposite_pair_is_zero() {
        let rec = recording(1, 0.05);
        let a = rec.imus()[0].clone();
        let neg = ImuSequence::new(
            a.samples()
                .iter()
                .map(|s| ImuSample { t: s.t, f: -s.f, w: -s.w })
                .collect(),
            a.rate_hz(),
        )
        .unwrap();
        let pair = MimuRecording::new(vec![a, neg], rec.gt().clone(), "p", rec.kind()).unwrap();
        let avg = rda_average(&pair, &ImuSubset::all(2).unwrap()).unwrap();
        assert!(avg.samples().iter().all(|s| s.channels() == [0.0; 6]));
    }

    #[test]
    fn rda_rejects_unsynchronized() {
        let rec = recording(1, 0.0);
        let a = rec.imus()[0].clone();
        let shifted = ImuSequence::new(
            a.samples().iter().map(|s| ImuSample { t: s.t + 0.5, ..*s }).collect(),
            a.rate_hz(),
        )
        .unwrap();
        let r = MimuRecording::new(vec![a, shifted], rec.gt().clone(), "s", rec.kind()).unwrap();
        assert!(rda_average(&r, &ImuSubset::all(2).unwrap()).is_err());
        assert!(rda_average(&r, &ImuSubset::all(3).unwrap()).is_err());
    }

    #[test]
    fn ara_examples() {
        assert_eq!(ara_average(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(ara_average(&[0.3]).unwrap(), 0.3);
        assert_eq!(ara_average(&[0.1; 4]).unwrap(), 0.1);
        assert!(ara_average(&[]).is_err());
    }

    #[test]
    fn permuting_imus_leaves_per_k_means_unchanged() {
        let rec = recording(4, 0.2);
        let net = Network::init(&crate::quadnet::ArchSpec::compact(), 3).unwrap();
        let shared = ModelSet::Shared(&net);
        let perm = rec.permuted(&[2, 0, 3, 1]).unwrap();
        for mode in [FusionMode::Rda, FusionMode::Ara] {
            for k in 1..=4 {
                let a = evaluate_combinations(mode, &shared, &rec, 4, k, Target::Distance).unwrap().row;
                let b = evaluate_combinations(mode, &shared, &perm, 4, k, Target::Distance).unwrap().row;
                assert_eq!(a.n_subsets, b.n_subsets);
                for (x, y) in [(a.rmse_m, b.rmse_m), (a.max_m, b.max_m), (a.std_m, b.std_m)] {
                    assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{mode} k={k}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn missing_imus_and_models_are_skipped() {
        let rec = recording(1, 0.1);
        let net = Network::init(&crate::quadnet::ArchSpec::compact(), 3).unwrap();
        let r = evaluate_combinations(FusionMode::Rda, &ModelSet::Shared(&net), &rec, 4, 2, Target::Distance).unwrap();
        assert_eq!((r.row.n_subsets, r.row.n_skipped), (0, 6));
        assert!(r.row.rmse_m.is_nan());
        assert_eq!(r.diagnostics.len(), 6);

        let rec = recording(4, 0.1);
        let per = ModelSet::PerImu(vec![Some(&net as &dyn Regressor), None, Some(&net), Some(&net)]);
        let r = evaluate_combinations(FusionMode::Ara, &per, &rec, 4, 1, Target::Distance).unwrap();
        assert_eq!((r.row.n_subsets, r.row.n_skipped), (3, 1));
        assert!(fused_predictions(FusionMode::Rda, &per, &rec, &ImuSubset::all(2).unwrap(), Target::Distance).is_err());
    }

    #[test]
    fn ara_k1_is_mean_of_single_imu_evaluations() {
        let rec = recording(4, 0.1);
        let net = Network::init(&crate::quadnet::ArchSpec::compact(), 8).unwrap();
        let shared = ModelSet::Shared(&net);
        let row = evaluate_combinations(FusionMode::Ara, &shared, &rec, 4, 1, Target::Distance).unwrap().row;
        let singles: Vec<ErrorStats> = (1..=4)
            .map(|i| {
                let w = make_windows(rec.imu(i).unwrap(), rec.gt(), WINDOW_SIZE, WINDOW_SIZE).unwrap().windows;
                let e: Vec<f64> = w.iter().map(|w| net.forward(w).unwrap() - w.label_distance).collect();
                ErrorStats::from_errors(&e).unwrap()
            })
            .collect();
        let mean = ErrorStats::mean_of(&singles).unwrap();
        assert!((row.rmse_m - mean.rmse).abs() < 1e-12);
        assert!((row.std_m - mean.std).abs() < 1e-12);
    }
}
