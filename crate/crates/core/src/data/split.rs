//! The four train/test divisions: horizontal or vertical trajectories,
//! trained on IMU 1 alone or on every IMU, with one trajectory held out.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{MimuRecording, TrajectoryKind};
use crate::window::{make_windows, Window, WINDOW_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitId {
    D1,
    D2,
    D3,
    D4,
}

impl SplitId {
    pub const ALL: [SplitId; 4] = [SplitId::D1, SplitId::D2, SplitId::D3, SplitId::D4];
}

impl std::str::FromStr for SplitId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "D1" => Ok(SplitId::D1),
            "D2" => Ok(SplitId::D2),
            "D3" => Ok(SplitId::D3),
            "D4" => Ok(SplitId::D4),
            other => Err(Error::Config(format!("unknown split '{other}', expected D1..D4"))),
        }
    }
}

impl std::fmt::Display for SplitId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub id: SplitId,
    pub kind: TrajectoryKind,
    /// 1-based IMUs whose windows enter training; `None` means all available.
    pub train_imus: Option<BTreeSet<usize>>,
    pub test_trajectory: String,
    /// Stride between training windows, in samples.
    pub train_stride: usize,
}

impl SplitSpec {
    pub fn standard(id: SplitId) -> Self {
        let (kind, test) = match id {
            SplitId::D1 | SplitId::D3 => (TrajectoryKind::HorizontalPeriodic, "4"),
            SplitId::D2 | SplitId::D4 => (TrajectoryKind::VerticalPeriodic, "9"),
        };
        let train_imus = match id {
            SplitId::D1 | SplitId::D2 => Some(BTreeSet::from([1])),
            SplitId::D3 | SplitId::D4 => None,
        };
        SplitSpec {
            id,
            kind,
            train_imus,
            test_trajectory: test.into(),
            train_stride: WINDOW_SIZE,
        }
    }

    pub fn with_test_trajectory(mut self, id: impl Into<String>) -> Self {
        self.test_trajectory = id.into();
        self
    }

    pub fn with_train_stride(mut self, stride: usize) -> Self {
        self.train_stride = stride;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Window>,
    /// Non-overlapping epochs of the held-out trajectory, IMU 1.
    pub test: Vec<Window>,
    pub test_recording: MimuRecording,
    pub train_trajectories: Vec<String>,
}

pub fn build_split(spec: &SplitSpec, corpus: &[MimuRecording]) -> Result<Split> {
    let of_kind: Vec<&MimuRecording> = corpus.iter().filter(|r| r.kind() == spec.kind).collect();
    let test_rec = of_kind
        .iter()
        .find(|r| r.id() == spec.test_trajectory)
        .ok_or_else(|| Error::MissingTrajectory {
            kind: spec.kind.to_string(),
            id: spec.test_trajectory.clone(),
            available: of_kind.iter().map(|r| r.id().to_owned()).collect(),
        })?;
    let mut train = Vec::new();
    let mut train_trajectories = Vec::new();
    for rec in of_kind.iter().filter(|r| r.id() != spec.test_trajectory) {
        train_trajectories.push(rec.id().to_owned());
        for (i, seq) in rec.imus().iter().enumerate() {
            let imu = i + 1;
            if spec.train_imus.as_ref().is_some_and(|s| !s.contains(&imu)) {
                continue;
            }
            let w = make_windows(seq, rec.gt(), WINDOW_SIZE, spec.train_stride)?;
            train.extend(w.windows.into_iter().map(|w| w.with_origin(rec.id(), imu)));
        }
    }
    let test = make_windows(&test_rec.imus()[0], test_rec.gt(), WINDOW_SIZE, WINDOW_SIZE)?
        .windows
        .into_iter()
        .map(|w| w.with_origin(test_rec.id(), 1))
        .collect();
    Ok(Split {
        train,
        test,
        test_recording: (*test_rec).clone(),
        train_trajectories,
    })
}
