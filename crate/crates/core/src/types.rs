//! Inertial samples, sequences, ground truth and multi-IMU recordings.
//!
//! Everything here is plain immutable data. Constructors validate the
//! invariants once so downstream code can rely on them.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical sampling rate: one 120-sample window spans one second.
pub const CANONICAL_RATE_HZ: f64 = 120.0;

/// One accelerometer + gyroscope reading in the body frame.
///
/// `f` is specific force in m/s², `w` angular rate in rad/s. The sample is
/// taken to drive the integration interval `[t, t + 1/rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub f: Vector3<f64>,
    pub w: Vector3<f64>,
}

impl ImuSample {
    pub fn new(t: f64, f: Vector3<f64>, w: Vector3<f64>) -> Result<Self> {
        let s = ImuSample { t, f, w };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite IMU sample at t = {}",
                self.t
            )));
        }
        if self.t < 0.0 {
            return Err(Error::InvalidInput(format!("negative timestamp {}", self.t)));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.f.iter().all(|v| v.is_finite())
            && self.w.iter().all(|v| v.is_finite())
    }

    /// Channels in window column order `fx, fy, fz, wx, wy, wz`.
    pub fn channels(&self) -> [f64; 6] {
        [self.f.x, self.f.y, self.f.z, self.w.x, self.w.y, self.w.z]
    }
}

/// A fixed-rate stream of IMU samples with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuSequence {
    samples: Vec<ImuSample>,
    rate_hz: f64,
}

impl ImuSequence {
    pub fn new(samples: Vec<ImuSample>, rate_hz: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!("invalid sampling rate {rate_hz}")));
        }
        let nominal = 1.0 / rate_hz;
        for s in &samples {
            s.validate()?;
        }
        for (i, pair) in samples.windows(2).enumerate() {
            let dt = pair[1].t - pair[0].t;
            if dt <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "timestamps not strictly increasing at sample {}",
                    i + 1
                )));
            }
            if (dt - nominal).abs() >= 0.25 * nominal {
                return Err(Error::InvalidInput(format!(
                    "sample interval {dt} at sample {} deviates from nominal {nominal}",
                    i + 1
                )));
            }
        }
        Ok(ImuSequence { samples, rate_hz })
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    /// End of the time covered by the samples (last timestamp plus one period).
    pub fn end_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t + self.dt())
    }

    pub fn into_samples(self) -> Vec<ImuSample> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtPoint {
    pub t: f64,
    /// NED position in meters.
    pub p: Vector3<f64>,
}

/// Ground-truth positions (NED, meters) with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTrack {
    points: Vec<GtPoint>,
}

impl GroundTruthTrack {
    pub fn new(points: Vec<GtPoint>) -> Result<Self> {
        for p in &points {
            if !p.t.is_finite() || !p.p.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite ground-truth point at t = {}",
                    p.t
                )));
            }
        }
        if let Some(i) = points.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidInput(format!(
                "ground-truth timestamps not strictly increasing at point {}",
                i + 1
            )));
        }
        Ok(GroundTruthTrack { points })
    }

    pub fn points(&self) -> &[GtPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start_time(&self) -> Option<f64> {
        self.points.first().map(|p| p.t)
    }

    pub fn end_time(&self) -> Option<f64> {
        self.points.last().map(|p| p.t)
    }

    /// Linear interpolation; `None` outside the covered time span.
    pub fn interpolate(&self, t: f64) -> Option<Vector3<f64>> {
        const EDGE: f64 = 1e-9;
        let first = self.points.first()?;
        let last = self.points.last()?;
        if t < first.t - EDGE || t > last.t + EDGE {
            return None;
        }
        if t <= first.t {
            return Some(first.p);
        }
        if t >= last.t {
            return Some(last.p);
        }
        let hi = self.points.partition_point(|p| p.t <= t);
        let (a, b) = (&self.points[hi - 1], &self.points[hi]);
        let s = (t - a.t) / (b.t - a.t);
        Some(a.p + (b.p - a.p) * s)
    }

    /// Length of the horizontal-plus-vertical polyline through all points.
    pub fn path_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].p - w[0].p).norm())
            .sum()
    }

    /// Same track shifted by a constant NED offset.
    pub fn translated(&self, offset: Vector3<f64>) -> Self {
        GroundTruthTrack {
            points: self
                .points
                .iter()
                .map(|p| GtPoint { t: p.t, p: p.p + offset })
                .collect(),
        }
    }

    /// Same track with every timestamp shifted by `-t0`.
    pub fn rebased(&self, t0: f64) -> Result<Self> {
        GroundTruthTrack::new(
            self.points
                .iter()
                .map(|p| GtPoint { t: p.t - t0, p: p.p })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Straight,
    HorizontalPeriodic,
    VerticalPeriodic,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 3] = [
        TrajectoryKind::Straight,
        TrajectoryKind::HorizontalPeriodic,
        TrajectoryKind::VerticalPeriodic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrajectoryKind::Straight => "straight",
            TrajectoryKind::HorizontalPeriodic => "horizontal-periodic",
            TrajectoryKind::VerticalPeriodic => "vertical-periodic",
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrajectoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(TrajectoryKind::Straight),
            "horizontal-periodic" | "horizontal" => Ok(TrajectoryKind::HorizontalPeriodic),
            "vertical-periodic" | "vertical" => Ok(TrajectoryKind::VerticalPeriodic),
            other => Err(Error::Config(format!("unknown trajectory kind '{other}'"))),
        }
    }
}

/// `n` axis-aligned IMU sequences recorded together, plus ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MimuRecording {
    imus: Vec<ImuSequence>,
    gt: GroundTruthTrack,
    id: String,
    kind: TrajectoryKind,
}

impl MimuRecording {
    pub fn new(
        imus: Vec<ImuSequence>,
        gt: GroundTruthTrack,
        id: impl Into<String>,
        kind: TrajectoryKind,
    ) -> Result<Self> {
        let first = imus
            .first()
            .ok_or_else(|| Error::InvalidInput("recording needs at least one IMU".into()))?;
        for (i, seq) in imus.iter().enumerate().skip(1) {
            if seq.rate_hz() != first.rate_hz() {
                return Err(Error::InvalidInput(format!(
                    "IMU {} rate {} differs from IMU 1 rate {}",
                    i + 1,
                    seq.rate_hz(),
                    first.rate_hz()
                )));
            }
            if seq.len() != first.len() {
                return Err(Error::InvalidInput(format!(
                    "IMU {} has {} samples, IMU 1 has {}",
                    i + 1,
                    seq.len(),
                    first.len()
                )));
            }
        }
        Ok(MimuRecording {
            imus,
            gt,
            id: id.into(),
            kind,
        })
    }

    pub fn imus(&self) -> &[ImuSequence] {
        &self.imus
    }

    /// IMU by 1-based index, matching the numbering used for subsets.
    pub fn imu(&self, index: usize) -> Option<&ImuSequence> {
        index.checked_sub(1).and_then(|i| self.imus.get(i))
    }

    pub fn n_imus(&self) -> usize {
        self.imus.len()
    }

    pub fn gt(&self) -> &GroundTruthTrack {
        &self.gt
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn rate_hz(&self) -> f64 {
        self.imus[0].rate_hz()
    }

    /// Recording with the IMU order permuted; `order` holds 0-based indices.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let imus = order
            .iter()
            .map(|&i| {
                self.imus
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("no IMU at index {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        MimuRecording::new(imus, self.gt.clone(), self.id.clone(), self.kind)
    }
}
