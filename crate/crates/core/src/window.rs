//! Fixed-length epochs cut from an IMU stream, labelled from ground truth.

use crate::error::{Error, Result};
use crate::types::{GroundTruthTrack, ImuSequence};

pub const WINDOW_SIZE: usize = 120;
pub const CHANNELS: usize = 6;

/// Where a window was cut from. Empty for ad-hoc windows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct WindowOrigin {
    pub trajectory: String,
    /// 1-based IMU index; 0 for averaged or unknown sources.
    pub imu: usize,
}

/// One epoch of raw inertial data: rows are samples, columns
/// `fx, fy, fz, wx, wy, wz`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub x: Vec<[f64; CHANNELS]>,
    pub t_start: f64,
    pub t_end: f64,
    /// Horizontal (N, E) displacement norm over the epoch, m.
    pub label_distance: f64,
    /// Altitude gain over the epoch (-delta D), m.
    pub label_altitude: f64,
    pub origin: WindowOrigin,
}

impl Window {
    pub fn new(
        x: Vec<[f64; CHANNELS]>,
        t_start: f64,
        t_end: f64,
        label_distance: f64,
        label_altitude: f64,
    ) -> Result<Self> {
        let w = Window {
            x,
            t_start,
            t_end,
            label_distance,
            label_altitude,
            origin: WindowOrigin::default(),
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != WINDOW_SIZE {
            return Err(Error::Shape(format!(
                "window has {} rows, expected {WINDOW_SIZE}",
                self.x.len()
            )));
        }
        if !self.x.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("window contains non-finite samples".into()));
        }
        if !self.label_distance.is_finite()
            || !self.label_altitude.is_finite()
            || self.label_distance < 0.0
        {
            return Err(Error::InvalidInput(format!(
                "invalid window labels ({}, {})",
                self.label_distance, self.label_altitude
            )));
        }
        Ok(())
    }

    pub fn label(&self, target: Target) -> f64 {
        match target {
            Target::Distance => self.label_distance,
            Target::Altitude => self.label_altitude,
        }
    }

    pub fn with_origin(mut self, trajectory: &str, imu: usize) -> Self {
        self.origin = WindowOrigin {
            trajectory: trajectory.to_owned(),
            imu,
        };
        self
    }
}

/// Which increment a network regresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Distance,
    Altitude,
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(Target::Distance),
            "altitude" | "height" => Ok(Target::Altitude),
            other => Err(Error::Config(format!("unknown target '{other}'"))),
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Target::Distance => "distance",
            Target::Altitude => "altitude",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Windowing {
    pub windows: Vec<Window>,
    /// Windows skipped because ground truth did not cover their span.
    pub dropped_gt_gaps: usize,
}

/// Cut `seq` into `size`-sample windows every `stride` samples.
///
/// A window starting at sample `i` spans `[t_i, t_i + size / rate)`. Labels
/// come from ground truth interpolated linearly at both boundaries.
pub fn make_windows(
    seq: &ImuSequence,
    gt: &GroundTruthTrack,
    size: usize,
    stride: usize,
) -> Result<Windowing> {
    if size == 0 || stride == 0 {
        return Err(Error::InvalidInput(format!(
            "window size and stride must be positive (got {size}, {stride})"
        )));
    }
    let samples = seq.samples();
    let mut out = Windowing::default();
    if samples.len() < size {
        return Ok(out);
    }
    let span = size as f64 / seq.rate_hz();
    let mut start = 0;
    while start + size <= samples.len() {
        let t_start = samples[start].t;
        let t_end = t_start + span;
        match (gt.interpolate(t_start), gt.interpolate(t_end)) {
            (Some(p0), Some(p1)) => {
                let d = p1 - p0;
                let x = samples[start..start + size]
                    .iter()
                    .map(|s| s.channels())
                    .collect();
                out.windows.push(Window {
                    x,
                    t_start,
                    t_end,
                    label_distance: d.x.hypot(d.y),
                    label_altitude: -d.z,
                    origin: WindowOrigin::default(),
                });
            }
            _ => out.dropped_gt_gaps += 1,
        }
        start += stride;
    }
    if out.dropped_gt_gaps > 0 {
        log::warn!(
            "{} window(s) dropped: ground truth does not cover their span",
            out.dropped_gt_gaps
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{GtPoint, ImuSample};
    use nalgebra::Vector3;

    fn still_sequence(n: usize) -> ImuSequence {
        ImuSequence::new(
            (0..n)
                .map(|k| ImuSample {
                    t: k as f64 / 120.0,
                    f: Vector3::new(0.0, 0.0, -9.794),
                    w: Vector3::zeros(),
                })
                .collect(),
            120.0,
        )
        .unwrap()
    }

    fn line_gt(from: Vector3<f64>, to: Vector3<f64>, t1: f64) -> GroundTruthTrack {
        GroundTruthTrack::new(vec![GtPoint { t: 0.0, p: from }, GtPoint { t: t1, p: to }]).unwrap()
    }

    #[test]
    fn labels_are_planar_norm_and_altitude_gain() {
        let seq = still_sequence(120);
        let gt = line_gt(Vector3::zeros(), Vector3::new(3.0, 4.0, -1.0), 1.0);
        let w = make_windows(&seq, &gt, 120, 120).unwrap();
        assert_eq!(w.windows.len(), 1);
        assert!((w.windows[0].label_distance - 5.0).abs() < 1e-12);
        assert!((w.windows[0].label_altitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_gt_gives_zero_labels() {
        let seq = still_sequence(240);
        let gt = line_gt(Vector3::new(1.0, 2.0, 3.0), Vector3::new(1.0, 2.0, 3.0), 2.0);
        let w = make_windows(&seq, &gt, 120, 120).unwrap();
        assert_eq!(w.windows.len(), 2);
        for win in &w.windows {
            assert_eq!(win.label_distance, 0.0);
            assert_eq!(win.label_altitude, 0.0);
        }
    }

    #[test]
    fn short_sequence_gives_no_windows() {
        let seq = still_sequence(119);
        let gt = line_gt(Vector3::zeros(), Vector3::zeros(), 1.0);
        assert!(make_windows(&seq, &gt, 120, 120).unwrap().windows.is_empty());
    }

    #[test]
    fn gt_gap_drops_window() {
        let seq = still_sequence(360);
        // Covers only the first two epochs.
        let gt = line_gt(Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0), 2.0);
        let w = make_windows(&seq, &gt, 120, 120).unwrap();
        assert_eq!(w.windows.len(), 2);
        assert_eq!(w.dropped_gt_gaps, 1);
    }

    #[test]
    fn window_count_matches_index_enumeration() {
        let n = 27 * 60 * 120;
        let seq = still_sequence(n);
        let gt = line_gt(Vector3::zeros(), Vector3::new(100.0, 0.0, 0.0), n as f64 / 120.0);
        for (size, stride) in [(120, 120), (120, 60), (120, 7)] {
            let mut starts = Vec::new();
            for i in 0..n {
                if i % stride == 0 && i + size <= n {
                    starts.push(i);
                }
            }
            let w = make_windows(&seq, &gt, size, stride).unwrap();
            assert_eq!(w.windows.len(), starts.len());
            if stride == size {
                assert_eq!(w.windows.len(), 27 * 60);
            }
            for (win, &i) in w.windows.iter().zip(&starts) {
                assert_eq!(win.t_start, seq.samples()[i].t);
            }
        }
    }

    #[test]
    fn rejects_zero_stride() {
        let seq = still_sequence(120);
        let gt = line_gt(Vector3::zeros(), Vector3::zeros(), 1.0);
        assert!(make_windows(&seq, &gt, 120, 0).is_err());
    }
}
