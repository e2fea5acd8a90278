//! Model-based quadrotor dead reckoning.
//!
//! Peaks of the smoothed accelerometer magnitude split a periodic flight
//! into segments; each segment's length comes from the Weinberg estimator
//! `d = K (a_max - a_min)^(1/4)` and its direction from gyro-integrated
//! heading. The result is a 2-D track with one point per peak.

use std::collections::BTreeSet;

use nalgebra::{Vector2, Vector3};

use crate::attitude::{circular_mean, quat_integrate, quat_to_euler, Attitude};
use crate::error::{Error, Result};
use crate::eval::{SolutionPoint, SolutionSource, TrajectorySolution};
use crate::types::ImuSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QdrParams {
    /// Weinberg gain K.
    pub gain: f64,
    /// Minimum spacing between accepted peaks, samples.
    pub min_separation: usize,
    /// Moving-average half width applied to the magnitude, samples.
    pub smoothing_halfwidth: usize,
    /// Minimum peak prominence, m/s².
    pub prominence: f64,
}

impl Default for QdrParams {
    fn default() -> Self {
        QdrParams {
            gain: 0.48,
            min_separation: 60,
            smoothing_halfwidth: 10,
            prominence: 0.5,
        }
    }
}

impl QdrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain.is_finite() && self.gain > 0.0) || self.min_separation < 1 {
            return Err(Error::InvalidInput(format!("invalid QDR parameters {self:?}")));
        }
        if !(self.prominence.is_finite() && self.prominence >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "prominence threshold must be non-negative, got {}",
                self.prominence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakSet {
    pub indices: Vec<usize>,
    /// Smoothed magnitude at each peak, m/s².
    pub magnitudes: Vec<f64>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn accel_magnitude(seq: &ImuSequence) -> Vec<f64> {
    seq.samples().iter().map(|s| s.f.norm()).collect()
}

/// Centered moving average; the window is clipped at the ends.
pub fn moving_average(x: &[f64], halfwidth: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(halfwidth);
            let hi = (i + halfwidth + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Topographic prominence: height of `s[i]` above the higher of the two
/// minima reached before the signal rises above `s[i]` on either side.
pub fn prominence(s: &[f64], i: usize) -> f64 {
    let base = |it: &mut dyn Iterator<Item = &f64>| {
        it.take_while(|&&v| v <= s[i]).cloned().fold(f64::INFINITY, f64::min)
    };
    let left = base(&mut s[..=i].iter().rev());
    let right = base(&mut s[i..].iter());
    s[i] - left.max(right)
}

/// Strict local maxima; a flat top counts once, at its middle sample.
fn local_maxima(s: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < s.len() {
        if s[i] > s[i - 1] {
            let mut j = i;
            while j + 1 < s.len() && s[j + 1] == s[i] {
                j += 1;
            }
            if j + 1 < s.len() && s[j + 1] < s[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Peak picking on an already smoothed signal.
pub fn find_peaks(s: &[f64], min_separation: usize, prominence: f64) -> PeakSet {
    if s.len() < 3 {
        return PeakSet::default();
    }
    let mut candidates: Vec<usize> = local_maxima(s)
        .into_iter()
        .filter(|&i| self::prominence(s, i) > prominence)
        .collect();
    // Tallest first; the earlier index wins exact ties.
    candidates.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut accepted = BTreeSet::new();
    for i in candidates {
        let lo = i.saturating_sub(min_separation - 1);
        let clash = accepted.range(lo..i + min_separation).next().is_some();
        if !clash {
            accepted.insert(i);
        }
    }
    let indices: Vec<usize> = accepted.into_iter().collect();
    PeakSet {
        magnitudes: indices.iter().map(|&i| s[i]).collect(),
        indices,
    }
}

pub fn detect_peaks(seq: &ImuSequence, params: &QdrParams) -> Result<PeakSet> {
    params.validate()?;
    if seq.is_empty() {
        return Err(Error::InvalidInput("cannot detect peaks in an empty sequence".into()));
    }
    let smoothed = moving_average(&accel_magnitude(seq), params.smoothing_halfwidth);
    Ok(find_peaks(&smoothed, params.min_separation, params.prominence))
}

/// Weinberg peak-to-peak distance for one segment of accelerometer magnitude.
pub fn weinberg_distance(segment: &[f64], gain: f64) -> Result<f64> {
    if segment.is_empty() {
        return Err(Error::InvalidInput("empty Weinberg segment".into()));
    }
    let max = segment.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = segment.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(gain * (max - min).powf(0.25))
}

/// Gain that makes the Weinberg estimates of `segments` sum to `distance`.
pub fn calibrate_gain(segments: &[&[f64]], distance: f64) -> Result<f64> {
    let unit: f64 = segments
        .iter()
        .map(|s| weinberg_distance(s, 1.0))
        .sum::<Result<f64>>()?;
    if unit <= 0.0 {
        return Err(Error::InvalidInput("flat segments cannot calibrate a gain".into()));
    }
    Ok(distance / unit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadingTrack {
    /// Boundary times: the sequence start, then the end of every sample.
    pub t: Vec<f64>,
    pub yaw: Vec<f64>,
}

/// Gyro-only heading from a level start at `init_yaw`.
pub fn estimate_heading(seq: &ImuSequence, init_yaw: f64) -> Result<HeadingTrack> {
    let samples = seq.samples();
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot integrate heading of an empty sequence".into()))?;
    let mut att = Attitude::from_yaw(init_yaw);
    let mut t = Vec::with_capacity(samples.len() + 1);
    let mut yaw = Vec::with_capacity(samples.len() + 1);
    t.push(first.t);
    yaw.push(quat_to_euler(&att).yaw);
    for (i, s) in samples.iter().enumerate() {
        let dt = samples.get(i + 1).map_or(seq.dt(), |n| n.t - s.t);
        att = quat_integrate(&att, &s.w, dt)?;
        t.push(s.t + dt);
        yaw.push(quat_to_euler(&att).yaw);
    }
    Ok(HeadingTrack { t, yaw })
}

pub fn qdr_step(pos: Vector2<f64>, d: f64, yaw: f64) -> Vector2<f64> {
    let (s, c) = yaw.sin_cos();
    pos + Vector2::new(d * c, d * s)
}

#[derive(Debug, Clone)]
pub struct QdrRun {
    pub solution: TrajectorySolution,
    pub peaks: PeakSet,
    /// Weinberg distance of every peak-to-peak segment.
    pub distances: Vec<f64>,
    pub diagnostic: Option<String>,
}

/// Full QDR pipeline. `init_pos` is the (N, E) position at the first peak.
pub fn qdr_run(
    seq: &ImuSequence,
    params: &QdrParams,
    init_pos: Vector2<f64>,
    init_yaw: f64,
) -> Result<QdrRun> {
    let peaks = detect_peaks(seq, params)?;
    if peaks.len() < 2 {
        return Ok(QdrRun {
            solution: TrajectorySolution::empty(SolutionSource::Qdr),
            diagnostic: Some(format!(
                "found {} peak(s); QDR needs at least two, and a periodic trajectory to produce them",
                peaks.len()
            )),
            peaks,
            distances: Vec::new(),
        });
    }
    let smoothed = moving_average(&accel_magnitude(seq), params.smoothing_halfwidth);
    let heading = estimate_heading(seq, init_yaw)?;
    let times = |i: usize| seq.samples()[i].t;

    let mut pos = init_pos;
    let mut points = vec![SolutionPoint {
        t: times(peaks.indices[0]),
        p: Vector3::new(pos.x, pos.y, 0.0),
    }];
    let mut distances = Vec::with_capacity(peaks.len() - 1);
    for pair in peaks.indices.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let d = weinberg_distance(&smoothed[a..=b], params.gain)?;
        let yaw = circular_mean(&[heading.yaw[a], heading.yaw[b]]).unwrap_or(init_yaw);
        pos = qdr_step(pos, d, yaw);
        distances.push(d);
        points.push(SolutionPoint {
            t: times(b),
            p: Vector3::new(pos.x, pos.y, 0.0),
        });
    }
    Ok(QdrRun {
        solution: TrajectorySolution::new(points, SolutionSource::Qdr)?,
        peaks,
        distances,
        diagnostic: None,
    })
}
