//! Pure-inertial strapdown mechanization in a local NED frame.
//!
//! Flat, non-rotating Earth with constant gravity. Each sample drives one
//! step of length `dt`; the specific force is rotated with the mid-step
//! attitude so that a yawing vehicle does not pick up a spurious along-track
//! acceleration.

use nalgebra::Vector3;

use crate::attitude::{quat_integrate, Attitude};
use crate::error::{Error, Result};
use crate::eval::{SolutionPoint, SolutionSource, TrajectorySolution};
use crate::types::{GroundTruthTrack, ImuSample, ImuSequence};

pub const DEFAULT_GRAVITY: f64 = 9.794;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    /// NED position, m.
    pub p: Vector3<f64>,
    /// NED velocity, m/s.
    pub v: Vector3<f64>,
    pub att: Attitude,
    pub t: f64,
}

impl NavState {
    pub fn at_rest(t: f64) -> Self {
        NavState {
            p: Vector3::zeros(),
            v: Vector3::zeros(),
            att: Attitude::identity(),
            t,
        }
    }

    /// Initial state from ground truth: position at `t0`, velocity from the
    /// first two fixes at or after `t0`, and a level attitude whose yaw follows
    /// that velocity.
    pub fn from_ground_truth(gt: &GroundTruthTrack, t0: f64) -> Result<Self> {
        let p = gt
            .interpolate(t0)
            .ok_or_else(|| Error::InvalidInput(format!("ground truth does not cover t = {t0}")))?;
        let pts = gt.points();
        let i = pts.partition_point(|q| q.t < t0 - 1e-9);
        let (a, b) = match (pts.get(i), pts.get(i + 1)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::InvalidInput(
                    "need two ground-truth fixes to initialize velocity".into(),
                ))
            }
        };
        let v = (b.p - a.p) / (b.t - a.t);
        let yaw = if v.x.hypot(v.y) > 1e-6 { v.y.atan2(v.x) } else { 0.0 };
        Ok(NavState {
            p,
            v,
            att: Attitude::from_yaw(yaw),
            t: t0,
        })
    }

    fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).all(|x| x.is_finite()) && self.t.is_finite()
    }
}

/// Advance the navigation state by one IMU sample.
pub fn ins_propagate(s: &NavState, sample: &ImuSample, dt: f64, g: f64) -> Result<NavState> {
    if !sample.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite IMU sample at t = {}",
            sample.t
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {dt}")));
    }
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::InvalidInput(format!("gravity must be positive, got {g}")));
    }
    let mid = quat_integrate(&s.att, &sample.w, 0.5 * dt)?;
    let att = quat_integrate(&s.att, &sample.w, dt)?;
    let acc = mid.rotate(&sample.f) + Vector3::new(0.0, 0.0, g);
    let next = NavState {
        p: s.p + s.v * dt + acc * (0.5 * dt * dt),
        v: s.v + acc * dt,
        att,
        t: s.t + dt,
    };
    if !next.is_finite() {
        return Err(Error::InvalidInput(format!(
            "navigation state became non-finite at t = {}",
            next.t
        )));
    }
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct InsRun {
    /// Initial state followed by the state after every sample.
    pub states: Vec<NavState>,
    pub solution: TrajectorySolution,
}

/// Fold [`ins_propagate`] over the whole sequence.
pub fn ins_run(seq: &ImuSequence, init: &NavState, g: f64) -> Result<InsRun> {
    let samples = seq.samples();
    if let Some(first) = samples.first() {
        if (first.t - init.t).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "initial state time {} does not match sequence start {}",
                init.t, first.t
            )));
        }
    }
    let mut states = Vec::with_capacity(samples.len() + 1);
    states.push(*init);
    let mut s = *init;
    for (i, sample) in samples.iter().enumerate() {
        let dt = samples.get(i + 1).map_or(seq.dt(), |n| n.t - sample.t);
        s = ins_propagate(&s, sample, dt, g)?;
        states.push(s);
    }
    let solution = TrajectorySolution::new(
        states.iter().map(|s| SolutionPoint { t: s.t, p: s.p }).collect(),
        SolutionSource::Ins,
    )?;
    Ok(InsRun { states, solution })
}
