//! Analytic trajectories, ideal IMU synthesis and sensor error injection.
//!
//! The synthetic IMU is the exact inverse of the strapdown mechanization:
//! attitude is level with yaw along the horizontal path, and each sample
//! carries the kinematics at the middle of the interval it drives.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::attitude::Attitude;
use crate::error::{Error, Result};
use crate::types::{GroundTruthTrack, GtPoint, ImuSample, ImuSequence, MimuRecording, TrajectoryKind};

/// Continuous-time kinematics of a level vehicle pointing along its path.
pub trait Kinematics {
    fn position(&self, t: f64) -> Vector3<f64>;
    fn velocity(&self, t: f64) -> Vector3<f64>;
    fn acceleration(&self, t: f64) -> Vector3<f64>;
    fn yaw(&self, t: f64) -> f64;
    fn yaw_rate(&self, t: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Forward speed along the base heading, m/s.
    pub speed: f64,
    pub duration: f64,
    /// Lateral (horizontal) or vertical oscillation amplitude, m.
    pub amplitude: f64,
    pub period: f64,
    /// Base heading, rad from north.
    pub heading: f64,
}

impl TrajectorySpec {
    /// Scenario at the scale of the field recordings: 5.4 m/s straight lines of
    /// about 100 m, 3.7 m/s horizontal and 4.5 m/s vertical periodic flights.
    pub fn preset(kind: TrajectoryKind) -> Self {
        match kind {
            TrajectoryKind::Straight => TrajectorySpec {
                kind,
                speed: 5.4,
                duration: 18.0,
                amplitude: 0.0,
                period: 0.0,
                heading: 0.0,
            },
            TrajectoryKind::HorizontalPeriodic => TrajectorySpec {
                kind,
                speed: 3.7,
                duration: 30.0,
                amplitude: 1.5,
                period: 4.0,
                heading: 0.0,
            },
            TrajectoryKind::VerticalPeriodic => TrajectorySpec {
                kind,
                speed: 4.5,
                duration: 22.0,
                amplitude: 1.5,
                period: 4.0,
                heading: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.speed, self.duration, self.amplitude, self.period, self.heading]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.speed <= 0.0 || self.duration <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "trajectory needs positive speed and duration: {self:?}"
            )));
        }
        if self.kind != TrajectoryKind::Straight && (self.amplitude <= 0.0 || self.period <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "periodic trajectory needs positive amplitude and period: {self:?}"
            )));
        }
        Ok(())
    }

    fn omega(&self) -> f64 {
        TAU / self.period
    }
}

/// A generated trajectory: the analytic model plus its sampled ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticTrajectory {
    pub spec: TrajectorySpec,
    pub track: GroundTruthTrack,
}

impl SyntheticTrajectory {
    fn along(&self) -> Vector3<f64> {
        Vector3::new(self.spec.heading.cos(), self.spec.heading.sin(), 0.0)
    }

    fn across(&self) -> Vector3<f64> {
        Vector3::new(-self.spec.heading.sin(), self.spec.heading.cos(), 0.0)
    }

    /// Offset from the straight base line and its first two derivatives.
    fn oscillation(&self, t: f64) -> (f64, f64, f64) {
        if self.spec.kind == TrajectoryKind::Straight {
            return (0.0, 0.0, 0.0);
        }
        let (a, w) = (self.spec.amplitude, self.spec.omega());
        let (s, c) = (w * t).sin_cos();
        (a * s, a * w * c, -a * w * w * s)
    }
}

impl Kinematics for SyntheticTrajectory {
    fn position(&self, t: f64) -> Vector3<f64> {
        let (o, _, _) = self.oscillation(t);
        let base = self.along() * (self.spec.speed * t);
        match self.spec.kind {
            TrajectoryKind::Straight => base,
            TrajectoryKind::HorizontalPeriodic => base + self.across() * o,
            TrajectoryKind::VerticalPeriodic => base + Vector3::new(0.0, 0.0, -o),
        }
    }

    fn velocity(&self, t: f64) -> Vector3<f64> {
        let (_, o1, _) = self.oscillation(t);
        let base = self.along() * self.spec.speed;
        match self.spec.kind {
            TrajectoryKind::Straight => base,
            TrajectoryKind::HorizontalPeriodic => base + self.across() * o1,
            TrajectoryKind::VerticalPeriodic => base + Vector3::new(0.0, 0.0, -o1),
        }
    }

    fn acceleration(&self, t: f64) -> Vector3<f64> {
        let (_, _, o2) = self.oscillation(t);
        match self.spec.kind {
            TrajectoryKind::Straight => Vector3::zeros(),
            TrajectoryKind::HorizontalPeriodic => self.across() * o2,
            TrajectoryKind::VerticalPeriodic => Vector3::new(0.0, 0.0, -o2),
        }
    }

    fn yaw(&self, t: f64) -> f64 {
        match self.spec.kind {
            TrajectoryKind::HorizontalPeriodic => {
                let (_, o1, _) = self.oscillation(t);
                self.spec.heading + o1.atan2(self.spec.speed)
            }
            _ => self.spec.heading,
        }
    }

    fn yaw_rate(&self, t: f64) -> f64 {
        match self.spec.kind {
            TrajectoryKind::HorizontalPeriodic => {
                let (_, o1, o2) = self.oscillation(t);
                let u = o1 / self.spec.speed;
                (o2 / self.spec.speed) / (1.0 + u * u)
            }
            _ => 0.0,
        }
    }
}

fn sample_count(duration: f64, rate_hz: f64) -> usize {
    (duration * rate_hz).round() as usize
}

/// Analytic trajectory with ground truth sampled at `rate_hz` over
/// `[0, duration]` inclusive.
pub fn gen_trajectory(spec: &TrajectorySpec, rate_hz: f64) -> Result<SyntheticTrajectory> {
    spec.validate()?;
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidInput(format!("invalid rate {rate_hz}")));
    }
    let mut traj = SyntheticTrajectory {
        spec: *spec,
        track: GroundTruthTrack::new(Vec::new())?,
    };
    let n = sample_count(spec.duration, rate_hz);
    let points = (0..=n)
        .map(|k| {
            let t = k as f64 / rate_hz;
            GtPoint { t, p: traj.position(t) }
        })
        .collect();
    traj.track = GroundTruthTrack::new(points)?;
    Ok(traj)
}

/// Error-free IMU readings reproducing `kin` over `[0, duration)`.
pub fn trajectory_to_imu<K: Kinematics + ?Sized>(
    kin: &K,
    duration: f64,
    rate_hz: f64,
    g: f64,
) -> Result<ImuSequence> {
    let dt = 1.0 / rate_hz;
    let gravity = Vector3::new(0.0, 0.0, g);
    let samples = (0..sample_count(duration, rate_hz))
        .map(|k| {
            let t = k as f64 * dt;
            let tm = t + 0.5 * dt;
            let att = Attitude::from_yaw(kin.yaw(tm));
            ImuSample {
                t,
                f: att.inverse_rotate(&(kin.acceleration(tm) - gravity)),
                w: Vector3::new(0.0, 0.0, kin.yaw_rate(tm)),
            }
        })
        .collect();
    ImuSequence::new(samples, rate_hz)
}

/// Constant bias plus seeded white noise, per sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuErrorModel {
    pub accel_bias: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    /// Per-sample accelerometer noise standard deviation, m/s².
    pub accel_sigma: f64,
    /// Per-sample gyroscope noise standard deviation, rad/s.
    pub gyro_sigma: f64,
    pub seed: u64,
}

impl ImuErrorModel {
    pub fn perfect() -> Self {
        ImuErrorModel {
            accel_bias: Vector3::zeros(),
            gyro_bias: Vector3::zeros(),
            accel_sigma: 0.0,
            gyro_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn white(accel_sigma: f64, gyro_sigma: f64, seed: u64) -> Self {
        ImuErrorModel {
            accel_sigma,
            gyro_sigma,
            seed,
            ..ImuErrorModel::perfect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.accel_sigma >= 0.0
            && self.gyro_sigma >= 0.0
            && self.accel_bias.iter().chain(self.gyro_bias.iter()).all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid IMU error model {self:?}")))
        }
    }
}

pub fn corrupt(seq: &ImuSequence, model: &ImuErrorModel) -> Result<ImuSequence> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut noise = |sigma: f64| -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for c in v.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *c = sigma * z;
        }
        v
    };
    let samples = seq
        .samples()
        .iter()
        .map(|s| {
            let nf = noise(model.accel_sigma);
            let nw = noise(model.gyro_sigma);
            ImuSample {
                t: s.t,
                f: s.f + model.accel_bias + nf,
                w: s.w + model.gyro_bias + nw,
            }
        })
        .collect();
    ImuSequence::new(samples, seq.rate_hz())
}

/// One ideal sequence corrupted independently for every model.
pub fn gen_mimu(
    traj: &SyntheticTrajectory,
    models: &[ImuErrorModel],
    rate_hz: f64,
    g: f64,
    id: impl Into<String>,
) -> Result<MimuRecording> {
    if models.is_empty() {
        return Err(Error::InvalidInput("need at least one IMU error model".into()));
    }
    let ideal = trajectory_to_imu(traj, traj.spec.duration, rate_hz, g)?;
    let imus = models
        .iter()
        .map(|m| corrupt(&ideal, m))
        .collect::<Result<Vec<_>>>()?;
    MimuRecording::new(imus, traj.track.clone(), id, traj.spec.kind)
}

/// A family of randomized trajectories of one kind, each flown by `n_imus`
/// independently corrupted sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub kind: TrajectoryKind,
    pub n_trajectories: usize,
    pub n_imus: usize,
    pub duration: f64,
    /// Forward speed drawn uniformly from this range, m/s.
    pub speed: (f64, f64),
    pub amplitude: (f64, f64),
    pub period: (f64, f64),
    /// Draw the base heading uniformly on the circle instead of using 0.
    pub random_heading: bool,
    pub accel_sigma: f64,
    pub gyro_sigma: f64,
    pub rate_hz: f64,
    pub gravity: f64,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(kind: TrajectoryKind, n_trajectories: usize, n_imus: usize, seed: u64) -> Self {
        let preset = TrajectorySpec::preset(kind);
        let periodic = kind != TrajectoryKind::Straight;
        CorpusSpec {
            kind,
            n_trajectories,
            n_imus,
            duration: preset.duration,
            speed: (3.7, 5.4),
            amplitude: if periodic { (1.0, 2.0) } else { (0.0, 0.0) },
            period: if periodic { (3.0, 5.0) } else { (0.0, 0.0) },
            random_heading: true,
            accel_sigma: 0.05,
            gyro_sigma: 0.002,
            rate_hz: crate::types::CANONICAL_RATE_HZ,
            gravity: crate::strapdown::DEFAULT_GRAVITY,
            seed,
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    use rand::Rng;
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Recordings with ids `"1".."n"`; the trajectory and per-IMU noise seeds
/// all derive from `spec.seed`.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<Vec<MimuRecording>> {
    if spec.n_trajectories == 0 || spec.n_imus == 0 {
        return Err(Error::InvalidInput("corpus needs at least one trajectory and one IMU".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (1..=spec.n_trajectories)
        .map(|i| {
            let heading = if spec.random_heading { draw(&mut rng, (-std::f64::consts::PI, std::f64::consts::PI)) } else { 0.0 };
            let tspec = TrajectorySpec {
                kind: spec.kind,
                speed: draw(&mut rng, spec.speed),
                duration: spec.duration,
                amplitude: draw(&mut rng, spec.amplitude),
                period: draw(&mut rng, spec.period),
                heading,
            };
            let traj = gen_trajectory(&tspec, spec.rate_hz)?;
            let models: Vec<ImuErrorModel> = (0..spec.n_imus)
                .map(|k| {
                    let seed = spec.seed.wrapping_mul(1_000_003).wrapping_add((i * 64 + k) as u64);
                    ImuErrorModel::white(spec.accel_sigma, spec.gyro_sigma, seed)
                })
                .collect();
            gen_mimu(&traj, &models, spec.rate_hz, spec.gravity, i.to_string())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: f64 = 9.794;

    #[test]
    fn straight_endpoint() {
        let spec = TrajectorySpec {
            speed: 5.0,
            duration: 10.0,
            heading: 0.4,
            ..TrajectorySpec::preset(TrajectoryKind::Straight)
        };
        let t = gen_trajectory(&spec, 120.0).unwrap();
        let pts = t.track.points();
        assert!(((pts.last().unwrap().p - pts[0].p).norm() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn vertical_altitude_range_is_twice_amplitude() {
        let spec = TrajectorySpec {
            amplitude: 1.25,
            period: 4.0,
            duration: 12.0,
            ..TrajectorySpec::preset(TrajectoryKind::VerticalPeriodic)
        };
        let t = gen_trajectory(&spec, 120.0).unwrap();
        let alts: Vec<f64> = t.track.points().iter().map(|p| -p.p.z).collect();
        let range = alts.iter().cloned().fold(f64::MIN, f64::max) - alts.iter().cloned().fold(f64::MAX, f64::min);
        assert!((range - 2.5).abs() < 1e-9);
    }

    #[test]
    fn straight_flight_reads_gravity_only() {
        let spec = TrajectorySpec::preset(TrajectoryKind::Straight);
        let t = gen_trajectory(&spec, 120.0).unwrap();
        let seq = trajectory_to_imu(&t, spec.duration, 120.0, G).unwrap();
        for s in seq.samples() {
            assert!((s.f - Vector3::new(0.0, 0.0, -G)).norm() < 1e-12);
            assert_eq!(s.w, Vector3::zeros());
        }
    }

    struct Circle {
        r: f64,
        rate: f64,
    }

    impl Kinematics for Circle {
        fn position(&self, t: f64) -> Vector3<f64> {
            let (s, c) = (self.rate * t).sin_cos();
            Vector3::new(self.r * s, self.r * (1.0 - c), 0.0)
        }
        fn velocity(&self, t: f64) -> Vector3<f64> {
            let (s, c) = (self.rate * t).sin_cos();
            Vector3::new(self.r * self.rate * c, self.r * self.rate * s, 0.0)
        }
        fn acceleration(&self, t: f64) -> Vector3<f64> {
            let (s, c) = (self.rate * t).sin_cos();
            let a = self.r * self.rate * self.rate;
            Vector3::new(-a * s, a * c, 0.0)
        }
        fn yaw(&self, t: f64) -> f64 {
            self.rate * t
        }
        fn yaw_rate(&self, _t: f64) -> f64 {
            self.rate
        }
    }

    #[test]
    fn circular_motion_shows_centripetal_force() {
        let c = Circle { r: 20.0, rate: 0.3 };
        let seq = trajectory_to_imu(&c, 10.0, 120.0, G).unwrap();
        for s in seq.samples() {
            let horiz = s.f.x.hypot(s.f.y);
            assert!((horiz - 0.09 * 20.0).abs() < 1e-9);
            // positive yaw rate turns right: centripetal force is along body +y
            assert!(s.f.x.abs() < 1e-9 && s.f.y > 0.0);
            assert!((s.w.z - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn yaw_rate_matches_finite_difference() {
        let spec = TrajectorySpec::preset(TrajectoryKind::HorizontalPeriodic);
        let t = gen_trajectory(&spec, 120.0).unwrap();
        let h = 1e-5;
        for k in 0..50 {
            let tt = k as f64 * 0.37;
            let fd = (t.yaw(tt + h) - t.yaw(tt - h)) / (2.0 * h);
            assert!((fd - t.yaw_rate(tt)).abs() < 1e-7);
            let va = (t.position(tt + h) - t.position(tt - h)) / (2.0 * h);
            assert!((va - t.velocity(tt)).norm() < 1e-6);
            let aa = (t.velocity(tt + h) - t.velocity(tt - h)) / (2.0 * h);
            assert!((aa - t.acceleration(tt)).norm() < 1e-6);
        }
    }

    #[test]
    fn corruption_identity_bias_and_determinism() {
        let spec = TrajectorySpec::preset(TrajectoryKind::HorizontalPeriodic);
        let t = gen_trajectory(&spec, 120.0).unwrap();
        let ideal = trajectory_to_imu(&t, spec.duration, 120.0, G).unwrap();
        assert_eq!(corrupt(&ideal, &ImuErrorModel::perfect()).unwrap(), ideal);

        let bias = ImuErrorModel {
            accel_bias: Vector3::new(0.1, -0.2, 0.3),
            gyro_bias: Vector3::new(0.01, 0.0, -0.01),
            ..ImuErrorModel::perfect()
        };
        let b = corrupt(&ideal, &bias).unwrap();
        for (x, y) in ideal.samples().iter().zip(b.samples()) {
            assert!((y.f - x.f - bias.accel_bias).norm() < 1e-12);
            assert!((y.w - x.w - bias.gyro_bias).norm() < 1e-12);
        }

        let m = ImuErrorModel::white(0.05, 0.002, 42);
        assert_eq!(corrupt(&ideal, &m).unwrap(), corrupt(&ideal, &m).unwrap());
        assert_ne!(corrupt(&ideal, &m).unwrap(), corrupt(&ideal, &ImuErrorModel { seed: 43, ..m }).unwrap());
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut s = TrajectorySpec::preset(TrajectoryKind::HorizontalPeriodic);
        s.period = 0.0;
        assert!(gen_trajectory(&s, 120.0).is_err());
        let mut s = TrajectorySpec::preset(TrajectoryKind::Straight);
        s.speed = -1.0;
        assert!(gen_trajectory(&s, 120.0).is_err());
        assert!(ImuErrorModel::white(-1.0, 0.0, 0).validate().is_err());
    }
}
