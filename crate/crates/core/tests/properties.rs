//! Cross-module invariants, mostly as randomized properties.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use proptest::prelude::*;

use mimu_dr::attitude::{quat_integrate, Attitude};
use mimu_dr::eval::{reconstruct, rmse};
use mimu_dr::qdr::{accel_magnitude, calibrate_gain, detect_peaks, moving_average, qdr_run, QdrParams};
use mimu_dr::quadnet::mse_loss;
use mimu_dr::strapdown::DEFAULT_GRAVITY;
use mimu_dr::synth::{gen_trajectory, trajectory_to_imu, Kinematics, TrajectorySpec};
use mimu_dr::{make_windows, GroundTruthTrack, GtPoint, ImuSample, ImuSequence, TrajectoryKind, WINDOW_SIZE};

fn horizontal(heading: f64, speed: f64, duration: f64) -> TrajectorySpec {
    TrajectorySpec {
        speed,
        duration,
        heading,
        ..TrajectorySpec::preset(TrajectoryKind::HorizontalPeriodic)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attitude_stays_unit_norm(rates in prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..400)) {
        let mut q = Attitude::from_euler(0.1, -0.2, 0.3);
        for w in rates {
            q = quat_integrate(&q, &Vector3::from(w), 1.0 / 120.0).unwrap();
            prop_assert!(q.norm_error() < 1e-12);
        }
    }

    #[test]
    fn rmse_squared_is_mse(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..200)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = rmse(&x, &y).unwrap();
        let m = mse_loss(&y, &x).unwrap();
        prop_assert!((r * r - m).abs() <= 1e-12 * m.max(1.0));
    }

    #[test]
    fn reconstruct_length_is_sum_of_clamped_distances(
        steps in prop::collection::vec((-0.5f64..5.0, -1.0f64..1.0, -PI..PI), 1..60),
    ) {
        let d: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let dh: Vec<f64> = steps.iter().map(|s| s.1).collect();
        let yaw: Vec<f64> = steps.iter().map(|s| s.2).collect();
        let t: Vec<f64> = (1..=d.len()).map(|k| k as f64).collect();
        let r = reconstruct(&d, &dh, &yaw, &t, Vector3::zeros()).unwrap();
        // Planar length, since height changes are not part of the distance increment.
        let mut prev = Vector2::zeros();
        let mut planar = 0.0;
        for p in r.solution.samples() {
            let q = Vector2::new(p.p.x, p.p.y);
            planar += (q - prev).norm();
            prev = q;
        }
        let want: f64 = d.iter().map(|v| v.max(0.0)).sum();
        prop_assert!((planar - want).abs() < 1e-9 * want.max(1.0));
        prop_assert_eq!(r.clamped, d.iter().filter(|v| **v < 0.0).count());
    }

    #[test]
    fn labels_ignore_ground_truth_translation(
        seed_heading in -PI..PI,
        off in prop::array::uniform3(-1e4f64..1e4),
    ) {
        let traj = gen_trajectory(&horizontal(seed_heading, 4.0, 6.0), 120.0).unwrap();
        let imu = trajectory_to_imu(&traj, 6.0, 120.0, DEFAULT_GRAVITY).unwrap();
        let a = make_windows(&imu, &traj.track, WINDOW_SIZE, 60).unwrap().windows;
        let moved = traj.track.translated(Vector3::from(off));
        let b = make_windows(&imu, &moved, WINDOW_SIZE, 60).unwrap().windows;
        prop_assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u.label_distance - v.label_distance).abs() < 1e-9);
            prop_assert!((u.label_altitude - v.label_altitude).abs() < 1e-9);
        }
    }

    #[test]
    fn qdr_depends_on_start_only_by_translation(dn in -500.0f64..500.0, de in -500.0f64..500.0) {
        let traj = gen_trajectory(&horizontal(0.4, 3.7, 20.0), 120.0).unwrap();
        let imu = trajectory_to_imu(&traj, 20.0, 120.0, DEFAULT_GRAVITY).unwrap();
        let p = QdrParams::default();
        let a = qdr_run(&imu, &p, Vector2::zeros(), 0.4).unwrap();
        let b = qdr_run(&imu, &p, Vector2::new(dn, de), 0.4).unwrap();
        prop_assert_eq!(a.solution.len(), b.solution.len());
        for (u, v) in a.solution.samples().iter().zip(b.solution.samples()) {
            prop_assert!((v.p - u.p - Vector3::new(dn, de, 0.0)).norm() < 1e-9);
        }
    }
}

#[test]
fn non_overlapping_windows_tile_the_sequence() {
    let samples = (0..1000)
        .map(|k| ImuSample::new(k as f64 / 120.0, Vector3::new(0.0, 0.0, -9.8), Vector3::zeros()).unwrap())
        .collect();
    let seq = ImuSequence::new(samples, 120.0).unwrap();
    let gt = GroundTruthTrack::new(vec![
        GtPoint { t: 0.0, p: Vector3::zeros() },
        GtPoint { t: 10.0, p: Vector3::new(10.0, 0.0, 0.0) },
    ])
    .unwrap();
    let w = make_windows(&seq, &gt, WINDOW_SIZE, WINDOW_SIZE).unwrap().windows;
    assert_eq!(w.len(), 1000 / WINDOW_SIZE);
    let end = seq.end_time().unwrap() + seq.dt();
    for pair in w.windows(2) {
        assert!((pair[1].t_start - pair[0].t_end).abs() < 1e-12);
    }
    assert_eq!(w[0].t_start, 0.0);
    assert!(w.last().unwrap().t_end <= end + 1e-12);
}

#[test]
fn synthetic_labels_match_analytic_displacement() {
    for kind in TrajectoryKind::ALL {
        let spec = TrajectorySpec {
            duration: 20.0,
            heading: 1.1,
            ..TrajectorySpec::preset(kind)
        };
        let traj = gen_trajectory(&spec, 120.0).unwrap();
        let imu = trajectory_to_imu(&traj, spec.duration, 120.0, DEFAULT_GRAVITY).unwrap();
        let w = make_windows(&imu, &traj.track, WINDOW_SIZE, 30).unwrap().windows;
        assert!(w.len() > 50);
        for win in &w {
            let d = traj.position(win.t_end) - traj.position(win.t_start);
            assert!((win.label_distance - d.x.hypot(d.y)).abs() < 1e-6, "{kind}");
            assert!((win.label_altitude + d.z).abs() < 1e-6, "{kind}");
        }
    }
}

/// Arc length of the horizontal path over `[a, b]` by composite Simpson.
fn planar_arc<K: Kinematics>(k: &K, a: f64, b: f64) -> f64 {
    let n = 400;
    let h = (b - a) / n as f64;
    let speed = |t: f64| {
        let v = k.velocity(t);
        v.x.hypot(v.y)
    };
    let mut s = speed(a) + speed(b);
    for i in 1..n {
        s += speed(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn oracle_increments_rebuild_the_epoch_positions() {
    for kind in [TrajectoryKind::HorizontalPeriodic, TrajectoryKind::VerticalPeriodic] {
        let spec = TrajectorySpec {
            duration: 30.0,
            heading: -0.7,
            ..TrajectorySpec::preset(kind)
        };
        let traj = gen_trajectory(&spec, 120.0).unwrap();
        let n = 30;
        let t: Vec<f64> = (0..=n).map(|k| k as f64).collect();
        let p: Vec<Vector3<f64>> = t.iter().map(|&s| traj.position(s)).collect();
        let chord: Vec<f64> = p.windows(2).map(|w| (w[1] - w[0]).xy().norm()).collect();
        let dh: Vec<f64> = p.windows(2).map(|w| -(w[1].z - w[0].z)).collect();
        let dir: Vec<f64> = p.windows(2).map(|w| (w[1].y - w[0].y).atan2(w[1].x - w[0].x)).collect();
        let arc: Vec<f64> = t.windows(2).map(|w| planar_arc(&traj, w[0], w[1])).collect();

        // Exact chords along the chord direction land on ground truth.
        let r = reconstruct(&chord, &dh, &dir, &t[1..], p[0]).unwrap();
        for (s, want) in r.solution.samples().iter().zip(&p[1..]) {
            assert!((s.p - want).norm() < 1e-9);
        }
        // Arc-length increments overshoot by no more than the accumulated
        // arc-minus-chord excess.
        let r = reconstruct(&arc, &dh, &dir, &t[1..], p[0]).unwrap();
        let mut excess = 0.0;
        for (k, s) in r.solution.samples().iter().enumerate() {
            assert!(arc[k] + 1e-9 >= chord[k]);
            excess += arc[k] - chord[k];
            let err = (s.p - p[k + 1]).norm();
            assert!(err <= excess + 1e-9, "{kind} epoch {k}: {err} > {excess}");
        }
        if kind == TrajectoryKind::HorizontalPeriodic {
            assert!(excess > 0.0);
        }
    }
}

#[test]
fn calibrated_qdr_endpoint_within_five_percent() {
    for heading in [0.0, 0.9, -2.4] {
        let spec = horizontal(heading, 3.7, 40.0);
        let traj = gen_trajectory(&spec, 120.0).unwrap();
        let imu = trajectory_to_imu(&traj, spec.duration, 120.0, DEFAULT_GRAVITY).unwrap();
        let mut params = QdrParams::default();
        let peaks = detect_peaks(&imu, &params).unwrap();
        assert!(peaks.len() > 10, "{} peaks", peaks.len());

        // Calibrate on the segments spanning the first full period.
        let mag = moving_average(&accel_magnitude(&imu), params.smoothing_halfwidth);
        let t = |i: usize| imu.samples()[i].t;
        let idx = &peaks.indices;
        let segs: Vec<&[f64]> = idx.windows(2).take(2).map(|w| &mag[w[0]..=w[1]]).collect();
        let advance = (traj.position(t(idx[2])) - traj.position(t(idx[0]))).xy().norm();
        params.gain = calibrate_gain(&segs, advance).unwrap();

        let start = traj.position(t(idx[0]));
        let run = qdr_run(&imu, &params, start.xy(), traj.yaw(0.0)).unwrap();
        let last = run.solution.last().unwrap();
        let truth = traj.position(last.t);
        let length = traj.track.path_length();
        let err = (last.p.xy() - truth.xy()).norm();
        assert!(err < 0.05 * length, "heading {heading}: endpoint error {err} on {length} m");
        let total: f64 = run.distances.iter().sum();
        assert!((run.solution.path_length() - total).abs() < 1e-9);
    }
}
