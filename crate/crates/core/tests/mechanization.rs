//! Strapdown mechanization against the synthetic inverse-mechanization oracle.

use mimu_dr::strapdown::{ins_run, NavState, DEFAULT_GRAVITY};
use mimu_dr::synth::{corrupt, gen_trajectory, trajectory_to_imu, ImuErrorModel, Kinematics, TrajectorySpec};
use mimu_dr::attitude::Attitude;
use mimu_dr::TrajectoryKind;

const G: f64 = DEFAULT_GRAVITY;

fn exact_init<K: Kinematics>(k: &K) -> NavState {
    NavState {
        p: k.position(0.0),
        v: k.velocity(0.0),
        att: Attitude::from_yaw(k.yaw(0.0)),
        t: 0.0,
    }
}

#[test]
fn round_trip_all_kinds_sixty_seconds() {
    for kind in TrajectoryKind::ALL {
        let spec = TrajectorySpec {
            duration: 60.0,
            heading: 0.6,
            amplitude: 2.0,
            period: 4.0,
            ..TrajectorySpec::preset(kind)
        };
        let traj = gen_trajectory(&spec, 120.0).unwrap();
        let imu = trajectory_to_imu(&traj, spec.duration, 120.0, G).unwrap();
        let run = ins_run(&imu, &exact_init(&traj), G).unwrap();
        let max_err = run
            .states
            .iter()
            .map(|s| (s.p - traj.position(s.t)).norm())
            .fold(0.0, f64::max);
        println!("{kind}: max round-trip error {max_err:.3e} m");
        assert!(max_err < 0.01, "{kind}: {max_err}");
        for s in &run.states {
            assert!(s.att.norm_error() < 1e-9);
        }
    }
}

#[test]
fn white_accel_noise_error_grows_with_time() {
    let spec = TrajectorySpec {
        duration: 20.0,
        ..TrajectorySpec::preset(TrajectoryKind::Straight)
    };
    let traj = gen_trajectory(&spec, 120.0).unwrap();
    let ideal = trajectory_to_imu(&traj, spec.duration, 120.0, G).unwrap();
    let (t1, t2) = (10 * 120, 20 * 120);
    let mut grew = 0;
    for seed in 0..100 {
        let noisy = corrupt(&ideal, &ImuErrorModel::white(0.05, 0.0, seed)).unwrap();
        let run = ins_run(&noisy, &exact_init(&traj), G).unwrap();
        let e = |i: usize| (run.states[i].p - traj.position(run.states[i].t)).norm();
        if e(t2) > e(t1) {
            grew += 1;
        }
    }
    assert!(grew >= 95, "error grew in only {grew}/100 trials");
}

#[test]
fn bias_drift_law_holds_up_to_thirty_seconds() {
    use mimu_dr::{ImuSample, ImuSequence};
    use nalgebra::Vector3;
    let b = Vector3::new(0.02, -0.01, 0.015);
    let seq = ImuSequence::new(
        (0..30 * 120)
            .map(|k| ImuSample {
                t: k as f64 / 120.0,
                f: Vector3::new(0.0, 0.0, -G) + b,
                w: Vector3::zeros(),
            })
            .collect(),
        120.0,
    )
    .unwrap();
    let run = ins_run(&seq, &NavState::at_rest(0.0), G).unwrap();
    for s in run.states.iter().skip(120) {
        let want = 0.5 * b.norm() * s.t * s.t;
        assert!((s.p.norm() - want).abs() <= 0.01 * want);
    }
}
