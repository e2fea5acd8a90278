//! Quadrotor dead reckoning from one or more body-mounted IMUs.
//!
//! * [`strapdown`]: pure-inertial baseline.
//! * [`qdr`]: peak detection + Weinberg distance + gyro heading.
//! * [`quadnet`]: 1-D CNN that regresses per-second distance or altitude change.
//! * [`fusion`]: raw-data and after-regression averaging across aligned IMUs.
//! * [`synth`]: analytic trajectories and IMU simulation used as a test oracle.
//! * [`data`]: CSV ingestion, geodetic conversion and train/test splits.
//! * [`eval`]: metrics, reconstruction and experiment reports.

pub mod attitude;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod qdr;
pub mod quadnet;
pub mod strapdown;
pub mod synth;
pub mod types;
pub mod window;

pub use error::{Error, Result};
pub use types::{
    GroundTruthTrack, GtPoint, ImuSample, ImuSequence, MimuRecording, TrajectoryKind,
    CANONICAL_RATE_HZ,
};
pub use window::{make_windows, Target, Window, WINDOW_SIZE};
