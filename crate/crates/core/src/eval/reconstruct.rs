use nalgebra::Vector3;

use crate::error::{ensure_finite, Error, Result};
use crate::eval::solution::{SolutionPoint, SolutionSource, TrajectorySolution};

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub solution: TrajectorySolution,
    /// Number of negative distance increments clamped to zero.
    pub clamped: usize,
}

/// Chain per-epoch distance, altitude and heading increments into a 3-D NED
/// track, one point at the end of every epoch.
pub fn reconstruct(
    distance: &[f64],
    altitude: &[f64],
    yaw: &[f64],
    epoch_end: &[f64],
    init: Vector3<f64>,
) -> Result<Reconstruction> {
    let n = distance.len();
    if n == 0 || altitude.len() != n || yaw.len() != n || epoch_end.len() != n {
        return Err(Error::Shape(format!(
            "increment series must be equal and non-empty (d {}, dh {}, yaw {}, t {})",
            n,
            altitude.len(),
            yaw.len(),
            epoch_end.len()
        )));
    }
    for (name, s) in [("distance", distance), ("altitude", altitude), ("yaw", yaw)] {
        ensure_finite(name, s)?;
    }
    let mut clamped = 0;
    let mut p = init;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let mut d = distance[k];
        if d < 0.0 {
            d = 0.0;
            clamped += 1;
        }
        let (s, c) = yaw[k].sin_cos();
        p += Vector3::new(d * c, d * s, -altitude[k]);
        samples.push(SolutionPoint { t: epoch_end[k], p });
    }
    if clamped > 0 {
        log::warn!("{clamped} negative distance increment(s) clamped to zero");
    }
    Ok(Reconstruction {
        solution: TrajectorySolution::new(samples, SolutionSource::Quadnet)?,
        clamped,
    })
}
