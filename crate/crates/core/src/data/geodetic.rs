//! Local-level conversion of RTK fixes.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geodetic {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl Geodetic {
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Self {
        Geodetic { lat_deg, lon_deg, alt_m }
    }
}

fn e2() -> f64 {
    WGS84_F * (2.0 - WGS84_F)
}

/// Meridian and prime-vertical radii of curvature at `lat` (radians).
pub fn radii(lat: f64) -> (f64, f64) {
    let s = lat.sin();
    let w = (1.0 - e2() * s * s).sqrt();
    let n = WGS84_A / w;
    let m = WGS84_A * (1.0 - e2()) / (w * w * w);
    (m, n)
}

/// Flat-earth NED offset of `p` from `origin`, radii evaluated at the origin.
pub fn geodetic_to_ned(p: Geodetic, origin: Geodetic) -> Vector3<f64> {
    let lat0 = origin.lat_deg.to_radians();
    let (m, n) = radii(lat0);
    let dlat = (p.lat_deg - origin.lat_deg).to_radians();
    let mut dlon = p.lon_deg - origin.lon_deg;
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon < -180.0 {
        dlon += 360.0;
    }
    let h0 = origin.alt_m;
    Vector3::new(
        dlat * (m + h0),
        dlon.to_radians() * (n + h0) * lat0.cos(),
        -(p.alt_m - origin.alt_m),
    )
}

pub fn geodetic_to_ecef(p: Geodetic) -> Vector3<f64> {
    let (lat, lon) = (p.lat_deg.to_radians(), p.lon_deg.to_radians());
    let (_, n) = radii(lat);
    Vector3::new(
        (n + p.alt_m) * lat.cos() * lon.cos(),
        (n + p.alt_m) * lat.cos() * lon.sin(),
        (n * (1.0 - e2()) + p.alt_m) * lat.sin(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rotate an ECEF difference into the origin's NED frame.
    fn ecef_ned(p: Geodetic, o: Geodetic) -> Vector3<f64> {
        let d = geodetic_to_ecef(p) - geodetic_to_ecef(o);
        let (lat, lon) = (o.lat_deg.to_radians(), o.lon_deg.to_radians());
        let (sl, cl, so, co) = (lat.sin(), lat.cos(), lon.sin(), lon.cos());
        Vector3::new(
            -sl * co * d.x - sl * so * d.y + cl * d.z,
            -so * d.x + co * d.y,
            -cl * co * d.x - cl * so * d.y - sl * d.z,
        )
    }

    #[test]
    fn origin_and_altitude() {
        let o = Geodetic::new(32.1, 34.8, 40.0);
        assert_eq!(geodetic_to_ned(o, o), Vector3::zeros());
        let up = Geodetic::new(32.1, 34.8, 50.0);
        assert_eq!(geodetic_to_ned(up, o), Vector3::new(0.0, 0.0, -10.0));
    }

    #[test]
    fn small_offsets_agree_with_ecef() {
        let o = Geodetic::new(32.0, 35.0, 0.0);
        let p = Geodetic::new(32.001, 35.0, 0.0);
        let flat = geodetic_to_ned(p, o);
        let exact = ecef_ned(p, o);
        assert!((flat.x - 110.85).abs() < 0.01 * 110.85 / 10.0, "{}", flat.x);
        assert!((flat.x - exact.x).abs() < 1e-3 * exact.x);
        let q = Geodetic::new(31.9995, 35.0012, 12.0);
        let (a, b) = (geodetic_to_ned(q, o), ecef_ned(q, o));
        assert!((a - b).norm() < 1e-3 * b.norm(), "{a} vs {b}");
    }
}
