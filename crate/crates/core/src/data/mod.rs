//! Reading and writing recordings, geodetic conversion and dataset splits.
//!
//! Canonical files: IMU `t,fx,fy,fz,wx,wy,wz` (SI units) and ground truth
//! `t,lat_deg,lon_deg,alt_m` or `t,n,e,d`. A corpus directory holds
//! `<kind>/<id>/imu<k>.csv` plus `<kind>/<id>/gt.csv`.

mod geodetic;
mod split;

use std::path::{Path, PathBuf};

use nalgebra::Vector3;

pub use geodetic::{geodetic_to_ecef, geodetic_to_ned, radii, Geodetic};
pub use split::{build_split, Split, SplitId, SplitSpec};

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::types::{
    GroundTruthTrack, GtPoint, ImuSample, ImuSequence, MimuRecording, TrajectoryKind, CANONICAL_RATE_HZ,
};

pub const IMU_HEADER: [&str; 7] = ["t", "fx", "fy", "fz", "wx", "wy", "wz"];
pub const GT_GEODETIC_HEADER: [&str; 4] = ["t", "lat_deg", "lon_deg", "alt_m"];
pub const GT_NED_HEADER: [&str; 4] = ["t", "n", "e", "d"];

pub const STANDARD_GRAVITY: f64 = 9.806_65;

/// Relative rate mismatch above which a sequence is resampled.
pub const RESAMPLE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Name(String),
    /// Zero-based position.
    Index(usize),
}

impl Column {
    fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_owned()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccelUnit {
    MetersPerSecond2,
    StandardGravity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GyroUnit {
    RadPerSecond,
    DegPerSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    Seconds,
    Millis,
    Micros,
    Nanos,
}

impl TimeUnit {
    fn to_seconds(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Millis => 1e-3,
            TimeUnit::Micros => 1e-6,
            TimeUnit::Nanos => 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtFormat {
    Auto,
    Geodetic,
    Ned,
}

/// Where the seven IMU channels live in a CSV file, and their units.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    /// t, fx, fy, fz, wx, wy, wz.
    pub columns: [Column; 7],
    pub accel: AccelUnit,
    pub gyro: GyroUnit,
    pub time: TimeUnit,
    pub gt_format: GtFormat,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            columns: IMU_HEADER.map(|h| Column::Name(h.to_owned())),
            accel: AccelUnit::MetersPerSecond2,
            gyro: GyroUnit::RadPerSecond,
            time: TimeUnit::Seconds,
            gt_format: GtFormat::Auto,
        }
    }
}

impl ColumnMap {
    /// Overrides from `imu.col.*`, `imu.units.*` and `gt.format`.
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let mut map = ColumnMap::default();
        for (i, name) in IMU_HEADER.iter().enumerate() {
            if let Some(v) = cfg.get(&format!("imu.col.{name}")) {
                if v.is_empty() {
                    return Err(Error::Config(format!("imu.col.{name} is empty")));
                }
                map.columns[i] = Column::parse(v);
            }
        }
        if let Some(v) = cfg.get("imu.units.accel") {
            map.accel = match v {
                "mps2" | "m/s2" | "m/s^2" => AccelUnit::MetersPerSecond2,
                "g" => AccelUnit::StandardGravity,
                other => return Err(Error::Config(format!("imu.units.accel = '{other}', expected mps2 or g"))),
            };
        }
        if let Some(v) = cfg.get("imu.units.gyro") {
            map.gyro = match v {
                "rads" | "rad/s" => GyroUnit::RadPerSecond,
                "degs" | "deg/s" => GyroUnit::DegPerSecond,
                other => return Err(Error::Config(format!("imu.units.gyro = '{other}', expected rads or degs"))),
            };
        }
        if let Some(v) = cfg.get("imu.units.time") {
            map.time = match v {
                "s" => TimeUnit::Seconds,
                "ms" => TimeUnit::Millis,
                "us" => TimeUnit::Micros,
                "ns" => TimeUnit::Nanos,
                other => return Err(Error::Config(format!("imu.units.time = '{other}', expected s, ms, us or ns"))),
            };
        }
        if let Some(v) = cfg.get("gt.format") {
            map.gt_format = match v {
                "auto" => GtFormat::Auto,
                "geodetic" => GtFormat::Geodetic,
                "ned" => GtFormat::Ned,
                other => return Err(Error::Config(format!("gt.format = '{other}', expected auto, geodetic or ned"))),
            };
        }
        Ok(map)
    }

    fn resolve(&self, headers: &csv::StringRecord, path: &Path) -> Result<[usize; 7]> {
        let mut out = [0; 7];
        for (slot, (col, channel)) in out.iter_mut().zip(self.columns.iter().zip(IMU_HEADER)) {
            *slot = match col {
                Column::Index(i) if *i < headers.len() => *i,
                Column::Index(i) => {
                    return Err(Error::Config(format!(
                        "{}: column {i} for '{channel}' is past the last column ({})",
                        path.display(),
                        headers.len()
                    )))
                }
                Column::Name(n) => headers.iter().position(|h| h.trim() == n).ok_or_else(|| {
                    Error::Config(format!(
                        "{}: no column '{n}' for '{channel}' (header: {})",
                        path.display(),
                        headers.iter().collect::<Vec<_>>().join(",")
                    ))
                })?,
            };
        }
        Ok(out)
    }
}

/// Samples read from one file before synchronization.
#[derive(Debug, Clone)]
pub struct RawImu {
    pub samples: Vec<ImuSample>,
    pub dropped_nan: usize,
}

impl RawImu {
    pub fn native_rate_hz(&self) -> Option<f64> {
        let n = self.samples.len();
        (n >= 2).then(|| (n - 1) as f64 / (self.samples[n - 1].t - self.samples[0].t))
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(file))
}

fn data_err(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_owned(),
        row,
        message: message.into(),
    }
}

/// Parse a field: empty or NaN text gives NaN, anything else must be a number.
fn field(rec: &csv::StringRecord, i: usize, path: &Path, row: usize) -> Result<f64> {
    let s = rec.get(i).unwrap_or("");
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse::<f64>()
        .map_err(|_| data_err(path, row, format!("column {i}: '{s}' is not a number")))
}

/// Read one IMU file into SI units. Rows containing NaN are dropped and
/// counted; timestamps must strictly increase. Rows are numbered from 1 at
/// the first data line.
pub fn read_imu_csv(path: &Path, map: &ColumnMap) -> Result<RawImu> {
    let mut rdr = reader(path)?;
    let cols = map.resolve(rdr.headers()?, path)?;
    let accel = match map.accel {
        AccelUnit::MetersPerSecond2 => 1.0,
        AccelUnit::StandardGravity => STANDARD_GRAVITY,
    };
    let gyro = match map.gyro {
        GyroUnit::RadPerSecond => 1.0,
        GyroUnit::DegPerSecond => std::f64::consts::PI / 180.0,
    };
    let tscale = map.time.to_seconds();
    let mut samples: Vec<ImuSample> = Vec::new();
    let mut dropped_nan = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let mut v = [0.0; 7];
        for (slot, &c) in v.iter_mut().zip(&cols) {
            *slot = field(&rec, c, path, row)?;
        }
        if v.iter().any(|x| x.is_nan()) {
            dropped_nan += 1;
            continue;
        }
        let t = v[0] * tscale;
        if let Some(prev) = samples.last() {
            if t <= prev.t {
                return Err(data_err(path, row, format!("timestamp {t} does not increase (previous {})", prev.t)));
            }
        }
        let s = ImuSample {
            t,
            f: Vector3::new(v[1], v[2], v[3]) * accel,
            w: Vector3::new(v[4], v[5], v[6]) * gyro,
        };
        if !s.is_finite() {
            return Err(data_err(path, row, "non-finite value"));
        }
        samples.push(s);
    }
    Ok(RawImu { samples, dropped_nan })
}

/// Read ground truth in NED metres. Geodetic files are converted about
/// their first fix.
pub fn read_gt_csv(path: &Path, format: GtFormat) -> Result<GroundTruthTrack> {
    let mut rdr = reader(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let has = |names: &[&str]| names.iter().all(|n| headers.iter().any(|h| h == n));
    let geodetic = match format {
        GtFormat::Geodetic => true,
        GtFormat::Ned => false,
        GtFormat::Auto if has(&GT_GEODETIC_HEADER) => true,
        GtFormat::Auto if has(&GT_NED_HEADER) => false,
        GtFormat::Auto => {
            return Err(Error::Config(format!(
                "{}: ground-truth header '{}' is neither {} nor {}",
                path.display(),
                headers.join(","),
                GT_GEODETIC_HEADER.join(","),
                GT_NED_HEADER.join(",")
            )))
        }
    };
    let names = if geodetic { GT_GEODETIC_HEADER } else { GT_NED_HEADER };
    let mut cols = [0; 4];
    for (slot, n) in cols.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::Config(format!("{}: missing column '{n}'", path.display())))?;
    }
    let mut points: Vec<GtPoint> = Vec::new();
    let mut origin = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let mut v = [0.0; 4];
        for (slot, &c) in v.iter_mut().zip(&cols) {
            *slot = field(&rec, c, path, row)?;
        }
        if v.iter().any(|x| x.is_nan()) {
            continue;
        }
        if let Some(prev) = points.last() {
            if v[0] <= prev.t {
                return Err(data_err(path, row, format!("timestamp {} does not increase (previous {})", v[0], prev.t)));
            }
        }
        let p = if geodetic {
            let g = Geodetic::new(v[1], v[2], v[3]);
            if g.lat_deg.abs() > 90.0 {
                return Err(data_err(path, row, format!("latitude {} out of range", g.lat_deg)));
            }
            geodetic_to_ned(g, *origin.get_or_insert(g))
        } else {
            Vector3::new(v[1], v[2], v[3])
        };
        points.push(GtPoint { t: v[0], p });
    }
    GroundTruthTrack::new(points)
}

pub fn write_imu_csv(path: &Path, seq: &ImuSequence) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(IMU_HEADER)?;
    for s in seq.samples() {
        let c = s.channels();
        w.write_record([s.t, c[0], c[1], c[2], c[3], c[4], c[5]].map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_gt_csv(path: &Path, gt: &GroundTruthTrack) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(GT_NED_HEADER)?;
    for p in gt.points() {
        w.write_record([p.t, p.p.x, p.p.y, p.p.z].map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `imu1.csv..imuN.csv` and `gt.csv` into `dir` (created if needed).
pub fn write_recording(dir: &Path, rec: &MimuRecording) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, seq) in rec.imus().iter().enumerate() {
        write_imu_csv(&dir.join(format!("imu{}.csv", i + 1)), seq)?;
    }
    write_gt_csv(&dir.join("gt.csv"), rec.gt())
}

/// What `load_recording` did to the raw files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadReport {
    pub native_rate_hz: Vec<f64>,
    pub resampled: bool,
    pub dropped_nan: Vec<usize>,
    /// Shared span in source time, before rebasing to zero.
    pub overlap: (f64, f64),
    pub samples: usize,
    /// Mean accelerometer norm over the first quiet second, per IMU.
    pub static_accel_norm: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

fn interpolate_at(samples: &[ImuSample], cursor: &mut usize, t: f64) -> Option<ImuSample> {
    while *cursor + 1 < samples.len() && samples[*cursor + 1].t <= t {
        *cursor += 1;
    }
    let a = samples.get(*cursor)?;
    if (a.t - t).abs() < 1e-9 {
        return Some(ImuSample { t, ..*a });
    }
    let b = samples.get(*cursor + 1)?;
    if t < a.t || t > b.t {
        return None;
    }
    let u = (t - a.t) / (b.t - a.t);
    Some(ImuSample {
        t,
        f: a.f + (b.f - a.f) * u,
        w: a.w + (b.w - a.w) * u,
    })
}

/// Mean `|f|` over the first second whose gyro and accel norms are quiet.
fn static_gravity(samples: &[ImuSample], rate: f64) -> Option<Vector3<f64>> {
    let n = rate.round().max(2.0) as usize;
    (0..samples.len().saturating_sub(n)).step_by(n / 2).find_map(|i| {
        let win = &samples[i..i + n];
        let mean_f = win.iter().map(|s| s.f).sum::<Vector3<f64>>() / n as f64;
        let spread = win.iter().map(|s| (s.f - mean_f).norm()).fold(0.0, f64::max);
        let rot = win.iter().map(|s| s.w.norm()).fold(0.0, f64::max);
        (spread < 0.3 && rot < 0.05).then_some(mean_f)
    })
}

/// Load, unit-normalize and synchronize the IMU files of one trajectory.
///
/// All streams (and ground truth) are cropped to their common span and
/// rebased so it starts at zero. Streams within 0.1 % of 120 Hz keep their
/// samples and share IMU 1's timestamps; otherwise every stream is linearly
/// resampled onto a common 120 Hz grid.
pub fn load_recording(
    imu_paths: &[PathBuf],
    gt_path: &Path,
    map: &ColumnMap,
    id: &str,
    kind: TrajectoryKind,
) -> Result<(MimuRecording, LoadReport)> {
    if imu_paths.is_empty() {
        return Err(Error::InvalidInput(format!("trajectory {id}: no IMU files")));
    }
    let raws = imu_paths
        .iter()
        .map(|p| read_imu_csv(p, map))
        .collect::<Result<Vec<_>>>()?;
    let gt = read_gt_csv(gt_path, map.gt_format)?;
    let mut report = LoadReport {
        dropped_nan: raws.iter().map(|r| r.dropped_nan).collect(),
        ..LoadReport::default()
    };
    for (raw, path) in raws.iter().zip(imu_paths) {
        let rate = raw
            .native_rate_hz()
            .ok_or_else(|| data_err(path, 0, "fewer than two valid samples"))?;
        report.native_rate_hz.push(rate);
    }
    let t0 = raws
        .iter()
        .map(|r| r.samples[0].t)
        .chain(gt.start_time())
        .fold(f64::NEG_INFINITY, f64::max);
    let t1 = raws
        .iter()
        .map(|r| r.samples.last().unwrap().t)
        .chain(gt.end_time())
        .fold(f64::INFINITY, f64::min);
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!("trajectory {id}: IMU and ground-truth spans do not overlap")));
    }
    report.overlap = (t0, t1);
    let eps = 1e-9;
    report.resampled = report
        .native_rate_hz
        .iter()
        .any(|r| (r / CANONICAL_RATE_HZ - 1.0).abs() > RESAMPLE_TOLERANCE);
    let dt = 1.0 / CANONICAL_RATE_HZ;
    let streams: Vec<Vec<ImuSample>> = if report.resampled {
        let n = ((t1 - t0) / dt + eps).floor() as usize + 1;
        raws.iter()
            .map(|r| {
                let mut cursor = 0;
                (0..n)
                    .map(|j| {
                        let t = t0 + j as f64 * dt;
                        interpolate_at(&r.samples, &mut cursor, t).expect("grid lies inside every stream")
                    })
                    .collect()
            })
            .collect()
    } else {
        let cropped: Vec<Vec<ImuSample>> = raws
            .iter()
            .map(|r| {
                r.samples
                    .iter()
                    .filter(|s| s.t >= t0 - eps && s.t <= t1 + eps)
                    .copied()
                    .collect()
            })
            .collect();
        let n = cropped.iter().map(Vec::len).min().unwrap();
        let times: Vec<f64> = cropped[0][..n].iter().map(|s| s.t).collect();
        cropped
            .into_iter()
            .map(|c| c[..n].iter().zip(&times).map(|(s, &t)| ImuSample { t, ..*s }).collect())
            .collect()
    };
    report.samples = streams[0].len();
    if report.samples < 2 {
        return Err(Error::InvalidInput(format!("trajectory {id}: overlap holds fewer than two samples")));
    }
    let seqs = streams
        .into_iter()
        .map(|s| {
            let rebased = s.into_iter().map(|x| ImuSample { t: x.t - t0, ..x }).collect();
            ImuSequence::new(rebased, CANONICAL_RATE_HZ)
        })
        .collect::<Result<Vec<_>>>()?;

    let statics: Vec<Option<Vector3<f64>>> = seqs.iter().map(|s| static_gravity(s.samples(), CANONICAL_RATE_HZ)).collect();
    report.static_accel_norm = statics.iter().map(|g| g.map(|v| v.norm())).collect();
    let axes: Vec<(usize, bool)> = statics
        .iter()
        .flatten()
        .map(|g| {
            let a = g.iamax();
            (a, g[a] > 0.0)
        })
        .collect();
    if axes.windows(2).any(|w| w[0] != w[1]) {
        let msg = format!("trajectory {id}: gravity is not on the same axis and sign for all IMUs ({axes:?})");
        log::warn!("{msg}");
        report.warnings.push(msg);
    }
    for (i, n) in report.dropped_nan.iter().enumerate().filter(|(_, n)| **n > 0) {
        let msg = format!("trajectory {id}: IMU {} dropped {n} rows with NaN", i + 1);
        log::warn!("{msg}");
        report.warnings.push(msg);
    }
    let rec = MimuRecording::new(seqs, gt.rebased(t0)?, id, kind)?;
    Ok((rec, report))
}

/// IMU files of one trajectory directory, in `imu1, imu2, ...` order.
pub fn imu_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for k in 1.. {
        let p = dir.join(format!("imu{k}.csv"));
        if !p.exists() {
            break;
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no imu1.csv", dir.display())));
    }
    Ok(out)
}

/// Load every `<kind>/<id>` trajectory under `root`. Recordings are ordered
/// by kind, then numerically by id when ids are integers.
pub fn load_corpus(root: &Path, map: &ColumnMap) -> Result<Vec<MimuRecording>> {
    let mut out = Vec::new();
    for kind in TrajectoryKind::ALL {
        let kdir = root.join(kind.as_str());
        if !kdir.is_dir() {
            continue;
        }
        let mut ids: Vec<String> = std::fs::read_dir(&kdir)
            .map_err(|e| Error::io(&kdir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        ids.sort_by(|a, b| match (a.parse::<u64>(), b.parse::<u64>()) {
            (Ok(x), Ok(y)) => x.cmp(&y),
            _ => a.cmp(b),
        });
        for id in ids {
            let dir = kdir.join(&id);
            let (rec, report) = load_recording(&imu_files(&dir)?, &dir.join("gt.csv"), map, &id, kind)?;
            log::info!(
                "loaded {kind}/{id}: {} IMU(s), {} samples, resampled={}",
                rec.n_imus(),
                report.samples,
                report.resampled
            );
            out.push(rec);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no trajectories found", root.display())));
    }
    Ok(out)
}

pub fn write_corpus(root: &Path, corpus: &[MimuRecording]) -> Result<()> {
    for rec in corpus {
        write_recording(&root.join(rec.kind().as_str()).join(rec.id()), rec)?;
    }
    Ok(())
}
