//! Plain-text `key = value` run configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Keys are checked
//! against [`KNOWN_KEYS`] so typos fail instead of silently using defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qdr::QdrParams;
use crate::quadnet::{ArchSpec, Optimizer, TrainConfig};

pub const KNOWN_KEYS: &[&str] = &[
    "imu.col.t",
    "imu.col.fx",
    "imu.col.fy",
    "imu.col.fz",
    "imu.col.wx",
    "imu.col.wy",
    "imu.col.wz",
    "imu.units.accel",
    "imu.units.gyro",
    "imu.units.time",
    "gt.format",
    "model.arch",
    "train.learning_rate",
    "train.batch_size",
    "train.epochs",
    "train.seed",
    "train.optimizer",
    "train.adam.beta1",
    "train.adam.beta2",
    "train.adam.eps",
    "train.shuffle",
    "train.stride",
    "qdr.gain",
    "qdr.min_separation",
    "qdr.smoothing_halfwidth",
    "qdr.prominence",
    "fusion.ara_models",
    "nav.gravity",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key '{k}'", i + 1)));
            }
            if entries.insert(k.to_owned(), v.to_owned()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
            }
        }
        Ok(KvConfig { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("{key} = '{v}': {e}")))
            })
            .transpose()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        self.entries.insert(key.to_owned(), value.into());
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Training settings, defaulting anything unset.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let optimizer = match self.get("train.optimizer").unwrap_or("adam") {
            "sgd" => Optimizer::Sgd,
            "adam" => {
                let Optimizer::Adam { beta1, beta2, eps } = Optimizer::adam() else { unreachable!() };
                Optimizer::Adam {
                    beta1: self.get_parsed("train.adam.beta1")?.unwrap_or(beta1),
                    beta2: self.get_parsed("train.adam.beta2")?.unwrap_or(beta2),
                    eps: self.get_parsed("train.adam.eps")?.unwrap_or(eps),
                }
            }
            other => return Err(Error::Config(format!("train.optimizer = '{other}', expected sgd or adam"))),
        };
        let cfg = TrainConfig {
            learning_rate: self.get_parsed("train.learning_rate")?.unwrap_or(d.learning_rate),
            batch_size: self.get_parsed("train.batch_size")?.unwrap_or(d.batch_size),
            epochs: self.get_parsed("train.epochs")?.unwrap_or(d.epochs),
            seed: self.get_parsed("train.seed")?.unwrap_or(d.seed),
            optimizer,
            shuffle: self.get_parsed("train.shuffle")?.unwrap_or(d.shuffle),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Training window stride in samples (default: one full window).
    pub fn train_stride(&self) -> Result<usize> {
        let s = self.get_parsed("train.stride")?.unwrap_or(crate::WINDOW_SIZE);
        if s == 0 {
            return Err(Error::Config("train.stride must be >= 1".into()));
        }
        Ok(s)
    }

    pub fn arch(&self) -> Result<ArchSpec> {
        match self.get("model.arch").unwrap_or("canonical") {
            "canonical" => Ok(ArchSpec::canonical()),
            "compact" => Ok(ArchSpec::compact()),
            other => Err(Error::Config(format!("model.arch = '{other}', expected canonical or compact"))),
        }
    }

    pub fn qdr_params(&self) -> Result<QdrParams> {
        let d = QdrParams::default();
        let p = QdrParams {
            gain: self.get_parsed("qdr.gain")?.unwrap_or(d.gain),
            min_separation: self.get_parsed("qdr.min_separation")?.unwrap_or(d.min_separation),
            smoothing_halfwidth: self.get_parsed("qdr.smoothing_halfwidth")?.unwrap_or(d.smoothing_halfwidth),
            prominence: self.get_parsed("qdr.prominence")?.unwrap_or(d.prominence),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn gravity(&self) -> Result<f64> {
        let g = self.get_parsed("nav.gravity")?.unwrap_or(crate::strapdown::DEFAULT_GRAVITY);
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Config(format!("nav.gravity must be positive, got {g}")));
        }
        Ok(g)
    }
}
