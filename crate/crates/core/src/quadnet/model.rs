//! A trained regressor: network plus the fixed input/label scaling used to
//! train it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadnet::network::{window_to_input, ArchSpec, Network};
use crate::quadnet::train::{train, TrainConfig, TrainHistory};
use crate::window::{Target, Window, CHANNELS};

/// Affine preprocessing `x' = (x - mean) / scale`, fitted on the training
/// windows and applied before the first layer (it is not part of the
/// network). Means are per channel; the scale is shared by the three
/// accelerometer axes and by the three gyro axes, so an axis that carries
/// only sensor noise is not blown up to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub mean: [f64; CHANNELS],
    pub scale: [f64; CHANNELS],
}

impl InputScaling {
    pub fn identity() -> Self {
        InputScaling {
            mean: [0.0; CHANNELS],
            scale: [1.0; CHANNELS],
        }
    }

    pub fn fit(windows: &[Window]) -> Self {
        let mut sum = [0.0; CHANNELS];
        let mut sq = [0.0; CHANNELS];
        let mut n = 0usize;
        for w in windows {
            for row in &w.x {
                for c in 0..CHANNELS {
                    sum[c] += row[c];
                    sq[c] += row[c] * row[c];
                }
                n += 1;
            }
        }
        if n == 0 {
            return Self::identity();
        }
        let mut out = Self::identity();
        let mut var = [0.0; CHANNELS];
        for c in 0..CHANNELS {
            out.mean[c] = sum[c] / n as f64;
            var[c] = (sq[c] / n as f64 - out.mean[c] * out.mean[c]).max(0.0);
        }
        for triad in [0..3, 3..6] {
            let s = (var[triad.clone()].iter().sum::<f64>() / 3.0).sqrt();
            // A triad that never moves keeps unit scale.
            let s = if s > 1e-9 { s } else { 1.0 };
            out.scale[triad].iter_mut().for_each(|v| *v = s);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.iter().chain(&self.scale).any(|v| !v.is_finite()) || self.scale.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidInput(format!("bad input scaling {self:?}")));
        }
        Ok(())
    }

    /// Channels-first, scaled copy of a window.
    pub fn apply(&self, w: &Window) -> Vec<f64> {
        let mut x = window_to_input(w);
        let len = w.x.len();
        for c in 0..CHANNELS {
            for v in &mut x[c * len..(c + 1) * len] {
                *v = (*v - self.mean[c]) / self.scale[c];
            }
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadNet {
    pub net: Network,
    pub target: Target,
    pub scaling: InputScaling,
    /// Network output is multiplied by this to give metres.
    pub label_scale: f64,
}

impl QuadNet {
    /// Fit scaling on `windows`, initialize from `cfg.seed` and train.
    pub fn fit(windows: &[Window], target: Target, arch: &ArchSpec, cfg: &TrainConfig) -> Result<(Self, TrainHistory)> {
        if windows.is_empty() {
            return Err(Error::InvalidInput("training set is empty".into()));
        }
        let net = Network::quadnet(arch, cfg.seed)?;
        let scaling = InputScaling::fit(windows);
        let labels: Vec<f64> = windows.iter().map(|w| w.label(target)).collect();
        let rms = (labels.iter().map(|v| v * v).sum::<f64>() / labels.len() as f64).sqrt();
        let label_scale = if rms > 1e-9 { rms } else { 1.0 };
        let mut model = QuadNet {
            net,
            target,
            scaling,
            label_scale,
        };
        let history = model.train_more(windows, cfg)?;
        Ok((model, history))
    }

    /// Continue training with the existing scaling. Loss history is in
    /// scaled label units.
    pub fn train_more(&mut self, windows: &[Window], cfg: &TrainConfig) -> Result<TrainHistory> {
        let inputs: Vec<Vec<f64>> = windows.iter().map(|w| self.scaling.apply(w)).collect();
        let targets: Vec<f64> = windows.iter().map(|w| w.label(self.target) / self.label_scale).collect();
        train(&mut self.net, &inputs, &targets, cfg)
    }

    pub fn predict(&self, w: &Window) -> Result<f64> {
        if w.x.len() != self.net.arch().input_len {
            return Err(Error::Shape(format!(
                "window has {} samples, network expects {}",
                w.x.len(),
                self.net.arch().input_len
            )));
        }
        Ok(self.net.forward_raw(&self.scaling.apply(w))? * self.label_scale)
    }

    pub fn predict_all(&self, windows: &[Window]) -> Result<Vec<f64>> {
        windows.iter().map(|w| self.predict(w)).collect()
    }
}
