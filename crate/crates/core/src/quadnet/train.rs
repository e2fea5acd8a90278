//! Seeded mini-batch training with SGD or Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadnet::network::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 300,
            seed: 0,
            optimizer: Optimizer::adam(),
            shuffle: true,
        }
    }
}

impl TrainConfig {
    /// `learning_rate = 0` is accepted so a frozen run can be checked.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::Config(format!(
                    "adam needs 0 <= beta < 1 and eps > 0, got {beta1}, {beta2}, {eps}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean squared error over the training set, one entry per epoch.
    pub epoch_loss: Vec<f64>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    step: i32,
}

/// Train `net` in place on channels-first inputs.
///
/// The epoch loss is the mean of the per-example squared errors seen during
/// that epoch, summed in dataset order so it does not depend on the shuffle.
pub fn train(net: &mut Network, inputs: &[Vec<f64>], targets: &[f64], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    net.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidInput(format!(
            "training set needs matching non-empty inputs and targets, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    let n = inputs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = match cfg.optimizer {
        Optimizer::Adam { .. } => Some(AdamState {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            step: 0,
        }),
        Optimizer::Sgd => None,
    };
    let mut history = TrainHistory::default();
    let mut sq = vec![0.0; n];
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| inputs[i].as_slice()).collect();
            let ys: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let (residuals, grads) = net.residuals_and_grad(&xs, &ys)?;
            for (&i, r) in batch.iter().zip(residuals) {
                sq[i] = r * r;
            }
            apply_update(net, &grads, cfg, adam.as_mut());
        }
        let loss = sq.iter().sum::<f64>() / n as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        log::debug!("epoch {epoch}: loss {loss:.6e}");
        history.epoch_loss.push(loss);
    }
    Ok(history)
}

fn apply_update(net: &mut Network, grads: &Gradients, cfg: &TrainConfig, adam: Option<&mut AdamState>) {
    let lr = cfg.learning_rate;
    match (cfg.optimizer, adam) {
        (Optimizer::Adam { beta1, beta2, eps }, Some(state)) => {
            state.step += 1;
            let c1 = 1.0 - beta1.powi(state.step);
            let c2 = 1.0 - beta2.powi(state.step);
            for (((p, g), m), v) in net
                .params_mut()
                .into_iter()
                .zip(&grads.tensors)
                .zip(&mut state.m.tensors)
                .zip(&mut state.v.tensors)
            {
                for (((pv, gv), mv), vv) in p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(m.data_mut())
                    .zip(v.data_mut())
                {
                    *mv = beta1 * *mv + (1.0 - beta1) * gv;
                    *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                    *pv -= lr * (*mv / c1) / ((*vv / c2).sqrt() + eps);
                }
            }
        }
        _ => {
            for (p, g) in net.params_mut().into_iter().zip(&grads.tensors) {
                for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                    *pv -= lr * gv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadnet::network::tests::random_inputs;
    use crate::quadnet::network::ArchSpec;
    use rand::Rng;

    fn overfit_set() -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let xs = random_inputs(720, 8, &mut rng);
        let ys = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        (xs, ys)
    }

    fn cfg(epochs: usize, lr: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            epochs,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn overfits_eight_windows_deterministically() {
        let (xs, ys) = overfit_set();
        let arch = ArchSpec::compact();
        let c = cfg(500, 1e-3);
        let mut a = Network::quadnet(&arch, c.seed).unwrap();
        let ha = train(&mut a, &xs, &ys, &c).unwrap();
        assert_eq!(ha.epoch_loss.len(), 500);
        assert!(ha.final_loss().unwrap() < 1e-3, "{:?}", ha.final_loss());
        let mut b = Network::quadnet(&arch, c.seed).unwrap();
        let hb = train(&mut b, &xs, &ys, &c).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_learning_rate_freezes_everything() {
        let (xs, ys) = overfit_set();
        let arch = ArchSpec::compact();
        for optimizer in [Optimizer::Sgd, Optimizer::adam()] {
            let c = TrainConfig {
                optimizer,
                batch_size: 3,
                ..cfg(5, 0.0)
            };
            let start = Network::quadnet(&arch, 1).unwrap();
            let mut net = start.clone();
            let h = train(&mut net, &xs, &ys, &c).unwrap();
            assert_eq!(net, start);
            assert!(h.epoch_loss.iter().all(|&l| l == h.epoch_loss[0]));
        }
    }

    #[test]
    fn sgd_reduces_loss() {
        let (xs, ys) = overfit_set();
        let c = TrainConfig {
            optimizer: Optimizer::Sgd,
            batch_size: 4,
            ..cfg(30, 1e-2)
        };
        let mut net = Network::quadnet(&ArchSpec::compact(), 2).unwrap();
        let h = train(&mut net, &xs, &ys, &c).unwrap();
        assert!(h.final_loss().unwrap() < h.epoch_loss[0]);
    }

    #[test]
    fn divergence_names_the_epoch() {
        let (xs, _) = overfit_set();
        let ys = vec![1e200; 8];
        let c = TrainConfig {
            optimizer: Optimizer::Sgd,
            ..cfg(3, 1e-3)
        };
        let mut net = Network::quadnet(&ArchSpec::compact(), 2).unwrap();
        match train(&mut net, &xs, &ys, &c) {
            Err(Error::Divergence { epoch, .. }) => assert_eq!(epoch, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let (xs, ys) = overfit_set();
        let mut net = Network::quadnet(&ArchSpec::compact(), 2).unwrap();
        for c in [
            TrainConfig { batch_size: 0, ..cfg(1, 1e-3) },
            TrainConfig { epochs: 0, ..cfg(1, 1e-3) },
            cfg(1, -1.0),
            cfg(1, f64::NAN),
        ] {
            assert!(matches!(train(&mut net, &xs, &ys, &c), Err(Error::Config(_))));
        }
        assert!(train(&mut net, &[], &[], &cfg(1, 1e-3)).is_err());
    }
}
