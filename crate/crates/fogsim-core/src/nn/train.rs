//! Deterministic mini-batch trainer.

use rand::seq::SliceRandom;

use super::backward::backward;
use super::params::{init_parameters, zeros_like_spec, Parameters};
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::seed;
use crate::signal::Window;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd {
        lr: f64,
        momentum: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    fn lr(&self) -> f64 {
        match self {
            OptimizerKind::Sgd { lr, .. } | OptimizerKind::Adam { lr, .. } => *lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Weight for the positive class in the loss. `None` derives
    /// `#negatives / #positives` from the training set.
    pub pos_weight: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::adam(1e-3),
            batch_size: 64,
            epochs: 30,
            seed: 42,
            pos_weight: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.optimizer.lr() > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Parameters,
    /// Mean training loss per epoch, index 0 = first epoch.
    pub epoch_losses: Vec<f64>,
    /// The positive-class weight actually used.
    pub pos_weight: f64,
}

enum OptimizerState {
    Sgd {
        velocity: Parameters,
    },
    Adam {
        m: Parameters,
        v: Parameters,
        t: u64,
    },
}

/// Train the model. Deterministic given `(spec, dataset order, cfg.seed)`:
/// fixed Kaiming init, fixed per-epoch shuffles, fixed batch order.
pub fn train(spec: &ModelSpec, dataset: &[Window], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let positives = dataset.iter().filter(|w| w.label == Some(true)).count();
    let negatives = dataset.iter().filter(|w| w.label == Some(false)).count();
    if positives + negatives != dataset.len() {
        return Err(Error::Training("training set has unlabeled windows".into()));
    }
    let pos_weight = match cfg.pos_weight {
        Some(w) if w > 0.0 => w,
        Some(w) => {
            return Err(Error::InvalidConfig(format!(
                "pos_weight must be positive, got {w}"
            )))
        }
        None => {
            if positives == 0 || negatives == 0 {
                return Err(Error::Training(
                    "single-class training set: set pos_weight explicitly".into(),
                ));
            }
            negatives as f64 / positives as f64
        }
    };

    let mut params = init_parameters(spec, seed::derive_labeled(cfg.seed, "init"));
    let mut state = match cfg.optimizer {
        OptimizerKind::Sgd { .. } => OptimizerState::Sgd {
            velocity: zeros_like_spec(spec),
        },
        OptimizerKind::Adam { .. } => OptimizerState::Adam {
            m: zeros_like_spec(spec),
            v: zeros_like_spec(spec),
            t: 0,
        },
    };

    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(seed::derive(cfg.seed, 1 + epoch as u64));
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch: Vec<&Window> = chunk.iter().map(|&i| &dataset[i]).collect();
            let (grads, loss) = backward(spec, &params, &batch, pos_weight)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            epoch_loss += loss * batch.len() as f64;
            apply_update(&mut params, &grads, &cfg.optimizer, &mut state);
        }
        epoch_losses.push(epoch_loss / dataset.len() as f64);
    }

    Ok(TrainOutcome {
        params,
        epoch_losses,
        pos_weight,
    })
}

fn apply_update(
    params: &mut Parameters,
    grads: &Parameters,
    optimizer: &OptimizerKind,
    state: &mut OptimizerState,
) {
    match (optimizer, state) {
        (OptimizerKind::Sgd { lr, momentum }, OptimizerState::Sgd { velocity }) => {
            for (path, p) in params.iter_mut() {
                let g = grads.get(path).expect("grad layout");
                let vel = velocity.get_mut(path).expect("state layout");
                for ((pv, gv), vv) in
                    p.data_mut().iter_mut().zip(g.data()).zip(vel.data_mut())
                {
                    *vv = momentum * *vv + gv;
                    *pv -= lr * *vv;
                }
            }
        }
        (
            OptimizerKind::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
            },
            OptimizerState::Adam { m, v, t },
        ) => {
            *t += 1;
            let bc1 = 1.0 - beta1.powi(*t as i32);
            let bc2 = 1.0 - beta2.powi(*t as i32);
            for (path, p) in params.iter_mut() {
                let g = grads.get(path).expect("grad layout");
                let mt = m.get_mut(path).expect("state layout");
                let vt = v.get_mut(path).expect("state layout");
                for (((pv, gv), mv), vv) in p
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(mt.data_mut())
                    .zip(vt.data_mut())
                {
                    *mv = beta1 * *mv + (1.0 - beta1) * gv;
                    *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                    let m_hat = *mv / bc1;
                    let v_hat = *vv / bc2;
                    *pv -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
        _ => unreachable!("optimizer and state are constructed together"),
    }
}

/// Score a list of windows with a trained model.
pub fn predict(
    spec: &ModelSpec,
    params: &Parameters,
    windows: &[Window],
) -> Result<Vec<f64>> {
    windows
        .iter()
        .map(|w| super::forward::forward(spec, params, w))
        .collect()
}
