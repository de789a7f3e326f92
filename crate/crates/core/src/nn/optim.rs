use serde::{Deserialize, Serialize};

use super::{Gradients, Model, NetError, Real};

/// SGD with heavy-ball momentum and L2 weight decay:
/// `v <- mu v + g + lambda theta`, `theta <- theta - lr v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Epochs (0-based) at which the learning rate is multiplied by `gamma`.
    pub decay_epochs: Vec<usize>,
    pub gamma: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            base_lr: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            decay_epochs: vec![40],
            gamma: 0.1,
        }
    }
}

impl SgdConfig {
    /// Step-decay schedule.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let steps = self.decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.base_lr * self.gamma.powi(steps as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sgd<R> {
    pub config: SgdConfig,
    velocity: Vec<Vec<R>>,
}

impl<R: Real> Sgd<R> {
    pub fn new(config: SgdConfig, model: &Model<R>) -> Self {
        Sgd {
            config,
            velocity: model.params().iter().map(|(_, p)| vec![R::zero(); p.len()]).collect(),
        }
    }

    pub fn velocity(&self) -> &[Vec<R>] {
        &self.velocity
    }

    pub fn step(&mut self, model: &mut Model<R>, grads: &Gradients<R>, lr: f64) -> Result<(), NetError> {
        let params = model.params_mut();
        if params.len() != grads.tensors.len() || params.len() != self.velocity.len() {
            return Err(NetError::ShapeMismatch(format!(
                "{} parameter tensors, {} gradients",
                params.len(),
                grads.tensors.len()
            )));
        }
        let (mu, wd, lr) = (R::of(self.config.momentum), R::of(self.config.weight_decay), R::of(lr));
        for ((theta, g), v) in params.into_iter().zip(&grads.tensors).zip(&mut self.velocity) {
            if theta.len() != g.len() {
                return Err(NetError::ShapeMismatch("gradient tensor length differs".into()));
            }
            for ((th, &gi), vi) in theta.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = mu * *vi + gi + wd * *th;
                *th -= lr * *vi;
            }
        }
        Ok(())
    }
}
