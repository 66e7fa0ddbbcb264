use serde::{Deserialize, Serialize};

use super::model::{GnnModel, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam with bias correction and coupled L2 weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Weights,
    v: Weights,
    step: i32,
}

impl Adam {
    pub fn new(model: &GnnModel, config: AdamConfig) -> Self {
        Adam {
            config,
            m: Weights::zeros(&model.config),
            v: Weights::zeros(&model.config),
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, weights: &mut Weights, grads: &Weights, lr: f64) {
        let AdamConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let g_all = grads.tensors();
        let m_all = self.m.tensors_mut();
        let v_all = self.v.tensors_mut();
        for (((_, mut w), (_, g)), ((_, mut m), (_, mut v))) in weights
            .tensors_mut()
            .into_iter()
            .zip(g_all)
            .zip(m_all.into_iter().zip(v_all))
        {
            ndarray::Zip::from(&mut w)
                .and(&g)
                .and(&mut m)
                .and(&mut v)
                .for_each(|w, &g, m, v| {
                    let g = g + weight_decay * *w;
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.1,
            patience: 10,
            min_lr: 1e-7,
        }
    }
}

/// Multiplies the learning rate by `factor` once the monitored loss has
/// failed to improve for `patience` consecutive epochs. A reduction that
/// would land below `min_lr` is skipped.
#[derive(Debug, Clone)]
pub struct ReduceOnPlateau {
    pub config: PlateauConfig,
    lr: f64,
    best: f64,
    bad_epochs: usize,
}

impl ReduceOnPlateau {
    pub fn new(lr: f64, config: PlateauConfig) -> Self {
        ReduceOnPlateau {
            config,
            lr,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records one epoch's monitored loss; returns the learning rate for the
    /// next epoch.
    pub fn step(&mut self, loss: f64) -> f64 {
        if loss < self.best {
            self.best = loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.config.patience {
                self.bad_epochs = 0;
                let reduced = self.lr * self.config.factor;
                // float slack so 1e-4 * 0.1^3 still counts as reaching 1e-7
                if reduced >= self.config.min_lr * (1.0 - 1e-9) {
                    self.lr = reduced;
                }
            }
        }
        self.lr
    }
}
