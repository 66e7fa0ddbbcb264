use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{apply_normalizer, fit_normalizer, CircuitGraph};
use crate::seed::stream_rng;

use super::loss::{huber_loss, rmse};
use super::model::{Batch, GnnModel, ModelConfig};
use super::optim::{Adam, AdamConfig, PlateauConfig, ReduceOnPlateau};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub scheduler: PlateauConfig,
    pub train_fraction: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 300,
            learning_rate: 1e-4,
            weight_decay: 1e-6,
            batch_size: 2048,
            scheduler: PlateauConfig::default(),
            train_fraction: 0.8,
            seed: 0,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config("learning_rate must be positive and weight_decay non-negative".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction {} must lie strictly between 0 and 1",
                self.train_fraction
            )));
        }
        let s = &self.scheduler;
        if !(s.factor > 0.0 && s.factor < 1.0) || s.patience == 0 {
            return Err(Error::Config("scheduler needs factor in (0, 1) and positive patience".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub val_rmse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }

    /// `epoch,train_loss,val_loss,lr`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_loss", "lr"])?;
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.val_loss.to_string(),
                r.lr.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("history", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Seeded shuffle of `0..n` split into `(train, validation)`. Both parts are
/// non-empty for `n >= 2`.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, 0));
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let val = idx.split_off(n_train);
    (idx, val)
}

fn labels(graphs: &[CircuitGraph]) -> Result<Vec<f64>> {
    graphs
        .iter()
        .map(|g| {
            g.label
                .filter(|l| l.is_finite())
                .ok_or_else(|| Error::Data(format!("graph {} has no finite label", g.circuit_id)))
        })
        .collect()
}

fn evaluate(model: &GnnModel, graphs: &[CircuitGraph], batch_size: usize) -> Result<(f64, f64)> {
    let mut pred = Vec::with_capacity(graphs.len());
    for part in graphs.chunks(batch_size) {
        let refs: Vec<&CircuitGraph> = part.iter().collect();
        pred.extend(model.forward(&Batch::new(&refs, model.config.neighborhood)?)?);
    }
    let target = labels(graphs)?;
    Ok((huber_loss(&pred, &target, model.config.huber_delta)?, rmse(&pred, &target)?))
}

/// Trains on a seeded 80/20 split (by default) and returns the weights with
/// the lowest validation loss.
///
/// The normalizer is fitted on the training part only. The validation part
/// drives both the plateau scheduler and checkpoint selection.
pub fn train(
    dataset: &[CircuitGraph],
    train_config: &TrainConfig,
    model_config: &ModelConfig,
) -> Result<(GnnModel, TrainHistory)> {
    train_config.validate()?;
    model_config.validate()?;
    if dataset.len() < 2 {
        return Err(Error::Data("training needs at least 2 labeled graphs".into()));
    }
    labels(dataset)?;
    let (train_idx, val_idx) = split_indices(dataset.len(), train_config.train_fraction, train_config.seed);
    let norm = fit_normalizer(train_idx.iter().map(|&i| &dataset[i]).collect::<Vec<_>>())?;
    let normalize = |idx: &[usize]| -> Result<Vec<CircuitGraph>> {
        idx.iter().map(|&i| apply_normalizer(&dataset[i], &norm)).collect()
    };
    let train_set = normalize(&train_idx)?;
    let val_set = normalize(&val_idx)?;

    let mut model = GnnModel::new(model_config.clone(), norm.clone())?;
    model.train_config = Some(train_config.clone());
    let mut adam = Adam::new(&model, train_config.adam());
    let mut scheduler = ReduceOnPlateau::new(train_config.learning_rate, train_config.scheduler);
    let mut best = (f64::INFINITY, model.weights.clone(), 0usize);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=train_config.epochs {
        let lr = scheduler.lr();
        order.shuffle(&mut stream_rng(train_config.seed, epoch as u64));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(train_config.batch_size) {
            let refs: Vec<&CircuitGraph> = chunk.iter().map(|&i| &train_set[i]).collect();
            let batch = Batch::new(&refs, model.config.neighborhood)?;
            let (loss, grads) = model.loss_and_gradients(&batch, 0.0)?;
            adam.step(&mut model.weights, &grads, lr);
            if !model.weights.all_finite() {
                return Err(Error::NonFinite(format!("weights after epoch {epoch}")));
            }
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_loss, val_rmse) = evaluate(&model, &val_set, train_config.batch_size)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at epoch {epoch}")));
        }
        if val_loss < best.0 {
            best = (val_loss, model.weights.clone(), epoch);
        }
        scheduler.step(val_loss);
        history.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
            val_rmse,
        });
    }
    model.weights = best.1;
    history.best_epoch = best.2;
    Ok((model, history))
}
