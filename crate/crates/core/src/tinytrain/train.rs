use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

use super::data::{Dataset, SplitDataset};
use super::mlp::Mlp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            batch_size: 32,
            max_epochs: 300,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch_size, max_epochs and patience must be positive".into(),
            ));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

/// Patience-based stopping on a metric that should increase.
///
/// Only strict improvements reset the counter.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Records the metric for `epoch` (1-based). Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, value: f64) -> (bool, bool) {
        let improved = self.best.is_none_or(|b| value > b);
        if improved {
            self.best = Some(value);
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        (improved, self.stale >= self.patience)
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: Mlp,
    /// Epoch of the best validation accuracy (epochs to convergence).
    pub best_epoch: usize,
    /// Epochs actually run before stopping.
    pub epochs_run: usize,
    pub best_val_accuracy: f64,
    pub val_history: Vec<f64>,
}

/// Accuracy in percent.
pub fn accuracy(model: &Mlp, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Invalid("accuracy of an empty dataset".into()));
    }
    let pred = model.predict(&data.features, data.len())?;
    let correct = pred.iter().zip(&data.labels).filter(|(p, y)| p == y).count();
    Ok(100.0 * correct as f64 / data.len() as f64)
}

/// Minibatch SGD with early stopping on validation accuracy.
pub fn train(model: &Mlp, data: &SplitDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    for (name, part) in [("train", &data.train), ("val", &data.val)] {
        if part.is_empty() {
            return Err(Error::Invalid(format!("empty {name} split")));
        }
        if part.dims != model.input_dim() {
            return Err(Error::Invalid(format!(
                "{name} split has {} features, model expects {}",
                part.dims,
                model.input_dim()
            )));
        }
    }
    let train = &data.train;
    let d = train.dims;
    let mut rng = substream(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut current = model.clone();
    let mut best = model.clone();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = Vec::new();
    let mut x = Vec::with_capacity(cfg.batch_size * d);
    let mut y = Vec::with_capacity(cfg.batch_size);

    let mut epochs_run = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            x.clear();
            y.clear();
            for &i in chunk {
                x.extend_from_slice(train.row(i));
                y.push(train.labels[i]);
            }
            let (_, cache) = current.forward(&x, chunk.len())?;
            let grads = current.backward(&cache, &y)?;
            current.sgd_step(&grads, cfg.learning_rate);
        }
        epochs_run = epoch;
        let val = accuracy(&current, &data.val)?;
        history.push(val);
        let (improved, stop) = stopper.observe(epoch, val);
        if improved {
            best = current.clone();
        }
        if stop {
            break;
        }
    }

    Ok(TrainOutcome {
        model: best,
        best_epoch: stopper.best_epoch(),
        epochs_run,
        best_val_accuracy: stopper.best().unwrap_or(0.0),
        val_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tinytrain::data::{synth_transfer_tasks, TaskConfig};
    use crate::tinytrain::mlp::MlpSpec;

    #[test]
    fn strictly_improving_metric_runs_to_the_end() {
        let mut s = EarlyStopping::new(10);
        for epoch in 1..=300 {
            let (improved, stop) = s.observe(epoch, epoch as f64);
            assert!(improved && !stop);
        }
        assert_eq!(s.best_epoch(), 300);
    }

    #[test]
    fn frozen_metric_stops_after_patience_plus_one() {
        let mut s = EarlyStopping::new(10);
        let stop_at = (1..=300).find(|&e| s.observe(e, 42.0).1).unwrap();
        assert_eq!(stop_at, 11);
        assert_eq!(s.best_epoch(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig {
            patience: 400,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_learning_rate_freezes_validation_and_stops_at_eleven() {
        let cfg = TaskConfig {
            per_class: 40,
            ..Default::default()
        };
        let tasks = synth_transfer_tasks(2, &cfg).unwrap();
        let model = Mlp::init(&MlpSpec::new(16, &[8], 4), 1).unwrap();
        let tc = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 50,
            ..Default::default()
        };
        let out = train(&model, &tasks.source, &tc).unwrap();
        assert_eq!(out.epochs_run, 11);
        assert_eq!(out.best_epoch, 1);
        assert_eq!(out.model, model);
    }

    #[test]
    fn same_seed_same_weights() {
        let cfg = TaskConfig {
            per_class: 60,
            ..Default::default()
        };
        let tasks = synth_transfer_tasks(4, &cfg).unwrap();
        let model = Mlp::init(&MlpSpec::new(16, &[8], 4), 1).unwrap();
        let tc = TrainConfig {
            max_epochs: 15,
            seed: 9,
            ..Default::default()
        };
        let a = train(&model, &tasks.source, &tc).unwrap();
        let b = train(&model, &tasks.source, &tc).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.val_history, b.val_history);
        let best = a.val_history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best_val_accuracy, best);
        assert_eq!(accuracy(&a.model, &tasks.source.val).unwrap(), best);
    }

    #[test]
    fn empty_split_is_rejected() {
        let cfg = TaskConfig {
            per_class: 40,
            ..Default::default()
        };
        let mut tasks = synth_transfer_tasks(2, &cfg).unwrap();
        tasks.source.val.features.clear();
        tasks.source.val.labels.clear();
        let model = Mlp::init(&MlpSpec::new(16, &[8], 4), 1).unwrap();
        assert!(train(&model, &tasks.source, &TrainConfig::default()).is_err());
    }
}
