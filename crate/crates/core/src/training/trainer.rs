use std::fmt;
use std::time::Instant;

use super::metrics::{Confusion, Metrics};
use super::sgd::Sgd;
use crate::error::{Error, Result};
use crate::math::Rng;
use crate::nn::Classifier;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            max_epochs: 30,
            patience: 5,
            seed: 0,
            batch_size: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!("momentum must be in [0,1), got {}", self.momentum)));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example<X> {
    pub input: X,
    pub label: usize,
}

impl<X> Example<X> {
    pub fn new(input: X, label: usize) -> Self {
        Example { input, label }
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<X> {
    pub train: Vec<Example<X>>,
    pub dev: Vec<Example<X>>,
    pub test: Vec<Example<X>>,
}

impl<X> DatasetSplit<X> {
    pub fn map<Y>(self, mut f: impl FnMut(X) -> Result<Y>) -> Result<DatasetSplit<Y>> {
        let mut conv = |v: Vec<Example<X>>| -> Result<Vec<Example<Y>>> {
            v.into_iter()
                .map(|e| Ok(Example::new(f(e.input)?, e.label)))
                .collect()
        };
        Ok(DatasetSplit {
            train: conv(self.train)?,
            dev: conv(self.dev)?,
            test: conv(self.test)?,
        })
    }
}

/// One line of the epoch log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_error: f64,
    pub elapsed_ms: u128,
}

impl EpochRecord {
    pub const HEADER: &'static str = "epoch,train_loss,dev_error,elapsed_ms";

    /// Everything except wall-clock time, for reproducibility checks.
    pub fn deterministic_part(&self) -> (usize, u64, u64) {
        (self.epoch, self.train_loss.to_bits(), self.dev_error.to_bits())
    }
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.epoch, self.train_loss, self.dev_error, self.elapsed_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best dev error and signals a stop after `patience`
/// consecutive epochs without strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    waited: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            waited: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, dev_error: f64) -> StopDecision {
        if dev_error < self.best {
            self.best = dev_error;
            self.best_epoch = epoch;
            self.waited = 0;
            StopDecision::Improved
        } else {
            self.waited += 1;
            if self.waited >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_error(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// Parameters from the epoch with the lowest dev error.
    pub model: M,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Mean cross-entropy of `model` over `examples`.
pub fn mean_loss<M: Classifier>(model: &M, examples: &[Example<M::Input>]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("no examples"));
    }
    let mut total = 0.0;
    for e in examples {
        total += model.loss(&e.input, e.label)?;
    }
    Ok(total / examples.len() as f64)
}

/// Mini-batch momentum SGD with early stopping on the mean dev
/// cross-entropy. Deterministic for a given seed.
pub fn train<M: Classifier>(
    model: M,
    split: &DatasetSplit<M::Input>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<M>> {
    train_with(model, split, cfg, |_| {})
}

/// `train` with a callback invoked after each epoch.
pub fn train_with<M: Classifier>(
    mut model: M,
    split: &DatasetSplit<M::Input>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<M>> {
    cfg.validate()?;
    if split.train.is_empty() || split.dev.is_empty() {
        return Err(Error::config("training needs non-empty train and dev splits"));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut sgd = Sgd::new(cfg.learning_rate, cfg.momentum);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut log = Vec::new();
    let mut stopped_early = false;
    let start = Instant::now();

    for epoch in 1..=cfg.max_epochs {
        model.set_training(true);
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            model.zero_grads();
            for &i in batch {
                let e = &split.train[i];
                total += model.accumulate_gradients(&e.input, e.label, &mut rng)?;
            }
            sgd.step(&mut model, 1.0 / batch.len() as f64)?;
        }
        model.set_training(false);
        let train_loss = total / split.train.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::config(format!("training diverged at epoch {epoch}")));
        }
        let dev_error = mean_loss(&model, &split.dev)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            dev_error,
            elapsed_ms: start.elapsed().as_millis(),
        };
        log::debug!("{record}");
        on_epoch(&record);
        log.push(record);
        match stopper.observe(epoch, dev_error) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    best.zero_grads();
    Ok(TrainOutcome {
        model: best,
        log,
        best_epoch: stopper.best_epoch(),
        stopped_early,
    })
}

/// Confusion counts with threshold 0.5: positive when `p(positive) > 0.5`.
pub fn confusion<M: Classifier>(model: &M, examples: &[Example<M::Input>]) -> Result<Confusion> {
    let mut c = Confusion::default();
    for e in examples {
        let p = model.positive_probability(&e.input)?;
        c.record(p > 0.5, e.is_positive());
    }
    Ok(c)
}

pub fn evaluate<M: Classifier>(model: &M, examples: &[Example<M::Input>]) -> Result<Metrics> {
    Ok(confusion(model, examples)?.metrics())
}

/// `evaluate` split over `shards` threads; counts are summed before the
/// metrics are derived, so the result matches the sequential path.
pub fn evaluate_sharded<M>(model: &M, examples: &[Example<M::Input>], shards: usize) -> Result<Metrics>
where
    M: Classifier + Sync,
    M::Input: Sync,
{
    let shards = shards.max(1);
    if shards == 1 || examples.len() < 2 {
        return evaluate(model, examples);
    }
    let chunk = examples.len().div_ceil(shards);
    let parts: Vec<Result<Confusion>> = std::thread::scope(|s| {
        let handles: Vec<_> = examples
            .chunks(chunk)
            .map(|part| s.spawn(move || confusion(model, part)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation thread panicked"))
            .collect()
    });
    let mut total = Confusion::default();
    for p in parts {
        total = total + p?;
    }
    Ok(total.metrics())
}
