use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng as _;

use super::metrics::{evaluate_predictions, F1Scores};
use super::model::{forward, loss_and_grads, DecoupledPlan, ForwardMode, Model};
use super::optim::Adam;
use crate::conv::PropagationStore;
use crate::graph::OperatorSet;
use crate::linalg::Matrix;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    /// Gradient steps on the full graph (propagation after `f_θ`).
    Full,
    /// Row minibatches over a precomputed propagation store.
    Minibatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr_filter: f64,
    pub lr_mlp: f64,
    /// L2 decay on projection and MLP weights; the filter is never decayed.
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub mode: BatchMode,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_filter: 0.01,
            lr_mlp: 0.01,
            weight_decay: 5e-4,
            epochs: 1000,
            patience: 50,
            seed: 0,
            mode: BatchMode::Full,
            batch_size: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_filter > 0.0 && self.lr_mlp > 0.0) {
            return Err(Error::InvalidValue("learning rates must be > 0".into()));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::InvalidValue("weight decay must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidValue("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Inputs for [`train`]. `labels` is indexed by node id; `store` is required
/// in minibatch mode and must hold `P_word X` for the model's decoupled words.
pub struct TrainData<'a> {
    pub ops: &'a OperatorSet,
    pub features: &'a Matrix,
    pub labels: &'a [Option<usize>],
    pub train: &'a [usize],
    pub val: &'a [usize],
    pub test: &'a [usize],
    pub store: Option<&'a PropagationStore>,
}

/// One trace entry; entry 0 describes the freshly initialized model.
/// `loss` is the dropout-free training loss, the F1 scores are on validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub trace: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub val: F1Scores,
    pub test: F1Scores,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error}")]
pub struct TrainFailure {
    pub error: Error,
    pub trace: Vec<EpochMetrics>,
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        Self { error, trace: Vec::new() }
    }
}

struct Evaluator<'a> {
    data: &'a TrainData<'a>,
    plan: Option<DecoupledPlan>,
    rows: Vec<usize>,
}

impl Evaluator<'_> {
    /// Dropout-free logits for `self.rows` (train, then val, then test).
    fn logits(&self, model: &Model) -> Result<Matrix> {
        match (&self.plan, self.data.store) {
            (Some(plan), Some(store)) => forward(
                model,
                self.data.ops,
                self.data.features,
                ForwardMode::Decoupled {
                    store,
                    plan,
                    rows: &self.rows,
                },
            ),
            _ => Ok(forward(model, self.data.ops, self.data.features, ForwardMode::Full)?.select_rows(&self.rows)),
        }
    }

    fn split_scores(&self, logits: &Matrix, offset: usize, rows: &[usize], classes: usize) -> Result<F1Scores> {
        let pred = logits.argmax_rows();
        let predicted = &pred[offset..offset + rows.len()];
        let truth: Vec<usize> = rows.iter().map(|&r| self.data.labels[r].expect("validated")).collect();
        evaluate_predictions(predicted, &truth, classes)
    }

    fn train_loss(&self, logits: &Matrix) -> f64 {
        let n = self.data.train.len();
        let mut loss = 0.0;
        for (k, &r) in self.data.train.iter().enumerate() {
            let row = logits.row(k);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| libm::exp(v - max)).sum();
            loss += max + libm::log(sum) - row[self.data.labels[r].expect("validated")];
        }
        loss / n as f64
    }

    fn epoch(&self, model: &Model, epoch: usize, wall_ms: u64) -> Result<(EpochMetrics, F1Scores)> {
        let logits = self.logits(model)?;
        let classes = model.num_classes();
        let val = self.split_scores(&logits, self.data.train.len(), self.data.val, classes)?;
        Ok((
            EpochMetrics {
                epoch,
                loss: self.train_loss(&logits),
                macro_f1: val.macro_f1,
                micro_f1: val.micro_f1,
                wall_ms,
            },
            val,
        ))
    }
}

fn validate(model: &Model, data: &TrainData<'_>, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if data.val.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    let mut seen = BTreeSet::new();
    for &r in data.train.iter().chain(data.val).chain(data.test) {
        if !seen.insert(r) {
            return Err(Error::InvalidValue(alloc::format!("node {r} appears in more than one split")));
        }
        match data.labels.get(r).copied().flatten() {
            Some(l) if l < model.num_classes() => {}
            _ => return Err(Error::InvalidValue(alloc::format!("node {r} has no valid label"))),
        }
    }
    if config.mode == BatchMode::Minibatch && data.store.is_none() {
        return Err(Error::InvalidValue("minibatch mode needs a propagation store".into()));
    }
    Ok(())
}

/// Trains `model` in place with early stopping on validation Micro-F1 and
/// leaves it at the latest epoch with the best validation Micro-F1. `clock`
/// returns elapsed milliseconds and is only used to stamp the trace.
pub fn train(
    model: &mut Model,
    data: &TrainData<'_>,
    config: &TrainConfig,
    clock: &dyn Fn() -> u64,
) -> core::result::Result<TrainOutcome, TrainFailure> {
    validate(model, data, config)?;
    let minibatch = config.mode == BatchMode::Minibatch;
    let plan = if minibatch {
        Some(DecoupledPlan::new(model, data.ops)?)
    } else {
        None
    };
    let eval = Evaluator {
        data,
        plan: plan.clone(),
        rows: data.train.iter().chain(data.val).chain(data.test).copied().collect(),
    };

    let filter = model.filter_param_index();
    let lr = (0..model.params.len())
        .map(|i| if i == filter { config.lr_filter } else { config.lr_mlp })
        .collect();
    let decay = (0..model.params.len())
        .map(|i| if i == filter { 0.0 } else { config.weight_decay })
        .collect();
    let mut opt = Adam::new(&model.params, lr, decay);
    let mut dropout_rng = stream(config.seed, Stream::Dropout);
    let mut batch_rng = stream(config.seed, Stream::Batch);

    let mut trace = Vec::new();
    let (first, val0) = eval.epoch(model, 0, clock())?;
    trace.push(first);
    let mut best = (val0, 0usize, model.params.clone());
    let mut since_best = 0;
    let mut order: Vec<usize> = data.train.to_vec();

    for epoch in 1..=config.epochs {
        let step = |model: &mut Model, rows: &[usize], opt: &mut Adam, rng: &mut crate::rng::Rng| -> Result<f64> {
            let mode = match (&plan, data.store) {
                (Some(plan), Some(store)) => ForwardMode::Decoupled { store, plan, rows },
                _ => ForwardMode::Full,
            };
            let (loss, grads) = loss_and_grads(model, data.ops, data.features, data.labels, rows, mode, Some(rng))?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            opt.step(&mut model.params, &grads);
            Ok(loss)
        };
        let result = if minibatch {
            for i in (1..order.len()).rev() {
                let j = batch_rng.random_range(0..=i);
                order.swap(i, j);
            }
            order
                .chunks(config.batch_size)
                .try_for_each(|rows| step(model, rows, &mut opt, &mut dropout_rng).map(drop))
        } else {
            step(model, data.train, &mut opt, &mut dropout_rng).map(drop)
        };
        let metrics = result.and_then(|_| {
            if model.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            eval.epoch(model, epoch, clock())
        });
        let (metrics, val) = match metrics {
            Ok(m) => m,
            Err(Error::NonFinite(_)) | Err(Error::Diverged { .. }) => {
                return Err(TrainFailure {
                    error: Error::Diverged { epoch },
                    trace,
                })
            }
            Err(error) => return Err(TrainFailure { error, trace }),
        };
        if !metrics.loss.is_finite() {
            return Err(TrainFailure {
                error: Error::Diverged { epoch },
                trace,
            });
        }
        trace.push(metrics);
        // Ties move the checkpoint forward but do not reset patience.
        let improved = val.micro_f1 > best.0.micro_f1;
        if val.micro_f1 >= best.0.micro_f1 {
            best = (val, epoch, model.params.clone());
        }
        if improved {
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    model.params = best.2;
    let test = if data.test.is_empty() {
        F1Scores::default()
    } else {
        let logits = eval.logits(model)?;
        let offset = data.train.len() + data.val.len();
        eval.split_scores(&logits, offset, data.test, model.num_classes())?
    };
    Ok(TrainOutcome {
        trace,
        best_epoch: best.1,
        val: best.0,
        test,
    })
}
