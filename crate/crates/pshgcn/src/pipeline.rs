//! Training and evaluation pipeline shared by the CLI and the tests.

use std::time::Instant;

use pshgcn_core::conv::{precompute_propagations, PropagationStore};
use pshgcn_core::nn::{
    evaluate, forward, init_model, train, DecoupledPlan, EpochMetrics, ForwardMode, Model, TrainData,
    TrainOutcome,
};
use pshgcn_core::verify::{check_psd, dense_filter, DENSE_CAP};
use pshgcn_core::words::enumerate_words;
use pshgcn_core::{Matrix, OperatorSet, Word};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{header_for, CheckpointHeader, RunInfo, Scores};
use crate::config::{ModeChoice, OperatorChoice, RunConfig};
use crate::dataset::DatasetBundle;
use crate::error::{Error, Result};

/// Operators, aligned features and retained words for one dataset.
pub struct Prepared {
    pub ops: OperatorSet,
    pub x: Matrix,
    pub words: Vec<Word>,
}

pub fn prepare(bundle: &DatasetBundle, operator: OperatorChoice, order: usize) -> Result<Prepared> {
    let ops = bundle.graph.operators(operator.into())?;
    let words = enumerate_words(ops.len(), order, &ops.masks())?;
    Ok(Prepared {
        ops,
        x: bundle.aligned_features(),
        words,
    })
}

/// Computes the store the decoupled path needs for `model` in memory.
pub fn store_for(model: &Model, prep: &Prepared, cap: Option<usize>) -> Result<PropagationStore> {
    let plan = DecoupledPlan::new(model, &prep.ops)?;
    Ok(precompute_propagations(&prep.ops, &prep.x, &plan.terms, cap)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub wall_ms: u64,
}

impl From<&EpochMetrics> for EpochRecord {
    fn from(m: &EpochMetrics) -> Self {
        Self {
            epoch: m.epoch,
            loss: m.loss,
            macro_f1: m.macro_f1,
            micro_f1: m.micro_f1,
            wall_ms: m.wall_ms,
        }
    }
}

/// Contents of `metrics.json`. `macro_f1` / `micro_f1` at the top level are
/// the test scores of the restored best epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub val: Scores,
    pub test: Scores,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub wall_ms: u64,
}

pub struct TrainRun {
    pub model: Model,
    pub outcome: TrainOutcome,
    pub header: CheckpointHeader,
    pub metrics: MetricsFile,
}

pub struct TrainError {
    pub error: Error,
    pub metrics: MetricsFile,
}

fn metrics_file(trace: &[EpochMetrics], outcome: Option<&TrainOutcome>, wall_ms: u64, error: Option<&Error>) -> MetricsFile {
    let (best_epoch, val, test) = outcome.map_or((0, Scores::default(), Scores::default()), |o| {
        (o.best_epoch, o.val.into(), o.test.into())
    });
    MetricsFile {
        status: if error.is_some() { "failed" } else { "ok" }.into(),
        error: error.map(ToString::to_string),
        epochs: trace.iter().map(EpochRecord::from).collect(),
        best_epoch,
        val,
        test,
        macro_f1: test.macro_f1,
        micro_f1: test.micro_f1,
        wall_ms,
    }
}

/// Initializes and trains a model as configured. `store`, when given, must
/// hold the words the decoupled path needs; otherwise minibatch mode
/// computes them in memory.
pub fn run_training(
    bundle: &DatasetBundle,
    cfg: &RunConfig,
    store: Option<&PropagationStore>,
) -> std::result::Result<TrainRun, TrainError> {
    let fail = |error: Error, trace: &[EpochMetrics]| TrainError {
        metrics: metrics_file(trace, None, 0, Some(&error)),
        error,
    };
    let setup = || -> Result<(Prepared, Model)> {
        cfg.validate()?;
        if bundle.num_classes == 0 {
            return Err(Error::Data("dataset has no labels".into()));
        }
        let prep = prepare(bundle, cfg.operator, cfg.order)?;
        let model = init_model(prep.x.cols(), prep.ops.len(), prep.words.clone(), cfg.model_config(bundle.num_classes), cfg.seed)?;
        Ok((prep, model))
    };
    let (prep, mut model) = setup().map_err(|e| fail(e, &[]))?;

    let owned;
    let store = match (cfg.mode, store) {
        (ModeChoice::Full, _) => None,
        (ModeChoice::Minibatch, Some(s)) => {
            if s.n != prep.x.rows() || s.d != prep.x.cols() {
                return Err(fail(
                    Error::Data(format!(
                        "propagation store is {}x{}, dataset features are {}x{}",
                        s.n,
                        s.d,
                        prep.x.rows(),
                        prep.x.cols()
                    )),
                    &[],
                ));
            }
            Some(s)
        }
        (ModeChoice::Minibatch, None) => {
            owned = store_for(&model, &prep, cfg.max_store_words).map_err(|e| fail(e, &[]))?;
            Some(&owned)
        }
    };

    let data = TrainData {
        ops: &prep.ops,
        features: &prep.x,
        labels: &bundle.labels,
        train: &bundle.splits.train,
        val: &bundle.splits.val,
        test: &bundle.splits.test,
        store,
    };
    let start = Instant::now();
    let timed = || start.elapsed().as_millis() as u64;
    let zero = || 0u64;
    let clock: &dyn Fn() -> u64 = if cfg.record_wall_time { &timed } else { &zero };
    let outcome = match train(&mut model, &data, &cfg.train_config(), clock) {
        Ok(o) => o,
        Err(f) => return Err(fail(f.error.into(), &f.trace)),
    };
    let wall_ms = clock();

    if cfg.check_psd && prep.ops.num_nodes() <= DENSE_CAP {
        let check = dense_filter(&model.filter(), &prep.ops)
            .and_then(|h| check_psd(&h, None))
            .map_err(|e| fail(e.into(), &outcome.trace))?;
        if !check.is_psd {
            return Err(fail(
                Error::Check(format!("learned filter has min eigenvalue {}", check.min_eigenvalue)),
                &outcome.trace,
            ));
        }
    }

    let header = header_for(
        &model,
        RunInfo {
            type_dims: bundle.type_dims(),
            operator: cfg.operator,
            mode: cfg.mode,
            seed: cfg.seed,
            best_epoch: outcome.best_epoch,
            val: outcome.val.into(),
            test: outcome.test.into(),
        },
    );
    let metrics = metrics_file(&outcome.trace, Some(&outcome), wall_ms, None);
    Ok(TrainRun {
        model,
        outcome,
        header,
        metrics,
    })
}

/// Scores a checkpointed model on `rows`, using the forward mode it was
/// trained with.
pub fn evaluate_checkpoint(
    bundle: &DatasetBundle,
    header: &CheckpointHeader,
    model: &Model,
    rows: &[usize],
    store: Option<&PropagationStore>,
) -> Result<Scores> {
    if header.type_dims != bundle.type_dims() {
        return Err(Error::Data(format!(
            "checkpoint expects per-type feature dims {:?}, dataset has {:?}",
            header.type_dims,
            bundle.type_dims()
        )));
    }
    if header.alphabet != bundle.graph.num_edge_types() {
        return Err(Error::Data(format!(
            "checkpoint has {} edge types, dataset has {}",
            header.alphabet,
            bundle.graph.num_edge_types()
        )));
    }
    if header.f_theta_prime.last() != Some(&bundle.num_classes) {
        return Err(Error::Data("checkpoint class count differs from the dataset".into()));
    }
    let prep = prepare(bundle, header.operator, header.order)?;
    let logits = match header.mode {
        ModeChoice::Full => forward(model, &prep.ops, &prep.x, ForwardMode::Full)?.select_rows(rows),
        ModeChoice::Minibatch => {
            let owned;
            let store = match store {
                Some(s) => s,
                None => {
                    owned = store_for(model, &prep, None)?;
                    &owned
                }
            };
            let plan = DecoupledPlan::new(model, &prep.ops)?;
            forward(model, &prep.ops, &prep.x, ForwardMode::Decoupled { store, plan: &plan, rows })?
        }
    };
    let local: Vec<Option<usize>> = rows.iter().map(|&r| bundle.labels[r]).collect();
    let mask: Vec<usize> = (0..rows.len()).collect();
    Ok(evaluate(&logits, &local, &mask)?.into())
}
