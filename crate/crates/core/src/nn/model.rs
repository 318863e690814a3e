use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::tape::{Tape, Var};
use crate::conv::PropagationStore;
use crate::graph::OperatorSet;
use crate::linalg::Matrix;
use crate::rng::{stream, Rng, Stream};
use crate::words::{ExpansionPlan, SosFilter, Word};
use crate::{Error, Result};

/// Layer widths and filter options. `f_theta` lists the output width of each
/// linear layer of `f_θ` (empty means identity); `f_theta_prime` likewise for
/// `f′_θ`, whose last entry must equal the number of classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub proj_dim: usize,
    pub f_theta: Vec<usize>,
    pub f_theta_prime: Vec<usize>,
    pub dropout: f64,
    pub use_sos: bool,
    pub order: usize,
}

impl ModelConfig {
    /// Two-layer MLPs of width 64 on both sides of the filter.
    pub fn with_defaults(num_classes: usize, order: usize) -> Self {
        Self {
            proj_dim: 64,
            f_theta: vec![64, 64],
            f_theta_prime: vec![64, num_classes],
            dropout: 0.5,
            use_sos: true,
            order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    proj: usize,
    f_theta: Vec<(usize, usize)>,
    filter: usize,
    f_theta_prime: Vec<(usize, usize)>,
}

/// A named slice of the parameter vector, for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub input_dim: usize,
    pub alphabet: usize,
    pub words: Vec<Word>,
    /// Ordered: projection, `f_θ` layers (weight, bias), filter weights
    /// (`1 × C`), `f′_θ` layers (weight, bias).
    pub params: Vec<Matrix>,
    layout: Layout,
}

/// Half-width of the uniform filter initialization, `√(3/T)`: variance `1/T`.
pub fn filter_init_bound(retained_words: usize) -> f64 {
    libm::sqrt(3.0 / retained_words as f64)
}

/// `count` i.i.d. draws from `U[−√(3/T), √(3/T)]`.
pub fn uniform_filter_weights(rng: &mut Rng, retained_words: usize, count: usize) -> Vec<f64> {
    let bound = filter_init_bound(retained_words);
    (0..count).map(|_| rng.random_range(-bound..=bound)).collect()
}

fn uniform_matrix(rng: &mut Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

/// Deterministic initialization from `seed` (init stream). MLP layers use
/// `U[−1/√fan_in, 1/√fan_in]` for weights and biases.
pub fn init_model(input_dim: usize, alphabet: usize, words: Vec<Word>, config: ModelConfig, seed: u64) -> Result<Model> {
    if config.f_theta_prime.is_empty() {
        return Err(Error::InvalidValue("f'_theta needs at least the output layer".into()));
    }
    if words.is_empty() {
        return Err(Error::Empty("filter word set"));
    }
    if !(0.0..1.0).contains(&config.dropout) {
        return Err(Error::InvalidValue(format!("dropout {} outside [0, 1)", config.dropout)));
    }
    if input_dim == 0 || config.proj_dim == 0 || config.f_theta.iter().chain(&config.f_theta_prime).any(|&d| d == 0) {
        return Err(Error::InvalidValue("layer widths must be positive".into()));
    }
    // Validates word lengths and ids.
    let words = SosFilter::identity(alphabet, config.order, words)?.words().to_vec();

    let mut rng = stream(seed, Stream::Init);
    let mut params = Vec::new();
    let proj = params.len();
    params.push(uniform_matrix(&mut rng, input_dim, config.proj_dim, 1.0 / libm::sqrt(input_dim as f64)));
    let mut width = config.proj_dim;
    let mlp = |widths: &[usize], width: &mut usize, params: &mut Vec<Matrix>, rng: &mut Rng| {
        let mut layers = Vec::new();
        for &out in widths {
            let bound = 1.0 / libm::sqrt(*width as f64);
            layers.push((params.len(), params.len() + 1));
            params.push(uniform_matrix(rng, *width, out, bound));
            params.push(uniform_matrix(rng, 1, out, bound));
            *width = out;
        }
        layers
    };
    let f_theta = mlp(&config.f_theta, &mut width, &mut params, &mut rng);
    let filter = params.len();
    let weights = uniform_filter_weights(&mut rng, words.len(), words.len());
    params.push(Matrix::from_vec(1, words.len(), weights)?);
    let f_theta_prime = mlp(&config.f_theta_prime, &mut width, &mut params, &mut rng);

    Ok(Model {
        config,
        input_dim,
        alphabet,
        words,
        params,
        layout: Layout {
            proj,
            f_theta,
            filter,
            f_theta_prime,
        },
    })
}

impl Model {
    /// Rebuilds a model from a flat parameter list in layout order.
    pub fn from_params(input_dim: usize, alphabet: usize, words: Vec<Word>, config: ModelConfig, params: Vec<Matrix>) -> Result<Model> {
        let mut model = init_model(input_dim, alphabet, words, config, 0)?;
        if params.len() != model.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter tensors, expected {}",
                params.len(),
                model.params.len()
            )));
        }
        for (i, (p, q)) in params.iter().zip(&model.params).enumerate() {
            if p.shape() != q.shape() {
                return Err(Error::DimensionMismatch(format!("parameter {i} shape")));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn num_classes(&self) -> usize {
        *self.config.f_theta_prime.last().expect("validated at init")
    }

    pub fn filter(&self) -> SosFilter {
        SosFilter::new(
            self.alphabet,
            self.config.order,
            self.words.clone(),
            self.params[self.layout.filter].as_slice().to_vec(),
        )
        .expect("model filter is valid")
    }

    pub fn filter_param_index(&self) -> usize {
        self.layout.filter
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let mut groups = vec![ParamGroup {
            name: "projection".into(),
            index: self.layout.proj,
        }];
        let push_mlp = |name: &str, layers: &[(usize, usize)], groups: &mut Vec<ParamGroup>| {
            for (i, &(w, b)) in layers.iter().enumerate() {
                groups.push(ParamGroup {
                    name: format!("{name}[{i}].weight"),
                    index: w,
                });
                groups.push(ParamGroup {
                    name: format!("{name}[{i}].bias"),
                    index: b,
                });
            }
        };
        push_mlp("f_theta", &self.layout.f_theta, &mut groups);
        groups.push(ParamGroup {
            name: "filter".into(),
            index: self.layout.filter,
        });
        push_mlp("f_theta_prime", &self.layout.f_theta_prime, &mut groups);
        groups.sort_by_key(|g| g.index);
        groups
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.rows() * p.cols()).sum()
    }
}

/// Words and `(u, v)` contributions for the decoupled path.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledPlan {
    pub terms: Vec<Word>,
    contributions: Vec<(usize, usize, Option<usize>)>,
}

impl DecoupledPlan {
    pub fn new(model: &Model, ops: &OperatorSet) -> Result<Self> {
        if model.config.use_sos {
            let plan = ExpansionPlan::new(ops.len(), &model.words, &ops.masks())?;
            Ok(Self {
                contributions: plan.pairs.iter().map(|p| (p.term, p.left, Some(p.right))).collect(),
                terms: plan.terms,
            })
        } else {
            Ok(Self {
                terms: model.words.clone(),
                contributions: (0..model.words.len()).map(|i| (i, i, None)).collect(),
            })
        }
    }
}

/// Where the propagated features come from.
#[derive(Clone, Copy)]
pub enum ForwardMode<'a> {
    /// Propagation after `f`: `f′(S f(X W))`; logits for every node.
    Full,
    /// Precomputed `S X` rows: `f′(f((S X)[rows] W))`; logits for `rows` only.
    Decoupled {
        store: &'a PropagationStore,
        plan: &'a DecoupledPlan,
        rows: &'a [usize],
    },
}

fn mlp<'g>(
    tape: &mut Tape<'g>,
    model: &Model,
    layers: &[(usize, usize)],
    mut h: Var,
    dropout: &mut Option<&mut Rng>,
) -> Result<Var> {
    for (i, &(w, b)) in layers.iter().enumerate() {
        if let Some(rng) = dropout.as_deref_mut() {
            let p = model.config.dropout;
            if p > 0.0 {
                let keep = 1.0 / (1.0 - p);
                let len = tape.value(h).as_slice().len();
                let mask = (0..len).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
                h = tape.dropout(h, mask);
            }
        }
        let wv = tape.param(w, model.params[w].clone());
        let bv = tape.param(b, model.params[b].clone());
        h = tape.matmul(h, wv)?;
        h = tape.add_row(h, bv)?;
        if i + 1 < layers.len() {
            h = tape.relu(h);
        }
    }
    Ok(h)
}

/// Records the forward pass; returns the logits node.
fn record<'g>(
    tape: &mut Tape<'g>,
    model: &Model,
    ops: &'g OperatorSet,
    x: &Matrix,
    mode: ForwardMode<'_>,
    mut dropout: Option<&mut Rng>,
) -> Result<Var> {
    if ops.len() != model.alphabet {
        return Err(Error::DimensionMismatch(format!(
            "model filter has {} operators, graph has {}",
            model.alphabet,
            ops.len()
        )));
    }
    let weights = tape.param(model.layout.filter, model.params[model.layout.filter].clone());
    let proj = tape.param(model.layout.proj, model.params[model.layout.proj].clone());
    let logits = match mode {
        ForwardMode::Full => {
            if x.shape() != (ops.num_nodes(), model.input_dim) {
                return Err(Error::DimensionMismatch(format!(
                    "features are {}x{}, expected {}x{}",
                    x.rows(),
                    x.cols(),
                    ops.num_nodes(),
                    model.input_dim
                )));
            }
            let input = tape.leaf(x.clone());
            let h = tape.matmul(input, proj)?;
            let h = mlp(tape, model, &model.layout.f_theta, h, &mut dropout)?;
            let y = tape.propagate(h, weights, ops, &model.words, model.config.order, model.config.use_sos)?;
            mlp(tape, model, &model.layout.f_theta_prime, y, &mut dropout)?
        }
        ForwardMode::Decoupled { store, plan, rows } => {
            if store.d != model.input_dim {
                return Err(Error::DimensionMismatch(format!(
                    "store holds {} columns, model expects {}",
                    store.d, model.input_dim
                )));
            }
            if let Some(&r) = rows.iter().find(|&&r| r >= store.n) {
                return Err(Error::NodeOutOfRange { node: r, n: store.n });
            }
            let terms = plan
                .terms
                .iter()
                .map(|w| store.get(w).map(|m| m.select_rows(rows)))
                .collect::<Result<Vec<_>>>()?;
            let y = tape.decoupled(weights, terms, plan.contributions.clone())?;
            let h = tape.matmul(y, proj)?;
            let h = mlp(tape, model, &model.layout.f_theta, h, &mut dropout)?;
            mlp(tape, model, &model.layout.f_theta_prime, h, &mut dropout)?
        }
    };
    if !tape.value(logits).is_finite() {
        return Err(Error::NonFinite("logits"));
    }
    Ok(logits)
}

/// Dropout-free logits. In full mode row `i` is node `i`; in decoupled mode
/// row `k` is node `rows[k]`.
pub fn forward(model: &Model, ops: &OperatorSet, x: &Matrix, mode: ForwardMode<'_>) -> Result<Matrix> {
    let mut tape = Tape::new();
    let z = record(&mut tape, model, ops, x, mode, None)?;
    Ok(tape.value(z).clone())
}

/// Mean softmax cross-entropy over `rows` and exact gradients for every
/// parameter (zeros for parameters that do not influence the loss).
///
/// `labels` is indexed by node id. In decoupled mode the loss covers the
/// mode's own rows and `rows` must equal them.
pub fn loss_and_grads(
    model: &Model,
    ops: &OperatorSet,
    x: &Matrix,
    labels: &[Option<usize>],
    rows: &[usize],
    mode: ForwardMode<'_>,
    dropout: Option<&mut Rng>,
) -> Result<(f64, Vec<Matrix>)> {
    if rows.is_empty() {
        return Err(Error::Empty("training mask"));
    }
    let targets = rows
        .iter()
        .map(|&r| {
            labels
                .get(r)
                .copied()
                .flatten()
                .ok_or_else(|| Error::InvalidValue(format!("node {r} has no label")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tape = Tape::new();
    let logits = record(&mut tape, model, ops, x, mode, dropout)?;
    let loss_rows: Vec<usize> = match mode {
        ForwardMode::Full => rows.to_vec(),
        ForwardMode::Decoupled { rows: batch, .. } => {
            if batch != rows {
                return Err(Error::InvalidValue("decoupled rows must match the loss rows".into()));
            }
            (0..rows.len()).collect()
        }
    };
    let loss = tape.softmax_cross_entropy(logits, loss_rows, targets)?;
    let grads = tape.backward(loss, model.params.len())?;
    let grads = grads
        .into_iter()
        .zip(&model.params)
        .map(|(g, p)| g.unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols())))
        .collect();
    Ok((tape.value(loss)[(0, 0)], grads))
}
