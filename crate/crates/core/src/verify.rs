//! Dense oracles for the properties the convolution relies on.
//!
//! Everything here works on explicit dense matrices and multiplies word
//! products left to right, which is a different evaluation order from the
//! sparse trie path in [`crate::conv`], so agreement between the two is a
//! meaningful check.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::conv::{apply_sos, decoupled_forward, precompute_propagations};
use crate::graph::{Edge, EdgeSignature, HeteroGraph, OperatorKind, OperatorSet};
use crate::linalg::{eig, solve, Matrix};
use crate::rng::{stream, Rng, Stream};
use crate::words::{enumerate_words, expand_sos, ExpansionPlan, SosFilter, Word};
use crate::{Error, Result};

/// Largest graph the dense oracles accept.
pub const DENSE_CAP: usize = 2000;

fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(Error::DenseCapExceeded { n, cap: DENSE_CAP });
    }
    Ok(())
}

/// Dense product `P_r1 P_r2 ⋯ P_rk`, multiplied left to right.
pub fn dense_word(word: &Word, ops: &OperatorSet) -> Result<Matrix> {
    let n = ops.num_nodes();
    check_cap(n)?;
    let mut m = Matrix::identity(n);
    for &r in word.ops() {
        if r >= 2 * ops.len() {
            return Err(Error::DimensionMismatch(alloc::format!("operator id {r} out of range")));
        }
        m = m.matmul(&ops.dense(r))?;
    }
    Ok(m)
}

/// Dense `g(P)`.
pub fn dense_g(filter: &SosFilter, ops: &OperatorSet) -> Result<Matrix> {
    if filter.alphabet() != ops.len() {
        return Err(Error::DimensionMismatch("filter alphabet vs operator count".into()));
    }
    let n = ops.num_nodes();
    check_cap(n)?;
    let mut g = Matrix::zeros(n, n);
    for (word, &w) in filter.words().iter().zip(filter.weights()) {
        g.axpy(w, &dense_word(word, ops)?);
    }
    Ok(g)
}

/// Dense `H = g(P)ᵀ g(P)`.
pub fn dense_filter(filter: &SosFilter, ops: &OperatorSet) -> Result<Matrix> {
    let g = dense_g(filter, ops)?;
    g.t_matmul(&g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCheck {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
}

/// Quadratic-form PSD test: eigenvalues of `(H + Hᵀ)/2` must be `≥ −tol`.
/// The default tolerance is `1e-8 · ‖H‖_max`.
pub fn check_psd(h: &Matrix, tol: Option<f64>) -> Result<PsdCheck> {
    if h.rows() != h.cols() {
        return Err(Error::DimensionMismatch("PSD check needs a square matrix".into()));
    }
    if !h.is_finite() {
        return Err(Error::NonFinite("PSD check input"));
    }
    let tolerance = tol.unwrap_or(1e-8 * h.max_abs());
    let eigenvalues = eig::symmetric_eigenvalues(&h.symmetric_part())?;
    let min_eigenvalue = eigenvalues.first().copied().unwrap_or(0.0);
    Ok(PsdCheck {
        is_psd: min_eigenvalue >= -tolerance,
        min_eigenvalue,
        tolerance,
    })
}

/// Energy `γ(P)` and trade-off `α` of the graph optimization problem
/// `min_y (1−α) yᵀγy + α‖y − x‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationEnergy {
    gamma: Matrix,
    alpha: f64,
}

impl OptimizationEnergy {
    pub fn new(gamma: Matrix, alpha: f64) -> Result<Self> {
        if gamma.rows() != gamma.cols() {
            return Err(Error::DimensionMismatch("energy matrix must be square".into()));
        }
        if !gamma.is_finite() {
            return Err(Error::NonFinite("energy matrix"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidValue(alloc::format!("alpha {alpha} outside (0, 1)")));
        }
        Ok(Self { gamma, alpha })
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

const LEMMA_PROBES: usize = 16;

/// Closed-form minimizer operator `H = α[αI + (1−α)γ]⁻¹`.
///
/// The quadratic form of `γ` is probed on a fixed set of random vectors first;
/// a negative probe means the energy is not PSD and the call is rejected.
pub fn lemma1_convolution(energy: &OptimizationEnergy) -> Result<Matrix> {
    let n = energy.gamma.rows();
    check_cap(n)?;
    let mut rng = stream(0x1e11a, Stream::Verify);
    let scale = energy.gamma.max_abs().max(1.0);
    for _ in 0..LEMMA_PROBES {
        let x = Matrix::column(&standard_normal_vec(&mut rng, n));
        let gx = energy.gamma.matmul(&x)?;
        let q = x.dot(&gx);
        if q < -1e-10 * scale * x.dot(&x) {
            return Err(Error::InvalidValue(alloc::format!(
                "energy quadratic form is negative ({q:e}) on a probe vector"
            )));
        }
    }
    let a = energy.alpha;
    let mut system = energy.gamma.scaled(1.0 - a);
    for i in 0..n {
        system[(i, i)] += a;
    }
    let mut h = solve::inverse(&system)?;
    h.scale(a);
    Ok(h)
}

/// Random PSD energy `MᵀM` (entries of `M` standard normal), optionally plus a
/// random antisymmetric part that leaves the quadratic form unchanged.
pub fn random_psd_energy(rng: &mut Rng, n: usize, nonsymmetric: bool) -> Matrix {
    let m = Matrix::from_vec(n, n, standard_normal_vec(rng, n * n)).expect("n*n values");
    let mut gamma = m.t_matmul(&m).expect("square");
    if nonsymmetric {
        let b = Matrix::from_vec(n, n, standard_normal_vec(rng, n * n)).expect("n*n values");
        let skew = Matrix::from_fn(n, n, |i, j| b[(i, j)] - b[(j, i)]);
        gamma.axpy(1.0, &skew);
    }
    gamma
}

pub fn standard_normal_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random graph honoring `signatures`: every node type gets at least one
/// node, and each type-compatible ordered pair is an edge with probability
/// `density` and a random positive weight.
pub fn random_hetero_graph(
    rng: &mut Rng,
    num_node_types: usize,
    signatures: &[EdgeSignature],
    n: usize,
    density: f64,
) -> Result<HeteroGraph> {
    if n < num_node_types {
        return Err(Error::InvalidValue("fewer nodes than node types".into()));
    }
    let mut node_type: Vec<usize> = (0..n)
        .map(|i| if i < num_node_types { i } else { rng.random_range(0..num_node_types) })
        .collect();
    // Interleave types so node ids do not reveal them.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        node_type.swap(i, j);
    }
    let mut edges = Vec::new();
    for (r, sig) in signatures.iter().enumerate() {
        for i in 0..n {
            if node_type[i] != sig.src_type {
                continue;
            }
            for j in 0..n {
                if node_type[j] == sig.dst_type && rng.random::<f64>() < density {
                    edges.push(Edge::weighted(i, j, r, rng.random_range(0.25..2.0)));
                }
            }
        }
    }
    HeteroGraph::build(num_node_types, node_type, signatures.to_vec(), &edges)
}

/// Filter over `words` with standard normal weights.
pub fn random_filter(rng: &mut Rng, alphabet: usize, order: usize, words: Vec<Word>) -> Result<SosFilter> {
    let weights = standard_normal_vec(rng, words.len());
    SosFilter::new(alphabet, order, words, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub word: Word,
    pub trial: usize,
    pub graph_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruningReport {
    pub retained: usize,
    pub pruned: Vec<Word>,
    pub trials: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl PruningReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Checks that every word pruned by the type masks is the exact zero matrix
/// on `trials` random graphs (n = 30) honoring the signatures.
pub fn pruning_soundness(
    num_node_types: usize,
    signatures: &[EdgeSignature],
    kind: OperatorKind,
    order: usize,
    trials: usize,
    seed: u64,
) -> Result<PruningReport> {
    if trials == 0 {
        return Err(Error::InvalidValue("pruning check needs at least one trial".into()));
    }
    let alphabet = signatures.len();
    let mut report = PruningReport {
        retained: 0,
        pruned: Vec::new(),
        trials,
        counterexamples: Vec::new(),
    };
    for trial in 0..trials {
        let graph_seed = seed.wrapping_add(trial as u64);
        let mut rng = stream(graph_seed, Stream::Verify);
        let graph = random_hetero_graph(&mut rng, num_node_types, signatures, 30, 0.3)?;
        let ops = graph.operators(kind)?;
        let masks = ops.masks();
        let retained = enumerate_words(alphabet, order, &masks)?;
        if trial == 0 {
            report.retained = retained.len();
            report.pruned = all_words(alphabet, order)
                .into_iter()
                .filter(|w| retained.binary_search(w).is_err())
                .collect();
        }
        for word in &report.pruned {
            if dense_word(word, &ops)?.max_abs() != 0.0 {
                report.counterexamples.push(Counterexample {
                    word: word.clone(),
                    trial,
                    graph_seed,
                });
            }
        }
    }
    Ok(report)
}

/// Every word of length `≤ order`, canonical order (brute force).
pub fn all_words(alphabet: usize, order: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut level = vec![Word::empty()];
    for _ in 0..order {
        let mut next = Vec::new();
        for w in &level {
            for r in 0..alphabet {
                let mut ops = w.ops().to_vec();
                ops.push(r);
                next.push(Word::from(ops));
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out.sort();
    out
}

/// `‖apply_sos(f, X) − decoupled(expand_sos(f), precompute(X))‖_max`.
pub fn decoupling_equivalence(ops: &OperatorSet, filter: &SosFilter, x: &Matrix) -> Result<f64> {
    if ops.num_nodes() > 500 {
        return Err(Error::DenseCapExceeded {
            n: ops.num_nodes(),
            cap: 500,
        });
    }
    let direct = apply_sos(filter, ops, x)?;
    let masks = ops.masks();
    let plan = ExpansionPlan::new(ops.len(), filter.words(), &masks)?;
    let store = precompute_propagations(ops, x, &plan.terms, None)?;
    let expanded = expand_sos(filter, &masks)?;
    let decoupled = decoupled_forward(&expanded, &store, None)?;
    Ok(direct.max_abs_diff(&decoupled))
}
