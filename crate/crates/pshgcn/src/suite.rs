//! The checks behind the `verify` subcommand. Each returns a [`CheckReport`]
//! with the worst statistic seen over its trials.

use std::time::Instant;

use pshgcn_core::conv::apply_sos;
use pshgcn_core::nn::{gradient_check, init_model, ModelConfig};
use pshgcn_core::rng::{stream, Rng, Stream};
use pshgcn_core::verify::{
    all_words, check_psd, decoupling_equivalence, dense_filter, lemma1_convolution, pruning_soundness,
    random_filter, random_hetero_graph, random_psd_energy, standard_normal_vec, OptimizationEnergy,
};
use pshgcn_core::words::{count_all_words, enumerate_words};
use pshgcn_core::{EdgeSignature, Matrix, OperatorKind, OperatorSet, Result, SosFilter, TypeMask};
use rand::Rng as _;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    pub passed: bool,
    /// Worst value of the checked statistic (see `statistic`).
    pub worst: f64,
    pub statistic: String,
    pub tolerance: f64,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

fn report(name: &str, statistic: &str, tolerance: f64, start: Instant) -> CheckReport {
    CheckReport {
        name: name.into(),
        trials: 0,
        passed: true,
        worst: 0.0,
        statistic: statistic.into(),
        tolerance,
        seconds: start.elapsed().as_secs_f64(),
        failures: Vec::new(),
    }
}

fn finish(mut r: CheckReport, start: Instant) -> CheckReport {
    r.seconds = start.elapsed().as_secs_f64();
    r
}

fn fail_on_error(r: &mut CheckReport, trial: usize, e: pshgcn_core::Error) {
    r.passed = false;
    r.failures.push(format!("trial {trial}: {e}"));
}

/// A random graph with `1..=max_types` node types, `1..=max_r` edge types,
/// `n` nodes and operators of a random kind, plus a filter of random order
/// `1..=max_k` over its retained words.
pub fn random_instance(rng: &mut Rng, n: usize, max_r: usize, max_k: usize) -> Result<(OperatorSet, SosFilter)> {
    let types = rng.random_range(1..=3usize);
    let r = rng.random_range(1..=max_r);
    let sigs: Vec<EdgeSignature> = (0..r)
        .map(|_| EdgeSignature::new(rng.random_range(0..types), rng.random_range(0..types)))
        .collect();
    let density = rng.random_range(0.03..0.3);
    let graph = random_hetero_graph(rng, types, &sigs, n, density)?;
    let kind = if rng.random_bool(0.5) {
        OperatorKind::NormalizedAdjacency
    } else {
        OperatorKind::Laplacian
    };
    let ops = graph.operators(kind)?;
    let k = rng.random_range(1..=max_k);
    let words = enumerate_words(r, k, &ops.masks())?;
    let filter = random_filter(rng, r, k, words)?;
    Ok((ops, filter))
}

/// Every dense `gᵀg` has a symmetric part with min eigenvalue
/// `>= -1e-8 · ‖H‖_max`. Statistic: min eigenvalue over `‖H‖_max`.
pub fn psd_guarantee(trials: usize, seed: u64) -> CheckReport {
    let start = Instant::now();
    let mut r = report("psd_guarantee", "min_eigenvalue / max_abs(H)", -1e-8, start);
    r.trials = trials;
    r.worst = f64::INFINITY;
    let mut rng = stream(seed, Stream::Verify);
    for t in 0..trials {
        let n = rng.random_range(10..=100);
        let run = random_instance(&mut rng, n, 4, 3).and_then(|(ops, f)| {
            let h = dense_filter(&f, &ops)?;
            Ok((check_psd(&h, None)?, h.max_abs()))
        });
        match run {
            Ok((c, scale)) => {
                let ratio = if scale > 0.0 { c.min_eigenvalue / scale } else { 0.0 };
                r.worst = r.worst.min(ratio);
                if !c.is_psd {
                    r.passed = false;
                    r.failures.push(format!("trial {t}: min eigenvalue {}", c.min_eigenvalue));
                }
            }
            Err(e) => fail_on_error(&mut r, t, e),
        }
    }
    finish(r, start)
}

pub const LEMMA1_ALPHAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// `α(αI + (1−α)γ)⁻¹` passes `check_psd` for random PSD `γ` (n = 25).
/// Statistic: min eigenvalue of the symmetric part.
pub fn lemma1(trials: usize, nonsymmetric: bool, seed: u64) -> CheckReport {
    let start = Instant::now();
    let name = if nonsymmetric { "lemma1_nonsymmetric" } else { "lemma1_symmetric" };
    let mut r = report(name, "min_eigenvalue", 0.0, start);
    r.worst = f64::INFINITY;
    let mut rng = stream(seed ^ u64::from(nonsymmetric), Stream::Verify);
    for t in 0..trials {
        let gamma = random_psd_energy(&mut rng, 25, nonsymmetric);
        for alpha in LEMMA1_ALPHAS {
            r.trials += 1;
            let run = OptimizationEnergy::new(gamma.clone(), alpha)
                .and_then(|e| lemma1_convolution(&e))
                .and_then(|h| check_psd(&h, None));
            match run {
                Ok(c) => {
                    r.worst = r.worst.min(c.min_eigenvalue);
                    if !c.is_psd {
                        r.passed = false;
                        r.failures.push(format!("trial {t}, alpha {alpha}: min eigenvalue {}", c.min_eigenvalue));
                    }
                }
                Err(e) => fail_on_error(&mut r, t, e),
            }
        }
    }
    finish(r, start)
}

/// The closed-form count equals exhaustive enumeration for `R ∈ [1, 5]`,
/// `K ∈ [0, 5]`, and `R = 2, K = 2` gives 7. Statistic: mismatches.
pub fn term_count() -> CheckReport {
    let start = Instant::now();
    let mut r = report("term_count", "mismatches", 0.0, start);
    for alphabet in 1..=5 {
        for order in 0..=5 {
            r.trials += 1;
            let full = vec![TypeMask::full(1); alphabet];
            let formula = count_all_words(alphabet, order);
            let enumerated = enumerate_words(alphabet, order, &full).map(|w| w.len() as u64);
            let brute = all_words(alphabet, order).len() as u64;
            match (formula, enumerated) {
                (Ok(f), Ok(e)) if f == e && e == brute => {}
                (f, e) => {
                    r.worst += 1.0;
                    r.passed = false;
                    r.failures.push(format!("R={alphabet} K={order}: formula {f:?}, enumeration {e:?}, brute {brute}"));
                }
            }
        }
    }
    if count_all_words(2, 2).ok() != Some(7) {
        r.worst += 1.0;
        r.passed = false;
        r.failures.push("R=2, K=2 is not 7".into());
    }
    finish(r, start)
}

/// Author 0, paper 1, term 2, venue 3 with both directions of each relation.
pub fn dblp_signatures() -> Vec<EdgeSignature> {
    [(0, 1), (1, 0), (1, 2), (2, 1), (1, 3), (3, 1)]
        .into_iter()
        .map(|(s, d)| EdgeSignature::new(s, d))
        .collect()
}

/// Paper 0, author 1, subject 2 plus paper citations.
pub fn acm_signatures() -> Vec<EdgeSignature> {
    [(0, 0), (0, 1), (1, 0), (0, 2), (2, 0)]
        .into_iter()
        .map(|(s, d)| EdgeSignature::new(s, d))
        .collect()
}

/// Every pruned word is the zero matrix on every random graph.
/// Statistic: counterexamples.
pub fn pruning(name: &str, num_types: usize, signatures: &[EdgeSignature], order: usize, trials: usize, seed: u64) -> CheckReport {
    let start = Instant::now();
    let mut r = report(name, "counterexamples", 0.0, start);
    r.trials = trials;
    for kind in [OperatorKind::NormalizedAdjacency, OperatorKind::Laplacian] {
        match pruning_soundness(num_types, signatures, kind, order, trials, seed) {
            Ok(p) => {
                r.worst += p.counterexamples.len() as f64;
                for c in &p.counterexamples {
                    r.passed = false;
                    r.failures.push(format!("{kind:?}: word {} nonzero on graph seed {}", c.word, c.graph_seed));
                }
            }
            Err(e) => fail_on_error(&mut r, 0, e),
        }
    }
    finish(r, start)
}

/// Direct and decoupled propagation agree. Statistic: max-abs difference.
pub fn decoupling(trials: usize, seed: u64) -> CheckReport {
    let start = Instant::now();
    let mut r = report("decoupling_equivalence", "max_abs_diff", 1e-10, start);
    r.trials = trials;
    let mut rng = stream(seed, Stream::Verify);
    for t in 0..trials {
        let n = rng.random_range(10..=100);
        let run = random_instance(&mut rng, n, 4, 3).and_then(|(ops, f)| {
            let x = Matrix::from_vec(n, 4, standard_normal_vec(&mut rng, n * 4))?;
            decoupling_equivalence(&ops, &f, &x)
        });
        match run {
            Ok(d) => {
                r.worst = r.worst.max(d);
                if d > r.tolerance {
                    r.passed = false;
                    r.failures.push(format!("trial {t}: diff {d}"));
                }
            }
            Err(e) => fail_on_error(&mut r, t, e),
        }
    }
    finish(r, start)
}

/// The sparse trie path matches the dense oracle `H·X`.
/// Statistic: max-abs difference.
pub fn oracle_cross_check(trials: usize, seed: u64) -> CheckReport {
    let start = Instant::now();
    let mut r = report("oracle_cross_check", "max_abs_diff", 1e-10, start);
    r.trials = trials;
    let mut rng = stream(seed, Stream::Verify);
    for t in 0..trials {
        let n = rng.random_range(10..=100);
        let run = random_instance(&mut rng, n, 4, 3).and_then(|(ops, f)| {
            let x = Matrix::from_vec(n, 3, standard_normal_vec(&mut rng, n * 3))?;
            let sparse = apply_sos(&f, &ops, &x)?;
            let dense = dense_filter(&f, &ops)?.matmul(&x)?;
            Ok(sparse.max_abs_diff(&dense))
        });
        match run {
            Ok(d) => {
                r.worst = r.worst.max(d);
                if d > r.tolerance {
                    r.passed = false;
                    r.failures.push(format!("trial {t}: diff {d}"));
                }
            }
            Err(e) => fail_on_error(&mut r, t, e),
        }
    }
    finish(r, start)
}

/// Reverse-mode gradients vs central differences (h = 1e-5) on n = 12
/// instances, for the SOS model and the ablation. Statistic: max relative
/// error over all parameter groups.
pub fn gradients(trials: usize, seed: u64) -> CheckReport {
    let start = Instant::now();
    let mut r = report("gradient_check", "max_relative_error", 1e-4, start);
    r.trials = trials;
    let mut rng = stream(seed, Stream::Verify);
    for t in 0..trials {
        let n = 12;
        let run = random_instance(&mut rng, n, 3, 2).and_then(|(ops, f)| {
            let x = Matrix::from_vec(n, 3, standard_normal_vec(&mut rng, n * 3))?;
            let labels: Vec<Option<usize>> = (0..n).map(|_| Some(rng.random_range(0..3))).collect();
            let rows: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
            let rows = if rows.is_empty() { vec![0] } else { rows };
            let cfg = ModelConfig {
                proj_dim: 4,
                f_theta: vec![5],
                f_theta_prime: vec![4, 3],
                dropout: 0.0,
                use_sos: t % 2 == 0,
                order: f.order(),
            };
            let model = init_model(3, ops.len(), f.words().to_vec(), cfg, seed.wrapping_add(t as u64))?;
            let checks = gradient_check(&model, &ops, &x, &labels, &rows, 1e-5)?;
            Ok(checks)
        });
        match run {
            Ok(checks) => {
                for c in checks {
                    r.worst = r.worst.max(c.max_rel_error);
                    if c.max_rel_error > r.tolerance {
                        r.passed = false;
                        r.failures.push(format!("trial {t}: {} rel err {}", c.group, c.max_rel_error));
                    }
                }
            }
            Err(e) => fail_on_error(&mut r, t, e),
        }
    }
    finish(r, start)
}

/// Trial counts for the full suite.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub seed: u64,
    pub psd_trials: usize,
    pub lemma1_trials: usize,
    pub pruning_trials: usize,
    pub pruning_order: usize,
    pub decoupling_trials: usize,
    pub gradient_trials: usize,
    pub oracle_trials: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            psd_trials: 100,
            lemma1_trials: 100,
            pruning_trials: 20,
            pruning_order: 3,
            decoupling_trials: 20,
            gradient_trials: 4,
            oracle_trials: 50,
        }
    }
}

pub fn run_suite(o: &SuiteOptions) -> Vec<CheckReport> {
    vec![
        psd_guarantee(o.psd_trials, o.seed),
        lemma1(o.lemma1_trials, false, o.seed),
        lemma1(o.lemma1_trials, true, o.seed),
        term_count(),
        pruning("pruning_dblp", 4, &dblp_signatures(), o.pruning_order, o.pruning_trials, o.seed),
        pruning("pruning_acm", 3, &acm_signatures(), o.pruning_order, o.pruning_trials, o.seed),
        decoupling(o.decoupling_trials, o.seed),
        gradients(o.gradient_trials, o.seed),
        oracle_cross_check(o.oracle_trials, o.seed),
    ]
}
