//! Acceptance criteria 1-9. Runs as a plain binary and prints one
//! `PASS`/`FAIL` line per criterion; exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use pshgcn::config::RunConfig;
use pshgcn::pipeline::run_training;
use pshgcn::suite::{self, CheckReport};
use pshgcn::synth::{generate_synthetic, SynthSpec};

const SEED: u64 = 20240601;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn from_checks(id: u32, name: &'static str, checks: &[CheckReport], need_trials: usize, limit_s: u64, elapsed: Duration) -> Outcome {
    let trials_ok = checks.iter().all(|c| c.trials >= need_trials);
    let passed = checks.iter().all(|c| c.passed) && trials_ok && within(elapsed, limit_s);
    let mut detail: Vec<String> = checks
        .iter()
        .map(|c| format!("{} trials={} worst {}={:.3e}", c.name, c.trials, c.statistic, c.worst))
        .collect();
    detail.push(format!("{:.1}s (limit {limit_s}s)", elapsed.as_secs_f64()));
    for c in checks {
        detail.extend(c.failures.iter().take(3).cloned());
    }
    Outcome {
        id,
        name,
        passed,
        detail: detail.join("; "),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

// 1. Min eigenvalue of the symmetrized dense gᵀg >= -1e-8 ‖H‖max on 100
// random pairs, n <= 100, R <= 4, K <= 3.
fn psd_guarantee() -> Outcome {
    let (c, t) = timed(|| suite::psd_guarantee(100, SEED));
    from_checks(1, "PSD guarantee of gᵀg", &[c], 100, 60, t)
}

// 2. α(αI + (1−α)γ)⁻¹ passes check_psd for 100 symmetric and 100
// nonsymmetric PSD γ (n = 25) at each α in {0.1, 0.3, 0.5, 0.7, 0.9}.
fn lemma1() -> Outcome {
    let (c, t) = timed(|| vec![suite::lemma1(100, false, SEED), suite::lemma1(100, true, SEED)]);
    from_checks(2, "resolvent PSD oracle", &c, 100 * suite::LEMMA1_ALPHAS.len(), 30, t)
}

// 3. Word count formula vs enumeration, R in [1,5], K in [0,5]; R=2,K=2 is 7.
fn term_count() -> Outcome {
    let (c, t) = timed(suite::term_count);
    from_checks(3, "term count", &[c], 30, 1, t)
}

// 4. No pruned word is nonzero on 20 random graphs, DBLP- and ACM-style
// signatures, K = 3.
fn pruning() -> Outcome {
    let (c, t) = timed(|| {
        vec![
            suite::pruning("pruning_dblp", 4, &suite::dblp_signatures(), 3, 20, SEED),
            suite::pruning("pruning_acm", 3, &suite::acm_signatures(), 3, 20, SEED),
        ]
    });
    from_checks(4, "pruning soundness", &c, 20, 60, t)
}

// 5. Direct vs decoupled propagation, max-abs diff <= 1e-10, 20 trials.
fn decoupling() -> Outcome {
    let (c, t) = timed(|| suite::decoupling(20, SEED));
    let ok = c.tolerance == 1e-10;
    let mut o = from_checks(5, "decoupling equivalence", &[c], 20, 60, t);
    o.passed &= ok;
    o
}

// 6. Every parameter group within 1e-4 relative error of central
// differences (h = 1e-5) on n = 12 instances.
fn gradients() -> Outcome {
    let (c, t) = timed(|| suite::gradients(4, SEED));
    let ok = c.tolerance == 1e-4;
    let mut o = from_checks(6, "gradient check", &[c], 4, 30, t);
    o.passed &= ok;
    o
}

// 7. Default synthetic task, 5 seeds: mean test micro-F1 of PSHGCN >= 0.90
// and above the ablation's mean.
fn end_to_end() -> Outcome {
    let seeds: Vec<u64> = (0..5).collect();
    let (results, t) = timed(|| {
        std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .iter()
                .flat_map(|&seed| [(seed, true), (seed, false)])
                .map(|(seed, use_sos)| {
                    scope.spawn(move || {
                        let bundle = generate_synthetic(&SynthSpec { seed, ..SynthSpec::default() })?;
                        let cfg = RunConfig {
                            seed,
                            use_sos,
                            order: 2,
                            ..RunConfig::default()
                        };
                        let run = run_training(&bundle, &cfg, None).map_err(|f| f.error)?;
                        Ok::<_, pshgcn::Error>((seed, use_sos, run.metrics.micro_f1))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect::<Vec<_>>()
        })
    });
    let mut sos = Vec::new();
    let mut ablation = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok((_, true, f)) => sos.push(f),
            Ok((_, false, f)) => ablation.push(f),
            Err(e) => errors.push(e.to_string()),
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let (ms, ma) = (mean(&sos), mean(&ablation));
    let passed = errors.is_empty() && sos.len() == 5 && ms >= 0.90 && ms > ma && within(t, 600);
    Outcome {
        id: 7,
        name: "end-to-end synthetic task",
        passed,
        detail: format!(
            "PSHGCN mean micro-F1 {ms:.4} {sos:.4?}; ablation {ma:.4} {ablation:.4?}; threshold 0.90; {:.1}s (limit 600s){}",
            t.as_secs_f64(),
            if errors.is_empty() { String::new() } else { format!("; errors {errors:?}") }
        ),
    }
}

// 8. Trie path vs dense oracle within 1e-10 on 50 trials.
fn oracle_cross_check() -> Outcome {
    let (c, t) = timed(|| suite::oracle_cross_check(50, SEED));
    let ok = c.tolerance == 1e-10;
    let mut o = from_checks(8, "oracle cross-check", &[c], 50, 30, t);
    o.passed &= ok;
    o
}

// 9. Two `train` runs with the same seed give byte-identical metrics.json
// and checkpoints.
fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_pshgcn");
    let dir = tempfile::tempdir().expect("tempdir");
    let d = dir.path();
    let run = |args: &[&str]| Command::new(bin).args(args).output().map(|o| o.status.success());
    let p = |x: &Path| x.to_str().expect("utf-8 path").to_string();
    let data = p(&d.join("data"));
    let mut ok = run(&["synth", "--out", &data, "--seed", "3"]).unwrap_or(false);
    for out in ["a", "b"] {
        let out = p(&d.join(out));
        ok &= run(&["train", "--data", &data, "--out", &out, "--seed", "11", "--epochs", "60"]).unwrap_or(false);
    }
    let same = |f: &str| match (fs::read(d.join("a").join(f)), fs::read(d.join("b").join(f))) {
        (Ok(a), Ok(b)) => !a.is_empty() && a == b,
        _ => false,
    };
    let (m, c) = (same("metrics.json"), same("checkpoint.bin"));
    Outcome {
        id: 9,
        name: "determinism",
        passed: ok && m && c,
        detail: format!("commands ok {ok}; metrics.json identical {m}; checkpoint.bin identical {c}"),
    }
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 9] = [
        psd_guarantee,
        lemma1,
        term_count,
        pruning,
        decoupling,
        gradients,
        end_to_end,
        oracle_cross_check,
        determinism,
    ];
    let mut all = true;
    for criterion in criteria {
        let o = criterion();
        all &= o.passed;
        println!(
            "{} criterion {}: {} -- {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
