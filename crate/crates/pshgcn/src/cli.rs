use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pshgcn_core::conv::{decoupled_words, precompute_propagations};
use pshgcn_core::linalg::eig::symmetric_eigenvalues;
use pshgcn_core::nn::{init_model, ModelConfig};
use pshgcn_core::verify::{check_psd, dense_filter};
use pshgcn_core::words::expand_sos;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{ModeChoice, OperatorChoice, RunConfig};
use crate::dataset::{load_dataset, save_dataset};
use crate::error::{Error, Result};
use crate::pipeline::{evaluate_checkpoint, prepare, run_training};
use crate::store::{load_store, save_store};
use crate::suite::{run_suite, SuiteOptions};
use crate::synth::{generate_synthetic, SynthSpec};
use crate::fsutil;

#[derive(Debug, Parser)]
#[command(name = "pshgcn", version, about = "Heterogeneous graph convolution with gᵀg polynomial filters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Train a model; writes checkpoint.bin and metrics.json.
    Train(TrainArgs),
    /// Precompute the propagation store for the decoupled path.
    Precompute(PrecomputeArgs),
    /// Score a checkpoint on a split.
    Eval(EvalArgs),
    /// Show retained words, weights, expanded coefficients and a dense
    /// eigenvalue summary.
    InspectFilter(InspectArgs),
    /// Run the verification suite and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// JSON synthetic spec; defaults to the built-in 2000-node spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file; flags win over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Propagation store directory for minibatch mode.
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub operator: Option<OperatorChoice>,
    #[arg(long)]
    pub order: Option<usize>,
    /// Train the variant that applies g once instead of gᵀg.
    #[arg(long)]
    pub ablation: bool,
    #[arg(long, value_enum)]
    pub mode: Option<ModeChoice>,
    #[arg(long)]
    pub lr_filter: Option<f64>,
    #[arg(long)]
    pub lr_mlp: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub proj_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub f_theta_layers: Option<usize>,
    #[arg(long)]
    pub f_theta_prime_layers: Option<usize>,
    #[arg(long)]
    pub max_store_words: Option<usize>,
    /// Record real elapsed milliseconds (metrics.json is then not reproducible).
    #[arg(long)]
    pub record_wall_time: bool,
    /// Fail with exit code 3 if the learned dense filter is not PSD.
    #[arg(long)]
    pub check_psd: bool,
}

impl TrainArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        macro_rules! flag {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f.clone() {
                    c.$f = v;
                }
            )*};
        }
        flag!(data, out, operator, order, mode, lr_filter, lr_mlp, weight_decay, epochs, patience, dropout, seed);
        flag!(batch_size, proj_dim, hidden, f_theta_layers, f_theta_prime_layers);
        if self.store.is_some() {
            c.store = self.store.clone();
        }
        if self.max_store_words.is_some() {
            c.max_store_words = self.max_store_words;
        }
        if self.ablation {
            c.use_sos = false;
        }
        if self.record_wall_time {
            c.record_wall_time = true;
        }
        if self.check_psd {
            c.check_psd = true;
        }
        if c.data.as_os_str().is_empty() || c.out.as_os_str().is_empty() {
            return Err(Error::Usage("train needs --data and --out (or data/out in the config file)".into()));
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct PrecomputeArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Store directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t)]
    pub operator: OperatorChoice,
    /// Store only the words of g (for the ablation variant).
    #[arg(long)]
    pub ablation: bool,
    #[arg(long)]
    pub max_words: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Propagation store for checkpoints trained in minibatch mode.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Show learned weights; without it, freshly initialized weights.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t)]
    pub operator: OperatorChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest graph for which the dense filter is materialized.
    #[arg(long, default_value_t = 500)]
    pub dense_limit: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run a reduced number of trials.
    #[arg(long)]
    pub quick: bool,
}

pub fn synth(args: &SynthArgs) -> Result<String> {
    let mut spec = match &args.spec {
        Some(p) => fsutil::read_json(p)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(n) = args.noise {
        spec.noise = n;
    }
    let bundle = generate_synthetic(&spec)?;
    save_dataset(&bundle, &args.out)?;
    Ok(format!(
        "wrote {} nodes, {} edges, {} edge types to {}\n",
        bundle.num_nodes(),
        bundle.graph.num_edges(),
        bundle.graph.num_edge_types(),
        args.out.display()
    ))
}

pub fn train(args: &TrainArgs) -> Result<String> {
    let cfg = args.resolve()?;
    let bundle = load_dataset(&cfg.data)?;
    let store = match (&cfg.store, cfg.mode) {
        (Some(dir), ModeChoice::Minibatch) => {
            let (index, store) = load_store(dir)?;
            if index.operator != cfg.operator {
                return Err(Error::Data(format!(
                    "store was built with {:?}, run uses {:?}",
                    index.operator, cfg.operator
                )));
            }
            Some(store)
        }
        _ => None,
    };
    fsutil::create_dir(&cfg.out)?;
    let metrics_path = cfg.out.join("metrics.json");
    match run_training(&bundle, &cfg, store.as_ref()) {
        Ok(run) => {
            save_checkpoint(&cfg.out.join("checkpoint.bin"), &run.header, &run.model)?;
            fsutil::write_json(&metrics_path, &run.metrics)?;
            Ok(format!(
                "best epoch {}: val micro-F1 {:.4}, test macro-F1 {:.4}, micro-F1 {:.4}\n",
                run.outcome.best_epoch, run.metrics.val.micro_f1, run.metrics.macro_f1, run.metrics.micro_f1
            ))
        }
        Err(failure) => {
            fsutil::write_json(&metrics_path, &failure.metrics)?;
            Err(failure.error)
        }
    }
}

pub fn precompute(args: &PrecomputeArgs) -> Result<String> {
    if args.order == 0 {
        return Err(Error::Usage("order must be >= 1".into()));
    }
    let bundle = load_dataset(&args.data)?;
    let prep = prepare(&bundle, args.operator, args.order)?;
    let words = decoupled_words(&prep.ops, &prep.words, !args.ablation)?;
    let store = precompute_propagations(&prep.ops, &prep.x, &words, args.max_words)?;
    save_store(&store, prep.ops.len(), args.operator, &args.out)?;
    Ok(format!(
        "stored {} words ({} x {} each) in {}\n",
        store.len(),
        store.n,
        store.d,
        args.out.display()
    ))
}

pub fn eval(args: &EvalArgs) -> Result<String> {
    let bundle = load_dataset(&args.data)?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let rows = bundle
        .splits
        .get(&args.split)
        .ok_or_else(|| Error::Usage(format!("unknown split {:?} (train, val, test)", args.split)))?;
    if rows.is_empty() {
        return Err(Error::Data(format!("split {} is empty", args.split)));
    }
    let store = match &args.store {
        Some(dir) => Some(load_store(dir)?.1),
        None => None,
    };
    let scores = evaluate_checkpoint(&bundle, &ckpt.header, &ckpt.model, rows, store.as_ref())?;
    let out = serde_json::json!({
        "split": args.split,
        "macro_f1": scores.macro_f1,
        "micro_f1": scores.micro_f1,
    });
    Ok(format!("{out}\n"))
}

pub fn inspect_filter(args: &InspectArgs) -> Result<String> {
    use std::fmt::Write as _;
    let bundle = load_dataset(&args.data)?;
    let (operator, order, filter) = match &args.checkpoint {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            (ckpt.header.operator, ckpt.header.order, ckpt.model.filter())
        }
        None => {
            if args.order == 0 {
                return Err(Error::Usage("order must be >= 1".into()));
            }
            let prep = prepare(&bundle, args.operator, args.order)?;
            let cfg = ModelConfig::with_defaults(bundle.num_classes.max(1), args.order);
            let model = init_model(prep.x.cols(), prep.ops.len(), prep.words, cfg, args.seed)?;
            (args.operator, args.order, model.filter())
        }
    };
    let ops = bundle.graph.operators(operator.into())?;
    if filter.alphabet() != ops.len() {
        return Err(Error::Data("checkpoint alphabet differs from the dataset".into()));
    }
    let mut s = String::new();
    let names: Vec<&str> = bundle.schema.edge_types.iter().map(|e| e.name.as_str()).collect();
    let spell = |w: &pshgcn_core::Word| -> String {
        let parts: Vec<String> = w
            .ops()
            .iter()
            .map(|&id| if id < names.len() { names[id].to_string() } else { format!("{}^T", names[id - names.len()]) })
            .collect();
        if parts.is_empty() { "I".into() } else { parts.join(" ") }
    };
    let _ = writeln!(s, "operator: {operator:?}, order K = {order}, edge types R = {}", ops.len());
    let _ = writeln!(s, "retained words ({}):", filter.len());
    for (w, x) in filter.words().iter().zip(filter.weights()) {
        let _ = writeln!(s, "  {:<16} {:<24} w = {x:+.6e}", w.to_string(), spell(w));
    }
    let expanded = expand_sos(&filter, &ops.masks())?;
    let _ = writeln!(s, "expanded terms of g^T g ({}):", expanded.len());
    for (w, c) in &expanded.terms {
        let _ = writeln!(s, "  {:<16} {:<24} c = {c:+.6e}", w.to_string(), spell(w));
    }
    let n = ops.num_nodes();
    if n <= args.dense_limit {
        let h = dense_filter(&filter, &ops)?;
        let eig = symmetric_eigenvalues(&h.symmetric_part())?;
        let check = check_psd(&h, None)?;
        let _ = writeln!(
            s,
            "dense filter (n = {n}): min eigenvalue {:+.6e}, max eigenvalue {:+.6e}, trace {:+.6e}, psd = {}",
            eig.first().copied().unwrap_or(0.0),
            eig.last().copied().unwrap_or(0.0),
            eig.iter().sum::<f64>(),
            check.is_psd
        );
    } else {
        let _ = writeln!(s, "dense filter skipped (n = {n} > dense limit {})", args.dense_limit);
    }
    Ok(s)
}

pub fn verify(args: &VerifyArgs) -> Result<(String, bool)> {
    let mut opts = SuiteOptions {
        seed: args.seed,
        ..SuiteOptions::default()
    };
    if args.quick {
        opts = SuiteOptions {
            seed: args.seed,
            psd_trials: 10,
            lemma1_trials: 10,
            pruning_trials: 3,
            pruning_order: 2,
            decoupling_trials: 5,
            gradient_trials: 2,
            oracle_trials: 5,
        };
    }
    let checks = run_suite(&opts);
    let passed = checks.iter().all(|c| c.passed);
    let report = serde_json::json!({ "passed": passed, "checks": checks });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    match &args.out {
        Some(path) => {
            fsutil::write_atomic(path, text.as_bytes())?;
            Ok((format!("wrote {}\n", path.display()), passed))
        }
        None => Ok((text, passed)),
    }
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Precompute(a) => precompute(a),
        Command::Eval(a) => eval(a),
        Command::InspectFilter(a) => inspect_filter(a),
        Command::Verify(a) => {
            let (text, passed) = verify(a)?;
            if passed {
                Ok(text)
            } else {
                print!("{text}");
                Err(Error::Check("verification suite reported failures".into()))
            }
        }
    }
}

/// Parses `args`, runs the command and maps errors to exit codes
/// (1 usage, 2 data, 3 numeric or assertion failure).
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

