//! Run configuration and the flat `key = value` config file.
//!
//! Every key matches the long CLI flag with `-` replaced by `_`; flags given
//! on the command line win over the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use pshgcn_core::nn::{BatchMode, ModelConfig, TrainConfig};
use pshgcn_core::OperatorKind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OperatorChoice {
    /// Row-normalized adjacency `D⁻¹A`.
    #[default]
    #[value(name = "normalized_adjacency", alias = "adjacency")]
    NormalizedAdjacency,
    /// `I − D⁻¹A`.
    #[value(name = "laplacian")]
    Laplacian,
}

impl From<OperatorChoice> for OperatorKind {
    fn from(c: OperatorChoice) -> Self {
        match c {
            OperatorChoice::NormalizedAdjacency => OperatorKind::NormalizedAdjacency,
            OperatorChoice::Laplacian => OperatorKind::Laplacian,
        }
    }
}

impl FromStr for OperatorChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    #[default]
    Full,
    Minibatch,
}

impl FromStr for ModeChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

impl From<ModeChoice> for BatchMode {
    fn from(m: ModeChoice) -> Self {
        match m {
            ModeChoice::Full => BatchMode::Full,
            ModeChoice::Minibatch => BatchMode::Minibatch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub store: Option<PathBuf>,
    pub operator: OperatorChoice,
    pub order: usize,
    pub use_sos: bool,
    pub mode: ModeChoice,
    pub lr_filter: f64,
    pub lr_mlp: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub proj_dim: usize,
    pub hidden: usize,
    /// Hidden layers in `f_θ`; 0 makes `f_θ` the identity.
    pub f_theta_layers: usize,
    /// Layers in `f′_θ`, including the output layer.
    pub f_theta_prime_layers: usize,
    /// Cap on stored propagation words (precompute and minibatch mode).
    pub max_store_words: Option<usize>,
    /// When false, every `wall_ms` in metrics.json is 0 so that reruns are
    /// byte-identical.
    pub record_wall_time: bool,
    /// Materialize the learned `gᵀg` after training and fail if it is not PSD
    /// (skipped above the dense cap).
    pub check_psd: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: PathBuf::new(),
            out: PathBuf::new(),
            store: None,
            operator: OperatorChoice::default(),
            order: 2,
            use_sos: true,
            mode: ModeChoice::Full,
            lr_filter: t.lr_filter,
            lr_mlp: t.lr_mlp,
            weight_decay: t.weight_decay,
            epochs: t.epochs,
            patience: t.patience,
            dropout: 0.5,
            seed: t.seed,
            batch_size: t.batch_size,
            proj_dim: 64,
            hidden: 64,
            f_theta_layers: 2,
            f_theta_prime_layers: 2,
            max_store_words: None,
            record_wall_time: false,
            check_psd: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value {value:?} for {key}"))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "data" => self.data = value.into(),
            "out" => self.out = value.into(),
            "store" => self.store = Some(value.into()),
            "operator" => self.operator = parse(key, value)?,
            "order" => self.order = parse(key, value)?,
            "use_sos" => self.use_sos = parse(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "lr_filter" => self.lr_filter = parse(key, value)?,
            "lr_mlp" => self.lr_mlp = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "proj_dim" => self.proj_dim = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "f_theta_layers" => self.f_theta_layers = parse(key, value)?,
            "f_theta_prime_layers" => self.f_theta_prime_layers = parse(key, value)?,
            "max_store_words" => self.max_store_words = Some(parse(key, value)?),
            "record_wall_time" => self.record_wall_time = parse(key, value)?,
            "check_psd" => self.check_psd = parse(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fsutil::read_to_string(path)?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `key = value`"))?;
            let value = value.trim().trim_matches('"');
            self.set(key.trim(), value).map_err(|m| Error::parse(path, i + 1, m))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Usage("order must be >= 1".into()));
        }
        if self.f_theta_prime_layers == 0 {
            return Err(Error::Usage("f_theta_prime_layers must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Usage("dropout must lie in [0, 1)".into()));
        }
        self.train_config().validate()?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr_filter: self.lr_filter,
            lr_mlp: self.lr_mlp,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
            mode: self.mode.into(),
            batch_size: self.batch_size,
        }
    }

    pub fn model_config(&self, num_classes: usize) -> ModelConfig {
        let mut f_theta_prime = vec![self.hidden; self.f_theta_prime_layers - 1];
        f_theta_prime.push(num_classes);
        ModelConfig {
            proj_dim: self.proj_dim,
            f_theta: vec![self.hidden; self.f_theta_layers],
            f_theta_prime,
            dropout: self.dropout,
            use_sos: self.use_sos,
            order: self.order,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_apply_and_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\norder = 3\nmode = minibatch  # trailing\nlr_mlp=0.05\n").unwrap();
        let mut c = RunConfig::default();
        c.apply_file(&path).unwrap();
        assert_eq!((c.order, c.mode, c.lr_mlp), (3, ModeChoice::Minibatch, 0.05));

        std::fs::write(&path, "order = 3\nbogus = 1\n").unwrap();
        let err = RunConfig::default().apply_file(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn operator_names() {
        assert_eq!("laplacian".parse::<OperatorChoice>().unwrap(), OperatorChoice::Laplacian);
        assert_eq!("adjacency".parse::<OperatorChoice>().unwrap(), OperatorChoice::NormalizedAdjacency);
        assert!("x".parse::<OperatorChoice>().is_err());
    }
}
