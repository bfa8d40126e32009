use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::CliError;
use crate::fusion::{
    Ablation, DrugRepresentation, EdgeWeighting, ModelConfig, ModelDims, ModelKind,
};
use crate::par::Execution;
use crate::protein::EmbeddingMode;
use crate::traineval::{AdamConfig, EmbeddingSpec, Regime, SplitSpec, TrainConfig};

/// Every setting of a run. Each key has a default; a config file of
/// `key = value` lines overrides them and command-line flags override the file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub regime: Regime,
    pub seed: u64,
    pub model: ModelKind,
    pub batch_size: usize,
    /// `None` picks the regime default.
    pub lr: Option<f64>,
    pub epochs: usize,
    pub patience: usize,
    pub lr_decay: f64,
    pub hidden: usize,
    pub attention_dim: usize,
    pub predictor_hidden: [usize; 2],
    pub residual_repeat: usize,
    pub embedding: EmbeddingMode,
    pub embedding_dim: usize,
    pub no_attention: bool,
    pub no_gcn2: bool,
    pub no_res_drug: bool,
    pub no_res_protein: bool,
    pub drug_rep: DrugRepresentation,
    pub residual_raw_adjacency: bool,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        let dims = ModelDims::default();
        let train = TrainConfig::default();
        Self {
            data: PathBuf::from("data"),
            out: PathBuf::from("run"),
            regime: Regime::Warm,
            seed: 0,
            model: ModelKind::Gefa,
            batch_size: train.batch_size,
            lr: None,
            epochs: train.epochs,
            patience: train.patience,
            lr_decay: train.lr_decay,
            hidden: dims.hidden,
            attention_dim: dims.attention,
            predictor_hidden: dims.predictor,
            residual_repeat: dims.residual_repeat,
            embedding: EmbeddingMode::File,
            embedding_dim: 768,
            no_attention: false,
            no_gcn2: false,
            no_res_drug: false,
            no_res_protein: false,
            drug_rep: DrugRepresentation::Combined,
            residual_raw_adjacency: false,
            execution: Execution::Parallel,
        }
    }
}

/// Keys accepted in a config file, in documentation order.
pub const CONFIG_KEYS: &[&str] = &[
    "data",
    "out",
    "regime",
    "seed",
    "model",
    "batch_size",
    "lr",
    "epochs",
    "patience",
    "lr_decay",
    "hidden",
    "attention_dim",
    "predictor_hidden1",
    "predictor_hidden2",
    "residual_repeat",
    "embedding",
    "embedding_dim",
    "no_attention",
    "no_gcn2",
    "no_res_drug",
    "no_res_protein",
    "drug_rep",
    "residual_raw_adjacency",
    "execution",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("bad value '{value}' for '{key}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!(
            "bad value '{value}' for '{key}': expected true or false"
        ))),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.replace('-', "_");
        let k = key.as_str();
        match k {
            "data" => self.data = PathBuf::from(value),
            "out" => self.out = PathBuf::from(value),
            "regime" => self.regime = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "model" => self.model = parse(k, value)?,
            "batch_size" => self.batch_size = parse(k, value)?,
            "lr" => self.lr = Some(parse(k, value)?),
            "epochs" => self.epochs = parse(k, value)?,
            "patience" => self.patience = parse(k, value)?,
            "lr_decay" => self.lr_decay = parse(k, value)?,
            "hidden" => self.hidden = parse(k, value)?,
            "attention_dim" => self.attention_dim = parse(k, value)?,
            "predictor_hidden1" => self.predictor_hidden[0] = parse(k, value)?,
            "predictor_hidden2" => self.predictor_hidden[1] = parse(k, value)?,
            "residual_repeat" => self.residual_repeat = parse(k, value)?,
            "embedding" => self.embedding = parse(k, value)?,
            "embedding_dim" => self.embedding_dim = parse(k, value)?,
            "no_attention" => self.no_attention = parse_bool(k, value)?,
            "no_gcn2" => self.no_gcn2 = parse_bool(k, value)?,
            "no_res_drug" => self.no_res_drug = parse_bool(k, value)?,
            "no_res_protein" => self.no_res_protein = parse_bool(k, value)?,
            "drug_rep" => self.drug_rep = parse(k, value)?,
            "residual_raw_adjacency" => self.residual_raw_adjacency = parse_bool(k, value)?,
            "execution" => self.execution = parse(k, value)?,
            _ => return Err(CliError::Config(format!("unknown config key '{k}'"))),
        }
        Ok(())
    }

    /// Applies every line of a config text. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected key = value, got '{line}'",
                    n + 1
                )));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {}", n + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        Ok(cfg)
    }

    /// `key = value` lines that reproduce this configuration.
    pub fn to_text(&self) -> String {
        let lr = self
            .lr
            .map_or_else(|| "default".to_string(), |v| v.to_string());
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("data", self.data.display().to_string());
        put("out", self.out.display().to_string());
        put("regime", self.regime.to_string());
        put("seed", self.seed.to_string());
        put("model", self.model.to_string());
        put("batch_size", self.batch_size.to_string());
        if lr != "default" {
            put("lr", lr);
        }
        put("epochs", self.epochs.to_string());
        put("patience", self.patience.to_string());
        put("lr_decay", self.lr_decay.to_string());
        put("hidden", self.hidden.to_string());
        put("attention_dim", self.attention_dim.to_string());
        put("predictor_hidden1", self.predictor_hidden[0].to_string());
        put("predictor_hidden2", self.predictor_hidden[1].to_string());
        put("residual_repeat", self.residual_repeat.to_string());
        put("embedding", self.embedding.to_string());
        put("embedding_dim", self.embedding_dim.to_string());
        put("no_attention", self.no_attention.to_string());
        put("no_gcn2", self.no_gcn2.to_string());
        put("no_res_drug", self.no_res_drug.to_string());
        put("no_res_protein", self.no_res_protein.to_string());
        put("drug_rep", self.drug_rep.to_string());
        put(
            "residual_raw_adjacency",
            self.residual_raw_adjacency.to_string(),
        );
        put("execution", self.execution.to_string());
        out
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
            .unwrap_or_else(|| TrainConfig::default_learning_rate(self.regime))
    }

    pub fn embedding_spec(&self) -> EmbeddingSpec {
        EmbeddingSpec {
            mode: self.embedding,
            dim: self.embedding_dim,
        }
    }

    pub fn ablation(&self) -> Ablation {
        Ablation {
            edges: if self.no_attention {
                EdgeWeighting::Uniform
            } else {
                EdgeWeighting::Attention
            },
            gcn_layers: !self.no_gcn2,
            residual_drug: !self.no_res_drug,
            residual_protein: !self.no_res_protein,
            drug_rep: self.drug_rep,
            residual_raw_adjacency: self.residual_raw_adjacency,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            kind: self.model,
            dims: ModelDims {
                protein_in: self.embedding_spec().residue_feature_dim(),
                hidden: self.hidden,
                attention: self.attention_dim,
                predictor: self.predictor_hidden,
                residual_repeat: self.residual_repeat,
                ..ModelDims::default()
            },
            ablation: self.ablation(),
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec::new(self.regime, self.seed)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate(),
            adam: AdamConfig::default(),
            lr_decay: self.lr_decay,
            patience: self.patience,
            seed: self.seed,
            execution: self.execution,
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out.join("model.ckpt")
    }

    pub fn history_path(&self) -> PathBuf {
        self.out.join("history.tsv")
    }
}
