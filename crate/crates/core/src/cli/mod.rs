//! Command-line surface: dataset preparation, training, evaluation,
//! prediction and attention inspection.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::fusion::FusionError;
use crate::traineval::{CheckpointError, DataError, MetricError, Part, SplitError, TrainError};

pub use commands::{
    cmd_eval, cmd_inspect_attention, cmd_parse_smiles, cmd_predict, cmd_predict_pair, cmd_prepare,
    cmd_train, load_model, Manifest, PredictionRow, TrainReport, MANIFEST_FILE,
};
pub use config::{RunConfig, CONFIG_KEYS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) => 1,
            Self::Data(_) => 2,
            Self::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Config(m) | Self::Data(m) | Self::Numerical(m) => m,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Data(format!("{}: {e}", path.display()))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<SplitError> for CliError {
    fn from(e: SplitError) -> Self {
        match e {
            SplitError::UnknownRegime(_) | SplitError::UnknownPart(_) => {
                Self::Config(e.to_string())
            }
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::Config(_) => Self::Config(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::NonFinite { .. } => Self::Numerical(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteGradient { .. } | TrainError::NonFiniteLoss { .. } => {
                Self::Numerical(e.to_string())
            }
            TrainError::Config(_) | TrainError::EmptySplit(_) => Self::Config(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Metric(m) => m.into(),
            TrainError::GradientShape { .. } => Self::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gefa",
    version,
    about = "Drug–target binding affinity with graph early fusion"
)]
pub struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dataset root holding drugs.tsv, affinity.tsv and targets/.
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Output directory for checkpoints and history.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// warm, cold-target, cold-drug or cold-drug-target.
    #[arg(long, global = true)]
    regime: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// gefa or glfa.
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<String>,
    #[arg(long, global = true)]
    lr: Option<String>,
    /// Weight every drug–residue edge 1 instead of learning attention.
    #[arg(long, global = true)]
    no_attention: bool,
    /// Drop the two GCN layers before the residual blocks.
    #[arg(long, global = true)]
    no_gcn2: bool,
    #[arg(long, global = true)]
    no_res_drug: bool,
    #[arg(long, global = true)]
    no_res_protein: bool,
    /// before, after or combined.
    #[arg(long, global = true)]
    drug_rep: Option<String>,
    /// file, fallback or one-hot.
    #[arg(long, global = true)]
    embedding: Option<String>,
    /// Any config key, as KEY=VALUE; may repeat.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the dataset and write its manifest.
    Prepare,
    /// Train and write the best checkpoint and the epoch history.
    Train,
    /// Print RMSE, MSE, Pearson, Spearman and CI on one split part.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// train, val or test.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Print predicted affinities.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// train, val, test or all.
        #[arg(long, default_value = "all")]
        split: String,
        /// Predict one pair instead; needs --target too.
        #[arg(long, requires = "target")]
        drug: Option<String>,
        #[arg(long, requires = "drug")]
        target: Option<String>,
    },
    /// Print the attention weight of every residue for one pair.
    InspectAttention {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        drug: String,
        #[arg(long)]
        target: String,
    },
    /// Print atom and bond counts of a SMILES string.
    ParseSmiles { smiles: String },
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let mut set = |k: &str, v: Option<&str>| v.map_or(Ok(()), |v| cfg.set(k, v));
        set("data", self.data.as_ref().and_then(|p| p.to_str()))?;
        set("out", self.out.as_ref().and_then(|p| p.to_str()))?;
        set("regime", self.regime.as_deref())?;
        set("seed", self.seed.as_deref())?;
        set("model", self.model.as_deref())?;
        set("epochs", self.epochs.as_deref())?;
        set("batch_size", self.batch_size.as_deref())?;
        set("lr", self.lr.as_deref())?;
        set("drug_rep", self.drug_rep.as_deref())?;
        set("embedding", self.embedding.as_deref())?;
        for (flag, key) in [
            (self.no_attention, "no_attention"),
            (self.no_gcn2, "no_gcn2"),
            (self.no_res_drug, "no_res_drug"),
            (self.no_res_protein, "no_res_protein"),
        ] {
            if flag {
                cfg.set(key, "true")?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

fn part(s: &str) -> Result<Part, CliError> {
    s.parse()
        .map_err(|e: SplitError| CliError::Usage(e.to_string()))
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.run_config()?;
    let ckpt = |c: &Option<PathBuf>| c.clone().unwrap_or_else(|| cfg.checkpoint_path());
    let w = |e: std::io::Error| CliError::Data(format!("cannot write output: {e}"));
    match &cli.command {
        Command::Prepare => {
            let m = cmd_prepare(&cfg)?;
            write!(out, "{}", m.to_tsv(&cfg)).map_err(w)?;
        }
        Command::Train => {
            let report = cmd_train(&cfg)?;
            writeln!(out, "best_epoch\t{}", report.outcome.best_epoch).map_err(w)?;
            writeln!(out, "best_val_mse\t{}", report.outcome.best_val_mse).map_err(w)?;
            writeln!(out, "checkpoint\t{}", report.checkpoint.display()).map_err(w)?;
            writeln!(out, "history\t{}", report.history.display()).map_err(w)?;
            if let Some(m) = report.test_metrics {
                writeln!(out, "split\t{}", crate::traineval::MetricSet::TSV_HEADER).map_err(w)?;
                writeln!(out, "test\t{}", m.tsv_row()).map_err(w)?;
            }
        }
        Command::Eval { checkpoint, split } => {
            let m = cmd_eval(&cfg, &ckpt(checkpoint), part(split)?)?;
            writeln!(out, "{}", crate::traineval::MetricSet::TSV_HEADER).map_err(w)?;
            writeln!(out, "{}", m.tsv_row()).map_err(w)?;
        }
        Command::Predict {
            checkpoint,
            split,
            drug,
            target,
        } => {
            writeln!(out, "drug\ttarget\taffinity\tpredicted").map_err(w)?;
            if let (Some(d), Some(t)) = (drug, target) {
                let v = cmd_predict_pair(&cfg, &ckpt(checkpoint), d, t)?;
                writeln!(out, "{d}\t{t}\t\t{v}").map_err(w)?;
            } else {
                let p = if split == "all" {
                    None
                } else {
                    Some(part(split)?)
                };
                for row in cmd_predict(&cfg, &ckpt(checkpoint), p)? {
                    let truth = row.affinity.map(|v| v.to_string()).unwrap_or_default();
                    writeln!(
                        out,
                        "{}\t{}\t{truth}\t{}",
                        row.drug, row.target, row.predicted
                    )
                    .map_err(w)?;
                }
            }
        }
        Command::InspectAttention {
            checkpoint,
            drug,
            target,
        } => {
            writeln!(out, "index\tresidue\tattention").map_err(w)?;
            for (i, c, a) in cmd_inspect_attention(&cfg, &ckpt(checkpoint), drug, target)? {
                writeln!(out, "{i}\t{c}\t{a}").map_err(w)?;
            }
        }
        Command::ParseSmiles { smiles } => {
            let (atoms, bonds) = cmd_parse_smiles(smiles)?;
            writeln!(out, "atoms\t{atoms}\nbonds\t{bonds}").map_err(w)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command writing results to
/// `out` and errors to stderr, and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
