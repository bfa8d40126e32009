use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{CliError, RunConfig};
use crate::chem::{featurize_drug, parse_smiles, DrugFeatures};
use crate::fusion::{AffinityModel, Model};
use crate::protein::{load_target, ProteinGraph};
use crate::traineval::checkpoint::{history_tsv, load_checkpoint, save_checkpoint, write_atomic};
use crate::traineval::{
    make_split, predict_pairs, prepare, train_with, AffinityDataset, MetricSet, Part, PreparedData,
    Split, TrainOutcome,
};

pub const MANIFEST_FILE: &str = "manifest.tsv";

/// Counts written by `prepare`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub drugs: usize,
    pub targets: usize,
    pub pairs: usize,
    pub usable_pairs: usize,
    pub residue_feature_dim: usize,
    /// Ids sharing a SMILES or sequence with an earlier id; cold splits drop them.
    pub duplicates: Vec<(String, String)>,
}

impl Manifest {
    pub fn to_tsv(&self, cfg: &RunConfig) -> String {
        let mut out = String::from("key\tvalue\n");
        let mut put = |k: &str, v: String| {
            writeln!(out, "{k}\t{v}").expect("string write");
        };
        put("drugs", self.drugs.to_string());
        put("targets", self.targets.to_string());
        put("pairs", self.pairs.to_string());
        put("usable_pairs", self.usable_pairs.to_string());
        put("embedding", cfg.embedding.to_string());
        put("residue_feature_dim", self.residue_feature_dim.to_string());
        for (dup, first) in &self.duplicates {
            put("duplicate", format!("{dup} duplicates {first}"));
        }
        out
    }
}

fn duplicates(dataset: &AffinityDataset) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (i, (id, smiles)) in dataset.drugs.iter().enumerate() {
        if let Some((first, _)) = dataset.drugs.iter().take(i).find(|(_, s)| *s == smiles) {
            out.push((id.clone(), first.clone()));
        }
    }
    for (i, (id, rec)) in dataset.targets.iter().enumerate() {
        if let Some((first, _)) = dataset
            .targets
            .iter()
            .take(i)
            .find(|(_, r)| r.sequence == rec.sequence)
        {
            out.push((id.clone(), first.clone()));
        }
    }
    out
}

fn load_prepared(cfg: &RunConfig) -> Result<(AffinityDataset, PreparedData), CliError> {
    let dataset = AffinityDataset::load(&cfg.data)?;
    let prepared = prepare(&dataset, cfg.embedding_spec(), cfg.execution)?;
    Ok((dataset, prepared))
}

/// Validates the whole dataset and writes `manifest.tsv` into its root.
pub fn cmd_prepare(cfg: &RunConfig) -> Result<Manifest, CliError> {
    let (dataset, prepared) = load_prepared(cfg)?;
    let manifest = Manifest {
        drugs: dataset.drugs.len(),
        targets: dataset.targets.len(),
        pairs: dataset.pairs.len(),
        usable_pairs: prepared.samples.len(),
        residue_feature_dim: cfg.embedding_spec().residue_feature_dim(),
        duplicates: duplicates(&dataset),
    };
    let path = cfg.data.join(MANIFEST_FILE);
    write_atomic(&path, manifest.to_tsv(cfg).as_bytes()).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub outcome: TrainOutcome,
    pub split: Split,
    /// Test-set metrics of the best checkpoint, when they are defined.
    pub test_metrics: Option<MetricSet>,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
}

/// Trains under the configured regime and writes the best checkpoint, the
/// epoch history and the effective configuration into the output directory.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport, CliError> {
    let (dataset, prepared) = load_prepared(cfg)?;
    let split = make_split(&dataset, &cfg.split_spec())?;
    log::info!(
        "{} split: {} train, {} validation, {} test, {} excluded",
        cfg.regime,
        split.train.len(),
        split.val.len(),
        split.test.len(),
        split.excluded.len()
    );
    let mut model = Model::new(cfg.model_config(), cfg.seed)?;
    let tc = cfg.train_config();
    let every = (tc.epochs / 20).max(1);
    let outcome = train_with(&mut model, &prepared, &split, &tc, |r| {
        if r.epoch % every == 0 || r.epoch == tc.epochs {
            log::info!(
                "epoch {}/{}: train mse {:.4}, val mse {:.4}, lr {:e}",
                r.epoch,
                tc.epochs,
                r.train_mse,
                r.val_mse,
                r.lr
            );
        }
    })?;

    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let checkpoint = cfg.checkpoint_path();
    save_checkpoint(&checkpoint, model.params())?;
    let history = cfg.history_path();
    write_atomic(&history, history_tsv(&outcome.history).as_bytes())
        .map_err(|e| CliError::io(&history, e))?;
    let conf = cfg.out.join("run.conf");
    write_atomic(&conf, cfg.to_text().as_bytes()).map_err(|e| CliError::io(&conf, e))?;

    let pred = predict_pairs(&model, &prepared, &split.test, cfg.execution)?;
    let test_metrics = match MetricSet::compute(&pred, &prepared.truths(&split.test)) {
        Ok(m) => Some(m),
        Err(e) => {
            log::warn!("test metrics unavailable: {e}");
            None
        }
    };
    Ok(TrainReport {
        outcome,
        split,
        test_metrics,
        checkpoint,
        history,
    })
}

/// A model built from the configuration with weights from `checkpoint`.
pub fn load_model(cfg: &RunConfig, checkpoint: &Path) -> Result<Model, CliError> {
    let mut model = Model::new(cfg.model_config(), cfg.seed)?;
    load_checkpoint(checkpoint, model.params_mut())?;
    Ok(model)
}

/// Metrics of a checkpoint on one part of the configured split.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, part: Part) -> Result<MetricSet, CliError> {
    let model = load_model(cfg, checkpoint)?;
    let (dataset, prepared) = load_prepared(cfg)?;
    let split = make_split(&dataset, &cfg.split_spec())?;
    let indices = split.part(part);
    let pred = predict_pairs(&model, &prepared, indices, cfg.execution)?;
    Ok(MetricSet::compute(&pred, &prepared.truths(indices))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub drug: String,
    pub target: String,
    /// Measured affinity, when the pair is in `affinity.tsv`.
    pub affinity: Option<f64>,
    pub predicted: f64,
}

/// Predictions for one part of the split, or for every pair when `part` is `None`.
pub fn cmd_predict(
    cfg: &RunConfig,
    checkpoint: &Path,
    part: Option<Part>,
) -> Result<Vec<PredictionRow>, CliError> {
    let model = load_model(cfg, checkpoint)?;
    let (dataset, prepared) = load_prepared(cfg)?;
    let indices: Vec<usize> = match part {
        Some(p) => make_split(&dataset, &cfg.split_spec())?.part(p).to_vec(),
        None => (0..dataset.pairs.len()).collect(),
    };
    let pred = predict_pairs(&model, &prepared, &indices, cfg.execution)?;
    Ok(indices
        .iter()
        .zip(pred)
        .map(|(&i, predicted)| {
            let p = &dataset.pairs[i];
            PredictionRow {
                drug: p.drug.clone(),
                target: p.target.clone(),
                affinity: Some(p.affinity),
                predicted,
            }
        })
        .collect())
}

fn load_pair(
    cfg: &RunConfig,
    drug_id: &str,
    target_id: &str,
) -> Result<(DrugFeatures, ProteinGraph), CliError> {
    let dataset = AffinityDataset::load(&cfg.data)?;
    let smiles = dataset
        .drugs
        .get(drug_id)
        .ok_or_else(|| CliError::Data(format!("unknown drug id '{drug_id}'")))?;
    let target = dataset
        .targets
        .get(target_id)
        .ok_or_else(|| CliError::Data(format!("unknown target id '{target_id}'")))?;
    let graph = parse_smiles(smiles).map_err(|e| CliError::Data(format!("drug {drug_id}: {e}")))?;
    let drug =
        featurize_drug(&graph).map_err(|e| CliError::Data(format!("drug {drug_id}: {e}")))?;
    let dir = target
        .dir
        .as_ref()
        .expect("loaded targets have a directory");
    let spec = cfg.embedding_spec();
    let protein = load_target(dir, spec.mode, spec.dim)
        .map_err(|e| CliError::Data(format!("target {target_id}: {e}")))?;
    Ok((drug, protein))
}

/// Prediction for a single drug–target pair by id.
pub fn cmd_predict_pair(
    cfg: &RunConfig,
    checkpoint: &Path,
    drug_id: &str,
    target_id: &str,
) -> Result<f64, CliError> {
    let model = load_model(cfg, checkpoint)?;
    let (drug, protein) = load_pair(cfg, drug_id, target_id)?;
    let value = model.predict(&drug, &protein)?;
    if !value.is_finite() {
        return Err(CliError::Numerical(format!(
            "prediction for {drug_id}/{target_id} is not finite"
        )));
    }
    Ok(value)
}

/// `(index, residue, attention)` for every residue of the target.
pub fn cmd_inspect_attention(
    cfg: &RunConfig,
    checkpoint: &Path,
    drug_id: &str,
    target_id: &str,
) -> Result<Vec<(usize, char, f64)>, CliError> {
    let model = load_model(cfg, checkpoint)?;
    let Model::Gefa(gefa) = &model else {
        return Err(CliError::Usage(
            "attention inspection needs the gefa model".into(),
        ));
    };
    let (drug, protein) = load_pair(cfg, drug_id, target_id)?;
    let alpha = gefa.attention_weights(&drug, &protein)?;
    if !alpha.iter().all(|a| a.is_finite()) {
        return Err(CliError::Numerical(
            "attention weights are not finite".into(),
        ));
    }
    Ok(protein
        .sequence
        .chars()
        .zip(alpha)
        .enumerate()
        .map(|(i, (c, a))| (i, c, a))
        .collect())
}

/// Atom and bond counts of a SMILES string.
pub fn cmd_parse_smiles(smiles: &str) -> Result<(usize, usize), CliError> {
    let g = parse_smiles(smiles).map_err(|e| CliError::Data(format!("'{smiles}': {e}")))?;
    Ok((g.atom_count(), g.bond_count()))
}
