//! Dataset layout on disk:
//!
//! * `drugs.tsv`: `id<TAB>SMILES`
//! * `affinity.tsv`: `drug_id<TAB>target_id<TAB>affinity`
//! * `targets/<id>/`: one directory per target, see [`crate::protein::io`].
//!
//! Blank lines and lines starting with `#` are skipped.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use super::DataError;
use crate::chem::{featurize_drug, parse_smiles, DrugFeatures};
use crate::par::{self, Execution};
use crate::protein::io::{read_sequence, SEQUENCE_FILE};
use crate::protein::{load_target, EmbeddingMode, ProteinGraph};

pub const DRUGS_FILE: &str = "drugs.tsv";
pub const AFFINITY_FILE: &str = "affinity.tsv";
pub const TARGETS_DIR: &str = "targets";

#[derive(Debug, Clone, PartialEq)]
pub struct TargetRecord {
    pub sequence: String,
    /// Directory holding the target files; absent for in-memory datasets.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub drug: String,
    pub target: String,
    pub affinity: f64,
}

/// Identifiers, raw inputs and measured affinities, before featurization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffinityDataset {
    pub drugs: IndexMap<String, String>,
    pub targets: IndexMap<String, TargetRecord>,
    pub pairs: Vec<PairRecord>,
}

fn io_err(path: &Path, e: std::io::Error) -> DataError {
    DataError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> DataError {
    DataError::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(n, l)| (n, l.split('\t').map(str::trim).collect()))
}

impl AffinityDataset {
    /// Reads the index files and every target sequence; contact maps and
    /// features are only read by [`prepare`].
    pub fn load(root: &Path) -> Result<Self, DataError> {
        let mut ds = Self::default();

        let path = root.join(DRUGS_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        for (line, fields) in records(&text) {
            let [id, smiles] = fields[..] else {
                return Err(parse_err(
                    &path,
                    line,
                    format!("expected 2 fields, found {}", fields.len()),
                ));
            };
            if ds
                .drugs
                .insert(id.to_string(), smiles.to_string())
                .is_some()
            {
                return Err(parse_err(&path, line, format!("duplicate drug id '{id}'")));
            }
        }

        let path = root.join(AFFINITY_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let mut target_ids: Vec<String> = Vec::new();
        for (line, fields) in records(&text) {
            let [drug, target, value] = fields[..] else {
                return Err(parse_err(
                    &path,
                    line,
                    format!("expected 3 fields, found {}", fields.len()),
                ));
            };
            let affinity: f64 = value
                .parse()
                .map_err(|_| parse_err(&path, line, format!("'{value}' is not a number")))?;
            if !affinity.is_finite() {
                return Err(parse_err(&path, line, "affinity is not finite"));
            }
            if !ds.drugs.contains_key(drug) {
                return Err(parse_err(&path, line, format!("unknown drug id '{drug}'")));
            }
            if !target_ids.iter().any(|t| t == target) {
                target_ids.push(target.to_string());
            }
            ds.pairs.push(PairRecord {
                drug: drug.to_string(),
                target: target.to_string(),
                affinity,
            });
        }

        let targets_root = root.join(TARGETS_DIR);
        for id in target_ids {
            let dir = targets_root.join(&id);
            if !dir.is_dir() {
                return Err(DataError::MissingTarget { id, dir });
            }
            let sequence =
                read_sequence(&dir.join(SEQUENCE_FILE)).map_err(|e| DataError::Target {
                    id: id.clone(),
                    reason: e.to_string(),
                })?;
            ds.targets.insert(
                id,
                TargetRecord {
                    sequence,
                    dir: Some(dir),
                },
            );
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn truths(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.pairs[i].affinity).collect()
    }
}

/// One usable pair as indices into [`PreparedData`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub drug: usize,
    pub target: usize,
    pub affinity: f64,
}

/// Featurized drugs and proteins. `samples[i]` corresponds to `pairs[i]` of
/// the dataset it was prepared from.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub drug_ids: Vec<String>,
    pub drugs: Vec<DrugFeatures>,
    pub target_ids: Vec<String>,
    pub proteins: Vec<ProteinGraph>,
    pub samples: Vec<Sample>,
}

impl PreparedData {
    pub fn drug_index(&self, id: &str) -> Option<usize> {
        self.drug_ids.iter().position(|d| d == id)
    }

    pub fn target_index(&self, id: &str) -> Option<usize> {
        self.target_ids.iter().position(|t| t == id)
    }

    pub fn truths(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.samples[i].affinity).collect()
    }
}

/// How residue embeddings are obtained, and their width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingSpec {
    pub mode: EmbeddingMode,
    /// Width of file or fallback embeddings; one-hot ignores it.
    pub dim: usize,
}

impl EmbeddingSpec {
    /// Width of a residue feature row: embedding plus ss3 and solvent accessibility.
    pub fn residue_feature_dim(&self) -> usize {
        let emb = match self.mode {
            EmbeddingMode::OneHot => crate::protein::ONE_HOT_DIM,
            _ => self.dim,
        };
        emb + 6
    }
}

/// Parses every drug and loads every target, collecting every failure
/// instead of stopping at the first.
pub fn prepare(
    dataset: &AffinityDataset,
    embedding: EmbeddingSpec,
    execution: Execution,
) -> Result<PreparedData, DataError> {
    let drug_entries: Vec<(&String, &String)> = dataset.drugs.iter().collect();
    let drugs = par::map(execution, &drug_entries, |(id, smiles)| {
        parse_smiles(smiles)
            .map_err(|e| format!("drug {id}: SMILES '{smiles}': {e}"))
            .and_then(|g| featurize_drug(&g).map_err(|e| format!("drug {id}: {e}")))
    });
    let target_entries: Vec<(&String, &TargetRecord)> = dataset.targets.iter().collect();
    let proteins = par::map(execution, &target_entries, |(id, rec)| match &rec.dir {
        Some(dir) => load_target(dir, embedding.mode, embedding.dim)
            .map_err(|e| format!("target {id} ({}): {e}", dir.display())),
        None => Err(format!("target {id}: no directory to load from")),
    });

    let mut problems = Vec::new();
    let mut ok_drugs = Vec::with_capacity(drugs.len());
    for d in drugs {
        match d {
            Ok(d) => ok_drugs.push(d),
            Err(msg) => problems.push(msg),
        }
    }
    let mut ok_proteins = Vec::with_capacity(proteins.len());
    for p in proteins {
        match p {
            Ok(p) => ok_proteins.push(p),
            Err(msg) => problems.push(msg),
        }
    }
    if !problems.is_empty() {
        return Err(DataError::Records(problems));
    }
    let data = PreparedData {
        drug_ids: dataset.drugs.keys().cloned().collect(),
        drugs: ok_drugs,
        target_ids: dataset.targets.keys().cloned().collect(),
        proteins: ok_proteins,
        samples: Vec::new(),
    };
    Ok(with_samples(dataset, data))
}

/// Fills `samples` from `dataset.pairs`; ids must already be present.
pub fn with_samples(dataset: &AffinityDataset, mut data: PreparedData) -> PreparedData {
    data.samples = dataset
        .pairs
        .iter()
        .map(|p| Sample {
            drug: dataset
                .drugs
                .get_index_of(&p.drug)
                .expect("drug id checked at load"),
            target: dataset
                .targets
                .get_index_of(&p.target)
                .expect("target id checked at load"),
            affinity: p.affinity,
        })
        .collect();
    data
}
