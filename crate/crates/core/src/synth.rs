//! Random drugs, proteins and planted-affinity datasets for tests, benches
//! and smoke runs.

use std::fs;
use std::io;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::{featurize_drug, parse_smiles, DrugFeatures};
use crate::protein::io::{write_target, FeatureLine};
use crate::protein::{build_protein_graph, classify_sa, ContactMap, ProteinGraph, ResidueFeatures};
use crate::traineval::{
    with_samples, AffinityDataset, PairRecord, PreparedData, TargetRecord, AFFINITY_FILE,
    DRUGS_FILE, TARGETS_DIR,
};

/// Building blocks joined end to end; each is a valid SMILES on its own and
/// reuses ring label 1 only after closing it.
const FRAGMENTS: &[&str] = &[
    "C",
    "N",
    "O",
    "CC",
    "C(=O)",
    "c1ccccc1",
    "C(F)",
    "S",
    "C(C)C",
    "c1ccncc1",
    "C#N",
    "C(Cl)",
    "N(C)",
    "C1CC1",
    "c1cc[nH]c1",
    "C(=O)N",
    "[N+](=O)[O-]",
];

const RESIDUES: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

/// A SMILES made of `min..=max` random fragments.
pub fn random_smiles<R: Rng>(rng: &mut R, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    let mut out = String::new();
    for i in 0..n {
        let frag = FRAGMENTS.choose(rng).expect("non-empty");
        // A charged nitro group cannot start a chain that continues off its
        // last oxygen, so keep it last.
        if *frag == "[N+](=O)[O-]" && i + 1 < n {
            out.push('C');
            continue;
        }
        out.push_str(frag);
    }
    out
}

pub fn random_drug<R: Rng>(
    rng: &mut R,
    min_fragments: usize,
    max_fragments: usize,
) -> (String, DrugFeatures) {
    let smiles = random_smiles(rng, min_fragments, max_fragments);
    let graph = parse_smiles(&smiles).expect("generated SMILES parse");
    let features = featurize_drug(&graph).expect("generated SMILES featurize");
    (smiles, features)
}

/// Sequence, contacts and per-residue feature lines of a random target.
/// Contacts join residues at least three apart with probability `density`.
pub fn random_target_parts<R: Rng>(
    rng: &mut R,
    len: usize,
    embedding_dim: usize,
    density: f64,
) -> (String, ContactMap, Vec<FeatureLine>) {
    let sequence: String = (0..len)
        .map(|_| *RESIDUES.choose(rng).expect("alphabet") as char)
        .collect();
    let mut edges = Vec::new();
    for i in 0..len {
        for j in i + 3..len {
            if rng.gen_bool(density) {
                edges.push((i, j));
            }
        }
    }
    let contacts = ContactMap::from_edges(len, &edges).expect("in-range edges");
    let lines = (0..len)
        .map(|_| {
            let raw: [f64; 3] = [
                rng.gen_range(0.05..1.0),
                rng.gen_range(0.05..1.0),
                rng.gen_range(0.05..1.0),
            ];
            let total: f64 = raw.iter().sum();
            FeatureLine {
                embedding: (0..embedding_dim)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect(),
                ss3: raw.map(|v| v / total),
                pacc: rng.gen_range(0..=100),
            }
        })
        .collect();
    (sequence, contacts, lines)
}

pub fn protein_from_parts(
    sequence: &str,
    contacts: &ContactMap,
    lines: &[FeatureLine],
) -> ProteinGraph {
    let feats: Vec<ResidueFeatures> = lines
        .iter()
        .map(|l| {
            ResidueFeatures::new(
                l.embedding.clone(),
                l.ss3,
                classify_sa(l.pacc).expect("pacc range"),
            )
            .expect("valid")
        })
        .collect();
    build_protein_graph(sequence, contacts, &feats).expect("consistent parts")
}

pub fn random_protein<R: Rng>(rng: &mut R, len: usize, embedding_dim: usize) -> ProteinGraph {
    let (seq, contacts, lines) = random_target_parts(rng, len, embedding_dim, 0.1);
    protein_from_parts(&seq, &contacts, &lines)
}

/// A smooth function of drug and protein graph statistics, roughly in the
/// 4–9 range of real pK values. It only reads the last six residue feature
/// columns, so it does not depend on the embedding mode.
pub fn planted_affinity(drug: &DrugFeatures, protein: &ProteinGraph) -> f64 {
    let atoms = drug.atom_count() as f64;
    let bonds = drug.adjacency.data().iter().sum::<f64>() / 2.0;
    let width = drug.node_features.shape()[1];
    let aromatic = drug.node_features.rows().map(|r| r[width - 1]).sum::<f64>() / atoms;

    let len = protein.len() as f64;
    let contacts = protein.adjacency.data().iter().sum::<f64>() / (2.0 * len);
    let pw = protein.feature_dim();
    let (mut helix, mut buried) = (0.0, 0.0);
    for row in protein.node_features.rows() {
        helix += row[pw - 6];
        buried += row[pw - 3];
    }
    helix /= len;
    buried /= len;

    6.0 + 1.2 * ((atoms - 8.0) / 6.0).tanh()
        + 0.8 * aromatic
        + 0.3 * ((bonds - atoms) / 2.0).tanh()
        + 0.7 * ((len - 15.0) / 8.0).tanh()
        + 0.6 * (contacts - 1.5).tanh()
        + 1.5 * (helix - 1.0 / 3.0)
        + 0.8 * aromatic * (buried - 0.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub drugs: usize,
    pub targets: usize,
    /// Number of distinct pairs drawn; `None` takes every drug–target pair.
    pub pairs: Option<usize>,
    pub fragments: (usize, usize),
    pub residues: (usize, usize),
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            drugs: 4,
            targets: 3,
            pairs: None,
            fragments: (2, 4),
            residues: (8, 20),
            embedding_dim: 8,
            seed: 0,
        }
    }
}

/// An in-memory planted dataset: raw records plus featurized graphs.
#[derive(Debug, Clone)]
pub struct ToyData {
    pub dataset: AffinityDataset,
    pub prepared: PreparedData,
    /// Raw target files, aligned with `prepared.proteins`.
    pub target_parts: Vec<(String, ContactMap, Vec<FeatureLine>)>,
}

pub fn toy_data(spec: &ToySpec) -> ToyData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut dataset = AffinityDataset::default();
    let mut drugs = Vec::new();
    for d in 0..spec.drugs {
        // Distinct SMILES so cold-drug keys equal drug ids.
        let (smiles, feats) = loop {
            let (s, f) = random_drug(&mut rng, spec.fragments.0, spec.fragments.1);
            if !dataset.drugs.values().any(|v| v == &s) {
                break (s, f);
            }
        };
        dataset.drugs.insert(format!("D{d:03}"), smiles);
        drugs.push(feats);
    }
    let mut proteins = Vec::new();
    let mut target_parts = Vec::new();
    for t in 0..spec.targets {
        let (seq, contacts, lines) = loop {
            let len = rng.gen_range(spec.residues.0..=spec.residues.1);
            let parts = random_target_parts(&mut rng, len, spec.embedding_dim, 0.1);
            if !dataset.targets.values().any(|r| r.sequence == parts.0) {
                break parts;
            }
        };
        proteins.push(protein_from_parts(&seq, &contacts, &lines));
        dataset.targets.insert(
            format!("T{t:03}"),
            TargetRecord {
                sequence: seq.clone(),
                dir: None,
            },
        );
        target_parts.push((seq, contacts, lines));
    }

    let mut all: Vec<(usize, usize)> = (0..spec.drugs)
        .flat_map(|d| (0..spec.targets).map(move |t| (d, t)))
        .collect();
    if let Some(n) = spec.pairs {
        all.shuffle(&mut rng);
        all.truncate(n);
        all.sort_unstable();
    }
    for (d, t) in all {
        dataset.pairs.push(PairRecord {
            drug: dataset.drugs.get_index(d).expect("drug").0.clone(),
            target: dataset.targets.get_index(t).expect("target").0.clone(),
            affinity: planted_affinity(&drugs[d], &proteins[t]),
        });
    }

    let prepared = with_samples(
        &dataset,
        PreparedData {
            drug_ids: dataset.drugs.keys().cloned().collect(),
            drugs,
            target_ids: dataset.targets.keys().cloned().collect(),
            proteins,
            samples: Vec::new(),
        },
    );
    ToyData {
        dataset,
        prepared,
        target_parts,
    }
}

/// Writes the toy dataset in the on-disk layout and returns it.
pub fn write_toy_dataset(root: &Path, spec: &ToySpec) -> io::Result<ToyData> {
    let mut toy = toy_data(spec);
    fs::create_dir_all(root)?;
    let drugs: String = toy
        .dataset
        .drugs
        .iter()
        .map(|(id, s)| format!("{id}\t{s}\n"))
        .collect();
    fs::write(root.join(DRUGS_FILE), drugs)?;
    let pairs: String = toy
        .dataset
        .pairs
        .iter()
        .map(|p| format!("{}\t{}\t{}\n", p.drug, p.target, p.affinity))
        .collect();
    fs::write(root.join(AFFINITY_FILE), pairs)?;
    let mut targets = IndexMap::new();
    for ((id, rec), (seq, contacts, lines)) in toy.dataset.targets.iter().zip(&toy.target_parts) {
        let dir = root.join(TARGETS_DIR).join(id);
        write_target(&dir, seq, contacts, lines).map_err(|e| io::Error::other(e.to_string()))?;
        targets.insert(
            id.clone(),
            TargetRecord {
                sequence: rec.sequence.clone(),
                dir: Some(dir),
            },
        );
    }
    toy.dataset.targets = targets;
    Ok(toy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_smiles_always_parse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let s = random_smiles(&mut rng, 1, 6);
            assert!(parse_smiles(&s).is_ok(), "{s}");
        }
    }

    #[test]
    fn toy_data_is_seeded() {
        let spec = ToySpec::default();
        let a = toy_data(&spec);
        let b = toy_data(&spec);
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.dataset.pairs.len(), 12);
        assert_eq!(a.prepared.samples.len(), 12);
        let affinities: Vec<f64> = a.dataset.pairs.iter().map(|p| p.affinity).collect();
        assert!(
            affinities
                .iter()
                .all(|v| v.is_finite() && (2.0..11.0).contains(v)),
            "{affinities:?}"
        );
    }

    #[test]
    fn subset_of_pairs() {
        let spec = ToySpec {
            drugs: 5,
            targets: 5,
            pairs: Some(7),
            ..ToySpec::default()
        };
        assert_eq!(toy_data(&spec).dataset.pairs.len(), 7);
    }
}
