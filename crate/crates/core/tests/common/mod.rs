#![allow(dead_code)]

use gefa::chem::{featurize_drug, parse_smiles, DrugFeatures};
use gefa::fusion::{Ablation, ModelConfig, ModelDims, ModelKind};
use gefa::protein::ProteinGraph;
use gefa::synth;
use rand::seq::SliceRandom;
use rand::Rng;

pub const EMBED: usize = 4;

pub fn tiny_dims() -> ModelDims {
    ModelDims {
        drug_in: gefa::chem::DRUG_FEATURE_DIM,
        protein_in: EMBED + 6,
        hidden: 4,
        attention: 3,
        predictor: [5, 3],
        residual_repeat: 2,
    }
}

pub fn config(kind: ModelKind, dims: ModelDims, ablation: Ablation) -> ModelConfig {
    ModelConfig {
        kind,
        dims,
        ablation,
    }
}

pub fn drug(smiles: &str) -> DrugFeatures {
    featurize_drug(&parse_smiles(smiles).unwrap()).unwrap()
}

pub fn random_instance<R: Rng>(
    rng: &mut R,
    residues: (usize, usize),
    embed: usize,
) -> (DrugFeatures, ProteinGraph) {
    let (_, d) = synth::random_drug(rng, 1, 4);
    let len = rng.gen_range(residues.0..=residues.1);
    (d, synth::random_protein(rng, len, embed))
}

pub fn random_perm<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
