use thiserror::Error;

use super::elements::{self, ATOM_VOCABULARY};
use super::MolGraph;
use crate::numcore::Tensor;

/// Width of each integer one-hot block (values 0 through 10).
pub const COUNT_BINS: usize = 11;

/// Per-atom feature width: symbol, degree, hydrogens, implicit valence, aromatic bit.
pub const DRUG_FEATURE_DIM: usize = ATOM_VOCABULARY.len() + 3 * COUNT_BINS + 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("molecule has no atoms")]
    EmptyMolecule,
    #[error("atom {index} has unsupported symbol '{symbol}'")]
    UnknownSymbol { index: usize, symbol: String },
}

/// Node features and adjacency of a drug graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DrugFeatures {
    /// `S × DRUG_FEATURE_DIM`.
    pub node_features: Tensor,
    /// Symmetric 0/1 `S × S`, no self-loops.
    pub adjacency: Tensor,
}

impl DrugFeatures {
    pub fn atom_count(&self) -> usize {
        self.adjacency.shape()[0]
    }

    /// Same molecule with atoms relabeled so that new atom `i` is old atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> DrugFeatures {
        DrugFeatures {
            node_features: self.node_features.permute_rows(perm).expect("perm length"),
            adjacency: self.adjacency.permute_square(perm).expect("perm length"),
        }
    }
}

/// Implicit valence: charge-adjusted default valence minus heavy-atom degree,
/// clamped at zero. Elements without a default valence get zero.
pub fn implicit_valence(symbol: &str, charge: i32, degree: usize) -> u32 {
    elements::charged_valence(symbol, charge)
        .map(|v| v.saturating_sub(degree as u32))
        .unwrap_or(0)
}

fn one_hot(out: &mut Vec<f64>, bins: usize, value: usize) {
    let start = out.len();
    out.resize(start + bins, 0.0);
    out[start + value.min(bins - 1)] = 1.0;
}

/// One row per atom: one-hot symbol, one-hot degree, one-hot hydrogen count,
/// one-hot implicit valence, aromatic flag. Counts above 10 land in the last bin.
pub fn featurize_drug(graph: &MolGraph) -> Result<DrugFeatures, FeatureError> {
    let n = graph.atom_count();
    if n == 0 {
        return Err(FeatureError::EmptyMolecule);
    }
    let mut degree = vec![0usize; n];
    let mut adjacency = Tensor::zeros(&[n, n]);
    for bond in &graph.bonds {
        degree[bond.a] += 1;
        degree[bond.b] += 1;
        adjacency.data_mut()[bond.a * n + bond.b] = 1.0;
        adjacency.data_mut()[bond.b * n + bond.a] = 1.0;
    }

    let mut data = Vec::with_capacity(n * DRUG_FEATURE_DIM);
    for (index, atom) in graph.atoms.iter().enumerate() {
        let slot = elements::vocabulary_index(&atom.element).ok_or_else(|| {
            FeatureError::UnknownSymbol {
                index,
                symbol: atom.element.clone(),
            }
        })?;
        one_hot(&mut data, ATOM_VOCABULARY.len(), slot);
        one_hot(&mut data, COUNT_BINS, degree[index]);
        one_hot(&mut data, COUNT_BINS, atom.total_h() as usize);
        let valence = implicit_valence(&atom.element, atom.formal_charge, degree[index]);
        one_hot(&mut data, COUNT_BINS, valence as usize);
        data.push(if atom.aromatic { 1.0 } else { 0.0 });
    }
    let node_features = Tensor::new(vec![n, DRUG_FEATURE_DIM], data).expect("feature width");
    Ok(DrugFeatures {
        node_features,
        adjacency,
    })
}
