//! Drug molecules: SMILES parsing and graph featurization.

pub mod elements;
mod features;
mod smiles;

pub use features::{
    featurize_drug, implicit_valence, DrugFeatures, FeatureError, COUNT_BINS, DRUG_FEATURE_DIM,
};
pub use smiles::{
    parse_smiles, Atom, Bond, BondError, BondOrder, MolGraph, SmilesError, SmilesErrorKind,
};
