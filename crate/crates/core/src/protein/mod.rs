//! Protein residue graphs built from per-residue features and contact maps.

mod embed;
mod graph;
pub mod io;

use std::path::PathBuf;

use thiserror::Error;

pub use embed::{
    fallback_embed, one_hot_embed, residue_index, EmbeddedSequence, EmbeddingMode, ONE_HOT_DIM,
    RESIDUE_ALPHABET,
};
pub use graph::{
    build_protein_graph, classify_sa, ContactMap, ProteinGraph, ResidueFeatures, SaClass,
    SS3_TOLERANCE,
};
pub use io::load_target;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProteinError {
    #[error("pACC {0} outside 0..=100")]
    PaccRange(i64),
    #[error("ss3 probabilities {ss3:?} are not a distribution")]
    Ss3 { ss3: [f64; 3] },
    #[error("non-finite residue feature")]
    NonFinite,
    #[error("length mismatch: sequence {sequence}, contact map {contacts}, features {features}")]
    LengthMismatch {
        sequence: usize,
        contacts: usize,
        features: usize,
    },
    #[error("protein has no residues")]
    EmptyProtein,
    #[error("residue {residue}: embedding width {found}, expected {expected}")]
    EmbeddingWidth {
        residue: usize,
        expected: usize,
        found: usize,
    },
    #[error("contact row {row} has {found} entries, expected {expected}")]
    ContactShape {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("contact ({i}, {j}) has value {value}, expected 0 or 1")]
    NonBinaryContact { i: usize, j: usize, value: u8 },
    #[error("contact map is asymmetric at ({i}, {j})")]
    AsymmetricContact { i: usize, j: usize },
    #[error("contact map has a self-contact at residue {0}")]
    DiagonalContact(usize),
    #[error("contact ({i}, {j}) out of range for {size} residues")]
    ContactIndex { i: usize, j: usize, size: usize },
    #[error("{}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}
