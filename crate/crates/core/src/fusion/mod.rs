//! Drug–target model assembly: the early-fusion model, where the drug joins
//! the residue graph as an extra node, and the late-fusion baseline.

mod config;
mod gefa;
mod glfa;
mod parts;

use thiserror::Error;

use crate::chem::DrugFeatures;
use crate::gnn::{Bound, GnnError, ParamStore};
use crate::numcore::{Tape, TensorError, Var};
use crate::protein::ProteinGraph;

pub use config::{Ablation, DrugRepresentation, EdgeWeighting, ModelConfig, ModelDims, ModelKind};
pub use gefa::{FusedEncoding, GefaForward, GefaModel};
pub use glfa::GlfaModel;
pub use parts::{
    build_fused_graph, combine_drug, AttentionHead, FusedGraph, GraphBranch, Predictor,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("{what} has width {found}, model expects {expected}")]
    InputWidth {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} has no nodes")]
    EmptyInput(&'static str),
    #[error("invalid model configuration: {0}")]
    Config(String),
}

impl From<TensorError> for FusionError {
    fn from(e: TensorError) -> Self {
        Self::Gnn(GnnError::Tensor(e))
    }
}

/// A parameterized affinity regressor over one drug–protein pair.
pub trait AffinityModel: Sync {
    fn config(&self) -> &ModelConfig;
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;

    /// Scalar predicted affinity on `tape`, with parameters taken from `p`.
    fn forward<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        drug: &DrugFeatures,
        protein: &ProteinGraph,
    ) -> Result<Var<'t>, FusionError>;

    /// Inference without keeping gradients.
    fn predict(&self, drug: &DrugFeatures, protein: &ProteinGraph) -> Result<f64, FusionError> {
        let tape = Tape::new();
        let p = self.params().bind(&tape);
        Ok(self.forward(&tape, &p, drug, protein)?.value().item())
    }
}

/// Either architecture behind one type.
#[derive(Debug, Clone)]
pub enum Model {
    Gefa(GefaModel),
    Glfa(GlfaModel),
}

impl Model {
    /// Seeded initialization of the architecture named by `config.kind`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, FusionError> {
        Ok(match config.kind {
            ModelKind::Gefa => Self::Gefa(GefaModel::new(config, seed)?),
            ModelKind::Glfa => Self::Glfa(GlfaModel::new(config, seed)?),
        })
    }
}

impl AffinityModel for Model {
    fn config(&self) -> &ModelConfig {
        match self {
            Self::Gefa(m) => m.config(),
            Self::Glfa(m) => m.config(),
        }
    }

    fn params(&self) -> &ParamStore {
        match self {
            Self::Gefa(m) => m.params(),
            Self::Glfa(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            Self::Gefa(m) => m.params_mut(),
            Self::Glfa(m) => m.params_mut(),
        }
    }

    fn forward<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        drug: &DrugFeatures,
        protein: &ProteinGraph,
    ) -> Result<Var<'t>, FusionError> {
        match self {
            Self::Gefa(m) => m.forward(tape, p, drug, protein),
            Self::Glfa(m) => m.forward(tape, p, drug, protein),
        }
    }
}

pub(crate) fn check_inputs(
    dims: &ModelDims,
    drug: &DrugFeatures,
    protein: &ProteinGraph,
) -> Result<(), FusionError> {
    if drug.atom_count() == 0 {
        return Err(FusionError::EmptyInput("drug graph"));
    }
    if protein.is_empty() {
        return Err(FusionError::EmptyInput("protein graph"));
    }
    let drug_width = drug.node_features.shape()[1];
    if drug_width != dims.drug_in {
        return Err(FusionError::InputWidth {
            what: "drug node features",
            expected: dims.drug_in,
            found: drug_width,
        });
    }
    if protein.feature_dim() != dims.protein_in {
        return Err(FusionError::InputWidth {
            what: "residue features",
            expected: dims.protein_in,
            found: protein.feature_dim(),
        });
    }
    Ok(())
}
