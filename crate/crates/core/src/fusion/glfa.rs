use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::parts::BranchSpec;
use super::{
    check_inputs, AffinityModel, FusionError, GraphBranch, ModelConfig, ModelKind, Predictor,
};
use crate::chem::DrugFeatures;
use crate::gnn::{Bound, ParamStore};
use crate::numcore::{Tape, Var};
use crate::protein::ProteinGraph;

/// Late-fusion baseline: independent drug and protein encoders whose pooled
/// vectors meet only at the regression head. Attention and drug
/// representation switches do not apply.
#[derive(Debug, Clone)]
pub struct GlfaModel {
    config: ModelConfig,
    params: ParamStore,
    pub drug: GraphBranch,
    pub protein: GraphBranch,
    pub predictor: Predictor,
}

impl GlfaModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, FusionError> {
        if config.kind != ModelKind::Glfa {
            return Err(FusionError::Config(format!(
                "expected a glfa config, got {}",
                config.kind
            )));
        }
        config.dims.validate()?;
        let d = config.dims;
        let a = config.ablation;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let drug = GraphBranch::new(
            &mut params,
            "drug",
            BranchSpec {
                input: d.drug_in,
                hidden: d.hidden,
                gcn: a.gcn_layers,
                residual: a.residual_drug,
                repeat: d.residual_repeat,
                residual_raw_adjacency: a.residual_raw_adjacency,
            },
            &mut rng,
        );
        let protein = GraphBranch::new(
            &mut params,
            "protein",
            BranchSpec {
                input: d.protein_in,
                hidden: d.hidden,
                gcn: a.gcn_layers,
                residual: a.residual_protein,
                repeat: d.residual_repeat,
                residual_raw_adjacency: a.residual_raw_adjacency,
            },
            &mut rng,
        );
        let predictor = Predictor::new(
            &mut params,
            "predictor",
            2 * d.hidden,
            &d.predictor,
            &mut rng,
        );
        Ok(Self {
            config,
            params,
            drug,
            protein,
            predictor,
        })
    }

    pub fn encode_protein<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        protein: &ProteinGraph,
    ) -> Result<Var<'t>, FusionError> {
        let h = self
            .protein
            .project(p, tape.constant(protein.node_features.clone()))?;
        let states =
            self.protein
                .propagate(p, h, tape.constant(protein.adjacency.clone()), false)?;
        self.protein.readout(p, states)
    }

    pub fn encode_drug<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        drug: &DrugFeatures,
    ) -> Result<Var<'t>, FusionError> {
        let h = self
            .drug
            .project(p, tape.constant(drug.node_features.clone()))?;
        let states = self
            .drug
            .propagate(p, h, tape.constant(drug.adjacency.clone()), false)?;
        self.drug.readout(p, states)
    }
}

impl AffinityModel for GlfaModel {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        drug: &DrugFeatures,
        protein: &ProteinGraph,
    ) -> Result<Var<'t>, FusionError> {
        check_inputs(&self.config.dims, drug, protein)?;
        let drug_vec = self.encode_drug(tape, p, drug)?;
        let protein_vec = self.encode_protein(tape, p, protein)?;
        self.predictor.forward(p, drug_vec.concat(protein_vec)?)
    }
}
