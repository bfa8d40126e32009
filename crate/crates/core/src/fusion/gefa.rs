use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::parts::BranchSpec;
use super::{
    build_fused_graph, check_inputs, combine_drug, AffinityModel, AttentionHead,
    DrugRepresentation, EdgeWeighting, FusedGraph, FusionError, GraphBranch, ModelConfig,
    ModelKind, Predictor,
};
use crate::chem::DrugFeatures;
use crate::gnn::{Bound, Linear, ParamStore};
use crate::numcore::{Tape, Tensor, Var};
use crate::protein::ProteinGraph;

/// Early-fusion model: the pooled drug vector becomes an extra node of the
/// residue graph, linked to every residue with a learned attention weight.
#[derive(Debug, Clone)]
pub struct GefaModel {
    config: ModelConfig,
    params: ParamStore,
    pub drug: GraphBranch,
    pub attention: Option<AttentionHead>,
    pub fused: GraphBranch,
    /// Affine map on the pre-fusion drug vector; absent when only the
    /// refined drug node feeds the head.
    pub drug_transform: Option<Linear>,
    pub predictor: Predictor,
}

/// Outputs of the fused-graph pass.
#[derive(Debug, Clone, Copy)]
pub struct FusedEncoding<'t> {
    /// Final residue states, `L×h`, drug row removed.
    pub residue_states: Var<'t>,
    /// Pooled protein vector (residue rows only).
    pub protein: Var<'t>,
    /// Refined drug node.
    pub drug: Var<'t>,
}

/// Every intermediate of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct GefaForward<'t> {
    pub drug_nodes: Var<'t>,
    pub drug_vector: Var<'t>,
    pub residue_inputs: Var<'t>,
    pub edge_weights: Var<'t>,
    pub fused: FusedEncoding<'t>,
    pub drug_for_head: Var<'t>,
    pub prediction: Var<'t>,
}

impl GefaModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, FusionError> {
        if config.kind != ModelKind::Gefa {
            return Err(FusionError::Config(format!(
                "expected a gefa config, got {}",
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
        let fused = GraphBranch::new(
            &mut params,
            "fused",
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
        let attention = (a.edges == EdgeWeighting::Attention)
            .then(|| AttentionHead::new(&mut params, "attention", d.hidden, d.attention, &mut rng));
        let drug_transform = (a.drug_rep != DrugRepresentation::After)
            .then(|| Linear::new(&mut params, "drug_transform", d.hidden, d.hidden, &mut rng));
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
            attention,
            fused,
            drug_transform,
            predictor,
        })
    }

    /// Drug node states and pooled drug vector.
    pub fn encode_drug<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        drug: &DrugFeatures,
    ) -> Result<(Var<'t>, Var<'t>), FusionError> {
        let x = tape.constant(drug.node_features.clone());
        let adj = tape.constant(drug.adjacency.clone());
        let h = self.drug.project(p, x)?;
        let nodes = self.drug.propagate(p, h, adj, false)?;
        let vector = self.drug.readout(p, nodes)?;
        Ok((nodes, vector))
    }

    /// Projected residue features, the node states the attention scores and
    /// the fused graph start from.
    pub fn project_protein<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        protein: &ProteinGraph,
    ) -> Result<Var<'t>, FusionError> {
        self.fused
            .project(p, tape.constant(protein.node_features.clone()))
    }

    /// Drug–residue edge weights under the configured weighting.
    pub fn edge_weights<'t>(
        &self,
        p: &Bound<'t>,
        residues: Var<'t>,
    ) -> Result<Var<'t>, FusionError> {
        let tape = residues.tape();
        let l = residues.value().shape()[0];
        Ok(match (self.config.ablation.edges, &self.attention) {
            (EdgeWeighting::Attention, Some(head)) => head.forward(p, residues)?,
            (EdgeWeighting::Uniform, _) => tape.constant(Tensor::filled(&[l], 1.0)),
            (EdgeWeighting::Zero, _) => tape.constant(Tensor::zeros(&[l])),
            (EdgeWeighting::Attention, None) => {
                unreachable!("attention head is built with the model")
            }
        })
    }

    /// Message passing over the fused graph.
    pub fn encode_fused<'t>(
        &self,
        p: &Bound<'t>,
        graph: &FusedGraph<'t>,
    ) -> Result<FusedEncoding<'t>, FusionError> {
        let states = self
            .fused
            .propagate(p, graph.nodes, graph.adjacency, true)?;
        let l = graph.residues;
        let residue_states = states.slice_rows(0, l)?;
        Ok(FusedEncoding {
            residue_states,
            protein: self.fused.readout(p, residue_states)?,
            drug: states.row(graph.drug_index())?,
        })
    }

    /// Residue states from the same branch run on the residue graph alone.
    pub fn encode_protein_only<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        protein: &ProteinGraph,
    ) -> Result<Var<'t>, FusionError> {
        let h = self.project_protein(tape, p, protein)?;
        self.fused
            .propagate(p, h, tape.constant(protein.adjacency.clone()), false)
    }

    pub fn forward_detailed<'t>(
        &self,
        tape: &'t Tape,
        p: &Bound<'t>,
        drug: &DrugFeatures,
        protein: &ProteinGraph,
    ) -> Result<GefaForward<'t>, FusionError> {
        check_inputs(&self.config.dims, drug, protein)?;
        let (drug_nodes, drug_vector) = self.encode_drug(tape, p, drug)?;
        let residue_inputs = self.project_protein(tape, p, protein)?;
        let edge_weights = self.edge_weights(p, residue_inputs)?;
        let graph = build_fused_graph(
            residue_inputs,
            tape.constant(protein.adjacency.clone()),
            drug_vector,
            edge_weights,
        )?;
        let fused = self.encode_fused(p, &graph)?;
        let before = self
            .drug_transform
            .as_ref()
            .map(|t| t.forward(p, drug_vector))
            .transpose()?;
        let drug_for_head = combine_drug(self.config.ablation.drug_rep, before, fused.drug)?;
        let prediction = self
            .predictor
            .forward(p, drug_for_head.concat(fused.protein)?)?;
        Ok(GefaForward {
            drug_nodes,
            drug_vector,
            residue_inputs,
            edge_weights,
            fused,
            drug_for_head,
            prediction,
        })
    }

    /// Residue attention weights for one pair. Under uniform or zero
    /// weighting these are the constant edge weights.
    pub fn attention_weights(
        &self,
        drug: &DrugFeatures,
        protein: &ProteinGraph,
    ) -> Result<Vec<f64>, FusionError> {
        check_inputs(&self.config.dims, drug, protein)?;
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let residues = self.project_protein(&tape, &p, protein)?;
        Ok(self.edge_weights(&p, residues)?.value().data().to_vec())
    }
}

impl AffinityModel for GefaModel {
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
        Ok(self.forward_detailed(tape, p, drug, protein)?.prediction)
    }
}
