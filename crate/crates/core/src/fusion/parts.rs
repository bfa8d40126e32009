use rand::Rng;

use super::{DrugRepresentation, FusionError};
use crate::gnn::{
    glorot_uniform, sym_normalize, Bound, GcnLayer, Linear, ParamId, ParamStore, Readout,
    ResidualBlock,
};
use crate::numcore::Var;

/// Input projection, optional GCN pair, optional residual block and a
/// max-pool readout, all over one graph.
#[derive(Debug, Clone)]
pub struct GraphBranch {
    pub input: Linear,
    pub gcn: Option<[GcnLayer; 2]>,
    pub residual: Option<ResidualBlock>,
    pub readout: Readout,
    /// Residual block sees the unnormalized adjacency.
    pub residual_raw_adjacency: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BranchSpec {
    pub input: usize,
    pub hidden: usize,
    pub gcn: bool,
    pub residual: bool,
    pub repeat: usize,
    pub residual_raw_adjacency: bool,
}

impl GraphBranch {
    pub(crate) fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        spec: BranchSpec,
        rng: &mut R,
    ) -> Self {
        let h = spec.hidden;
        let input = Linear::new(store, &format!("{name}.input"), spec.input, h, rng);
        let gcn = spec.gcn.then(|| {
            [
                GcnLayer::new(store, &format!("{name}.gcn1"), h, h, rng),
                GcnLayer::new(store, &format!("{name}.gcn2"), h, h, rng),
            ]
        });
        let residual = spec
            .residual
            .then(|| ResidualBlock::new(store, &format!("{name}.residual"), h, spec.repeat, rng));
        let readout = Readout::new(store, &format!("{name}.readout"), h, h, h, rng);
        Self {
            input,
            gcn,
            residual,
            readout,
            residual_raw_adjacency: spec.residual_raw_adjacency,
        }
    }

    /// Affine projection of raw node features to the hidden width.
    pub fn project<'t>(&self, p: &Bound<'t>, features: Var<'t>) -> Result<Var<'t>, FusionError> {
        Ok(self.input.forward(p, features)?)
    }

    /// Message passing over already projected node states.
    pub fn propagate<'t>(
        &self,
        p: &Bound<'t>,
        mut h: Var<'t>,
        adjacency: Var<'t>,
        edge_weights_allowed: bool,
    ) -> Result<Var<'t>, FusionError> {
        let a_norm = sym_normalize(adjacency, edge_weights_allowed)?;
        if let Some([g1, g2]) = &self.gcn {
            h = g1.forward(p, h, a_norm)?;
            h = g2.forward(p, h, a_norm)?;
        }
        if let Some(res) = &self.residual {
            let a = if self.residual_raw_adjacency {
                adjacency
            } else {
                a_norm
            };
            h = res.forward(p, h, a)?;
        }
        Ok(h)
    }

    pub fn readout<'t>(&self, p: &Bound<'t>, h: Var<'t>) -> Result<Var<'t>, FusionError> {
        Ok(self.readout.forward(p, h)?)
    }
}

/// Residue self-attention `softmax(tanh(V·W1)·W2)` giving one weight per residue.
#[derive(Debug, Clone, Copy)]
pub struct AttentionHead {
    pub w1: ParamId,
    pub w2: ParamId,
}

impl AttentionHead {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        width: usize,
        inner: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            w1: store.add(
                format!("{name}.w1"),
                glorot_uniform(rng, width, inner, &[width, inner]),
            ),
            w2: store.add(
                format!("{name}.w2"),
                glorot_uniform(rng, inner, 1, &[inner, 1]),
            ),
        }
    }

    /// Weights over the rows of `residues` (`L×width`); they sum to one.
    pub fn forward<'t>(&self, p: &Bound<'t>, residues: Var<'t>) -> Result<Var<'t>, FusionError> {
        let l = residues.value().shape()[0];
        let scores = residues.matmul(p[self.w1])?.tanh().matmul(p[self.w2])?;
        Ok(scores.reshape(&[l])?.softmax()?)
    }
}

/// Affine layers with ReLU between them, ending in a single output.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub layers: Vec<Linear>,
}

impl Predictor {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    /// Maps a feature vector to a rank-0 prediction.
    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>, FusionError> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(p, h)?;
            if i < last {
                h = h.relu();
            }
        }
        Ok(h.reshape(&[])?)
    }
}

/// Residue rows followed by the drug row, with the drug wired to every
/// residue through `edge_weights`.
#[derive(Debug, Clone, Copy)]
pub struct FusedGraph<'t> {
    /// `(L+1)×h`; row `L` is the drug.
    pub nodes: Var<'t>,
    /// `(L+1)×(L+1)`, residue block unchanged, drug border from the weights.
    pub adjacency: Var<'t>,
    pub residues: usize,
}

impl FusedGraph<'_> {
    pub fn drug_index(&self) -> usize {
        self.residues
    }
}

/// Appends `drug` (width `h`) as a node to a residue graph with node states
/// `residues` (`L×h`) and 0/1 adjacency `residue_adjacency` (`L×L`).
pub fn build_fused_graph<'t>(
    residues: Var<'t>,
    residue_adjacency: Var<'t>,
    drug: Var<'t>,
    edge_weights: Var<'t>,
) -> Result<FusedGraph<'t>, FusionError> {
    let shape = residues.value().shape().to_vec();
    let [l, h] = shape[..] else {
        return Err(FusionError::Config(format!(
            "residue states must be a matrix, got {shape:?}"
        )));
    };
    let drug_width = drug.value().len();
    if drug_width != h {
        return Err(FusionError::InputWidth {
            what: "drug vector",
            expected: h,
            found: drug_width,
        });
    }
    let weights = edge_weights.value();
    if weights.rank() != 1 || weights.len() != l {
        return Err(FusionError::InputWidth {
            what: "drug edge weights",
            expected: l,
            found: weights.len(),
        });
    }
    Ok(FusedGraph {
        nodes: residues.append_row(drug)?,
        adjacency: residue_adjacency.border(edge_weights)?,
        residues: l,
    })
}

/// Drug vector for the regression head. `before` is the transformed
/// pre-fusion vector and `after` the refined drug node; each is only read
/// when the representation needs it.
pub fn combine_drug<'t>(
    rep: DrugRepresentation,
    before: Option<Var<'t>>,
    after: Var<'t>,
) -> Result<Var<'t>, FusionError> {
    let missing = || FusionError::Config("drug representation needs the pre-fusion vector".into());
    match rep {
        DrugRepresentation::After => Ok(after),
        DrugRepresentation::Before => before.ok_or_else(missing),
        DrugRepresentation::Combined => {
            let before = before.ok_or_else(missing)?;
            let h = before.value().len();
            Ok(before
                .reshape(&[1, h])?
                .append_row(after)?
                .max_pool_rows()?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{Tape, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fused_graph_layout() {
        let tape = Tape::new();
        let residues = tape.constant(
            Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap(),
        );
        let adj = tape.constant(
            Tensor::from_rows(&[
                vec![0.0, 1.0, 0.0],
                vec![1.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0],
            ])
            .unwrap(),
        );
        let drug = tape.constant(Tensor::vector(vec![9.0, 8.0]));
        let alpha = tape.constant(Tensor::vector(vec![0.2, 0.3, 0.5]));
        let g = build_fused_graph(residues, adj, drug, alpha).unwrap();
        assert_eq!(g.drug_index(), 3);
        let nodes = g.nodes.value();
        assert_eq!(nodes.shape(), &[4, 2]);
        assert_eq!(nodes.row(3), &[9.0, 8.0]);
        let a = g.adjacency.value();
        assert_eq!(a.shape(), &[4, 4]);
        assert_eq!(a.get2(3, 3), 0.0);
        assert_eq!(a.get2(1, 3), 0.3);
        assert_eq!(a.get2(3, 2), 0.5);
        assert_eq!(a.get2(0, 1), 1.0);
    }

    #[test]
    fn fused_graph_rejects_width_mismatch() {
        let tape = Tape::new();
        let residues = tape.constant(Tensor::zeros(&[2, 3]));
        let adj = tape.constant(Tensor::zeros(&[2, 2]));
        let drug = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let alpha = tape.constant(Tensor::vector(vec![0.5, 0.5]));
        assert!(matches!(
            build_fused_graph(residues, adj, drug, alpha),
            Err(FusionError::InputWidth {
                expected: 3,
                found: 2,
                ..
            })
        ));
        let drug = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let alpha = tape.constant(Tensor::vector(vec![1.0]));
        assert!(build_fused_graph(residues, adj, drug, alpha).is_err());
    }

    #[test]
    fn combine_modes() {
        let tape = Tape::new();
        let before = tape.constant(Tensor::vector(vec![1.0, -2.0, 3.0]));
        let after = tape.constant(Tensor::vector(vec![0.0, 5.0, 3.0]));
        let c = combine_drug(DrugRepresentation::Combined, Some(before), after).unwrap();
        assert_eq!(c.value().data(), &[1.0, 5.0, 3.0]);
        let b = combine_drug(DrugRepresentation::Before, Some(before), after).unwrap();
        assert_eq!(b.value().data(), before.value().data());
        let a = combine_drug(DrugRepresentation::After, None, after).unwrap();
        assert_eq!(a.value().data(), after.value().data());
        assert!(combine_drug(DrugRepresentation::Combined, None, after).is_err());
    }

    #[test]
    fn attention_sums_to_one() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = AttentionHead::new(&mut store, "attn", 3, 2, &mut rng);
        let tape = Tape::new();
        let p = store.bind(&tape);
        let v = tape.constant(
            Tensor::new(vec![4, 3], (0..12).map(|i| i as f64 * 0.3 - 1.0).collect()).unwrap(),
        );
        let alpha = head.forward(&p, v).unwrap().value();
        assert_eq!(alpha.shape(), &[4]);
        assert!((alpha.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(alpha.data().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn predictor_outputs_scalar() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pred = Predictor::new(&mut store, "pred", 4, &[5, 3], &mut rng);
        assert_eq!(pred.layers.len(), 3);
        let tape = Tape::new();
        let p = store.bind(&tape);
        let out = pred
            .forward(&p, tape.constant(Tensor::vector(vec![1.0, 0.0, -1.0, 2.0])))
            .unwrap();
        assert!(out.value().shape().is_empty());
    }
}
