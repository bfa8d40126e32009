mod common;

use common::*;
use gefa::fusion::{
    Ablation, AffinityModel, DrugRepresentation, EdgeWeighting, GefaModel, GlfaModel, Model,
    ModelDims, ModelKind,
};
use gefa::gnn::Bound;
use gefa::numcore::{gradcheck, Tape, Tensor};
use gefa::synth;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gefa(ablation: Ablation, dims: ModelDims, seed: u64) -> GefaModel {
    GefaModel::new(config(ModelKind::Gefa, dims, ablation), seed).unwrap()
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = gefa(Ablation::default(), tiny_dims(), 3);
    let d = drug("CC(=O)N");
    assert_eq!(d.atom_count(), 4);
    let p = synth::random_protein(&mut rng, 5, EMBED);
    let inputs: Vec<Tensor> = model.params().iter().map(|(_, t)| t.clone()).collect();
    let report = gradcheck::check(&inputs, |tape, vars| {
        let bound = Bound::from_vars(vars.to_vec());
        Ok(model.forward(tape, &bound, &d, &p).expect("forward"))
    })
    .unwrap();
    assert!(report.passes(1e-4), "{report:?}");
    assert_eq!(report.checked, model.params().parameter_count());
}

#[test]
fn attention_parameters_receive_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let model = gefa(Ablation::default(), tiny_dims(), 4);
    let (d, p) = random_instance(&mut rng, (3, 8), EMBED);
    let tape = Tape::new();
    let bound = model.params().bind(&tape);
    let pred = model.forward(&tape, &bound, &d, &p).unwrap();
    let grads = tape.backward(pred).unwrap();
    let all = bound.gradients(&grads);
    let head = model.attention.unwrap();
    for id in [head.w1, head.w2] {
        assert!(
            all[id.index()].data().iter().any(|g| *g != 0.0),
            "{}",
            model.params().name(id)
        );
    }
}

#[test]
fn zero_edges_decouple_residues_from_drug() {
    let ablation = Ablation {
        edges: EdgeWeighting::Zero,
        ..Ablation::default()
    };
    let dims = ModelDims {
        hidden: 8,
        ..tiny_dims()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let model = gefa(ablation, dims, trial);
        let (d, p) = random_instance(&mut rng, (1, 20), EMBED);
        let tape = Tape::new();
        let bound = model.params().bind(&tape);
        let fwd = model.forward_detailed(&tape, &bound, &d, &p).unwrap();
        let alone = model.encode_protein_only(&tape, &bound, &p).unwrap();
        let diff = fwd
            .fused
            .residue_states
            .value()
            .max_abs_diff(&alone.value());
        assert!(diff <= 1e-9, "trial {trial}: {diff}");

        // A different drug leaves the pooled protein vector untouched.
        let (other, _) = random_instance(&mut rng, (1, 1), EMBED);
        let fwd2 = model.forward_detailed(&tape, &bound, &other, &p).unwrap();
        assert!(
            fwd.fused
                .protein
                .value()
                .max_abs_diff(&fwd2.fused.protein.value())
                <= 1e-9
        );
    }
}

#[test]
fn predictions_invariant_under_relabeling() {
    let dims = ModelDims {
        hidden: 16,
        attention: 8,
        predictor: [16, 8],
        ..tiny_dims()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in [ModelKind::Gefa, ModelKind::Glfa] {
        let model = Model::new(config(kind, dims, Ablation::default()), 9).unwrap();
        for _ in 0..10 {
            let (d, p) = random_instance(&mut rng, (2, 25), EMBED);
            let base = model.predict(&d, &p).unwrap();
            let dp = random_perm(&mut rng, d.atom_count());
            let pp = random_perm(&mut rng, p.len());
            let moved = model.predict(&d.permuted(&dp), &p.permuted(&pp)).unwrap();
            assert!((base - moved).abs() < 1e-8, "{kind}: {base} vs {moved}");
        }
    }
}

#[test]
fn late_fusion_is_zero_edge_early_fusion() {
    let ablation = Ablation {
        edges: EdgeWeighting::Zero,
        drug_rep: DrugRepresentation::Before,
        ..Ablation::default()
    };
    let dims = ModelDims {
        hidden: 8,
        ..tiny_dims()
    };
    let mut early = gefa(ablation, dims, 21);
    let late = GlfaModel::new(config(ModelKind::Glfa, dims, ablation), 22).unwrap();

    // Share every weight: late-fusion protein branch = early-fusion fused branch.
    let names: Vec<String> = late.params().iter().map(|(n, _)| n.to_string()).collect();
    for name in names {
        let source = name.replacen("protein.", "fused.", 1);
        *early.params_mut().by_name_mut(&source).unwrap() =
            late.params().by_name(&name).unwrap().clone();
    }
    let h = dims.hidden;
    *early
        .params_mut()
        .by_name_mut("drug_transform.weight")
        .unwrap() = Tensor::identity(h);
    *early
        .params_mut()
        .by_name_mut("drug_transform.bias")
        .unwrap() = Tensor::zeros(&[h]);

    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let (d, p) = random_instance(&mut rng, (1, 20), EMBED);
        let a = early.predict(&d, &p).unwrap();
        let b = late.predict(&d, &p).unwrap();
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

#[test]
fn uniform_edges_border_is_all_ones() {
    let ablation = Ablation {
        edges: EdgeWeighting::Uniform,
        ..Ablation::default()
    };
    let model = gefa(ablation, tiny_dims(), 1);
    assert!(model.attention.is_none());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (d, p) = random_instance(&mut rng, (4, 9), EMBED);
    let tape = Tape::new();
    let bound = model.params().bind(&tape);
    let fwd = model.forward_detailed(&tape, &bound, &d, &p).unwrap();
    assert!(fwd.edge_weights.value().data().iter().all(|&w| w == 1.0));
    assert!(model.predict(&d, &p).unwrap().is_finite());
}

#[test]
fn drug_representation_choices() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (d, p) = random_instance(&mut rng, (4, 9), EMBED);
    for rep in [
        DrugRepresentation::Before,
        DrugRepresentation::After,
        DrugRepresentation::Combined,
    ] {
        let model = gefa(
            Ablation {
                drug_rep: rep,
                ..Ablation::default()
            },
            tiny_dims(),
            1,
        );
        let tape = Tape::new();
        let bound = model.params().bind(&tape);
        let fwd = model.forward_detailed(&tape, &bound, &d, &p).unwrap();
        let head = fwd.drug_for_head.value();
        let refined = fwd.fused.drug.value();
        match rep {
            DrugRepresentation::After => {
                assert!(model.drug_transform.is_none());
                assert_eq!(head.data(), refined.data());
            }
            DrugRepresentation::Before => {
                let t = model.drug_transform.unwrap();
                let expected = t.forward(&bound, fwd.drug_vector).unwrap().value();
                assert_eq!(head.data(), expected.data());
            }
            DrugRepresentation::Combined => {
                let t = model.drug_transform.unwrap();
                let before = t.forward(&bound, fwd.drug_vector).unwrap().value();
                for i in 0..head.len() {
                    assert!(
                        head.data()[i] >= before.data()[i] && head.data()[i] >= refined.data()[i]
                    );
                }
            }
        }
    }
}

#[test]
fn component_toggles_change_parameter_set() {
    let full = gefa(Ablation::default(), tiny_dims(), 0);
    let names = |m: &GefaModel| {
        m.params()
            .iter()
            .map(|(n, _)| n.to_string())
            .collect::<Vec<_>>()
    };
    let all = names(&full);
    assert!(all.iter().any(|n| n.starts_with("fused.gcn1")));
    assert!(all.iter().any(|n| n.starts_with("drug.residual")));
    let lean = gefa(
        Ablation::from_flags(&["no-gcn2", "no-res-drug", "no-res-protein", "no-attention"])
            .unwrap(),
        tiny_dims(),
        0,
    );
    let lean = names(&lean);
    assert!(!lean
        .iter()
        .any(|n| n.contains("gcn") || n.contains("residual") || n.starts_with("attention")));
}

#[test]
fn single_atom_and_single_residue() {
    let model = gefa(Ablation::default(), tiny_dims(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = synth::random_protein(&mut rng, 1, EMBED);
    let d = drug("C");
    assert!(model.predict(&d, &p).unwrap().is_finite());
    assert_eq!(model.attention_weights(&d, &p).unwrap(), vec![1.0]);
}

#[test]
fn wrong_input_width_is_rejected() {
    let model = gefa(Ablation::default(), tiny_dims(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = synth::random_protein(&mut rng, 5, EMBED + 1);
    let err = model.predict(&drug("CC"), &p).unwrap_err();
    assert!(err.to_string().contains("residue features"), "{err}");
}

#[test]
fn same_seed_same_prediction_bits() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let (d, p) = random_instance(&mut rng, (5, 12), EMBED);
    let a = gefa(Ablation::default(), tiny_dims(), 77)
        .predict(&d, &p)
        .unwrap();
    let b = gefa(Ablation::default(), tiny_dims(), 77)
        .predict(&d, &p)
        .unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}
