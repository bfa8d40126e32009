use rand::Rng;

use super::params::{glorot_uniform, Bound, ParamId, ParamStore};
use super::GnnError;
use crate::numcore::{Tensor, Var};

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the row sums of `A + I`.
///
/// The adjacency must be square, symmetric and non-negative. Without
/// `edge_weights_allowed` it must also be 0/1. The computation stays on the
/// tape, so gradients reach fractional edge weights.
pub fn sym_normalize<'t>(
    adjacency: Var<'t>,
    edge_weights_allowed: bool,
) -> Result<Var<'t>, GnnError> {
    let a = adjacency.value();
    let (n, c) = a.dims2()?;
    if n != c {
        return Err(GnnError::NotSquare(a.shape().to_vec()));
    }
    for i in 0..n {
        for j in 0..n {
            let v = a.get2(i, j);
            if v < 0.0 || !v.is_finite() {
                return Err(GnnError::NegativeEdge { i, j, value: v });
            }
            if !edge_weights_allowed && v != 0.0 && v != 1.0 {
                return Err(GnnError::FractionalEdge { i, j, value: v });
            }
            if j > i && v != a.get2(j, i) {
                return Err(GnnError::Asymmetric { i, j });
            }
        }
    }
    let with_loops = adjacency.add_identity()?;
    let degree = with_loops.sum_rows()?;
    let scale = degree.outer(degree)?.rsqrt()?;
    Ok(with_loops.mul(scale)?)
}

/// Affine map `x·W + b` applied to a vector or to each row of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: store.add(
                format!("{name}.weight"),
                glorot_uniform(rng, input, output, &[input, output]),
            ),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[output])),
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>, GnnError> {
        let w = p[self.weight];
        let out = if x.value().rank() == 1 {
            x.vecmat(w)?
        } else {
            x.matmul(w)?
        };
        Ok(out.add_row(p[self.bias])?)
    }
}

/// Graph convolution `relu(Â · H · W)` over a pre-normalized adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnLayer {
    pub weight: ParamId,
}

impl GcnLayer {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: store.add(
                format!("{name}.weight"),
                glorot_uniform(rng, input, output, &[input, output]),
            ),
        }
    }

    pub fn forward<'t>(
        &self,
        p: &Bound<'t>,
        h: Var<'t>,
        a_norm: Var<'t>,
    ) -> Result<Var<'t>, GnnError> {
        Ok(a_norm.matmul(h.matmul(p[self.weight])?)?.relu())
    }
}

/// One shared parameter set applied `repeat` times:
/// `H ← relu(H + relu(Â·H·W1 + b)·W2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualBlock {
    pub w1: ParamId,
    pub w2: ParamId,
    pub bias: ParamId,
    pub repeat: usize,
}

impl ResidualBlock {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        width: usize,
        repeat: usize,
        rng: &mut R,
    ) -> Self {
        assert!(repeat > 0, "residual repeat count must be positive");
        Self {
            w1: store.add(
                format!("{name}.w1"),
                glorot_uniform(rng, width, width, &[width, width]),
            ),
            w2: store.add(
                format!("{name}.w2"),
                glorot_uniform(rng, width, width, &[width, width]),
            ),
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[width])),
            repeat,
        }
    }

    /// A single application of the block.
    pub fn apply_once<'t>(
        &self,
        p: &Bound<'t>,
        h: Var<'t>,
        a: Var<'t>,
    ) -> Result<Var<'t>, GnnError> {
        let width = p[self.w1].value().shape()[0];
        let h_width = h.value().shape().get(1).copied().unwrap_or(0);
        if h_width != width {
            return Err(GnnError::Width {
                expected: width,
                found: h_width,
            });
        }
        let inner = a
            .matmul(h.matmul(p[self.w1])?)?
            .add_row(p[self.bias])?
            .relu();
        let update = inner.matmul(p[self.w2])?;
        Ok(h.add(update)?.relu())
    }

    pub fn forward<'t>(
        &self,
        p: &Bound<'t>,
        mut h: Var<'t>,
        a: Var<'t>,
    ) -> Result<Var<'t>, GnnError> {
        for _ in 0..self.repeat {
            h = self.apply_once(p, h, a)?;
        }
        Ok(h)
    }
}

/// Columnwise max pooling followed by two affine maps with nothing in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Readout {
    pub proj1: Linear,
    pub proj2: Linear,
}

impl Readout {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            proj1: Linear::new(store, &format!("{name}.proj1"), input, hidden, rng),
            proj2: Linear::new(store, &format!("{name}.proj2"), hidden, output, rng),
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, h: Var<'t>) -> Result<Var<'t>, GnnError> {
        let pooled = h.max_pool_rows()?;
        self.proj2.forward(p, self.proj1.forward(p, pooled)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{gradcheck, Tape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        let data = (0..r * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
        Tensor::new(vec![r, c], data).unwrap()
    }

    fn path3() -> Tensor {
        Tensor::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn normalize_single_node() {
        let tape = Tape::new();
        let out = sym_normalize(tape.constant(Tensor::zeros(&[1, 1])), false).unwrap();
        assert_eq!(out.value().data(), &[1.0]);
    }

    #[test]
    fn normalize_two_nodes_one_edge() {
        let tape = Tape::new();
        let a = Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let out = sym_normalize(tape.constant(a), false).unwrap();
        assert_eq!(out.value().data(), &[0.5; 4]);
    }

    #[test]
    fn normalize_preserves_symmetry() {
        let tape = Tape::new();
        let out = sym_normalize(tape.constant(path3()), false)
            .unwrap()
            .value();
        assert_eq!(*out, out.transpose().unwrap());
    }

    #[test]
    fn normalize_domain_errors() {
        let tape = Tape::new();
        let neg = Tensor::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(matches!(
            sym_normalize(tape.constant(neg), true),
            Err(GnnError::NegativeEdge { .. })
        ));
        let frac = Tensor::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(
            sym_normalize(tape.constant(frac.clone()), false),
            Err(GnnError::FractionalEdge { .. })
        ));
        assert!(sym_normalize(tape.constant(frac), true).is_ok());
        let asym = Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            sym_normalize(tape.constant(asym), false),
            Err(GnnError::Asymmetric { .. })
        ));
    }

    #[test]
    fn gcn_single_node_identity_weight() {
        let mut store = ParamStore::new();
        let layer = GcnLayer::new(&mut store, "g", 3, 3, &mut rng());
        *store.get_mut(layer.weight) = Tensor::identity(3);
        let tape = Tape::new();
        let p = store.bind(&tape);
        let a = sym_normalize(tape.constant(Tensor::zeros(&[1, 1])), false).unwrap();
        let x = tape.constant(Tensor::from_rows(&[vec![0.5, 0.0, 2.0]]).unwrap());
        let out = layer.forward(&p, x, a).unwrap();
        assert_eq!(out.value().data(), &[0.5, 0.0, 2.0]);
    }

    #[test]
    fn gcn_isolated_node_matches_single_node_evaluation() {
        let mut r = rng();
        let mut store = ParamStore::new();
        let layer = GcnLayer::new(&mut store, "g", 2, 3, &mut r);
        let x = random_matrix(&mut r, 3, 2);
        // node 2 isolated, nodes 0-1 bonded
        let adj = Tensor::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let tape = Tape::new();
        let p = store.bind(&tape);
        let full = layer
            .forward(
                &p,
                tape.constant(x.clone()),
                sym_normalize(tape.constant(adj), false).unwrap(),
            )
            .unwrap()
            .value();
        let single = layer
            .forward(
                &p,
                tape.constant(Tensor::from_rows(&[x.row(2).to_vec()]).unwrap()),
                sym_normalize(tape.constant(Tensor::zeros(&[1, 1])), false).unwrap(),
            )
            .unwrap()
            .value();
        assert_eq!(full.row(2), single.row(0));
    }

    #[test]
    fn gcn_gradient_check() {
        let mut r = rng();
        let h = random_matrix(&mut r, 3, 2);
        let w = random_matrix(&mut r, 2, 4);
        let report = gradcheck::check(&[h, w], |tape, v| {
            let a = sym_normalize(tape.constant(path3()), false).unwrap();
            Ok(a.matmul(v[0].matmul(v[1])?)?.relu().sum())
        })
        .unwrap();
        assert!(report.passes(1e-4), "{report:?}");
    }

    #[test]
    fn normalize_gradient_through_edge_weights() {
        let mut r = rng();
        let base = path3();
        let w = Tensor::vector(vec![0.3, 0.9, 0.4]);
        let probe = random_matrix(&mut r, 4, 4);
        let report = gradcheck::check(&[w], |tape, v| {
            let bordered = tape.constant(base.clone()).border(v[0])?;
            let n = sym_normalize(bordered, true).map_err(|e| match e {
                GnnError::Tensor(t) => t,
                other => panic!("{other}"),
            })?;
            Ok(n.mul(tape.constant(probe.clone()))?.sum())
        })
        .unwrap();
        assert!(report.passes(1e-4), "{report:?}");
    }

    #[test]
    fn residual_with_zero_weights_is_relu_skip() {
        let mut r = rng();
        let mut store = ParamStore::new();
        let block = ResidualBlock::new(&mut store, "res", 3, 4, &mut r);
        *store.get_mut(block.w1) = Tensor::zeros(&[3, 3]);
        *store.get_mut(block.w2) = Tensor::zeros(&[3, 3]);
        let x = random_matrix(&mut r, 3, 3);
        let tape = Tape::new();
        let p = store.bind(&tape);
        let a = sym_normalize(tape.constant(path3()), false).unwrap();
        let out = block
            .forward(&p, tape.constant(x.clone()), a)
            .unwrap()
            .value();
        let relu: Vec<f64> = x.data().iter().map(|v| v.max(0.0)).collect();
        assert_eq!(out.data(), relu.as_slice());
    }

    #[test]
    fn residual_repeat_one_matches_manual() {
        let mut r = rng();
        let mut store = ParamStore::new();
        let block = ResidualBlock::new(&mut store, "res", 2, 1, &mut r);
        let x = random_matrix(&mut r, 3, 2);
        let tape = Tape::new();
        let p = store.bind(&tape);
        let a = sym_normalize(tape.constant(path3()), false).unwrap();
        let out = block
            .forward(&p, tape.constant(x.clone()), a)
            .unwrap()
            .value();

        let an = a.value();
        let w1 = store.get(block.w1);
        let w2 = store.get(block.w2);
        let mut inner = an.matmul(&x.matmul(w1).unwrap()).unwrap();
        inner.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)); // bias is zero
        let upd = inner.matmul(w2).unwrap();
        let manual: Vec<f64> = x
            .data()
            .iter()
            .zip(upd.data())
            .map(|(h, u)| (h + u).max(0.0))
            .collect();
        assert_eq!(out.data(), manual.as_slice());
    }

    #[test]
    fn residual_gradient_flows_through_skip_when_inner_is_dead() {
        let mut store = ParamStore::new();
        let block = ResidualBlock::new(&mut store, "res", 2, 2, &mut rng());
        // Large negative bias keeps the inner relu at zero everywhere.
        *store.get_mut(block.bias) = Tensor::vector(vec![-100.0, -100.0]);
        let x = Tensor::from_rows(&[vec![0.5, 1.5], vec![0.7, -0.2], vec![1.1, 0.3]]).unwrap();
        let w1 = store.get(block.w1).clone();
        let w2 = store.get(block.w2).clone();
        let bias = store.get(block.bias).clone();
        let report = gradcheck::check(&[x, w1, w2, bias], |tape, v| {
            let a = sym_normalize(tape.constant(path3()), false).unwrap();
            let mut h = v[0];
            for _ in 0..2 {
                let inner = a.matmul(h.matmul(v[1])?)?.add_row(v[3])?.relu();
                h = h.add(inner.matmul(v[2])?)?.relu();
            }
            Ok(h.sum())
        })
        .unwrap();
        assert!(report.passes(1e-4), "{report:?}");

        let tape = Tape::new();
        let p = store.bind(&tape);
        let xv = tape
            .param(Tensor::from_rows(&[vec![0.5, 1.5], vec![0.7, -0.2], vec![1.1, 0.3]]).unwrap());
        let a = sym_normalize(tape.constant(path3()), false).unwrap();
        let out = block.forward(&p, xv, a).unwrap();
        let g = tape.backward(out.sum()).unwrap();
        assert_eq!(g.get(xv).unwrap().data(), &[1.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn residual_rejects_wrong_width() {
        let mut store = ParamStore::new();
        let block = ResidualBlock::new(&mut store, "res", 3, 1, &mut rng());
        let tape = Tape::new();
        let p = store.bind(&tape);
        let a = tape.constant(Tensor::zeros(&[2, 2]));
        let h = tape.constant(Tensor::zeros(&[2, 4]));
        assert!(matches!(
            block.forward(&p, h, a),
            Err(GnnError::Width { .. })
        ));
    }

    #[test]
    fn readout_identity_projections_give_column_max() {
        let mut store = ParamStore::new();
        let r = Readout::new(&mut store, "ro", 2, 2, 2, &mut rng());
        *store.get_mut(r.proj1.weight) = Tensor::identity(2);
        *store.get_mut(r.proj2.weight) = Tensor::identity(2);
        let tape = Tape::new();
        let p = store.bind(&tape);
        let h = tape.constant(Tensor::from_rows(&[vec![1.0, 5.0], vec![3.0, 2.0]]).unwrap());
        assert_eq!(r.forward(&p, h).unwrap().value().data(), &[3.0, 5.0]);
    }

    #[test]
    fn readout_single_row_and_duplicates() {
        let mut r = rng();
        let mut store = ParamStore::new();
        let ro = Readout::new(&mut store, "ro", 3, 4, 2, &mut r);
        let x = random_matrix(&mut r, 3, 3);
        let tape = Tape::new();
        let p = store.bind(&tape);
        let base = ro.forward(&p, tape.constant(x.clone())).unwrap().value();
        let mut rows: Vec<Vec<f64>> = x.rows().map(<[f64]>::to_vec).collect();
        rows.push(rows[1].clone());
        let dup = ro
            .forward(&p, tape.constant(Tensor::from_rows(&rows).unwrap()))
            .unwrap()
            .value();
        assert_eq!(base, dup);

        let one = Tensor::from_rows(&[x.row(0).to_vec()]).unwrap();
        let out = ro.forward(&p, tape.constant(one.clone())).unwrap().value();
        let manual = one
            .matmul(store.get(ro.proj1.weight))
            .unwrap()
            .matmul(store.get(ro.proj2.weight))
            .unwrap();
        assert_eq!(out.data(), manual.data());

        let empty = tape.constant(Tensor::zeros(&[0, 3]));
        assert!(ro.forward(&p, empty).is_err());
    }
}
