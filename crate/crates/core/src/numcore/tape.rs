use std::cell::RefCell;
use std::rc::Rc;

use super::tensor::{matmul_a_bt, matmul_at_b};
use super::{Tensor, TensorError};

/// Recorded operation. Inputs are tape ids, which always precede the output id.
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Tanh(usize),
    Rsqrt(usize),
    Softmax(usize),
    MaxPoolRows { input: usize, argmax: Vec<usize> },
    Concat(usize, usize),
    AppendRow(usize, usize),
    SliceRows { input: usize, start: usize },
    Reshape(usize),
    SumRows(usize),
    Sum(usize),
    Outer(usize, usize),
    Border(usize, usize),
    AddIdentity(usize),
    MseLoss(usize, usize),
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run gradient tape.
///
/// A tape is built fresh for every forward pass and is confined to the thread
/// that created it. Independent tapes can run on separate threads.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by tape id.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, or `None` when `var` does not
    /// require a gradient or the loss does not depend on it.
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Like [`Gradients::get`] but yields zeros for unreached inputs.
    pub fn get_or_zeros(&self, var: Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&var.shape()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    /// Records a leaf that receives a gradient on [`Tape::backward`].
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Reverse sweep from a scalar `loss`. Gradients accumulate additively when a
    /// value feeds several operations.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, TensorError> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if !root.value.is_scalar() {
            return Err(TensorError::NotScalar {
                shape: root.value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                grads[id] = None;
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            propagate(&nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(nodes.iter())
            .map(|(g, node)| {
                g.map(|data| Tensor::new(node.value.shape().to_vec(), data).expect("grad shape"))
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: usize, delta: Vec<f64>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(delta) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

fn propagate(nodes: &[Node], id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let out = &nodes[id].value;
    let val = |i: usize| -> &Tensor { &nodes[i].value };
    let needs = |i: usize| nodes[i].requires_grad;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = val(*a).dims2().expect("matmul lhs");
            let n = val(*b).shape()[1];
            if needs(*a) {
                accumulate(grads, nodes, *a, matmul_a_bt(g, val(*b).data(), m, n, k));
            }
            if needs(*b) {
                accumulate(grads, nodes, *b, matmul_at_b(val(*a).data(), g, m, k, n));
            }
        }
        Op::Add(a, b) => {
            accumulate(grads, nodes, *a, g.to_vec());
            accumulate(grads, nodes, *b, g.to_vec());
        }
        Op::AddRow(a, b) => {
            accumulate(grads, nodes, *a, g.to_vec());
            if needs(*b) {
                let cols = val(*b).len();
                let mut db = vec![0.0; cols];
                for row in g.chunks(cols) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                accumulate(grads, nodes, *b, db);
            }
        }
        Op::Mul(a, b) => {
            if needs(*a) {
                let d = g.iter().zip(val(*b).data()).map(|(g, y)| g * y).collect();
                accumulate(grads, nodes, *a, d);
            }
            if needs(*b) {
                let d = g.iter().zip(val(*a).data()).map(|(g, x)| g * x).collect();
                accumulate(grads, nodes, *b, d);
            }
        }
        Op::Scale(a, c) => {
            accumulate(grads, nodes, *a, g.iter().map(|v| v * c).collect());
        }
        Op::Relu(a) => {
            // Subgradient at exactly zero is zero.
            let d = g
                .iter()
                .zip(val(*a).data())
                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                .collect();
            accumulate(grads, nodes, *a, d);
        }
        Op::Tanh(a) => {
            let d = g
                .iter()
                .zip(out.data())
                .map(|(g, y)| g * (1.0 - y * y))
                .collect();
            accumulate(grads, nodes, *a, d);
        }
        Op::Rsqrt(a) => {
            let d = g
                .iter()
                .zip(out.data())
                .map(|(g, y)| -0.5 * g * y * y * y)
                .collect();
            accumulate(grads, nodes, *a, d);
        }
        Op::Softmax(a) => {
            let y = out.data();
            let dot: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
            let d = g.iter().zip(y).map(|(g, y)| y * (g - dot)).collect();
            accumulate(grads, nodes, *a, d);
        }
        Op::MaxPoolRows { input, argmax } => {
            let cols = argmax.len();
            let mut d = vec![0.0; val(*input).len()];
            for (c, &r) in argmax.iter().enumerate() {
                d[r * cols + c] = g[c];
            }
            accumulate(grads, nodes, *input, d);
        }
        Op::Concat(a, b) => {
            let split = val(*a).len();
            accumulate(grads, nodes, *a, g[..split].to_vec());
            accumulate(grads, nodes, *b, g[split..].to_vec());
        }
        Op::AppendRow(a, b) => {
            let split = val(*a).len();
            accumulate(grads, nodes, *a, g[..split].to_vec());
            accumulate(grads, nodes, *b, g[split..].to_vec());
        }
        Op::SliceRows { input, start } => {
            let src = val(*input);
            let cols = src.shape()[1];
            let mut d = vec![0.0; src.len()];
            d[start * cols..start * cols + g.len()].copy_from_slice(g);
            accumulate(grads, nodes, *input, d);
        }
        Op::Reshape(a) => accumulate(grads, nodes, *a, g.to_vec()),
        Op::SumRows(a) => {
            let cols = val(*a).shape()[1];
            let d = g
                .iter()
                .flat_map(|&gi| std::iter::repeat_n(gi, cols))
                .collect();
            accumulate(grads, nodes, *a, d);
        }
        Op::Sum(a) => accumulate(grads, nodes, *a, vec![g[0]; val(*a).len()]),
        Op::Outer(a, b) => {
            let av = val(*a).data();
            let bv = val(*b).data();
            let m = bv.len();
            if needs(*a) {
                let d = g
                    .chunks(m)
                    .map(|row| row.iter().zip(bv).map(|(g, y)| g * y).sum())
                    .collect();
                accumulate(grads, nodes, *a, d);
            }
            if needs(*b) {
                let mut d = vec![0.0; m];
                for (row, &x) in g.chunks(m).zip(av) {
                    for (dj, gj) in d.iter_mut().zip(row) {
                        *dj += gj * x;
                    }
                }
                accumulate(grads, nodes, *b, d);
            }
        }
        Op::Border(a, b) => {
            let l = val(*b).len();
            let n = l + 1;
            if needs(*a) {
                let mut d = Vec::with_capacity(l * l);
                for i in 0..l {
                    d.extend_from_slice(&g[i * n..i * n + l]);
                }
                accumulate(grads, nodes, *a, d);
            }
            if needs(*b) {
                let d = (0..l).map(|i| g[i * n + l] + g[l * n + i]).collect();
                accumulate(grads, nodes, *b, d);
            }
        }
        Op::AddIdentity(a) => accumulate(grads, nodes, *a, g.to_vec()),
        Op::MseLoss(p, y) => {
            let pv = val(*p).data();
            let yv = val(*y).data();
            let scale = 2.0 * g[0] / pv.len() as f64;
            let dp: Vec<f64> = pv.iter().zip(yv).map(|(p, y)| scale * (p - y)).collect();
            if needs(*y) {
                accumulate(grads, nodes, *y, dp.iter().map(|v| -v).collect());
            }
            accumulate(grads, nodes, *p, dp);
        }
    }
}

fn shape_err(op: &'static str, lhs: &Tensor, rhs: &Tensor) -> TensorError {
    TensorError::Shape {
        op,
        lhs: lhs.shape().to_vec(),
        rhs: rhs.shape().to_vec(),
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    fn unary(&self, value: Tensor, op: Op) -> Var<'t> {
        self.tape.push(value, op, self.requires_grad())
    }

    fn binary(&self, other: Var<'t>, value: Tensor, op: Op) -> Var<'t> {
        let rg = self.requires_grad() || other.requires_grad();
        self.tape.push(value, op, rg)
    }

    /// Matrix product. Backward: `dA = dC·Bᵀ`, `dB = Aᵀ·dC`.
    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let out = self.value().matmul(&other.value())?;
        Ok(self.binary(other, out, Op::MatMul(self.id, other.id)))
    }

    /// Row vector times matrix: `[k] · [k×n] -> [n]`.
    pub fn vecmat(&self, matrix: Var<'t>) -> Result<Var<'t>, TensorError> {
        let k = self.value().len();
        self.reshape(&[1, k])?
            .matmul(matrix)?
            .reshape(&[matrix.shape()[1]])
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(shape_err("add", &a, &b));
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        Ok(self.binary(other, out, Op::Add(self.id, other.id)))
    }

    /// Adds a bias vector to every row of a matrix (or to a vector of equal length).
    pub fn add_row(&self, bias: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.value(), bias.value());
        let cols = *a.shape().last().unwrap_or(&0);
        if b.rank() != 1 || b.len() != cols || a.rank() == 0 {
            return Err(shape_err("add_row", &a, &b));
        }
        let data = a
            .data()
            .chunks(cols.max(1))
            .flat_map(|row| row.iter().zip(b.data()).map(|(x, y)| x + y))
            .collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        Ok(self.binary(bias, out, Op::AddRow(self.id, bias.id)))
    }

    /// Elementwise product.
    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(shape_err("mul", &a, &b));
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        Ok(self.binary(other, out, Op::Mul(self.id, other.id)))
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        let a = self.value();
        let out = Tensor::new(a.shape().to_vec(), a.data().iter().map(|x| x * c).collect())
            .expect("same shape");
        self.unary(out, Op::Scale(self.id, c))
    }

    /// Elementwise `max(x, 0)`.
    pub fn relu(&self) -> Var<'t> {
        let a = self.value();
        let out = Tensor::new(
            a.shape().to_vec(),
            a.data().iter().map(|x| x.max(0.0)).collect(),
        )
        .expect("same shape");
        self.unary(out, Op::Relu(self.id))
    }

    pub fn tanh(&self) -> Var<'t> {
        let a = self.value();
        let out = Tensor::new(
            a.shape().to_vec(),
            a.data().iter().map(|x| x.tanh()).collect(),
        )
        .expect("same shape");
        self.unary(out, Op::Tanh(self.id))
    }

    /// Elementwise `x^(-1/2)`; every entry must be strictly positive.
    pub fn rsqrt(&self) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        if let Some(&bad) = a.data().iter().find(|&&x| x <= 0.0 || !x.is_finite()) {
            return Err(TensorError::Domain {
                op: "rsqrt",
                value: bad,
            });
        }
        let out = Tensor::new(
            a.shape().to_vec(),
            a.data().iter().map(|x| x.sqrt().recip()).collect(),
        )?;
        Ok(self.unary(out, Op::Rsqrt(self.id)))
    }

    /// Max-subtracted softmax over a non-empty vector.
    pub fn softmax(&self) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        if a.rank() != 1 || a.is_empty() {
            return Err(TensorError::Rank {
                expected: 1,
                shape: a.shape().to_vec(),
            });
        }
        let max = a.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = a.data().iter().map(|x| (x - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let out = Tensor::vector(exps.into_iter().map(|e| e / total).collect());
        Ok(self.unary(out, Op::Softmax(self.id)))
    }

    /// Columnwise maximum of an `n×h` matrix. Ties go to the lowest row index,
    /// which is also the only row that receives gradient.
    pub fn max_pool_rows(&self) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let (n, h) = a.dims2()?;
        if n == 0 {
            return Err(TensorError::EmptyGraph);
        }
        let mut best = a.row(0).to_vec();
        let mut argmax = vec![0usize; h];
        for r in 1..n {
            for (c, &v) in a.row(r).iter().enumerate() {
                if v > best[c] {
                    best[c] = v;
                    argmax[c] = r;
                }
            }
        }
        Ok(self.unary(
            Tensor::vector(best),
            Op::MaxPoolRows {
                input: self.id,
                argmax,
            },
        ))
    }

    /// Concatenation of two vectors.
    pub fn concat(&self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.rank() != 1 || b.rank() != 1 {
            return Err(shape_err("concat", &a, &b));
        }
        let mut data = a.data().to_vec();
        data.extend_from_slice(b.data());
        Ok(self.binary(other, Tensor::vector(data), Op::Concat(self.id, other.id)))
    }

    /// Stacks `row` (length `h`) under an `n×h` matrix.
    pub fn append_row(&self, row: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.value(), row.value());
        let (n, h) = a.dims2()?;
        if b.rank() != 1 || b.len() != h {
            return Err(shape_err("append_row", &a, &b));
        }
        let mut data = a.data().to_vec();
        data.extend_from_slice(b.data());
        let out = Tensor::new(vec![n + 1, h], data)?;
        Ok(self.binary(row, out, Op::AppendRow(self.id, row.id)))
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let (n, h) = a.dims2()?;
        if start > end || end > n {
            return Err(TensorError::RowRange {
                start,
                end,
                rows: n,
            });
        }
        let out = Tensor::new(vec![end - start, h], a.data()[start * h..end * h].to_vec())?;
        Ok(self.unary(
            out,
            Op::SliceRows {
                input: self.id,
                start,
            },
        ))
    }

    /// Single matrix row as a vector.
    pub fn row(&self, index: usize) -> Result<Var<'t>, TensorError> {
        let h = self.value().dims2()?.1;
        self.slice_rows(index, index + 1)?.reshape(&[h])
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>, TensorError> {
        let out = self.value().reshaped(shape)?;
        Ok(self.unary(out, Op::Reshape(self.id)))
    }

    /// Row sums of a matrix: `[n×m] -> [n]`.
    pub fn sum_rows(&self) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let (_, m) = a.dims2()?;
        let data = a.data().chunks(m.max(1)).map(|r| r.iter().sum()).collect();
        Ok(self.unary(Tensor::vector(data), Op::SumRows(self.id)))
    }

    /// Sum of all entries as a scalar.
    pub fn sum(&self) -> Var<'t> {
        let total = self.value().data().iter().sum();
        self.unary(Tensor::scalar(total), Op::Sum(self.id))
    }

    /// Outer product of two vectors.
    pub fn outer(&self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, b) = (self.value(), other.value());
        if a.rank() != 1 || b.rank() != 1 {
            return Err(shape_err("outer", &a, &b));
        }
        let data = a
            .data()
            .iter()
            .flat_map(|x| b.data().iter().map(move |y| x * y))
            .collect();
        let out = Tensor::new(vec![a.len(), b.len()], data)?;
        Ok(self.binary(other, out, Op::Outer(self.id, other.id)))
    }

    /// Borders an `L×L` matrix with `weights` as an extra last row and column,
    /// giving an `(L+1)×(L+1)` matrix with a zero corner.
    pub fn border(&self, weights: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (a, w) = (self.value(), weights.value());
        let (l, c) = a.dims2()?;
        if l != c || w.rank() != 1 || w.len() != l {
            return Err(shape_err("border", &a, &w));
        }
        let n = l + 1;
        let mut data = vec![0.0; n * n];
        for i in 0..l {
            data[i * n..i * n + l].copy_from_slice(a.row(i));
            data[i * n + l] = w.data()[i];
            data[l * n + i] = w.data()[i];
        }
        let out = Tensor::new(vec![n, n], data)?;
        Ok(self.binary(weights, out, Op::Border(self.id, weights.id)))
    }

    /// `A + I` for a square matrix.
    pub fn add_identity(&self) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let (n, c) = a.dims2()?;
        if n != c {
            return Err(TensorError::NotSquare {
                shape: a.shape().to_vec(),
            });
        }
        let mut data = a.data().to_vec();
        for i in 0..n {
            data[i * n + i] += 1.0;
        }
        let out = Tensor::new(vec![n, n], data)?;
        Ok(self.unary(out, Op::AddIdentity(self.id)))
    }

    /// Mean squared error against `target` as a scalar.
    pub fn mse_loss(&self, target: Var<'t>) -> Result<Var<'t>, TensorError> {
        let (p, y) = (self.value(), target.value());
        if p.len() != y.len() || p.is_empty() {
            return Err(shape_err("mse_loss", &p, &y));
        }
        let total: f64 = p
            .data()
            .iter()
            .zip(y.data())
            .map(|(p, y)| (p - y) * (p - y))
            .sum();
        let out = Tensor::scalar(total / p.len() as f64);
        Ok(self.binary(target, out, Op::MseLoss(self.id, target.id)))
    }
}
