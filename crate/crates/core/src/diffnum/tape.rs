use std::sync::Arc;

use crate::error::{Error, Result};

use super::tensor::{SparseRows, Tensor, ZERO_NORM};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    RowSoftmax(Var, f64),
    ColSoftmax(Var, f64),
    L2NormalizeRows(Var, Vec<f64>),
    MeanRows(Var, Arc<Vec<Vec<usize>>>),
    GatherRows(Var, Vec<usize>),
    Propagate(Var, Arc<SparseRows>),
    Log(Var),
    Mul(Var, Var),
    Sum(Var),
    TraceProduct(Var, Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::MatMulT(..) => "matmul_t",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::Relu(..) => "relu",
            Op::RowSoftmax(..) => "row_softmax",
            Op::ColSoftmax(..) => "col_softmax",
            Op::L2NormalizeRows(..) => "l2_normalize_rows",
            Op::MeanRows(..) => "mean_rows",
            Op::GatherRows(..) => "gather_rows",
            Op::Propagate(..) => "propagate",
            Op::Log(..) => "log",
            Op::Mul(..) => "mul",
            Op::Sum(..) => "sum",
            Op::TraceProduct(..) => "trace_product",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::MatMulT(a, b)
            | Op::Add(a, b)
            | Op::AddRow(a, b)
            | Op::Mul(a, b)
            | Op::TraceProduct(a, b) => vec![a, b],
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::RowSoftmax(a, _)
            | Op::ColSoftmax(a, _)
            | Op::L2NormalizeRows(a, _)
            | Op::MeanRows(a, _)
            | Op::GatherRows(a, _)
            | Op::Propagate(a, _)
            | Op::Log(a)
            | Op::Sum(a) => vec![a],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run record of tensor operations.
///
/// Nodes are appended in evaluation order, so the tape is topologically
/// sorted by construction. Operations whose inputs are all constants are
/// stored for their value but marked as not requiring grad, and are skipped
/// by [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by the leaf handles.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` if it does not require grad. Leaves the
    /// loss does not depend on get a zero tensor.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    pub fn inputs(&self, v: Var) -> Vec<Var> {
        self.nodes[v.0].op.inputs()
    }

    /// Every handle whose value `v` depends on through gradient-carrying
    /// nodes, including `v` itself.
    pub fn grad_ancestors(&self, v: Var) -> Vec<Var> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![v];
        let mut out = Vec::new();
        while let Some(u) = stack.pop() {
            if seen[u.0] || !self.nodes[u.0].requires_grad {
                continue;
            }
            seen[u.0] = true;
            out.push(u);
            stack.extend(self.nodes[u.0].op.inputs());
        }
        out.sort();
        out
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, value: Tensor, op: Op) -> Var {
        let rg = op.inputs().iter().any(|i| self.nodes[i.0].requires_grad);
        self.push(value, op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).matmul(self.value(b))?;
        Ok(self.record(y, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).matmul_t(self.value(b))?;
        Ok(self.record(y, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).add(self.value(b))?;
        Ok(self.record(y, Op::Add(a, b)))
    }

    /// Adds the `1 x c` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + {:?}", x.shape(), b.shape()),
            ));
        }
        let mut y = x.clone();
        let c = x.cols();
        for row in y.data_mut().chunks_mut(c.max(1)) {
            for (v, bv) in row.iter_mut().zip(b.data()) {
                *v += bv;
            }
        }
        Ok(self.record(y, Op::AddRow(a, bias)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("scale factor {s}")));
        }
        let y = self.value(a).scale(s);
        Ok(self.record(y, Op::Scale(a, s)))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let y = self.value(a).map(|v| v.max(0.0));
        Ok(self.record(y, Op::Relu(a)))
    }

    pub fn row_softmax(&mut self, a: Var, temperature: f64) -> Result<Var> {
        let y = self.value(a).row_softmax(temperature)?;
        Ok(self.record(y, Op::RowSoftmax(a, temperature)))
    }

    pub fn col_softmax(&mut self, a: Var, temperature: f64) -> Result<Var> {
        let y = self.value(a).col_softmax(temperature)?;
        Ok(self.record(y, Op::ColSoftmax(a, temperature)))
    }

    /// Row-wise `x / ‖x‖₂`. Rows with (near-)zero norm map to zero rows with
    /// zero gradient.
    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        let (y, norms) = self.value(a).l2_normalize_rows();
        let zero = norms.iter().filter(|&&n| n <= ZERO_NORM).count();
        if zero > 0 {
            log::debug!("l2_normalize_rows: {zero} zero row(s) mapped to zero");
        }
        Ok(self.record(y, Op::L2NormalizeRows(a, norms)))
    }

    /// One output row per index set: the mean of those rows of `a`.
    pub fn mean_rows(&mut self, a: Var, groups: Arc<Vec<Vec<usize>>>) -> Result<Var> {
        let y = self.value(a).mean_rows(&groups)?;
        Ok(self.record(y, Op::MeanRows(a, groups)))
    }

    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Result<Var> {
        let y = self.value(a).gather_rows(&idx)?;
        Ok(self.record(y, Op::GatherRows(a, idx)))
    }

    /// Left-multiplication by a constant sparse matrix.
    pub fn propagate(&mut self, a: Var, op: Arc<SparseRows>) -> Result<Var> {
        let y = op.apply(self.value(a))?;
        Ok(self.record(y, Op::Propagate(a, op)))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if let Some(v) = x.data().iter().find(|&&v| v <= 0.0) {
            return Err(Error::NonFinite(format!("log of non-positive value {v}")));
        }
        let y = x.map(f64::ln);
        Ok(self.record(y, Op::Log(a)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).mul(self.value(b))?;
        Ok(self.record(y, Op::Mul(a, b)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let y = Tensor::scalar(self.value(a).sum());
        Ok(self.record(y, Op::Sum(a)))
    }

    /// Scalar `Σ a ∘ b`.
    pub fn trace_product(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = Tensor::scalar(self.value(a).trace_product(self.value(b))?);
        Ok(self.record(y, Op::TraceProduct(a, b)))
    }

    /// Reverse sweep from the scalar `loss`. Returns gradients for every
    /// trainable leaf and clears the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        let node = self.nodes.get(loss.0).ok_or(Error::Detached)?;
        if node.value.shape() != [1, 1] {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", node.value.shape()),
            ));
        }
        if !node.requires_grad {
            return Err(Error::Detached);
        }

        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            for (input, gi) in self.local_grads(i, &g) {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(gi.data()) {
                            *a += b;
                        }
                    }
                    slot @ None => *slot = Some(gi),
                }
            }
        }

        let mut out = vec![None; n];
        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.requires_grad {
                let [r, c] = node.value.shape();
                out[i] = Some(grads[i].take().unwrap_or_else(|| Tensor::zeros(r, c)));
            }
        }
        self.nodes.clear();
        Ok(Gradients { grads: out })
    }

    /// Vector-Jacobian products of node `i` with upstream gradient `g`.
    fn local_grads(&self, i: usize, g: &Tensor) -> Vec<(Var, Tensor)> {
        let node = &self.nodes[i];
        let y = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let mut out = Vec::new();
                if needs(*a) {
                    out.push((*a, g.matmul_t(val(*b)).expect("shapes checked forward")));
                }
                if needs(*b) {
                    out.push((*b, val(*a).transpose().matmul(g).expect("shapes checked forward")));
                }
                out
            }
            Op::MatMulT(a, b) => {
                let mut out = Vec::new();
                if needs(*a) {
                    out.push((*a, g.matmul(val(*b)).expect("shapes checked forward")));
                }
                if needs(*b) {
                    out.push((*b, g.transpose().matmul(val(*a)).expect("shapes checked forward")));
                }
                out
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::AddRow(a, bias) => {
                let c = g.cols();
                let mut gb = vec![0.0; c];
                for row in g.data().chunks(c.max(1)) {
                    for (acc, v) in gb.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                vec![(*a, g.clone()), (*bias, Tensor::from_raw(1, c, gb))]
            }
            Op::Scale(a, s) => vec![(*a, g.scale(*s))],
            Op::Relu(a) => {
                let x = val(*a);
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                    .collect();
                vec![(*a, Tensor::from_raw(x.rows(), x.cols(), data))]
            }
            Op::RowSoftmax(a, t) => {
                let c = y.cols();
                let mut out = vec![0.0; y.data().len()];
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        out[r * c + j] = yr[j] * (gr[j] - dot) / t;
                    }
                }
                vec![(*a, Tensor::from_raw(y.rows(), c, out))]
            }
            Op::ColSoftmax(a, t) => {
                let (rows, c) = (y.rows(), y.cols());
                let mut out = vec![0.0; y.data().len()];
                for j in 0..c {
                    let dot: f64 = (0..rows).map(|r| y.get(r, j) * g.get(r, j)).sum();
                    for r in 0..rows {
                        out[r * c + j] = y.get(r, j) * (g.get(r, j) - dot) / t;
                    }
                }
                vec![(*a, Tensor::from_raw(rows, c, out))]
            }
            Op::L2NormalizeRows(a, norms) => {
                let c = y.cols();
                let mut out = vec![0.0; y.data().len()];
                for (r, &norm) in norms.iter().enumerate() {
                    if norm <= ZERO_NORM {
                        continue;
                    }
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        out[r * c + j] = (gr[j] - yr[j] * dot) / norm;
                    }
                }
                vec![(*a, Tensor::from_raw(y.rows(), c, out))]
            }
            Op::MeanRows(a, groups) => {
                let x = val(*a);
                let c = x.cols();
                let mut out = vec![0.0; x.data().len()];
                for (gi, idx) in groups.iter().enumerate() {
                    let inv = 1.0 / idx.len() as f64;
                    let grow = g.row(gi);
                    for &r in idx {
                        for (o, v) in out[r * c..(r + 1) * c].iter_mut().zip(grow) {
                            *o += v * inv;
                        }
                    }
                }
                vec![(*a, Tensor::from_raw(x.rows(), c, out))]
            }
            Op::GatherRows(a, idx) => {
                let x = val(*a);
                let c = x.cols();
                let mut out = vec![0.0; x.data().len()];
                for (k, &r) in idx.iter().enumerate() {
                    for (o, v) in out[r * c..(r + 1) * c].iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                vec![(*a, Tensor::from_raw(x.rows(), c, out))]
            }
            Op::Propagate(a, op) => vec![(*a, op.apply_transpose(g))],
            Op::Log(a) => {
                let x = val(*a);
                vec![(*a, g_div(g, x))]
            }
            Op::Mul(a, b) => vec![
                (*a, g.mul(val(*b)).expect("same shape")),
                (*b, g.mul(val(*a)).expect("same shape")),
            ],
            Op::Sum(a) => {
                let [r, c] = val(*a).shape();
                vec![(*a, Tensor::full(r, c, g.item()))]
            }
            Op::TraceProduct(a, b) => {
                let s = g.item();
                vec![(*a, val(*b).scale(s)), (*b, val(*a).scale(s))]
            }
        }
    }
}

fn g_div(g: &Tensor, x: &Tensor) -> Tensor {
    Tensor::from_raw(
        g.rows(),
        g.cols(),
        g.data().iter().zip(x.data()).map(|(a, b)| a / b).collect(),
    )
}
