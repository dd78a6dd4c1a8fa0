//! Reverse-mode automatic differentiation over 2D tensors.
//!
//! A `Tape` records every op with its parents. Values are checked for
//! non-finite entries after each op; the first offender poisons the tape
//! and `backward` reports it by op name.

use std::sync::Arc;

use super::params::{ParamId, ParamStore};
use super::tensor::{gemm_acc, Tensor};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    Ssp(Var),
    Sigmoid(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Log(Var),
    LogSoftmaxRows(Var),
    SoftmaxRows(Var),
    GatherRows(Var, Arc<[usize]>),
    ScatterAddRows(Var, Arc<[usize]>),
    SegmentSoftmax(Var, Arc<[usize]>, usize),
    Sum(Var),
    SumRows(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    DotConst(Var, Tensor),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::MulCol(..) => "mul_col",
            Op::Scale(..) => "scale",
            Op::Ssp(_) => "shifted_softplus",
            Op::Sigmoid(_) => "sigmoid",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::LogSoftmaxRows(_) => "log_softmax",
            Op::SoftmaxRows(_) => "softmax",
            Op::GatherRows(..) => "gather_rows",
            Op::ScatterAddRows(..) => "scatter_add_rows",
            Op::SegmentSoftmax(..) => "segment_softmax",
            Op::Sum(_) => "sum",
            Op::SumRows(_) => "sum_rows",
            Op::ConcatCols(_) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
            Op::DotConst(..) => "dot_const",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Per-parameter gradients produced by `Tape::backward`.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Adds `scale` times `other` into self, slot by slot.
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        if self.grads.len() < other.grads.len() {
            self.grads.resize(other.grads.len(), None);
        }
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(t) = theirs {
                let slot = mine.get_or_insert_with(|| Tensor::zeros(t.rows, t.cols));
                for (a, b) in slot.data.iter_mut().zip(&t.data) {
                    *a += scale * b;
                }
            }
        }
    }

    pub fn empty(n: usize) -> Self {
        Self { grads: vec![None; n] }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.grads.iter_mut().flatten() {
            for v in &mut t.data {
                *v *= s;
            }
        }
    }
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    param_vars: Vec<Option<Var>>,
    nodes: Vec<Node>,
    poisoned: Option<&'static str>,
}

fn ssp(x: f64) -> f64 {
    // ln(0.5 e^x + 0.5) = softplus(x) - ln 2
    x.max(0.0) + (-x.abs()).exp().ln_1p() - std::f64::consts::LN_2
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            param_vars: vec![None; params.len()],
            nodes: Vec::new(),
            poisoned: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    /// Name of the first op that produced a non-finite value, if any.
    pub fn poisoned(&self) -> Option<&'static str> {
        self.poisoned
    }

    pub fn check(&self) -> Result<(), NnError> {
        match self.poisoned {
            Some(op) => Err(NnError::NonFinite { op: op.to_string() }),
            None => Ok(()),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        if self.poisoned.is_none() && !value.is_finite() {
            self.poisoned = Some(op.name());
        }
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::Param(_) => true,
            _ => self.parents(&op).iter().any(|p| self.nodes[p.0].needs_grad),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn parents(&self, op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf | Op::Param(_) => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MulCol(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _)
            | Op::Ssp(a)
            | Op::Sigmoid(a)
            | Op::LeakyRelu(a, _)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::LogSoftmaxRows(a)
            | Op::SoftmaxRows(a)
            | Op::GatherRows(a, _)
            | Op::ScatterAddRows(a, _)
            | Op::SegmentSoftmax(a, _, _)
            | Op::Sum(a)
            | Op::SumRows(a)
            | Op::SliceCols(a, _)
            | Op::DotConst(a, _) => vec![*a],
            Op::ConcatCols(vs) => vs.clone(),
        }
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows, t.cols)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// The tape variable for a stored parameter; created once per tape.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(self.params.get(id).clone(), Op::Param(id));
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul {m}x{k} by {k2}x{n}");
        let mut out = Tensor::zeros(m, n);
        gemm_acc(m, k, n, &self.value(a).data, false, &self.value(b).data, false, &mut out.data, 1.0);
        self.push(out, Op::MatMul(a, b))
    }

    fn zip_same(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "{} shape mismatch", op.name());
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data.iter().zip(&vb.data).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::from_vec(va.rows, va.cols, data);
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_same(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_same(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_same(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a 1×c row to every row of an n×c tensor.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (n, c) = self.shape(a);
        assert_eq!(self.shape(row), (1, c), "add_row expects a 1x{c} row");
        let mut out = self.value(a).clone();
        let r = &self.value(row).data;
        for i in 0..n {
            for (o, b) in out.row_mut(i).iter_mut().zip(r) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    /// Multiplies every row i of an n×c tensor by the scalar col[i].
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (n, _) = self.shape(a);
        assert_eq!(self.shape(col), (n, 1), "mul_col expects an {n}x1 column");
        let mut out = self.value(a).clone();
        let w = &self.value(col).data;
        for (i, &wi) in w.iter().enumerate() {
            for o in out.row_mut(i) {
                *o *= wi;
            }
        }
        self.push(out, Op::MulCol(a, col))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    /// Shifted softplus ln(0.5 eˣ + 0.5).
    pub fn ssp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(ssp);
        self.push(out, Op::Ssp(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Log(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for i in 0..out.rows {
            let row = out.row_mut(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            for x in row {
                *x -= lse;
            }
        }
        self.push(out, Op::LogSoftmaxRows(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for i in 0..out.rows {
            let row = out.row_mut(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                s += *x;
            }
            for x in row {
                *x /= s;
            }
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    /// out[r] = a[idx[r]].
    pub fn gather_rows(&mut self, a: Var, idx: Arc<[usize]>) -> Var {
        let src = self.value(a);
        let mut out = Tensor::zeros(idx.len(), src.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(src.row(i));
        }
        self.push(out, Op::GatherRows(a, idx))
    }

    /// out[idx[r]] += a[r], with `n` output rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: Arc<[usize]>, n: usize) -> Var {
        let src = self.value(a);
        assert_eq!(src.rows, idx.len(), "scatter index length");
        let mut out = Tensor::zeros(n, src.cols);
        for (r, &i) in idx.iter().enumerate() {
            for (o, v) in out.row_mut(i).iter_mut().zip(src.row(r)) {
                *o += v;
            }
        }
        self.push(out, Op::ScatterAddRows(a, idx))
    }

    /// Column-wise softmax within groups of rows sharing a segment id.
    pub fn segment_softmax(&mut self, a: Var, seg: Arc<[usize]>, n_seg: usize) -> Var {
        let src = self.value(a);
        assert_eq!(src.rows, seg.len(), "segment index length");
        let c = src.cols;
        let mut max = Tensor::filled(n_seg, c, f64::NEG_INFINITY);
        for (r, &s) in seg.iter().enumerate() {
            for (m, &v) in max.row_mut(s).iter_mut().zip(src.row(r)) {
                *m = m.max(v);
            }
        }
        let mut out = Tensor::zeros(src.rows, c);
        let mut sum = Tensor::zeros(n_seg, c);
        for (r, &s) in seg.iter().enumerate() {
            for k in 0..c {
                let e = (src.get(r, k) - max.get(s, k)).exp();
                out.set(r, k, e);
                sum.data[s * c + k] += e;
            }
        }
        for (r, &s) in seg.iter().enumerate() {
            for k in 0..c {
                out.data[r * c + k] /= sum.get(s, k);
            }
        }
        self.push(out, Op::SegmentSoftmax(a, seg, n_seg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Column sums as a 1×c row.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let mut out = Tensor::zeros(1, src.cols);
        for i in 0..src.rows {
            for (o, v) in out.data.iter_mut().zip(src.row(i)) {
                *o += v;
            }
        }
        self.push(out, Op::SumRows(a))
    }

    pub fn concat_cols(&mut self, vars: &[Var]) -> Var {
        assert!(!vars.is_empty(), "concat of nothing");
        let rows = self.shape(vars[0]).0;
        let cols: usize = vars.iter().map(|&v| self.shape(v).1).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut off = 0;
        for &v in vars {
            let t = self.value(v);
            assert_eq!(t.rows, rows, "concat_cols row mismatch");
            for i in 0..rows {
                out.row_mut(i)[off..off + t.cols].copy_from_slice(t.row(i));
            }
            off += t.cols;
        }
        self.push(out, Op::ConcatCols(vars.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Var {
        let src = self.value(a);
        assert!(start + width <= src.cols, "slice_cols out of range");
        let mut out = Tensor::zeros(src.rows, width);
        for i in 0..src.rows {
            out.row_mut(i).copy_from_slice(&src.row(i)[start..start + width]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    /// Σ a ⊙ w for a constant weight tensor, as a 1×1 result.
    pub fn dot_const(&mut self, a: Var, w: Tensor) -> Var {
        let src = self.value(a);
        assert_eq!((src.rows, src.cols), (w.rows, w.cols), "dot_const shape mismatch");
        let s = src.data.iter().zip(&w.data).map(|(x, y)| x * y).sum();
        self.push(Tensor::scalar(s), Op::DotConst(a, w))
    }

    /// Runs the reverse pass from a 1×1 loss and consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients, NnError> {
        self.check()?;
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(NnError::Shape(format!("loss must be 1x1, got {r}x{c}")));
        }
        let mut out = Gradients::empty(self.params.len());
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        let mut writer: Vec<&'static str> = vec!["loss"; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if !g.is_finite() {
                return Err(NnError::NanGradient { op: writer[i].to_string() });
            }
            self.backprop_node(node, &g, &mut grads, &mut writer, &mut out);
        }
        Ok(out)
    }

    fn backprop_node(
        &self,
        node: &Node,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
        writer: &mut [&'static str],
        out: &mut Gradients,
    ) {
        let val = |v: Var| &self.nodes[v.0].value;
        let name = node.op.name();
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut Tensor)| {
            let n = &self.nodes[v.0];
            if !n.needs_grad {
                return;
            }
            writer[v.0] = name;
            let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(n.value.rows, n.value.cols));
            f(slot);
        };
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => out.grads[id.0] = Some(g.clone()),
            Op::MatMul(a, b) => {
                let (m, k) = (val(*a).rows, val(*a).cols);
                let n = val(*b).cols;
                acc(*a, &mut |ga| gemm_acc(m, n, k, &g.data, false, &val(*b).data, true, &mut ga.data, 1.0));
                acc(*b, &mut |gb| gemm_acc(k, m, n, &val(*a).data, true, &g.data, false, &mut gb.data, 1.0));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| ga.add_assign(g));
                acc(*b, &mut |gb| gb.add_assign(g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| ga.add_assign(g));
                acc(*b, &mut |gb| {
                    for (o, v) in gb.data.iter_mut().zip(&g.data) {
                        *o -= v;
                    }
                });
            }
            Op::AddRow(a, b) => {
                acc(*a, &mut |ga| ga.add_assign(g));
                acc(*b, &mut |gb| {
                    for i in 0..g.rows {
                        for (o, v) in gb.data.iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                });
            }
            Op::Mul(a, b) => {
                acc(*a, &mut |ga| {
                    for ((o, gv), bv) in ga.data.iter_mut().zip(&g.data).zip(&val(*b).data) {
                        *o += gv * bv;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((o, gv), av) in gb.data.iter_mut().zip(&g.data).zip(&val(*a).data) {
                        *o += gv * av;
                    }
                });
            }
            Op::MulCol(a, col) => {
                let c = g.cols;
                acc(*a, &mut |ga| {
                    for (i, &w) in val(*col).data.iter().enumerate() {
                        for k in 0..c {
                            ga.data[i * c + k] += g.data[i * c + k] * w;
                        }
                    }
                });
                acc(*col, &mut |gc| {
                    let av = val(*a);
                    for i in 0..g.rows {
                        gc.data[i] += g.row(i).iter().zip(av.row(i)).map(|(x, y)| x * y).sum::<f64>();
                    }
                });
            }
            Op::Scale(a, s) => acc(*a, &mut |ga| {
                for (o, v) in ga.data.iter_mut().zip(&g.data) {
                    *o += s * v;
                }
            }),
            Op::Ssp(a) => acc(*a, &mut |ga| {
                for ((o, gv), x) in ga.data.iter_mut().zip(&g.data).zip(&val(*a).data) {
                    *o += gv * sigmoid(*x);
                }
            }),
            Op::Sigmoid(a) => acc(*a, &mut |ga| {
                for ((o, gv), s) in ga.data.iter_mut().zip(&g.data).zip(&y.data) {
                    *o += gv * s * (1.0 - s);
                }
            }),
            Op::LeakyRelu(a, slope) => acc(*a, &mut |ga| {
                for ((o, gv), x) in ga.data.iter_mut().zip(&g.data).zip(&val(*a).data) {
                    *o += if *x > 0.0 { *gv } else { slope * gv };
                }
            }),
            Op::Exp(a) => acc(*a, &mut |ga| {
                for ((o, gv), e) in ga.data.iter_mut().zip(&g.data).zip(&y.data) {
                    *o += gv * e;
                }
            }),
            Op::Log(a) => acc(*a, &mut |ga| {
                for ((o, gv), x) in ga.data.iter_mut().zip(&g.data).zip(&val(*a).data) {
                    *o += gv / x;
                }
            }),
            Op::LogSoftmaxRows(a) => acc(*a, &mut |ga| {
                for i in 0..g.rows {
                    let gs: f64 = g.row(i).iter().sum();
                    let yr = y.row(i);
                    let gr = g.row(i);
                    for (k, o) in ga.row_mut(i).iter_mut().enumerate() {
                        *o += gr[k] - yr[k].exp() * gs;
                    }
                }
            }),
            Op::SoftmaxRows(a) => acc(*a, &mut |ga| {
                for i in 0..g.rows {
                    let yr = y.row(i);
                    let gr = g.row(i);
                    let dot: f64 = gr.iter().zip(yr).map(|(x, s)| x * s).sum();
                    for (k, o) in ga.row_mut(i).iter_mut().enumerate() {
                        *o += yr[k] * (gr[k] - dot);
                    }
                }
            }),
            Op::GatherRows(a, idx) => acc(*a, &mut |ga| {
                for (r, &i) in idx.iter().enumerate() {
                    for (o, v) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
            }),
            Op::ScatterAddRows(a, idx) => acc(*a, &mut |ga| {
                for (r, &i) in idx.iter().enumerate() {
                    for (o, v) in ga.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
            }),
            Op::SegmentSoftmax(a, seg, n_seg) => acc(*a, &mut |ga| {
                let c = g.cols;
                let mut dot = vec![0.0; n_seg * c];
                for (r, &s) in seg.iter().enumerate() {
                    for k in 0..c {
                        dot[s * c + k] += g.get(r, k) * y.get(r, k);
                    }
                }
                for (r, &s) in seg.iter().enumerate() {
                    for k in 0..c {
                        ga.data[r * c + k] += y.get(r, k) * (g.get(r, k) - dot[s * c + k]);
                    }
                }
            }),
            Op::Sum(a) => {
                let s = g.item();
                acc(*a, &mut |ga| ga.data.iter_mut().for_each(|o| *o += s));
            }
            Op::SumRows(a) => acc(*a, &mut |ga| {
                for i in 0..ga.rows {
                    for (o, v) in ga.row_mut(i).iter_mut().zip(&g.data) {
                        *o += v;
                    }
                }
            }),
            Op::ConcatCols(vs) => {
                let mut off = 0;
                for &v in vs {
                    let w = val(v).cols;
                    acc(v, &mut |gv| {
                        for i in 0..g.rows {
                            for (o, x) in gv.row_mut(i).iter_mut().zip(&g.row(i)[off..off + w]) {
                                *o += x;
                            }
                        }
                    });
                    off += w;
                }
            }
            Op::SliceCols(a, start) => acc(*a, &mut |ga| {
                for i in 0..g.rows {
                    for (o, x) in ga.row_mut(i)[*start..*start + g.cols].iter_mut().zip(g.row(i)) {
                        *o += x;
                    }
                }
            }),
            Op::DotConst(a, w) => {
                let s = g.item();
                acc(*a, &mut |ga| {
                    for (o, x) in ga.data.iter_mut().zip(&w.data) {
                        *o += s * x;
                    }
                });
            }
        }
    }
}
