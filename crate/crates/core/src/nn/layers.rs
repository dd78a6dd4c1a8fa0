//! Layers built on the tape: dense, embedding, continuous-filter
//! convolution, multi-head graph attention and a log-softmax head.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense,
    Embedding,
    CfConv,
    GraphAttention,
    SoftmaxHead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    ShiftedSoftplus,
    Identity,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::ShiftedSoftplus => tape.ssp(x),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, input_dim: usize, output_dim: usize, activation: Activation) -> Result<Self, NnError> {
        if input_dim == 0 || output_dim == 0 {
            return Err(NnError::Spec(format!("{kind:?} needs positive dims, got {input_dim}->{output_dim}")));
        }
        Ok(Self {
            kind,
            input_dim,
            output_dim,
            activation,
        })
    }
}

/// Gaussian expansion of a distance: centers evenly spaced on [0, d_max],
/// width equal to the spacing.
pub fn gaussian_rbf(distance: f64, n_gaussians: usize, d_max: f64) -> Vec<f64> {
    if n_gaussians == 1 {
        return vec![(-distance * distance / 2.0).exp()];
    }
    let spacing = d_max / (n_gaussians - 1) as f64;
    let denom = 2.0 * spacing * spacing;
    (0..n_gaussians)
        .map(|k| {
            let diff = distance - k as f64 * spacing;
            (-diff * diff / denom).exp()
        })
        .collect()
}

/// Smooth cutoff going from 1 at d = 0 to 0 at d = rc.
pub fn cosine_cutoff(d: f64, rc: f64) -> f64 {
    if d >= rc {
        0.0
    } else {
        0.5 * ((std::f64::consts::PI * d / rc).cos() + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub spec: LayerSpec,
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let spec = LayerSpec::new(LayerKind::Dense, input, output, activation).expect("dense dims");
        let w = store.glorot(&format!("{name}.w"), input, output, rng);
        let b = Some(store.zeros(&format!("{name}.b"), 1, output));
        Self { spec, w, b }
    }

    pub fn without_bias(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let spec = LayerSpec::new(LayerKind::Dense, input, output, Activation::Identity).expect("dense dims");
        let w = store.glorot(&format!("{name}.w"), input, output, rng);
        Self { spec, w, b: None }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let w = tape.param(self.w);
        let mut y = tape.matmul(x, w);
        if let Some(b) = self.b {
            let b = tape.param(b);
            y = tape.add_row(y, b);
        }
        self.spec.activation.apply(tape, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub spec: LayerSpec,
    pub table: ParamId,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, name: &str, classes: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let spec = LayerSpec::new(LayerKind::Embedding, classes, dim, Activation::Identity).expect("embedding dims");
        let table = store.glorot(&format!("{name}.table"), classes, dim, rng);
        Self { spec, table }
    }

    pub fn forward(&self, tape: &mut Tape, idx: Arc<[usize]>) -> Var {
        let t = tape.param(self.table);
        tape.gather_rows(t, idx)
    }
}

/// Dense layer followed by a row-wise log-softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    pub spec: LayerSpec,
    pub dense: Dense,
}

impl SoftmaxHead {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let spec = LayerSpec::new(LayerKind::SoftmaxHead, input, classes, Activation::Identity).expect("head dims");
        Self {
            spec,
            dense: Dense::new(store, name, input, classes, Activation::Identity, rng),
        }
    }

    /// A head whose weights start at zero, so every row starts uniform.
    pub fn zeroed(store: &mut ParamStore, name: &str, input: usize, classes: usize) -> Self {
        let spec = LayerSpec::new(LayerKind::SoftmaxHead, input, classes, Activation::Identity).expect("head dims");
        let w = store.zeros(&format!("{name}.w"), input, classes);
        let b = Some(store.zeros(&format!("{name}.b"), 1, classes));
        let dense = Dense {
            spec: LayerSpec::new(LayerKind::Dense, input, classes, Activation::Identity).expect("head dims"),
            w,
            b,
        };
        Self { spec, dense }
    }

    /// Log-probabilities, one row per input row.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let logits = self.dense.forward(tape, x);
        tape.log_softmax_rows(logits)
    }
}

/// Directed atom pairs within a cutoff with their radial features.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGeometry {
    pub n_atoms: usize,
    /// Neighbor j whose features are sent.
    pub src: Arc<[usize]>,
    /// Receiving atom i.
    pub dst: Arc<[usize]>,
    pub distance: Vec<f64>,
    /// P × n_gaussians.
    pub rbf: Tensor,
    /// P × 1 cosine cutoff weights.
    pub cutoff: Tensor,
}

impl PairGeometry {
    pub fn from_positions(positions: &[[f64; 3]], cutoff: f64, n_gaussians: usize, d_max: f64) -> Self {
        let n = positions.len();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut distance = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = crate::chem::molecule::distance(&positions[i], &positions[j]);
                if d < cutoff {
                    src.push(j);
                    dst.push(i);
                    distance.push(d);
                }
            }
        }
        let mut rbf = Vec::with_capacity(distance.len() * n_gaussians);
        for &d in &distance {
            rbf.extend(gaussian_rbf(d, n_gaussians, d_max));
        }
        let cut = distance.iter().map(|&d| cosine_cutoff(d, cutoff)).collect();
        Self {
            n_atoms: n,
            src: src.into(),
            dst: dst.into(),
            rbf: Tensor::from_vec(distance.len(), n_gaussians, rbf),
            cutoff: Tensor::column(cut),
            distance,
        }
    }

    pub fn len(&self) -> usize {
        self.distance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distance.is_empty()
    }
}

/// SchNet-style interaction block: atom-wise projection, continuous-filter
/// convolution over neighbor pairs, two atom-wise layers, residual add.
#[derive(Debug, Clone, PartialEq)]
pub struct CfConv {
    pub spec: LayerSpec,
    pub in2f: Dense,
    pub filter1: Dense,
    pub filter2: Dense,
    pub f2out: Dense,
    pub out: Dense,
}

impl CfConv {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, n_gaussians: usize, rng: &mut impl Rng) -> Self {
        let ssp = Activation::ShiftedSoftplus;
        Self {
            spec: LayerSpec::new(LayerKind::CfConv, dim, dim, ssp).expect("cfconv dims"),
            in2f: Dense::without_bias(store, &format!("{name}.in2f"), dim, dim, rng),
            filter1: Dense::new(store, &format!("{name}.filter1"), n_gaussians, dim, ssp, rng),
            filter2: Dense::new(store, &format!("{name}.filter2"), dim, dim, Activation::Identity, rng),
            f2out: Dense::new(store, &format!("{name}.f2out"), dim, dim, ssp, rng),
            out: Dense::new(store, &format!("{name}.out"), dim, dim, Activation::Identity, rng),
        }
    }

    /// Filter weights W_ij for every pair row of `rbf`, scaled by the cutoff.
    pub fn filters(&self, tape: &mut Tape, rbf: Var, cutoff: Var) -> Var {
        let h = self.filter1.forward(tape, rbf);
        let w = self.filter2.forward(tape, h);
        tape.mul_col(w, cutoff)
    }

    /// x + out(f2out(Σ_j in2f(x)_j ⊙ W_ij)) with precomputed filters.
    pub fn apply(&self, tape: &mut Tape, x: Var, filters: Var, src: Arc<[usize]>, dst: Arc<[usize]>) -> Var {
        let n = tape.value(x).rows;
        let xf = self.in2f.forward(tape, x);
        let xj = tape.gather_rows(xf, src);
        let msg = tape.mul(xj, filters);
        let agg = tape.scatter_add_rows(msg, dst, n);
        let v = self.f2out.forward(tape, agg);
        let v = self.out.forward(tape, v);
        tape.add(x, v)
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, geom: &PairGeometry) -> Var {
        let rbf = tape.constant(geom.rbf.clone());
        let cut = tape.constant(geom.cutoff.clone());
        let w = self.filters(tape, rbf, cut);
        self.apply(tape, x, w, geom.src.clone(), geom.dst.clone())
    }
}

/// Directed edge list with a self-loop on every node.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdges {
    pub n_nodes: usize,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
}

impl GraphEdges {
    /// Builds from directed pairs (src, dst); self-loops are added for
    /// every node and duplicates dropped.
    pub fn new(n_nodes: usize, pairs: &[(usize, usize)]) -> Self {
        let mut all: Vec<(usize, usize)> = pairs.iter().copied().filter(|&(s, d)| s != d).collect();
        all.extend((0..n_nodes).map(|i| (i, i)));
        all.sort_by_key(|&(s, d)| (d, s));
        all.dedup();
        assert!(all.iter().all(|&(s, d)| s < n_nodes && d < n_nodes), "edge index out of range");
        Self {
            n_nodes,
            src: all.iter().map(|e| e.0).collect(),
            dst: all.iter().map(|e| e.1).collect(),
        }
    }

    /// Both directions for each undirected pair.
    pub fn undirected(n_nodes: usize, pairs: &[(usize, usize)]) -> Self {
        let both: Vec<(usize, usize)> = pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        Self::new(n_nodes, &both)
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// Multi-head graph attention with concatenated heads.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphAttention {
    pub spec: LayerSpec,
    pub heads: usize,
    pub head_dim: usize,
    pub w: ParamId,
    pub a_src: ParamId,
    pub a_dst: ParamId,
    pub bias: ParamId,
    pub slope: f64,
}

impl GraphAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        heads: usize,
        head_dim: usize,
        activation: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let out = heads * head_dim;
        let spec = LayerSpec::new(LayerKind::GraphAttention, input, out, activation).expect("attention dims");
        let w = store.glorot(&format!("{name}.w"), input, out, rng);
        // Attention vectors are stored block-diagonally as out × heads.
        let mut block = |suffix: &str, rng: &mut dyn rand::RngCore| {
            let limit = (6.0 / (head_dim + 1) as f64).sqrt();
            let mut t = Tensor::zeros(out, heads);
            for h in 0..heads {
                for d in 0..head_dim {
                    t.set(h * head_dim + d, h, rng.random_range(-limit..limit));
                }
            }
            store.add(&format!("{name}.{suffix}"), t)
        };
        let a_src = block("a_src", rng);
        let a_dst = block("a_dst", rng);
        let bias = store.zeros(&format!("{name}.b"), 1, out);
        Self {
            spec,
            heads,
            head_dim,
            w,
            a_src,
            a_dst,
            bias,
            slope: 0.2,
        }
    }

    fn block_mask(&self) -> Tensor {
        let mut m = Tensor::zeros(self.heads * self.head_dim, self.heads);
        for h in 0..self.heads {
            for d in 0..self.head_dim {
                m.set(h * self.head_dim + d, h, 1.0);
            }
        }
        m
    }

    /// heads × (heads·head_dim) matrix repeating each head weight.
    fn expander(&self) -> Tensor {
        self.block_mask().transpose()
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, edges: &GraphEdges) -> Var {
        let n = edges.n_nodes;
        assert_eq!(tape.value(x).rows, n, "node count mismatch");
        let w = tape.param(self.w);
        let h = tape.matmul(x, w);
        let mask = tape.constant(self.block_mask());
        let a_src = tape.param(self.a_src);
        let a_src = tape.mul(a_src, mask);
        let a_dst = tape.param(self.a_dst);
        let a_dst = tape.mul(a_dst, mask);
        let s_src = tape.matmul(h, a_src);
        let s_dst = tape.matmul(h, a_dst);
        let e_src = tape.gather_rows(s_src, edges.src.clone());
        let e_dst = tape.gather_rows(s_dst, edges.dst.clone());
        let e = tape.add(e_src, e_dst);
        let e = tape.leaky_relu(e, self.slope);
        let alpha = tape.segment_softmax(e, edges.dst.clone(), n);
        let expand = tape.constant(self.expander());
        let alpha = tape.matmul(alpha, expand);
        let hj = tape.gather_rows(h, edges.src.clone());
        let msg = tape.mul(hj, alpha);
        let agg = tape.scatter_add_rows(msg, edges.dst.clone(), n);
        let b = tape.param(self.bias);
        let y = tape.add_row(agg, b);
        self.spec.activation.apply(tape, y)
    }
}
