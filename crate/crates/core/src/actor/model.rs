//! The actor network and its teacher-forced loss.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    ground_truth_bins, nearest_atoms, ActorConfig, ActorError, PartialState, PlacementDistributions, N_TYPES, STOP,
};
use crate::chem::molecule::distance;
use crate::chem::{Element, Molecule3D};
use crate::nn::{
    gaussian_rbf, cosine_cutoff, Activation, CfConv, Checkpoint, Dense, Embedding, ParamStore, SoftmaxHead, Tape, Tensor, Var,
};

/// Embedding class of the center-of-mass token.
pub const CENTER_TOKEN: usize = Element::COUNT;

#[derive(Debug, Clone, PartialEq)]
pub struct ActorModel {
    pub config: ActorConfig,
    pub store: ParamStore,
    embed: Embedding,
    blocks: Vec<CfConv>,
    type_mlp: Dense,
    type_head: SoftmaxHead,
    next_embed: Embedding,
    dist_mlp: Dense,
    dist_head: SoftmaxHead,
}

/// Conditioning graphs built over a prefix of one atom sequence: graph g
/// holds atoms 0..t_g plus a center token.
struct Batch {
    types: Arc<[usize]>,
    graph_of: Arc<[usize]>,
    offsets: Vec<usize>,
    n_graphs: usize,
    src: Arc<[usize]>,
    dst: Arc<[usize]>,
    filter_row: Arc<[usize]>,
    rbf: Tensor,
    cut: Tensor,
}

/// What one step of a trajectory should predict.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTarget {
    /// Atoms placed before this step.
    pub t: usize,
    /// Element index, or `STOP`.
    pub class: usize,
    /// (placed atom, true distance to the new atom) for each distance head.
    pub heads: Vec<(usize, f64)>,
}

/// Tape output of a teacher-forced pass.
pub struct TeacherForcedLoss {
    /// Σ over steps of type loss + distance loss.
    pub total: Var,
    /// (type_loss, dist_loss) per step, from the forward values.
    pub per_step: Vec<(f64, f64)>,
}

impl TeacherForcedLoss {
    pub fn steps(&self) -> usize {
        self.per_step.len()
    }

    pub fn sum(&self) -> f64 {
        self.per_step.iter().map(|(a, b)| a + b).sum()
    }

    pub fn mean(&self) -> f64 {
        if self.per_step.is_empty() {
            0.0
        } else {
            self.sum() / self.per_step.len() as f64
        }
    }
}

/// A single encoded state, reusable for several candidate next types.
pub struct EncodedState<'a> {
    tape: Tape<'a>,
    x: Var,
    pub type_probs: Vec<f64>,
    /// Placed atoms covered by distance heads.
    pub heads: Vec<usize>,
}

fn mass_center(elements: &[Element], positions: &[[f64; 3]]) -> [f64; 3] {
    let mut c = [0.0; 3];
    let mut m = 0.0;
    for (e, p) in elements.iter().zip(positions) {
        let w = e.mass();
        for k in 0..3 {
            c[k] += w * p[k];
        }
        m += w;
    }
    c.map(|v| v / m)
}

impl ActorModel {
    pub fn new(config: ActorConfig, seed: u64) -> Result<Self, ActorError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let f = config.feature_dim;
        let ssp = Activation::ShiftedSoftplus;
        let embed = Embedding::new(&mut store, "embed", Element::COUNT + 1, f, &mut rng);
        let blocks = (0..config.interactions)
            .map(|i| CfConv::new(&mut store, &format!("interaction{i}"), f, config.n_gaussians, &mut rng))
            .collect();
        let type_mlp = Dense::new(&mut store, "type.mlp", f, f, ssp, &mut rng);
        let type_head = SoftmaxHead::new(&mut store, "type.head", f, N_TYPES, &mut rng);
        let next_embed = Embedding::new(&mut store, "dist.next_type", Element::COUNT, f, &mut rng);
        let dist_mlp = Dense::new(&mut store, "dist.mlp", f, f, ssp, &mut rng);
        let dist_head = SoftmaxHead::new(&mut store, "dist.head", f, config.n_bins, &mut rng);
        Ok(Self {
            config,
            store,
            embed,
            blocks,
            type_mlp,
            type_head,
            next_embed,
            dist_mlp,
            dist_head,
        })
    }

    fn build_batch(&self, elements: &[Element], positions: &[[f64; 3]], prefixes: &[usize]) -> Batch {
        let cfg = &self.config;
        let n = positions.len();
        let mut types = Vec::new();
        let mut graph_of = Vec::new();
        let mut offsets = Vec::new();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut filter_row = Vec::new();
        let mut rbf = Vec::new();
        let mut cut = Vec::new();
        let mut pair_row: Vec<Option<usize>> = vec![None; n * n];
        let new_row = |d: f64, rbf: &mut Vec<f64>, cut: &mut Vec<f64>| {
            rbf.extend(gaussian_rbf(d, cfg.n_gaussians, cfg.d_max));
            cut.push(cosine_cutoff(d, cfg.cutoff));
            cut.len() - 1
        };
        for (g, &t) in prefixes.iter().enumerate() {
            let o = types.len();
            offsets.push(o);
            types.extend(elements[..t].iter().map(|e| e.index()));
            types.push(CENTER_TOKEN);
            graph_of.extend(std::iter::repeat_n(g, t + 1));
            for i in 0..t {
                for j in 0..t {
                    if i == j {
                        continue;
                    }
                    let d = distance(&positions[i], &positions[j]);
                    if d >= cfg.cutoff {
                        continue;
                    }
                    let key = i.min(j) * n + i.max(j);
                    let row = match pair_row[key] {
                        Some(r) => r,
                        None => {
                            let r = new_row(d, &mut rbf, &mut cut);
                            pair_row[key] = Some(r);
                            r
                        }
                    };
                    src.push(o + j);
                    dst.push(o + i);
                    filter_row.push(row);
                }
            }
            let c = mass_center(&elements[..t], &positions[..t]);
            for i in 0..t {
                let d = distance(&positions[i], &c);
                if d >= cfg.cutoff {
                    continue;
                }
                let r = new_row(d, &mut rbf, &mut cut);
                src.extend([o + i, o + t]);
                dst.extend([o + t, o + i]);
                filter_row.extend([r, r]);
            }
        }
        let rows = cut.len();
        Batch {
            n_graphs: prefixes.len(),
            types: types.into(),
            graph_of: graph_of.into(),
            offsets,
            src: src.into(),
            dst: dst.into(),
            filter_row: filter_row.into(),
            rbf: Tensor::from_vec(rows, cfg.n_gaussians, rbf),
            cut: Tensor::column(cut),
        }
    }

    fn encode(&self, tape: &mut Tape, b: &Batch) -> Var {
        let mut x = self.embed.forward(tape, b.types.clone());
        let rbf = tape.constant(b.rbf.clone());
        let cut = tape.constant(b.cut.clone());
        for block in &self.blocks {
            let w = block.filters(tape, rbf, cut);
            let w = tape.gather_rows(w, b.filter_row.clone());
            x = block.apply(tape, x, w, b.src.clone(), b.dst.clone());
        }
        x
    }

    /// Log-probabilities over type classes, one row per graph.
    fn type_logp(&self, tape: &mut Tape, x: Var, b: &Batch) -> Var {
        let h = self.type_mlp.forward(tape, x);
        let pooled = tape.scatter_add_rows(h, b.graph_of.clone(), b.n_graphs);
        self.type_head.forward(tape, pooled)
    }

    /// Log-probabilities over distance bins for the given node rows, each
    /// conditioned on the matching next-element index.
    fn dist_logp(&self, tape: &mut Tape, x: Var, nodes: Arc<[usize]>, next: Arc<[usize]>) -> Var {
        let xj = tape.gather_rows(x, nodes);
        let e = self.next_embed.forward(tape, next);
        let z = tape.mul(xj, e);
        let h = self.dist_mlp.forward(tape, z);
        self.dist_head.forward(tape, h)
    }

    /// Steps of a trajectory over an ordered atom sequence whose first
    /// `scaffold_len` atoms are the seed. A final STOP step is appended when
    /// `stop` is set.
    pub fn step_targets(&self, elements: &[Element], positions: &[[f64; 3]], scaffold_len: usize, stop: bool) -> Vec<StepTarget> {
        let n = positions.len();
        let mut out = Vec::new();
        for t in scaffold_len..n {
            let c = mass_center(&elements[..t], &positions[..t]);
            let heads = nearest_atoms(&positions[..t], &c, self.config.max_distance_heads)
                .into_iter()
                .map(|j| (j, distance(&positions[j], &positions[t])))
                .collect();
            out.push(StepTarget {
                t,
                class: elements[t].index(),
                heads,
            });
        }
        if stop && n > 0 {
            out.push(StepTarget {
                t: n,
                class: STOP,
                heads: Vec::new(),
            });
        }
        out
    }

    /// Teacher-forced loss of an ordered molecule (scaffold at 0..scaffold_len).
    pub fn trajectory_loss(
        &self,
        tape: &mut Tape,
        mol: &Molecule3D,
        scaffold_len: usize,
        stop: bool,
    ) -> Result<TeacherForcedLoss, ActorError> {
        if scaffold_len == 0 || scaffold_len > mol.atoms.len() {
            return Err(ActorError::State(format!(
                "scaffold length {scaffold_len} for {} atoms",
                mol.atoms.len()
            )));
        }
        let elements: Vec<Element> = mol.atoms.iter().map(|a| a.element).collect();
        let positions: Vec<[f64; 3]> = mol.atoms.iter().map(|a| a.position).collect();
        let targets = self.step_targets(&elements, &positions, scaffold_len, stop);
        if targets.is_empty() {
            return Err(ActorError::State("trajectory has no steps".into()));
        }
        let prefixes: Vec<usize> = targets.iter().map(|s| s.t).collect();
        let batch = self.build_batch(&elements, &positions, &prefixes);
        let x = self.encode(tape, &batch);
        let type_lp = self.type_logp(tape, x, &batch);

        let mut type_w = Tensor::zeros(targets.len(), N_TYPES);
        let mut nodes = Vec::new();
        let mut next = Vec::new();
        for (g, s) in targets.iter().enumerate() {
            type_w.set(g, s.class, -1.0);
            for &(j, _) in &s.heads {
                nodes.push(batch.offsets[g] + j);
                next.push(s.class);
            }
        }
        let type_vals = tape.value(type_lp).clone();
        let mut per_step: Vec<(f64, f64)> = targets
            .iter()
            .enumerate()
            .map(|(g, s)| (-type_vals.get(g, s.class), 0.0))
            .collect();
        let type_loss = tape.dot_const(type_lp, type_w);
        if nodes.is_empty() {
            return Ok(TeacherForcedLoss {
                total: type_loss,
                per_step,
            });
        }

        let bins = self.config.n_bins;
        let dist_lp = self.dist_logp(tape, x, nodes.into(), next.into());
        let mut q = Tensor::zeros(tape.value(dist_lp).rows, bins);
        let vals = tape.value(dist_lp);
        let mut r = 0;
        for (g, s) in targets.iter().enumerate() {
            for &(_, d) in &s.heads {
                let qb = ground_truth_bins(d, bins, self.config.d_max, self.config.target_width);
                let mut ce = 0.0;
                for (b, &v) in qb.iter().enumerate() {
                    if v > 0.0 {
                        ce -= v * vals.get(r, b);
                    }
                    q.set(r, b, -v);
                }
                per_step[g].1 += ce;
                r += 1;
            }
        }
        let dist_loss = tape.dot_const(dist_lp, q);
        let total = tape.add(type_loss, dist_loss);
        Ok(TeacherForcedLoss { total, per_step })
    }

    /// Forward-only teacher-forced loss values.
    pub fn evaluate_trajectory(&self, mol: &Molecule3D, scaffold_len: usize, stop: bool) -> Result<TeacherForcedLoss, ActorError> {
        let mut tape = Tape::new(&self.store);
        let l = self.trajectory_loss(&mut tape, mol, scaffold_len, stop)?;
        tape.check()?;
        Ok(l)
    }

    /// Encodes a state once; distance heads can then be queried per type.
    pub fn encode_state<'a>(&'a self, state: &PartialState) -> Result<EncodedState<'a>, ActorError> {
        let mol = &state.molecule;
        if mol.atoms.is_empty() {
            return Err(ActorError::State("empty state".into()));
        }
        let elements: Vec<Element> = mol.atoms.iter().map(|a| a.element).collect();
        let positions = state.positions();
        let batch = self.build_batch(&elements, &positions, &[positions.len()]);
        let mut tape = Tape::new(&self.store);
        let x = self.encode(&mut tape, &batch);
        let lp = self.type_logp(&mut tape, x, &batch);
        tape.check()?;
        let type_probs = tape.value(lp).data.iter().map(|v| v.exp()).collect();
        let c = mass_center(&elements, &positions);
        let heads = nearest_atoms(&positions, &c, self.config.max_distance_heads);
        Ok(EncodedState {
            tape,
            x,
            type_probs,
            heads,
        })
    }

    /// Distance distributions of the encoded state's heads for one element.
    pub fn distance_probs(&self, enc: &mut EncodedState, next: Element) -> Result<Vec<(usize, Vec<f64>)>, ActorError> {
        let nodes: Arc<[usize]> = enc.heads.clone().into();
        let types: Arc<[usize]> = vec![next.index(); enc.heads.len()].into();
        let lp = self.dist_logp(&mut enc.tape, enc.x, nodes, types);
        enc.tape.check()?;
        let vals = enc.tape.value(lp);
        Ok(enc
            .heads
            .iter()
            .enumerate()
            .map(|(r, &j)| (j, vals.row(r).iter().map(|v| v.exp()).collect()))
            .collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = serde_json::to_string(&self.config).expect("config serializes");
        let mut ck = Checkpoint::from_store(&self.store, &crate::config_hash(&config), None);
        ck.meta.insert("kind".into(), "actor".into());
        ck.meta.insert("config".into(), config);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, ActorError> {
        if ck.meta.get("kind").map(String::as_str) != Some("actor") {
            return Err(ActorError::Config("checkpoint is not an actor".into()));
        }
        let text = ck
            .meta
            .get("config")
            .ok_or_else(|| ActorError::Config("checkpoint lacks config".into()))?;
        let config: ActorConfig = serde_json::from_str(text).map_err(|e| ActorError::Config(e.to_string()))?;
        let mut m = Self::new(config, 0)?;
        ck.restore_into(&mut m.store)?;
        Ok(m)
    }

    /// Type distribution plus distance distributions conditioned on `next`,
    /// or on the most probable element when `next` is `None`.
    pub fn predict(&self, state: &PartialState, next: Option<Element>) -> Result<PlacementDistributions, ActorError> {
        let mut enc = self.encode_state(state)?;
        let next = next.unwrap_or_else(|| {
            let best = (0..Element::COUNT)
                .max_by(|&a, &b| enc.type_probs[a].total_cmp(&enc.type_probs[b]).then(b.cmp(&a)))
                .expect("non-empty");
            Element::from_index(best).expect("element class")
        });
        let distances = self.distance_probs(&mut enc, next)?;
        Ok(PlacementDistributions {
            type_probs: enc.type_probs,
            next,
            distances,
        })
    }
}
