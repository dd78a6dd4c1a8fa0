//! Two-tower attention critic.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ligand_c_sa, AffinityScaler, Critic, CriticError, CriticScores, LigandGraph, PocketGraph, POCKET_FEATURES,
};
use crate::chem::{Element, Molecule3D};
use crate::nn::{Activation, Checkpoint, Dense, GraphAttention, GraphEdges, ParamStore, SoftmaxHead, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub heads: usize,
    pub head_dim: usize,
    /// Attention layers per tower.
    pub layers: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub pocket_cutoff: f64,
    pub ligand_cutoff: f64,
    /// Weight of the affinity MSE relative to the classification loss.
    pub regression_weight: f64,
    pub seed: u64,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            heads: 4,
            head_dim: 70,
            layers: 1,
            hidden: 64,
            lr: 1e-4,
            epochs: 200,
            batch_size: 8,
            test_fraction: 0.2,
            pocket_cutoff: 8.0,
            ligand_cutoff: 4.0,
            regression_weight: 0.1,
            seed: 0,
        }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<(), CriticError> {
        let bad = |m: &str| Err(CriticError::Config(m.to_string()));
        if self.heads == 0 || self.head_dim == 0 || self.layers == 0 || self.hidden == 0 {
            return bad("layer sizes must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr >= 0.0) {
            return bad("lr must be non-negative");
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test_fraction must lie in [0, 1)");
        }
        if !(self.pocket_cutoff > 0.0 && self.ligand_cutoff > 0.0) {
            return bad("cutoffs must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatCritic {
    pub config: CriticConfig,
    pub store: ParamStore,
    pub pocket_layers: Vec<GraphAttention>,
    pub ligand_layers: Vec<GraphAttention>,
    pub mix: Dense,
    pub classify: SoftmaxHead,
    pub regress: Dense,
    pub scaler: AffinityScaler,
}

/// Disjoint union of several graphs.
struct Stacked {
    x: Tensor,
    edges: GraphEdges,
    graph_of: Arc<[usize]>,
}

fn stack<'a>(graphs: impl Iterator<Item = (Tensor, &'a [(usize, usize)])>) -> Stacked {
    let mut rows: Vec<f64> = Vec::new();
    let mut cols = 0;
    let mut pairs = Vec::new();
    let mut graph_of = Vec::new();
    let mut offset = 0;
    for (g, (feat, edges)) in graphs.enumerate() {
        cols = feat.cols;
        rows.extend_from_slice(&feat.data);
        pairs.extend(edges.iter().map(|&(a, b)| (a + offset, b + offset)));
        graph_of.extend(std::iter::repeat_n(g, feat.rows));
        offset += feat.rows;
    }
    Stacked {
        x: Tensor::from_vec(offset, cols, rows),
        edges: GraphEdges::undirected(offset, &pairs),
        graph_of: graph_of.into(),
    }
}

impl GatCritic {
    pub fn new(config: CriticConfig) -> Result<Self, CriticError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let width = config.heads * config.head_dim;
        let tower = |store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, input: usize| {
            (0..config.layers)
                .map(|l| {
                    let inp = if l == 0 { input } else { width };
                    let n = format!("{name}.gat{l}");
                    GraphAttention::new(store, &n, inp, config.heads, config.head_dim, Activation::ShiftedSoftplus, rng)
                })
                .collect::<Vec<_>>()
        };
        let pocket_layers = tower(&mut store, &mut rng, "pocket", POCKET_FEATURES);
        let ligand_layers = tower(&mut store, &mut rng, "ligand", Element::COUNT);
        let mix = Dense::new(&mut store, "mix", 2 * width, config.hidden, Activation::ShiftedSoftplus, &mut rng);
        let classify = SoftmaxHead::zeroed(&mut store, "classify", config.hidden, 2);
        let regress = Dense::new(&mut store, "regress", config.hidden, 1, Activation::Identity, &mut rng);
        Ok(Self {
            config,
            store,
            pocket_layers,
            ligand_layers,
            mix,
            classify,
            regress,
            scaler: AffinityScaler {
                min: 0.0,
                max: 1.0,
                degenerate: false,
            },
        })
    }

    fn tower(tape: &mut Tape, layers: &[GraphAttention], s: Stacked, n_graphs: usize) -> Var {
        let mut h = tape.constant(s.x);
        for l in layers {
            h = l.forward(tape, h, &s.edges);
        }
        tape.scatter_add_rows(h, s.graph_of, n_graphs)
    }

    /// Class log-probabilities (column 0 inactive, 1 active) and raw
    /// affinity, one row per pair.
    pub fn forward(&self, tape: &mut Tape, items: &[(&PocketGraph, &LigandGraph)]) -> (Var, Var) {
        let b = items.len();
        let ps = stack(items.iter().map(|(p, _)| (p.features(), p.edges.as_slice())));
        let ls = stack(items.iter().map(|(_, l)| (l.features(), l.edges.as_slice())));
        let hp = Self::tower(tape, &self.pocket_layers, ps, b);
        let hl = Self::tower(tape, &self.ligand_layers, ls, b);
        let z = tape.concat_cols(&[hp, hl]);
        let z = self.mix.forward(tape, z);
        (self.classify.forward(tape, z), self.regress.forward(tape, z))
    }

    /// Mean cross-entropy plus weighted MSE on the pairs that carry an
    /// affinity.
    pub fn loss(
        &self,
        tape: &mut Tape,
        items: &[(&PocketGraph, &LigandGraph)],
        labels: &[bool],
        affinities: &[Option<f64>],
    ) -> Var {
        let b = items.len();
        let (logp, aff) = self.forward(tape, items);
        let mut pick = Tensor::zeros(b, 2);
        for (i, &y) in labels.iter().enumerate() {
            pick.set(i, usize::from(y), -1.0 / b as f64);
        }
        let ce = tape.dot_const(logp, pick);
        let with: Vec<usize> = (0..b).filter(|&i| affinities[i].is_some()).collect();
        if with.is_empty() || self.config.regression_weight == 0.0 {
            return ce;
        }
        let target = Tensor::column(affinities.iter().map(|a| a.unwrap_or(0.0)).collect());
        let mut w = Tensor::zeros(b, 1);
        for &i in &with {
            w.set(i, 0, self.config.regression_weight / with.len() as f64);
        }
        let t = tape.constant(target);
        let d = tape.sub(aff, t);
        let sq = tape.mul(d, d);
        let mse = tape.dot_const(sq, w);
        tape.add(ce, mse)
    }

    /// (P(active), P(inactive), raw affinity) for one pair.
    pub fn predict(&self, pocket: &PocketGraph, ligand: &LigandGraph) -> Result<(f64, f64, f64), CriticError> {
        let mut tape = Tape::new(&self.store);
        let (logp, aff) = self.forward(&mut tape, &[(pocket, ligand)]);
        tape.check()?;
        let lp = tape.value(logp);
        Ok((lp.get(0, 1).exp(), lp.get(0, 0).exp(), tape.value(aff).get(0, 0)))
    }

    /// Active-class probability for each pair, evaluated in batches.
    pub fn predict_many(&self, items: &[(&PocketGraph, &LigandGraph)]) -> Result<Vec<f64>, CriticError> {
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(64) {
            let mut tape = Tape::new(&self.store);
            let (logp, _) = self.forward(&mut tape, chunk);
            tape.check()?;
            let lp = tape.value(logp);
            out.extend((0..chunk.len()).map(|i| lp.get(i, 1).exp()));
        }
        Ok(out)
    }

    pub fn ligand_graph(&self, mol: &Molecule3D) -> Result<LigandGraph, CriticError> {
        if mol.bonds.is_empty() {
            LigandGraph::partial(mol, self.config.ligand_cutoff)
        } else {
            LigandGraph::from_molecule(mol, self.config.ligand_cutoff)
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = serde_json::to_string(&self.config).expect("config serializes");
        let mut ck = Checkpoint::from_store(&self.store, &crate::config_hash(&config), None);
        ck.meta.insert("kind".into(), "critic".into());
        ck.meta.insert("config".into(), config);
        ck.meta
            .insert("scaler".into(), serde_json::to_string(&self.scaler).expect("scaler serializes"));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, CriticError> {
        let get = |k: &str| {
            ck.meta
                .get(k)
                .ok_or_else(|| CriticError::Config(format!("checkpoint lacks {k}")))
        };
        if get("kind")? != "critic" {
            return Err(CriticError::Config("checkpoint is not a critic".into()));
        }
        let config: CriticConfig =
            serde_json::from_str(get("config")?).map_err(|e| CriticError::Config(e.to_string()))?;
        let mut c = Self::new(config)?;
        c.scaler = serde_json::from_str(get("scaler")?).map_err(|e| CriticError::Config(e.to_string()))?;
        ck.restore_into(&mut c.store)?;
        Ok(c)
    }
}

impl Critic for GatCritic {
    fn score(&self, pocket: &PocketGraph, ligand: &Molecule3D) -> Result<CriticScores, CriticError> {
        let g = self.ligand_graph(ligand)?;
        let (c_bp, p_inactive, raw) = self.predict(pocket, &g)?;
        Ok(CriticScores {
            c_bp,
            p_inactive,
            c_ea_raw: raw,
            c_ea: self.scaler.scale(raw),
            c_sa: ligand_c_sa(ligand),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critic::synthetic::synth_pairs;
    use crate::nn::grad_check;

    fn small() -> CriticConfig {
        CriticConfig {
            heads: 2,
            head_dim: 4,
            hidden: 6,
            ..CriticConfig::default()
        }
    }

    #[test]
    fn untrained_is_even() {
        let c = GatCritic::new(small()).unwrap();
        for p in synth_pairs(3, 6, 8.0) {
            let s = c.score(&p.pocket, &p.ligand).unwrap();
            assert!((s.c_bp - 0.5).abs() < 1e-12);
            assert!((s.c_bp + s.p_inactive - 1.0).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&s.c_sa));
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut c = GatCritic::new(small()).unwrap();
        // move the head off zero so the check is not trivial
        let id = c.classify.dense.w;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for v in c.store.get_mut(id).data.iter_mut() {
            *v = rand::Rng::random_range(&mut rng, -1.0..1.0);
        }
        let p = synth_pairs(4, 1, 8.0).remove(0);
        let g = c.ligand_graph(&p.ligand).unwrap();
        let base = c.predict(&p.pocket, &g).unwrap();
        let n = g.n_nodes();
        let perm: Vec<usize> = (0..n).rev().collect();
        let inv: Vec<usize> = {
            let mut v = vec![0; n];
            for (new, &old) in perm.iter().enumerate() {
                v[old] = new;
            }
            v
        };
        let g2 = LigandGraph {
            elements: perm.iter().map(|&i| g.elements[i]).collect(),
            positions: perm.iter().map(|&i| g.positions[i]).collect(),
            edges: g.edges.iter().map(|&(a, b)| (inv[a].min(inv[b]), inv[a].max(inv[b]))).collect(),
        };
        let mut pk = p.pocket.clone();
        pk.atoms.reverse();
        let na = pk.atoms.len();
        let r = pk.residue_types.len();
        let remap = |i: usize| if i < r { i } else { r + (na - 1 - (i - r)) };
        pk.edges = pk.edges.iter().map(|&(a, b)| (remap(a).min(remap(b)), remap(a).max(remap(b)))).collect();
        let moved = c.predict(&pk, &g2).unwrap();
        assert!((base.0 - moved.0).abs() < 1e-9 && (base.2 - moved.2).abs() < 1e-9);
    }

    #[test]
    fn composed_loss_gradients() {
        let c = GatCritic::new(CriticConfig {
            heads: 2,
            head_dim: 3,
            hidden: 4,
            ..CriticConfig::default()
        })
        .unwrap();
        let pairs = synth_pairs(5, 3, 8.0);
        let graphs: Vec<LigandGraph> = pairs.iter().map(|p| c.ligand_graph(&p.ligand).unwrap()).collect();
        let items: Vec<(&PocketGraph, &LigandGraph)> = pairs.iter().zip(&graphs).map(|(p, g)| (&p.pocket, g)).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.active).collect();
        let aff: Vec<Option<f64>> = pairs.iter().map(|p| p.affinity).collect();
        let mut store = c.store.clone();
        // nonzero head so its gradient path is exercised
        let id = c.classify.dense.w;
        for (k, v) in store.get_mut(id).data.iter_mut().enumerate() {
            *v = 0.1 * (k as f64 - 3.0);
        }
        let rep = grad_check(&store, |tape| c.loss(tape, &items, &labels, &aff), 1e-6, 6).unwrap();
        assert!(rep.max_rel_err < 1e-4, "{rep:?}");
    }

    #[test]
    fn checkpoint_roundtrip() {
        let c = GatCritic::new(small()).unwrap();
        let back = GatCritic::from_checkpoint(&Checkpoint::from_json(&c.to_checkpoint().to_json()).unwrap()).unwrap();
        assert_eq!(back.store, c.store);
        assert_eq!(back.config, c.config);
    }
}
