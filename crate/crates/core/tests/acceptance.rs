//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! `cargo test -p molrl-core --test acceptance -- 1 3` runs a subset. The
//! process exits 0 unless `MOLRL_ACCEPTANCE_STRICT=1` is set, in which case
//! any failure exits 1.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use molrl_core::actor::{generate, train_supervised, ActorModel, GenerateOptions, PartialState, SupervisedReport, TrainOptions};
use molrl_core::chem::{canonical_smiles, contains_scaffold, parse_smiles, single_bond_graph, Atom, Element, Molecule3D, Scaffold};
use molrl_core::critic::{train_classifier, CriticConfig, CriticScores, GatCritic, LigandGraph, PocketGraph, SyntheticCritic, SyntheticMode};
use molrl_core::descriptors::{compute_descriptors, crippen_logp, esol, qed, set_metrics, DescriptorVector, QedParams, SaModel};
use molrl_core::nn::layers::{Activation, CfConv, Dense, Embedding, GraphAttention, GraphEdges, PairGeometry, SoftmaxHead};
use molrl_core::nn::{grad_check, ParamStore, Tape, Tensor};
use molrl_core::pipeline::synth::{piperazine_scaffold, synth_dataset, DatasetSizes, SynthDataset, SynthOptions};
use molrl_core::pipeline::{run_all, RunConfig};
use molrl_core::rl::{
    ablation_run, policy_objective, reward, rl_finetune, score_all, AblationConfig, EpisodeTrace, RewardBreakdown, RewardConfig, RewardKind,
    RlConfig, RlReport, StepRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SMOKE: &str = include_str!("../../../configs/smoke.conf");
const FORMULA_TOL: f64 = 1e-9;
const GRAD_TOL: f64 = 1e-4;
const GRAD_SEEDS: u64 = 20;
const GENERATED: usize = 200;
const GENERATE_SEED: u64 = 1009;
/// RL epochs for the uplift and ablation runs.
const RL_EPOCHS: usize = 40;

type Outcome = Result<String, String>;

struct Trained {
    model: ActorModel,
    report: SupervisedReport,
    elapsed: Duration,
}

struct Ctx {
    cfg: RunConfig,
    data: SynthDataset,
    trained: Option<Trained>,
    /// (kind, min step reward, max step reward) of every RL run so far.
    reward_ranges: Vec<(RewardKind, f64, f64)>,
}

impl Ctx {
    fn new() -> Self {
        let cfg = RunConfig::load(SMOKE, &[]).expect("bundled smoke config");
        let sizes = DatasetSizes {
            train: cfg.data.train_size,
            val: cfg.data.val_size,
            pairs: cfg.data.pairs,
        };
        let opts = SynthOptions {
            max_carbon_groups: cfg.data.max_carbon_groups,
            reach: cfg.data.reach,
        };
        let data = synth_dataset(cfg.seed, &sizes, &opts, cfg.pocket.acidic, cfg.pocket.cutoff);
        Self {
            cfg,
            data,
            trained: None,
            reward_ranges: Vec::new(),
        }
    }

    fn trained(&mut self) -> &Trained {
        if self.trained.is_none() {
            let t = Instant::now();
            let mut model = ActorModel::new(self.cfg.actor.clone(), self.cfg.seed).expect("actor config");
            let opts = TrainOptions::from_config(&self.cfg.actor, self.cfg.seed);
            let report = train_supervised(&mut model, &self.data.train, &self.data.val, &opts).expect("supervised training");
            self.trained = Some(Trained {
                model,
                report,
                elapsed: t.elapsed(),
            });
        }
        self.trained.as_ref().expect("just trained")
    }

    fn rl_config(&self, reward: RewardConfig) -> RlConfig {
        RlConfig {
            epochs: RL_EPOCHS,
            reward,
            ..self.cfg.rl_config()
        }
    }

    fn record(&mut self, kind: RewardKind, r: &RlReport) {
        let lo = r.curves.iter().map(|c| c.min_reward).fold(f64::INFINITY, f64::min);
        let hi = r.curves.iter().map(|c| c.max_reward).fold(f64::NEG_INFINITY, f64::max);
        self.reward_ranges.push((kind, lo, hi));
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit_s: u64, start: Instant, outcome: Outcome) -> Outcome {
    let s = start.elapsed().as_secs_f64();
    let over = s > limit_s as f64;
    match outcome {
        Ok(d) if over => Err(format!("{d}; runtime {s:.1} s exceeds {limit_s} s")),
        other => other,
    }
}

fn generate_set(model: &ActorModel, n: usize) -> Vec<Molecule3D> {
    let scaffold = piperazine_scaffold();
    let mut rng = ChaCha8Rng::seed_from_u64(GENERATE_SEED);
    let opts = GenerateOptions::from_config(&model.config);
    (0..n)
        .map(|_| generate(&scaffold, model, &mut rng, &opts).expect("generation"))
        .collect()
}

fn mean_c_bp(critic: &SyntheticCritic, pocket: &PocketGraph, mols: &[Molecule3D]) -> f64 {
    let s: Vec<f64> = score_all(critic, pocket, mols).into_iter().map(|s| s.expect("synthetic score").c_bp).collect();
    s.iter().sum::<f64>() / s.len() as f64
}

// ---------------------------------------------------------------- 1

fn close(what: &str, got: f64, want: f64, worst: &mut f64) -> Result<(), String> {
    let err = (got - want).abs();
    *worst = worst.max(err);
    if err <= FORMULA_TOL {
        Ok(())
    } else {
        Err(format!("{what}: got {got:.12}, expected {want:.12}"))
    }
}

/// SMILES, hand-typed Crippen logP, molecular weight, rotatable bonds,
/// aromatic proportion, ESOL.
const CRIPPEN_ESOL: [(&str, f64, f64, u32, f64, f64); 6] = [
    ("CCO", -0.0014, 46.069, 0, 0.0, -0.1247458),
    ("c1ccccc1", 1.6866, 78.114, 0, 1.0, -2.1268648),
    ("Cc1ccccc1", 2.0546, 92.141, 0, 6.0 / 7.0, -2.3399579142857143),
    ("CC(=O)N", 0.03, 59.068, 0, 0.0, -0.2251216),
    ("CCNCC", 0.6158, 73.139, 2, 0.0, -0.5494158),
    ("Oc1ccccc1", 1.3104, 94.113, 0, 6.0 / 7.0, -1.883338314285714),
];

/// Desirability parameters a, b, c, d, e, f, dmax per descriptor.
const QED_TABLE: [[f64; 7]; 8] = [
    [2.817065973, 392.5754953, 290.7489764, 2.419764353, 49.22325677, 65.37051707, 104.9805561],
    [3.172690585, 137.8624751, 2.534937431, 4.581497897, 0.822739154, 0.576295591, 131.3186604],
    [2.948620388, 160.4605972, 3.615294657, 4.435986202, 0.290141953, 1.300669958, 148.7763046],
    [1.618662227, 1010.051101, 0.985094388, 0.000000001, 0.713820843, 0.920922555, 258.1632616],
    [1.876861559, 125.2232657, 62.90773554, 87.83366614, 12.01999824, 28.51324732, 104.5686167],
    [0.01, 272.4121427, 2.558379970, 1.565547684, 1.271567166, 2.758063707, 105.4420403],
    [3.217788970, 957.7374108, 2.274627939, 0.000000001, 1.317690384, 0.375760881, 312.3372610],
    [0.01, 1199.094025, -0.09002883, 0.000000001, 0.185904477, 0.875193782, 417.7253140],
];

fn qed_oracle(x: [f64; 8]) -> f64 {
    let mut log_sum = 0.0;
    for (v, p) in x.iter().zip(QED_TABLE) {
        let [a, b, c, d, e, f, dmax] = p;
        let rise = 1.0 / (1.0 + (-(v - c + d / 2.0) / e).exp());
        let fall = 1.0 - 1.0 / (1.0 + (-(v - c - d / 2.0) / f).exp());
        let des = ((a + b * rise * fall) / dmax).max(1e-6);
        log_sum += des.ln();
    }
    (log_sum / 8.0).exp()
}

fn descriptor_vector(mw: f64, alogp: f64, hbd: u32, hba: u32, psa: f64, rotb: u32, arom: u32, alerts: u32) -> DescriptorVector {
    DescriptorVector {
        mw,
        alogp,
        hbd,
        hba,
        psa,
        rotb,
        arom,
        alerts,
        ap: 0.0,
    }
}

/// SMILES, bridgeheads, spiro atoms, stereocenters, macrocycles, heavy atoms.
const SA_FIXTURES: [(&str, usize, usize, usize, usize, usize); 7] = [
    ("c1ccccc1", 0, 0, 0, 0, 6),
    ("C1CC2CCC1C2", 2, 0, 0, 0, 7),
    ("C1CCC2(C1)CCCC2", 0, 1, 0, 0, 9),
    ("C1CCCCCCCCC1", 0, 0, 0, 1, 10),
    ("CCC(C)O", 0, 0, 1, 0, 5),
    ("CC(O)C(C)O", 0, 0, 2, 0, 6),
    ("C1CC2CCC1C2C(C)O", 2, 0, 1, 0, 10),
];

fn scores(c_bp: f64, c_ea: f64, c_sa: f64) -> CriticScores {
    CriticScores {
        c_bp,
        p_inactive: 1.0 - c_bp,
        c_ea_raw: c_ea,
        c_ea,
        c_sa,
    }
}

/// C_BP, C_EA, C_SA and the R1, R2, R3 values under default weights.
const REWARD_FIXTURES: [(f64, f64, f64, f64, f64, f64); 6] = [
    (0.8, 0.4, 0.2, 1.45, 1.55, 1.25),
    (0.0, 0.0, 0.0, 1.0, 1.0, 1.0),
    (1.0, 1.0, 1.0, 1.5, 1.5, 1.5),
    (0.37, 0.91, 0.55, 1.275, 1.14, 1.545),
    (0.62, 0.08, 0.73, 1.1475, 1.2825, 0.8775),
    (0.15, 0.66, 0.05, 1.2275, 1.1, 1.4825),
];

fn trace(steps: &[(f64, f64, f64)], stop: Option<f64>) -> EpisodeTrace {
    let steps = steps
        .iter()
        .enumerate()
        .map(|(i, &(type_nll, dist_nll, total))| StepRecord {
            step: i,
            state_digest: String::new(),
            distributions_digest: String::new(),
            type_nll,
            dist_nll,
            reward: RewardBreakdown {
                total,
                bp_term: 0.0,
                ea_term: 0.0,
                sa_term: 0.0,
                step: i,
                kind: RewardKind::R1,
            },
        })
        .collect();
    EpisodeTrace {
        steps,
        stop_nll: stop,
        molecule: Molecule3D::new(),
        final_scores: scores(0.5, 0.5, 0.5),
    }
}

fn criterion_1(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut counts = [0usize; 6];

    for (smi, logp, mw, rb, ap, want) in CRIPPEN_ESOL {
        let mol = parse_smiles(smi).map_err(|e| format!("{smi}: {e}"))?;
        let c = crippen_logp(&mol);
        close(&format!("logP {smi}"), c.logp, logp, &mut worst)?;
        let d = compute_descriptors(&mol);
        close(&format!("MW {smi}"), d.mw, mw, &mut worst)?;
        close(&format!("AP {smi}"), d.ap, ap, &mut worst)?;
        if d.rotb != rb {
            return Err(format!("rotatable bonds {smi}: got {}, expected {rb}", d.rotb));
        }
        close(&format!("ESOL {smi}"), esol(&d), want, &mut worst)?;
        counts[0] += 1;
        counts[1] += 1;
    }

    let qed_fixtures = [
        descriptor_vector(300.0, 2.5, 1, 4, 60.0, 3, 1, 0),
        descriptor_vector(150.2, -0.7, 2, 3, 45.3, 1, 0, 0),
        descriptor_vector(510.6, 5.8, 4, 9, 140.0, 11, 3, 2),
        descriptor_vector(78.114, 1.6866, 0, 0, 0.0, 0, 1, 0),
        descriptor_vector(2000.0, 12.0, 20, 30, 400.0, 40, 8, 9),
        descriptor_vector(0.0, -10.0, 0, 0, 0.0, 0, 0, 0),
    ];
    for d in qed_fixtures {
        close(&format!("QED {d:?}"), qed(&d, QedParams::bundled()).value, qed_oracle(d.qed_inputs()), &mut worst)?;
        counts[2] += 1;
    }

    // An empty fragment table makes every fragment unknown, so the fragment
    // score is the rare-fragment penalty and the scale anchors are fixed.
    let model = SaModel {
        contributions: Default::default(),
        raw_min: -10.0,
        raw_max: -3.0,
    };
    for (smi, bridge, spiro, stereo, macro_, heavy) in SA_FIXTURES {
        let mol = parse_smiles(smi).map_err(|e| format!("{smi}: {e}"))?;
        let s = model.score(&mol);
        let counted = (s.n_bridgehead, s.n_spiro, s.n_stereo, s.n_macrocycles, s.n_heavy);
        if counted != (bridge, spiro, stereo, macro_, heavy) {
            return Err(format!("SA counts {smi}: got {counted:?}"));
        }
        let ring = ((bridge + 1) as f64).ln() + ((spiro + 1) as f64).ln();
        let stereo_c = ((stereo + 1) as f64).ln();
        let macro_c = ((macro_ + 1) as f64).ln();
        let n = heavy as f64;
        let size = n.powf(1.005) - n;
        let raw = -4.0 - ring - stereo_c - macro_c - size;
        let total = (1.5 + (-3.0 - raw) / 7.0 * 7.0).clamp(1.0, 10.0);
        close(&format!("SA ring {smi}"), s.ring_complexity, ring, &mut worst)?;
        close(&format!("SA stereo {smi}"), s.stereo_complexity, stereo_c, &mut worst)?;
        close(&format!("SA macrocycle {smi}"), s.macrocycle_penalty, macro_c, &mut worst)?;
        close(&format!("SA size {smi}"), s.size_penalty, size, &mut worst)?;
        close(&format!("SA fragments {smi}"), s.fragment_score, -4.0, &mut worst)?;
        close(&format!("SA total {smi}"), s.total, total, &mut worst)?;
        counts[3] += 1;
    }
    // A model built from one molecule knows each of its fragments at the
    // median count, so every contribution is ln 1 = 0.
    let benzene = parse_smiles("c1ccccc1").map_err(|e| e.to_string())?;
    let own = SaModel::from_corpus(std::slice::from_ref(&benzene)).score(&benzene);
    close("SA self fragments", own.fragment_score, 0.0, &mut worst)?;

    for (bp, ea, sa, r1, r2, r3) in REWARD_FIXTURES {
        for (kind, want) in [(RewardKind::R1, r1), (RewardKind::R2, r2), (RewardKind::R3, r3)] {
            let got = reward(&scores(bp, ea, sa), &RewardConfig::default_for(kind), 0).map_err(|e| e.to_string())?;
            close(&format!("{kind} at ({bp}, {ea}, {sa})"), got.total, want, &mut worst)?;
        }
        counts[4] += 1;
    }
    let custom = RewardConfig::new(RewardKind::R1, 0.3, 0.6, 0.1).map_err(|e| e.to_string())?;
    for ((bp, ea, sa), want) in [((0.8, 0.4, 0.2), 1.46), ((0.0, 0.0, 0.0), 1.0), ((1.0, 1.0, 1.0), 1.8)] {
        let got = reward(&scores(bp, ea, sa), &custom, 0).map_err(|e| e.to_string())?;
        close("R1 custom weights", got.total, want, &mut worst)?;
    }

    let traces = [
        (trace(&[(1.2, 3.4, 1.1)], Some(0.4)), 3.9),
        (trace(&[(0.5, 2.0, 1.3), (0.7, 1.5, 1.4)], None), 2.0),
        (trace(&[(2.1, 0.9, 0.8), (0.3, 0.4, 1.75), (1.0, 1.0, 1.0)], Some(2.5)), 4.65),
        (trace(&[(0.05, 4.2, 1.6), (0.6, 3.3, 0.9), (1.1, 2.2, 1.2), (0.2, 0.1, 1.5)], Some(0.01)), 6.56),
        (trace(&[], Some(0.9)), 0.9),
    ];
    for (t, want) in &traces {
        let got = policy_objective(t).map_err(|e| e.to_string())?;
        close("policy objective", got, *want, &mut worst)?;
        counts[5] += 1;
    }
    if policy_objective(&trace(&[], None)).is_ok() {
        return Err("empty trace accepted".into());
    }

    let detail = format!(
        "fixtures logP {} ESOL {} QED {} SA {} rewards {} objective {}; max abs error {worst:.1e}",
        counts[0], counts[1], counts[2], counts[3], counts[4], counts[5]
    );
    within(5, start, check(counts.iter().all(|&c| c >= 5), detail))
}

// ---------------------------------------------------------------- 2

fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn jitter(store: &mut ParamStore, rng: &mut impl Rng, scale: f64) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for v in &mut store.get_mut(id).data {
            *v += rng.random_range(-scale..scale);
        }
    }
}

fn random_positions(n: usize, rng: &mut impl Rng) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect()
}

fn squared_error(t: &mut Tape, y: molrl_core::nn::Var, target: &Tensor) -> molrl_core::nn::Var {
    let tv = t.constant(target.clone());
    let d = t.sub(y, tv);
    let sq = t.mul(d, d);
    t.sum(sq)
}

fn dense_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    let d1 = Dense::new(&mut s, "d1", 4, 5, Activation::ShiftedSoftplus, &mut rng);
    let d2 = Dense::new(&mut s, "d2", 5, 3, Activation::Identity, &mut rng);
    jitter(&mut s, &mut rng, 0.3);
    let x = random_tensor(6, 4, &mut rng);
    let target = random_tensor(6, 3, &mut rng);
    let r = grad_check(
        &s,
        |t| {
            let xv = t.constant(x.clone());
            let h = d1.forward(t, xv);
            let y = d2.forward(t, h);
            squared_error(t, y, &target)
        },
        1e-5,
        usize::MAX,
    );
    r.expect("dense").max_rel_err
}

fn embedding_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    let emb = Embedding::new(&mut s, "e", 5, 4, &mut rng);
    let proj = Dense::new(&mut s, "p", 4, 2, Activation::ShiftedSoftplus, &mut rng);
    jitter(&mut s, &mut rng, 0.3);
    let idx: Arc<[usize]> = (0..6).map(|_| rng.random_range(0..5)).collect::<Vec<_>>().into();
    let target = random_tensor(6, 2, &mut rng);
    let r = grad_check(
        &s,
        |t| {
            let e = emb.forward(t, idx.clone());
            let y = proj.forward(t, e);
            squared_error(t, y, &target)
        },
        1e-5,
        usize::MAX,
    );
    r.expect("embedding").max_rel_err
}

fn softmax_head_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    let head = SoftmaxHead::new(&mut s, "h", 4, 6, &mut rng);
    jitter(&mut s, &mut rng, 0.3);
    let x = random_tensor(5, 4, &mut rng);
    let mut pick = Tensor::zeros(5, 6);
    for r in 0..5 {
        pick.set(r, rng.random_range(0..6), -1.0);
    }
    let r = grad_check(
        &s,
        |t| {
            let xv = t.constant(x.clone());
            let lp = head.forward(t, xv);
            t.dot_const(lp, pick.clone())
        },
        1e-5,
        usize::MAX,
    );
    r.expect("softmax head").max_rel_err
}

fn cfconv_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    let layer = CfConv::new(&mut s, "c", 4, 6, &mut rng);
    jitter(&mut s, &mut rng, 0.3);
    let geom = PairGeometry::from_positions(&random_positions(5, &mut rng), 5.0, 6, 5.0);
    let x = random_tensor(5, 4, &mut rng);
    let target = random_tensor(5, 4, &mut rng);
    let r = grad_check(
        &s,
        |t| {
            let xv = t.constant(x.clone());
            let y = layer.forward(t, xv, &geom);
            let y = t.ssp(y);
            squared_error(t, y, &target)
        },
        1e-5,
        usize::MAX,
    );
    r.expect("cfconv").max_rel_err
}

fn attention_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    let layer = GraphAttention::new(&mut s, "g", 3, 2, 3, Activation::ShiftedSoftplus, &mut rng);
    jitter(&mut s, &mut rng, 0.3);
    let x = random_tensor(6, 3, &mut rng);
    let mut pairs: Vec<(usize, usize)> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
    pairs.push((rng.random_range(0..3), rng.random_range(3..6)));
    let edges = GraphEdges::undirected(6, &pairs);
    let target = random_tensor(6, 6, &mut rng);
    let r = grad_check(
        &s,
        |t| {
            let xv = t.constant(x.clone());
            let y = layer.forward(t, xv, &edges);
            squared_error(t, y, &target)
        },
        1e-5,
        usize::MAX,
    );
    r.expect("graph attention").max_rel_err
}

fn actor_loss_check(seed: u64, data: &SynthDataset) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = molrl_core::actor::ActorConfig {
        feature_dim: 6,
        interactions: 2,
        n_gaussians: 8,
        n_bins: 40,
        max_distance_heads: 4,
        ..molrl_core::actor::ActorConfig::toy()
    };
    let mut model = ActorModel::new(cfg, seed).expect("actor");
    jitter(&mut model.store, &mut rng, 0.1);
    let (mol, k) = molrl_core::actor::train::prepare(&data.train[seed as usize % data.train.len()..][..1])
        .expect("corpus order")
        .remove(0);
    let keep = (k + 3).min(mol.len());
    let prefix = Molecule3D::from_atoms(mol.atoms[..keep].to_vec());
    let r = grad_check(
        &model.store,
        |t| model.trajectory_loss(t, &prefix, k, true).expect("trajectory").total,
        1e-5,
        4,
    );
    r.expect("actor loss").max_rel_err
}

fn critic_loss_check(seed: u64, data: &SynthDataset) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = GatCritic::new(CriticConfig {
        heads: 2,
        head_dim: 3,
        hidden: 4,
        seed,
        ..CriticConfig::default()
    })
    .expect("critic");
    jitter(&mut c.store, &mut rng, 0.1);
    let start = (seed as usize * 3) % (data.pairs.len() - 3);
    let pairs = &data.pairs[start..start + 3];
    let graphs: Vec<LigandGraph> = pairs.iter().map(|p| c.ligand_graph(&p.ligand).expect("ligand")).collect();
    let items: Vec<(&PocketGraph, &LigandGraph)> = pairs.iter().zip(&graphs).map(|(p, g)| (&p.pocket, g)).collect();
    let labels: Vec<bool> = pairs.iter().map(|p| p.active).collect();
    let aff: Vec<Option<f64>> = pairs.iter().map(|p| p.affinity).collect();
    let r = grad_check(&c.store, |t| c.loss(t, &items, &labels, &aff), 1e-6, 4);
    r.expect("critic loss").max_rel_err
}

fn criterion_2(ctx: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let data = &ctx.data;
    let checks: [(&str, &dyn Fn(u64) -> f64); 7] = [
        ("Dense", &dense_check),
        ("Embedding", &embedding_check),
        ("SoftmaxHead", &softmax_head_check),
        ("CfConv", &cfconv_check),
        ("GraphAttention", &attention_check),
        ("actor loss", &|s| actor_loss_check(s, data)),
        ("critic loss", &|s| critic_loss_check(s, data)),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, f) in checks {
        let worst = (0..GRAD_SEEDS).map(f).fold(0.0, f64::max);
        ok &= worst < GRAD_TOL;
        parts.push(format!("{name} {worst:.1e}"));
    }
    within(60, start, check(ok, format!("max relative error over {GRAD_SEEDS} seeds: {}", parts.join(", "))))
}

// ---------------------------------------------------------------- 3

fn rigid_motion(state: &PartialState, rng: &mut impl Rng) -> PartialState {
    // Random unit quaternion.
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (a * (tau * u2).sin(), a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos());
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let shift = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)];
    let mut out = state.clone();
    for atom in &mut out.molecule.atoms {
        let p = atom.position;
        atom.position = std::array::from_fn(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + shift[i]);
    }
    out
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_3(ctx: &mut Ctx) -> Outcome {
    const CALLS: usize = 10_000;
    let start = Instant::now();
    let models: Vec<ActorModel> = (0..4).map(|s| ActorModel::new(ctx.cfg.actor.clone(), 100 + s).expect("actor")).collect();
    let ordered = molrl_core::actor::train::prepare(&ctx.data.train).expect("corpus order");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut sum_err, mut motion_err) = (0.0f64, 0.0f64);
    let mut distributions = 0usize;
    for call in 0..CALLS {
        let model = &models[call % models.len()];
        let (mol, k) = &ordered[rng.random_range(0..ordered.len())];
        let keep = rng.random_range(*k..=mol.len());
        let mut state = PartialState::from_scaffold(&Molecule3D::from_atoms(mol.atoms[..keep].to_vec()));
        state.scaffold_len = *k;
        state.molecule.scaffold_mask = (0..*k).collect();
        let next = if rng.random_bool(0.5) {
            Some(Element::ALL[rng.random_range(0..Element::ALL.len())])
        } else {
            None
        };
        let a = model.predict(&state, next).map_err(|e| e.to_string())?;
        sum_err = sum_err.max((a.type_probs.iter().sum::<f64>() - 1.0).abs());
        for (_, p) in &a.distances {
            sum_err = sum_err.max((p.iter().sum::<f64>() - 1.0).abs());
            distributions += 1;
        }
        let b = model.predict(&rigid_motion(&state, &mut rng), Some(a.next)).map_err(|e| e.to_string())?;
        motion_err = motion_err.max(max_abs_diff(&a.type_probs, &b.type_probs));
        if a.distances.len() != b.distances.len() {
            return Err(format!("call {call}: head count changed under rigid motion"));
        }
        for ((ia, pa), (ib, pb)) in a.distances.iter().zip(&b.distances) {
            if ia != ib {
                return Err(format!("call {call}: head atoms changed under rigid motion"));
            }
            motion_err = motion_err.max(max_abs_diff(pa, pb));
        }
    }
    let detail = format!(
        "{CALLS} calls, {distributions} distance distributions; max |sum - 1| {sum_err:.1e}, max rigid-motion change {motion_err:.1e}"
    );
    within(60, start, check(sum_err <= 1e-6 && motion_err <= 1e-10, detail))
}

// ---------------------------------------------------------------- 4

fn criterion_4(ctx: &mut Ctx) -> Outcome {
    let n = ctx.data.train.len();
    let epochs = ctx.cfg.actor.epochs;
    let t = ctx.trained();
    let (init, fin) = (t.report.initial_train_nll, t.report.final_train_nll);
    let ratio = fin / init;
    let s = t.elapsed.as_secs_f64();
    let detail = format!(
        "{n} molecules, {epochs} epochs: NLL {init:.3} -> {fin:.3} (ratio {ratio:.3}, best epoch {}) in {s:.0} s",
        t.report.best_epoch
    );
    let ok = n == 50 && ratio < 0.5;
    if s > 300.0 {
        return Err(format!("{detail}; runtime exceeds 300 s"));
    }
    check(ok, detail)
}

// ---------------------------------------------------------------- 5

fn criterion_5(ctx: &mut Ctx) -> Outcome {
    let base = ctx.trained().model.clone();
    let start = Instant::now();
    let critic = SyntheticCritic::new(SyntheticMode::Full);
    let pocket = ctx.data.pocket.clone();
    let before = mean_c_bp(&critic, &pocket, &generate_set(&base, GENERATED));
    let mut model = base;
    let cfg = ctx.rl_config(RewardConfig::default_for(RewardKind::R1));
    let report = rl_finetune(&mut model, &critic, &pocket, &piperazine_scaffold(), &ctx.data.val, &cfg).map_err(|e| e.to_string())?;
    ctx.record(RewardKind::R1, &report);
    let after = mean_c_bp(&critic, &pocket, &generate_set(&model, GENERATED));
    let detail = format!(
        "mean C_BP {before:.3} -> {after:.3} (uplift {:+.3}) over {GENERATED} molecules, {} RL epochs, best epoch {}",
        after - before,
        cfg.epochs,
        report.best_epoch
    );
    within(600, start, check(after - before >= 0.15, detail))
}

// ---------------------------------------------------------------- 6

fn scaffold_preserved(mol: &Molecule3D, scaffold: &Scaffold) -> bool {
    let k = scaffold.molecule.atoms.len();
    let unmoved = mol.atoms.len() >= k
        && mol.atoms[..k].iter().zip(&scaffold.molecule.atoms).all(|(a, s): (&Atom, &Atom)| {
            a.element == s.element && a.position.iter().zip(&s.position).all(|(x, y)| x.to_bits() == y.to_bits())
        });
    unmoved && contains_scaffold(&single_bond_graph(mol), scaffold)
}

fn criterion_6(ctx: &mut Ctx) -> Outcome {
    let scaffold = piperazine_scaffold();
    let mols = generate_set(&ctx.trained().model, GENERATED);
    let kept = mols.iter().filter(|m| scaffold_preserved(m, &scaffold)).count();
    check(kept == GENERATED, format!("{kept}/{GENERATED} generated molecules keep the scaffold unmoved"))
}

// ---------------------------------------------------------------- 7

fn crafted_triple(ctx: &Ctx) -> Result<String, String> {
    let a = ctx.data.train[0].without_bonds();
    let b = ctx.data.val[0].without_bonds();
    // Dropping the last atom (a hydrogen) leaves its partner under-valent.
    let mut broken = ctx.data.val[1].without_bonds();
    broken.atoms.pop();
    let training: BTreeSet<String> = [canonical_smiles(&ctx.data.train[0]).ok_or("training SMILES")?].into();
    let m = set_metrics(&[a, b, broken], &training);
    let want = (2, 2, 1);
    let got = (m.n_valid, m.n_unique, m.n_novel);
    if got != want || m.validity != 2.0 / 3.0 || m.uniqueness != 1.0 || m.novelty != 0.5 {
        return Err(format!("crafted triple {:?} {got:?}", (m.validity, m.uniqueness, m.novelty)));
    }
    Ok("crafted triple (2/3, 1, 1/2) exact".into())
}

fn criterion_7(ctx: &mut Ctx) -> Outcome {
    let triple = crafted_triple(ctx)?;
    let training: BTreeSet<String> = ctx.data.train.iter().filter_map(canonical_smiles).collect();
    let mols = generate_set(&ctx.trained().model, GENERATED);
    let m = set_metrics(&mols, &training);
    let detail = format!(
        "{triple}; generated validity {:.3} ({}/{}), uniqueness {:.3}, novelty {:.3}",
        m.validity, m.n_valid, m.n_generated, m.uniqueness, m.novelty
    );
    check(m.validity >= 0.8 && m.uniqueness >= 0.9, detail)
}

// ---------------------------------------------------------------- 8

fn criterion_8(ctx: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let cfg = ctx.cfg.critic_config();
    let (_, report) = train_classifier(&ctx.data.pairs, &cfg).map_err(|e| e.to_string())?;
    let auc = report.test_auroc.ok_or("test split has one class")?;
    let detail = format!(
        "test AUROC {auc:.3} on {} held-out pairs (train {:.3}, {} pairs)",
        report.n_test, report.train_auroc, report.n_train
    );
    within(300, start, check(auc >= 0.95, detail))
}

// ---------------------------------------------------------------- 9

fn criterion_9(ctx: &mut Ctx) -> Outcome {
    let base = ctx.trained().model.clone();
    let start = Instant::now();
    let critic = SyntheticCritic::new(SyntheticMode::BpOnly);
    let cfg = AblationConfig::default_kinds(ctx.rl_config(RewardConfig::default_for(RewardKind::R1)), GENERATED, GENERATE_SEED);
    let pocket = ctx.data.pocket.clone();
    let report = ablation_run(&base, &critic, &pocket, &piperazine_scaffold(), &ctx.data.val, &cfg);
    for (kind, r) in &report.rl_reports {
        ctx.record(*kind, r);
    }
    if let Some((kind, e)) = report.failures.iter().next() {
        return Err(format!("{kind} failed: {e}"));
    }
    let mean = |k| report.mean(k, "C_BP").unwrap_or(f64::NAN);
    let (r1, r2, r3) = (mean(RewardKind::R1), mean(RewardKind::R2), mean(RewardKind::R3));
    let detail = format!("mean final C_BP R1 {r1:.3}, R2 {r2:.3}, R3 {r3:.3}; R1 - R3 = {:+.3}", r1 - r3);
    within(1200, start, check(r1 - r3 >= 0.05, detail))
}

// ---------------------------------------------------------------- 10

fn criterion_10(ctx: &mut Ctx) -> Outcome {
    if ctx.reward_ranges.is_empty() {
        // Run alone: one short fine-tune per bounded reward kind.
        let base = ctx.trained().model.clone();
        let critic = SyntheticCritic::new(SyntheticMode::Full);
        let pocket = ctx.data.pocket.clone();
        for kind in [RewardKind::R1, RewardKind::R2] {
            let mut model = base.clone();
            let cfg = RlConfig {
                epochs: 5,
                ..ctx.rl_config(RewardConfig::default_for(kind))
            };
            let r = rl_finetune(&mut model, &critic, &pocket, &piperazine_scaffold(), &[], &cfg).map_err(|e| e.to_string())?;
            ctx.record(kind, &r);
        }
    }
    let bounded: Vec<&(RewardKind, f64, f64)> = ctx.reward_ranges.iter().filter(|(k, _, _)| *k != RewardKind::R3).collect();
    let lo = bounded.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = bounded.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let detail = format!("{} R1/R2 runs, step rewards in [{lo:.4}, {hi:.4}]", bounded.len());
    check(!bounded.is_empty() && lo >= 0.75 && hi <= 1.75, detail)
}

// ---------------------------------------------------------------- 11

fn report_bytes(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let dir = root.join("reports");
    let mut out = Vec::new();
    for e in fs::read_dir(&dir).map_err(|e| format!("{}: {e}", dir.display()))? {
        let p = e.map_err(|e| e.to_string())?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            let name = p.file_name().expect("file name").to_string_lossy().into_owned();
            out.push((name, fs::read(&p).map_err(|e| e.to_string())?));
        }
    }
    out.sort();
    Ok(out)
}

fn criterion_11(ctx: &mut Ctx) -> Outcome {
    let tmp: PathBuf = std::env::temp_dir().join(format!("molrl-acceptance-{}", std::process::id()));
    let mut runs = Vec::new();
    for i in 0..2 {
        let root = tmp.join(format!("run{i}"));
        let _ = fs::remove_dir_all(&root);
        let t = Instant::now();
        run_all(&ctx.cfg, &root).map_err(|e| format!("smoke run {i}: {e}"))?;
        runs.push((report_bytes(&root)?, t.elapsed().as_secs_f64()));
    }
    let _ = fs::remove_dir_all(&tmp);
    let (a, b) = (&runs[0].0, &runs[1].0);
    let differing: Vec<&str> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let detail = format!(
        "{} CSV reports, runs took {:.0} s and {:.0} s{}",
        a.len(),
        runs[0].1,
        runs[1].1,
        if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) }
    );
    check(!a.is_empty() && a.len() == b.len() && differing.is_empty(), detail)
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [fn(&mut Ctx) -> Outcome; 11] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
    ];
    let selected: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut ctx = Ctx::new();
    let mut failed = Vec::new();
    for (i, f) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut ctx))).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let s = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n}: PASS ({s:.1} s) {d}"),
            Err(d) => {
                println!("criterion {n}: FAIL ({s:.1} s) {d}");
                failed.push(n);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
        return ExitCode::SUCCESS;
    }
    println!("acceptance: failed {failed:?}");
    if std::env::var("MOLRL_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
