//! Pipeline stages over a run directory.
//!
//! ```text
//! <run>/config.resolved   sorted key = value lines of the last stage run
//! <run>/config.hash       sha256 of config.resolved
//! <run>/data/             train/, val/, pairs/, pocket.xyz
//! <run>/checkpoints/      actor.json, actor_rl.json, critic.json
//! <run>/generated/<src>/  mol0000.xyz ...
//! <run>/reports/          CSV tables and plot data
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ConfigError, RunConfig, ScorerKind};
use super::evaluate::{compare, evaluate, histogram, metric_range, EvaluateOptions, EvaluationReport};
use super::synth::{piperazine_scaffold, synth_dataset, DatasetSizes, SynthOptions};
use crate::actor::{generate, train_supervised, ActorError, ActorModel, GenerateOptions, TrainOptions};
use crate::chem::{canonical_smiles, molecules_isomorphic, read_xyz, write_xyz, ChemError, Molecule3D, Scaffold};
use crate::critic::dataset::{pocket_from_xyz, pocket_to_xyz};
use crate::critic::{
    hyperparameter_grid, read_pairs, train_classifier, write_pairs, Critic, CriticError, GatCritic, PocketGraph,
    SyntheticCritic,
};
use crate::descriptors::set_metrics::validated_smiles;
use crate::nn::{Checkpoint, NnError};
use crate::rl::{ablation_run, rl_finetune, write_curves_csv, AblationConfig, RewardConfig, RewardKind, RlError, METRICS};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("missing input {0}; run the stage that produces it first")]
    Missing(PathBuf),
    #[error("no molecules in {0}")]
    Empty(PathBuf),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error(transparent)]
    Critic(#[from] CriticError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

fn io_err(path: &Path, e: impl fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    SynthData,
    TrainActor,
    TrainCritic,
    GridSearch,
    RlFinetune,
    Generate,
    Score,
    Evaluate,
    Ablate,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::SynthData,
        Stage::TrainActor,
        Stage::TrainCritic,
        Stage::GridSearch,
        Stage::RlFinetune,
        Stage::Generate,
        Stage::Score,
        Stage::Evaluate,
        Stage::Ablate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::SynthData => "synth-data",
            Stage::TrainActor => "train-actor",
            Stage::TrainCritic => "train-critic",
            Stage::GridSearch => "grid-search",
            Stage::RlFinetune => "rl-finetune",
            Stage::Generate => "generate",
            Stage::Score => "score",
            Stage::Evaluate => "evaluate",
            Stage::Ablate => "ablate",
        }
    }
}

/// Paths inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    /// Creates the layout and records the resolved config and its hash.
    pub fn prepare(root: &Path, cfg: &RunConfig) -> Result<Self, PipelineError> {
        for sub in ["data", "checkpoints", "generated", "reports"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
        }
        let resolved = cfg.resolved();
        let hash = cfg.hash();
        write_text(&root.join("config.resolved"), &resolved)?;
        write_text(&root.join("config.hash"), &format!("{hash}\n"))?;
        log::info!("config hash {hash}");
        for line in resolved.lines() {
            log::debug!("config {line}");
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }
    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(name)
    }
    pub fn generated(&self, source: &str) -> PathBuf {
        self.root.join("generated").join(source)
    }
    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn require(path: PathBuf) -> Result<PathBuf, PipelineError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(PipelineError::Missing(path))
    }
}

/// Replaces `dir` with numbered XYZ files.
pub fn write_molecules(dir: &Path, mols: &[Molecule3D]) -> Result<(), PipelineError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (i, m) in mols.iter().enumerate() {
        let p = dir.join(format!("mol{i:04}.xyz"));
        write_xyz(&p, m).map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}

/// Every `.xyz` file in `dir`, sorted by name, with its file stem.
pub fn read_molecules(dir: &Path) -> Result<Vec<(String, Molecule3D)>, PipelineError> {
    let dir = require(dir.to_path_buf())?;
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| io_err(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "xyz"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        out.push((stem, read_xyz(&p)?));
    }
    Ok(out)
}

/// The configured scaffold with template coordinates.
pub fn scaffold_for(cfg: &RunConfig) -> Result<Scaffold, PipelineError> {
    let template = piperazine_scaffold();
    let wanted = Scaffold::from_smiles(&cfg.scaffold)?;
    if !molecules_isomorphic(&wanted.molecule, &template.molecule) {
        return Err(ConfigError::Invalid(format!(
            "scaffold {:?} has no coordinate template; only piperazine (C1CNCCN1) is bundled",
            cfg.scaffold
        ))
        .into());
    }
    Ok(template)
}

fn load_actor(path: PathBuf) -> Result<ActorModel, PipelineError> {
    Ok(ActorModel::from_checkpoint(&Checkpoint::load(&require(path)?)?)?)
}

fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), PipelineError> {
    Ok(ck.save(path)?)
}

pub fn load_critic(cfg: &RunConfig, dir: &RunDir) -> Result<Box<dyn Critic>, PipelineError> {
    Ok(match cfg.scorer.kind {
        ScorerKind::Synthetic => Box::new(SyntheticCritic::new(cfg.scorer.mode)),
        ScorerKind::Trained => {
            let ck = Checkpoint::load(&require(dir.checkpoint("critic.json"))?)?;
            Box::new(GatCritic::from_checkpoint(&ck)?)
        }
    })
}

pub fn load_pocket(cfg: &RunConfig, dir: &RunDir) -> Result<PocketGraph, PipelineError> {
    let p = require(dir.data().join("pocket.xyz"))?;
    let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
    Ok(pocket_from_xyz(&text, cfg.pocket.cutoff)?)
}

fn corpus(dir: &RunDir, split: &str) -> Result<Vec<Molecule3D>, PipelineError> {
    Ok(read_molecules(&dir.data().join(split))?.into_iter().map(|(_, m)| m).collect())
}

pub fn synth_data(cfg: &RunConfig, dir: &RunDir) -> Result<(), PipelineError> {
    let sizes = DatasetSizes {
        train: cfg.data.train_size,
        val: cfg.data.val_size,
        pairs: cfg.data.pairs,
    };
    let opts = SynthOptions {
        max_carbon_groups: cfg.data.max_carbon_groups,
        reach: cfg.data.reach,
    };
    let ds = synth_dataset(cfg.seed, &sizes, &opts, cfg.pocket.acidic, cfg.pocket.cutoff);
    let data = dir.data();
    write_molecules(&data.join("train"), &ds.train)?;
    write_molecules(&data.join("val"), &ds.val)?;
    let pairs = data.join("pairs");
    if pairs.exists() {
        fs::remove_dir_all(&pairs).map_err(|e| io_err(&pairs, e))?;
    }
    write_pairs(&pairs, &ds.pairs)?;
    write_text(&data.join("pocket.xyz"), &pocket_to_xyz(&ds.pocket))?;
    log::info!(
        "wrote {} train, {} val molecules and {} pairs",
        ds.train.len(),
        ds.val.len(),
        ds.pairs.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct ActorCurveRow {
    epoch: usize,
    train_nll: f64,
    val_nll: f64,
    lr: f64,
}

pub fn train_actor(cfg: &RunConfig, dir: &RunDir) -> Result<(), PipelineError> {
    let train = corpus(dir, "train")?;
    let val = corpus(dir, "val")?;
    let mut model = ActorModel::new(cfg.actor.clone(), cfg.seed)?;
    let r = train_supervised(&mut model, &train, &val, &TrainOptions::from_config(&cfg.actor, cfg.seed))?;
    let mut rows = vec![ActorCurveRow {
        epoch: 0,
        train_nll: r.initial_train_nll,
        val_nll: r.initial_val_nll,
        lr: cfg.actor.lr,
    }];
    rows.extend(r.epochs.iter().map(|e| ActorCurveRow {
        epoch: e.epoch,
        train_nll: e.train_nll,
        val_nll: e.val_nll,
        lr: e.lr,
    }));
    write_csv(&dir.report("actor_curves.csv"), &rows)?;
    save_checkpoint(&dir.checkpoint("actor.json"), &model.to_checkpoint())?;
    log::info!(
        "actor NLL {:.3} -> {:.3} (best epoch {})",
        r.initial_train_nll,
        r.final_train_nll,
        r.best_epoch
    );
    Ok(())
}

#[derive(Serialize)]
struct CriticLossRow {
    epoch: usize,
    loss: f64,
}

#[derive(Serialize)]
struct AurocRow {
    split: &'static str,
    n: usize,
    auroc: Option<f64>,
}

pub fn train_critic(cfg: &RunConfig, dir: &RunDir) -> Result<(), PipelineError> {
    let pairs = read_pairs(&require(dir.data().join("pairs"))?, cfg.pocket.cutoff)?;
    let (critic, r) = train_classifier(&pairs, &cfg.critic_config())?;
    let losses: Vec<CriticLossRow> = r
        .epoch_loss
        .iter()
        .enumerate()
        .map(|(i, &loss)| CriticLossRow { epoch: i + 1, loss })
        .collect();
    write_csv(&dir.report("critic_curves.csv"), &losses)?;
    write_csv(
        &dir.report("critic_auroc.csv"),
        &[
            AurocRow {
                split: "train",
                n: r.n_train,
                auroc: Some(r.train_auroc),
            },
            AurocRow {
                split: "test",
                n: r.n_test,
                auroc: r.test_auroc,
            },
        ],
    )?;
    save_checkpoint(&dir.checkpoint("critic.json"), &critic.to_checkpoint())?;
    log::info!("critic AUROC train {:.3} test {:?}", r.train_auroc, r.test_auroc);
    Ok(())
}

pub fn grid_search(cfg: &RunConfig, dir: &RunDir) -> Result<(), PipelineError> {
    let pairs = read_pairs(&require(dir.data().join("pairs"))?, cfg.pocket.cutoff)?;
    let g = &cfg.grid;
    let rows = hyperparameter_grid(&g.lrs, &g.heads, &g.dims, g.repeats, &pairs, &cfg.critic_config())?;
    let path = dir.report("grid_search.csv");
    let f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    crate::critic::train::write_grid_csv(&rows, f).map_err(|e| io_err(&path, e))?;
    if let Some(best) = rows.iter().find(|r| r.best) {
        log::info!("best grid row {} test AUROC {:?}", best.name, best.test_auroc);
    }
    Ok(())
}

pub fn rl_stage(cfg: &RunConfig, dir: &RunDir) -> Result<(), PipelineError> {
    let mut model = load_actor(dir.checkpoint("actor.json"))?;
    let critic = load_critic(cfg, dir)?;
    let pocket = load_pocket(cfg, dir)?;
    let val = corpus(dir, "val")?;
    let r = rl_finetune(&mut model, critic.as_ref(), &pocket, &scaffold_for(cfg)?, &val, &cfg.rl_config())?;
    let path = dir.report("rl_curves.csv");
    write_curves_csv(&path, &r.curves).map_err(|e| io_err(&path, e))?;
    save_checkpoint(&dir.checkpoint("actor_rl.json"), &model.to_checkpoint())?;
    log::info!(
        "rl best epoch {} mean C_BP {:.3}; {} episodes aborted",
        r.best_epoch,
        r.best_mean_c_bp,
        r.aborted_episodes
    );
    Ok(())
}

fn actor_for(source: &str, dir: &RunDir) -> Result<ActorModel, PipelineError> {
    load_actor(dir.checkpoint(if source == "rl" { "actor_rl.json" } else { "actor.json" }))
}

/// Seed of the sampling stream; shared by every source so sets are paired.
fn generation_seed(cfg: &RunConfig) -> u64 {
    cfg.seed.wrapping_add(101)
}

pub fn generate_stage(cfg: &RunConfig, dir: &RunDir) -> Result<(), PipelineError> {
    let model = actor_for(&cfg.generate.source, dir)?;
    let scaffold = scaffold_for(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(generation_seed(cfg));
    let opts = GenerateOptions::from_config(&model.config);
    let mols = (0..cfg.generate.count)
        .map(|_| generate(&scaffold, &model, &mut rng, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    write_molecules(&dir.generated(&cfg.generate.source), &mols)?;
    log::info!("generated {} molecules from {}", mols.len(), cfg.generate.source);
    Ok(())
}

#[derive(Serialize)]
struct ScoreRow {
    id: String,
    smiles: Option<String>,
    #[serde(rename = "C_BP")]
    c_bp: Option<f64>,
    p_inactive: Option<f64>,
    #[serde(rename = "C_EA_raw")]
    c_ea_raw: Option<f64>,
    #[serde(rename = "C_EA")]
    c_ea: Option<f64>,
    #[serde(rename = "C_SA")]
    c_sa: Option<f64>,
    error: Option<String>,
}

pub fn score_stage(cfg: &RunConfig, dir: &RunDir) -> Result<(), PipelineError> {
    let src = &cfg.generate.source;
    let path = dir.generated(src);
    let mols = read_molecules(&path)?;
    if mols.is_empty() {
        return Err(PipelineError::Empty(path));
    }
    let critic = load_critic(cfg, dir)?;
    let pocket = load_pocket(cfg, dir)?;
    let rows: Vec<ScoreRow> = mols
        .iter()
        .map(|(id, m)| {
            let smiles = validated_smiles(m);
            match critic.score(&pocket, m) {
                Ok(s) => ScoreRow {
                    id: id.clone(),
                    smiles,
                    c_bp: Some(s.c_bp),
                    p_inactive: Some(s.p_inactive),
                    c_ea_raw: Some(s.c_ea_raw),
                    c_ea: Some(s.c_ea),
                    c_sa: Some(s.c_sa),
                    error: None,
                },
                Err(e) => ScoreRow {
                    id: id.clone(),
                    smiles,
                    c_bp: None,
                    p_inactive: None,
                    c_ea_raw: None,
                    c_ea: None,
                    c_sa: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    write_csv(&dir.report(&format!("scores_{src}.csv")), &rows)
}

#[derive(Serialize)]
struct SetMetricsRow {
    validity: f64,
    uniqueness: f64,
    novelty: f64,
    n_generated: usize,
    n_valid: usize,
    n_unique: usize,
    n_novel: usize,
    empty_denominators: String,
}

fn write_evaluation(dir: &RunDir, src: &str, r: &EvaluationReport) -> Result<(), PipelineError> {
    let m = &r.set_metrics;
    write_csv(&dir.report(&format!("eval_{src}_molecules.csv")), &r.rows)?;
    write_csv(&dir.report(&format!("eval_{src}_summary.csv")), &r.summary)?;
    write_csv(
        &dir.report(&format!("eval_{src}_set_metrics.csv")),
        &[SetMetricsRow {
            validity: m.validity,
            uniqueness: m.uniqueness,
            novelty: m.novelty,
            n_generated: m.n_generated,
            n_valid: m.n_valid,
            n_unique: m.n_unique,
            n_novel: m.n_novel,
            empty_denominators: m.empty_denominators.join(";"),
        }],
    )?;
    write_csv(&dir.report(&format!("eval_{src}_topk.csv")), &r.top_k)?;
    write_csv(&dir.report(&format!("eval_{src}_hist.csv")), &r.histograms)
}

/// Evaluates `generate.source` and, when present, `evaluate.baseline`,
/// plus a comparison table when both exist.
pub fn evaluate_stage(cfg: &RunConfig, dir: &RunDir) -> Result<Vec<(String, EvaluationReport)>, PipelineError> {
    let training: BTreeSet<String> = corpus(dir, "train")?.iter().filter_map(canonical_smiles).collect();
    let critic = load_critic(cfg, dir)?;
    let pocket = load_pocket(cfg, dir)?;
    let opts = EvaluateOptions {
        top_k: cfg.evaluate.top_k,
        bins: cfg.evaluate.bins,
        lipinski: cfg.evaluate.lipinski,
    };
    let mut sources = Vec::new();
    if !cfg.evaluate.baseline.is_empty() && cfg.evaluate.baseline != cfg.generate.source {
        if dir.generated(&cfg.evaluate.baseline).exists() {
            sources.push(cfg.evaluate.baseline.clone());
        } else {
            log::warn!("baseline set {} not generated; skipping comparison", cfg.evaluate.baseline);
        }
    }
    sources.push(cfg.generate.source.clone());
    let mut out = Vec::new();
    for src in sources {
        let path = dir.generated(&src);
        let mols = read_molecules(&path)?;
        if mols.is_empty() {
            return Err(PipelineError::Empty(path));
        }
        let r = evaluate(&mols, &training, critic.as_ref(), &pocket, &opts);
        write_evaluation(dir, &src, &r)?;
        log::info!(
            "{src}: validity {:.3} uniqueness {:.3} novelty {:.3}",
            r.set_metrics.validity,
            r.set_metrics.uniqueness,
            r.set_metrics.novelty
        );
        out.push((src, r));
    }
    if out.len() == 2 {
        write_csv(&dir.report("eval_comparison.csv"), &compare(&out[0].1, &out[1].1))?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct AblationHistRow {
    kind: String,
    metric: String,
    bin_lo: f64,
    bin_hi: f64,
    density: f64,
}

pub fn ablate_stage(cfg: &RunConfig, dir: &RunDir) -> Result<crate::rl::AblationReport, PipelineError> {
    let actor = load_actor(dir.checkpoint("actor.json"))?;
    let critic = load_critic(cfg, dir)?;
    let pocket = load_pocket(cfg, dir)?;
    let val = corpus(dir, "val")?;
    let acfg = AblationConfig {
        rewards: cfg
            .ablation
            .kinds
            .iter()
            .map(|&k| {
                if k == cfg.reward.kind {
                    cfg.reward
                } else {
                    RewardConfig::default_for(k)
                }
            })
            .collect(),
        rl: cfg.rl_config(),
        n_generate: cfg.ablation.count,
        generate_seed: generation_seed(cfg),
    };
    let r = ablation_run(&actor, critic.as_ref(), &pocket, &scaffold_for(cfg)?, &val, &acfg);
    let path = dir.report("ablation.csv");
    crate::rl::write_ablation_csv(&path, &r).map_err(|e| io_err(&path, e))?;
    let mut hist = Vec::new();
    for m in METRICS {
        let all: Vec<f64> = r.values.iter().filter(|(k, _)| k.1 == m).flat_map(|(_, v)| v.clone()).collect();
        let (lo, hi) = metric_range(m, &all);
        let kinds: Vec<RewardKind> = r.values.keys().filter(|k| k.1 == m).map(|k| k.0).collect();
        for kind in kinds {
            for h in histogram(m, &r.values[&(kind, m.to_string())], lo, hi, cfg.evaluate.bins) {
                hist.push(AblationHistRow {
                    kind: kind.to_string(),
                    metric: h.metric,
                    bin_lo: h.bin_lo,
                    bin_hi: h.bin_hi,
                    density: h.density,
                });
            }
        }
    }
    write_csv(&dir.report("ablation_hist.csv"), &hist)?;
    for (kind, rep) in &r.rl_reports {
        let p = dir.report(&format!("ablation_curves_{kind}.csv"));
        write_curves_csv(&p, &rep.curves).map_err(|e| io_err(&p, e))?;
    }
    for (kind, e) in &r.failures {
        log::error!("ablation {kind} failed: {e}");
    }
    Ok(r)
}

/// Prepares the run directory and runs one stage.
pub fn run_stage(stage: Stage, cfg: &RunConfig, root: &Path) -> Result<(), PipelineError> {
    let dir = RunDir::prepare(root, cfg)?;
    log::info!("stage {}", stage.name());
    match stage {
        Stage::SynthData => synth_data(cfg, &dir),
        Stage::TrainActor => train_actor(cfg, &dir),
        Stage::TrainCritic => train_critic(cfg, &dir),
        Stage::GridSearch => grid_search(cfg, &dir),
        Stage::RlFinetune => rl_stage(cfg, &dir),
        Stage::Generate => generate_stage(cfg, &dir),
        Stage::Score => score_stage(cfg, &dir),
        Stage::Evaluate => evaluate_stage(cfg, &dir).map(|_| ()),
        Stage::Ablate => ablate_stage(cfg, &dir).map(|_| ()),
    }
}

/// Every stage in order; generation and scoring run for both the
/// pretrained and the fine-tuned actor.
pub fn run_all(cfg: &RunConfig, root: &Path) -> Result<(), PipelineError> {
    for stage in Stage::ALL {
        match stage {
            Stage::Generate | Stage::Score => {
                for src in ["pretrained", "rl"] {
                    let mut c = cfg.clone();
                    c.generate.source = src.to_string();
                    run_stage(stage, &c, root)?;
                }
            }
            Stage::Evaluate => {
                let mut c = cfg.clone();
                c.generate.source = "rl".into();
                c.evaluate.baseline = "pretrained".into();
                run_stage(stage, &c, root)?;
            }
            _ => run_stage(stage, cfg, root)?,
        }
    }
    Ok(())
}
