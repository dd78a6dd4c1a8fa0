//! Critic-guided fine-tuning of the actor.
//!
//! Each step of an episode draws `candidates` actions (type plus grid
//! position, or STOP) from the current policy and keeps the one whose
//! resulting state the critic rewards most; ties keep the earliest draw.
//! The update then minimizes the policy objective of the kept episodes,
//! where rewards enter as constants.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trace::{distributions_digest, state_digest};
use super::{check_bounds, policy_objective, reward, EpisodeTrace, RewardBreakdown, RewardConfig, RewardKind, RlError, StepRecord};
use crate::actor::generate::{place_atom, sample_type};
use crate::actor::train::{mean_nll, prepare};
use crate::actor::{ActorModel, PartialState, PlacementDistributions, STOP};
use crate::chem::{Element, Molecule3D, Scaffold};
use crate::critic::{Critic, CriticScores, PocketGraph};
use crate::nn::{Adam, Gradients, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    /// Episodes per optimizer update.
    pub batch_size: usize,
    /// Actions drawn per step; 1 disables reward-guided selection.
    pub candidates: usize,
    pub lr: f64,
    pub seed: u64,
    pub reward: RewardConfig,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            episodes_per_epoch: 8,
            batch_size: 2,
            candidates: 4,
            lr: 1e-3,
            seed: 0,
            reward: RewardConfig::default_for(RewardKind::R1),
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        self.reward.validate()?;
        for (name, v) in [
            ("epochs", self.epochs),
            ("episodes_per_epoch", self.episodes_per_epoch),
            ("batch_size", self.batch_size),
            ("candidates", self.candidates),
        ] {
            if v == 0 {
                return Err(RlError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(RlError::Config(format!("lr must be non-negative, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    /// Mean per-step NLL of the epoch's episodes.
    pub train_nll: f64,
    /// Mean per-step NLL on the validation set after the update.
    pub val_nll: Option<f64>,
    pub mean_reward: f64,
    #[serde(rename = "mean_C_BP")]
    pub mean_c_bp: f64,
    pub min_reward: f64,
    pub max_reward: f64,
    pub aborted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlReport {
    pub curves: Vec<CurvePoint>,
    /// Epoch whose rollout parameters were retained.
    pub best_epoch: usize,
    pub best_mean_c_bp: f64,
    pub aborted_episodes: usize,
}

/// Per-element distance distributions of one encoded state, filled lazily.
type DistCache = BTreeMap<usize, Vec<(usize, Vec<f64>)>>;

enum Action {
    Stop,
    Place(PartialState, String),
}

/// One episode from the scaffold. Errors from the critic or a reward
/// bound violation end the episode with that error.
pub fn rollout(
    model: &ActorModel,
    critic: &dyn Critic,
    pocket: &PocketGraph,
    scaffold: &Scaffold,
    cfg: &RlConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeTrace, RlError> {
    let mut state = PartialState::from_scaffold(&scaffold.molecule);
    let mut kept: Vec<(String, String, RewardBreakdown)> = Vec::new();
    let mut stopped = false;
    let acfg = &model.config;
    while state.molecule.atoms.len() < acfg.max_atoms {
        let step = state.step();
        let mut enc = model.encode_state(&state)?;
        let mut cache = DistCache::new();
        let mut best: Option<(RewardBreakdown, Action)> = None;
        for _ in 0..cfg.candidates {
            let class = sample_type(&enc.type_probs, rng);
            let (scores, action) = if class == STOP {
                (critic.score(pocket, &state.molecule)?, Action::Stop)
            } else {
                let next = Element::from_index(class).expect("element class");
                if !cache.contains_key(&class) {
                    cache.insert(class, model.distance_probs(&mut enc, next)?);
                }
                let distances = cache[&class].clone();
                let digest = distributions_digest(&enc.type_probs, &distances);
                let d = PlacementDistributions {
                    type_probs: enc.type_probs.clone(),
                    next,
                    distances,
                };
                let s = place_atom(&state, &d, acfg, rng);
                (critic.score(pocket, &s.molecule)?, Action::Place(s, digest))
            };
            let r = reward(&scores, &cfg.reward, step)?;
            check_bounds(&r, &cfg.reward)?;
            if best.as_ref().is_none_or(|(b, _)| r.total > b.total) {
                best = Some((r, action));
            }
        }
        let (r, action) = best.expect("at least one candidate");
        match action {
            Action::Stop => {
                stopped = true;
                break;
            }
            Action::Place(next, digest) => {
                kept.push((state_digest(&state.molecule), digest, r));
                state = next;
            }
        }
    }
    let final_scores = critic.score(pocket, &state.molecule)?;
    let nll = model.evaluate_trajectory(&state.molecule, state.scaffold_len, stopped)?;
    let steps = kept
        .into_iter()
        .zip(&nll.per_step)
        .enumerate()
        .map(|(step, ((sd, dd, reward), &(type_nll, dist_nll)))| StepRecord {
            step,
            state_digest: sd,
            distributions_digest: dd,
            type_nll,
            dist_nll,
            reward,
        })
        .collect();
    Ok(EpisodeTrace {
        steps,
        stop_nll: if stopped { nll.per_step.last().map(|p| p.0) } else { None },
        molecule: state.molecule,
        final_scores,
    })
}

/// Gradient of the batch-mean policy objective.
fn batch_gradients(model: &ActorModel, traces: &[&EpisodeTrace], scaffold_len: usize) -> Result<Gradients, RlError> {
    let mut acc = Gradients::empty(model.store.len());
    for t in traces {
        let mut tape = Tape::new(&model.store);
        let l = model.trajectory_loss(&mut tape, &t.molecule, scaffold_len, t.stop_nll.is_some())?;
        let g = tape.backward(l.total)?;
        acc.accumulate(&g, 1.0 / traces.len() as f64);
    }
    Ok(acc)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Fine-tunes `model` in place and leaves it holding the parameters whose
/// rollouts had the highest mean final C_BP (later epochs win ties).
pub fn rl_finetune(
    model: &mut ActorModel,
    critic: &dyn Critic,
    pocket: &PocketGraph,
    scaffold: &Scaffold,
    val: &[Molecule3D],
    cfg: &RlConfig,
) -> Result<RlReport, RlError> {
    cfg.validate()?;
    let val_set = prepare(val)?;
    let mut adam = Adam::new(&model.store, cfg.lr);
    let mut curves = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, crate::nn::ParamStore)> = None;
    let mut aborted_total = 0;
    for epoch in 1..=cfg.epochs {
        let snapshot = model.store.clone();
        let mut traces = Vec::with_capacity(cfg.episodes_per_epoch);
        let mut last_err = None;
        for e in 0..cfg.episodes_per_epoch {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(((epoch - 1) * cfg.episodes_per_epoch + e) as u64);
            match rollout(model, critic, pocket, scaffold, cfg, &mut rng) {
                Ok(t) => traces.push(t),
                Err(err @ RlError::RewardBound { .. }) => return Err(err),
                Err(err) => {
                    log::warn!("epoch {epoch} episode {e} aborted: {err}");
                    last_err = Some(err);
                }
            }
        }
        let aborted = cfg.episodes_per_epoch - traces.len();
        aborted_total += aborted;
        if traces.is_empty() {
            return Err(last_err.expect("episodes were attempted"));
        }
        for t in &traces {
            policy_objective(t)?;
        }
        let train_nll = traces.iter().map(|t| t.nll_sum()).sum::<f64>() / traces.iter().map(|t| t.decisions()).sum::<usize>().max(1) as f64;
        let rewards = || traces.iter().flat_map(|t| t.steps.iter().map(|s| s.reward.total));
        let mean_c_bp = mean(traces.iter().map(|t| t.final_scores.c_bp));
        let point = CurvePoint {
            epoch,
            train_nll,
            val_nll: None,
            mean_reward: mean(rewards()),
            mean_c_bp,
            min_reward: rewards().fold(f64::NAN, f64::min),
            max_reward: rewards().fold(f64::NAN, f64::max),
            aborted,
        };
        if best.as_ref().is_none_or(|b| mean_c_bp >= b.1) {
            best = Some((epoch, mean_c_bp, snapshot));
        }

        let scaffold_len = scaffold.molecule.atoms.len();
        let refs: Vec<&EpisodeTrace> = traces.iter().filter(|t| t.decisions() > 0).collect();
        for chunk in refs.chunks(cfg.batch_size) {
            let g = batch_gradients(model, chunk, scaffold_len)?;
            adam.step(&mut model.store, &g)?;
        }
        let val_nll = if val_set.is_empty() { None } else { Some(mean_nll(model, &val_set)?) };
        log::debug!(
            "rl epoch {epoch}: nll {train_nll:.4} reward {:.4} C_BP {mean_c_bp:.4}",
            point.mean_reward
        );
        curves.push(CurvePoint { val_nll, ..point });
    }
    let (best_epoch, best_mean_c_bp, store) = best.expect("at least one epoch");
    model.store = store;
    Ok(RlReport {
        curves,
        best_epoch,
        best_mean_c_bp,
        aborted_episodes: aborted_total,
    })
}

/// Scores for each molecule; failures become `None`.
pub fn score_all(critic: &dyn Critic, pocket: &PocketGraph, mols: &[Molecule3D]) -> Vec<Option<CriticScores>> {
    mols.iter()
        .map(|m| match critic.score(pocket, m) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("critic failed: {e}");
                None
            }
        })
        .collect()
}

pub fn write_curves_csv(path: &Path, curves: &[CurvePoint]) -> Result<(), std::io::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for c in curves {
        w.serialize(c)?;
    }
    w.flush()
}
