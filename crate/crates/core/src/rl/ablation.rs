//! Reward-kind ablation: one fine-tune per reward on shared seeds.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::finetune::score_all;
use super::{rl_finetune, RewardConfig, RewardKind, RlConfig, RlReport};
use crate::actor::{generate, ActorModel, GenerateOptions};
use crate::chem::{perceive_bonds, Molecule3D, Scaffold};
use crate::critic::{Critic, PocketGraph};
use crate::descriptors::drug_likeness;

pub const METRICS: [&str; 5] = ["QED", "ESOL", "SA", "logP", "C_BP"];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub rewards: Vec<RewardConfig>,
    /// Shared by every kind; its `reward` field is replaced per kind.
    pub rl: RlConfig,
    pub n_generate: usize,
    pub generate_seed: u64,
}

impl AblationConfig {
    pub fn default_kinds(rl: RlConfig, n_generate: usize, generate_seed: u64) -> Self {
        Self {
            rewards: RewardKind::ALL.iter().map(|&k| RewardConfig::default_for(k)).collect(),
            rl,
            n_generate,
            generate_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub kind: RewardKind,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub error: Option<String>,
}

impl MetricSummary {
    fn of(kind: RewardKind, metric: &str, xs: &[f64]) -> Self {
        let n = xs.len();
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (mean, std, min, median, max) = if n == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let median = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            };
            (mean, var.sqrt(), sorted[0], median, sorted[n - 1])
        };
        Self {
            kind,
            metric: metric.to_string(),
            n,
            mean,
            std,
            min,
            median,
            max,
            error: None,
        }
    }

    fn failed(kind: RewardKind, metric: &str, error: &str) -> Self {
        Self {
            error: Some(error.to_string()),
            ..Self::of(kind, metric, &[])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    /// kinds × metrics, in config order then `METRICS` order.
    pub rows: Vec<MetricSummary>,
    /// Raw per-molecule values keyed by (kind, metric).
    pub values: BTreeMap<(RewardKind, String), Vec<f64>>,
    pub rl_reports: BTreeMap<RewardKind, RlReport>,
    pub failures: BTreeMap<RewardKind, String>,
}

impl AblationReport {
    pub fn mean(&self, kind: RewardKind, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.metric == metric && r.error.is_none())
            .map(|r| r.mean)
    }
}

/// Descriptor values of the valid molecules and C_BP of every scored one.
pub fn metric_values(
    critic: &dyn Critic,
    pocket: &PocketGraph,
    mols: &[Molecule3D],
) -> BTreeMap<&'static str, Vec<f64>> {
    let mut out: BTreeMap<&'static str, Vec<f64>> = METRICS.iter().map(|&m| (m, Vec::new())).collect();
    for m in mols {
        let p = perceive_bonds(m);
        if p.valid {
            let d = drug_likeness(&p.molecule);
            for (k, v) in [("QED", d.qed), ("ESOL", d.esol), ("SA", d.sa), ("logP", d.logp)] {
                out.get_mut(k).expect("metric").push(v);
            }
        }
    }
    for s in score_all(critic, pocket, mols).into_iter().flatten() {
        out.get_mut("C_BP").expect("metric").push(s.c_bp);
    }
    out
}

fn run_kind(
    actor: &ActorModel,
    critic: &dyn Critic,
    pocket: &PocketGraph,
    scaffold: &Scaffold,
    val: &[Molecule3D],
    rl: &RlConfig,
    cfg: &AblationConfig,
) -> Result<(RlReport, BTreeMap<&'static str, Vec<f64>>), String> {
    let mut model = actor.clone();
    let report = rl_finetune(&mut model, critic, pocket, scaffold, val, rl).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.generate_seed);
    let opts = GenerateOptions::from_config(&model.config);
    let mols = (0..cfg.n_generate)
        .map(|_| generate(scaffold, &model, &mut rng, &opts))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok((report, metric_values(critic, pocket, &mols)))
}

/// Runs every configured reward on a clone of `actor`. A failing kind is
/// recorded and does not stop the others.
pub fn ablation_run(
    actor: &ActorModel,
    critic: &dyn Critic,
    pocket: &PocketGraph,
    scaffold: &Scaffold,
    val: &[Molecule3D],
    cfg: &AblationConfig,
) -> AblationReport {
    let mut report = AblationReport {
        rows: Vec::new(),
        values: BTreeMap::new(),
        rl_reports: BTreeMap::new(),
        failures: BTreeMap::new(),
    };
    for reward in &cfg.rewards {
        let kind = reward.kind;
        let rl = RlConfig {
            reward: *reward,
            ..cfg.rl.clone()
        };
        match run_kind(actor, critic, pocket, scaffold, val, &rl, cfg) {
            Ok((r, values)) => {
                for m in METRICS {
                    report.rows.push(MetricSummary::of(kind, m, &values[m]));
                    report.values.insert((kind, m.to_string()), values[m].clone());
                }
                report.rl_reports.insert(kind, r);
            }
            Err(e) => {
                log::warn!("ablation {kind} failed: {e}");
                for m in METRICS {
                    report.rows.push(MetricSummary::failed(kind, m, &e));
                }
                report.failures.insert(kind, e);
            }
        }
    }
    report
}

pub fn write_ablation_csv(path: &Path, report: &AblationReport) -> Result<(), std::io::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()
}
