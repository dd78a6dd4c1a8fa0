//! Run configuration: a flat `key = value` file over typed defaults.
//!
//! Keys are dotted paths into [`RunConfig`] (`actor.lr`, `rl.epochs`, ...).
//! Lists are comma separated. Unknown keys and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::actor::ActorConfig;
use crate::critic::{CriticConfig, SyntheticMode};
use crate::rl::{RewardConfig, RewardKind, RlConfig};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {0:?} set twice")]
    Duplicate(String),
    #[error("config key {key:?}: cannot parse {value:?} as {expected}")]
    Value {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    pub train_size: usize,
    pub val_size: usize,
    pub pairs: usize,
    pub max_carbon_groups: usize,
    pub reach: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// Closed-form critic of the synthetic labeling rule.
    Synthetic,
    /// The graph-attention critic from `checkpoints/critic.json`.
    Trained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSettings {
    pub kind: ScorerKind,
    pub mode: SyntheticMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PocketSettings {
    /// Acidic residues in the target pocket; the synthetic binding threshold.
    pub acidic: usize,
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlSettings {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub batch_size: usize,
    pub candidates: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSettings {
    pub count: usize,
    /// `pretrained` or `rl`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSettings {
    pub top_k: usize,
    pub bins: usize,
    /// Rank and plot only molecules passing the modified Lipinski filter.
    pub lipinski: bool,
    /// Generated set compared against `generate.source`; empty disables.
    pub baseline: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub lrs: Vec<f64>,
    pub heads: Vec<usize>,
    pub dims: Vec<usize>,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSettings {
    pub kinds: Vec<RewardKind>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Only the bundled piperazine template has coordinates.
    pub scaffold: String,
    pub data: DataSettings,
    pub actor: ActorConfig,
    pub critic: CriticConfig,
    pub scorer: ScorerSettings,
    pub pocket: PocketSettings,
    pub reward: RewardConfig,
    pub rl: RlSettings,
    pub generate: GenerateSettings,
    pub evaluate: EvaluateSettings,
    pub grid: GridSettings,
    pub ablation: AblationSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rl = RlConfig::default();
        Self {
            seed: 7,
            scaffold: "C1CNCCN1".into(),
            data: DataSettings {
                train_size: 50,
                val_size: 10,
                pairs: 200,
                max_carbon_groups: 5,
                reach: 3.5,
            },
            actor: ActorConfig::toy(),
            critic: CriticConfig::default(),
            scorer: ScorerSettings {
                kind: ScorerKind::Synthetic,
                mode: SyntheticMode::Full,
            },
            pocket: PocketSettings {
                acidic: 2,
                cutoff: 8.0,
            },
            reward: RewardConfig::default_for(RewardKind::R1),
            rl: RlSettings {
                epochs: rl.epochs,
                episodes_per_epoch: rl.episodes_per_epoch,
                batch_size: rl.batch_size,
                candidates: rl.candidates,
                lr: rl.lr,
            },
            generate: GenerateSettings {
                count: 200,
                source: "rl".into(),
            },
            evaluate: EvaluateSettings {
                top_k: 100,
                bins: 20,
                lipinski: true,
                baseline: "pretrained".into(),
            },
            grid: GridSettings {
                lrs: vec![1e-4, 1e-3],
                heads: vec![2, 4],
                dims: vec![35, 70],
                repeats: 1,
            },
            ablation: AblationSettings {
                kinds: RewardKind::ALL.to_vec(),
                count: 200,
            },
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), v.clone());
        }
    }
}

fn unflatten(flat: &BTreeMap<String, Value>) -> Value {
    let mut root = Map::new();
    for (key, v) in flat {
        let parts: Vec<&str> = key.split('.').collect();
        let mut cur = &mut root;
        for p in &parts[..parts.len() - 1] {
            cur = cur
                .entry(p.to_string())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("nested object");
        }
        cur.insert(parts[parts.len() - 1].to_string(), v.clone());
    }
    Value::Object(root)
}

fn parse_scalar(key: &str, text: &str, like: &Value) -> Result<Value, ConfigError> {
    let bad = |expected| ConfigError::Value {
        key: key.to_string(),
        value: text.to_string(),
        expected,
    };
    let t = text.trim();
    Ok(match like {
        Value::Bool(_) => Value::Bool(t.parse().map_err(|_| bad("a boolean"))?),
        Value::Number(n) if n.is_u64() => Value::Number(t.parse::<u64>().map_err(|_| bad("a non-negative integer"))?.into()),
        Value::Number(n) if n.is_i64() => Value::Number(t.parse::<i64>().map_err(|_| bad("an integer"))?.into()),
        Value::Number(_) => {
            let x: f64 = t.parse().map_err(|_| bad("a number"))?;
            Value::Number(Number::from_f64(x).ok_or_else(|| bad("a finite number"))?)
        }
        _ => Value::String(t.trim_matches('"').to_string()),
    })
}

fn parse_value(key: &str, text: &str, like: &Value) -> Result<Value, ConfigError> {
    match like {
        Value::Array(items) => {
            let elem = items.first().cloned().unwrap_or(Value::String(String::new()));
            text.split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_scalar(key, s, &elem))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Array)
        }
        _ => parse_scalar(key, text, like),
    }
}

fn show(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(show).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_assignments(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn flat(&self) -> BTreeMap<String, Value> {
        let mut out = BTreeMap::new();
        flatten("", &serde_json::to_value(self).expect("config serializes"), &mut out);
        out
    }

    /// Applies assignments in order. Within one batch a key may appear once.
    pub fn with_assignments(&self, assignments: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut flat = self.flat();
        let mut seen = std::collections::BTreeSet::new();
        for (k, v) in assignments {
            if !seen.insert(k.as_str()) {
                return Err(ConfigError::Duplicate(k.clone()));
            }
            let like = flat.get(k).ok_or_else(|| ConfigError::UnknownKey(k.clone()))?;
            let parsed = parse_value(k, v, like)?;
            flat.insert(k.clone(), parsed);
        }
        let cfg: RunConfig =
            serde_json::from_value(unflatten(&flat)).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the file's assignments, then the overrides.
    pub fn load(file_text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let base = Self::default().with_assignments(&parse_assignments(file_text)?)?;
        base.with_assignments(overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.actor.validate().map_err(|e| inv(&e))?;
        self.critic.validate().map_err(|e| inv(&e))?;
        self.rl_config().validate().map_err(|e| inv(&e))?;
        if self.data.train_size == 0 {
            return Err(ConfigError::Invalid("data.train_size must be positive".into()));
        }
        if !["pretrained", "rl"].contains(&self.generate.source.as_str()) {
            return Err(ConfigError::Invalid(format!(
                "generate.source must be pretrained or rl, got {:?}",
                self.generate.source
            )));
        }
        if self.evaluate.bins == 0 {
            return Err(ConfigError::Invalid("evaluate.bins must be positive".into()));
        }
        Ok(())
    }

    pub fn rl_config(&self) -> RlConfig {
        RlConfig {
            epochs: self.rl.epochs,
            episodes_per_epoch: self.rl.episodes_per_epoch,
            batch_size: self.rl.batch_size,
            candidates: self.rl.candidates,
            lr: self.rl.lr,
            seed: self.seed,
            reward: self.reward,
        }
    }

    pub fn critic_config(&self) -> CriticConfig {
        CriticConfig {
            seed: self.seed,
            pocket_cutoff: self.pocket.cutoff,
            ..self.critic.clone()
        }
    }

    /// Sorted `key = value` lines; the input to [`RunConfig::hash`].
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.flat() {
            let _ = writeln!(out, "{k} = {}", show(&v));
        }
        out
    }

    pub fn hash(&self) -> String {
        crate::config_hash(&self.resolved())
    }
}
