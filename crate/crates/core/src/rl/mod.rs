//! Reward functions, episode traces and critic-guided fine-tuning.

pub mod ablation;
pub mod finetune;
pub mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::actor::ActorError;
use crate::critic::{CriticError, CriticScores};
use crate::nn::NnError;

pub use ablation::{ablation_run, metric_values, write_ablation_csv, AblationConfig, AblationReport, MetricSummary, METRICS};
pub use finetune::{rl_finetune, rollout, score_all, write_curves_csv, CurvePoint, RlConfig, RlReport};
pub use trace::{policy_objective, EpisodeTrace, StepRecord};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RlError {
    #[error("reward weight {name} = {value} outside [0, 1]")]
    Weight { name: &'static str, value: f64 },
    #[error("critic score {name} = {value} outside [0, 1]")]
    Score { name: &'static str, value: f64 },
    #[error("{kind} reward {value} at step {step} outside [{lo}, {hi}]")]
    RewardBound {
        kind: RewardKind,
        step: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("episode trace is empty")]
    EmptyTrace,
    #[error("invalid RL config: {0}")]
    Config(String),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error(transparent)]
    Critic(#[from] CriticError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RewardKind {
    /// α·C_BP + β·C_EA + (1 − γ·C_SA)
    R1,
    /// α·C_BP + (1 − β·C_SA)
    R2,
    /// α·C_EA + (1 − β·C_SA)
    R3,
}

impl RewardKind {
    pub const ALL: [RewardKind; 3] = [RewardKind::R1, RewardKind::R2, RewardKind::R3];
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardKind::R1 => "R1",
            RewardKind::R2 => "R2",
            RewardKind::R3 => "R3",
        })
    }
}

impl FromStr for RewardKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "R1" => Ok(RewardKind::R1),
            "R2" => Ok(RewardKind::R2),
            "R3" => Ok(RewardKind::R3),
            other => Err(format!("unknown reward kind {other:?} (expected R1, R2 or R3)")),
        }
    }
}

/// Reward weights. R2 and R3 use only `alpha` and `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub kind: RewardKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl RewardConfig {
    pub fn new(kind: RewardKind, alpha: f64, beta: f64, gamma: f64) -> Result<Self, RlError> {
        let c = Self {
            kind,
            alpha,
            beta,
            gamma,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn default_for(kind: RewardKind) -> Self {
        match kind {
            RewardKind::R1 => Self {
                kind,
                alpha: 0.5,
                beta: 0.25,
                gamma: 0.25,
            },
            RewardKind::R2 | RewardKind::R3 => Self {
                kind,
                alpha: 0.75,
                beta: 0.25,
                gamma: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), RlError> {
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(RlError::Weight { name, value });
            }
        }
        Ok(())
    }

    /// Reward range over scores in [0, 1].
    pub fn bounds(&self) -> (f64, f64) {
        match self.kind {
            RewardKind::R1 => (1.0 - self.gamma, 1.0 + self.alpha + self.beta),
            RewardKind::R2 | RewardKind::R3 => (1.0 - self.beta, 1.0 + self.alpha),
        }
    }

    /// The kind's formula on unweighted inputs.
    pub fn formula(&self, bp: f64, ea: f64, sa: f64) -> f64 {
        match self.kind {
            RewardKind::R1 => self.alpha * bp + self.beta * ea + (1.0 - self.gamma * sa),
            RewardKind::R2 => self.alpha * bp + (1.0 - self.beta * sa),
            RewardKind::R3 => self.alpha * ea + (1.0 - self.beta * sa),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    /// Unweighted inputs: C_BP, C_EA, C_SA.
    pub bp_term: f64,
    pub ea_term: f64,
    pub sa_term: f64,
    pub step: usize,
    pub kind: RewardKind,
}

pub fn reward(scores: &CriticScores, cfg: &RewardConfig, step: usize) -> Result<RewardBreakdown, RlError> {
    cfg.validate()?;
    for (name, value) in [("C_BP", scores.c_bp), ("C_EA", scores.c_ea), ("C_SA", scores.c_sa)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(RlError::Score { name, value });
        }
    }
    Ok(RewardBreakdown {
        total: cfg.formula(scores.c_bp, scores.c_ea, scores.c_sa),
        bp_term: scores.c_bp,
        ea_term: scores.c_ea,
        sa_term: scores.c_sa,
        step,
        kind: cfg.kind,
    })
}

/// Errors when a reward falls outside its kind's analytic range.
pub fn check_bounds(r: &RewardBreakdown, cfg: &RewardConfig) -> Result<(), RlError> {
    let (lo, hi) = cfg.bounds();
    if r.total < lo - 1e-12 || r.total > hi + 1e-12 || !r.total.is_finite() {
        return Err(RlError::RewardBound {
            kind: r.kind,
            step: r.step,
            value: r.total,
            lo,
            hi,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(bp: f64, ea: f64, sa: f64) -> CriticScores {
        CriticScores {
            c_bp: bp,
            p_inactive: 1.0 - bp,
            c_ea_raw: ea,
            c_ea: ea,
            c_sa: sa,
        }
    }

    #[test]
    fn reward_examples() {
        let r1 = RewardConfig::default_for(RewardKind::R1);
        assert_eq!(reward(&scores(1.0, 1.0, 0.0), &r1, 0).unwrap().total, 1.75);
        assert_eq!(reward(&scores(0.0, 0.0, 1.0), &r1, 0).unwrap().total, 0.75);
        let r2 = RewardConfig::default_for(RewardKind::R2);
        assert!((reward(&scores(0.8, 0.3, 0.4), &r2, 0).unwrap().total - 1.5).abs() < 1e-15);
        let r3 = RewardConfig::default_for(RewardKind::R3);
        assert_eq!(reward(&scores(1.0, 0.0, 0.0), &r3, 0).unwrap().total, 1.0);
    }

    #[test]
    fn weights_and_scores_validated() {
        assert!(matches!(
            RewardConfig::new(RewardKind::R1, 1.5, 0.0, 0.0),
            Err(RlError::Weight { name: "alpha", .. })
        ));
        let r1 = RewardConfig::default_for(RewardKind::R1);
        assert!(matches!(reward(&scores(1.2, 0.0, 0.0), &r1, 0), Err(RlError::Score { .. })));
    }

    #[test]
    fn default_bounds() {
        for k in RewardKind::ALL {
            assert_eq!(RewardConfig::default_for(k).bounds(), (0.75, 1.75));
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("r2".parse::<RewardKind>(), Ok(RewardKind::R2));
        assert!("R4".parse::<RewardKind>().is_err());
        assert_eq!(RewardKind::R3.to_string(), "R3");
    }
}
