//! Episode records and the per-episode policy objective.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{RewardBreakdown, RlError};
use crate::chem::Molecule3D;
use crate::critic::CriticScores;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Atoms placed beyond the scaffold before this step.
    pub step: usize,
    pub state_digest: String,
    pub distributions_digest: String,
    pub type_nll: f64,
    pub dist_nll: f64,
    pub reward: RewardBreakdown,
}

/// One record per placed atom. A closing STOP decision contributes its
/// type NLL through `stop_nll`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepRecord>,
    pub stop_nll: Option<f64>,
    pub molecule: Molecule3D,
    pub final_scores: CriticScores,
}

impl EpisodeTrace {
    pub fn nll_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.type_nll + s.dist_nll).sum::<f64>() + self.stop_nll.unwrap_or(0.0)
    }

    pub fn reward_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.reward.total).sum()
    }

    /// Number of NLL terms (placed atoms plus STOP).
    pub fn decisions(&self) -> usize {
        self.steps.len() + usize::from(self.stop_nll.is_some())
    }
}

/// Σ_t (type NLL + distance NLL − reward), plus the STOP term.
pub fn policy_objective(trace: &EpisodeTrace) -> Result<f64, RlError> {
    if trace.steps.is_empty() && trace.stop_nll.is_none() {
        return Err(RlError::EmptyTrace);
    }
    let mut total = 0.0;
    for s in &trace.steps {
        total += s.type_nll + s.dist_nll - s.reward.total;
    }
    Ok(total + trace.stop_nll.unwrap_or(0.0))
}

fn short_hex(h: Sha256) -> String {
    hex::encode(&h.finalize()[..8])
}

pub fn state_digest(mol: &Molecule3D) -> String {
    let mut h = Sha256::new();
    for a in &mol.atoms {
        h.update([a.element.index() as u8]);
        for c in a.position {
            h.update(c.to_le_bytes());
        }
    }
    short_hex(h)
}

pub fn distributions_digest(type_probs: &[f64], distances: &[(usize, Vec<f64>)]) -> String {
    let mut h = Sha256::new();
    for p in type_probs {
        h.update(p.to_le_bytes());
    }
    for (j, probs) in distances {
        h.update((*j as u64).to_le_bytes());
        for p in probs {
            h.update(p.to_le_bytes());
        }
    }
    short_hex(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::RewardKind;

    fn rec(step: usize, t: f64, d: f64, r: f64) -> StepRecord {
        StepRecord {
            step,
            state_digest: String::new(),
            distributions_digest: String::new(),
            type_nll: t,
            dist_nll: d,
            reward: RewardBreakdown {
                total: r,
                bp_term: 0.0,
                ea_term: 0.0,
                sa_term: 0.0,
                step,
                kind: RewardKind::R1,
            },
        }
    }

    fn trace(steps: Vec<StepRecord>, stop: Option<f64>) -> EpisodeTrace {
        EpisodeTrace {
            steps,
            stop_nll: stop,
            molecule: Molecule3D::new(),
            final_scores: CriticScores {
                c_bp: 0.5,
                p_inactive: 0.5,
                c_ea_raw: 0.0,
                c_ea: 0.5,
                c_sa: 0.0,
            },
        }
    }

    #[test]
    fn two_step_hand_sum() {
        let t = trace(vec![rec(0, 0.7, 3.25, 1.1), rec(1, 0.2, 2.5, 0.9)], Some(0.05));
        let hand = (0.7 + 3.25 - 1.1) + (0.2 + 2.5 - 0.9) + 0.05;
        assert!((policy_objective(&t).unwrap() - hand).abs() < 1e-12);
        assert!((policy_objective(&t).unwrap() - (t.nll_sum() - t.reward_sum())).abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_give_nll() {
        let t = trace(vec![rec(0, 0.5, 1.0, 0.0), rec(1, 0.25, 2.0, 0.0)], None);
        assert_eq!(policy_objective(&t).unwrap(), t.nll_sum());
    }

    #[test]
    fn higher_rewards_lower_objective() {
        let lo = trace(vec![rec(0, 0.5, 1.0, 0.8)], None);
        let hi = trace(vec![rec(0, 0.5, 1.0, 1.2)], None);
        assert!(policy_objective(&hi).unwrap() < policy_objective(&lo).unwrap());
    }

    #[test]
    fn empty_trace_rejected() {
        assert_eq!(policy_objective(&trace(vec![], None)), Err(RlError::EmptyTrace));
        assert!(policy_objective(&trace(vec![], Some(0.1))).is_ok());
    }
}
