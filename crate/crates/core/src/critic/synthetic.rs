//! Synthetic pockets, labeled pairs and a closed-form critic.
//!
//! A pocket's threshold is its number of acidic residues. A ligand is
//! active when its nitrogen count exceeds that threshold, and its
//! affinity is the margin nN − threshold.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    ligand_c_sa, AffinityScaler, Critic, CriticError, CriticScores, LabeledPair, PocketAtom, PocketGraph, ACIDIC,
    RESIDUE_CLASSES,
};
use crate::chem::{Element, Molecule3D};
use crate::pipeline::synth::{try_molecule, SynthOptions};

fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn side_chain_element(residue: usize) -> Element {
    match residue {
        3 | 6 | 15 | 16 | 18 => Element::O,
        1 | 2 | 5 | 8 | 11 | 17 => Element::N,
        4 | 12 => Element::S,
        _ => Element::C,
    }
}

/// A pocket of 6–9 residues on a shell around the origin, `n_acidic` of
/// them acidic. Each residue carries backbone N, C, O plus one side-chain
/// atom.
pub fn synth_pocket(rng: &mut impl Rng, n_acidic: usize, cutoff: f64) -> PocketGraph {
    let n_res = rng.random_range(6..=9).max(n_acidic);
    let others: Vec<usize> = (0..RESIDUE_CLASSES).filter(|c| !ACIDIC.contains(c)).collect();
    let mut types: Vec<usize> = (0..n_res)
        .map(|i| {
            if i < n_acidic {
                ACIDIC[rng.random_range(0..ACIDIC.len())]
            } else {
                others[rng.random_range(0..others.len())]
            }
        })
        .collect();
    // interleave acidic residues with the rest
    for i in (1..types.len()).rev() {
        let j = rng.random_range(0..=i);
        types.swap(i, j);
    }
    let mut atoms = Vec::new();
    for (r, &t) in types.iter().enumerate() {
        let u = random_unit(rng);
        let radius = rng.random_range(5.5..7.0);
        let center = [u[0] * radius, u[1] * radius, u[2] * radius];
        for e in [Element::N, Element::C, Element::O, side_chain_element(t)] {
            let d = random_unit(rng);
            let s = rng.random_range(1.2..1.6);
            atoms.push(PocketAtom {
                element: e,
                position: [center[0] + d[0] * s, center[1] + d[1] * s, center[2] + d[2] * s],
                residue: r,
            });
        }
    }
    PocketGraph::build(types, atoms, cutoff).expect("synthetic pocket is well formed")
}

/// A synthetic ligand with exactly `n_nitrogen` nitrogens.
pub fn ligand_with_nitrogens(rng: &mut impl Rng, n_nitrogen: usize) -> Molecule3D {
    let opts = SynthOptions::default();
    loop {
        if let Some(m) = try_molecule(&opts, rng) {
            if m.count_element(Element::N) == n_nitrogen {
                return m;
            }
        }
    }
}

/// `n` labeled pairs; thresholds 2–3 and nitrogen counts 2–4 give
/// roughly balanced classes.
pub fn synth_pairs(seed: u64, n: usize, pocket_cutoff: f64) -> Vec<LabeledPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let thr = rng.random_range(2..=3);
            let nn = rng.random_range(2..=4);
            let pocket = synth_pocket(&mut rng, thr, pocket_cutoff);
            let ligand = ligand_with_nitrogens(&mut rng, nn);
            LabeledPair {
                id: format!("pair{i:04}"),
                pocket,
                ligand,
                active: nn > thr,
                affinity: Some(nn as f64 - thr as f64),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SyntheticMode {
    /// Binding, affinity and SA components all reported.
    Full,
    /// Only C_BP; C_EA and C_SA are zero.
    BpOnly,
}

/// Closed-form critic that knows the labeling rule:
/// C_BP = σ((nN − threshold − 0.5) / temperature).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCritic {
    pub mode: SyntheticMode,
    pub temperature: f64,
    pub scaler: AffinityScaler,
}

impl SyntheticCritic {
    pub fn new(mode: SyntheticMode) -> Self {
        Self {
            mode,
            temperature: 0.5,
            scaler: AffinityScaler {
                min: -3.0,
                max: 3.0,
                degenerate: false,
            },
        }
    }

    pub fn margin(pocket: &PocketGraph, ligand: &Molecule3D) -> f64 {
        ligand.count_element(Element::N) as f64 - pocket.acidic_count() as f64
    }
}

impl Critic for SyntheticCritic {
    fn score(&self, pocket: &PocketGraph, ligand: &Molecule3D) -> Result<CriticScores, CriticError> {
        if ligand.atoms.is_empty() {
            return Err(CriticError::EmptyLigand);
        }
        let m = Self::margin(pocket, ligand);
        let c_bp = 1.0 / (1.0 + (-(m - 0.5) / self.temperature).exp());
        let (raw, c_ea, c_sa) = match self.mode {
            SyntheticMode::Full => (m, self.scaler.scale(m), ligand_c_sa(ligand)),
            SyntheticMode::BpOnly => (0.0, 0.0, 0.0),
        };
        Ok(CriticScores {
            c_bp,
            p_inactive: 1.0 - c_bp,
            c_ea_raw: raw,
            c_ea,
            c_sa,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_follow_rule_and_are_balanced() {
        let pairs = synth_pairs(11, 60, 8.0);
        let mut active = 0;
        for p in &pairs {
            let m = SyntheticCritic::margin(&p.pocket, &p.ligand);
            assert_eq!(p.active, m > 0.0);
            assert_eq!(p.affinity, Some(m));
            active += usize::from(p.active);
            assert!(p.pocket.atoms.iter().all(|a| a.residue < p.pocket.residue_types.len()));
        }
        assert!((15..=45).contains(&active), "{active} active");
        assert_eq!(synth_pairs(11, 3, 8.0), synth_pairs(11, 3, 8.0));
    }

    #[test]
    fn synthetic_scores() {
        let p = synth_pairs(12, 8, 8.0);
        let full = SyntheticCritic::new(SyntheticMode::Full);
        let bp = SyntheticCritic::new(SyntheticMode::BpOnly);
        for pair in &p {
            let a = full.score(&pair.pocket, &pair.ligand).unwrap();
            let b = bp.score(&pair.pocket, &pair.ligand).unwrap();
            assert_eq!(a.c_bp, b.c_bp);
            assert_eq!(a.c_bp > 0.5, pair.active);
            assert!((a.c_bp + a.p_inactive - 1.0).abs() < 1e-12);
            assert_eq!((b.c_ea, b.c_sa), (0.0, 0.0));
            assert!((0.0..=1.0).contains(&a.c_ea) && (0.0..=1.0).contains(&a.c_sa));
        }
    }
}
