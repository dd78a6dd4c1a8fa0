//! Validity, uniqueness and novelty of a generated set.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chem::{canonical_smiles, is_valence_complete, perceive_bonds, Molecule3D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub n_generated: usize,
    pub n_valid: usize,
    pub n_unique: usize,
    pub n_novel: usize,
    /// Names of fractions whose denominator was empty (reported as 0).
    pub empty_denominators: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics from per-molecule canonical SMILES (`None` = invalid).
pub fn set_metrics_from_canonical(generated: &[Option<String>], training: &BTreeSet<String>) -> SetMetrics {
    let valid: Vec<&String> = generated.iter().flatten().collect();
    let unique: BTreeSet<&String> = valid.iter().copied().collect();
    let novel = unique.iter().filter(|s| !training.contains(**s)).count();
    let mut flags = Vec::new();
    SetMetrics {
        validity: ratio(valid.len(), generated.len(), "validity", &mut flags),
        uniqueness: ratio(unique.len(), valid.len(), "uniqueness", &mut flags),
        novelty: ratio(novel, unique.len(), "novelty", &mut flags),
        n_generated: generated.len(),
        n_valid: valid.len(),
        n_unique: unique.len(),
        n_novel: novel,
        empty_denominators: flags,
    }
}

/// Canonical SMILES of a molecule if it is valid. Point clouds (no bonds)
/// go through bond perception first.
pub fn validated_smiles(mol: &Molecule3D) -> Option<String> {
    if mol.bonds.is_empty() && mol.len() > 1 {
        let p = perceive_bonds(mol);
        return if p.valid { canonical_smiles(&p.molecule) } else { None };
    }
    if is_valence_complete(mol) {
        canonical_smiles(mol)
    } else {
        None
    }
}

pub fn set_metrics(generated: &[Molecule3D], training: &BTreeSet<String>) -> SetMetrics {
    let smiles: Vec<Option<String>> = generated.iter().map(validated_smiles).collect();
    set_metrics_from_canonical(&smiles, training)
}
