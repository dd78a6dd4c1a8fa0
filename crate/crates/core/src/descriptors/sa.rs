//! Synthetic accessibility: fragment score minus complexity penalty,
//! mapped to [1, 10] (1 = easy).
//!
//! Fragment contributions are frequency log-odds of radius-0..2 circular
//! atom environments over the bundled reference corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::Annotated;
use crate::chem::canon::symmetry_classes;
use crate::chem::{parse_smiles, read_smiles_lines, BondOrder, Element, Molecule3D};

/// Contribution of a fragment never seen in the reference corpus.
pub const RARE_FRAGMENT_PENALTY: f64 = -4.0;
/// Rings larger than this count as macrocycles.
pub const MACROCYCLE_SIZE: usize = 8;
/// Target span of the reference corpus on the final scale.
pub const CORPUS_SPAN: (f64, f64) = (1.5, 8.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaBreakdown {
    pub fragment_score: f64,
    pub ring_complexity: f64,
    pub stereo_complexity: f64,
    pub macrocycle_penalty: f64,
    pub size_penalty: f64,
    /// fragment_score minus all penalty terms.
    pub raw: f64,
    pub total: f64,
    pub n_bridgehead: usize,
    pub n_spiro: usize,
    pub n_stereo: usize,
    pub n_macrocycles: usize,
    pub n_heavy: usize,
    pub unknown_fragments: usize,
}

impl SaBreakdown {
    pub fn complexity_penalty(&self) -> f64 {
        self.ring_complexity + self.stereo_complexity + self.macrocycle_penalty + self.size_penalty
    }
}

fn fnv1a(words: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        for byte in w.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Circular environment identifiers of radius 0, 1 and 2 around each heavy
/// atom (radius k only when the environment actually grows).
pub fn fragment_ids(ann: &Annotated) -> Vec<u64> {
    let mol = ann.mol;
    let heavy: Vec<usize> = (0..mol.len()).filter(|&i| ann.element(i).is_heavy()).collect();
    let mut ids: BTreeMap<usize, u64> = heavy
        .iter()
        .map(|&i| {
            let a = &mol.atoms[i];
            let inv = [
                a.element.atomic_number() as u64,
                mol.heavy_degree(i) as u64,
                ann.hydrogens[i] as u64,
                (a.formal_charge as i64 + 8) as u64,
                ann.ring_atom[i] as u64,
                ann.is_aromatic(i) as u64,
            ];
            (i, fnv1a(&inv))
        })
        .collect();
    let mut out: Vec<u64> = ids.values().copied().collect();
    let mut reach: BTreeMap<usize, BTreeSet<usize>> = heavy.iter().map(|&i| (i, BTreeSet::from([i]))).collect();
    for radius in 1..=2u64 {
        let mut next = BTreeMap::new();
        let mut next_reach = BTreeMap::new();
        for &i in &heavy {
            let mut nb: Vec<(u64, u64)> = ann
                .heavy_neighbors(i)
                .map(|(j, k)| (ann.bond_class(k) as u64, ids[&j]))
                .collect();
            nb.sort_unstable();
            let mut words = vec![radius, ids[&i]];
            for (b, id) in nb {
                words.push(b);
                words.push(id);
            }
            let id = fnv1a(&words);
            next.insert(i, id);
            let mut r = reach[&i].clone();
            for (j, _) in ann.heavy_neighbors(i) {
                r.extend(reach[&j].iter().copied());
            }
            if r.len() > reach[&i].len() {
                out.push(id);
            }
            next_reach.insert(i, r);
        }
        ids = next;
        reach = next_reach;
    }
    out
}

/// Bridgehead and spiro atom counts from SSSR ring pairs.
pub fn bridge_and_spiro(ann: &Annotated) -> (usize, usize) {
    let rings = &ann.aromaticity.rings;
    let mut bridge = BTreeSet::new();
    let mut spiro = BTreeSet::new();
    for i in 0..rings.len() {
        for j in (i + 1)..rings.len() {
            let shared: BTreeSet<usize> = rings[i].atoms.iter().copied().filter(|a| rings[j].contains_atom(*a)).collect();
            if shared.len() == 1 {
                spiro.extend(shared);
            } else if shared.len() >= 3 {
                // Endpoints of the shared path are the bridgeheads.
                for &a in &shared {
                    let inner = ann.adj[a].iter().filter(|(b, _)| shared.contains(b)).count();
                    if inner <= 1 {
                        bridge.insert(a);
                    }
                }
            }
        }
    }
    (bridge.len(), spiro.len())
}

/// sp3 carbons whose four neighbors fall in four distinct symmetry classes.
pub fn stereocenter_count(mol: &Molecule3D) -> usize {
    let classes = symmetry_classes(mol);
    let adj = mol.adjacency();
    (0..mol.len())
        .filter(|&i| {
            mol.atoms[i].element == Element::C
                && adj[i].len() == 4
                && adj[i].iter().all(|&(_, k)| mol.bonds[k].order == BondOrder::Single)
                && adj[i].iter().map(|&(j, _)| classes[j]).collect::<BTreeSet<_>>().len() == 4
        })
        .count()
}

/// Fragment contribution table plus the affine anchors of the final scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SaModel {
    pub contributions: BTreeMap<u64, f64>,
    pub raw_min: f64,
    pub raw_max: f64,
}

impl SaModel {
    /// Build the table from a reference corpus: contribution = ln(count /
    /// median count), then anchor the scale on the corpus raw scores.
    pub fn from_corpus(corpus: &[Molecule3D]) -> Self {
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for m in corpus {
            for id in fragment_ids(&Annotated::new(m)) {
                *counts.entry(id).or_default() += 1;
            }
        }
        let mut sorted: Vec<usize> = counts.values().copied().collect();
        sorted.sort_unstable();
        let median = sorted.get(sorted.len() / 2).copied().unwrap_or(1).max(1) as f64;
        let contributions = counts.into_iter().map(|(k, c)| (k, (c as f64 / median).ln())).collect();
        let mut model = SaModel {
            contributions,
            raw_min: 0.0,
            raw_max: 1.0,
        };
        let raws: Vec<f64> = corpus.iter().map(|m| model.score(m).raw).collect();
        if let (Some(lo), Some(hi)) = (raws.iter().copied().reduce(f64::min), raws.iter().copied().reduce(f64::max)) {
            if hi > lo {
                model.raw_min = lo;
                model.raw_max = hi;
            }
        }
        model
    }

    pub fn bundled() -> &'static SaModel {
        static M: OnceLock<SaModel> = OnceLock::new();
        M.get_or_init(|| SaModel::from_corpus(&reference_corpus()))
    }

    /// Map a raw score (higher = easier) onto [1, 10] (lower = easier).
    pub fn scale(&self, raw: f64) -> f64 {
        let (lo, hi) = CORPUS_SPAN;
        let t = (self.raw_max - raw) / (self.raw_max - self.raw_min);
        (lo + t * (hi - lo)).clamp(1.0, 10.0)
    }

    pub fn score(&self, mol: &Molecule3D) -> SaBreakdown {
        let ann = Annotated::new(mol);
        let ids = fragment_ids(&ann);
        let mut unknown = 0;
        let sum: f64 = ids
            .iter()
            .map(|id| {
                self.contributions.get(id).copied().unwrap_or_else(|| {
                    unknown += 1;
                    RARE_FRAGMENT_PENALTY
                })
            })
            .sum();
        let fragment_score = if ids.is_empty() { 0.0 } else { sum / ids.len() as f64 };
        let (n_bridgehead, n_spiro) = bridge_and_spiro(&ann);
        let n_stereo = stereocenter_count(mol);
        let n_macrocycles = ann.aromaticity.rings.iter().filter(|r| r.len() > MACROCYCLE_SIZE).count();
        let n_heavy = mol.heavy_atom_count();
        let ring_complexity = ((n_bridgehead + 1) as f64).ln() + ((n_spiro + 1) as f64).ln();
        let stereo_complexity = ((n_stereo + 1) as f64).ln();
        let macrocycle_penalty = ((n_macrocycles + 1) as f64).ln();
        let nh = n_heavy as f64;
        let size_penalty = nh.powf(1.005) - nh;
        let raw = fragment_score - (ring_complexity + stereo_complexity + macrocycle_penalty + size_penalty);
        SaBreakdown {
            fragment_score,
            ring_complexity,
            stereo_complexity,
            macrocycle_penalty,
            size_penalty,
            raw,
            total: self.scale(raw),
            n_bridgehead,
            n_spiro,
            n_stereo,
            n_macrocycles,
            n_heavy,
            unknown_fragments: unknown,
        }
    }

    /// Export the fragment table as CSV (`fragment,contribution`).
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["fragment", "contribution"])?;
        for (k, v) in &self.contributions {
            out.write_record([format!("{k:016x}"), format!("{v:.6}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Bundled reference corpus as molecules.
pub fn reference_corpus() -> Vec<Molecule3D> {
    read_smiles_lines(include_str!("../../data/toy_corpus.smi"))
        .into_iter()
        .map(|r| parse_smiles(&r.smiles).expect("bundled corpus parses").with_provenance("reference"))
        .collect()
}

pub fn sa_score(mol: &Molecule3D) -> SaBreakdown {
    SaModel::bundled().score(mol)
}
