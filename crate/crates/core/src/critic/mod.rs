//! Graph-attention critics over (pocket, ligand) pairs.
//!
//! Two attention towers embed the pocket graph and the ligand graph; their
//! sum-pooled outputs feed a binding classifier and an affinity regressor.
//! The SA component comes straight from the descriptor.

pub mod dataset;
pub mod model;
pub mod synthetic;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::chem::molecule::distance;
use crate::chem::{perceive_bonds, single_bond_graph, Element, Molecule3D};
use crate::descriptors::sa_score;
use crate::nn::{NnError, Tensor};

pub use dataset::{read_pairs, write_pairs, LabeledPair};
pub use model::{CriticConfig, GatCritic};
pub use synthetic::{synth_pairs, synth_pocket, SyntheticCritic, SyntheticMode};
pub use train::{auroc, hyperparameter_grid, train_classifier, GridRow, TrainReport};

pub const RESIDUE_CLASSES: usize = 20;

pub const RESIDUE_NAMES: [&str; RESIDUE_CLASSES] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET", "PHE", "PRO", "SER",
    "THR", "TRP", "TYR", "VAL",
];

/// Residue classes with an acidic side chain (ASP, GLU).
pub const ACIDIC: [usize; 2] = [3, 6];

/// Pocket node feature width: residue one-hot then element one-hot.
pub const POCKET_FEATURES: usize = RESIDUE_CLASSES + Element::COUNT;

pub fn residue_index(name: &str) -> Option<usize> {
    RESIDUE_NAMES.iter().position(|r| r.eq_ignore_ascii_case(name))
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CriticError {
    #[error("ligand has no atoms")]
    EmptyLigand,
    #[error("invalid pocket: {0}")]
    Pocket(String),
    #[error("dataset has a single class")]
    SingleClass,
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("invalid critic config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocketAtom {
    pub element: Element,
    pub position: [f64; 3],
    pub residue: usize,
}

/// Residue nodes come first (0..R), atom nodes after (R..R+A).
#[derive(Debug, Clone, PartialEq)]
pub struct PocketGraph {
    pub residue_types: Vec<usize>,
    pub residue_centers: Vec<[f64; 3]>,
    pub atoms: Vec<PocketAtom>,
    /// Undirected pairs over node indices, each stored once with a < b.
    pub edges: Vec<(usize, usize)>,
}

impl PocketGraph {
    /// Residue nodes sit at the centroid of their atoms. Residue pairs and
    /// atom pairs within `cutoff` are linked; each atom is also linked to
    /// its own residue.
    pub fn build(residue_types: Vec<usize>, atoms: Vec<PocketAtom>, cutoff: f64) -> Result<Self, CriticError> {
        let r = residue_types.len();
        if let Some(t) = residue_types.iter().find(|&&t| t >= RESIDUE_CLASSES) {
            return Err(CriticError::Pocket(format!("residue class {t} out of range")));
        }
        let mut sums = vec![[0.0; 3]; r];
        let mut counts = vec![0usize; r];
        for a in &atoms {
            if a.residue >= r {
                return Err(CriticError::Pocket(format!("atom references residue {} of {r}", a.residue)));
            }
            for k in 0..3 {
                sums[a.residue][k] += a.position[k];
            }
            counts[a.residue] += 1;
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(CriticError::Pocket(format!("residue {i} has no atoms")));
        }
        let centers: Vec<[f64; 3]> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| [s[0] / c as f64, s[1] / c as f64, s[2] / c as f64])
            .collect();
        let mut edges = Vec::new();
        for i in 0..r {
            for j in i + 1..r {
                if distance(&centers[i], &centers[j]) <= cutoff {
                    edges.push((i, j));
                }
            }
        }
        for (i, a) in atoms.iter().enumerate() {
            edges.push((a.residue, r + i));
            for (j, b) in atoms.iter().enumerate().skip(i + 1) {
                if distance(&a.position, &b.position) <= cutoff {
                    edges.push((r + i, r + j));
                }
            }
        }
        Ok(Self {
            residue_types,
            residue_centers: centers,
            atoms,
            edges,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.residue_types.len() + self.atoms.len()
    }

    pub fn features(&self) -> Tensor {
        let mut t = Tensor::zeros(self.n_nodes(), POCKET_FEATURES);
        for (i, &c) in self.residue_types.iter().enumerate() {
            t.set(i, c, 1.0);
        }
        let r = self.residue_types.len();
        for (i, a) in self.atoms.iter().enumerate() {
            t.set(r + i, RESIDUE_CLASSES + a.element.index(), 1.0);
        }
        t
    }

    pub fn acidic_count(&self) -> usize {
        self.residue_types.iter().filter(|t| ACIDIC.contains(t)).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LigandGraph {
    pub elements: Vec<Element>,
    pub positions: Vec<[f64; 3]>,
    pub edges: Vec<(usize, usize)>,
}

impl LigandGraph {
    /// Bond edges plus distance edges within `cutoff`.
    pub fn from_molecule(mol: &Molecule3D, cutoff: f64) -> Result<Self, CriticError> {
        let mut g = Self::partial(mol, cutoff)?;
        g.edges.extend(mol.bonds.iter().map(|b| (b.a.min(b.b), b.a.max(b.b))));
        g.edges.sort_unstable();
        g.edges.dedup();
        Ok(g)
    }

    /// Distance edges only; bonds are ignored.
    pub fn partial(mol: &Molecule3D, cutoff: f64) -> Result<Self, CriticError> {
        if mol.atoms.is_empty() {
            return Err(CriticError::EmptyLigand);
        }
        let positions: Vec<[f64; 3]> = mol.atoms.iter().map(|a| a.position).collect();
        let mut edges = Vec::new();
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if distance(&positions[i], &positions[j]) <= cutoff {
                    edges.push((i, j));
                }
            }
        }
        Ok(Self {
            elements: mol.atoms.iter().map(|a| a.element).collect(),
            positions,
            edges,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.elements.len()
    }

    pub fn features(&self) -> Tensor {
        let mut t = Tensor::zeros(self.n_nodes(), Element::COUNT);
        for (i, e) in self.elements.iter().enumerate() {
            t.set(i, e.index(), 1.0);
        }
        t
    }

    pub fn count(&self, e: Element) -> usize {
        self.elements.iter().filter(|&&x| x == e).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticScores {
    /// Probability of the active class.
    pub c_bp: f64,
    pub p_inactive: f64,
    /// Unscaled affinity output.
    pub c_ea_raw: f64,
    pub c_ea: f64,
    pub c_sa: f64,
}

/// Min-max map of raw affinities onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityScaler {
    pub min: f64,
    pub max: f64,
    /// Set when the fit sample was empty or constant; the map is then 0.5.
    pub degenerate: bool,
}

impl AffinityScaler {
    pub fn fit(sample: &[f64]) -> Self {
        let min = sample.iter().copied().fold(f64::INFINITY, f64::min);
        let max = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let degenerate = !(max > min) || !min.is_finite() || !max.is_finite();
        if degenerate {
            log::warn!("affinity scaler fit on a degenerate sample; mapping everything to 0.5");
        }
        Self { min, max, degenerate }
    }

    pub fn scale(&self, x: f64) -> f64 {
        if self.degenerate {
            return 0.5;
        }
        ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// SA score mapped onto [0, 1] by (SA − 1)/9.
pub fn scaled_sa(sa: f64) -> f64 {
    ((sa - 1.0) / 9.0).clamp(0.0, 1.0)
}

/// −ln(K_i/K_d): the affinity quantity the regressor stands in for.
pub fn affinity_from_constants(k_i: f64, k_d: f64) -> f64 {
    -(k_i / k_d).ln()
}

/// Molecule used for SA: existing bonds if present, perceived bonds when
/// the geometry is valid, connectivity only otherwise.
pub fn ligand_for_sa(mol: &Molecule3D) -> Molecule3D {
    if !mol.bonds.is_empty() {
        return mol.clone();
    }
    let p = perceive_bonds(mol);
    if p.valid {
        p.molecule
    } else {
        single_bond_graph(mol)
    }
}

/// Scaled SA of a possibly partial ligand.
pub fn ligand_c_sa(mol: &Molecule3D) -> f64 {
    scaled_sa(sa_score(&ligand_for_sa(mol)).total)
}

pub trait Critic: Send + Sync {
    /// Scores a ligand, complete or partial, against a pocket.
    fn score(&self, pocket: &PocketGraph, ligand: &Molecule3D) -> Result<CriticScores, CriticError>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::molecule::Atom;

    fn tiny_pocket() -> PocketGraph {
        let atoms = vec![
            PocketAtom {
                element: Element::N,
                position: [0.0, 0.0, 0.0],
                residue: 0,
            },
            PocketAtom {
                element: Element::O,
                position: [1.2, 0.0, 0.0],
                residue: 0,
            },
            PocketAtom {
                element: Element::C,
                position: [20.0, 0.0, 0.0],
                residue: 1,
            },
        ];
        PocketGraph::build(vec![3, 0], atoms, 8.0).unwrap()
    }

    #[test]
    fn pocket_edges_and_membership() {
        let p = tiny_pocket();
        assert_eq!(p.n_nodes(), 5);
        assert_eq!(p.acidic_count(), 1);
        // residues far apart: no residue edge; atom 0-1 close; each atom tied to one residue
        assert!(!p.edges.contains(&(0, 1)));
        assert!(p.edges.contains(&(2, 3)));
        for (i, a) in p.atoms.iter().enumerate() {
            let links: Vec<_> = p.edges.iter().filter(|&&(x, y)| y == 2 + i && x < 2).collect();
            assert_eq!(links, vec![&(a.residue, 2 + i)]);
        }
        let f = p.features();
        assert_eq!(f.get(0, 3), 1.0);
        assert_eq!(f.get(2, RESIDUE_CLASSES + Element::N.index()), 1.0);
    }

    #[test]
    fn pocket_rejects_empty_residue() {
        assert!(matches!(PocketGraph::build(vec![0, 1], vec![], 8.0), Err(CriticError::Pocket(_))));
    }

    #[test]
    fn ligand_graphs() {
        let m = Molecule3D::from_atoms(vec![
            Atom::new(Element::C, [0.0, 0.0, 0.0]),
            Atom::new(Element::O, [1.4, 0.0, 0.0]),
            Atom::new(Element::N, [9.0, 0.0, 0.0]),
        ]);
        let g = LigandGraph::partial(&m, 4.0).unwrap();
        assert_eq!(g.edges, vec![(0, 1)]);
        assert_eq!(g.count(Element::N), 1);
        assert_eq!(LigandGraph::partial(&Molecule3D::new(), 4.0), Err(CriticError::EmptyLigand));
    }

    #[test]
    fn scaler_examples() {
        let s = AffinityScaler::fit(&[0.0, 10.0]);
        assert_eq!(s.scale(5.0), 0.5);
        assert_eq!(s.scale(-3.0), 0.0);
        assert_eq!(s.scale(11.0), 1.0);
        let d = AffinityScaler::fit(&[2.0, 2.0]);
        assert!(d.degenerate);
        assert_eq!(d.scale(100.0), 0.5);
        assert!(AffinityScaler::fit(&[]).degenerate);
    }

    #[test]
    fn sa_and_affinity_endpoints() {
        assert_eq!(scaled_sa(1.0), 0.0);
        assert_eq!(scaled_sa(10.0), 1.0);
        assert_eq!(affinity_from_constants(3.5, 3.5), 0.0);
    }
}
