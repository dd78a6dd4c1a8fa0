//! Drug-likeness descriptors and scores: QED, ESOL, Crippen logP, TPSA,
//! structural alerts, SA score, the modified Lipinski filter and
//! validity/uniqueness/novelty set metrics.

pub mod alerts;
pub mod crippen;
pub mod esol;
pub mod lipinski;
pub mod psa;
pub mod qed;
pub mod sa;
pub mod set_metrics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::aromatic::{perceive_aromaticity, Aromaticity};
use crate::chem::rings::{ring_atoms, ring_bonds};
use crate::chem::{BondOrder, Element, Molecule3D};

pub use alerts::{alert_count, AlertSet};
pub use crippen::{crippen_logp, CrippenResult, CrippenTable};
pub use esol::esol;
pub use lipinski::{lipinski_check, lipinski_modified, LipinskiReport, LipinskiRule};
pub use psa::{tpsa, PsaTable};
pub use qed::{qed, QedParams, QedResult, Sigmoid};
pub use sa::{sa_score, SaBreakdown, SaModel};
pub use set_metrics::{set_metrics, set_metrics_from_canonical, SetMetrics};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("table {table}: {message}")]
    Parse { table: String, message: String },
}

pub(crate) fn table_error(table: &str, message: impl std::fmt::Display) -> TableError {
    TableError::Parse {
        table: table.to_string(),
        message: message.to_string(),
    }
}

/// CSV reader for the bundled tables: header row, `#` comment lines.
pub(crate) fn table_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Per-atom chemistry shared by the descriptor calculators.
#[derive(Debug, Clone)]
pub struct Annotated<'a> {
    pub mol: &'a Molecule3D,
    pub aromaticity: Aromaticity,
    pub ring_atom: Vec<bool>,
    pub ring_bond: Vec<bool>,
    pub hydrogens: Vec<usize>,
    /// (neighbor, bond index) lists.
    pub adj: Vec<Vec<(usize, usize)>>,
}

impl<'a> Annotated<'a> {
    pub fn new(mol: &'a Molecule3D) -> Self {
        Self {
            mol,
            aromaticity: perceive_aromaticity(mol),
            ring_atom: ring_atoms(mol),
            ring_bond: ring_bonds(mol),
            hydrogens: (0..mol.len()).map(|i| mol.hydrogen_count(i)).collect(),
            adj: mol.adjacency(),
        }
    }

    pub fn element(&self, i: usize) -> Element {
        self.mol.atoms[i].element
    }

    pub fn is_aromatic(&self, i: usize) -> bool {
        self.aromaticity.atoms[i]
    }

    pub fn is_aromatic_bond(&self, k: usize) -> bool {
        self.aromaticity.bonds[k]
    }

    pub fn heavy_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj[i].iter().copied().filter(|&(j, _)| self.element(j).is_heavy())
    }

    /// Bond class used in pattern matching: 0 single, 1 double, 2 triple,
    /// 3 aromatic (perceived).
    pub fn bond_class(&self, k: usize) -> u8 {
        if self.is_aromatic_bond(k) {
            return 3;
        }
        match self.mol.bonds[k].order {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn has_double_to(&self, i: usize, pred: impl Fn(Element) -> bool) -> bool {
        self.adj[i]
            .iter()
            .any(|&(j, k)| !self.is_aromatic_bond(k) && self.mol.bonds[k].order == BondOrder::Double && pred(self.element(j)))
    }

    /// Carbonyl-like carbon: carbon with a non-aromatic double bond to O or S.
    pub fn is_carbonyl_carbon(&self, i: usize) -> bool {
        self.element(i) == Element::C && self.has_double_to(i, |e| matches!(e, Element::O | Element::S))
    }
}

/// The eight QED descriptors plus the aromatic proportion used by ESOL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorVector {
    pub mw: f64,
    pub alogp: f64,
    pub hbd: u32,
    pub hba: u32,
    pub psa: f64,
    pub rotb: u32,
    pub arom: u32,
    pub alerts: u32,
    pub ap: f64,
}

impl DescriptorVector {
    /// ESOL's clogP is the same Crippen value as ALOGP.
    pub fn clogp(&self) -> f64 {
        self.alogp
    }

    /// QED inputs in table order: MW, ALOGP, HBA, HBD, PSA, ROTB, AROM, ALERTS.
    pub fn qed_inputs(&self) -> [f64; 8] {
        [
            self.mw,
            self.alogp,
            self.hba as f64,
            self.hbd as f64,
            self.psa,
            self.rotb as f64,
            self.arom as f64,
            self.alerts as f64,
        ]
    }
}

pub fn hbd(ann: &Annotated) -> u32 {
    (0..ann.mol.len())
        .filter(|&i| matches!(ann.element(i), Element::N | Element::O) && ann.hydrogens[i] > 0)
        .count() as u32
}

pub fn hba(ann: &Annotated) -> u32 {
    (0..ann.mol.len())
        .filter(|&i| matches!(ann.element(i), Element::N | Element::O) && ann.mol.atoms[i].formal_charge <= 0)
        .count() as u32
}

/// Non-ring single bonds between heavy atoms that each have heavy degree
/// ≥ 2, amide C–N excluded.
pub fn rotatable_bonds(ann: &Annotated) -> u32 {
    let mol = ann.mol;
    mol.bonds
        .iter()
        .enumerate()
        .filter(|&(k, b)| {
            b.order == BondOrder::Single
                && !ann.ring_bond[k]
                && !ann.is_aromatic_bond(k)
                && ann.element(b.a).is_heavy()
                && ann.element(b.b).is_heavy()
                && mol.heavy_degree(b.a) >= 2
                && mol.heavy_degree(b.b) >= 2
                && !is_amide_bond(ann, b.a, b.b)
        })
        .count() as u32
}

fn is_amide_bond(ann: &Annotated, a: usize, b: usize) -> bool {
    let cn = |c: usize, n: usize| ann.element(n) == Element::N && ann.is_carbonyl_carbon(c);
    cn(a, b) || cn(b, a)
}

pub fn aromatic_proportion(ann: &Annotated) -> f64 {
    let heavy = ann.mol.heavy_atom_count();
    if heavy == 0 {
        return 0.0;
    }
    let arom = (0..ann.mol.len())
        .filter(|&i| ann.element(i).is_heavy() && ann.is_aromatic(i))
        .count();
    arom as f64 / heavy as f64
}

pub fn compute_descriptors(mol: &Molecule3D) -> DescriptorVector {
    let ann = Annotated::new(mol);
    DescriptorVector {
        mw: mol.molecular_weight(),
        alogp: crippen::crippen_logp_annotated(&ann, CrippenTable::bundled()).logp,
        hbd: hbd(&ann),
        hba: hba(&ann),
        psa: psa::tpsa_annotated(&ann, PsaTable::bundled()).value,
        rotb: rotatable_bonds(&ann),
        arom: ann.aromaticity.aromatic_ring_count() as u32,
        alerts: AlertSet::bundled().count_annotated(&ann) as u32,
        ap: aromatic_proportion(&ann),
    }
}

/// The per-molecule scores reported by evaluation and ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugLikeness {
    pub descriptors: DescriptorVector,
    pub qed: f64,
    pub esol: f64,
    pub sa: f64,
    pub logp: f64,
    pub lipinski: LipinskiReport,
}

/// Scores a molecule with bonds assigned.
pub fn drug_likeness(mol: &Molecule3D) -> DrugLikeness {
    let d = compute_descriptors(mol);
    DrugLikeness {
        qed: qed(&d, QedParams::bundled()).value,
        esol: esol(&d),
        sa: sa_score(mol).total,
        logp: d.alogp,
        lipinski: lipinski_check(&d),
        descriptors: d,
    }
}
