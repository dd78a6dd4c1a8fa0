//! Atom-contribution logP with a simplified Wildman–Crippen atom typing.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::{table_error, table_reader, Annotated, TableError};
use crate::chem::{BondOrder, Element, Molecule3D};

#[derive(Debug, Clone, PartialEq)]
pub struct CrippenTable {
    pub contributions: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
struct Row {
    #[serde(rename = "type")]
    kind: String,
    element: String,
    #[allow(dead_code)]
    description: String,
    contribution: f64,
}

impl CrippenTable {
    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut contributions = BTreeMap::new();
        for row in table_reader(text).deserialize::<Row>() {
            let r = row.map_err(|e| table_error("crippen", e))?;
            if Element::from_symbol(&r.element).is_none() {
                return Err(table_error("crippen", format!("unknown element {}", r.element)));
            }
            if contributions.insert(r.kind.clone(), r.contribution).is_some() {
                return Err(table_error("crippen", format!("duplicate type {}", r.kind)));
            }
        }
        for e in Element::ALL {
            let key = default_type(e);
            if !contributions.contains_key(&key) {
                return Err(table_error("crippen", format!("missing {key}")));
            }
        }
        Ok(Self { contributions })
    }

    pub fn bundled() -> &'static CrippenTable {
        static T: OnceLock<CrippenTable> = OnceLock::new();
        T.get_or_init(|| CrippenTable::from_csv(include_str!("../../data/crippen.csv")).expect("bundled Crippen table parses"))
    }

    pub fn get(&self, kind: &str) -> Option<f64> {
        self.contributions.get(kind).copied()
    }
}

pub fn default_type(e: Element) -> String {
    format!("default_{}", e.symbol())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrippenResult {
    pub logp: f64,
    /// Assigned type per atom; `None` marks an atom scored by its element default.
    pub types: Vec<Option<&'static str>>,
    pub unclassified: usize,
}

fn is_hetero(e: Element) -> bool {
    !matches!(e, Element::C | Element::H)
}

/// Atom type for atom `i`, or `None` when no rule applies.
pub fn atom_type(ann: &Annotated, i: usize) -> Option<&'static str> {
    let mol = ann.mol;
    let atom = &mol.atoms[i];
    let h = ann.hydrogens[i];
    let arom = ann.is_aromatic(i);
    let heavy: Vec<(usize, usize)> = ann.heavy_neighbors(i).collect();
    let non_arom_order = |order: BondOrder| heavy.iter().any(|&(_, k)| !ann.is_aromatic_bond(k) && mol.bonds[k].order == order);
    match atom.element {
        Element::H => {
            let nb = ann.adj[i].first().map(|&(j, _)| ann.element(j))?;
            Some(match nb {
                Element::C => "H_carbon",
                Element::N => "H_amine",
                Element::O => "H_alcohol",
                _ => "H_other",
            })
        }
        Element::C => {
            if atom.formal_charge != 0 {
                return None;
            }
            if arom {
                let aromatic_rings = ann
                    .aromaticity
                    .rings
                    .iter()
                    .zip(&ann.aromaticity.aromatic_rings)
                    .filter(|(r, &a)| a && r.contains_atom(i))
                    .count();
                return Some(if h > 0 {
                    "C_arom_h"
                } else if heavy.iter().any(|&(j, _)| is_hetero(ann.element(j))) {
                    "C_arom_hetero"
                } else if aromatic_rings >= 2 {
                    "C_arom_bridge"
                } else {
                    "C_arom_c"
                });
            }
            if non_arom_order(BondOrder::Triple) {
                return Some("C_sp");
            }
            if ann.has_double_to(i, is_hetero) {
                return Some("C_sp2_hetero");
            }
            if non_arom_order(BondOrder::Double) {
                return Some("C_sp2");
            }
            let hetero = heavy.iter().any(|&(j, _)| is_hetero(ann.element(j)));
            Some(match (hetero, h) {
                (true, 0) => "C_sp3_hetero",
                (true, _) => "C_sp3_hetero_h",
                (false, h) if h >= 3 => "C_methyl",
                (false, _) => "C_sp3",
            })
        }
        Element::N => {
            if atom.formal_charge > 0 {
                return Some("N_charged");
            }
            if atom.formal_charge < 0 {
                return None;
            }
            if arom {
                return Some(if h > 0 || heavy.len() >= 3 { "N_arom_sub" } else { "N_arom" });
            }
            if non_arom_order(BondOrder::Triple) {
                return Some("N_nitrile");
            }
            if non_arom_order(BondOrder::Double) {
                return Some("N_imine");
            }
            let acyl = heavy.iter().any(|&(j, _)| {
                ann.is_carbonyl_carbon(j) || (ann.element(j) == Element::S && ann.has_double_to(j, |e| e == Element::O))
            });
            if acyl {
                return Some("N_amide");
            }
            if heavy.iter().any(|&(j, _)| ann.is_aromatic(j)) {
                return Some("N_aniline");
            }
            Some(match h {
                0 => "N_tertiary",
                1 => "N_secondary",
                _ => "N_primary",
            })
        }
        Element::O => {
            if atom.formal_charge < 0 {
                return Some("O_charged");
            }
            if atom.formal_charge > 0 {
                return None;
            }
            if arom {
                return Some("O_arom");
            }
            if non_arom_order(BondOrder::Double) {
                return Some("O_carbonyl");
            }
            let aryl = heavy.iter().any(|&(j, _)| ann.is_aromatic(j));
            Some(match (h > 0, aryl) {
                (true, true) => "O_phenol",
                (true, false) => "O_alcohol",
                (false, true) => "O_ether_arom",
                (false, false) => "O_ether",
            })
        }
        Element::F => Some("F"),
        Element::Cl => Some("Cl"),
        Element::S => {
            if arom {
                return Some("S_arom");
            }
            if heavy.iter().any(|&(j, _)| ann.element(j) == Element::O) {
                return Some("S_oxidized");
            }
            (atom.formal_charge == 0).then_some("S_aliphatic")
        }
    }
}

pub fn crippen_logp_annotated(ann: &Annotated, table: &CrippenTable) -> CrippenResult {
    let mut logp = 0.0;
    let mut types = Vec::with_capacity(ann.mol.len());
    let mut unclassified = 0;
    for i in 0..ann.mol.len() {
        let t = atom_type(ann, i).filter(|t| table.get(t).is_some());
        match t {
            Some(t) => logp += table.get(t).expect("filtered"),
            None => {
                unclassified += 1;
                logp += table.get(&default_type(ann.element(i))).expect("defaults checked at load");
            }
        }
        types.push(t);
    }
    if unclassified > 0 {
        log::warn!("crippen: {unclassified} atom(s) scored with element defaults");
    }
    CrippenResult {
        logp,
        types,
        unclassified,
    }
}

pub fn crippen_logp(mol: &Molecule3D) -> CrippenResult {
    crippen_logp_annotated(&Annotated::new(mol), CrippenTable::bundled())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{parse_smiles, Atom};

    #[test]
    fn single_atom_and_disjoint_copies() {
        let mut m = Molecule3D::new();
        m.add_atom(Atom::unplaced(Element::Cl));
        let one = crippen_logp(&m);
        assert_eq!(one.types, vec![Some("Cl")]);
        assert!((one.logp - 0.6895).abs() < 1e-12);
        for _ in 0..3 {
            m.add_atom(Atom::unplaced(Element::Cl));
        }
        assert!((crippen_logp(&m).logp - 4.0 * 0.6895).abs() < 1e-12);
    }

    #[test]
    fn ethanol_types() {
        let m = parse_smiles("CCO").unwrap();
        let r = crippen_logp(&m);
        assert_eq!(&r.types[..3], &[Some("C_methyl"), Some("C_sp3_hetero_h"), Some("O_alcohol")]);
        assert_eq!(r.unclassified, 0);
    }

    #[test]
    fn every_corpus_atom_is_typed() {
        for rec in crate::chem::read_smiles_lines(include_str!("../../data/toy_corpus.smi")) {
            let r = crippen_logp(&parse_smiles(&rec.smiles).unwrap());
            assert_eq!(r.unclassified, 0, "{}", rec.smiles);
        }
    }
}
