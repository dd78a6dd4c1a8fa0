//! Topological polar surface area from N/O fragment contributions.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::{table_error, table_reader, Annotated, TableError};
use crate::chem::{Element, Molecule3D};

/// Environment of a polar atom as used for table lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
pub struct PolarType {
    pub element: char,
    pub aromatic: u8,
    pub hydrogens: u8,
    pub charge: i8,
    pub single: u8,
    pub double: u8,
    pub triple: u8,
    pub aromatic_bonds: u8,
    pub three_ring: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsaTable {
    pub entries: BTreeMap<PolarType, f64>,
}

#[derive(Debug, Deserialize)]
struct Row {
    element: String,
    aromatic: u8,
    hydrogens: u8,
    charge: i8,
    single: u8,
    double: u8,
    triple: u8,
    aromatic_bonds: u8,
    three_ring: u8,
    contribution: f64,
}

impl PsaTable {
    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut entries = BTreeMap::new();
        for row in table_reader(text).deserialize::<Row>() {
            let r = row.map_err(|e| table_error("tpsa", e))?;
            let element = match r.element.as_str() {
                "N" => 'N',
                "O" => 'O',
                other => return Err(table_error("tpsa", format!("unsupported element {other}"))),
            };
            let key = PolarType {
                element,
                aromatic: r.aromatic,
                hydrogens: r.hydrogens,
                charge: r.charge,
                single: r.single,
                double: r.double,
                triple: r.triple,
                aromatic_bonds: r.aromatic_bonds,
                three_ring: r.three_ring,
            };
            if entries.insert(key, r.contribution).is_some() {
                return Err(table_error("tpsa", format!("duplicate row {key:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn bundled() -> &'static PsaTable {
        static T: OnceLock<PsaTable> = OnceLock::new();
        T.get_or_init(|| PsaTable::from_csv(include_str!("../../data/tpsa.csv")).expect("bundled TPSA table parses"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsaResult {
    pub value: f64,
    /// Polar atoms with no table entry (scored by the element fallback).
    pub unmatched: usize,
}

fn in_three_ring(ann: &Annotated, i: usize) -> bool {
    ann.aromaticity.rings.iter().any(|r| r.len() == 3 && r.contains_atom(i))
}

pub fn polar_type(ann: &Annotated, i: usize) -> Option<PolarType> {
    let element = match ann.element(i) {
        Element::N => 'N',
        Element::O => 'O',
        _ => return None,
    };
    let (mut single, mut double, mut triple, mut aromatic_bonds) = (0u8, 0u8, 0u8, 0u8);
    for (_, k) in ann.heavy_neighbors(i) {
        match ann.bond_class(k) {
            0 => single += 1,
            1 => double += 1,
            2 => triple += 1,
            _ => aromatic_bonds += 1,
        }
    }
    Some(PolarType {
        element,
        aromatic: u8::from(ann.is_aromatic(i)),
        hydrogens: ann.hydrogens[i] as u8,
        charge: ann.mol.atoms[i].formal_charge,
        single,
        double,
        triple,
        aromatic_bonds,
        three_ring: u8::from(in_three_ring(ann, i)),
    })
}

/// Element fallback for polar types missing from the table.
pub fn fallback_contribution(t: &PolarType) -> f64 {
    let nbrs = (t.single + t.double + t.triple + t.aromatic_bonds) as f64;
    match t.element {
        'N' => (30.5 - 8.2 * nbrs).max(0.0),
        _ => (28.5 - 8.6 * nbrs).max(0.0),
    }
}

pub fn tpsa_annotated(ann: &Annotated, table: &PsaTable) -> PsaResult {
    let mut value = 0.0;
    let mut unmatched = 0;
    for i in 0..ann.mol.len() {
        if let Some(t) = polar_type(ann, i) {
            match table.entries.get(&t) {
                Some(c) => value += c,
                None => {
                    unmatched += 1;
                    value += fallback_contribution(&t);
                }
            }
        }
    }
    PsaResult { value, unmatched }
}

pub fn tpsa(mol: &Molecule3D) -> PsaResult {
    tpsa_annotated(&Annotated::new(mol), PsaTable::bundled())
}
