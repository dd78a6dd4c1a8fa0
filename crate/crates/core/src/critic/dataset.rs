//! Labeled-pair datasets on disk.
//!
//! Layout of a dataset directory:
//!
//! ```text
//! labels.csv           id,pocket,ligand,active,affinity
//! pockets/<id>.xyz     XYZ with a fifth column: residue index
//! ligands/<id>.xyz     plain XYZ
//! ```
//!
//! The pocket comment line is `residues=ASP,GLY,...` in residue-index
//! order. `affinity` may be empty.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{residue_index, CriticError, PocketAtom, PocketGraph, RESIDUE_NAMES};
use crate::chem::{read_xyz, write_xyz, Element, Molecule3D};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub id: String,
    pub pocket: PocketGraph,
    pub ligand: Molecule3D,
    pub active: bool,
    pub affinity: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    pocket: String,
    ligand: String,
    active: u8,
    affinity: Option<f64>,
}

fn io(e: impl std::fmt::Display) -> CriticError {
    CriticError::Dataset(e.to_string())
}

pub fn pocket_to_xyz(p: &PocketGraph) -> String {
    let mut out = String::new();
    let names: Vec<&str> = p.residue_types.iter().map(|&t| RESIDUE_NAMES[t]).collect();
    let _ = writeln!(out, "{}", p.atoms.len());
    let _ = writeln!(out, "residues={}", names.join(","));
    for a in &p.atoms {
        let [x, y, z] = a.position;
        let _ = writeln!(out, "{} {x:.6} {y:.6} {z:.6} {}", a.element.symbol(), a.residue);
    }
    out
}

pub fn pocket_from_xyz(text: &str, cutoff: f64) -> Result<PocketGraph, CriticError> {
    let mut lines = text.lines();
    let count: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| io("pocket: bad atom count"))?;
    let comment = lines.next().ok_or_else(|| io("pocket: missing comment line"))?;
    let list = comment
        .split_whitespace()
        .find_map(|t| t.strip_prefix("residues="))
        .ok_or_else(|| io("pocket: comment lacks residues="))?;
    let types = list
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| residue_index(s).ok_or_else(|| io(format!("pocket: unknown residue {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut atoms = Vec::with_capacity(count);
    for (k, line) in lines.take(count).enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(io(format!("pocket line {}: expected 5 fields", k + 3)));
        }
        let element = Element::from_symbol(f[0]).ok_or_else(|| io(format!("pocket: unknown element {:?}", f[0])))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| io(format!("pocket line {}: bad number {s:?}", k + 3)));
        atoms.push(PocketAtom {
            element,
            position: [num(f[1])?, num(f[2])?, num(f[3])?],
            residue: f[4].parse().map_err(|_| io(format!("pocket line {}: bad residue index", k + 3)))?,
        });
    }
    if atoms.len() != count {
        return Err(io(format!("pocket: expected {count} atoms, found {}", atoms.len())));
    }
    PocketGraph::build(types, atoms, cutoff)
}

pub fn write_pairs(dir: &Path, pairs: &[LabeledPair]) -> Result<(), CriticError> {
    fs::create_dir_all(dir.join("pockets")).map_err(io)?;
    fs::create_dir_all(dir.join("ligands")).map_err(io)?;
    let mut w = csv::Writer::from_path(dir.join("labels.csv")).map_err(io)?;
    for p in pairs {
        let pocket = format!("pockets/{}.xyz", p.id);
        let ligand = format!("ligands/{}.xyz", p.id);
        fs::write(dir.join(&pocket), pocket_to_xyz(&p.pocket)).map_err(io)?;
        write_xyz(&dir.join(&ligand), &p.ligand).map_err(io)?;
        w.serialize(ManifestRow {
            id: p.id.clone(),
            pocket,
            ligand,
            active: u8::from(p.active),
            affinity: p.affinity,
        })
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn read_pairs(dir: &Path, pocket_cutoff: f64) -> Result<Vec<LabeledPair>, CriticError> {
    let mut r = csv::Reader::from_path(dir.join("labels.csv")).map_err(io)?;
    let mut out = Vec::new();
    for row in r.deserialize::<ManifestRow>() {
        let row = row.map_err(io)?;
        let text = fs::read_to_string(dir.join(&row.pocket)).map_err(io)?;
        out.push(LabeledPair {
            pocket: pocket_from_xyz(&text, pocket_cutoff)?,
            ligand: read_xyz(&dir.join(&row.ligand)).map_err(io)?,
            active: match row.active {
                0 => false,
                1 => true,
                v => return Err(io(format!("{}: active must be 0 or 1, got {v}", row.id))),
            },
            affinity: row.affinity,
            id: row.id,
        });
    }
    Ok(out)
}
