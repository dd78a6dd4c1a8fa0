//! XYZ reading and writing.
//!
//! Layout: atom count, a comment line, then `El x y z` rows with six
//! decimals. The comment carries `provenance=<tag>` and
//! `scaffold=<i,j,...>` tokens when present.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::element::Element;
use super::molecule::{Atom, Molecule3D};
use super::ChemError;

fn err(line: usize, message: impl Into<String>) -> ChemError {
    ChemError::Xyz {
        line,
        message: message.into(),
    }
}

pub fn write_xyz_string(mol: &Molecule3D) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", mol.atoms.len());
    let mut comment = Vec::new();
    if !mol.provenance.is_empty() {
        comment.push(format!("provenance={}", mol.provenance));
    }
    if !mol.scaffold_mask.is_empty() {
        let idx: Vec<String> = mol.scaffold_mask.iter().map(|i| i.to_string()).collect();
        comment.push(format!("scaffold={}", idx.join(",")));
    }
    let _ = writeln!(out, "{}", comment.join(" "));
    for a in &mol.atoms {
        let [x, y, z] = a.position;
        let _ = writeln!(out, "{} {x:.6} {y:.6} {z:.6}", a.element.symbol());
    }
    out
}

pub fn read_xyz_str(text: &str) -> Result<Molecule3D, ChemError> {
    let lines: Vec<&str> = text.lines().collect();
    let first = lines.first().map(|l| l.trim()).filter(|l| !l.is_empty()).ok_or_else(|| err(1, "empty file"))?;
    let count: usize = first.parse().map_err(|_| err(1, format!("bad atom count {first:?}")))?;
    let comment = lines.get(1).ok_or_else(|| err(2, "missing comment line"))?;
    let mut mol = Molecule3D::new();
    for tok in comment.split_whitespace() {
        if let Some(v) = tok.strip_prefix("provenance=") {
            mol.provenance = v.to_string();
        } else if let Some(v) = tok.strip_prefix("scaffold=") {
            let mut mask = BTreeSet::new();
            for s in v.split(',').filter(|s| !s.is_empty()) {
                mask.insert(s.parse::<usize>().map_err(|_| err(2, format!("bad scaffold index {s:?}")))?);
            }
            mol.scaffold_mask = mask;
        }
    }
    for k in 0..count {
        let ln = k + 3;
        let line = lines.get(k + 2).ok_or_else(|| err(ln, format!("expected {count} atoms, found {k}")))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(err(ln, format!("expected 4 fields, found {}", f.len())));
        }
        let element = Element::from_symbol(f[0]).ok_or_else(|| err(ln, format!("unsupported element {:?}", f[0])))?;
        let mut p = [0.0; 3];
        for (d, s) in p.iter_mut().zip(&f[1..]) {
            *d = s.parse::<f64>().map_err(|_| err(ln, format!("bad coordinate {s:?}")))?;
            if !d.is_finite() {
                return Err(err(ln, "non-finite coordinate"));
            }
        }
        mol.add_atom(Atom::new(element, p));
    }
    if let Some((k, _)) = lines.iter().enumerate().skip(count + 2).find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(k + 1, "trailing content after the declared atoms"));
    }
    if mol.scaffold_mask.iter().any(|&i| i >= count) {
        return Err(err(2, "scaffold index out of range"));
    }
    Ok(mol)
}

pub fn write_xyz(path: &Path, mol: &Molecule3D) -> Result<(), ChemError> {
    std::fs::write(path, write_xyz_string(mol)).map_err(|e| ChemError::Io(format!("{}: {e}", path.display())))
}

pub fn read_xyz(path: &Path) -> Result<Molecule3D, ChemError> {
    let text = std::fs::read_to_string(path).map_err(|e| ChemError::Io(format!("{}: {e}", path.display())))?;
    read_xyz_str(&text)
}
