//! Kekulization of aromatic bond input and Hückel-style aromaticity
//! perception over the SSSR.

use std::collections::BTreeSet;

use super::element::Element;
use super::molecule::{BondOrder, Molecule3D};
use super::rings::{sssr, Ring};
use super::ChemError;

/// Replace every `Aromatic` bond by an alternating single/double assignment.
pub fn kekulize(mol: &mut Molecule3D) -> Result<(), ChemError> {
    let arom: Vec<usize> = (0..mol.bonds.len())
        .filter(|&k| mol.bonds[k].order == BondOrder::Aromatic)
        .collect();
    if arom.is_empty() {
        return Ok(());
    }
    let mut atoms: BTreeSet<usize> = BTreeSet::new();
    for &k in &arom {
        atoms.insert(mol.bonds[k].a);
        atoms.insert(mol.bonds[k].b);
    }
    // Atoms still short of their lowest valence once each aromatic bond
    // counts as single need exactly one double bond.
    let mut needs = Vec::new();
    for &a in &atoms {
        let s: u32 = mol
            .bonds
            .iter()
            .filter(|b| b.contains(a))
            .map(|b| b.order.as_integer().unwrap_or(1))
            .sum();
        let at = &mol.atoms[a];
        let allowed = at.element.allowed_valences(at.formal_charge);
        let target = allowed.iter().map(|&v| v as u32).find(|&v| v >= s).unwrap_or(s);
        if target > s {
            needs.push(a);
        }
    }
    let mut partner: Vec<Option<usize>> = vec![None; mol.atoms.len()];
    let needs_set: BTreeSet<usize> = needs.iter().copied().collect();
    let edges: Vec<(usize, usize, usize)> = arom
        .iter()
        .map(|&k| (mol.bonds[k].a, mol.bonds[k].b, k))
        .filter(|(a, b, _)| needs_set.contains(a) && needs_set.contains(b))
        .collect();
    let mut chosen = Vec::new();
    if !match_all(&needs, &edges, &mut partner, &mut chosen) {
        return Err(ChemError::Kekulize);
    }
    for &k in &arom {
        mol.bonds[k].order = BondOrder::Single;
    }
    for k in chosen {
        mol.bonds[k].order = BondOrder::Double;
    }
    Ok(())
}

fn match_all(
    needs: &[usize],
    edges: &[(usize, usize, usize)],
    partner: &mut Vec<Option<usize>>,
    chosen: &mut Vec<usize>,
) -> bool {
    // Most constrained unmatched atom first.
    let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
    for &a in needs {
        if partner[a].is_some() {
            continue;
        }
        let opts: Vec<(usize, usize)> = edges
            .iter()
            .filter_map(|&(x, y, k)| {
                if x == a && partner[y].is_none() {
                    Some((y, k))
                } else if y == a && partner[x].is_none() {
                    Some((x, k))
                } else {
                    None
                }
            })
            .collect();
        if best.as_ref().is_none_or(|(_, o)| opts.len() < o.len()) {
            let empty = opts.is_empty();
            best = Some((a, opts));
            if empty {
                break;
            }
        }
    }
    let Some((a, opts)) = best else {
        return true;
    };
    for (b, k) in opts {
        partner[a] = Some(b);
        partner[b] = Some(a);
        chosen.push(k);
        if match_all(needs, edges, partner, chosen) {
            return true;
        }
        chosen.pop();
        partner[a] = None;
        partner[b] = None;
    }
    false
}

/// Aromaticity flags for atoms, bonds and SSSR rings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aromaticity {
    pub atoms: Vec<bool>,
    pub bonds: Vec<bool>,
    pub rings: Vec<Ring>,
    pub aromatic_rings: Vec<bool>,
}

impl Aromaticity {
    pub fn aromatic_ring_count(&self) -> usize {
        self.aromatic_rings.iter().filter(|&&a| a).count()
    }
}

/// π-electron contribution of `atom` to the ring system `system`, or
/// `None` if the atom cannot take part in an aromatic system.
fn pi_electrons(mol: &Molecule3D, atom: usize, system: &BTreeSet<usize>) -> Option<u32> {
    let a = &mol.atoms[atom];
    let mut in_double = false;
    let mut exo_double_hetero = false;
    let mut exo_double_other = false;
    let mut any_aromatic = false;
    let mut valence = 0;
    for b in mol.bonds.iter().filter(|b| b.contains(atom)) {
        let other = b.other(atom);
        valence += b.order.as_integer().unwrap_or(1);
        match b.order {
            BondOrder::Double => {
                if system.contains(&other) {
                    in_double = true;
                } else if matches!(mol.atoms[other].element, Element::O | Element::N | Element::S) {
                    exo_double_hetero = true;
                } else {
                    exo_double_other = true;
                }
            }
            BondOrder::Triple => return None,
            BondOrder::Aromatic => any_aromatic = true,
            BondOrder::Single => {}
        }
    }
    if in_double || any_aromatic {
        return Some(1);
    }
    if exo_double_other {
        return None;
    }
    if exo_double_hetero {
        return (a.element == Element::C).then_some(0);
    }
    match (a.element, a.formal_charge, valence) {
        (Element::N, 0, 3) | (Element::O, 0, 2) | (Element::S, 0, 2) => Some(2),
        (Element::C, -1, 3) => Some(2),
        _ => None,
    }
}

fn is_aromatic_system(mol: &Molecule3D, system: &BTreeSet<usize>) -> bool {
    let mut total = 0;
    for &a in system {
        match pi_electrons(mol, a, system) {
            Some(e) => total += e,
            None => return false,
        }
    }
    total >= 2 && (total - 2) % 4 == 0
}

/// Perceive aromatic rings on a Kekulé (or aromatic-bond) molecule.
pub fn perceive_aromaticity(mol: &Molecule3D) -> Aromaticity {
    let rings = sssr(mol);
    let mut aromatic_rings: Vec<bool> = rings
        .iter()
        .map(|r| {
            (5..=7).contains(&r.len())
                && is_aromatic_system(mol, &r.atoms.iter().copied().collect())
        })
        .collect();
    // Fused pairs that are aromatic only as a whole (e.g. one Kekulé ring of naphthalene).
    for i in 0..rings.len() {
        for j in (i + 1)..rings.len() {
            if aromatic_rings[i] && aromatic_rings[j] {
                continue;
            }
            let shared = rings[i].bonds.iter().filter(|b| rings[j].bonds.contains(b)).count();
            if shared != 1 || rings[i].len() > 7 || rings[j].len() > 7 {
                continue;
            }
            let union: BTreeSet<usize> = rings[i].atoms.iter().chain(&rings[j].atoms).copied().collect();
            if is_aromatic_system(mol, &union) {
                aromatic_rings[i] = true;
                aromatic_rings[j] = true;
            }
        }
    }
    let mut atoms = vec![false; mol.atoms.len()];
    let mut bonds = vec![false; mol.bonds.len()];
    for (r, &ar) in rings.iter().zip(&aromatic_rings) {
        if ar {
            for &a in &r.atoms {
                atoms[a] = true;
            }
            for &b in &r.bonds {
                bonds[b] = true;
            }
        }
    }
    for (k, b) in mol.bonds.iter().enumerate() {
        if b.order == BondOrder::Aromatic {
            bonds[k] = true;
            atoms[b.a] = true;
            atoms[b.b] = true;
        }
    }
    Aromaticity {
        atoms,
        bonds,
        rings,
        aromatic_rings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::smiles::parse_smiles;

    #[test]
    fn benzene_kekulizes_to_three_double_bonds() {
        let m = parse_smiles("c1ccccc1").unwrap();
        let doubles = m.bonds.iter().filter(|b| b.order == BondOrder::Double).count();
        assert_eq!(doubles, 3);
        let ar = perceive_aromaticity(&m);
        assert_eq!(ar.aromatic_ring_count(), 1);
    }

    #[test]
    fn heteroaromatics() {
        for (smi, n) in [
            ("c1ccncc1", 1),
            ("c1cc[nH]c1", 1),
            ("c1ccoc1", 1),
            ("c1ccsc1", 1),
            ("c1ccc2ccccc2c1", 2),
            ("C1CCCCC1", 0),
            ("C1=CCCCC1", 0),
        ] {
            let m = parse_smiles(smi).unwrap();
            assert_eq!(perceive_aromaticity(&m).aromatic_ring_count(), n, "{smi}");
        }
    }

    #[test]
    fn impossible_kekule_is_rejected() {
        assert!(matches!(parse_smiles("c1cccc1"), Err(ChemError::Kekulize)));
    }
}
