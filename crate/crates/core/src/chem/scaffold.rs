//! Murcko scaffolds and scaffold containment.

use std::collections::BTreeSet;

use super::iso::{element_graph, find_monomorphism};
use super::molecule::{BondOrder, Molecule3D};
use super::rings::ring_atoms;
use super::smiles::parse_smiles;
use super::ChemError;

/// Ring systems plus linkers of a molecule, hydrogens and side chains removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaffold {
    pub molecule: Molecule3D,
}

impl Scaffold {
    /// Wrap a molecule as a scaffold; it must contain a ring.
    pub fn new(molecule: Molecule3D) -> Result<Self, ChemError> {
        if !ring_atoms(&molecule).iter().any(|&r| r) {
            return Err(ChemError::NoRing);
        }
        molecule.check_invariants()?;
        Ok(Self { molecule })
    }

    /// Scaffold of the molecule described by `smiles`.
    pub fn from_smiles(smiles: &str) -> Result<Self, ChemError> {
        murcko_scaffold(&parse_smiles(smiles)?)
    }

    pub fn len(&self) -> usize {
        self.molecule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecule.is_empty()
    }
}

/// Prune non-ring atoms of degree ≤ 1 until none remain, keeping atoms
/// multiply bonded to a ring atom.
pub fn murcko_scaffold(mol: &Molecule3D) -> Result<Scaffold, ChemError> {
    let in_ring = ring_atoms(mol);
    if !in_ring.iter().any(|&r| r) {
        return Err(ChemError::NoRing);
    }
    let n = mol.atoms.len();
    let mut keep: BTreeSet<usize> = (0..n).collect();
    let exempt: Vec<bool> = (0..n)
        .map(|i| {
            !in_ring[i]
                && mol.bonds.iter().any(|b| {
                    b.contains(i) && in_ring[b.other(i)] && matches!(b.order, BondOrder::Double | BondOrder::Triple)
                })
        })
        .collect();
    loop {
        let prune: Vec<usize> = keep
            .iter()
            .copied()
            .filter(|&i| {
                !in_ring[i] && !exempt[i] && mol.bonds.iter().filter(|b| b.contains(i) && keep.contains(&b.other(i))).count() <= 1
            })
            .collect();
        if prune.is_empty() {
            break;
        }
        for i in prune {
            keep.remove(&i);
        }
    }
    let (mut sub, _) = mol.induced_subgraph(&keep);
    sub.scaffold_mask = (0..sub.len()).collect();
    sub.provenance = "scaffold".to_string();
    Scaffold::new(sub)
}

/// True iff the scaffold's element-labeled graph embeds in `mol`.
pub fn contains_scaffold(mol: &Molecule3D, scaffold: &Scaffold) -> bool {
    find_monomorphism(&element_graph(&scaffold.molecule), &element_graph(mol), false).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::canon::write_smiles;

    fn scaffold_heavy_count(smi: &str) -> usize {
        murcko_scaffold(&parse_smiles(smi).unwrap()).unwrap().len()
    }

    #[test]
    fn toluene_reduces_to_benzene_ring() {
        let s = murcko_scaffold(&parse_smiles("Cc1ccccc1").unwrap()).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.molecule.bonds.len(), 6);
    }

    #[test]
    fn piperazine_is_its_own_scaffold() {
        assert_eq!(scaffold_heavy_count("C1CNCCN1"), 6);
    }

    #[test]
    fn phenylpiperazine_keeps_both_rings() {
        let s = murcko_scaffold(&parse_smiles("c1ccc(cc1)N1CCNCC1").unwrap()).unwrap();
        assert_eq!(s.len(), 12);
        assert_eq!(s.molecule.bonds.len(), 13);
    }

    #[test]
    fn linker_and_exocyclic_oxygen_are_kept() {
        // benzyl linker between two rings, plus a ring ketone
        assert_eq!(scaffold_heavy_count("c1ccccc1CC1CCC(=O)CC1CC"), 6 + 1 + 6 + 1);
    }

    #[test]
    fn acyclic_molecule_has_no_scaffold() {
        assert_eq!(murcko_scaffold(&parse_smiles("CCO").unwrap()), Err(ChemError::NoRing));
    }

    #[test]
    fn scaffold_is_idempotent() {
        let s = murcko_scaffold(&parse_smiles("CCc1ccc(cc1)N1CCN(C)CC1").unwrap()).unwrap();
        let t = murcko_scaffold(&s.molecule).unwrap();
        assert_eq!(write_smiles(&s.molecule), write_smiles(&t.molecule));
    }

    #[test]
    fn containment() {
        let pip = Scaffold::from_smiles("C1CNCCN1").unwrap();
        assert!(contains_scaffold(&parse_smiles("c1ccc(cc1)N1CCNCC1").unwrap(), &pip));
        assert!(!contains_scaffold(&parse_smiles("c1ccccc1").unwrap(), &pip));
    }
}
