use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::element::Element;
use super::ChemError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    /// Cartesian position in Å.
    pub position: [f64; 3],
    pub formal_charge: i8,
}

impl Atom {
    pub fn new(element: Element, position: [f64; 3]) -> Self {
        Self {
            element,
            position,
            formal_charge: 0,
        }
    }

    pub fn unplaced(element: Element) -> Self {
        Self::new(element, [0.0; 3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Bond order in half-units so aromatic bonds stay integral.
    pub fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn from_integer(order: u32) -> Option<BondOrder> {
        match order {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            _ => None,
        }
    }

    pub fn as_integer(self) -> Option<u32> {
        match self {
            BondOrder::Single => Some(1),
            BondOrder::Double => Some(2),
            BondOrder::Triple => Some(3),
            BondOrder::Aromatic => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    pub fn contains(&self, atom: usize) -> bool {
        self.a == atom || self.b == atom
    }
}

/// Neighbor list entry: (neighbor atom, bond index).
pub type Adjacency = Vec<Vec<(usize, usize)>>;

/// Atoms with 3D positions, explicit bonds and the seed-scaffold mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule3D {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub scaffold_mask: BTreeSet<usize>,
    pub provenance: String,
    /// False for molecules parsed from SMILES (all positions are zero).
    pub has_coordinates: bool,
}

impl Default for Molecule3D {
    fn default() -> Self {
        Self::new()
    }
}

impl Molecule3D {
    pub fn new() -> Self {
        Self {
            atoms: Vec::new(),
            bonds: Vec::new(),
            scaffold_mask: BTreeSet::new(),
            provenance: String::new(),
            has_coordinates: true,
        }
    }

    /// Molecule made of the given atoms with no bonds.
    pub fn from_atoms(atoms: Vec<Atom>) -> Self {
        Self {
            atoms,
            ..Self::new()
        }
    }

    pub fn with_provenance(mut self, tag: &str) -> Self {
        self.provenance = tag.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, ChemError> {
        if a == b {
            return Err(ChemError::InvalidBond {
                a,
                b,
                reason: "self bond".into(),
            });
        }
        if a >= self.atoms.len() || b >= self.atoms.len() {
            return Err(ChemError::InvalidBond {
                a,
                b,
                reason: "atom index out of range".into(),
            });
        }
        if self.bond_between(a, b).is_some() {
            return Err(ChemError::InvalidBond {
                a,
                b,
                reason: "duplicate bond".into(),
            });
        }
        self.bonds.push(Bond { a, b, order });
        Ok(self.bonds.len() - 1)
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.bonds
            .iter()
            .position(|bd| (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a))
    }

    pub fn adjacency(&self) -> Adjacency {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (k, b) in self.bonds.iter().enumerate() {
            adj[b.a].push((b.b, k));
            adj[b.b].push((b.a, k));
        }
        adj
    }

    /// Sum of bond orders in half-units.
    pub fn valence_half_units(&self, atom: usize) -> u32 {
        self.bonds
            .iter()
            .filter(|b| b.contains(atom))
            .map(|b| b.order.half_units())
            .sum()
    }

    /// Bonded valence; aromatic bonds count 1.5, rounded down.
    pub fn valence(&self, atom: usize) -> u32 {
        self.valence_half_units(atom) / 2
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds.iter().filter(|b| b.contains(atom)).count()
    }

    pub fn hydrogen_count(&self, atom: usize) -> usize {
        self.bonds
            .iter()
            .filter(|b| b.contains(atom) && self.atoms[b.other(atom)].element == Element::H)
            .count()
    }

    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.bonds
            .iter()
            .filter(|b| b.contains(atom) && self.atoms[b.other(atom)].element != Element::H)
            .count()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element.is_heavy()).count()
    }

    pub fn count_element(&self, e: Element) -> usize {
        self.atoms.iter().filter(|a| a.element == e).count()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.atoms[i].position, &self.atoms[j].position)
    }

    /// Connected components as sorted atom-index lists, ordered by first atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut out = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.atoms.len() <= 1 || self.components().len() == 1
    }

    /// True if `atoms` induce a connected subgraph.
    pub fn induces_connected(&self, atoms: &BTreeSet<usize>) -> bool {
        let Some(&start) = atoms.iter().next() else {
            return true;
        };
        let adj = self.adjacency();
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if atoms.contains(&v) && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen.len() == atoms.len()
    }

    pub fn centroid_of(&self, atoms: impl IntoIterator<Item = usize>) -> [f64; 3] {
        let mut c = [0.0; 3];
        let mut n = 0usize;
        for i in atoms {
            for (k, ck) in c.iter_mut().enumerate() {
                *ck += self.atoms[i].position[k];
            }
            n += 1;
        }
        if n > 0 {
            for ck in &mut c {
                *ck /= n as f64;
            }
        }
        c
    }

    pub fn center_of_mass(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        let mut m = 0.0;
        for a in &self.atoms {
            let w = a.element.mass();
            for (k, ck) in c.iter_mut().enumerate() {
                *ck += w * a.position[k];
            }
            m += w;
        }
        if m > 0.0 {
            for ck in &mut c {
                *ck /= m;
            }
        }
        c
    }

    pub fn molecular_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.element.mass()).sum()
    }

    /// Induced sub-molecule on `keep` (in ascending index order).
    ///
    /// Returns the molecule and the old→new index map.
    pub fn induced_subgraph(&self, keep: &BTreeSet<usize>) -> (Molecule3D, BTreeMap<usize, usize>) {
        let map: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        let mut sub = Molecule3D {
            atoms: keep.iter().map(|&i| self.atoms[i].clone()).collect(),
            bonds: Vec::new(),
            scaffold_mask: self
                .scaffold_mask
                .iter()
                .filter_map(|i| map.get(i).copied())
                .collect(),
            provenance: self.provenance.clone(),
            has_coordinates: self.has_coordinates,
        };
        for b in &self.bonds {
            if let (Some(&na), Some(&nb)) = (map.get(&b.a), map.get(&b.b)) {
                sub.bonds.push(Bond {
                    a: na,
                    b: nb,
                    order: b.order,
                });
            }
        }
        (sub, map)
    }

    /// Same atoms, no bonds.
    pub fn without_bonds(&self) -> Molecule3D {
        Molecule3D {
            bonds: Vec::new(),
            ..self.clone()
        }
    }

    /// Checks the structural invariants: finite positions, well-formed
    /// bonds, bonded valence within the charge-adjusted maximum, and a
    /// connected scaffold mask.
    pub fn check_invariants(&self) -> Result<(), ChemError> {
        for (i, a) in self.atoms.iter().enumerate() {
            if a.position.iter().any(|x| !x.is_finite()) {
                return Err(ChemError::Invalid(format!("atom {i} has a non-finite position")));
            }
        }
        let mut pairs = BTreeSet::new();
        for b in &self.bonds {
            if b.a == b.b || b.a >= self.atoms.len() || b.b >= self.atoms.len() {
                return Err(ChemError::InvalidBond {
                    a: b.a,
                    b: b.b,
                    reason: "malformed bond".into(),
                });
            }
            if !pairs.insert((b.a.min(b.b), b.a.max(b.b))) {
                return Err(ChemError::InvalidBond {
                    a: b.a,
                    b: b.b,
                    reason: "duplicate bond".into(),
                });
            }
        }
        for (i, a) in self.atoms.iter().enumerate() {
            let v = self.valence(i);
            let max = a.element.max_allowed_valence(a.formal_charge) as u32;
            if v > max {
                return Err(ChemError::Valence {
                    atom: i,
                    element: a.element,
                    valence: v,
                    max,
                });
            }
        }
        if self.scaffold_mask.iter().any(|&i| i >= self.atoms.len()) {
            return Err(ChemError::Invalid("scaffold mask index out of range".into()));
        }
        if !self.induces_connected(&self.scaffold_mask) {
            return Err(ChemError::Invalid("scaffold mask is not connected".into()));
        }
        Ok(())
    }

    /// Hill-order formula, e.g. `C4H10N2`.
    pub fn formula(&self) -> String {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for a in &self.atoms {
            *counts.entry(a.element.symbol()).or_default() += 1;
        }
        let mut out = String::new();
        let mut push = |sym: &str, n: usize| {
            out.push_str(sym);
            if n > 1 {
                out.push_str(&n.to_string());
            }
        };
        let has_c = counts.contains_key("C");
        if has_c {
            push("C", counts.remove("C").unwrap());
            if let Some(h) = counts.remove("H") {
                push("H", h);
            }
        }
        for (sym, n) in counts {
            push(sym, n);
        }
        out
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
