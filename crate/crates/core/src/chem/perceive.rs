//! Bond perception for point clouds: distance-threshold connectivity, then
//! bond-order assignment to satisfy valences.

use super::element::{Element, BOND_TOLERANCE, MULTIPLE_BOND_TOLERANCE};
use super::molecule::{BondOrder, Molecule3D};

/// Upper bound on search nodes for the exact bond-order fallback.
const SEARCH_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Perception {
    pub molecule: Molecule3D,
    pub valid: bool,
    pub issues: Vec<String>,
}

/// Distance threshold for a single bond between two elements.
pub fn single_bond_cutoff(a: Element, b: Element) -> f64 {
    a.covalent_radius() + b.covalent_radius() + BOND_TOLERANCE
}

fn upgrade_cutoff(a: Element, b: Element, to: BondOrder) -> Option<f64> {
    let r = |e: Element| match to {
        BondOrder::Double => e.double_bond_radius(),
        BondOrder::Triple => e.triple_bond_radius(),
        _ => None,
    };
    Some(r(a)? + r(b)? + MULTIPLE_BOND_TOLERANCE)
}

/// Valence units still missing before atom `i` reaches its nearest allowed
/// valence; `None` if it already exceeds every allowed valence.
fn need(mol: &Molecule3D, i: usize, valence: u32) -> Option<u32> {
    let a = &mol.atoms[i];
    a.element
        .allowed_valences(a.formal_charge)
        .iter()
        .map(|&v| v as u32)
        .find(|&v| v >= valence)
        .map(|v| v - valence)
}

fn next_order(o: BondOrder) -> Option<BondOrder> {
    match o {
        BondOrder::Single => Some(BondOrder::Double),
        BondOrder::Double => Some(BondOrder::Triple),
        _ => None,
    }
}

/// Bonds that may be raised one order, given geometry.
fn can_upgrade(mol: &Molecule3D, k: usize, order: BondOrder) -> bool {
    let b = &mol.bonds[k];
    let Some(to) = next_order(order) else {
        return false;
    };
    match upgrade_cutoff(mol.atoms[b.a].element, mol.atoms[b.b].element, to) {
        Some(cut) => mol.distance(b.a, b.b) <= cut,
        None => false,
    }
}

struct Search<'a> {
    mol: &'a Molecule3D,
    orders: Vec<BondOrder>,
    needs: Vec<u32>,
    nodes: usize,
}

impl Search<'_> {
    fn run(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > SEARCH_BUDGET {
            return false;
        }
        // Most constrained atom that still needs bonds.
        let mut best: Option<(usize, Vec<usize>)> = None;
        for i in 0..self.needs.len() {
            if self.needs[i] == 0 {
                continue;
            }
            let opts: Vec<usize> = self
                .mol
                .bonds
                .iter()
                .enumerate()
                .filter(|(k, b)| {
                    b.contains(i) && self.needs[b.other(i)] > 0 && can_upgrade(self.mol, *k, self.orders[*k])
                })
                .map(|(k, _)| k)
                .collect();
            if opts.is_empty() {
                return false;
            }
            if best.as_ref().is_none_or(|(_, o)| opts.len() < o.len()) {
                best = Some((i, opts));
            }
        }
        let Some((_, opts)) = best else {
            return true;
        };
        for k in opts {
            let (a, b) = (self.mol.bonds[k].a, self.mol.bonds[k].b);
            let prev = self.orders[k];
            self.orders[k] = next_order(prev).expect("upgradable");
            self.needs[a] -= 1;
            self.needs[b] -= 1;
            if self.run() {
                return true;
            }
            self.needs[a] += 1;
            self.needs[b] += 1;
            self.orders[k] = prev;
        }
        false
    }
}

/// Perceive bonds from coordinates. Existing bonds are discarded. The
/// result is valid iff the graph is connected and every atom sits exactly
/// at one of its allowed valences.
pub fn perceive_bonds(input: &Molecule3D) -> Perception {
    let mut mol = input.without_bonds();
    let n = mol.atoms.len();
    let mut issues = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let cut = single_bond_cutoff(mol.atoms[i].element, mol.atoms[j].element);
            if mol.distance(i, j) <= cut {
                mol.add_bond(i, j, BondOrder::Single).expect("fresh pair");
            }
        }
    }
    let mut valence: Vec<u32> = (0..n).map(|i| mol.degree(i) as u32).collect();
    let mut needs = vec![0u32; n];
    for i in 0..n {
        match need(&mol, i, valence[i]) {
            Some(v) => needs[i] = v,
            None => issues.push(format!(
                "atom {i} ({}) exceeds its valence with {} bonds",
                mol.atoms[i].element, valence[i]
            )),
        }
    }
    if !issues.is_empty() {
        return Perception {
            molecule: mol,
            valid: false,
            issues,
        };
    }

    // Greedy: raise the shortest eligible bond between two under-valent atoms.
    let mut order: Vec<usize> = (0..mol.bonds.len()).collect();
    order.sort_by(|&x, &y| {
        let (bx, by) = (&mol.bonds[x], &mol.bonds[y]);
        mol.distance(bx.a, bx.b)
            .total_cmp(&mol.distance(by.a, by.b))
            .then((bx.a.min(bx.b), bx.a.max(bx.b)).cmp(&(by.a.min(by.b), by.a.max(by.b))))
    });
    loop {
        let pick = order.iter().copied().find(|&k| {
            let b = &mol.bonds[k];
            needs[b.a] > 0 && needs[b.b] > 0 && can_upgrade(&mol, k, b.order)
        });
        let Some(k) = pick else { break };
        let (a, b) = (mol.bonds[k].a, mol.bonds[k].b);
        mol.bonds[k].order = next_order(mol.bonds[k].order).expect("upgradable");
        valence[a] += 1;
        valence[b] += 1;
        needs[a] -= 1;
        needs[b] -= 1;
    }

    if needs.iter().any(|&x| x > 0) {
        // Greedy got stuck; search all upgrade assignments from scratch.
        let base: Vec<u32> = (0..n).map(|i| mol.degree(i) as u32).collect();
        let mut search = Search {
            mol: &mol,
            orders: vec![BondOrder::Single; mol.bonds.len()],
            needs: (0..n).map(|i| need(&mol, i, base[i]).unwrap_or(0)).collect(),
            nodes: 0,
        };
        if search.run() {
            let orders = search.orders;
            for (b, o) in mol.bonds.iter_mut().zip(orders) {
                b.order = o;
            }
            needs.iter_mut().for_each(|x| *x = 0);
        }
    }

    for (i, &x) in needs.iter().enumerate() {
        if x > 0 {
            issues.push(format!("atom {i} ({}) is {x} short of a full valence", mol.atoms[i].element));
        }
    }
    if !mol.is_connected() {
        issues.push(format!("{} disconnected fragments", mol.components().len()));
    }
    Perception {
        valid: issues.is_empty(),
        molecule: mol,
        issues,
    }
}

/// Distance-threshold connectivity only: every pair within the single-bond
/// cutoff gets a single bond, no order assignment and no validity check.
/// Used for partial molecules whose valences are not yet complete.
pub fn single_bond_graph(input: &Molecule3D) -> Molecule3D {
    let mut mol = input.without_bonds();
    let n = mol.atoms.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if mol.distance(i, j) <= single_bond_cutoff(mol.atoms[i].element, mol.atoms[j].element) {
                mol.add_bond(i, j, BondOrder::Single).expect("fresh pair");
            }
        }
    }
    mol
}

/// Validity of an already bonded molecule: connected, every atom at an
/// allowed valence.
pub fn is_valence_complete(mol: &Molecule3D) -> bool {
    !mol.atoms.is_empty()
        && mol.is_connected()
        && (0..mol.atoms.len()).all(|i| need(mol, i, mol.valence(i)) == Some(0))
}
