//! Canonical atom ranking and canonical SMILES output.

use super::aromatic::perceive_aromaticity;
use super::element::Element;
use super::molecule::{BondOrder, Molecule3D};
use super::rings::ring_atoms;
use super::smiles::implicit_hydrogens;

/// Dense ranks of `keys`: equal keys share a rank, ranks start at 0.
fn dense_rank<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().max().map_or(0, |m| m + 1)
}

/// Iterative neighborhood refinement of `init` ranks until the partition
/// stops splitting. `adj` carries (neighbor, edge label).
pub fn refine(init: &[usize], adj: &[Vec<(usize, u32)>]) -> Vec<usize> {
    let mut ranks = init.to_vec();
    loop {
        let keys: Vec<(usize, Vec<(usize, u32)>)> = (0..ranks.len())
            .map(|i| {
                let mut nb: Vec<(usize, u32)> = adj[i].iter().map(|&(j, l)| (ranks[j], l)).collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_rank(&keys);
        if class_count(&next) == class_count(&ranks) {
            return next;
        }
        ranks = next;
    }
}

/// Refine, then break remaining ties one at a time (lowest tied rank,
/// lowest index) until every rank is distinct.
pub fn break_ties(init: &[usize], adj: &[Vec<(usize, u32)>]) -> Vec<usize> {
    let n = init.len();
    let mut ranks = refine(init, adj);
    while class_count(&ranks) < n {
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let tied = (0..n).find(|&r| counts[r] > 1).expect("a tied class exists");
        let pick = (0..n).find(|&i| ranks[i] == tied).expect("member exists");
        let keys: Vec<(usize, u8)> = (0..n).map(|i| (ranks[i], u8::from(i != pick))).collect();
        ranks = refine(&dense_rank(&keys), adj);
    }
    ranks
}

/// Symmetry classes over all atoms (hydrogens included) from element,
/// charge and bond orders. Atoms in one class are indistinguishable by
/// refinement.
pub fn symmetry_classes(mol: &Molecule3D) -> Vec<usize> {
    let init: Vec<(usize, i8, usize)> = mol
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.element.index(), a.formal_charge, mol.degree(i)))
        .collect();
    let mut adj = vec![Vec::new(); mol.atoms.len()];
    for b in &mol.bonds {
        let l = b.order.half_units();
        adj[b.a].push((b.b, l));
        adj[b.b].push((b.a, l));
    }
    refine(&dense_rank(&init), &adj)
}

/// A hydrogen folded into its heavy neighbor's H count when writing.
fn is_suppressed_h(mol: &Molecule3D, i: usize) -> bool {
    let a = &mol.atoms[i];
    if a.element != Element::H || a.formal_charge != 0 {
        return false;
    }
    let nb: Vec<usize> = mol
        .bonds
        .iter()
        .filter(|b| b.contains(i))
        .map(|b| b.other(i))
        .collect();
    nb.len() == 1 && mol.atoms[nb[0]].element != Element::H
}

struct Writer<'a> {
    mol: &'a Molecule3D,
    aromatic_atom: Vec<bool>,
    aromatic_bond: Vec<bool>,
    kept: Vec<bool>,
    hcount: Vec<u32>,
    rank: Vec<usize>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl Writer<'_> {
    fn sorted_neighbors(&self, u: usize) -> Vec<(usize, usize)> {
        let mut nb = self.adj[u].clone();
        nb.sort_by_key(|&(v, _)| self.rank[v]);
        nb
    }

    fn bond_symbol(&self, k: usize) -> &'static str {
        let b = &self.mol.bonds[k];
        if self.aromatic_bond[k] {
            return "";
        }
        match b.order {
            BondOrder::Single | BondOrder::Aromatic => {
                if self.aromatic_atom[b.a] && self.aromatic_atom[b.b] {
                    "-"
                } else {
                    ""
                }
            }
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
        }
    }

    fn atom_symbol(&self, i: usize) -> String {
        let a = &self.mol.atoms[i];
        let arom = self.aromatic_atom[i];
        let h = self.hcount[i];
        let bond_sum: u32 = self.adj[i]
            .iter()
            .map(|&(_, k)| {
                if self.aromatic_bond[k] {
                    1
                } else {
                    self.mol.bonds[k].order.as_integer().unwrap_or(1)
                }
            })
            .sum();
        let sym = if arom {
            a.element.symbol().to_ascii_lowercase()
        } else {
            a.element.symbol().to_string()
        };
        let organic = a.formal_charge == 0
            && a.element != Element::H
            && (!arom || matches!(a.element, Element::C | Element::N | Element::O | Element::S))
            && implicit_hydrogens(a.element, arom, bond_sum) == Some(h);
        if organic {
            return sym;
        }
        let mut s = format!("[{sym}");
        match h {
            0 => {}
            1 => s.push('H'),
            n => s.push_str(&format!("H{n}")),
        }
        match a.formal_charge {
            0 => {}
            1 => s.push('+'),
            -1 => s.push('-'),
            q if q > 0 => s.push_str(&format!("+{q}")),
            q => s.push_str(&format!("-{}", -q)),
        }
        s.push(']');
        s
    }

    /// First pass: DFS tree order and ring-closure bonds.
    fn plan(&self, root: usize, visited: &mut [bool], children: &mut [Vec<(usize, usize)>], closures: &mut Vec<(usize, usize, usize)>, used: &mut [bool]) {
        visited[root] = true;
        for (v, k) in self.sorted_neighbors(root) {
            if used[k] {
                continue;
            }
            used[k] = true;
            if visited[v] {
                // Back edge: opened at v (visited earlier), closed at root.
                closures.push((v, root, k));
            } else {
                children[root].push((v, k));
                self.plan(v, visited, children, closures, used);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &self,
        u: usize,
        children: &[Vec<(usize, usize)>],
        closures: &[(usize, usize, usize)],
        digits: &mut Vec<Option<usize>>,
        open: &mut Vec<Option<usize>>,
        out: &mut String,
    ) {
        out.push_str(&self.atom_symbol(u));
        // Ring events at u, ordered by partner rank.
        let mut events: Vec<(usize, usize, bool)> = closures
            .iter()
            .enumerate()
            .filter_map(|(c, &(o, cl, _))| {
                if o == u {
                    Some((self.rank[cl], c, true))
                } else if cl == u {
                    Some((self.rank[o], c, false))
                } else {
                    None
                }
            })
            .collect();
        events.sort_unstable();
        for (_, c, opening) in events {
            let k = closures[c].2;
            if opening {
                let d = (1..).find(|d| !open.contains(&Some(*d))).expect("free digit");
                open.push(Some(d));
                digits[c] = Some(d);
                out.push_str(self.bond_symbol(k));
                push_digit(out, d);
            } else {
                let d = digits[c].expect("ring opened before closing");
                if let Some(slot) = open.iter_mut().find(|s| **s == Some(d)) {
                    *slot = None;
                }
                push_digit(out, d);
            }
        }
        open.retain(Option::is_some);
        let kids = &children[u];
        for (idx, &(v, k)) in kids.iter().enumerate() {
            let last = idx + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push_str(self.bond_symbol(k));
            self.emit(v, children, closures, digits, open, out);
            if !last {
                out.push(')');
            }
        }
    }
}

fn push_digit(out: &mut String, d: usize) {
    if d < 10 {
        out.push_str(&d.to_string());
    } else {
        out.push_str(&format!("%{d:02}"));
    }
}

/// Canonical ranks of all atoms using the heavy-atom invariants that the
/// SMILES writer sees (hydrogens folded into counts).
fn writer_ranks(mol: &Molecule3D, kept: &[bool], hcount: &[u32], aromatic_atom: &[bool], aromatic_bond: &[bool]) -> Vec<usize> {
    let in_ring = ring_atoms(mol);
    let n = mol.atoms.len();
    let mut adj = vec![Vec::new(); n];
    for (k, b) in mol.bonds.iter().enumerate() {
        if kept[b.a] && kept[b.b] {
            let l = if aromatic_bond[k] { 4 } else { b.order.as_integer().unwrap_or(4) };
            adj[b.a].push((b.b, l));
            adj[b.b].push((b.a, l));
        }
    }
    let init: Vec<(bool, u8, usize, u32, i8, bool, bool)> = (0..n)
        .map(|i| {
            let a = &mol.atoms[i];
            (
                !kept[i],
                a.element.atomic_number(),
                adj[i].len(),
                hcount[i],
                a.formal_charge,
                in_ring[i],
                aromatic_atom[i],
            )
        })
        .collect();
    break_ties(&dense_rank(&init), &adj)
}

/// Canonical SMILES: aromatic atoms in lowercase, hydrogens implicit where
/// the organic subset allows, otherwise in brackets.
pub fn write_smiles(mol: &Molecule3D) -> String {
    let n = mol.atoms.len();
    if n == 0 {
        return String::new();
    }
    let arom = perceive_aromaticity(mol);
    let kept: Vec<bool> = (0..n).map(|i| !is_suppressed_h(mol, i)).collect();
    let mut hcount = vec![0u32; n];
    for i in 0..n {
        if !kept[i] {
            let b = mol.bonds.iter().find(|b| b.contains(i)).expect("suppressed H is bonded");
            hcount[b.other(i)] += 1;
        }
    }
    let rank = writer_ranks(mol, &kept, &hcount, &arom.atoms, &arom.bonds);
    let mut adj = vec![Vec::new(); n];
    for (k, b) in mol.bonds.iter().enumerate() {
        if kept[b.a] && kept[b.b] {
            adj[b.a].push((b.b, k));
            adj[b.b].push((b.a, k));
        }
    }
    let w = Writer {
        mol,
        aromatic_atom: arom.atoms,
        aromatic_bond: arom.bonds,
        kept,
        hcount,
        rank,
        adj,
    };

    let mut order: Vec<usize> = (0..n).filter(|&i| w.kept[i]).collect();
    order.sort_by_key(|&i| w.rank[i]);
    let mut visited = vec![false; n];
    let mut used = vec![false; mol.bonds.len()];
    let mut parts = Vec::new();
    for &root in &order {
        if visited[root] {
            continue;
        }
        let mut children = vec![Vec::new(); n];
        let mut closures = Vec::new();
        w.plan(root, &mut visited, &mut children, &mut closures, &mut used);
        let mut digits = vec![None; closures.len()];
        let mut open = Vec::new();
        let mut out = String::new();
        w.emit(root, &children, &closures, &mut digits, &mut open, &mut out);
        parts.push(out);
    }
    parts.join(".")
}

/// Canonical SMILES of a molecule, or `None` when it cannot be written
/// consistently (empty molecule).
pub fn canonical_smiles(mol: &Molecule3D) -> Option<String> {
    (!mol.atoms.is_empty()).then(|| write_smiles(mol))
}
