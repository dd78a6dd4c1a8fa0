//! Ring perception: ring bonds via bridge detection and a smallest set of
//! smallest rings via Horton candidates and GF(2) elimination.

use std::collections::VecDeque;

use super::molecule::Molecule3D;

/// Per-bond flag: true if the bond lies on a cycle.
pub fn ring_bonds(mol: &Molecule3D) -> Vec<bool> {
    let n = mol.atoms.len();
    let adj = mol.adjacency();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; mol.bonds.len()];
    let mut timer = 0usize;

    // Iterative Tarjan bridge finding.
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, parent bond, next neighbor cursor)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, pb, ref mut cursor)) = stack.last_mut() {
            if *cursor < adj[u].len() {
                let (v, bidx) = adj[u][*cursor];
                *cursor += 1;
                if Some(bidx) == pb {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, Some(bidx), 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[pb.unwrap()] = true;
                    }
                }
            }
        }
    }
    is_bridge.into_iter().map(|b| !b).collect()
}

/// Per-atom flag: true if the atom belongs to any ring.
pub fn ring_atoms(mol: &Molecule3D) -> Vec<bool> {
    let rb = ring_bonds(mol);
    let mut out = vec![false; mol.atoms.len()];
    for (b, &r) in mol.bonds.iter().zip(&rb) {
        if r {
            out[b.a] = true;
            out[b.b] = true;
        }
    }
    out
}

/// A ring as an ordered cycle of atom indices plus its bond indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    pub atoms: Vec<usize>,
    pub bonds: Vec<usize>,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains_atom(&self, a: usize) -> bool {
        self.atoms.contains(&a)
    }
}

fn bfs_tree(adj: &[Vec<(usize, usize)>], root: usize) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    dist[root] = 0;
    let mut q = VecDeque::from([root]);
    while let Some(u) = q.pop_front() {
        for &(v, b) in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                parent[v] = Some((u, b));
                q.push_back(v);
            }
        }
    }
    (dist, parent)
}

fn path_to_root(parent: &[Option<(usize, usize)>], mut v: usize) -> (Vec<usize>, Vec<usize>) {
    let mut atoms = vec![v];
    let mut bonds = Vec::new();
    while let Some((p, b)) = parent[v] {
        atoms.push(p);
        bonds.push(b);
        v = p;
    }
    (atoms, bonds)
}

/// Smallest set of smallest rings.
///
/// Rings are returned sorted by size, then by their sorted atom lists.
pub fn sssr(mol: &Molecule3D) -> Vec<Ring> {
    let n = mol.atoms.len();
    let m = mol.bonds.len();
    let components = mol.components().len();
    let nullity = (m + components).saturating_sub(n);
    if nullity == 0 {
        return Vec::new();
    }
    let adj = mol.adjacency();
    let rb = ring_bonds(mol);

    let mut candidates: Vec<Ring> = Vec::new();
    for root in 0..n {
        let (dist, parent) = bfs_tree(&adj, root);
        for (k, bond) in mol.bonds.iter().enumerate() {
            if !rb[k] {
                continue;
            }
            let (x, y) = (bond.a, bond.b);
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent[x].map(|p| p.1) == Some(k) || parent[y].map(|p| p.1) == Some(k) {
                continue;
            }
            let (px, bx) = path_to_root(&parent, x);
            let (py, by) = path_to_root(&parent, y);
            // Paths must only share the root.
            let shared = px.iter().filter(|a| py.contains(a)).count();
            if shared != 1 {
                continue;
            }
            let mut atoms = px.clone();
            atoms.reverse(); // root .. x
            atoms.extend(py.iter().take(py.len() - 1)); // y .. (child of root)
            let mut bonds = bx;
            bonds.push(k);
            bonds.extend(by);
            candidates.push(Ring { atoms, bonds });
        }
    }
    candidates.sort_by(|a, b| {
        a.len().cmp(&b.len()).then_with(|| {
            let mut sa = a.atoms.clone();
            let mut sb = b.atoms.clone();
            sa.sort_unstable();
            sb.sort_unstable();
            sa.cmp(&sb)
        })
    });

    let words = m.div_ceil(64).max(1);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new(); // (pivot, row)
    let mut chosen = Vec::new();
    for cand in candidates {
        if chosen.len() == nullity {
            break;
        }
        let mut row = vec![0u64; words];
        for &b in &cand.bonds {
            row[b / 64] ^= 1 << (b % 64);
        }
        for (pivot, brow) in &basis {
            if row[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (r, x) in row.iter_mut().zip(brow) {
                    *r ^= x;
                }
            }
        }
        if let Some(p) = first_bit(&row) {
            // Keep basis rows reduced on the new pivot as well.
            for (_, brow) in basis.iter_mut() {
                if brow[p / 64] >> (p % 64) & 1 == 1 {
                    for (b, x) in brow.iter_mut().zip(&row) {
                        *b ^= x;
                    }
                }
            }
            basis.push((p, row));
            chosen.push(cand);
        }
    }
    chosen
}

fn first_bit(row: &[u64]) -> Option<usize> {
    row.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}
