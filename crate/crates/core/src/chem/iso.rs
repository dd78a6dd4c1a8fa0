//! Backtracking (sub)graph matching on small labeled graphs.

use std::collections::VecDeque;

use super::aromatic::perceive_aromaticity;
use super::molecule::Molecule3D;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    pub labels: Vec<u32>,
    pub adj: Vec<Vec<(usize, u32)>>,
}

impl LabeledGraph {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn edge(&self, u: usize, v: usize) -> Option<u32> {
        self.adj[u].iter().find(|(w, _)| *w == v).map(|(_, l)| *l)
    }
}

/// Labeled graph of a molecule: node label = element and charge, edge label
/// = bond order with perceived-aromatic bonds collapsed to one label so
/// that alternative Kekulé assignments compare equal.
pub fn molecule_graph(mol: &Molecule3D) -> LabeledGraph {
    let arom = perceive_aromaticity(mol);
    let labels = mol
        .atoms
        .iter()
        .map(|a| (a.element.index() as u32) << 8 | (a.formal_charge as u8 as u32))
        .collect();
    let mut adj = vec![Vec::new(); mol.atoms.len()];
    for (k, b) in mol.bonds.iter().enumerate() {
        let l = if arom.bonds[k] {
            4
        } else {
            b.order.as_integer().unwrap_or(4)
        };
        adj[b.a].push((b.b, l));
        adj[b.b].push((b.a, l));
    }
    LabeledGraph { labels, adj }
}

/// Element-only graph (no bond labels), used for scaffold containment.
pub fn element_graph(mol: &Molecule3D) -> LabeledGraph {
    let labels = mol.atoms.iter().map(|a| a.element.index() as u32).collect();
    let mut adj = vec![Vec::new(); mol.atoms.len()];
    for b in &mol.bonds {
        adj[b.a].push((b.b, 0));
        adj[b.b].push((b.a, 0));
    }
    LabeledGraph { labels, adj }
}

struct Matcher<'a, F, G> {
    p_adj: &'a [Vec<usize>],
    t_adj: &'a [Vec<usize>],
    node_ok: F,
    edge_ok: G,
    exact_degree: bool,
    order: Vec<usize>,
    map: Vec<Option<usize>>,
    used: Vec<bool>,
}

impl<F, G> Matcher<'_, F, G>
where
    F: Fn(usize, usize) -> bool,
    G: Fn((usize, usize), (usize, usize)) -> bool,
{
    fn feasible(&self, pu: usize, tu: usize) -> bool {
        if self.used[tu] {
            return false;
        }
        let (dp, dt) = (self.p_adj[pu].len(), self.t_adj[tu].len());
        if (self.exact_degree && dp != dt) || dp > dt || !(self.node_ok)(pu, tu) {
            return false;
        }
        self.p_adj[pu].iter().all(|&pv| match self.map[pv] {
            Some(tv) => self.t_adj[tu].contains(&tv) && (self.edge_ok)((pu, pv), (tu, tv)),
            None => true,
        })
    }

    fn search(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let pu = self.order[depth];
        // Candidates adjacent to an already-mapped neighbor, if any.
        let anchor = self.p_adj[pu].iter().find_map(|&pv| self.map[pv]);
        let candidates: Vec<usize> = match anchor {
            Some(ta) => self.t_adj[ta].clone(),
            None => (0..self.t_adj.len()).collect(),
        };
        for tu in candidates {
            if self.feasible(pu, tu) {
                self.map[pu] = Some(tu);
                self.used[tu] = true;
                if self.search(depth + 1) {
                    return true;
                }
                self.map[pu] = None;
                self.used[tu] = false;
            }
        }
        false
    }
}

fn match_order(p_adj: &[Vec<usize>]) -> Vec<usize> {
    let n = p_adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    while let Some(start) = (0..n).filter(|&i| !seen[i]).max_by_key(|&i| (p_adj[i].len(), usize::MAX - i)) {
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = q.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = p_adj[u].iter().copied().filter(|&v| !seen[v]).collect();
            nb.sort_by_key(|&v| (usize::MAX - p_adj[v].len(), v));
            for v in nb {
                seen[v] = true;
                q.push_back(v);
            }
        }
    }
    order
}

/// Generic backtracking embedding of a pattern graph into a target graph.
/// `node_ok(p, t)` and `edge_ok((p1, p2), (t1, t2))` decide compatibility.
/// With `exact_degree`, degrees must agree (used for isomorphism).
pub fn find_embedding<F, G>(
    p_adj: &[Vec<usize>],
    t_adj: &[Vec<usize>],
    node_ok: F,
    edge_ok: G,
    exact_degree: bool,
) -> Option<Vec<usize>>
where
    F: Fn(usize, usize) -> bool,
    G: Fn((usize, usize), (usize, usize)) -> bool,
{
    if p_adj.len() > t_adj.len() {
        return None;
    }
    let mut m = Matcher {
        p_adj,
        t_adj,
        node_ok,
        edge_ok,
        exact_degree,
        order: match_order(p_adj),
        map: vec![None; p_adj.len()],
        used: vec![false; t_adj.len()],
    };
    m.search(0).then(|| m.map.into_iter().map(Option::unwrap).collect())
}

fn plain_adj(g: &LabeledGraph) -> Vec<Vec<usize>> {
    g.adj.iter().map(|nb| nb.iter().map(|&(v, _)| v).collect()).collect()
}

/// Find an injective map of pattern nodes onto target nodes preserving node
/// labels and mapping every pattern edge onto a target edge (with equal
/// edge label when `match_edges`).
pub fn find_monomorphism(pattern: &LabeledGraph, target: &LabeledGraph, match_edges: bool) -> Option<Vec<usize>> {
    find_embedding(
        &plain_adj(pattern),
        &plain_adj(target),
        |p, t| pattern.labels[p] == target.labels[t],
        |(p1, p2), (t1, t2)| !match_edges || pattern.edge(p1, p2) == target.edge(t1, t2),
        false,
    )
}

pub fn is_isomorphic(a: &LabeledGraph, b: &LabeledGraph) -> bool {
    if a.len() != b.len() || a.edge_count() != b.edge_count() {
        return false;
    }
    let mut la = a.labels.clone();
    let mut lb = b.labels.clone();
    la.sort_unstable();
    lb.sort_unstable();
    if la != lb {
        return false;
    }
    find_embedding(
        &plain_adj(a),
        &plain_adj(b),
        |p, t| a.labels[p] == b.labels[t],
        |(p1, p2), (t1, t2)| a.edge(p1, p2) == b.edge(t1, t2),
        true,
    )
    .is_some()
}

/// Graph isomorphism of two molecules (elements, charges, bond orders with
/// aromatic normalization).
pub fn molecules_isomorphic(a: &Molecule3D, b: &Molecule3D) -> bool {
    is_isomorphic(&molecule_graph(a), &molecule_graph(b))
}
