//! Structural alerts matched as small heavy-atom query graphs.
//!
//! Query syntax is a SMILES-like subset: organic-subset atoms (uppercase
//! aliphatic, lowercase aromatic), `*` for any atom, bracket atoms with an
//! exact H count and charge (`[CH]`, `[N+]`, `[O-]`), bonds `- = # :`,
//! branches and single-digit ring closures. An unwritten bond matches
//! single or aromatic.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::{table_error, table_reader, Annotated, TableError};
use crate::chem::iso::find_embedding;
use crate::chem::{Element, Molecule3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomQuery {
    pub element: Option<Element>,
    pub aromatic: Option<bool>,
    pub hydrogens: Option<usize>,
    pub charge: Option<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondQuery {
    SingleOrAromatic,
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondQuery {
    /// `class` follows `Annotated::bond_class`.
    fn accepts(self, class: u8) -> bool {
        match self {
            BondQuery::SingleOrAromatic => class == 0 || class == 3,
            BondQuery::Single => class == 0,
            BondQuery::Double => class == 1,
            BondQuery::Triple => class == 2,
            BondQuery::Aromatic => class == 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub name: String,
    pub atoms: Vec<AtomQuery>,
    pub bonds: Vec<(usize, usize, BondQuery)>,
}

fn qerr(pattern: &str, pos: usize, msg: &str) -> TableError {
    table_error("alerts", format!("pattern {pattern:?} at {pos}: {msg}"))
}

impl Query {
    pub fn parse(name: &str, pattern: &str) -> Result<Self, TableError> {
        let s = pattern.as_bytes();
        let mut atoms = Vec::new();
        let mut bonds = Vec::new();
        let mut prev: Option<usize> = None;
        let mut stack = Vec::new();
        let mut pending: Option<BondQuery> = None;
        let mut rings: BTreeMap<u8, (usize, Option<BondQuery>)> = BTreeMap::new();
        let mut i = 0;
        while i < s.len() {
            let c = s[i];
            let atom = match c {
                b'(' => {
                    stack.push(prev.ok_or_else(|| qerr(pattern, i, "branch without atom"))?);
                    i += 1;
                    continue;
                }
                b')' => {
                    prev = Some(stack.pop().ok_or_else(|| qerr(pattern, i, "unbalanced branch"))?);
                    i += 1;
                    continue;
                }
                b'-' | b'=' | b'#' | b':' => {
                    pending = Some(match c {
                        b'-' => BondQuery::Single,
                        b'=' => BondQuery::Double,
                        b'#' => BondQuery::Triple,
                        _ => BondQuery::Aromatic,
                    });
                    i += 1;
                    continue;
                }
                b'1'..=b'9' => {
                    let cur = prev.ok_or_else(|| qerr(pattern, i, "ring digit without atom"))?;
                    match rings.remove(&c) {
                        Some((open, sym)) => bonds.push((open, cur, pending.or(sym).unwrap_or(BondQuery::SingleOrAromatic))),
                        None => {
                            rings.insert(c, (cur, pending));
                        }
                    }
                    pending = None;
                    i += 1;
                    continue;
                }
                b'[' => {
                    let end = s[i..].iter().position(|&b| b == b']').ok_or_else(|| qerr(pattern, i, "unclosed bracket"))? + i;
                    let q = parse_bracket(&pattern[i + 1..end]).ok_or_else(|| qerr(pattern, i, "bad bracket atom"))?;
                    i = end + 1;
                    q
                }
                b'*' => {
                    i += 1;
                    AtomQuery {
                        element: None,
                        aromatic: None,
                        hydrogens: None,
                        charge: None,
                    }
                }
                _ => {
                    let (sym, len) = if s[i..].starts_with(b"Cl") { ("Cl", 2) } else { (&pattern[i..i + 1], 1) };
                    let (element, aromatic) = symbol(sym).ok_or_else(|| qerr(pattern, i, "unknown atom"))?;
                    i += len;
                    AtomQuery {
                        element: Some(element),
                        aromatic: Some(aromatic),
                        hydrogens: None,
                        charge: None,
                    }
                }
            };
            atoms.push(atom);
            let cur = atoms.len() - 1;
            if let Some(p) = prev {
                bonds.push((p, cur, pending.take().unwrap_or(BondQuery::SingleOrAromatic)));
            }
            prev = Some(cur);
        }
        if !rings.is_empty() || !stack.is_empty() || atoms.is_empty() {
            return Err(qerr(pattern, s.len(), "incomplete pattern"));
        }
        Ok(Self {
            name: name.to_string(),
            atoms,
            bonds,
        })
    }

    /// True if the query embeds in the heavy-atom graph of the molecule.
    pub fn matches(&self, ann: &Annotated) -> bool {
        let heavy: Vec<usize> = (0..ann.mol.len()).filter(|&i| ann.element(i).is_heavy()).collect();
        let pos: BTreeMap<usize, usize> = heavy.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        let t_adj: Vec<Vec<usize>> = heavy
            .iter()
            .map(|&i| ann.heavy_neighbors(i).map(|(j, _)| pos[&j]).collect())
            .collect();
        let mut p_adj = vec![Vec::new(); self.atoms.len()];
        let mut p_bond = BTreeMap::new();
        for &(a, b, q) in &self.bonds {
            p_adj[a].push(b);
            p_adj[b].push(a);
            p_bond.insert((a.min(b), a.max(b)), q);
        }
        let node_ok = |p: usize, t: usize| {
            let q = &self.atoms[p];
            let i = heavy[t];
            let a = &ann.mol.atoms[i];
            q.element.is_none_or(|e| e == a.element)
                && q.aromatic.is_none_or(|ar| ar == ann.is_aromatic(i))
                && q.hydrogens.is_none_or(|h| h == ann.hydrogens[i])
                && q.charge.is_none_or(|c| c == a.formal_charge)
        };
        let edge_ok = |(p1, p2): (usize, usize), (t1, t2): (usize, usize)| {
            let q = p_bond[&(p1.min(p2), p1.max(p2))];
            let k = ann.mol.bond_between(heavy[t1], heavy[t2]).expect("adjacent");
            q.accepts(ann.bond_class(k))
        };
        find_embedding(&p_adj, &t_adj, node_ok, edge_ok, false).is_some()
    }
}

fn symbol(sym: &str) -> Option<(Element, bool)> {
    match sym {
        "c" | "n" | "o" | "s" => Some((Element::from_symbol(&sym.to_ascii_uppercase())?, true)),
        _ => Some((Element::from_symbol(sym)?, false)),
    }
}

fn parse_bracket(body: &str) -> Option<AtomQuery> {
    let b = body.as_bytes();
    let mut i = 0;
    let (element, aromatic) = if b.first() == Some(&b'*') {
        i = 1;
        (None, None)
    } else {
        let len = if b.len() >= 2 && b[0].is_ascii_uppercase() && b[1].is_ascii_lowercase() { 2 } else { 1 };
        let (e, ar) = symbol(body.get(..len)?)?;
        i += len;
        (Some(e), Some(ar))
    };
    let mut hydrogens = None;
    if b.get(i) == Some(&b'H') {
        i += 1;
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        hydrogens = Some(if start == i { 1 } else { body[start..i].parse().ok()? });
    }
    let mut charge = None;
    if let Some(&sign) = b.get(i) {
        let unit: i8 = match sign {
            b'+' => 1,
            b'-' => -1,
            _ => return None,
        };
        i += 1;
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        let mag: i8 = if start == i { 1 } else { body[start..i].parse().ok()? };
        charge = Some(unit * mag);
    }
    (i == b.len()).then_some(AtomQuery {
        element,
        aromatic,
        hydrogens,
        charge,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertSet {
    pub queries: Vec<Query>,
}

#[derive(Debug, Deserialize)]
struct Row {
    name: String,
    pattern: String,
}

impl AlertSet {
    pub fn from_csv(text: &str) -> Result<Self, TableError> {
        let mut queries = Vec::new();
        for row in table_reader(text).deserialize::<Row>() {
            let r = row.map_err(|e| table_error("alerts", e))?;
            queries.push(Query::parse(&r.name, &r.pattern)?);
        }
        Ok(Self { queries })
    }

    pub fn bundled() -> &'static AlertSet {
        static A: OnceLock<AlertSet> = OnceLock::new();
        A.get_or_init(|| AlertSet::from_csv(include_str!("../../data/alerts.csv")).expect("bundled alert list parses"))
    }

    /// Names of the alerts present in the molecule.
    pub fn matched(&self, ann: &Annotated) -> Vec<&str> {
        self.queries.iter().filter(|q| q.matches(ann)).map(|q| q.name.as_str()).collect()
    }

    pub fn count_annotated(&self, ann: &Annotated) -> usize {
        self.matched(ann).len()
    }
}

pub fn alert_count(mol: &Molecule3D) -> usize {
    AlertSet::bundled().count_annotated(&Annotated::new(mol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn matched(smi: &str) -> Vec<String> {
        let m = parse_smiles(smi).unwrap();
        AlertSet::bundled().matched(&Annotated::new(&m)).into_iter().map(String::from).collect()
    }

    #[test]
    fn bundled_list_parses() {
        assert!(AlertSet::bundled().queries.len() >= 20);
    }

    #[test]
    fn typical_alerts_fire() {
        assert_eq!(matched("CC=O"), vec!["aldehyde"]);
        assert!(matched("C[N+](=O)[O-]").contains(&"nitro".to_string()));
        assert!(matched("CCSS").contains(&"disulfide".to_string()));
        assert!(matched("C1OC1C").contains(&"epoxide".to_string()));
        assert!(matched("C=CC(=O)C").contains(&"michael_acceptor".to_string()));
    }

    #[test]
    fn clean_molecules_have_no_alerts() {
        assert!(matched("c1ccc(cc1)N1CCNCC1").is_empty());
        assert!(matched("CC(=O)Nc1ccc(O)cc1").is_empty());
        // aromatic ring bonds do not count as a polyene
        assert!(matched("c1ccccc1").is_empty());
    }

    #[test]
    fn bracket_queries() {
        let q = Query::parse("x", "[CH2][O-]").unwrap();
        assert_eq!(q.atoms[0].hydrogens, Some(2));
        assert_eq!(q.atoms[1].charge, Some(-1));
        assert!(Query::parse("x", "C1CC").is_err());
    }
}
