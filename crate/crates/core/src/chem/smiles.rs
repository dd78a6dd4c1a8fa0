//! SMILES reader for the supported subset: organic-subset and bracket atoms
//! (with hydrogen count and charge), bonds `- = # :`, branches, ring
//! closures (`1`..`9`, `%nn`) and `.` separators. Stereo markers and
//! isotopes are rejected.

use std::collections::BTreeMap;

use super::aromatic::kekulize;
use super::element::Element;
use super::molecule::{Atom, BondOrder, Molecule3D};
use super::ChemError;

#[derive(Debug, Clone)]
struct ParsedAtom {
    element: Element,
    aromatic: bool,
    charge: i8,
    bracket_h: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
}

fn syntax(offset: usize, message: impl Into<String>) -> ChemError {
    ChemError::Syntax {
        offset,
        message: message.into(),
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    atoms: Vec<ParsedAtom>,
    bonds: Vec<(usize, usize, Option<BondSym>)>,
    prev: Option<usize>,
    branches: Vec<(Option<usize>, usize)>,
    pending: Option<(BondSym, usize)>,
    rings: BTreeMap<u32, (usize, Option<BondSym>, usize)>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            s: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            branches: Vec::new(),
            pending: None,
            rings: BTreeMap::new(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), ChemError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'C' | b'N' | b'O' | b'S' | b'F' | b'c' | b'n' | b'o' | b's' => {
                    self.pos += 1;
                    let (element, aromatic) = match c {
                        b'C' if self.peek() == Some(b'l') => {
                            self.pos += 1;
                            (Element::Cl, false)
                        }
                        b'C' => (Element::C, false),
                        b'N' => (Element::N, false),
                        b'O' => (Element::O, false),
                        b'S' => (Element::S, false),
                        b'F' => (Element::F, false),
                        b'c' => (Element::C, true),
                        b'n' => (Element::N, true),
                        b'o' => (Element::O, true),
                        _ => (Element::S, true),
                    };
                    self.push_atom(ParsedAtom {
                        element,
                        aromatic,
                        charge: 0,
                        bracket_h: None,
                    })?;
                }
                b'B' | b'I' | b'P' | b'b' | b'p' => {
                    let sym = if c == b'B' && self.s.get(self.pos + 1) == Some(&b'r') {
                        "Br".to_string()
                    } else {
                        (c as char).to_string()
                    };
                    return Err(ChemError::UnsupportedElement {
                        symbol: sym,
                        offset: start,
                    });
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom)?;
                }
                b'-' | b'=' | b'#' | b':' => {
                    if self.pending.is_some() {
                        return Err(syntax(start, "consecutive bond symbols"));
                    }
                    let sym = match c {
                        b'-' => BondSym::Single,
                        b'=' => BondSym::Double,
                        b'#' => BondSym::Triple,
                        _ => BondSym::Aromatic,
                    };
                    self.pending = Some((sym, start));
                    self.pos += 1;
                }
                b'/' | b'\\' | b'@' => return Err(syntax(start, "stereo markers are not supported")),
                b'(' => {
                    if self.prev.is_none() {
                        return Err(syntax(start, "branch without a preceding atom"));
                    }
                    self.branches.push((self.prev, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = self.branches.pop() else {
                        return Err(syntax(start, "unmatched ')'"));
                    };
                    if self.pending.is_some() {
                        return Err(syntax(start, "bond symbol before ')'"));
                    }
                    self.prev = p;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let label = if c == b'%' {
                        let d = self.s.get(self.pos + 1..self.pos + 3).filter(|d| d.iter().all(u8::is_ascii_digit));
                        let Some(d) = d else {
                            return Err(syntax(start, "'%' must be followed by two digits"));
                        };
                        self.pos += 3;
                        ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                    } else {
                        self.pos += 1;
                        (c - b'0') as u32
                    };
                    self.ring_bond(label, start)?;
                }
                b'.' => {
                    if self.pending.is_some() {
                        return Err(syntax(start, "bond symbol before '.'"));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                _ => {
                    return Err(syntax(start, format!("unexpected character '{}'", c as char)));
                }
            }
        }
        if let Some((&label, &(_, _, offset))) = self.rings.iter().next() {
            return Err(syntax(offset, format!("ring bond {label} is never closed")));
        }
        if let Some(&(_, offset)) = self.branches.last() {
            return Err(syntax(offset, "unclosed branch"));
        }
        if let Some((_, offset)) = self.pending {
            return Err(syntax(offset, "dangling bond symbol"));
        }
        Ok(())
    }

    fn push_atom(&mut self, atom: ParsedAtom) -> Result<(), ChemError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        let pending = self.pending.take();
        match self.prev {
            Some(p) => self.bonds.push((p, idx, pending.map(|x| x.0))),
            None => {
                if let Some((_, off)) = pending {
                    return Err(syntax(off, "bond symbol without a preceding atom"));
                }
            }
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_bond(&mut self, label: u32, offset: usize) -> Result<(), ChemError> {
        let Some(cur) = self.prev else {
            return Err(syntax(offset, "ring bond without a preceding atom"));
        };
        let pending = self.pending.take().map(|x| x.0);
        match self.rings.remove(&label) {
            Some((other, sym, _)) => {
                if other == cur {
                    return Err(syntax(offset, "ring bond closes on the same atom"));
                }
                let sym = match (sym, pending) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(syntax(offset, "conflicting ring bond symbols"));
                    }
                    (a, b) => a.or(b),
                };
                if self
                    .bonds
                    .iter()
                    .any(|&(x, y, _)| (x == cur && y == other) || (x == other && y == cur))
                {
                    return Err(syntax(offset, "ring bond duplicates an existing bond"));
                }
                self.bonds.push((other, cur, sym));
            }
            None => {
                self.rings.insert(label, (cur, pending, offset));
            }
        }
        Ok(())
    }

    fn bracket_atom(&mut self) -> Result<ParsedAtom, ChemError> {
        let start = self.pos;
        self.pos += 1;
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Err(syntax(self.pos, "isotopes are not supported"));
        }
        let sym_start = self.pos;
        let (element, aromatic) = match self.peek() {
            Some(c) if c.is_ascii_uppercase() => {
                self.pos += 1;
                let mut sym = (c as char).to_string();
                if let Some(l) = self.peek().filter(|l| l.is_ascii_lowercase()) {
                    sym.push(l as char);
                    self.pos += 1;
                }
                match Element::from_symbol(&sym) {
                    Some(e) => (e, false),
                    None => {
                        return Err(ChemError::UnsupportedElement {
                            symbol: sym,
                            offset: sym_start,
                        })
                    }
                }
            }
            Some(c @ (b'c' | b'n' | b'o' | b's')) => {
                self.pos += 1;
                let e = match c {
                    b'c' => Element::C,
                    b'n' => Element::N,
                    b'o' => Element::O,
                    _ => Element::S,
                };
                (e, true)
            }
            Some(c) if c.is_ascii_lowercase() => {
                return Err(ChemError::UnsupportedElement {
                    symbol: (c as char).to_string(),
                    offset: sym_start,
                })
            }
            _ => return Err(syntax(self.pos, "expected element symbol in bracket atom")),
        };
        if self.peek() == Some(b'@') {
            return Err(syntax(self.pos, "stereo markers are not supported"));
        }
        let mut h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            h = 1;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                h = d - b'0';
                self.pos += 1;
            }
        }
        let mut charge: i32 = 0;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            let sign = if c == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                charge += sign * (d - b'0') as i32;
                self.pos += 1;
            } else {
                charge += sign;
            }
        }
        if !(-3..=3).contains(&charge) {
            return Err(syntax(start, "formal charge out of range"));
        }
        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(b':') => return Err(syntax(self.pos, "atom classes are not supported")),
            _ => return Err(syntax(start, "unterminated bracket atom")),
        }
        Ok(ParsedAtom {
            element,
            aromatic,
            charge: charge as i8,
            bracket_h: Some(h),
        })
    }
}

/// Implicit hydrogens for an organic-subset atom, given its bond-order sum
/// with aromatic bonds counted as one.
pub(crate) fn implicit_hydrogens(element: Element, aromatic: bool, bond_sum: u32) -> Option<u32> {
    if aromatic {
        return Some(match element {
            Element::C => 3u32.saturating_sub(bond_sum),
            Element::N => 2u32.saturating_sub(bond_sum),
            _ => 0,
        });
    }
    element
        .default_valences()
        .iter()
        .map(|&v| v as u32)
        .find(|&v| v >= bond_sum)
        .map(|v| v - bond_sum)
}

/// Parse a SMILES string into a molecule with explicit hydrogens and a
/// Kekulé bond assignment. Coordinates are left unset.
pub fn parse_smiles(text: &str) -> Result<Molecule3D, ChemError> {
    if text.is_empty() {
        return Err(syntax(0, "empty SMILES"));
    }
    if let Some(p) = text.bytes().position(|b| !b.is_ascii() || b.is_ascii_whitespace()) {
        return Err(syntax(p, "non-ASCII or whitespace character"));
    }
    let mut p = Parser::new(text);
    p.run()?;

    let mut mol = Molecule3D::new();
    mol.has_coordinates = false;
    for a in &p.atoms {
        mol.add_atom(Atom {
            element: a.element,
            position: [0.0; 3],
            formal_charge: a.charge,
        });
    }
    for &(a, b, sym) in &p.bonds {
        let order = match sym {
            Some(BondSym::Single) => BondOrder::Single,
            Some(BondSym::Double) => BondOrder::Double,
            Some(BondSym::Triple) => BondOrder::Triple,
            Some(BondSym::Aromatic) => BondOrder::Aromatic,
            None if p.atoms[a].aromatic && p.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        mol.add_bond(a, b, order)?;
    }
    let heavy = p.atoms.len();
    for i in 0..heavy {
        let pa = &p.atoms[i];
        let bond_sum: u32 = mol
            .bonds
            .iter()
            .filter(|b| b.contains(i))
            .map(|b| b.order.as_integer().unwrap_or(1))
            .sum();
        let h = match pa.bracket_h {
            Some(h) => h as u32,
            None => match implicit_hydrogens(pa.element, pa.aromatic, bond_sum) {
                Some(h) => h,
                None => {
                    return Err(ChemError::Valence {
                        atom: i,
                        element: pa.element,
                        valence: bond_sum,
                        max: pa.element.max_valence() as u32,
                    })
                }
            },
        };
        for _ in 0..h {
            let hi = mol.add_atom(Atom::unplaced(Element::H));
            mol.add_bond(i, hi, BondOrder::Single)?;
        }
    }
    kekulize(&mut mol)?;
    for (i, a) in mol.atoms.iter().enumerate() {
        let v = mol.valence(i);
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
    Ok(mol)
}

/// One record of a SMILES file: the SMILES text and any tab-separated labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SmilesRecord {
    pub smiles: String,
    pub labels: Vec<String>,
}

/// Split a SMILES file into records; blank lines and `#` comments are skipped.
pub fn read_smiles_lines(text: &str) -> Vec<SmilesRecord> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.split('\t');
            SmilesRecord {
                smiles: parts.next().unwrap_or("").trim().to_string(),
                labels: parts.map(|s| s.to_string()).collect(),
            }
        })
        .collect()
}
