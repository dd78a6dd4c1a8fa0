//! Synthetic training data: substituted piperazine chairs built from ideal
//! bond lengths and tetrahedral angles.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actor::canonical_order;
use crate::chem::molecule::{Atom, BondOrder};
use crate::chem::{molecules_isomorphic, perceive_bonds, Element, Molecule3D, Scaffold};
use crate::critic::{synth_pairs, synth_pocket, LabeledPair, PocketGraph};

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(a: V3) -> V3 {
    scale(a, 1.0 / dot(a, a).sqrt())
}

/// Two unit vectors orthogonal to `d` and to each other.
fn frame(d: V3) -> (V3, V3) {
    let helper = if d[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = unit(cross(d, helper));
    let e2 = cross(d, e1);
    (e1, e2)
}

/// Direction at `angle` (degrees) from the back-bond −d, rotated by `phi`.
fn cone(d: V3, angle_deg: f64, phi: f64) -> V3 {
    let c = -(angle_deg.to_radians().cos());
    let s = (1.0 - c * c).sqrt();
    let (e1, e2) = frame(d);
    add(scale(d, c), add(scale(e1, s * phi.cos()), scale(e2, s * phi.sin())))
}

const TETRAHEDRAL: f64 = 109.47;

fn bond_length(a: Element, b: Element) -> f64 {
    use Element::*;
    match (a.min(b), a.max(b)) {
        (H, C) => 1.09,
        (H, N) => 1.01,
        (H, O) => 0.96,
        (C, C) => 1.53,
        (C, N) => 1.47,
        (C, O) => 1.43,
        (C, F) => 1.35,
        (C, Cl) => 1.77,
        (C, S) => 1.82,
        (H, S) => 1.34,
        (N, N) => 1.45,
        (N, O) => 1.45,
        _ => a.covalent_radius() + b.covalent_radius(),
    }
}

/// Substituent groups attachable to the ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    H,
    F,
    Cl,
    Hydroxy,
    Amino,
    Methyl,
    Formyl,
    Thiol,
}

impl Group {
    pub const ON_CARBON: [Group; 6] = [Group::F, Group::Cl, Group::Hydroxy, Group::Amino, Group::Methyl, Group::Thiol];
    pub const ON_NITROGEN: [Group; 5] = [Group::H, Group::Methyl, Group::Formyl, Group::Hydroxy, Group::Amino];
}

struct Builder {
    mol: Molecule3D,
}

impl Builder {
    fn atom(&mut self, e: Element, p: V3, parent: Option<usize>, order: BondOrder) -> usize {
        let i = self.mol.add_atom(Atom::new(e, p));
        if let Some(q) = parent {
            self.mol.add_bond(q, i, order).expect("fresh bond");
        }
        i
    }

    fn attach(&mut self, parent: usize, dir: V3, group: Group, rng: &mut impl Rng) {
        let pe = self.mol.atoms[parent].element;
        let pp = self.mol.atoms[parent].position;
        let single = BondOrder::Single;
        let phi0 = rng.random_range(0.0..std::f64::consts::TAU);
        let third = std::f64::consts::TAU / 3.0;
        let head = |e: Element| add(pp, scale(dir, bond_length(pe, e)));
        match group {
            Group::H => {
                self.atom(Element::H, head(Element::H), Some(parent), single);
            }
            Group::F => {
                self.atom(Element::F, head(Element::F), Some(parent), single);
            }
            Group::Cl => {
                self.atom(Element::Cl, head(Element::Cl), Some(parent), single);
            }
            Group::Hydroxy | Group::Amino | Group::Methyl | Group::Thiol => {
                let (e, hs) = match group {
                    Group::Hydroxy => (Element::O, 1),
                    Group::Thiol => (Element::S, 1),
                    Group::Amino => (Element::N, 2),
                    _ => (Element::C, 3),
                };
                let x = head(e);
                let xi = self.atom(e, x, Some(parent), single);
                for k in 0..hs {
                    let v = cone(dir, TETRAHEDRAL, phi0 + k as f64 * third);
                    self.atom(Element::H, add(x, scale(v, bond_length(e, Element::H))), Some(xi), single);
                }
            }
            Group::Formyl => {
                let x = add(pp, scale(dir, 1.36));
                let xi = self.atom(Element::C, x, Some(parent), single);
                let o = cone(dir, 120.0, phi0);
                let h = cone(dir, 120.0, phi0 + std::f64::consts::PI);
                self.atom(Element::O, add(x, scale(o, 1.22)), Some(xi), BondOrder::Double);
                self.atom(Element::H, add(x, scale(h, 1.10)), Some(xi), single);
            }
        }
    }
}
/// Heavy-atom chair: N1 C2 C3 N4 C5 C6, centered at the origin.
pub fn piperazine_ring() -> Molecule3D {
    // Ring radius and puckering chosen for 1.5 Å ring bonds and ~109.5° angles.
    let r = 2f64.sqrt();
    let h = 0.25;
    let elems = [Element::N, Element::C, Element::C, Element::N, Element::C, Element::C];
    let mut m = Molecule3D::new();
    for (k, &e) in elems.iter().enumerate() {
        let a = k as f64 * std::f64::consts::PI / 3.0;
        let z = if k % 2 == 0 { h } else { -h };
        m.add_atom(Atom::new(e, [r * a.cos(), r * a.sin(), z]));
    }
    for k in 0..6 {
        m.add_bond(k, (k + 1) % 6, BondOrder::Single).expect("ring bond");
    }
    m.scaffold_mask = (0..6).collect();
    m.has_coordinates = true;
    m
}

/// The seed scaffold used for generation, with template coordinates.
pub fn piperazine_scaffold() -> Scaffold {
    let mut m = piperazine_ring();
    m.provenance = "scaffold".to_string();
    Scaffold::new(m).expect("piperazine has a ring")
}

/// Axial and equatorial exo directions of ring atom k.
fn exo_slots(ring: &Molecule3D, k: usize) -> [V3; 2] {
    let p = ring.atoms[k].position;
    let a = ring.atoms[(k + 5) % 6].position;
    let b = ring.atoms[(k + 1) % 6].position;
    let u = unit(add(unit(sub(p, a)), unit(sub(p, b))));
    let w = unit(cross(sub(p, a), sub(p, b)));
    let half = (TETRAHEDRAL / 2.0).to_radians();
    let d1 = unit(add(scale(u, half.cos()), scale(w, half.sin())));
    let d2 = unit(sub(scale(u, half.cos()), scale(w, half.sin())));
    if d1[2].abs() >= d2[2].abs() {
        [d1, d2]
    } else {
        [d2, d1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    /// Maximum non-hydrogen groups on ring carbons; at least one is placed.
    pub max_carbon_groups: usize,
    /// Every non-scaffold atom must lie within this distance of the center
    /// of mass of the atoms preceding it in teacher-forcing order. Slightly
    /// beyond the placement grid radius is tolerated: a boundary point is
    /// within bond perception tolerance.
    pub reach: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            max_carbon_groups: 5,
            reach: 3.5,
        }
    }
}

/// Largest distance from a non-scaffold atom to the center of mass of the
/// atoms before it in teacher-forcing order.
pub fn max_reach(mol: &Molecule3D) -> f64 {
    let order = canonical_order(mol).expect("scaffold present");
    let k = mol.scaffold_mask.len();
    let mut worst: f64 = 0.0;
    for t in k..order.len() {
        let prefix = Molecule3D::from_atoms(order[..t].iter().map(|&i| mol.atoms[i].clone()).collect());
        let c = prefix.center_of_mass();
        worst = worst.max(crate::chem::molecule::distance(&mol.atoms[order[t]].position, &c));
    }
    worst
}

/// One random substituted piperazine, or `None` if the draw fails the
/// reach or perception checks.
pub fn try_molecule(opts: &SynthOptions, rng: &mut impl Rng) -> Option<Molecule3D> {
    let ring = piperazine_ring();
    let mut b = Builder { mol: ring.clone() };
    let n_groups = rng.random_range(1..=opts.max_carbon_groups.max(1));
    let carbons = [1usize, 2, 4, 5];
    let mut slots: Vec<(usize, usize)> = carbons.iter().flat_map(|&c| [(c, 0), (c, 1)]).collect();
    let mut chosen = Vec::new();
    for _ in 0..n_groups {
        let s = slots.remove(rng.random_range(0..slots.len()));
        chosen.push((s, Group::ON_CARBON[rng.random_range(0..Group::ON_CARBON.len())]));
    }
    for &n in &[0usize, 3] {
        let g = Group::ON_NITROGEN[rng.random_range(0..Group::ON_NITROGEN.len())];
        b.attach(n, exo_slots(&ring, n)[1], g, rng);
    }
    for &c in &carbons {
        let dirs = exo_slots(&ring, c);
        for (slot, dir) in dirs.iter().enumerate() {
            let g = chosen.iter().find(|(s, _)| *s == (c, slot)).map_or(Group::H, |x| x.1);
            b.attach(c, *dir, g, rng);
        }
    }
    let mut mol = b.mol;
    mol.has_coordinates = true;
    mol.provenance = "training".to_string();
    let perceived = perceive_bonds(&mol);
    if !perceived.valid || !molecules_isomorphic(&perceived.molecule, &mol) {
        return None;
    }
    if max_reach(&mol) > opts.reach {
        return None;
    }
    Some(mol)
}

/// `n` molecules, deterministic per seed.
pub fn synth_corpus(seed: u64, n: usize, opts: &SynthOptions) -> Vec<Molecule3D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if let Some(m) = try_molecule(opts, &mut rng) {
            out.push(m);
        }
    }
    out
}

/// Training corpus, validation corpus, labeled critic pairs and a target
/// pocket, all deterministic per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: Vec<Molecule3D>,
    pub val: Vec<Molecule3D>,
    pub pairs: Vec<LabeledPair>,
    pub pocket: PocketGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSizes {
    pub train: usize,
    pub val: usize,
    pub pairs: usize,
}

pub fn synth_dataset(seed: u64, sizes: &DatasetSizes, opts: &SynthOptions, acidic: usize, cutoff: f64) -> SynthDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    SynthDataset {
        train: synth_corpus(seed, sizes.train, opts),
        val: synth_corpus(seed.wrapping_add(1), sizes.val, opts),
        pairs: synth_pairs(seed.wrapping_add(2), sizes.pairs, cutoff),
        pocket: synth_pocket(&mut rng, acidic, cutoff),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{canonical_smiles, contains_scaffold};

    #[test]
    fn ring_geometry() {
        let r = piperazine_ring();
        for k in 0..6 {
            assert!((r.distance(k, (k + 1) % 6) - 1.5).abs() < 1e-9);
        }
        let slots = exo_slots(&r, 1);
        assert!(slots[0][2] < -0.9, "axial points down on a low atom");
    }

    #[test]
    fn corpus_is_valid_and_reachable() {
        let opts = SynthOptions::default();
        let corpus = synth_corpus(7, 50, &opts);
        let scaffold = piperazine_scaffold();
        let mut distinct = std::collections::BTreeSet::new();
        for m in &corpus {
            assert!(perceive_bonds(m).valid);
            assert!(contains_scaffold(m, &scaffold));
            assert!(max_reach(m) <= opts.reach);
            distinct.insert(canonical_smiles(m).unwrap());
        }
        assert!(distinct.len() >= 40, "{} distinct", distinct.len());
    }

    #[test]
    fn seeded_corpus_repeats() {
        let opts = SynthOptions::default();
        assert_eq!(synth_corpus(7, 5, &opts), synth_corpus(7, 5, &opts));
    }
}
