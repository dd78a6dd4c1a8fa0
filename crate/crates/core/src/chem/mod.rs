//! Chemistry kernel: molecule model, SMILES and XYZ I/O, ring and
//! aromaticity perception, bond perception from coordinates, canonical
//! SMILES, graph matching and Murcko scaffolds.

pub mod aromatic;
pub mod canon;
pub mod element;
pub mod iso;
pub mod molecule;
pub mod perceive;
pub mod rings;
pub mod scaffold;
pub mod smiles;
pub mod xyz;

use thiserror::Error;

pub use aromatic::{kekulize, perceive_aromaticity, Aromaticity};
pub use canon::{canonical_smiles, symmetry_classes, write_smiles};
pub use element::Element;
pub use iso::molecules_isomorphic;
pub use molecule::{Atom, Bond, BondOrder, Molecule3D};
pub use perceive::{is_valence_complete, perceive_bonds, single_bond_graph, Perception};
pub use rings::{ring_atoms, ring_bonds, sssr, Ring};
pub use scaffold::{contains_scaffold, murcko_scaffold, Scaffold};
pub use smiles::{parse_smiles, read_smiles_lines, SmilesRecord};
pub use xyz::{read_xyz, read_xyz_str, write_xyz, write_xyz_string};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChemError {
    #[error("SMILES syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported element {symbol:?} at offset {offset}")]
    UnsupportedElement { symbol: String, offset: usize },
    #[error("atom {atom} ({element}) has valence {valence}, maximum {max}")]
    Valence {
        atom: usize,
        element: Element,
        valence: u32,
        max: u32,
    },
    #[error("aromatic system has no valid Kekulé structure")]
    Kekulize,
    #[error("invalid bond {a}-{b}: {reason}")]
    InvalidBond { a: usize, b: usize, reason: String },
    #[error("molecule has no ring")]
    NoRing,
    #[error("XYZ line {line}: {message}")]
    Xyz { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(String),
    #[error("invalid molecule: {0}")]
    Invalid(String),
}
