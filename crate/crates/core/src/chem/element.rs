//! Supported elements and their tabulated properties.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Bond-perception tolerance added to the sum of single-bond covalent radii (Å).
pub const BOND_TOLERANCE: f64 = 0.4;

/// Tolerance applied to the multiple-bond radius sums when upgrading bond orders (Å).
pub const MULTIPLE_BOND_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    H,
    C,
    N,
    O,
    F,
    S,
    Cl,
}

impl Element {
    pub const ALL: [Element; 7] = [
        Element::H,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::S,
        Element::Cl,
    ];

    pub const COUNT: usize = 7;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Element> {
        Self::ALL.get(i).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::S => "S",
            Element::Cl => "Cl",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Some(match s {
            "H" => Element::H,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "F" => Element::F,
            "S" => Element::S,
            "Cl" => Element::Cl,
            _ => return None,
        })
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::S => 16,
            Element::Cl => 17,
        }
    }

    /// Standard atomic weight (Da).
    pub fn mass(self) -> f64 {
        match self {
            Element::H => 1.008,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::S => 32.067,
            Element::Cl => 35.453,
        }
    }

    /// Single-bond covalent radius (Å).
    pub fn covalent_radius(self) -> f64 {
        match self {
            Element::H => 0.31,
            Element::C => 0.76,
            Element::N => 0.71,
            Element::O => 0.66,
            Element::F => 0.57,
            Element::S => 1.05,
            Element::Cl => 1.02,
        }
    }

    /// Double-bond covalent radius (Å), if the element forms double bonds.
    pub fn double_bond_radius(self) -> Option<f64> {
        match self {
            Element::C => Some(0.67),
            Element::N => Some(0.60),
            Element::O => Some(0.57),
            Element::S => Some(0.94),
            _ => None,
        }
    }

    /// Triple-bond covalent radius (Å), if the element forms triple bonds.
    pub fn triple_bond_radius(self) -> Option<f64> {
        match self {
            Element::C => Some(0.60),
            Element::N => Some(0.54),
            _ => None,
        }
    }

    /// Neutral valence states, smallest first.
    pub fn default_valences(self) -> &'static [u8] {
        match self {
            Element::H | Element::F | Element::Cl => &[1],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::S => &[2, 4, 6],
        }
    }

    pub fn max_valence(self) -> u8 {
        *self.default_valences().last().unwrap()
    }

    /// Valence states permitted for the given formal charge.
    ///
    /// Group 15/16 atoms gain one bond per positive charge and lose one per
    /// negative charge; carbon and the monovalent atoms lose one per unit of
    /// charge either way.
    pub fn allowed_valences(self, charge: i8) -> Vec<u8> {
        if charge == 0 {
            return self.default_valences().to_vec();
        }
        match self {
            Element::N | Element::O | Element::S => self
                .default_valences()
                .iter()
                .map(|&v| v as i16 + charge as i16)
                .filter(|&v| v >= 0)
                .map(|v| v as u8)
                .collect(),
            _ => {
                let v = self.default_valences()[0] as i16 - (charge as i16).abs();
                if v >= 0 {
                    vec![v as u8]
                } else {
                    Vec::new()
                }
            }
        }
    }

    pub fn max_allowed_valence(self, charge: i8) -> u8 {
        self.allowed_valences(charge).into_iter().max().unwrap_or(0)
    }

    pub fn is_heavy(self) -> bool {
        self != Element::H
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
