//! Modified Lipinski filter: six drug-likeness rules.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{compute_descriptors, DescriptorVector};
use crate::chem::Molecule3D;

pub const MAX_HBD: u32 = 5;
pub const MAX_HBA: u32 = 10;
pub const MAX_ROTB: u32 = 5;
pub const MASS_RANGE: (f64, f64) = (200.0, 500.0);
pub const MAX_LOGP: f64 = 5.0;
pub const MIN_AROMATIC_RINGS: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LipinskiRule {
    Donors,
    Acceptors,
    RotatableBonds,
    Mass,
    LogP,
    AromaticRing,
}

impl fmt::Display for LipinskiRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LipinskiRule::Donors => "hbd",
            LipinskiRule::Acceptors => "hba",
            LipinskiRule::RotatableBonds => "rotb",
            LipinskiRule::Mass => "mass",
            LipinskiRule::LogP => "logp",
            LipinskiRule::AromaticRing => "aromatic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipinskiReport {
    pub violations: Vec<LipinskiRule>,
}

impl LipinskiReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn lipinski_check(d: &DescriptorVector) -> LipinskiReport {
    let mut violations = Vec::new();
    if d.hbd > MAX_HBD {
        violations.push(LipinskiRule::Donors);
    }
    if d.hba > MAX_HBA {
        violations.push(LipinskiRule::Acceptors);
    }
    if d.rotb > MAX_ROTB {
        violations.push(LipinskiRule::RotatableBonds);
    }
    if !(MASS_RANGE.0..=MASS_RANGE.1).contains(&d.mw) {
        violations.push(LipinskiRule::Mass);
    }
    if d.alogp >= MAX_LOGP {
        violations.push(LipinskiRule::LogP);
    }
    if d.arom < MIN_AROMATIC_RINGS {
        violations.push(LipinskiRule::AromaticRing);
    }
    LipinskiReport { violations }
}

pub fn lipinski_modified(mol: &Molecule3D) -> LipinskiReport {
    lipinski_check(&compute_descriptors(mol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn vector(mw: f64, hbd: u32, hba: u32, rotb: u32, logp: f64, arom: u32) -> DescriptorVector {
        DescriptorVector {
            mw,
            alogp: logp,
            hbd,
            hba,
            psa: 0.0,
            rotb,
            arom,
            alerts: 0,
            ap: 0.0,
        }
    }

    #[test]
    fn passing_and_failing_vectors() {
        assert!(lipinski_check(&vector(300.0, 2, 5, 3, 2.0, 1)).passed());
        assert_eq!(lipinski_check(&vector(150.0, 2, 5, 3, 2.0, 1)).violations, vec![LipinskiRule::Mass]);
    }

    #[test]
    fn benzene_fails_on_mass_only() {
        let r = lipinski_modified(&parse_smiles("c1ccccc1").unwrap());
        assert_eq!(r.violations, vec![LipinskiRule::Mass]);
    }
}
