//! ESOL aqueous solubility estimate.

use super::DescriptorVector;

/// Linear ESOL model on clogP, molecular weight, rotatable bonds and
/// aromatic proportion. Returns log S in log(mol/L).
pub fn esol_terms(clogp: f64, mwt: f64, rb: f64, ap: f64) -> f64 {
    0.16 - 0.63 * clogp - 0.0062 * mwt + 0.066 * rb - 0.74 * ap
}

pub fn esol(d: &DescriptorVector) -> f64 {
    esol_terms(d.clogp(), d.mw, d.rotb as f64, d.ap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_at_zero() {
        assert!((esol_terms(0.0, 0.0, 0.0, 0.0) - 0.16).abs() < 1e-15);
    }

    #[test]
    fn worked_value() {
        assert!((esol_terms(2.0, 200.0, 2.0, 0.5) + 2.578).abs() < 1e-12);
    }

    #[test]
    fn reference_corpus_is_mostly_in_drug_like_range() {
        let mols = crate::descriptors::sa::reference_corpus();
        let inside = mols
            .iter()
            .map(|m| esol(&crate::descriptors::compute_descriptors(m)))
            .filter(|v| (-8.0..=-2.0).contains(v))
            .count();
        assert!(inside * 2 > mols.len(), "{inside} of {}", mols.len());
    }
}
