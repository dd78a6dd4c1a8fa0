//! Scaffold-seeded 3D molecule generation with graph-network critics,
//! reward-driven fine-tuning and a drug-likeness metric suite.

pub mod actor;
pub mod chem;
pub mod critic;
pub mod descriptors;
pub mod nn;
pub mod pipeline;
pub mod rl;

pub use chem::{ChemError, Element, Molecule3D, Scaffold};

/// Hex SHA-256 of a serialized configuration.
pub fn config_hash(text: &str) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(text.as_bytes()))
}
