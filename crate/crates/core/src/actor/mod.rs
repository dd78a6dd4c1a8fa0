//! Scaffold-seeded autoregressive 3D generator.
//!
//! The model sees the atoms placed so far plus a center token at their
//! center of mass. It predicts the next atom type (elements plus STOP)
//! and, for the chosen type, a binned distance distribution to each of the
//! nearest placed atoms. Positions are realized by scoring a grid around
//! the center of mass against those distributions.

pub mod generate;
pub mod model;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::chem::molecule::distance;
use crate::chem::{Element, Molecule3D};
use crate::nn::NnError;

pub use generate::{generate, place_atom, GenerateOptions, SamplingMode};
pub use model::{ActorModel, StepTarget, TeacherForcedLoss};
pub use train::{train_supervised, EpochStats, SupervisedReport, TrainOptions};

/// Number of type classes: the seven elements plus STOP.
pub const N_TYPES: usize = Element::COUNT + 1;
/// Class index of the STOP sentinel.
pub const STOP: usize = Element::COUNT;

/// Probability floor applied before taking logarithms of predictions.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ActorError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("molecule {0} has no scaffold atoms")]
    NoScaffold(usize),
    #[error("invalid actor config: {0}")]
    Config(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub feature_dim: usize,
    pub interactions: usize,
    pub cutoff: f64,
    pub n_gaussians: usize,
    pub d_max: f64,
    pub n_bins: usize,
    /// Maximum total atoms, scaffold included.
    pub max_atoms: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub lr_patience: usize,
    pub lr_decay: f64,
    pub lr_min: f64,
    /// Distance heads cover at most this many placed atoms nearest the center.
    pub max_distance_heads: usize,
    /// Width of the Gaussian used to spread true distances over bins.
    pub target_width: f64,
    pub grid_spacing: f64,
    pub grid_radius: f64,
    /// Grid scores are divided by this before the softmax; below 1 sharpens
    /// placement toward the most likely points.
    #[serde(default = "unit_temperature")]
    pub position_temperature: f64,
}

fn unit_temperature() -> f64 {
    1.0
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self {
            feature_dim: 32,
            interactions: 6,
            cutoff: 10.0,
            n_gaussians: 25,
            d_max: 15.0,
            n_bins: 300,
            max_atoms: 40,
            batch_size: 2,
            epochs: 150,
            lr: 1e-4,
            lr_patience: 10,
            lr_decay: 0.5,
            lr_min: 1e-6,
            max_distance_heads: 25,
            target_width: 0.05,
            grid_spacing: 0.25,
            grid_radius: 3.0,
            position_temperature: 1.0,
        }
    }
}

impl ActorConfig {
    /// Desk-scale settings: wider features but fewer interaction layers,
    /// fewer epochs and a larger learning rate so the toy corpus trains in
    /// minutes.
    pub fn toy() -> Self {
        Self {
            feature_dim: 64,
            interactions: 3,
            epochs: 30,
            lr: 5e-3,
            ..Self::default()
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.d_max / self.n_bins as f64
    }

    pub fn validate(&self) -> Result<(), ActorError> {
        let counts = [
            ("feature_dim", self.feature_dim),
            ("interactions", self.interactions),
            ("n_gaussians", self.n_gaussians),
            ("n_bins", self.n_bins),
            ("max_atoms", self.max_atoms),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("max_distance_heads", self.max_distance_heads),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(ActorError::Config(format!("{name} must be positive")));
            }
        }
        let reals = [
            ("cutoff", self.cutoff),
            ("d_max", self.d_max),
            ("lr_decay", self.lr_decay),
            ("lr_min", self.lr_min),
            ("target_width", self.target_width),
            ("grid_spacing", self.grid_spacing),
            ("grid_radius", self.grid_radius),
            ("position_temperature", self.position_temperature),
        ];
        for (name, v) in reals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ActorError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(ActorError::Config(format!("lr must be non-negative, got {}", self.lr)));
        }
        Ok(())
    }
}

/// The molecule built so far. Bonds stay unset during generation.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialState {
    pub molecule: Molecule3D,
    pub scaffold_len: usize,
}

impl PartialState {
    /// Seeds a state from scaffold atoms; they occupy indices 0..len and
    /// form the scaffold mask.
    pub fn from_scaffold(scaffold: &Molecule3D) -> Self {
        let mut molecule = Molecule3D::from_atoms(scaffold.atoms.clone());
        molecule.scaffold_mask = (0..scaffold.atoms.len()).collect();
        molecule.has_coordinates = true;
        molecule.provenance = "generated".to_string();
        Self {
            scaffold_len: scaffold.atoms.len(),
            molecule,
        }
    }

    /// Atoms placed beyond the scaffold.
    pub fn step(&self) -> usize {
        self.molecule.atoms.len() - self.scaffold_len
    }

    pub fn center(&self) -> [f64; 3] {
        self.molecule.center_of_mass()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.molecule.atoms.iter().map(|a| a.position).collect()
    }
}

/// Next-atom type distribution and binned distance distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementDistributions {
    /// Over elements in `Element::ALL` order, then STOP.
    pub type_probs: Vec<f64>,
    /// The element the distance heads were conditioned on.
    pub next: Element,
    /// (placed atom index, probability over bins).
    pub distances: Vec<(usize, Vec<f64>)>,
}

/// Distances closer than this count as ties when picking heads, so
/// symmetric atoms keep the same order after a rigid motion.
pub const HEAD_TIE_TOLERANCE: f64 = 1e-8;

/// Indices of the placed atoms nearest `center`, at most `k`, ties by index.
pub fn nearest_atoms(positions: &[[f64; 3]], center: &[f64; 3], k: usize) -> Vec<usize> {
    let key = |i: usize| (distance(&positions[i], center) / HEAD_TIE_TOLERANCE).round() as i64;
    let mut idx: Vec<usize> = (0..positions.len()).collect();
    idx.sort_by_key(|&i| (key(i), i));
    idx.truncate(k);
    idx
}

/// Gaussian of the given width centered at the true distance, evaluated at
/// bin centers (b + 0.5)·d_max/bins and normalized. A zero width, or a
/// distance so far away that every bin underflows, gives a one-hot vector
/// at the nearest center.
pub fn ground_truth_bins(true_distance: f64, bins: usize, d_max: f64, width: f64) -> Vec<f64> {
    let w = d_max / bins as f64;
    let nearest = ((true_distance / w).floor().max(0.0) as usize).min(bins - 1);
    let one_hot = || {
        let mut q = vec![0.0; bins];
        q[nearest] = 1.0;
        q
    };
    if width <= 0.0 {
        return one_hot();
    }
    let q: Vec<f64> = (0..bins)
        .map(|b| {
            let z = ((b as f64 + 0.5) * w - true_distance) / width;
            (-0.5 * z * z).exp()
        })
        .collect();
    let s: f64 = q.iter().sum();
    if s > 0.0 && s.is_finite() {
        q.into_iter().map(|v| v / s).collect()
    } else {
        one_hot()
    }
}

/// Type and distance losses of one step given predicted distributions.
/// `true_distances` pairs each entry of `pred.distances` with its target.
pub fn nll_step(
    pred: &PlacementDistributions,
    truth: Element,
    true_distances: &[f64],
    d_max: f64,
    width: f64,
) -> (f64, f64) {
    let type_loss = -pred.type_probs[truth.index()].max(PROB_FLOOR).ln();
    let mut dist_loss = 0.0;
    for ((_, p), &d) in pred.distances.iter().zip(true_distances) {
        let q = ground_truth_bins(d, p.len(), d_max, width);
        dist_loss += q
            .iter()
            .zip(p)
            .filter(|(qb, _)| **qb > 0.0)
            .map(|(qb, pb)| -qb * pb.max(PROB_FLOOR).ln())
            .sum::<f64>();
    }
    (type_loss, dist_loss)
}

/// Loss of a STOP step.
pub fn stop_loss(type_probs: &[f64]) -> f64 {
    -type_probs[STOP].max(PROB_FLOOR).ln()
}

/// Teacher-forcing order: scaffold atoms (ascending index) first, then the
/// rest by increasing distance to the scaffold centroid, ties by element
/// then index.
pub fn canonical_order(mol: &Molecule3D) -> Result<Vec<usize>, ActorError> {
    if mol.scaffold_mask.is_empty() {
        return Err(ActorError::NoScaffold(0));
    }
    let centroid = mol.centroid_of(mol.scaffold_mask.iter().copied());
    let mut order: Vec<usize> = mol.scaffold_mask.iter().copied().collect();
    let mut rest: Vec<usize> = (0..mol.atoms.len()).filter(|i| !mol.scaffold_mask.contains(i)).collect();
    rest.sort_by(|&a, &b| {
        distance(&mol.atoms[a].position, &centroid)
            .total_cmp(&distance(&mol.atoms[b].position, &centroid))
            .then(mol.atoms[a].element.cmp(&mol.atoms[b].element))
            .then(a.cmp(&b))
    });
    order.extend(rest);
    Ok(order)
}

/// Reorders atoms (and bonds) so that index order equals `order`; the
/// scaffold mask is mapped accordingly.
pub fn reorder(mol: &Molecule3D, order: &[usize]) -> Molecule3D {
    let mut inv = vec![0usize; order.len()];
    for (new, &old) in order.iter().enumerate() {
        inv[old] = new;
    }
    let mut out = Molecule3D::from_atoms(order.iter().map(|&i| mol.atoms[i].clone()).collect());
    for b in &mol.bonds {
        out.add_bond(inv[b.a], inv[b.b], b.order).expect("bond survives relabeling");
    }
    out.scaffold_mask = mol.scaffold_mask.iter().map(|&i| inv[i]).collect();
    out.provenance = mol.provenance.clone();
    out.has_coordinates = mol.has_coordinates;
    out
}
