//! Coordinate realization on a candidate grid and the generation loop.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActorConfig, ActorError, ActorModel, PartialState, PlacementDistributions, N_TYPES, PROB_FLOOR, STOP};
use crate::chem::molecule::{distance, Atom};
use crate::chem::{Element, Molecule3D, Scaffold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingMode {
    /// Sample types and positions from the model's distributions.
    Learned,
    /// Uniform type (STOP included) and uniform grid point; an ablation.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    /// Total atom budget, scaffold included.
    pub max_atoms: usize,
    pub mode: SamplingMode,
}

impl GenerateOptions {
    pub fn from_config(cfg: &ActorConfig) -> Self {
        Self {
            max_atoms: cfg.max_atoms,
            mode: SamplingMode::Learned,
        }
    }
}

/// Grid offsets with the given spacing inside a ball of `radius`.
pub fn grid_offsets(spacing: f64, radius: f64) -> Vec<[f64; 3]> {
    let k = (radius / spacing).floor() as i64;
    let mut out = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            for l in -k..=k {
                let p = [i as f64 * spacing, j as f64 * spacing, l as f64 * spacing];
                if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= radius + 1e-12 {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Log-score of each candidate: Σ_j ln p_j(bin(|candidate − x_j|)).
pub fn score_candidates(
    candidates: &[[f64; 3]],
    positions: &[[f64; 3]],
    dists: &[(usize, Vec<f64>)],
    d_max: f64,
) -> Vec<f64> {
    let logs: Vec<(usize, Vec<f64>)> = dists
        .iter()
        .map(|(j, p)| (*j, p.iter().map(|v| v.max(PROB_FLOOR).ln()).collect()))
        .collect();
    candidates
        .iter()
        .map(|c| {
            logs.iter()
                .map(|(j, lp)| {
                    let bins = lp.len();
                    let b = ((distance(c, &positions[*j]) / d_max * bins as f64) as usize).min(bins - 1);
                    lp[b]
                })
                .sum()
        })
        .collect()
}

/// Index sampled from softmax(scores); falls back to the argmax when the
/// weights underflow.
pub fn sample_softmax(scores: &[f64], rng: &mut impl Rng) -> usize {
    let argmax = || {
        scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |(i, _)| i)
    };
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return argmax();
    }
    let w: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    match WeightedIndex::new(&w) {
        Ok(d) => d.sample(rng),
        Err(_) => argmax(),
    }
}

/// Position for a new atom drawn from the candidate grid around the
/// state's center of mass.
pub fn choose_position(state: &PartialState, dists: &[(usize, Vec<f64>)], cfg: &ActorConfig, rng: &mut impl Rng) -> [f64; 3] {
    let c = state.center();
    let cands: Vec<[f64; 3]> = grid_offsets(cfg.grid_spacing, cfg.grid_radius)
        .into_iter()
        .map(|o| [c[0] + o[0], c[1] + o[1], c[2] + o[2]])
        .collect();
    let scores: Vec<f64> = score_candidates(&cands, &state.positions(), dists, cfg.d_max)
        .into_iter()
        .map(|s| s / cfg.position_temperature)
        .collect();
    cands[sample_softmax(&scores, rng)]
}

/// Appends an atom of type `dists.next` at a sampled grid position.
/// Existing atoms are never moved.
pub fn place_atom(state: &PartialState, dists: &PlacementDistributions, cfg: &ActorConfig, rng: &mut impl Rng) -> PartialState {
    let pos = choose_position(state, &dists.distances, cfg, rng);
    let mut next = state.clone();
    next.molecule.add_atom(Atom::new(dists.next, pos));
    next
}

/// Samples a type class from a probability vector.
pub fn sample_type(type_probs: &[f64], rng: &mut impl Rng) -> usize {
    match WeightedIndex::new(type_probs) {
        Ok(d) => d.sample(rng),
        Err(_) => STOP,
    }
}

/// Grows a molecule from the scaffold until STOP or the atom budget.
/// Bonds are left unset; perception happens downstream.
pub fn generate(
    scaffold: &Scaffold,
    model: &ActorModel,
    rng: &mut impl Rng,
    opts: &GenerateOptions,
) -> Result<Molecule3D, ActorError> {
    let mut state = PartialState::from_scaffold(&scaffold.molecule);
    let cfg = &model.config;
    while state.molecule.atoms.len() < opts.max_atoms {
        match opts.mode {
            SamplingMode::Learned => {
                let mut enc = model.encode_state(&state)?;
                let class = sample_type(&enc.type_probs, rng);
                if class == STOP {
                    break;
                }
                let next = Element::from_index(class).expect("element class");
                let distances = model.distance_probs(&mut enc, next)?;
                let d = PlacementDistributions {
                    type_probs: enc.type_probs,
                    next,
                    distances,
                };
                state = place_atom(&state, &d, cfg, rng);
            }
            SamplingMode::Random => {
                let class = rng.random_range(0..N_TYPES);
                if class == STOP {
                    break;
                }
                let c = state.center();
                let grid = grid_offsets(cfg.grid_spacing, cfg.grid_radius);
                let o = grid[rng.random_range(0..grid.len())];
                let e = Element::from_index(class).expect("element class");
                state.molecule.add_atom(Atom::new(e, [c[0] + o[0], c[1] + o[1], c[2] + o[2]]));
            }
        }
    }
    Ok(state.molecule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_hot(bins: usize, d: f64, d_max: f64) -> Vec<f64> {
        let mut v = vec![0.0; bins];
        v[(d / d_max * bins as f64) as usize] = 1.0;
        v
    }

    fn state_of(atoms: &[(Element, [f64; 3])]) -> PartialState {
        let m = Molecule3D::from_atoms(atoms.iter().map(|&(e, p)| Atom::new(e, p)).collect());
        PartialState::from_scaffold(&m)
    }

    #[test]
    fn grid_size_and_radius() {
        let g = grid_offsets(0.25, 3.0);
        assert!(g.iter().all(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= 3.0 + 1e-9));
        // lattice points in a ball of radius 12 (in grid units)
        let brute = (-12i64..=12)
            .flat_map(|i| (-12i64..=12).flat_map(move |j| (-12i64..=12).map(move |k| i * i + j * j + k * k)))
            .filter(|&r2| r2 <= 144)
            .count();
        assert_eq!(g.len(), brute);
    }

    #[test]
    fn single_constraint_lands_on_shell() {
        let cfg = ActorConfig::default();
        let st = state_of(&[(Element::C, [0.1, -0.2, 0.3])]);
        let d = PlacementDistributions {
            type_probs: vec![0.0; N_TYPES],
            next: Element::C,
            distances: vec![(0, one_hot(300, 1.5, 15.0))],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let s = place_atom(&st, &d, &cfg, &mut rng);
            let r = s.molecule.distance(0, 1);
            assert!((r - 1.5).abs() <= 0.25, "{r}");
            assert_eq!(s.molecule.atoms[0], st.molecule.atoms[0]);
        }
    }

    #[test]
    fn two_constraints_trilaterate() {
        // Atoms at (±1.2, 0, 0), both at 2.0 Å from the new atom: the
        // solutions form a circle of radius sqrt(4 - 1.44) = 1.6 in x = 0.
        let cfg = ActorConfig::default();
        let st = state_of(&[(Element::C, [-1.2, 0.0, 0.0]), (Element::C, [1.2, 0.0, 0.0])]);
        let d = PlacementDistributions {
            type_probs: vec![0.0; N_TYPES],
            next: Element::O,
            distances: vec![(0, one_hot(300, 2.0, 15.0)), (1, one_hot(300, 2.0, 15.0))],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = place_atom(&st, &d, &cfg, &mut rng);
            let p = s.molecule.atoms[2].position;
            let ring = (p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!(p[0].abs() <= 0.25 && (ring - 1.6).abs() <= 0.25, "{p:?}");
        }
    }

    #[test]
    fn underflow_falls_back_to_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(sample_softmax(&[f64::NEG_INFINITY, f64::NEG_INFINITY], &mut rng), 0);
        assert_eq!(sample_softmax(&[-1e308, 0.0, -1e308], &mut rng), 1);
    }

    #[test]
    fn generation_keeps_scaffold_and_respects_budget() {
        let cfg = super::super::model::tests::tiny_config();
        let model = ActorModel::new(cfg.clone(), 0).unwrap();
        let scaffold = Scaffold::from_smiles("C1CNCCN1").unwrap();
        let mut sc = scaffold.clone();
        for (i, a) in sc.molecule.atoms.iter_mut().enumerate() {
            let ang = i as f64 * std::f64::consts::PI / 3.0;
            a.position = [1.45 * ang.cos(), 1.45 * ang.sin(), 0.0];
        }
        sc.molecule.has_coordinates = true;
        let opts = GenerateOptions {
            max_atoms: 9,
            mode: SamplingMode::Learned,
        };
        let a = generate(&sc, &model, &mut ChaCha8Rng::seed_from_u64(5), &opts).unwrap();
        let b = generate(&sc, &model, &mut ChaCha8Rng::seed_from_u64(5), &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.atoms.len() <= 9);
        for i in 0..6 {
            assert_eq!(a.atoms[i], sc.molecule.atoms[i]);
        }
        let r = generate(&sc, &model, &mut ChaCha8Rng::seed_from_u64(6), &GenerateOptions { mode: SamplingMode::Random, ..opts }).unwrap();
        assert!(r.atoms.len() <= 9);
    }
}
