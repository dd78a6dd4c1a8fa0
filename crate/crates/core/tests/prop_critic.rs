use molrl_core::chem::Molecule3D;
use molrl_core::critic::{
    auroc, synth_pairs, Critic, CriticConfig, CriticScores, GatCritic, PocketGraph, SyntheticCritic, SyntheticMode,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_critic(seed: u64) -> GatCritic {
    let mut c = GatCritic::new(CriticConfig {
        heads: 2,
        head_dim: 4,
        hidden: 6,
        ..CriticConfig::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = c.store.ids().collect();
    for id in ids {
        for v in c.store.get_mut(id).data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    c
}

fn shuffled<T: Clone>(items: &[T], rng: &mut impl Rng) -> (Vec<T>, Vec<usize>) {
    let mut order: Vec<usize> = (0..items.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    (order.iter().map(|&i| items[i].clone()).collect(), order)
}

/// Same molecule with atoms relabeled.
fn permute_molecule(m: &Molecule3D, rng: &mut impl Rng) -> Molecule3D {
    let (atoms, order) = shuffled(&m.atoms, rng);
    let mut new_of = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        new_of[old] = new;
    }
    let mut out = Molecule3D::from_atoms(atoms);
    for b in &m.bonds {
        out.add_bond(new_of[b.a], new_of[b.b], b.order).unwrap();
    }
    out
}

/// Same pocket with residues and atoms relabeled.
fn permute_pocket(p: &PocketGraph, rng: &mut impl Rng) -> PocketGraph {
    let (types, order) = shuffled(&p.residue_types, rng);
    let mut new_res = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        new_res[old] = new;
    }
    let (mut atoms, _) = shuffled(&p.atoms, rng);
    for a in &mut atoms {
        a.residue = new_res[a.residue];
    }
    PocketGraph::build(types, atoms, 8.0).unwrap()
}

fn in_bounds(s: &CriticScores) -> bool {
    [s.c_bp, s.p_inactive, s.c_ea, s.c_sa].iter().all(|v| (0.0..=1.0).contains(v))
        && (s.c_bp + s.p_inactive - 1.0).abs() < 1e-9
        && s.c_ea_raw.is_finite()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scores_bounded_for_complete_and_partial_ligands(critic_seed in 0u64..500, pair_seed in 0u64..500) {
        let critics: [Box<dyn Critic>; 3] = [
            Box::new(random_critic(critic_seed)),
            Box::new(SyntheticCritic::new(SyntheticMode::Full)),
            Box::new(SyntheticCritic::new(SyntheticMode::BpOnly)),
        ];
        for p in synth_pairs(pair_seed, 2, 8.0) {
            let partial = p.ligand.without_bonds();
            for c in &critics {
                for lig in [&p.ligand, &partial] {
                    let s = c.score(&p.pocket, lig).unwrap();
                    prop_assert!(in_bounds(&s), "{s:?}");
                }
            }
        }
    }

    #[test]
    fn score_invariant_to_relabeling(critic_seed in 0u64..500, pair_seed in 0u64..500, perm_seed: u64) {
        let c = random_critic(critic_seed);
        let p = synth_pairs(pair_seed, 1, 8.0).remove(0);
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        let base = c.score(&p.pocket, &p.ligand).unwrap();
        let moved = c
            .score(&permute_pocket(&p.pocket, &mut rng), &permute_molecule(&p.ligand, &mut rng))
            .unwrap();
        prop_assert!((base.c_bp - moved.c_bp).abs() < 1e-9);
        prop_assert!((base.c_ea_raw - moved.c_ea_raw).abs() < 1e-9);
    }

    #[test]
    fn auroc_of_labels_is_one(labels in prop::collection::vec(any::<bool>(), 2..60)) {
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let scores: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        prop_assert_eq!(auroc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn auroc_flips_under_negation(pairs in prop::collection::vec((-5.0f64..5.0, any::<bool>()), 2..60)) {
        let (scores, labels): (Vec<f64>, Vec<bool>) = pairs.into_iter().unzip();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = auroc(&scores, &labels).unwrap();
        prop_assert!((a + auroc(&neg, &labels).unwrap() - 1.0).abs() < 1e-12);
    }
}
