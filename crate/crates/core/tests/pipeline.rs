use std::fs;
use std::path::Path;

use molrl_core::pipeline::{run_all, run_stage, PipelineError, RunConfig, Stage};

const TINY: &str = "
data.train_size = 4
data.val_size = 2
data.pairs = 16
actor.feature_dim = 8
actor.interactions = 1
actor.n_gaussians = 8
actor.n_bins = 60
actor.max_atoms = 14
actor.max_distance_heads = 4
actor.grid_spacing = 0.5
actor.epochs = 2
critic.heads = 1
critic.head_dim = 4
critic.hidden = 8
critic.epochs = 2
rl.epochs = 1
rl.episodes_per_epoch = 2
rl.candidates = 2
generate.count = 3
ablation.count = 2
grid.lrs = 0.001
grid.heads = 1
grid.dims = 4
evaluate.lipinski = false
";

fn tiny() -> RunConfig {
    RunConfig::load(TINY, &[]).unwrap()
}

fn csvs(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(root.join("reports"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn full_pipeline_layout_and_reproducibility() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_all(&tiny(), a.path()).unwrap();
    run_all(&tiny(), b.path()).unwrap();

    for p in [
        "config.resolved",
        "config.hash",
        "checkpoints/actor.json",
        "checkpoints/actor_rl.json",
        "checkpoints/critic.json",
        "data/pocket.xyz",
        "data/pairs/labels.csv",
        "generated/pretrained/mol0002.xyz",
        "generated/rl/mol0000.xyz",
    ] {
        assert!(a.path().join(p).exists(), "missing {p}");
    }
    let reports = csvs(a.path());
    let names: Vec<&str> = reports.iter().map(|(n, _)| n.as_str()).collect();
    for n in [
        "actor_curves.csv",
        "critic_curves.csv",
        "critic_auroc.csv",
        "grid_search.csv",
        "rl_curves.csv",
        "scores_rl.csv",
        "eval_rl_topk.csv",
        "eval_pretrained_summary.csv",
        "eval_comparison.csv",
        "ablation.csv",
        "ablation_hist.csv",
    ] {
        assert!(names.contains(&n), "missing report {n}");
    }
    assert_eq!(reports, csvs(b.path()));
    let hash = fs::read_to_string(a.path().join("config.hash")).unwrap();
    assert_eq!(hash.trim(), tiny().hash());
}

#[test]
fn stage_without_inputs_names_the_missing_file() {
    let d = tempfile::tempdir().unwrap();
    match run_stage(Stage::TrainActor, &tiny(), d.path()) {
        Err(PipelineError::Missing(p)) => assert!(p.ends_with("data/train")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn evaluate_rejects_empty_set() {
    let d = tempfile::tempdir().unwrap();
    run_stage(Stage::SynthData, &tiny(), d.path()).unwrap();
    fs::create_dir_all(d.path().join("generated/rl")).unwrap();
    assert!(matches!(
        run_stage(Stage::Evaluate, &tiny(), d.path()),
        Err(PipelineError::Empty(_))
    ));
}

#[test]
fn synth_data_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_stage(Stage::SynthData, &tiny(), a.path()).unwrap();
    run_stage(Stage::SynthData, &tiny(), b.path()).unwrap();
    for f in ["train/mol0003.xyz", "val/mol0001.xyz", "pairs/labels.csv", "pocket.xyz"] {
        assert_eq!(
            fs::read(a.path().join("data").join(f)).unwrap(),
            fs::read(b.path().join("data").join(f)).unwrap()
        );
    }
}

#[test]
fn unknown_scaffold_rejected() {
    let d = tempfile::tempdir().unwrap();
    let mut c = tiny();
    run_stage(Stage::SynthData, &c, d.path()).unwrap();
    run_stage(Stage::TrainActor, &c, d.path()).unwrap();
    c.scaffold = "c1ccccc1".into();
    c.generate.source = "pretrained".into();
    assert!(matches!(
        run_stage(Stage::Generate, &c, d.path()),
        Err(PipelineError::Config(_))
    ));
    c.scaffold = "N1CCNCC1".into();
    run_stage(Stage::Generate, &c, d.path()).unwrap();
}
