//! Critic training, AUROC and the hyperparameter grid.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AffinityScaler, CriticConfig, CriticError, GatCritic, LabeledPair, LigandGraph, PocketGraph};
use crate::nn::{Adam, Tape};

/// Area under the ROC curve by the Mann–Whitney rank statistic; tied
/// scores share their average rank.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, CriticError> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(CriticError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged
        let r = (i + j + 2) as f64 / 2.0;
        rank_sum += r * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Stratified split: each class contributes round(fraction · size) pairs
/// to the test side.
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let k = (test_fraction * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_auroc: f64,
    /// None when the test split is empty or single-class.
    pub test_auroc: Option<f64>,
    pub epoch_loss: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Trains a fresh critic on a stratified split of `pairs`.
pub fn train_classifier(pairs: &[LabeledPair], config: &CriticConfig) -> Result<(GatCritic, TrainReport), CriticError> {
    train_on_split(pairs, config, config.seed)
}

/// Split drawn from `split_seed`; initialization and shuffling from
/// `config.seed`.
fn train_on_split(
    pairs: &[LabeledPair],
    config: &CriticConfig,
    split_seed: u64,
) -> Result<(GatCritic, TrainReport), CriticError> {
    let labels: Vec<bool> = pairs.iter().map(|p| p.active).collect();
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(CriticError::SingleClass);
    }
    let mut critic = GatCritic::new(config.clone())?;
    let graphs: Vec<LigandGraph> = pairs
        .iter()
        .map(|p| critic.ligand_graph(&p.ligand))
        .collect::<Result<_, _>>()?;
    let (train, test) = stratified_split(&labels, config.test_fraction, split_seed);
    let item = |i: usize| (&pairs[i].pocket, &graphs[i]);

    let mut adam = Adam::new(&critic.store, config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut order = train.clone();
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let items: Vec<(&PocketGraph, &LigandGraph)> = chunk.iter().map(|&i| item(i)).collect();
            let y: Vec<bool> = chunk.iter().map(|&i| labels[i]).collect();
            let a: Vec<Option<f64>> = chunk.iter().map(|&i| pairs[i].affinity).collect();
            let mut tape = Tape::new(&critic.store);
            let loss = critic.loss(&mut tape, &items, &y, &a);
            tape.check()?;
            total += tape.value(loss).item() * chunk.len() as f64;
            let g = tape.backward(loss)?;
            adam.step(&mut critic.store, &g)?;
        }
        let mean = total / train.len() as f64;
        log::debug!("critic epoch {epoch}: loss {mean:.5}");
        epoch_loss.push(mean);
    }

    let affinities: Vec<f64> = train.iter().filter_map(|&i| pairs[i].affinity).collect();
    critic.scaler = AffinityScaler::fit(&affinities);
    let eval = |idx: &[usize]| -> Result<Option<f64>, CriticError> {
        let items: Vec<_> = idx.iter().map(|&i| item(i)).collect();
        let scores = critic.predict_many(&items)?;
        let y: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        match auroc(&scores, &y) {
            Ok(a) => Ok(Some(a)),
            Err(CriticError::SingleClass) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let train_auroc = eval(&train)?.ok_or(CriticError::SingleClass)?;
    let test_auroc = eval(&test)?;
    let report = TrainReport {
        train_auroc,
        test_auroc,
        epoch_loss,
        n_train: train.len(),
        n_test: test.len(),
    };
    Ok((critic, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    /// e.g. `Lr_0.0001_n2_d70`.
    pub name: String,
    pub lr: f64,
    pub heads: usize,
    pub dim: usize,
    pub train_auroc: Option<f64>,
    pub test_auroc: Option<f64>,
    pub error: Option<String>,
    pub best: bool,
}

pub fn grid_name(lr: f64, heads: usize, dim: usize) -> String {
    format!("Lr_{lr}_n{heads}_d{dim}")
}

/// Trains every lr × heads × dim combination on the same split, averaging
/// AUROC over `repeats` seeds. A failing combination is recorded in its
/// row. The row with the highest test AUROC is flagged best; ties keep the
/// first.
pub fn hyperparameter_grid(
    lrs: &[f64],
    heads: &[usize],
    dims: &[usize],
    repeats: usize,
    pairs: &[LabeledPair],
    base: &CriticConfig,
) -> Result<Vec<GridRow>, CriticError> {
    if lrs.is_empty() || heads.is_empty() || dims.is_empty() || repeats == 0 {
        return Err(CriticError::Config("grid is empty".into()));
    }
    let mut rows = Vec::new();
    for &lr in lrs {
        for &h in heads {
            for &d in dims {
                let mut row = GridRow {
                    name: grid_name(lr, h, d),
                    lr,
                    heads: h,
                    dim: d,
                    train_auroc: None,
                    test_auroc: None,
                    error: None,
                    best: false,
                };
                let mut tr = 0.0;
                let mut te = Vec::new();
                for r in 0..repeats {
                    let cfg = CriticConfig {
                        lr,
                        heads: h,
                        head_dim: d,
                        seed: base.seed.wrapping_add(r as u64),
                        ..base.clone()
                    };
                    match train_on_split(pairs, &cfg, base.seed) {
                        Ok((_, rep)) => {
                            tr += rep.train_auroc;
                            te.extend(rep.test_auroc);
                        }
                        Err(e) => {
                            log::warn!("grid row {} failed: {e}", row.name);
                            row.error = Some(e.to_string());
                            break;
                        }
                    }
                }
                if row.error.is_none() {
                    row.train_auroc = Some(tr / repeats as f64);
                    if te.len() == repeats {
                        row.test_auroc = Some(te.iter().sum::<f64>() / repeats as f64);
                    }
                }
                rows.push(row);
            }
        }
    }
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.test_auroc.map(|a| (i, a)))
        .fold(None, |acc: Option<(usize, f64)>, (i, a)| match acc {
            Some((_, b)) if b >= a => acc,
            _ => Some((i, a)),
        });
    if let Some((i, _)) = best {
        rows[i].best = true;
    }
    Ok(rows)
}

/// Grid table as CSV.
pub fn write_grid_csv<W: Write>(rows: &[GridRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["hyperparameter_set", "train_roc_avg", "test_roc_avg", "best", "error"])?;
    let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    for r in rows {
        out.write_record([
            r.name.clone(),
            f(r.train_auroc),
            f(r.test_auroc),
            r.best.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
