//! Supervised teacher-forced training.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{canonical_order, reorder, ActorConfig, ActorError, ActorModel};
use crate::chem::Molecule3D;
use crate::nn::{Adam, Gradients, PlateauScheduler, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    pub decay: f64,
    pub min_lr: f64,
    pub seed: u64,
}

impl TrainOptions {
    pub fn from_config(cfg: &ActorConfig, seed: u64) -> Self {
        Self {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            lr: cfg.lr,
            patience: cfg.lr_patience,
            decay: cfg.lr_decay,
            min_lr: cfg.lr_min,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-step NLL over the epoch's updates.
    pub train_nll: f64,
    /// Mean per-step NLL on the validation set after the epoch (train NLL
    /// when there is no validation set).
    pub val_nll: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedReport {
    pub initial_train_nll: f64,
    pub initial_val_nll: f64,
    pub epochs: Vec<EpochStats>,
    /// 0 means the untrained parameters were never beaten.
    pub best_epoch: usize,
    pub best_val_nll: f64,
    /// Train NLL of the retained parameters.
    pub final_train_nll: f64,
}

/// Corpus molecule in teacher-forcing order with its scaffold length.
pub fn prepare(corpus: &[Molecule3D]) -> Result<Vec<(Molecule3D, usize)>, ActorError> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if m.scaffold_mask.is_empty() {
                return Err(ActorError::NoScaffold(i));
            }
            let order = canonical_order(m)?;
            Ok((reorder(m, &order), m.scaffold_mask.len()))
        })
        .collect()
}

/// Mean per-step teacher-forced NLL over a prepared set.
pub fn mean_nll(model: &ActorModel, set: &[(Molecule3D, usize)]) -> Result<f64, ActorError> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for (m, k) in set {
        s += model.evaluate_trajectory(m, *k, true)?.mean();
    }
    Ok(s / set.len() as f64)
}

/// Gradient of the batch mean of per-step NLL; returns the gradients and
/// the batch's mean per-step NLL.
pub fn batch_gradients(model: &ActorModel, batch: &[&(Molecule3D, usize)]) -> Result<(Gradients, f64), ActorError> {
    let mut acc = Gradients::empty(model.store.len());
    let mut nll = 0.0;
    for (m, k) in batch {
        let mut tape = Tape::new(&model.store);
        let l = model.trajectory_loss(&mut tape, m, *k, true)?;
        let steps = l.steps() as f64;
        nll += l.mean();
        let g = tape.backward(l.total)?;
        acc.accumulate(&g, 1.0 / (steps * batch.len() as f64));
    }
    Ok((acc, nll / batch.len() as f64))
}

/// Teacher-forced training with Adam, a plateau schedule on validation NLL
/// and best-by-validation parameter retention.
pub fn train_supervised(
    model: &mut ActorModel,
    train: &[Molecule3D],
    val: &[Molecule3D],
    opts: &TrainOptions,
) -> Result<SupervisedReport, ActorError> {
    if train.is_empty() {
        return Err(ActorError::EmptyCorpus);
    }
    let train_set = prepare(train)?;
    let val_set = prepare(val)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = Adam::new(&model.store, opts.lr);
    let mut sched = PlateauScheduler::new(opts.lr, opts.patience, opts.decay, opts.min_lr);

    let initial_train = mean_nll(model, &train_set)?;
    let initial_val = if val_set.is_empty() { initial_train } else { mean_nll(model, &val_set)? };
    let mut best = (0usize, initial_val, model.store.clone());
    let mut epochs = Vec::with_capacity(opts.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(opts.batch_size.max(1)) {
            let batch: Vec<_> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (g, nll) = batch_gradients(model, &batch)?;
            adam.step(&mut model.store, &g)?;
            sum += nll;
            batches += 1;
        }
        let train_nll = sum / batches as f64;
        let val_nll = if val_set.is_empty() { train_nll } else { mean_nll(model, &val_set)? };
        let lr = adam.lr;
        adam.lr = sched.observe(val_nll);
        log::debug!("actor epoch {epoch}: train {train_nll:.4} val {val_nll:.4} lr {lr:e}");
        epochs.push(EpochStats {
            epoch,
            train_nll,
            val_nll,
            lr,
        });
        if val_nll < best.1 {
            best = (epoch, val_nll, model.store.clone());
        }
    }
    model.store = best.2;
    let final_train = mean_nll(model, &train_set)?;
    Ok(SupervisedReport {
        initial_train_nll: initial_train,
        initial_val_nll: initial_val,
        epochs,
        best_epoch: best.0,
        best_val_nll: best.1,
        final_train_nll: final_train,
    })
}
