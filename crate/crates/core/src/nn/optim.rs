//! Adam and a reduce-on-plateau learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tape::Gradients;
use super::tensor::Tensor;
use super::NnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Tensor> = store.ids().map(|id| Tensor::zeros(store.get(id).rows, store.get(id).cols)).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update. Parameters without a gradient are
    /// treated as having a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<(), NnError> {
        if self.m.len() != store.len() {
            return Err(NnError::Shape(format!(
                "optimizer tracks {} tensors, store has {}",
                self.m.len(),
                store.len()
            )));
        }
        for id in store.ids() {
            if let Some(g) = grads.get(id) {
                let p = store.get(id);
                if (g.rows, g.cols) != (p.rows, p.cols) {
                    return Err(NnError::Shape(format!(
                        "gradient for {} is {}x{}, parameter is {}x{}",
                        store.name(id),
                        g.rows,
                        g.cols,
                        p.rows,
                        p.cols
                    )));
                }
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for id in store.ids() {
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let p = store.get_mut(id);
            let g = grads.get(id);
            for k in 0..p.data.len() {
                let gk = g.map_or(0.0, |g| g.data[k]);
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * gk;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * gk * gk;
                let mh = m.data[k] / bc1;
                let vh = v.data[k] / bc2;
                p.data[k] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// observations without improvement, never going below `min_lr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub best: f64,
    pub stale: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, factor: f64, min_lr: f64) -> Self {
        Self {
            lr,
            factor,
            patience,
            min_lr,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Records a validation loss and returns the learning rate to use next.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr = (self.lr * self.factor).max(self.min_lr);
                self.stale = 0;
            }
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tape::Tape;

    fn quad_store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("p", Tensor::row_vector(vec![1.0, -2.0]));
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = quad_store();
        let before = s.clone();
        let mut adam = Adam::new(&s, 1e-3);
        adam.step(&mut s, &Gradients::empty(1)).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = quad_store();
        let id = s.find("p").unwrap();
        let g = {
            let mut t = Tape::new(&s);
            let p = t.param(id);
            let q = t.mul(p, p);
            let l = t.sum(q);
            t.backward(l).unwrap()
        };
        let mut adam = Adam::new(&s, 0.1);
        adam.step(&mut s, &g).unwrap();
        // bias-corrected first step is lr * sign(g) up to eps
        assert!((s.get(id).data[0] - 0.9).abs() < 1e-6);
        assert!((s.get(id).data[1] + 1.9).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut s = quad_store();
        let mut other = ParamStore::new();
        let oid = other.add("p", Tensor::scalar(1.0));
        let g = {
            let mut t = Tape::new(&other);
            let p = t.param(oid);
            let l = t.sum(p);
            t.backward(l).unwrap()
        };
        let mut adam = Adam::new(&s, 0.1);
        assert!(matches!(adam.step(&mut s, &g), Err(NnError::Shape(_))));
    }

    #[test]
    fn plateau_halves_after_patience() {
        let mut sch = PlateauScheduler::new(1e-4, 10, 0.5, 1e-6);
        sch.observe(1.0);
        for _ in 0..9 {
            assert_eq!(sch.observe(1.0), 1e-4);
        }
        assert_eq!(sch.observe(1.0), 5e-5);
    }

    #[test]
    fn plateau_floor() {
        let mut sch = PlateauScheduler::new(1e-4, 1, 0.5, 1e-6);
        sch.observe(1.0);
        for _ in 0..100 {
            assert!(sch.observe(2.0) >= 1e-6);
        }
        assert_eq!(sch.lr, 1e-6);
    }
}
