//! Central finite-difference gradient checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::NnError;

/// Gradients smaller than this are compared on an absolute scale.
pub const GRAD_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
}

/// |a − n| / max(|a|, |n|, GRAD_FLOOR).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Compares tape gradients with central differences of step `h`.
/// At most `per_tensor` entries of each parameter tensor are probed,
/// chosen by a seeded sample; pass `usize::MAX` to probe everything.
pub fn grad_check(
    store: &ParamStore,
    loss: impl Fn(&mut Tape) -> Var,
    h: f64,
    per_tensor: usize,
) -> Result<GradCheckReport, NnError> {
    let grads = {
        let mut tape = Tape::new(store);
        let l = loss(&mut tape);
        tape.backward(l)?
    };
    let eval = |s: &ParamStore| -> Result<f64, NnError> {
        let mut tape = Tape::new(s);
        let l = loss(&mut tape);
        tape.check()?;
        Ok(tape.value(l).item())
    };
    let mut work = store.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        worst: None,
    };
    for id in store.ids() {
        let n = store.get(id).len();
        let picks: Vec<usize> = if n <= per_tensor {
            (0..n).collect()
        } else {
            let mut v = sample(&mut rng, n, per_tensor).into_vec();
            v.sort_unstable();
            v
        };
        for k in picks {
            let orig = store.get(id).data[k];
            work.get_mut(id).data[k] = orig + h;
            let up = eval(&work)?;
            work.get_mut(id).data[k] = orig - h;
            let down = eval(&work)?;
            work.get_mut(id).data[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).map_or(0.0, |g| g.data[k]);
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(err);
                report.worst = Some((store.name(id).to_string(), k));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::nn::layers::*;
    use crate::nn::tensor::Tensor;
    use rand::Rng;

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    fn randomize(store: &mut ParamStore, rng: &mut impl Rng) {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            for v in &mut store.get_mut(id).data {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    }

    const H: f64 = 1e-5;
    const TOL: f64 = 1e-4;

    #[test]
    fn dense_stack() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = ParamStore::new();
        let d1 = Dense::new(&mut s, "d1", 4, 5, Activation::ShiftedSoftplus, &mut rng);
        let d2 = Dense::new(&mut s, "d2", 5, 3, Activation::Identity, &mut rng);
        randomize(&mut s, &mut rng);
        let x = random(6, 4, &mut rng);
        let target = random(6, 3, &mut rng);
        let r = grad_check(
            &s,
            |t| {
                let xv = t.constant(x.clone());
                let h = d1.forward(t, xv);
                let y = d2.forward(t, h);
                let tv = t.constant(target.clone());
                let diff = t.sub(y, tv);
                let sq = t.mul(diff, diff);
                t.sum(sq)
            },
            H,
            usize::MAX,
        )
        .unwrap();
        assert!(r.max_rel_err < TOL, "{r:?}");
        assert_eq!(r.checked, s.scalar_count());
    }

    #[test]
    fn embedding_and_softmax_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut s = ParamStore::new();
        let emb = Embedding::new(&mut s, "e", 5, 4, &mut rng);
        let head = SoftmaxHead::new(&mut s, "h", 4, 6, &mut rng);
        randomize(&mut s, &mut rng);
        let idx: Arc<[usize]> = Arc::from(vec![0, 3, 3, 1]);
        let mut w = Tensor::zeros(4, 6);
        for r in 0..4 {
            w.set(r, (r * 2) % 6, -1.0);
        }
        let r = grad_check(
            &s,
            |t| {
                let e = emb.forward(t, idx.clone());
                let lp = head.forward(t, e);
                t.dot_const(lp, w.clone())
            },
            H,
            usize::MAX,
        )
        .unwrap();
        assert!(r.max_rel_err < TOL, "{r:?}");
    }

    #[test]
    fn cfconv_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut s = ParamStore::new();
        let layer = CfConv::new(&mut s, "c", 4, 6, &mut rng);
        randomize(&mut s, &mut rng);
        let pos: Vec<[f64; 3]> = (0..5)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let geom = PairGeometry::from_positions(&pos, 5.0, 6, 5.0);
        let x = random(5, 4, &mut rng);
        let r = grad_check(
            &s,
            |t| {
                let xv = t.constant(x.clone());
                let y = layer.forward(t, xv, &geom);
                let y = t.ssp(y);
                t.sum(y)
            },
            H,
            usize::MAX,
        )
        .unwrap();
        assert!(r.max_rel_err < TOL, "{r:?}");
    }

    #[test]
    fn graph_attention_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut s = ParamStore::new();
        let layer = GraphAttention::new(&mut s, "g", 3, 2, 3, Activation::ShiftedSoftplus, &mut rng);
        randomize(&mut s, &mut rng);
        let x = random(5, 3, &mut rng);
        let edges = GraphEdges::undirected(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]);
        let pool = Tensor::column(vec![1.0, -0.5, 0.25, 2.0, -1.0]);
        let r = grad_check(
            &s,
            |t| {
                let xv = t.constant(x.clone());
                let y = layer.forward(t, xv, &edges);
                let pooled = t.sum_rows(y);
                let sig = t.sigmoid(pooled);
                let w = t.constant(pool.clone());
                let yw = t.mul_col(y, w);
                let a = t.sum(yw);
                let b = t.sum(sig);
                t.add(a, b)
            },
            H,
            usize::MAX,
        )
        .unwrap();
        assert!(r.max_rel_err < TOL, "{r:?}");
    }

    #[test]
    fn remaining_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut s = ParamStore::new();
        let a = s.add("a", random(3, 4, &mut rng));
        let b = s.add("b", random(3, 2, &mut rng));
        let r = grad_check(
            &s,
            |t| {
                let av = t.param(a);
                let bv = t.param(b);
                let c = t.concat_cols(&[av, bv]);
                let sl = t.slice_cols(c, 1, 4);
                let e = t.exp(sl);
                let l = t.log(e);
                let sm = t.softmax_rows(l);
                let sc = t.scale(sm, 3.0);
                let lr = t.leaky_relu(sc, 0.1);
                let sq = t.mul(lr, lr);
                let seg = t.segment_softmax(sq, Arc::from(vec![0, 1, 0]), 2);
                let scat = t.scatter_add_rows(seg, Arc::from(vec![1, 1, 0]), 2);
                let w = Tensor::from_rows(&[vec![1.0, -2.0, 0.5, 3.0], vec![0.3, 0.1, -1.0, 2.0]]);
                t.dot_const(scat, w)
            },
            H,
            usize::MAX,
        )
        .unwrap();
        assert!(r.max_rel_err < TOL, "{r:?}");
    }
}
