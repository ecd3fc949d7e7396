//! Finite-difference checks for every differentiable tape operation.

use mvae_nn::{grad_check, init, NodeId, ParamStore, Reduction, Result, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn store_with(shapes: &[(&str, &[usize])], seed: u64) -> ParamStore<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for (name, shape) in shapes {
        store.add(*name, init::uniform(&mut rng, shape, 1.0)).unwrap();
    }
    store
}

/// Projects an arbitrary node to a scalar through fixed random weights, so
/// that every output coordinate carries a distinct gradient.
fn project(tape: &mut Tape<f64>, x: NodeId, seed: u64) -> Result<NodeId> {
    let shape = tape.value(x).shape().to_vec();
    let w = tape.constant(init::uniform(&mut ChaCha8Rng::seed_from_u64(seed), &shape, 1.0))?;
    let prod = tape.mul(x, w)?;
    tape.sum(prod)
}

fn check<L>(shapes: &[(&str, &[usize])], loss: L)
where
    L: FnMut(&mut Tape<f64>, &ParamStore<f64>) -> Result<NodeId>,
{
    let mut store = store_with(shapes, 11);
    let report = grad_check(&mut store, EPS, loss).unwrap();
    assert!(report.max_rel_error <= TOL, "{report:?}");
}

fn p(tape: &mut Tape<f64>, store: &ParamStore<f64>, name: &str) -> NodeId {
    tape.param(store, store.require(name).unwrap())
}

#[test]
fn matmul_and_transpose() {
    check(&[("a", &[3, 4]), ("b", &[4, 2])], |t, s| {
        let (a, b) = (p(t, s, "a"), p(t, s, "b"));
        let m = t.matmul(a, b)?;
        let mt = t.transpose(m)?;
        project(t, mt, 1)
    });
}

#[test]
fn broadcast_add_and_mul_and_scale() {
    check(
        &[("a", &[3, 4]), ("row", &[4]), ("col", &[3, 1]), ("s", &[])],
        |t, s| {
            let a = p(t, s, "a");
            let (row, col, sc) = (p(t, s, "row"), p(t, s, "col"), p(t, s, "s"));
            let r = t.add(a, row)?;
            let c = t.add(r, col)?;
            let k = t.add(c, sc)?;
            let m = t.mul(k, a)?;
            let sc = t.scale(m, 0.7)?;
            project(t, sc, 2)
        },
    );
}

#[test]
fn concat_and_slice() {
    check(&[("a", &[2, 3]), ("b", &[2, 2]), ("c", &[1, 5])], |t, s| {
        let (a, b, c) = (p(t, s, "a"), p(t, s, "b"), p(t, s, "c"));
        let ab = t.concat_cols(&[a, b])?;
        let abc = t.concat_rows(&[ab, c])?;
        let mid = t.slice_cols(abc, 1, 4)?;
        let low = t.slice_rows(mid, 1, 3)?;
        let flat = t.reshape(low, &[6])?;
        project(t, flat, 3)
    });
}

#[test]
fn softmax_plain_and_causal() {
    check(&[("a", &[3, 3])], |t, s| {
        let a = p(t, s, "a");
        let y = t.softmax_rows(a)?;
        let z = t.causal_softmax_rows(a)?;
        let both = t.concat_cols(&[y, z])?;
        project(t, both, 4)
    });
}

#[test]
fn scaled_dot() {
    check(&[("q", &[3, 4]), ("k", &[2, 4])], |t, s| {
        let (q, k) = (p(t, s, "q"), p(t, s, "k"));
        let d = t.scaled_dot(q, k, 0.5)?;
        project(t, d, 5)
    });
}

#[test]
fn layer_norm() {
    check(&[("x", &[3, 5]), ("g", &[5]), ("b", &[5])], |t, s| {
        let (x, g, b) = (p(t, s, "x"), p(t, s, "g"), p(t, s, "b"));
        let y = t.layer_norm(x, g, b, 1e-6)?;
        project(t, y, 6)
    });
}

#[test]
fn relu() {
    check(&[("x", &[4, 4])], |t, s| {
        let x = p(t, s, "x");
        let y = t.relu(x)?;
        project(t, y, 7)
    });
}

#[test]
fn embedding_lookup_with_repeats() {
    check(&[("table", &[5, 3])], |t, s| {
        let table = p(t, s, "table");
        let y = t.embedding(table, &[4, 0, 4, 2])?;
        project(t, y, 8)
    });
}

#[test]
fn cross_entropy_mean_and_sum() {
    check(&[("logits", &[3, 4])], |t, s| {
        let x = p(t, s, "logits");
        let a = t.cross_entropy(x, &[0, 3, 1], Reduction::Mean)?;
        let b = t.cross_entropy(x, &[2, 2, 2], Reduction::Sum)?;
        let both = t.concat_cols(&[a, b])?;
        project(t, both, 9)
    });
}

#[test]
fn pair_scores_and_pair_mix() {
    check(&[("q", &[3, 2]), ("r", &[9, 2]), ("a", &[3, 3])], |t, s| {
        let (q, r, a) = (p(t, s, "q"), p(t, s, "r"), p(t, s, "a"));
        let sc = t.pair_scores(q, r)?;
        let w = t.softmax_rows(a)?;
        let mix = t.pair_mix(w, r)?;
        let both = t.concat_cols(&[sc, mix])?;
        project(t, both, 10)
    });
}

#[test]
fn grouped_row_dot() {
    check(&[("t", &[4, 6]), ("m", &[4, 2])], |t, s| {
        let (a, b) = (p(t, s, "t"), p(t, s, "m"));
        let y = t.grouped_row_dot(a, b)?;
        project(t, y, 11)
    });
}

#[test]
fn dropout_mask_is_differentiable() {
    check(&[("x", &[3, 3])], |t, s| {
        let x = p(t, s, "x");
        // Same seed on every evaluation gives the same mask.
        let y = t.dropout(x, 0.3, &mut ChaCha8Rng::seed_from_u64(5))?;
        project(t, y, 12)
    });
}

#[test]
fn forward_is_deterministic() {
    let store = store_with(&[("a", &[4, 4]), ("b", &[4, 4])], 3);
    let run = || -> Vec<f64> {
        let mut t = Tape::new();
        let (a, b) = (p(&mut t, &store, "a"), p(&mut t, &store, "b"));
        let m = t.matmul(a, b).unwrap();
        let y = t.softmax_rows(m).unwrap();
        t.value(y).data().to_vec()
    };
    let (x, y) = (run(), run());
    assert!(x.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits()));
}
