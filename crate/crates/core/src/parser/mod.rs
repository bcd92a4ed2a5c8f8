//! Latent tree induction with a Tree-LSTM composition cell.
//!
//! Words are first turned into `(h, c)` leaf states by a [`LeafKind`]
//! transform. At every layer all adjacent pairs are composed, each candidate
//! is scored against a learned query vector, and one merge is picked with a
//! straight-through Gumbel-softmax ([`gumbel`]). The loop runs until a single
//! root remains ([`induce_tree`]).

mod gumbel;
mod induce;

pub use gumbel::{
    gumbel_noise, select_with_noise, st_gumbel_select, GumbelConfig, Selection, SelectionTrace, Selector,
    SelectMode,
};
pub use induce::{induce_tree, validity_scores, InducedTree};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Binder, ParamId, ParamStore, Tape, Tensor, Var};

/// Hidden and memory vectors of one tree node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeState {
    pub h: Var,
    pub c: Var,
}

/// Uniform(-s, s) matrix with `s = sqrt(6 / (rows + cols))`.
pub fn glorot_uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-s..s)).collect();
    Tensor::matrix(rows, cols, data).expect("positive dimensions")
}

fn zeros(len: usize) -> Tensor {
    Tensor::vector(vec![0.0; len]).expect("positive length")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    /// `(h, c) = split(W x + b)`
    Affine,
    /// Bidirectional GRU over the words, projected to `(h, c)`.
    #[default]
    Rnn,
}

/// One direction of the leaf GRU.
#[derive(Debug, Clone, Copy)]
pub struct GruParams {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub bu: ParamId,
}

impl GruParams {
    fn new(store: &mut ParamStore, rng: &mut impl Rng, prefix: &str, input: usize, hidden: usize) -> Self {
        GruParams {
            w: store.add(format!("{prefix}.w"), glorot_uniform(rng, 3 * hidden, input)),
            u: store.add(format!("{prefix}.u"), glorot_uniform(rng, 3 * hidden, hidden)),
            b: store.add(format!("{prefix}.b"), zeros(3 * hidden)),
            bu: store.add(format!("{prefix}.bu"), zeros(3 * hidden)),
        }
    }

    fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(GruParams {
            w: find(store, &format!("{prefix}.w"))?,
            u: find(store, &format!("{prefix}.u"))?,
            b: find(store, &format!("{prefix}.b"))?,
            bu: find(store, &format!("{prefix}.bu"))?,
        })
    }

    fn step(&self, tape: &mut Tape, binder: &mut Binder<'_>, x: Var, h: Var, hidden: usize) -> Result<Var> {
        let w = binder.var(tape, self.w);
        let u = binder.var(tape, self.u);
        let b = binder.var(tape, self.b);
        let bu = binder.var(tape, self.bu);
        let gx = tape.matvec(w, x)?;
        let gx = tape.add(gx, b)?;
        let gh = tape.matvec(u, h)?;
        let gh = tape.add(gh, bu)?;
        let (xr, xz, xn) = (tape.slice(gx, 0, hidden)?, tape.slice(gx, hidden, hidden)?, tape.slice(gx, 2 * hidden, hidden)?);
        let (hr, hz, hn) = (tape.slice(gh, 0, hidden)?, tape.slice(gh, hidden, hidden)?, tape.slice(gh, 2 * hidden, hidden)?);
        let r = tape.add(xr, hr)?;
        let r = tape.sigmoid(r)?;
        let z = tape.add(xz, hz)?;
        let z = tape.sigmoid(z)?;
        let gated = tape.mul(r, hn)?;
        let n = tape.add(xn, gated)?;
        let n = tape.tanh(n)?;
        // h' = (1 - z) n + z h = n + z (h - n)
        let diff = tape.sub(h, n)?;
        let carry = tape.mul(z, diff)?;
        tape.add(n, carry)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LeafParams {
    Affine {
        w: ParamId,
        b: ParamId,
    },
    Rnn {
        forward: GruParams,
        backward: GruParams,
        proj_w: ParamId,
        proj_b: ParamId,
    },
}

impl LeafParams {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, kind: LeafKind, word_dim: usize, hidden: usize) -> Self {
        match kind {
            LeafKind::Affine => LeafParams::Affine {
                w: store.add("leaf.w", glorot_uniform(rng, 2 * hidden, word_dim)),
                b: store.add("leaf.b", zeros(2 * hidden)),
            },
            LeafKind::Rnn => LeafParams::Rnn {
                forward: GruParams::new(store, rng, "leaf.fwd", word_dim, hidden),
                backward: GruParams::new(store, rng, "leaf.bwd", word_dim, hidden),
                proj_w: store.add("leaf.proj.w", glorot_uniform(rng, 2 * hidden, 2 * hidden)),
                proj_b: store.add("leaf.proj.b", zeros(2 * hidden)),
            },
        }
    }

    pub fn lookup(store: &ParamStore, kind: LeafKind) -> Result<Self> {
        Ok(match kind {
            LeafKind::Affine => LeafParams::Affine {
                w: find(store, "leaf.w")?,
                b: find(store, "leaf.b")?,
            },
            LeafKind::Rnn => LeafParams::Rnn {
                forward: GruParams::lookup(store, "leaf.fwd")?,
                backward: GruParams::lookup(store, "leaf.bwd")?,
                proj_w: find(store, "leaf.proj.w")?,
                proj_b: find(store, "leaf.proj.b")?,
            },
        })
    }

    pub fn kind(&self) -> LeafKind {
        match self {
            LeafParams::Affine { .. } => LeafKind::Affine,
            LeafParams::Rnn { .. } => LeafKind::Rnn,
        }
    }
}

pub(crate) fn find(store: &ParamStore, name: &str) -> Result<ParamId> {
    store
        .find(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
}

fn split_state(tape: &mut Tape, joined: Var, hidden: usize) -> Result<NodeState> {
    Ok(NodeState {
        h: tape.slice(joined, 0, hidden)?,
        c: tape.slice(joined, hidden, hidden)?,
    })
}

/// Maps word vectors to leaf states, one per word.
pub fn leaf_transform(
    tape: &mut Tape,
    binder: &mut Binder<'_>,
    words: &[Var],
    params: &LeafParams,
    hidden: usize,
) -> Result<Vec<NodeState>> {
    if words.is_empty() {
        return Err(Error::Input("leaf transform of an empty sentence".into()));
    }
    match *params {
        LeafParams::Affine { w, b } => {
            let w = binder.var(tape, w);
            let b = binder.var(tape, b);
            words
                .iter()
                .map(|&x| {
                    let y = tape.matvec(w, x)?;
                    let y = tape.add(y, b)?;
                    split_state(tape, y, hidden)
                })
                .collect()
        }
        LeafParams::Rnn {
            forward,
            backward,
            proj_w,
            proj_b,
        } => {
            let n = words.len();
            let h0 = tape.constant_vec(vec![0.0; hidden])?;
            let mut fwd = Vec::with_capacity(n);
            let mut h = h0;
            for &x in words {
                h = forward.step(tape, binder, x, h, hidden)?;
                fwd.push(h);
            }
            let mut bwd = vec![h0; n];
            let mut h = h0;
            for i in (0..n).rev() {
                h = backward.step(tape, binder, words[i], h, hidden)?;
                bwd[i] = h;
            }
            let pw = binder.var(tape, proj_w);
            let pb = binder.var(tape, proj_b);
            (0..n)
                .map(|i| {
                    let joined = tape.concat(&[fwd[i], bwd[i]])?;
                    let y = tape.matvec(pw, joined)?;
                    let y = tape.add(y, pb)?;
                    split_state(tape, y, hidden)
                })
                .collect()
        }
    }
}

/// Tree-LSTM composition weights: `r` is `5H × 2H`, `b` has length `5H`,
/// laid out as the `[z; i; f_l; f_r; o]` blocks.
#[derive(Debug, Clone, Copy)]
pub struct CompositionParams {
    pub r: ParamId,
    pub b: ParamId,
}

impl CompositionParams {
    /// Glorot-uniform `r`; bias zero except the two forget-gate blocks,
    /// which start at 1.
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, hidden: usize) -> Self {
        let r = glorot_uniform(rng, 5 * hidden, 2 * hidden);
        let mut bias = vec![0.0; 5 * hidden];
        bias[2 * hidden..4 * hidden].iter_mut().for_each(|v| *v = 1.0);
        CompositionParams {
            r: store.add("compose.r", r),
            b: store.add("compose.b", Tensor::vector(bias).expect("positive length")),
        }
    }

    pub fn lookup(store: &ParamStore) -> Result<Self> {
        Ok(CompositionParams {
            r: find(store, "compose.r")?,
            b: find(store, "compose.b")?,
        })
    }
}

/// Composes two adjacent constituents into their parent.
pub fn compose(
    tape: &mut Tape,
    binder: &mut Binder<'_>,
    left: NodeState,
    right: NodeState,
    params: &CompositionParams,
) -> Result<NodeState> {
    let hidden = tape.shape(left.h)[0];
    for v in [right.h, left.c, right.c] {
        if tape.shape(v) != tape.shape(left.h) {
            return Err(Error::ShapeMismatch {
                op: "compose",
                left: tape.shape(left.h).to_vec(),
                right: tape.shape(v).to_vec(),
            });
        }
    }
    let r = binder.var(tape, params.r);
    let b = binder.var(tape, params.b);
    let hh = tape.concat(&[left.h, right.h])?;
    let pre = tape.matvec(r, hh)?;
    let pre = tape.add(pre, b)?;
    let block = |tape: &mut Tape, k: usize| tape.slice(pre, k * hidden, hidden);
    let z = block(tape, 0)?;
    let z = tape.tanh(z)?;
    let i = block(tape, 1)?;
    let i = tape.sigmoid(i)?;
    let fl = block(tape, 2)?;
    let fl = tape.sigmoid(fl)?;
    let fr = block(tape, 3)?;
    let fr = tape.sigmoid(fr)?;
    let o = block(tape, 4)?;
    let o = tape.sigmoid(o)?;

    let zi = tape.mul(z, i)?;
    let cl = tape.mul(left.c, fl)?;
    let cr = tape.mul(right.c, fr)?;
    let c = tape.add(zi, cl)?;
    let c = tape.add(c, cr)?;
    let tc = tape.tanh(c)?;
    let h = tape.mul(tc, o)?;
    Ok(NodeState { h, c })
}

/// Trainable query `q` scoring candidate compositions by `q · h`.
#[derive(Debug, Clone, Copy)]
pub struct QueryVector(pub ParamId);

impl QueryVector {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, hidden: usize) -> Self {
        let s = (6.0 / (hidden + 1) as f64).sqrt();
        let data = (0..hidden).map(|_| rng.gen_range(-s..s)).collect();
        QueryVector(store.add("query", Tensor::vector(data).expect("positive length")))
    }

    pub fn lookup(store: &ParamStore) -> Result<Self> {
        Ok(QueryVector(find(store, "query")?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::check_store_gradients;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(tape: &mut Tape, h: &[f64], c: &[f64]) -> NodeState {
        NodeState {
            h: tape.constant_vec(h.to_vec()).unwrap(),
            c: tape.constant_vec(c.to_vec()).unwrap(),
        }
    }

    fn zero_composition(hidden: usize) -> (ParamStore, CompositionParams) {
        let mut store = ParamStore::new();
        let r = store.add("compose.r", Tensor::zeros(vec![5 * hidden, 2 * hidden]).unwrap());
        let b = store.add("compose.b", Tensor::zeros(vec![5 * hidden]).unwrap());
        (store, CompositionParams { r, b })
    }

    #[test]
    fn compose_with_zero_weights_and_memory() {
        let (store, params) = zero_composition(1);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store);
        let l = state(&mut tape, &[0.7], &[0.0]);
        let r = state(&mut tape, &[-0.2], &[0.0]);
        let p = compose(&mut tape, &mut binder, l, r, &params).unwrap();
        assert_eq!(tape.value(p.c), &[0.0]);
        assert_eq!(tape.value(p.h), &[0.0]);
    }

    #[test]
    fn compose_with_unit_memories() {
        let (store, params) = zero_composition(1);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store);
        let l = state(&mut tape, &[0.3], &[1.0]);
        let r = state(&mut tape, &[0.4], &[1.0]);
        let p = compose(&mut tape, &mut binder, l, r, &params).unwrap();
        assert!((tape.value(p.c)[0] - 1.0).abs() < 1e-15);
        // tanh(1) * 0.5
        assert!((tape.value(p.h)[0] - 0.380_797_077_977_882_3).abs() < 1e-12);
    }

    #[test]
    fn composition_initialization() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = CompositionParams::new(&mut store, &mut rng, 3);
        assert_eq!(store.get(p.r).shape(), &[15, 6]);
        let b = store.get(p.b).data();
        assert_eq!(b, &[0., 0., 0., 0., 0., 0., 1., 1., 1., 1., 1., 1., 0., 0., 0.]);
        let s = (6.0f64 / 21.0).sqrt();
        assert!(store.get(p.r).data().iter().all(|v| v.abs() < s));
    }

    #[test]
    fn affine_leaf_with_zero_map() {
        let mut store = ParamStore::new();
        let w = store.add("leaf.w", Tensor::zeros(vec![4, 3]).unwrap());
        let b = store.add("leaf.b", Tensor::zeros(vec![4]).unwrap());
        let params = LeafParams::Affine { w, b };
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store);
        let words: Vec<Var> = (0..3)
            .map(|i| tape.constant_vec(vec![i as f64, 1.0, -1.0]).unwrap())
            .collect();
        let leaves = leaf_transform(&mut tape, &mut binder, &words, &params, 2).unwrap();
        assert_eq!(leaves.len(), 3);
        for s in leaves {
            assert_eq!(tape.value(s.h), &[0.0, 0.0]);
            assert_eq!(tape.value(s.c), &[0.0, 0.0]);
        }
    }

    #[test]
    fn affine_leaf_identity_like() {
        let mut store = ParamStore::new();
        let w = store.add("leaf.w", Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap());
        let b = store.add("leaf.b", Tensor::zeros(vec![2]).unwrap());
        let params = LeafParams::Affine { w, b };
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store);
        let x = tape.constant_vec(vec![1.0]).unwrap();
        let leaves = leaf_transform(&mut tape, &mut binder, &[x], &params, 1).unwrap();
        assert_eq!(leaves.len(), 1);
        assert_eq!(tape.value(leaves[0].h), &[1.0]);
        assert_eq!(tape.value(leaves[0].c), &[1.0]);
    }

    #[test]
    fn leaf_transform_rejects_empty_and_mismatched() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = LeafParams::new(&mut store, &mut rng, LeafKind::Affine, 3, 2);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store);
        assert!(leaf_transform(&mut tape, &mut binder, &[], &params, 2).is_err());
        let x = tape.constant_vec(vec![1.0, 2.0]).unwrap();
        assert!(leaf_transform(&mut tape, &mut binder, &[x], &params, 2).is_err());
    }

    #[test]
    fn compose_gradients_match_finite_differences() {
        let hidden = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let params = CompositionParams::new(&mut store, &mut rng, hidden);
        let mut child = |name: &str| {
            let data = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
            store.add(name, Tensor::vector(data).unwrap())
        };
        let (hl, hr, cl, cr) = (child("hl"), child("hr"), child("cl"), child("cr"));
        let report = check_store_gradients(
            &store,
            |tape, binder| {
                let left = NodeState {
                    h: binder.var(tape, hl),
                    c: binder.var(tape, cl),
                };
                let right = NodeState {
                    h: binder.var(tape, hr),
                    c: binder.var(tape, cr),
                };
                let p = compose(tape, binder, left, right, &params)?;
                let w = tape.constant_vec(vec![0.3, -1.1, 0.7])?;
                let a = tape.dot(p.h, w)?;
                let b = tape.sum(p.c)?;
                tape.add(a, b)
            },
            1e-6,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }

    #[test]
    fn rnn_leaf_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let params = LeafParams::new(&mut store, &mut rng, LeafKind::Rnn, 2, 2);
        let words: Vec<_> = (0..3)
            .map(|i| {
                let data = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                store.add(format!("x{i}"), Tensor::vector(data).unwrap())
            })
            .collect();
        let report = check_store_gradients(
            &store,
            |tape, binder| {
                let xs: Vec<Var> = words.iter().map(|&id| binder.var(tape, id)).collect();
                let leaves = leaf_transform(tape, binder, &xs, &params, 2)?;
                let mut total = tape.constant_vec(vec![0.0])?;
                for (k, s) in leaves.iter().enumerate() {
                    let w = tape.constant_vec(vec![1.0 + k as f64, -0.5])?;
                    let a = tape.dot(s.h, w)?;
                    let b = tape.dot(s.c, w)?;
                    total = tape.add(total, a)?;
                    total = tape.add(total, b)?;
                }
                Ok(total)
            },
            1e-6,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }
}
