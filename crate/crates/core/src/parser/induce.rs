use crate::error::{Error, Result};
use crate::tensor::{Binder, Tape, Var};
use crate::tree::BinaryTree;

use super::{compose, CompositionParams, NodeState, QueryVector, Selector};

/// A parsed sentence: the tree plus the state of every node in creation
/// order (the `n` leaves, then one state per merge).
#[derive(Debug, Clone)]
pub struct InducedTree {
    pub tree: BinaryTree,
    pub nodes: Vec<NodeState>,
    /// Validity distribution over the candidates of each layer.
    pub layer_scores: Vec<Vec<f64>>,
}

fn validity_logits(tape: &mut Tape, candidates: &[NodeState], q: Var) -> Result<Var> {
    let dots = candidates
        .iter()
        .map(|c| tape.dot(q, c.h))
        .collect::<Result<Vec<_>>>()?;
    tape.concat(&dots)
}

/// `v_i = exp(q · h_i) / Σ_j exp(q · h_j)` over candidate states.
pub fn validity_scores(tape: &mut Tape, candidates: &[NodeState], q: Var) -> Result<Var> {
    if candidates.is_empty() {
        return Err(Error::Input("validity scores need at least one candidate".into()));
    }
    let logits = validity_logits(tape, candidates, q)?;
    tape.softmax(logits)
}

fn plain_softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Builds a binary tree bottom-up over `leaves`.
///
/// Each layer composes every adjacent pair, scores the candidates with the
/// query vector and lets `selector` choose one merge. In train mode the
/// chosen state enters the graph as `Σ_k onehot_k · candidate_k`, so the
/// straight-through gradient reaches the scoring path.
pub fn induce_tree(
    tape: &mut Tape,
    binder: &mut Binder<'_>,
    leaves: &[NodeState],
    params: &CompositionParams,
    query: &QueryVector,
    selector: &mut Selector<'_>,
) -> Result<InducedTree> {
    let n = leaves.len();
    if n == 0 {
        return Err(Error::Input("cannot induce a tree over zero words".into()));
    }
    let q = binder.var(tape, query.0);
    let mut current: Vec<NodeState> = leaves.to_vec();
    let mut nodes: Vec<NodeState> = leaves.to_vec();
    let mut merges = Vec::with_capacity(n - 1);
    let mut layer_scores = Vec::with_capacity(n - 1);
    selector.begin_sentence(n.saturating_sub(1));

    while current.len() > 1 {
        let candidates = current
            .windows(2)
            .map(|pair| compose(tape, binder, pair[0], pair[1], params))
            .collect::<Result<Vec<_>>>()?;
        let logits = validity_logits(tape, &candidates, q)?;
        layer_scores.push(plain_softmax(tape.value(logits)));
        let selection = selector.select(tape, logits)?;
        let chosen = match selection.weights {
            Some(weights) => {
                let hs: Vec<Var> = candidates.iter().map(|c| c.h).collect();
                let cs: Vec<Var> = candidates.iter().map(|c| c.c).collect();
                NodeState {
                    h: tape.weighted_sum(&hs, weights)?,
                    c: tape.weighted_sum(&cs, weights)?,
                }
            }
            None => candidates[selection.index],
        };
        let p = selection.index;
        current.splice(p..p + 2, [chosen]);
        nodes.push(chosen);
        merges.push(p);
    }

    Ok(InducedTree {
        tree: BinaryTree::new(n, merges)?,
        nodes,
        layer_scores,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::parser::GumbelConfig;
    use crate::tensor::{ParamStore, Tensor};

    fn random_leaves(tape: &mut Tape, rng: &mut ChaCha8Rng, n: usize, hidden: usize) -> Vec<NodeState> {
        (0..n)
            .map(|_| NodeState {
                h: tape.constant_vec((0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
                c: tape.constant_vec((0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
            })
            .collect()
    }

    #[test]
    fn identical_candidates_score_uniformly() {
        let mut tape = Tape::new();
        let h = tape.constant_vec(vec![0.3, -0.2]).unwrap();
        let s = NodeState { h, c: h };
        let q = tape.constant_vec(vec![1.5, 0.5]).unwrap();
        let v = validity_scores(&mut tape, &[s, s, s, s], q).unwrap();
        for x in tape.value(v) {
            assert!((x - 0.25).abs() < 1e-15);
        }
        let v = validity_scores(&mut tape, &[s], q).unwrap();
        assert_eq!(tape.value(v), &[1.0]);
    }

    #[test]
    fn validity_softmax_two_to_one() {
        let mut tape = Tape::new();
        let q = tape.constant_vec(vec![1.0]).unwrap();
        let a = tape.constant_vec(vec![2f64.ln()]).unwrap();
        let b = tape.constant_vec(vec![0.0]).unwrap();
        let v = validity_scores(&mut tape, &[NodeState { h: a, c: a }, NodeState { h: b, c: b }], q).unwrap();
        let v = tape.value(v);
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((v[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn five_words_produce_nine_nodes() {
        let hidden = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let params = CompositionParams::new(&mut store, &mut rng, hidden);
        let query = QueryVector::new(&mut store, &mut rng, hidden);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store);
        let leaves = random_leaves(&mut tape, &mut rng, 5, hidden);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(7);
        let mut sel = Selector::sampling(GumbelConfig::default(), &mut noise_rng);
        let out = induce_tree(&mut tape, &mut binder, &leaves, &params, &query, &mut sel).unwrap();
        let counts: Vec<usize> = out.layer_scores.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![4, 3, 2, 1]);
        assert_eq!(out.nodes.len(), 9);
        assert_eq!(out.tree.merges().len(), 4);
    }

    #[test]
    fn single_word_has_no_merges() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let params = CompositionParams::new(&mut store, &mut rng, 2);
        let query = QueryVector::new(&mut store, &mut rng, 2);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store);
        let leaves = random_leaves(&mut tape, &mut rng, 1, 2);
        let mut sel = Selector::inference();
        let out = induce_tree(&mut tape, &mut binder, &leaves, &params, &query, &mut sel).unwrap();
        assert!(out.tree.merges().is_empty());
        assert_eq!(out.nodes, leaves);
    }

    #[test]
    fn query_forcing_leftmost_merge() {
        // H = 1, R = 0 except the output-gate row reads h_l with weight 4,
        // and every memory cell is 1. Then z = 0, f_l = f_r = 0.5, c_p = 1
        // and h_p = tanh(1) σ(4 h_l): candidates rank by their left child's
        // hidden value.
        let mut store = ParamStore::new();
        let mut r = vec![0.0; 5 * 2];
        r[4 * 2] = 4.0; // o row, h_l column
        let r = store.add("compose.r", Tensor::matrix(5, 2, r).unwrap());
        let b = store.add("compose.b", Tensor::zeros(vec![5]).unwrap());
        let params = CompositionParams { r, b };

        let hs = [0.9, -0.5, 0.2];
        // brute force over a small grid of q values: keep those for which
        // the leftmost pair wins at the first layer
        let mut found = None;
        for q in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
            let mut s = store.clone();
            let qid = s.add("query", Tensor::vector(vec![q]).unwrap());
            let mut tape = Tape::new();
            let mut binder = Binder::new(&s);
            let leaves: Vec<NodeState> = hs
                .iter()
                .map(|&h| NodeState {
                    h: tape.constant_vec(vec![h]).unwrap(),
                    c: tape.constant_vec(vec![1.0]).unwrap(),
                })
                .collect();
            let out = induce_tree(&mut tape, &mut binder, &leaves, &params, &QueryVector(qid), &mut Selector::inference())
                .unwrap();
            if out.tree.merges()[0] == 0 {
                found = Some((q, out.tree));
                break;
            }
        }
        let (q, tree) = found.expect("some query prefers the leftmost pair");
        assert!(q > 0.0);
        assert_eq!(tree.to_bracketed(), "( ( w1 w2 ) w3 )");
    }

    #[test]
    fn inference_is_deterministic() {
        let hidden = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let params = CompositionParams::new(&mut store, &mut rng, hidden);
        let query = QueryVector::new(&mut store, &mut rng, hidden);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut tape = Tape::new();
            let mut binder = Binder::new(&store);
            let leaves = random_leaves(&mut tape, &mut rng, 7, hidden);
            induce_tree(&mut tape, &mut binder, &leaves, &params, &query, &mut Selector::inference())
                .unwrap()
                .tree
        };
        assert_eq!(run(), run());
    }
}
