//! Structural attention over all nodes of an induced tree.
//!
//! Each node's hidden state is projected into a shared `D_a`-dimensional
//! space, scored by a single linear unit, and the softmax of those scores
//! weights the node states into one sentence vector:
//!
//! ```text
//! e_i = ReLU(W_e h_i)
//! a_i = exp(W_a e_i) / Σ_j exp(W_a e_j)
//! H_c = Σ_i a_i h_i
//! ```
//!
//! Leaves and internal constituents are attended alike, which gives every
//! word a direct gradient path besides the one through the root.

use rand::Rng;

use crate::error::{Error, Result};
use crate::parser::{find, glorot_uniform};
use crate::tensor::{Binder, ParamId, ParamStore, Tape, Var};

/// `w_e` is `D_a × H`, `w_a` is `1 × D_a`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub w_e: ParamId,
    pub w_a: ParamId,
}

impl AttentionParams {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, hidden: usize, attn_dim: usize) -> Self {
        AttentionParams {
            w_e: store.add("attn.w_e", glorot_uniform(rng, attn_dim, hidden)),
            w_a: store.add("attn.w_a", glorot_uniform(rng, 1, attn_dim)),
        }
    }

    pub fn lookup(store: &ParamStore) -> Result<Self> {
        Ok(AttentionParams {
            w_e: find(store, "attn.w_e")?,
            w_a: find(store, "attn.w_a")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// `H_c`, the pooled sentence vector.
    pub sentence: Var,
    /// Normalized weights, one per node.
    pub weights: Var,
    /// Projected node embeddings `e_i`.
    pub embeddings: Vec<Var>,
}

/// Pools `nodes` (hidden states) into a sentence vector.
///
/// The softmax is evaluated with max-subtraction, so large logits cannot
/// overflow.
pub fn attend(
    tape: &mut Tape,
    binder: &mut Binder<'_>,
    nodes: &[Var],
    params: &AttentionParams,
) -> Result<AttentionOutput> {
    if nodes.is_empty() {
        return Err(Error::Input("attention over zero nodes".into()));
    }
    let w_e = binder.var(tape, params.w_e);
    let w_a = binder.var(tape, params.w_a);
    let mut embeddings = Vec::with_capacity(nodes.len());
    let mut logits = Vec::with_capacity(nodes.len());
    for &h in nodes {
        let e = tape.matvec(w_e, h)?;
        let e = tape.relu(e)?;
        logits.push(tape.matvec(w_a, e)?);
        embeddings.push(e);
    }
    let logits = tape.concat(&logits)?;
    let weights = tape.softmax(logits)?;
    let sentence = tape.weighted_sum(nodes, weights)?;
    Ok(AttentionOutput {
        sentence,
        weights,
        embeddings,
    })
}
