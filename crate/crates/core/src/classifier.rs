//! Classification head over pooled sentence vectors.

use rand::Rng;

use crate::error::{Error, Result};
use crate::parser::{find, glorot_uniform};
use crate::tensor::{Binder, ParamId, ParamStore, Tape, Tensor, Var};

/// `[s1, s2, |s1 - s2|, s1 ⊙ s2]`.
pub fn featurize_pair(tape: &mut Tape, s1: Var, s2: Var) -> Result<Var> {
    if tape.shape(s1) != tape.shape(s2) {
        return Err(Error::ShapeMismatch {
            op: "featurize_pair",
            left: tape.shape(s1).to_vec(),
            right: tape.shape(s2).to_vec(),
        });
    }
    let diff = tape.sub(s1, s2)?;
    let diff = tape.abs(diff)?;
    let prod = tape.mul(s1, s2)?;
    tape.concat(&[s1, s2, diff, prod])
}

/// One ReLU hidden layer followed by a linear output layer.
#[derive(Debug, Clone, Copy)]
pub struct MlpParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl MlpParams {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, input: usize, hidden: usize, classes: usize) -> Self {
        MlpParams {
            w1: store.add("clf.w1", glorot_uniform(rng, hidden, input)),
            b1: store.add("clf.b1", Tensor::zeros(vec![hidden]).expect("positive")),
            w2: store.add("clf.w2", glorot_uniform(rng, classes, hidden)),
            b2: store.add("clf.b2", Tensor::zeros(vec![classes]).expect("positive")),
        }
    }

    pub fn lookup(store: &ParamStore) -> Result<Self> {
        Ok(MlpParams {
            w1: find(store, "clf.w1")?,
            b1: find(store, "clf.b1")?,
            w2: find(store, "clf.w2")?,
            b2: find(store, "clf.b2")?,
        })
    }
}

/// Inverted-dropout masks: each entry is `0` or `1 / keep_prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample(rng: &mut impl Rng, input: usize, hidden: usize, keep_prob: f64) -> Self {
        let mut draw = |n: usize| {
            (0..n)
                .map(|_| if rng.gen::<f64>() < keep_prob { 1.0 / keep_prob } else { 0.0 })
                .collect()
        };
        DropoutMasks {
            input: draw(input),
            hidden: draw(hidden),
        }
    }
}

/// Logits for `feature`; masks are supplied only in train mode.
pub fn classify(
    tape: &mut Tape,
    binder: &mut Binder<'_>,
    feature: Var,
    params: &MlpParams,
    dropout: Option<&DropoutMasks>,
) -> Result<Var> {
    let mut x = feature;
    if let Some(m) = dropout {
        let mask = tape.constant_vec(m.input.clone())?;
        x = tape.mul(x, mask)?;
    }
    let w1 = binder.var(tape, params.w1);
    let b1 = binder.var(tape, params.b1);
    let hidden = tape.matvec(w1, x)?;
    let hidden = tape.add(hidden, b1)?;
    let mut hidden = tape.relu(hidden)?;
    if let Some(m) = dropout {
        let mask = tape.constant_vec(m.hidden.clone())?;
        hidden = tape.mul(hidden, mask)?;
    }
    let w2 = binder.var(tape, params.w2);
    let b2 = binder.var(tape, params.b2);
    let logits = tape.matvec(w2, hidden)?;
    tape.add(logits, b2)
}

/// `a · b / (‖a‖ ‖b‖)`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "cosine_similarity",
            left: vec![a.len()],
            right: vec![b.len()],
        });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Input("cosine similarity of a zero vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
