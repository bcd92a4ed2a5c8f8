//! A generated sentence-pair task for smoke-testing the learning loop.
//!
//! Words are `w0 … w{V-1}`. The label says whether every hypothesis token
//! also occurs in the premise. Positive hypotheses are drawn from the
//! premise's tokens; negatives are drawn from the whole vocabulary,
//! rejecting draws that happen to be subsets. Classes are balanced.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embedding_io::{EmbeddingMatrix, PairExample, Vocabulary};
use crate::error::{Error, Result};

pub const SUBSET: &str = "subset";
pub const NOT_SUBSET: &str = "not_subset";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetTaskConfig {
    pub examples: usize,
    pub vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SubsetTaskConfig {
    fn default() -> Self {
        SubsetTaskConfig {
            examples: 500,
            vocab_size: 50,
            min_len: 3,
            max_len: 8,
            seed: 7,
        }
    }
}

/// One generated pair in surface form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TextPair {
    pub premise: String,
    pub hypothesis: String,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct SubsetTask {
    pub vocab: Vocabulary,
    /// Label names; index 0 is [`NOT_SUBSET`], index 1 is [`SUBSET`].
    pub labels: Vec<String>,
    pub pairs: Vec<TextPair>,
}

pub fn word(i: usize) -> String {
    format!("w{i}")
}

/// Generates the task. The first half of the examples is not special:
/// labels alternate, so any prefix is close to balanced.
pub fn subset_task(config: &SubsetTaskConfig) -> Result<SubsetTask> {
    if config.min_len == 0 || config.min_len > config.max_len {
        return Err(Error::Config(format!(
            "invalid length range {}..={}",
            config.min_len, config.max_len
        )));
    }
    if config.vocab_size <= config.max_len {
        return Err(Error::Config("vocabulary must be larger than the longest sentence".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = Vocabulary::from_words((0..config.vocab_size).map(word));
    let mut pairs = Vec::with_capacity(config.examples);
    for i in 0..config.examples {
        let positive = i % 2 == 0;
        let plen = rng.gen_range(config.min_len..=config.max_len);
        let premise: Vec<usize> = (0..plen).map(|_| rng.gen_range(0..config.vocab_size)).collect();
        let hlen = rng.gen_range(config.min_len..=config.max_len);
        let hypothesis: Vec<usize> = if positive {
            (0..hlen).map(|_| *premise.choose(&mut rng).expect("non-empty")).collect()
        } else {
            loop {
                let h: Vec<usize> = (0..hlen).map(|_| rng.gen_range(0..config.vocab_size)).collect();
                if h.iter().any(|w| !premise.contains(w)) {
                    break h;
                }
            }
        };
        let text = |ws: &[usize]| ws.iter().map(|&w| word(w)).collect::<Vec<_>>().join(" ");
        pairs.push(TextPair {
            premise: text(&premise),
            hypothesis: text(&hypothesis),
            label: if positive { SUBSET } else { NOT_SUBSET }.to_string(),
        });
    }
    Ok(SubsetTask {
        vocab,
        labels: vec![NOT_SUBSET.to_string(), SUBSET.to_string()],
        pairs,
    })
}

impl SubsetTask {
    /// Index-encoded examples.
    pub fn examples(&self) -> Vec<PairExample> {
        self.pairs
            .iter()
            .map(|p| {
                let enc = |s: &str| s.split(' ').map(|w| self.vocab.lookup(w)).collect();
                PairExample {
                    premise: enc(&p.premise),
                    hypothesis: enc(&p.hypothesis),
                    label: self.labels.iter().position(|l| *l == p.label).expect("known label"),
                }
            })
            .collect()
    }

    /// Line-delimited JSON, readable by the pair-corpus loader.
    pub fn to_jsonl(&self, pairs: &[TextPair]) -> String {
        let mut out = String::new();
        for p in pairs {
            let _ = writeln!(out, "{}", serde_json::to_string(p).expect("serializable"));
        }
        out
    }

    /// Random word vectors for the task vocabulary.
    pub fn embeddings(&self, dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::random(self.vocab.len(), dim, 1.0, seed)
    }
}

/// Text form of an embedding table, loadable by the embedding reader.
/// PAD and UNK rows are not written.
pub fn embeddings_to_text(vocab: &Vocabulary, emb: &EmbeddingMatrix) -> String {
    let dim = emb.dim();
    let mut out = String::new();
    for (i, w) in vocab.words().iter().enumerate().skip(2) {
        out.push_str(w);
        for v in &emb.vectors.data()[i * dim..(i + 1) * dim] {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}
