//! Word vectors, vocabularies and corpus readers.
//!
//! Embedding files are plain text, one `word v1 … vD` record per line.
//! Pair and sentence corpora are line-delimited JSON objects; tree corpora
//! hold one bracketed tree per line.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tree::BinaryTree;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Records whose token count (pair: premise + hypothesis) reaches this are
/// skipped.
pub const DEFAULT_LENGTH_CAP: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    words: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary with PAD and UNK followed by `words` in order.
    /// Repeated words keep their first index.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary {
            index: HashMap::new(),
            words: Vec::new(),
        };
        vocab.insert(PAD_TOKEN.to_string());
        vocab.insert(UNK_TOKEN.to_string());
        for w in words {
            vocab.insert(w.into());
        }
        vocab
    }

    fn insert(&mut self, word: String) -> bool {
        if self.index.contains_key(&word) {
            return false;
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        true
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Index of `word`, or [`UNK`].
    pub fn lookup(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t)).collect()
    }
}

/// Word-vector table; row [`PAD`] is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub vectors: Tensor,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn rows(&self) -> usize {
        self.vectors.shape()[0]
    }

    /// Uniform(-scale, scale) vectors for every row except PAD.
    pub fn random(vocab_size: usize, dim: usize, scale: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; vocab_size * dim];
        for v in data.iter_mut().skip(dim) {
            *v = rng.gen_range(-scale..scale);
        }
        Ok(EmbeddingMatrix {
            vectors: Tensor::matrix(vocab_size, dim, data)?,
            trainable: false,
        })
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a text embedding file.
///
/// Vocabulary order follows the file, after the reserved PAD and UNK rows.
/// The UNK row is drawn from uniform(-0.05, 0.05) with `seed`. Words that
/// repeat an earlier line are ignored.
pub fn load_embeddings(path: &Path, vocab_limit: Option<usize>, seed: u64) -> Result<(Vocabulary, EmbeddingMatrix)> {
    let text = read_to_string(path)?;
    let display = path.display();
    let mut dim: Option<usize> = None;
    let mut words = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if vocab_limit.is_some_and(|limit| words.len() >= limit) {
            break;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-blank line");
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(&display, i + 1, format!("bad number: {e}")))?;
        if values.is_empty() {
            return Err(Error::parse(&display, i + 1, "word has no vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(&display, i + 1, "non-finite vector component"));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::parse(
                    &display,
                    i + 1,
                    format!("expected {d} dimensions, found {}", values.len()),
                ))
            }
            _ => {}
        }
        if !seen.insert(word.to_string()) || word == PAD_TOKEN || word == UNK_TOKEN {
            continue;
        }
        words.push(word.to_string());
        rows.extend(values);
    }
    let dim = dim.ok_or_else(|| Error::Input(format!("{display}: embedding file is empty")))?;
    let vocab = Vocabulary::from_words(words);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; 2 * dim];
    for v in data[dim..].iter_mut() {
        *v = rng.gen_range(-0.05..0.05);
    }
    data.extend(rows);
    let vectors = Tensor::matrix(vocab.len(), dim, data)?;
    Ok((
        vocab,
        EmbeddingMatrix {
            vectors,
            trainable: false,
        },
    ))
}

/// Lowercases and splits on Unicode whitespace.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence.to_lowercase().split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairExample {
    pub premise: Vec<usize>,
    pub hypothesis: Vec<usize>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceExample {
    pub tokens: Vec<usize>,
    pub label: usize,
}

/// Examples read from a corpus plus the counts of skipped records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loaded<T> {
    pub examples: Vec<T>,
    pub skipped_empty: usize,
    pub skipped_long: usize,
}

#[derive(Deserialize)]
struct PairRecord {
    premise: String,
    hypothesis: String,
    label: String,
}

#[derive(Deserialize)]
struct SentenceRecord {
    sentence: String,
    label: String,
}

fn label_index(labels: &[String], label: &str, path: &str, line: usize) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::parse(path, line, format!("unknown label {label:?}; expected one of {labels:?}")))
}

fn json_lines<'a, T: serde::de::DeserializeOwned>(
    text: &'a str,
    path: &'a str,
) -> impl Iterator<Item = Result<(usize, T)>> + 'a {
    text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(move |(i, line)| {
        serde_json::from_str::<T>(line)
            .map(|r| (i + 1, r))
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))
    })
}

/// Reads premise/hypothesis/label records.
pub fn load_pair_corpus(path: &Path, vocab: &Vocabulary, labels: &[String], length_cap: usize) -> Result<Loaded<PairExample>> {
    let text = read_to_string(path)?;
    parse_pair_corpus(&text, &path.display().to_string(), vocab, labels, length_cap)
}

pub fn parse_pair_corpus(
    text: &str,
    source: &str,
    vocab: &Vocabulary,
    labels: &[String],
    length_cap: usize,
) -> Result<Loaded<PairExample>> {
    let mut out = Loaded {
        examples: Vec::new(),
        skipped_empty: 0,
        skipped_long: 0,
    };
    for rec in json_lines::<PairRecord>(text, source) {
        let (line, rec) = rec?;
        let label = label_index(labels, &rec.label, source, line)?;
        let premise = tokenize(&rec.premise);
        let hypothesis = tokenize(&rec.hypothesis);
        if premise.is_empty() || hypothesis.is_empty() {
            out.skipped_empty += 1;
            continue;
        }
        if premise.len() + hypothesis.len() >= length_cap {
            out.skipped_long += 1;
            continue;
        }
        out.examples.push(PairExample {
            premise: vocab.encode(&premise),
            hypothesis: vocab.encode(&hypothesis),
            label,
        });
    }
    Ok(out)
}

/// Reads sentence/label records.
pub fn load_sentence_corpus(
    path: &Path,
    vocab: &Vocabulary,
    labels: &[String],
    length_cap: usize,
) -> Result<Loaded<SentenceExample>> {
    let text = read_to_string(path)?;
    parse_sentence_corpus(&text, &path.display().to_string(), vocab, labels, length_cap)
}

pub fn parse_sentence_corpus(
    text: &str,
    source: &str,
    vocab: &Vocabulary,
    labels: &[String],
    length_cap: usize,
) -> Result<Loaded<SentenceExample>> {
    let mut out = Loaded {
        examples: Vec::new(),
        skipped_empty: 0,
        skipped_long: 0,
    };
    for rec in json_lines::<SentenceRecord>(text, source) {
        let (line, rec) = rec?;
        let label = label_index(labels, &rec.label, source, line)?;
        let tokens = tokenize(&rec.sentence);
        if tokens.is_empty() {
            out.skipped_empty += 1;
            continue;
        }
        if tokens.len() >= length_cap {
            out.skipped_long += 1;
            continue;
        }
        out.examples.push(SentenceExample {
            tokens: vocab.encode(&tokens),
            label,
        });
    }
    Ok(out)
}

/// Trees read from a bracketed corpus plus the number of non-binary nodes
/// that had to be left-binarized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeCorpus {
    pub trees: Vec<BinaryTree>,
    /// 1-based source line of each tree.
    pub lines: Vec<usize>,
    pub binarized: usize,
}

pub fn load_tree_corpus(path: &Path) -> Result<TreeCorpus> {
    let text = read_to_string(path)?;
    parse_tree_corpus(&text, &path.display().to_string())
}

/// Parses one tree per non-blank line.
pub fn parse_tree_corpus(text: &str, source: &str) -> Result<TreeCorpus> {
    let mut out = TreeCorpus {
        trees: Vec::new(),
        lines: Vec::new(),
        binarized: 0,
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (tree, binarized) = BinaryTree::parse_bracketed(line).map_err(|m| Error::parse(source, i + 1, m))?;
        out.trees.push(tree);
        out.lines.push(i + 1);
        out.binarized += binarized;
    }
    Ok(out)
}
