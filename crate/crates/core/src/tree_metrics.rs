//! Unlabeled bracket F1 and depth statistics for induced trees.
//!
//! Spans are half-open word intervals of length at least two. The
//! full-sentence span is included unless [`ScoreOptions::exclude_root`] is
//! set. Sentences of one or two words have a single possible binary tree and
//! score 100 against anything.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{BinaryTree, Span};

pub type SpanSet = BTreeSet<Span>;

/// How per-sentence scores are combined into a corpus score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean of per-sentence F1.
    #[default]
    Macro,
    /// F1 of span counts pooled over the corpus.
    Micro,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub exclude_root: bool,
    pub averaging: Averaging,
}

/// Constituent spans of `tree`, full-sentence span included.
pub fn spans_of(tree: &BinaryTree) -> SpanSet {
    spans_with(tree, false)
}

pub fn spans_with(tree: &BinaryTree, exclude_root: bool) -> SpanSet {
    let n = tree.leaf_count();
    tree.node_spans()
        .into_iter()
        .filter(|&(s, e)| e - s >= 2 && !(exclude_root && (s, e) == (0, n)))
        .collect()
}

/// F1 in `[0, 100]` between two span sets. Two empty sets score 100.
pub fn span_f1(pred: &SpanSet, reference: &SpanSet) -> f64 {
    if pred.is_empty() && reference.is_empty() {
        return 100.0;
    }
    let hits = pred.intersection(reference).count() as f64;
    f1_from_counts(hits, pred.len() as f64, reference.len() as f64)
}

fn f1_from_counts(hits: f64, predicted: f64, gold: f64) -> f64 {
    let p = if predicted > 0.0 { hits / predicted } else { 0.0 };
    let r = if gold > 0.0 { hits / gold } else { 0.0 };
    if p + r == 0.0 {
        0.0
    } else {
        200.0 * p * r / (p + r)
    }
}

/// Unlabeled bracket F1 between two trees over the same sentence.
pub fn unlabeled_f1(pred: &BinaryTree, reference: &BinaryTree, exclude_root: bool) -> Result<f64> {
    check_lengths(pred, reference)?;
    if pred.leaf_count() <= 2 {
        return Ok(100.0);
    }
    Ok(span_f1(&spans_with(pred, exclude_root), &spans_with(reference, exclude_root)))
}

fn check_lengths(pred: &BinaryTree, reference: &BinaryTree) -> Result<()> {
    if pred.leaf_count() != reference.leaf_count() {
        return Err(Error::Misaligned(format!(
            "trees cover {} and {} words",
            pred.leaf_count(),
            reference.leaf_count()
        )));
    }
    Ok(())
}

/// Strictly left- and right-branching trees over `n` words.
pub fn branching_baselines(n: usize) -> Result<(BinaryTree, BinaryTree)> {
    Ok((BinaryTree::left_branching(n)?, BinaryTree::right_branching(n)?))
}

/// Mean root-to-leaf edge count of one tree.
pub fn average_depth(tree: &BinaryTree) -> f64 {
    let depths = tree.leaf_depths();
    depths.iter().sum::<usize>() as f64 / depths.len() as f64
}

/// Per-sentence average depth, averaged over the corpus.
pub fn macro_avg_depth(trees: &[BinaryTree]) -> Result<f64> {
    if trees.is_empty() {
        return Err(Error::Input("average depth of an empty corpus".into()));
    }
    Ok(trees.iter().map(average_depth).sum::<f64>() / trees.len() as f64)
}

/// 0-based indices where the two corpora disagree on sentence length, plus
/// any indices present in only one of them.
pub fn alignment_problems(pred: &[BinaryTree], reference: &[BinaryTree]) -> Vec<usize> {
    let mut bad: Vec<usize> = pred
        .iter()
        .zip(reference)
        .enumerate()
        .filter(|(_, (p, r))| p.leaf_count() != r.leaf_count())
        .map(|(i, _)| i)
        .collect();
    bad.extend(pred.len().min(reference.len())..pred.len().max(reference.len()));
    bad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub length: usize,
    pub f1_left: f64,
    pub f1_right: f64,
    pub f1_reference: Option<f64>,
    pub depth: f64,
}

/// Corpus-level columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScore {
    pub f1_left: f64,
    pub f1_right: f64,
    pub f1_reference: Option<f64>,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeScoreReport {
    pub sentences: Vec<SentenceScore>,
    pub corpus: CorpusScore,
    pub options: ScoreOptions,
}

#[derive(Default)]
struct Counts {
    hits: f64,
    predicted: f64,
    gold: f64,
}

impl Counts {
    fn add(&mut self, pred: &SpanSet, gold: &SpanSet) {
        self.hits += pred.intersection(gold).count() as f64;
        self.predicted += pred.len() as f64;
        self.gold += gold.len() as f64;
    }

    fn f1(&self) -> f64 {
        if self.predicted == 0.0 && self.gold == 0.0 {
            100.0
        } else {
            f1_from_counts(self.hits, self.predicted, self.gold)
        }
    }
}

/// Scores `pred` against both branching baselines and, when given, an
/// aligned reference corpus.
pub fn score_corpus(
    pred: &[BinaryTree],
    reference: Option<&[BinaryTree]>,
    options: ScoreOptions,
) -> Result<TreeScoreReport> {
    if pred.is_empty() {
        return Err(Error::Input("cannot score an empty corpus".into()));
    }
    if let Some(reference) = reference {
        let bad = alignment_problems(pred, reference);
        if !bad.is_empty() {
            let list: Vec<String> = bad.iter().map(|i| (i + 1).to_string()).collect();
            return Err(Error::Misaligned(format!(
                "predicted and reference corpora disagree at sentence(s) {}",
                list.join(", ")
            )));
        }
    }

    let x = options.exclude_root;
    let mut sentences = Vec::with_capacity(pred.len());
    let (mut left_counts, mut right_counts, mut ref_counts) = (Counts::default(), Counts::default(), Counts::default());
    for (i, tree) in pred.iter().enumerate() {
        let n = tree.leaf_count();
        let (left, right) = branching_baselines(n)?;
        let spans = spans_with(tree, x);
        left_counts.add(&spans, &spans_with(&left, x));
        right_counts.add(&spans, &spans_with(&right, x));
        let f1_reference = match reference {
            Some(r) => {
                ref_counts.add(&spans, &spans_with(&r[i], x));
                Some(unlabeled_f1(tree, &r[i], x)?)
            }
            None => None,
        };
        sentences.push(SentenceScore {
            length: n,
            f1_left: unlabeled_f1(tree, &left, x)?,
            f1_right: unlabeled_f1(tree, &right, x)?,
            f1_reference,
            depth: average_depth(tree),
        });
    }

    let count = sentences.len() as f64;
    let mean = |f: &dyn Fn(&SentenceScore) -> f64| sentences.iter().map(f).sum::<f64>() / count;
    let corpus = match options.averaging {
        Averaging::Macro => CorpusScore {
            f1_left: mean(&|s| s.f1_left),
            f1_right: mean(&|s| s.f1_right),
            f1_reference: reference.map(|_| mean(&|s| s.f1_reference.unwrap_or(0.0))),
            depth: mean(&|s| s.depth),
        },
        Averaging::Micro => CorpusScore {
            f1_left: left_counts.f1(),
            f1_right: right_counts.f1(),
            f1_reference: reference.map(|_| ref_counts.f1()),
            depth: mean(&|s| s.depth),
        },
    };
    Ok(TreeScoreReport {
        sentences,
        corpus,
        options,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl TreeScoreReport {
    /// Tab-separated per-sentence scores with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("sentence\tlength\tf1_left\tf1_right\tf1_reference\tdepth\n");
        for (i, s) in self.sentences.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.2}\t{:.2}\t{}\t{:.4}",
                i + 1,
                s.length,
                s.f1_left,
                s.f1_right,
                fmt_opt(s.f1_reference),
                s.depth
            );
        }
        out
    }
}

/// Plain-text table with one row per scored input.
pub fn render_table(rows: &[(String, &CorpusScore)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>8}  {:>9}  {:>6}\n",
        "input", "left", "right", "reference", "depth"
    );
    for (name, c) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.2}  {:>8.2}  {:>9}  {:>6.2}",
            name,
            c.f1_left,
            c.f1_right,
            fmt_opt(c.f1_reference),
            c.depth
        );
    }
    out
}

/// Column-wise maximum over several scored inputs, e.g. checkpoints of
/// repeated training runs. Depth is taken from the input with the best
/// reference F1 (or the first input when there is no reference).
pub fn max_over_inputs(scores: &[&CorpusScore]) -> Option<CorpusScore> {
    let first = scores.first()?;
    let fold = |f: &dyn Fn(&CorpusScore) -> f64| scores.iter().map(|c| f(c)).fold(f64::NEG_INFINITY, f64::max);
    let best_ref = scores
        .iter()
        .max_by(|a, b| {
            a.f1_reference
                .unwrap_or(0.0)
                .partial_cmp(&b.f1_reference.unwrap_or(0.0))
                .expect("finite scores")
        })
        .unwrap_or(first);
    Some(CorpusScore {
        f1_left: fold(&|c| c.f1_left),
        f1_right: fold(&|c| c.f1_right),
        f1_reference: first.f1_reference.map(|_| fold(&|c| c.f1_reference.unwrap_or(0.0))),
        depth: best_ref.depth,
    })
}
