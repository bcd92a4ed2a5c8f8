//! The `treeattn` command-line tool.
//!
//! Every command writes a JSON run manifest holding its fully resolved
//! arguments, the SHA-256 of each input file, the seed and timestamps.
//! `treeattn replay --manifest FILE` re-runs a recorded command after
//! checking that its inputs are unchanged.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numeric failure.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::cosine_similarity;
use crate::embedding_io::{
    load_embeddings, load_pair_corpus, load_sentence_corpus, load_tree_corpus, tokenize, EmbeddingMatrix, Loaded,
    Vocabulary, DEFAULT_LENGTH_CAP,
};
use crate::error::{Error, Result};
use crate::model::{Example, Model, ModelConfig, TaskKind};
use crate::parser::{GumbelConfig, LeafKind};
use crate::trainer::{
    evaluate, train, AdamConfig, Checkpoint, RunOptions, TrainConfig, PUBLISHED_LEARNING_RATE,
};
use crate::tree::BinaryTree;
use crate::tree_metrics::{max_over_inputs, render_table, score_corpus, Averaging, ScoreOptions};

#[derive(Parser, Debug)]
#[command(name = "treeattn", version, about = "Latent-tree sentence encoder with structural attention")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name", content = "args")]
pub enum Command {
    /// Train a classifier and write the best checkpoint, metrics log and manifest.
    Train(TrainArgs),
    /// Report accuracy and macro-F1 of a checkpoint on a labeled corpus.
    Eval(EvalArgs),
    /// Print the induced tree of each sentence, optionally with attention weights.
    Parse(ParseArgs),
    /// Score bracketed trees against branching baselines and reference trees.
    Treescore(TreescoreArgs),
    /// Cosine similarity of sentence vectors for tab-separated pairs.
    Similarity(SimilarityArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Task kind.
    #[arg(long, value_enum)]
    pub task: TaskKind,
    /// Training corpus (line-delimited JSON).
    #[arg(long)]
    pub train: PathBuf,
    /// Validation corpus (line-delimited JSON).
    #[arg(long)]
    pub valid: PathBuf,
    /// Word-vector file, one `word v1 ... vD` record per line.
    #[arg(long, required_unless_present = "word_dim", conflicts_with = "word_dim")]
    pub embeddings: Option<PathBuf>,
    /// Use seeded random word vectors of this size over the training vocabulary.
    #[arg(long)]
    pub word_dim: Option<usize>,
    /// Read at most this many word vectors.
    #[arg(long)]
    pub vocab_limit: Option<usize>,
    /// Comma-separated label names; the order fixes class indices.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    /// Tree-LSTM hidden size.
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    /// Attention projection size [default: 128 for dim <= 100, else 300].
    #[arg(long)]
    pub attn_dim: Option<usize>,
    /// Classifier hidden size.
    #[arg(long, default_value_t = 1024)]
    pub clf_dim: usize,
    /// Leaf transform.
    #[arg(long, value_enum, default_value_t = LeafKind::Rnn)]
    pub leaf: LeafKind,
    /// Update word vectors during training.
    #[arg(long)]
    pub finetune_embeddings: bool,
    /// Batch size [default: 32 for pair, 64 for sentence].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Dropout rate [default: 0.13 for pair, 0.5 for sentence].
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Adam learning rate [default: 0.001].
    #[arg(long, conflicts_with = "published_lr")]
    pub lr: Option<f64>,
    /// Use the originally published learning rate 0.5 (diverges on small runs).
    #[arg(long)]
    pub published_lr: bool,
    /// Adam first-moment decay.
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    /// Adam second-moment decay.
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    /// Adam denominator constant.
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Maximum number of epochs.
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    /// Master seed [default: drawn from entropy and recorded].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gumbel-softmax temperature.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Add Gumbel noise to validity probabilities instead of their logarithms.
    #[arg(long)]
    pub perturb_probs: bool,
    /// Draw one Gumbel noise vector per sentence instead of per layer.
    #[arg(long)]
    pub noise_per_sentence: bool,
    /// Global gradient-norm ceiling.
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    /// Worker threads for per-example passes.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Record wall-clock seconds per epoch (makes logs run-dependent).
    #[arg(long)]
    pub log_timing: bool,
    /// Skip records with at least this many tokens.
    #[arg(long, default_value_t = DEFAULT_LENGTH_CAP)]
    pub length_cap: usize,
    /// Output directory for model.ckpt, metrics.jsonl and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled corpus in the checkpoint's task format.
    #[arg(long)]
    pub data: PathBuf,
    /// Per-example predictions as line-delimited JSON.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Report destination [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Manifest destination [default: OUTPUT.manifest.json or ./treeattn-eval.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = DEFAULT_LENGTH_CAP)]
    pub length_cap: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// One sentence per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Bracketed trees [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-node spans and attention weights as line-delimited JSON.
    #[arg(long)]
    pub attention: Option<PathBuf>,
    /// Manifest destination [default: OUTPUT.manifest.json or ./treeattn-parse.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreescoreArgs {
    /// Predicted trees, one bracketed tree per line. Several files add one
    /// report row each plus a column-wise maximum.
    #[arg(long, required = true, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Reference trees aligned line by line with each predicted file.
    #[arg(long, required_unless_present = "baselines_only", conflicts_with = "baselines_only")]
    pub reference: Option<PathBuf>,
    /// Score against the branching baselines only.
    #[arg(long)]
    pub baselines_only: bool,
    /// Leave the full-sentence span out of span sets.
    #[arg(long)]
    pub exclude_root: bool,
    /// Corpus averaging of F1.
    #[arg(long, value_enum, default_value_t = Averaging::Macro)]
    pub averaging: Averaging,
    /// Per-sentence scores of the first predicted file as TSV.
    #[arg(long)]
    pub per_sentence: Option<PathBuf>,
    /// Report destination [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Manifest destination [default: OUTPUT.manifest.json or ./treeattn-treescore.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Tab-separated sentence pairs, one per line.
    #[arg(long)]
    pub input: PathBuf,
    /// One score per line [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Manifest destination [default: OUTPUT.manifest.json or ./treeattn-similarity.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// The command with every default and the seed filled in.
    pub command: Command,
    /// Resolved configuration, command-specific.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub started: String,
    pub finished: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digests(paths: &[&Path]) -> Result<Vec<InputDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.to_path_buf(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write_file(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e)),
    }
}

fn manifest_path(explicit: Option<&Path>, output: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match output {
        Some(o) => {
            let mut s = o.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("treeattn-{command}.manifest.json")),
    }
}

struct Recorder {
    started: String,
}

impl Recorder {
    fn start() -> Self {
        Recorder {
            started: now(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        self,
        command: Command,
        config: serde_json::Value,
        seed: Option<u64>,
        inputs: Vec<InputDigest>,
        mut outputs: Vec<PathBuf>,
        path: &Path,
    ) -> Result<()> {
        outputs.push(path.to_path_buf());
        let manifest = RunManifest {
            tool: "treeattn".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            config,
            seed,
            inputs,
            outputs,
            started: self.started,
            finished: now(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("serializable");
        write_file(path, format!("{text}\n").as_bytes())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn default_labels(task: TaskKind) -> Vec<String> {
    let names: &[&str] = match task {
        TaskKind::Pair => &["entailment", "contradiction", "neutral"],
        TaskKind::Sentence => &["negative", "positive"],
    };
    names.iter().map(|s| s.to_string()).collect()
}

/// Words of a JSON-lines corpus in first-occurrence order.
fn corpus_words(path: &Path, task: TaskKind) -> Result<Vec<String>> {
    let text = read_text(path)?;
    let fields: &[&str] = match task {
        TaskKind::Pair => &["premise", "hypothesis"],
        TaskKind::Sentence => &["sentence"],
    };
    let mut seen = HashSet::new();
    let mut words = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::parse(path.display().to_string(), i + 1, e.to_string()))?;
        for f in fields {
            if let Some(s) = value.get(*f).and_then(|v| v.as_str()) {
                for w in tokenize(s) {
                    if seen.insert(w.clone()) {
                        words.push(w);
                    }
                }
            }
        }
    }
    Ok(words)
}

/// Reads a labeled corpus in the format of `task`.
pub fn load_examples(
    path: &Path,
    task: TaskKind,
    vocab: &Vocabulary,
    labels: &[String],
    length_cap: usize,
) -> Result<Loaded<Example>> {
    Ok(match task {
        TaskKind::Pair => into_examples(load_pair_corpus(path, vocab, labels, length_cap)?),
        TaskKind::Sentence => into_examples(load_sentence_corpus(path, vocab, labels, length_cap)?),
    })
}

fn into_examples<T: Into<Example>>(loaded: Loaded<T>) -> Loaded<Example> {
    Loaded {
        examples: loaded.examples.into_iter().map(Into::into).collect(),
        skipped_empty: loaded.skipped_empty,
        skipped_long: loaded.skipped_long,
    }
}

fn report_skips(path: &Path, loaded: &Loaded<Example>) {
    if loaded.skipped_empty + loaded.skipped_long > 0 {
        eprintln!(
            "{}: skipped {} empty and {} over-long records",
            path.display(),
            loaded.skipped_empty,
            loaded.skipped_long
        );
    }
}

/// Training configuration implied by `args`, with the seed resolved.
pub fn resolve_train_config(args: &TrainArgs, word_dim: usize, num_classes: usize, seed: u64) -> TrainConfig {
    let model = ModelConfig {
        task: args.task,
        word_dim,
        hidden: args.dim,
        attn_dim: args.attn_dim.unwrap_or(if args.dim <= 100 { 128 } else { 300 }),
        clf_dim: args.clf_dim,
        num_classes,
        leaf: args.leaf,
        finetune_embeddings: args.finetune_embeddings,
    };
    let mut config = TrainConfig::new(model, seed);
    if let Some(b) = args.batch {
        config.batch_size = b;
    }
    if let Some(d) = args.dropout {
        config.dropout = d;
    }
    config.adam = AdamConfig {
        learning_rate: if args.published_lr {
            PUBLISHED_LEARNING_RATE
        } else {
            args.lr.unwrap_or(AdamConfig::default().learning_rate)
        },
        beta1: args.beta1,
        beta2: args.beta2,
        epsilon: args.epsilon,
    };
    config.max_epochs = args.epochs;
    config.patience = args.patience;
    config.gumbel = GumbelConfig {
        temperature: args.temperature,
        perturb_probs: args.perturb_probs,
        noise_per_sentence: args.noise_per_sentence,
        ..GumbelConfig::default()
    };
    config.clip_norm = args.clip_norm;
    config
}

fn cmd_train(mut args: TrainArgs) -> Result<()> {
    let recorder = Recorder::start();
    let seed = *args.seed.get_or_insert_with(rand::random::<u64>);
    let labels = args.labels.clone().unwrap_or_else(|| default_labels(args.task));
    if labels.len() < 2 || labels.iter().collect::<HashSet<_>>().len() != labels.len() {
        return Err(Error::Config(format!("need at least two distinct labels, got {labels:?}")));
    }
    let (vocab, embeddings) = match (&args.embeddings, args.word_dim) {
        (Some(path), _) => load_embeddings(path, args.vocab_limit, seed)?,
        (None, Some(dim)) => {
            if dim == 0 {
                return Err(Error::Config("word_dim must be positive".into()));
            }
            let vocab = Vocabulary::from_words(corpus_words(&args.train, args.task)?);
            let emb = EmbeddingMatrix::random(vocab.len(), dim, 1.0, seed)?;
            (vocab, emb)
        }
        (None, None) => return Err(Error::Config("either --embeddings or --word-dim is required".into())),
    };
    let config = resolve_train_config(&args, embeddings.dim(), labels.len(), seed);
    config.validate()?;
    let options = RunOptions {
        threads: args.threads.max(1),
        log_timing: args.log_timing,
    };
    let train_set = load_examples(&args.train, args.task, &vocab, &labels, args.length_cap)?;
    report_skips(&args.train, &train_set);
    let valid = load_examples(&args.valid, args.task, &vocab, &labels, args.length_cap)?;
    report_skips(&args.valid, &valid);

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let ckpt_path = args.out.join("model.ckpt");
    let log_path = args.out.join("metrics.jsonl");
    let mut log = Vec::new();
    let model = Model::new(config.model.clone(), &embeddings, seed)?;
    let result = train(
        model,
        &vocab,
        &labels,
        &train_set.examples,
        &valid.examples,
        &config,
        &options,
        &mut log,
    );
    write_file(&log_path, &log)?;
    let outcome = result?;
    outcome.best.save(&ckpt_path)?;
    if let Some(last) = outcome.epochs.last() {
        eprintln!(
            "epoch {}: train loss {:.4}, validation accuracy {:.4}; best {:.4} at epoch {}",
            last.epoch, last.train_loss, last.val_acc, outcome.best.best_metric, outcome.best.epoch
        );
    }

    let mut inputs: Vec<&Path> = vec![&args.train, &args.valid];
    if let Some(e) = &args.embeddings {
        inputs.push(e);
    }
    let inputs = digests(&inputs)?;
    let resolved = serde_json::json!({ "train": config, "run": options, "labels": labels });
    let manifest = args.out.join("manifest.json");
    recorder.finish(
        Command::Train(args),
        resolved,
        Some(seed),
        inputs,
        vec![ckpt_path, log_path],
        &manifest,
    )
}

#[derive(Serialize)]
struct PredictionRecord<'a> {
    id: usize,
    gold: &'a str,
    pred: &'a str,
    probs: &'a [f64],
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let recorder = Recorder::start();
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let model = ckpt.model()?;
    let vocab = ckpt.vocabulary();
    let data = load_examples(&args.data, model.config.task, &vocab, &ckpt.labels, args.length_cap)?;
    report_skips(&args.data, &data);
    let eval = evaluate(&model, &data.examples, args.threads.max(1))?;
    let report = format!(
        "examples {}\naccuracy {:.4}\nmacro_f1 {:.4}\n",
        data.examples.len(),
        eval.accuracy,
        eval.macro_f1
    );
    emit(args.output.as_deref(), &report)?;
    let mut outputs: Vec<PathBuf> = args.output.iter().cloned().collect();
    if let Some(p) = &args.predictions {
        let mut text = String::new();
        for (i, (ex, pred)) in data.examples.iter().zip(&eval.predictions).enumerate() {
            let rec = PredictionRecord {
                id: i,
                gold: &ckpt.labels[ex.label],
                pred: &ckpt.labels[pred.label],
                probs: &pred.probs,
            };
            let _ = writeln!(text, "{}", serde_json::to_string(&rec).expect("serializable"));
        }
        write_file(p, text.as_bytes())?;
        outputs.push(p.clone());
    }
    let inputs = digests(&[&args.checkpoint, &args.data])?;
    let path = manifest_path(args.manifest.as_deref(), args.output.as_deref(), "eval");
    let config = serde_json::json!({ "model": model.config, "labels": ckpt.labels });
    recorder.finish(Command::Eval(args), config, None, inputs, outputs, &path)
}

#[derive(Serialize)]
struct NodeRecord {
    span: (usize, usize),
    weight: f64,
}

#[derive(Serialize)]
struct AttentionRecord {
    line: usize,
    tree: String,
    nodes: Vec<NodeRecord>,
}

fn sentences_of(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let words: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if words.is_empty() {
                Err(Error::Input(format!("{}:{}: empty sentence", path.display(), i + 1)))
            } else {
                Ok((i + 1, words))
            }
        })
        .collect()
}

fn encode_words(vocab: &Vocabulary, words: &[String]) -> Vec<usize> {
    words.iter().map(|w| vocab.lookup(&w.to_lowercase())).collect()
}

fn cmd_parse(args: ParseArgs) -> Result<()> {
    let recorder = Recorder::start();
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let model = ckpt.model()?;
    let vocab = ckpt.vocabulary();
    let mut trees = String::new();
    let mut attention = String::new();
    for (line, words) in sentences_of(&args.input)? {
        let parsed = model.parse(&encode_words(&vocab, &words))?;
        let tree: BinaryTree = parsed.tree.clone().with_tokens(words)?;
        let bracketed = tree.to_bracketed();
        trees.push_str(&bracketed);
        trees.push('\n');
        let nodes = tree
            .node_spans()
            .into_iter()
            .zip(&parsed.weights)
            .map(|(span, &weight)| NodeRecord { span, weight })
            .collect();
        let rec = AttentionRecord {
            line,
            tree: bracketed,
            nodes,
        };
        let _ = writeln!(attention, "{}", serde_json::to_string(&rec).expect("serializable"));
    }
    emit(args.output.as_deref(), &trees)?;
    let mut outputs: Vec<PathBuf> = args.output.iter().cloned().collect();
    if let Some(p) = &args.attention {
        write_file(p, attention.as_bytes())?;
        outputs.push(p.clone());
    }
    let inputs = digests(&[&args.checkpoint, &args.input])?;
    let path = manifest_path(args.manifest.as_deref(), args.output.as_deref(), "parse");
    let config = serde_json::json!({ "model": model.config });
    recorder.finish(Command::Parse(args), config, None, inputs, outputs, &path)
}

fn cmd_treescore(args: TreescoreArgs) -> Result<()> {
    let recorder = Recorder::start();
    let options = ScoreOptions {
        exclude_root: args.exclude_root,
        averaging: args.averaging,
    };
    let reference = args.reference.as_deref().map(load_tree_corpus).transpose()?;
    let mut reports = Vec::new();
    for path in &args.pred {
        let pred = load_tree_corpus(path)?;
        if let Some(r) = &reference {
            let bad = crate::tree_metrics::alignment_problems(&pred.trees, &r.trees);
            if !bad.is_empty() {
                let describe = |i: usize| {
                    let p = pred.lines.get(i).map_or("-".to_string(), |l| l.to_string());
                    let q = r.lines.get(i).map_or("-".to_string(), |l| l.to_string());
                    format!("{p}/{q}")
                };
                let list: Vec<String> = bad.iter().map(|&i| describe(i)).collect();
                return Err(Error::Misaligned(format!(
                    "{} and {} are misaligned at predicted/reference line(s) {}",
                    path.display(),
                    args.reference.as_ref().expect("reference given").display(),
                    list.join(", ")
                )));
            }
        }
        let report = score_corpus(&pred.trees, reference.as_ref().map(|r| r.trees.as_slice()), options)?;
        reports.push((path.display().to_string(), report));
    }
    let mut rows: Vec<(String, &crate::tree_metrics::CorpusScore)> =
        reports.iter().map(|(n, r)| (n.clone(), &r.corpus)).collect();
    let max = if reports.len() > 1 {
        max_over_inputs(&rows.iter().map(|(_, c)| *c).collect::<Vec<_>>())
    } else {
        None
    };
    if let Some(m) = &max {
        rows.push(("max".into(), m));
    }
    emit(args.output.as_deref(), &render_table(&rows))?;
    let mut outputs: Vec<PathBuf> = args.output.iter().cloned().collect();
    if let Some(p) = &args.per_sentence {
        write_file(p, reports[0].1.to_tsv().as_bytes())?;
        outputs.push(p.clone());
    }
    let mut input_paths: Vec<&Path> = args.pred.iter().map(PathBuf::as_path).collect();
    if let Some(r) = &args.reference {
        input_paths.push(r);
    }
    let inputs = digests(&input_paths)?;
    let path = manifest_path(args.manifest.as_deref(), args.output.as_deref(), "treescore");
    let config = serde_json::to_value(options).expect("serializable");
    recorder.finish(Command::Treescore(args), config, None, inputs, outputs, &path)
}

fn cmd_similarity(args: SimilarityArgs) -> Result<()> {
    let recorder = Recorder::start();
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let model = ckpt.model()?;
    let vocab = ckpt.vocabulary();
    let text = read_text(&args.input)?;
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let (a, b) = line.split_once('\t').ok_or_else(|| {
            Error::Input(format!("{}:{}: expected two tab-separated sentences", args.input.display(), i + 1))
        })?;
        let encode = |s: &str| -> Result<Vec<f64>> {
            let words: Vec<String> = s.split_whitespace().map(str::to_string).collect();
            if words.is_empty() {
                return Err(Error::Input(format!("{}:{}: empty sentence", args.input.display(), i + 1)));
            }
            Ok(model.parse(&encode_words(&vocab, &words))?.sentence_vector)
        };
        let score = cosine_similarity(&encode(a)?, &encode(b)?)?;
        let _ = writeln!(out, "{score:.4}");
    }
    emit(args.output.as_deref(), &out)?;
    let outputs: Vec<PathBuf> = args.output.iter().cloned().collect();
    let inputs = digests(&[&args.checkpoint, &args.input])?;
    let path = manifest_path(args.manifest.as_deref(), args.output.as_deref(), "similarity");
    let config = serde_json::json!({ "model": model.config });
    recorder.finish(Command::Similarity(args), config, None, inputs, outputs, &path)
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let text = read_text(&args.manifest)?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", args.manifest.display())))?;
    for input in &manifest.inputs {
        let now = sha256_file(&input.path)?;
        if now != input.sha256 {
            return Err(Error::Input(format!(
                "{} changed since the recorded run (sha256 {} != {})",
                input.path.display(),
                now,
                input.sha256
            )));
        }
    }
    if matches!(manifest.command, Command::Replay(_)) {
        return Err(Error::Input("a manifest cannot record a replay".into()));
    }
    run(manifest.command)
}

/// Runs one parsed command.
pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Parse(a) => cmd_parse(a),
        Command::Treescore(a) => cmd_treescore(a),
        Command::Similarity(a) => cmd_similarity(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(main_with_args(["treeattn", "treescore", "--bogus"]), 2);
        assert_eq!(main_with_args(["treeattn"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(main_with_args(["treeattn", "--help"]), 0);
    }

    #[test]
    fn attention_dim_defaults_follow_hidden_size() {
        let cli = Cli::try_parse_from([
            "treeattn", "train", "--task", "pair", "--train", "t", "--valid", "v", "--word-dim", "8", "--out", "o",
        ])
        .unwrap();
        let Command::Train(args) = cli.command else { panic!() };
        let c = resolve_train_config(&args, 8, 3, 1);
        assert_eq!(c.model.attn_dim, 128);
        assert_eq!((c.batch_size, c.dropout), (32, 0.13));
        assert_eq!(c.adam.learning_rate, 1e-3);
        let mut big = args.clone();
        big.dim = 300;
        big.published_lr = true;
        let c = resolve_train_config(&big, 8, 3, 1);
        assert_eq!(c.model.attn_dim, 300);
        assert_eq!(c.adam.learning_rate, 0.5);
    }

    #[test]
    fn manifest_command_round_trips() {
        let cmd = Command::Treescore(TreescoreArgs {
            pred: vec!["a".into()],
            reference: None,
            baselines_only: true,
            exclude_root: false,
            averaging: Averaging::Micro,
            per_sentence: None,
            output: Some("x".into()),
            manifest: None,
        });
        let json = serde_json::to_string(&cmd).unwrap();
        assert_eq!(serde_json::from_str::<Command>(&json).unwrap(), cmd);
        assert_eq!(manifest_path(None, Some(Path::new("x")), "t"), PathBuf::from("x.manifest.json"));
    }
}
