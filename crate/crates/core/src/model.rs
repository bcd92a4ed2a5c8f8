//! The assembled encoder and classifier.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{attend, AttentionOutput, AttentionParams};
use crate::classifier::{classify, featurize_pair, DropoutMasks, MlpParams};
use crate::embedding_io::{EmbeddingMatrix, PairExample, SentenceExample};
use crate::error::{Error, Result};
use crate::parser::{
    find, induce_tree, leaf_transform, CompositionParams, GumbelConfig, LeafKind, LeafParams, NodeState, QueryVector,
    SelectionTrace, Selector,
};
use crate::tensor::{check_store_gradients, Binder, GradientCheck, ParamId, ParamStore, Tape, Var};
use crate::tree::BinaryTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Sentence-pair classification (entailment, paraphrase).
    Pair,
    /// Single-sentence classification (sentiment).
    Sentence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: TaskKind,
    pub word_dim: usize,
    pub hidden: usize,
    pub attn_dim: usize,
    pub clf_dim: usize,
    pub num_classes: usize,
    pub leaf: LeafKind,
    pub finetune_embeddings: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("word_dim", self.word_dim),
            ("hidden", self.hidden),
            ("attn_dim", self.attn_dim),
            ("clf_dim", self.clf_dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        Ok(())
    }

    /// Width of the classifier input.
    pub fn feature_dim(&self) -> usize {
        match self.task {
            TaskKind::Pair => 4 * self.hidden,
            TaskKind::Sentence => self.hidden,
        }
    }
}

/// One labeled input: one sentence or a premise/hypothesis pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub sentences: Vec<Vec<usize>>,
    pub label: usize,
}

impl From<PairExample> for Example {
    fn from(p: PairExample) -> Self {
        Example {
            sentences: vec![p.premise, p.hypothesis],
            label: p.label,
        }
    }
}

impl From<SentenceExample> for Example {
    fn from(s: SentenceExample) -> Self {
        Example {
            sentences: vec![s.tokens],
            label: s.label,
        }
    }
}

/// An encoded sentence: its tree, every node state, and the pooled vector.
#[derive(Debug, Clone)]
pub struct EncodedSentence {
    pub tree: BinaryTree,
    pub nodes: Vec<NodeState>,
    pub attention: AttentionOutput,
}

/// Inference-mode class distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
}

/// Inference-mode parse of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSentence {
    pub tree: BinaryTree,
    /// Attention weight of each node, in creation order.
    pub weights: Vec<f64>,
    pub sentence_vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    embedding: ParamId,
    leaf: LeafParams,
    compose: CompositionParams,
    query: QueryVector,
    attention: AttentionParams,
    mlp: MlpParams,
}

impl Model {
    /// Fresh parameters drawn from `seed`; the embedding table is copied in.
    pub fn new(config: ModelConfig, embeddings: &EmbeddingMatrix, seed: u64) -> Result<Self> {
        config.validate()?;
        if embeddings.dim() != config.word_dim {
            return Err(Error::Config(format!(
                "embeddings have {} dimensions, config says {}",
                embeddings.dim(),
                config.word_dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let embedding = store.add_with("embedding", embeddings.vectors.clone(), config.finetune_embeddings);
        let leaf = LeafParams::new(&mut store, &mut rng, config.leaf, config.word_dim, config.hidden);
        let compose = CompositionParams::new(&mut store, &mut rng, config.hidden);
        let query = QueryVector::new(&mut store, &mut rng, config.hidden);
        let attention = AttentionParams::new(&mut store, &mut rng, config.hidden, config.attn_dim);
        let mlp = MlpParams::new(
            &mut store,
            &mut rng,
            config.feature_dim(),
            config.clf_dim,
            config.num_classes,
        );
        Ok(Model {
            config,
            store,
            embedding,
            leaf,
            compose,
            query,
            attention,
            mlp,
        })
    }

    /// Rebuilds a model around existing parameters, checking every shape.
    pub fn from_store(config: ModelConfig, mut store: ParamStore) -> Result<Self> {
        config.validate()?;
        let embedding = find(&store, "embedding")?;
        store.set_trainable(embedding, config.finetune_embeddings);
        let model = Model {
            leaf: LeafParams::lookup(&store, config.leaf)?,
            compose: CompositionParams::lookup(&store)?,
            query: QueryVector::lookup(&store)?,
            attention: AttentionParams::lookup(&store)?,
            mlp: MlpParams::lookup(&store)?,
            embedding,
            config,
            store,
        };
        // a fresh model of the same config defines the expected shapes
        let vocab = model.store.get(embedding).shape()[0];
        let reference = Model::new(
            model.config.clone(),
            &EmbeddingMatrix {
                vectors: crate::tensor::Tensor::zeros(vec![vocab, model.config.word_dim])?,
                trainable: false,
            },
            0,
        )?;
        if reference.store.len() != model.store.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                reference.store.len(),
                model.store.len()
            )));
        }
        for id in reference.store.ids() {
            let name = reference.store.name(id);
            let found = find(&model.store, name)?;
            if reference.store.get(id).shape() != model.store.get(found).shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    model.store.get(found).shape(),
                    reference.store.get(id).shape()
                )));
            }
        }
        Ok(model)
    }

    pub fn embedding_id(&self) -> ParamId {
        self.embedding
    }

    pub fn vocab_size(&self) -> usize {
        self.store.get(self.embedding).shape()[0]
    }

    /// Parses one sentence and pools its nodes.
    pub fn encode(
        &self,
        tape: &mut Tape,
        binder: &mut Binder<'_>,
        tokens: &[usize],
        selector: &mut Selector<'_>,
    ) -> Result<EncodedSentence> {
        if tokens.is_empty() {
            return Err(Error::Input("cannot encode an empty sentence".into()));
        }
        let words = tokens
            .iter()
            .map(|&t| binder.row(tape, self.embedding, t))
            .collect::<Result<Vec<_>>>()?;
        let leaves = leaf_transform(tape, binder, &words, &self.leaf, self.config.hidden)?;
        let induced = induce_tree(tape, binder, &leaves, &self.compose, &self.query, selector)?;
        let hs: Vec<Var> = induced.nodes.iter().map(|s| s.h).collect();
        let attention = attend(tape, binder, &hs, &self.attention)?;
        Ok(EncodedSentence {
            tree: induced.tree,
            nodes: induced.nodes,
            attention,
        })
    }

    fn check_arity(&self, example: &Example) -> Result<()> {
        let expected = match self.config.task {
            TaskKind::Pair => 2,
            TaskKind::Sentence => 1,
        };
        if example.sentences.len() != expected {
            return Err(Error::Input(format!(
                "{:?} task expects {expected} sentence(s), got {}",
                self.config.task,
                example.sentences.len()
            )));
        }
        Ok(())
    }

    /// Class logits for `example`. Dropout masks are used only if given.
    pub fn logits(
        &self,
        tape: &mut Tape,
        binder: &mut Binder<'_>,
        example: &Example,
        selector: &mut Selector<'_>,
        dropout: Option<&DropoutMasks>,
    ) -> Result<(Var, Vec<EncodedSentence>)> {
        self.check_arity(example)?;
        let encoded = example
            .sentences
            .iter()
            .map(|s| self.encode(tape, binder, s, selector))
            .collect::<Result<Vec<_>>>()?;
        let feature = match self.config.task {
            TaskKind::Pair => featurize_pair(tape, encoded[0].attention.sentence, encoded[1].attention.sentence)?,
            TaskKind::Sentence => encoded[0].attention.sentence,
        };
        let logits = classify(tape, binder, feature, &self.mlp, dropout)?;
        Ok((logits, encoded))
    }

    pub fn loss(
        &self,
        tape: &mut Tape,
        binder: &mut Binder<'_>,
        example: &Example,
        selector: &mut Selector<'_>,
        dropout: Option<&DropoutMasks>,
    ) -> Result<Var> {
        if example.label >= self.config.num_classes {
            return Err(Error::Input(format!(
                "label {} out of range for {} classes",
                example.label, self.config.num_classes
            )));
        }
        let (logits, _) = self.logits(tape, binder, example, selector, dropout)?;
        tape.cross_entropy(logits, example.label)
    }

    pub fn sample_dropout(&self, rng: &mut impl rand::Rng, keep_prob: f64) -> DropoutMasks {
        DropoutMasks::sample(rng, self.config.feature_dim(), self.config.clf_dim, keep_prob)
    }

    /// Noise-free prediction.
    pub fn predict(&self, example: &Example) -> Result<Prediction> {
        let mut tape = Tape::new();
        let mut binder = Binder::new(&self.store);
        let (logits, _) = self.logits(&mut tape, &mut binder, example, &mut Selector::inference(), None)?;
        let probs = tape.softmax(logits)?;
        let probs = tape.value(probs).to_vec();
        let mut label = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[label] {
                label = i;
            }
        }
        Ok(Prediction { label, probs })
    }

    /// Noise-free tree, attention weights and sentence vector.
    pub fn parse(&self, tokens: &[usize]) -> Result<ParsedSentence> {
        let mut tape = Tape::new();
        let mut binder = Binder::new(&self.store);
        let enc = self.encode(&mut tape, &mut binder, tokens, &mut Selector::inference())?;
        Ok(ParsedSentence {
            tree: enc.tree,
            weights: tape.value(enc.attention.weights).to_vec(),
            sentence_vector: tape.value(enc.attention.sentence).to_vec(),
        })
    }

    /// Compares backpropagated gradients of the training loss against
    /// central differences, over every trainable parameter.
    ///
    /// One train-mode pass with `seed` fixes the Gumbel noise, the merge
    /// decisions and the dropout masks; the check then differentiates the
    /// straight-through surrogate around that point.
    pub fn gradient_check(
        &self,
        example: &Example,
        gumbel: GumbelConfig,
        keep_prob: f64,
        seed: u64,
        step: f64,
    ) -> Result<GradientCheck> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trace: SelectionTrace = {
            let mut tape = Tape::new();
            let mut binder = Binder::new(&self.store);
            let mut selector = Selector::sampling(gumbel, &mut rng);
            self.loss(&mut tape, &mut binder, example, &mut selector, None)?;
            selector.into_trace()
        };
        let masks = self.sample_dropout(&mut rng, keep_prob);
        check_store_gradients(
            &self.store,
            |tape, binder| {
                let mut selector = Selector::replay(gumbel, &trace);
                self.loss(tape, binder, example, &mut selector, Some(&masks))
            },
            step,
        )
    }
}
