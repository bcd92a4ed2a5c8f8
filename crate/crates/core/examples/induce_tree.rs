//! Parses a sentence with an untrained model and prints the induced tree
//! next to the attention weight of every node.
//!
//!     cargo run --release --example induce_tree [-- WORDS...]

use treeattn::embedding_io::{EmbeddingMatrix, Vocabulary};
use treeattn::model::{Model, ModelConfig, TaskKind};
use treeattn::parser::LeafKind;

fn main() -> treeattn::Result<()> {
    let mut words: Vec<String> = std::env::args().skip(1).collect();
    if words.is_empty() {
        words = "the cat sat on the mat".split(' ').map(String::from).collect();
    }
    let vocab = Vocabulary::from_words(words.iter().cloned());
    let config = ModelConfig {
        task: TaskKind::Sentence,
        word_dim: 16,
        hidden: 16,
        attn_dim: 8,
        clf_dim: 16,
        num_classes: 2,
        leaf: LeafKind::Rnn,
        finetune_embeddings: false,
    };
    let embeddings = EmbeddingMatrix::random(vocab.len(), config.word_dim, 1.0, 11)?;
    let model = Model::new(config, &embeddings, 12)?;

    let parsed = model.parse(&vocab.encode(&words))?;
    let tree = parsed.tree.with_tokens(words.clone())?;
    println!("{}", tree.to_bracketed());
    for (span, weight) in tree.node_spans().into_iter().zip(&parsed.weights) {
        println!("{:>6.4}  {}", weight, words[span.0..span.1].join(" "));
    }
    Ok(())
}
