//! Checks backpropagated gradients of a small pair model against central
//! differences, parameter by parameter.
//!
//!     cargo run --release --example gradient_check

use treeattn::embedding_io::EmbeddingMatrix;
use treeattn::model::{Example, Model, ModelConfig, TaskKind};
use treeattn::parser::{GumbelConfig, LeafKind};

fn main() -> treeattn::Result<()> {
    let config = ModelConfig {
        task: TaskKind::Pair,
        word_dim: 6,
        hidden: 8,
        attn_dim: 6,
        clf_dim: 16,
        num_classes: 3,
        leaf: LeafKind::Rnn,
        finetune_embeddings: true,
    };
    let embeddings = EmbeddingMatrix::random(12, config.word_dim, 1.0, 1)?;
    let model = Model::new(config, &embeddings, 2)?;
    let example = Example {
        sentences: vec![vec![2, 3, 4], vec![5, 6, 7, 8]],
        label: 1,
    };
    for id in model.store.ids() {
        println!("{:<24} {:?}", model.store.name(id), model.store.get(id).shape());
    }
    let report = model.gradient_check(&example, GumbelConfig::default(), 0.9, 3, 1e-6)?;
    println!(
        "{} coordinates checked, max relative error {:.3e}",
        report.coordinates, report.max_relative_error
    );
    if let Some((name, index, analytic, numeric)) = report.worst {
        println!("worst: {name}[{index}] analytic {analytic:.6e} numeric {numeric:.6e}");
    }
    Ok(())
}
