//! Trains a small pair classifier on the generated subset task and reports
//! train and held-out accuracy.
//!
//! 500 generated pairs are split 400/100 into training and validation
//! (early stopping); a second, independently generated set of 500 pairs is
//! the held-out test set.
//!
//!     cargo run --release --example toy_entailment [-- EPOCHS [WORD_DIM [affine|rnn]]]

use std::time::Instant;

use treeattn::model::{Example, Model, ModelConfig, TaskKind};
use treeattn::parser::LeafKind;
use treeattn::synthetic::{subset_task, SubsetTaskConfig};
use treeattn::trainer::{evaluate, train, RunOptions, TrainConfig};

fn main() -> treeattn::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(50, |s| s.parse().expect("epoch count"));
    let word_dim: usize = args.next().map_or(100, |s| s.parse().expect("word dimension"));
    let leaf = match args.next().as_deref() {
        None | Some("affine") => LeafKind::Affine,
        Some("rnn") => LeafKind::Rnn,
        Some(other) => panic!("unknown leaf transform {other:?}"),
    };

    let task = subset_task(&SubsetTaskConfig::default())?;
    let examples: Vec<Example> = task.examples().into_iter().map(Example::from).collect();
    let (train_set, validation) = examples.split_at(400);
    let test_task = subset_task(&SubsetTaskConfig {
        seed: 1007,
        ..Default::default()
    })?;
    let test: Vec<Example> = test_task.examples().into_iter().map(Example::from).collect();
    let embeddings = task.embeddings(word_dim, 7)?;

    let model_config = ModelConfig {
        task: TaskKind::Pair,
        word_dim,
        hidden: 64,
        attn_dim: 128,
        clf_dim: 1024,
        num_classes: 2,
        leaf,
        finetune_embeddings: false,
    };
    let mut config = TrainConfig::new(model_config.clone(), 7);
    config.max_epochs = epochs;
    config.patience = 5;

    let started = Instant::now();
    let model = Model::new(model_config, &embeddings, config.seed)?;
    let mut log = Vec::new();
    let outcome = train(
        model,
        &task.vocab,
        &task.labels,
        train_set,
        validation,
        &config,
        &RunOptions::default(),
        &mut log,
    )?;
    for r in &outcome.epochs {
        println!(
            "epoch {:>2}  loss {:.4}  train (noisy) {:.3}  validation {:.3}",
            r.epoch, r.train_loss, r.train_acc, r.val_acc
        );
    }
    let best = outcome.best.model()?;
    let train_eval = evaluate(&best, train_set, 1)?;
    let test_eval = evaluate(&best, &test, 1)?;
    println!(
        "best epoch {}: train accuracy {:.3}, held-out accuracy {:.3} ({:.1}s)",
        outcome.best.epoch,
        train_eval.accuracy,
        test_eval.accuracy,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
