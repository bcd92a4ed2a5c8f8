//! Writes the generated subset task as files the command-line tool reads:
//! `train.jsonl`, `valid.jsonl` and `embeddings.txt`.
//!
//!     cargo run --release --example make_toy_corpus -- OUT_DIR [WORD_DIM]
//!     treeattn train --task pair --train OUT_DIR/train.jsonl \
//!         --valid OUT_DIR/valid.jsonl --embeddings OUT_DIR/embeddings.txt \
//!         --labels not_subset,subset --out run

use std::path::PathBuf;

use treeattn::synthetic::{embeddings_to_text, subset_task, SubsetTaskConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().ok_or("usage: make_toy_corpus OUT_DIR [WORD_DIM]")?);
    let word_dim: usize = args.next().map_or(Ok(100), |s| s.parse())?;
    std::fs::create_dir_all(&out)?;

    let task = subset_task(&SubsetTaskConfig::default())?;
    let (train, valid) = task.pairs.split_at(400);
    std::fs::write(out.join("train.jsonl"), task.to_jsonl(train))?;
    std::fs::write(out.join("valid.jsonl"), task.to_jsonl(valid))?;
    let embeddings = task.embeddings(word_dim, 7)?;
    std::fs::write(out.join("embeddings.txt"), embeddings_to_text(&task.vocab, &embeddings))?;
    println!("wrote {} training and {} validation pairs to {}", train.len(), valid.len(), out.display());
    Ok(())
}
