//! Loads a word-vector file and a JSONL pair corpus the way the training
//! command does, and prints what was kept and skipped.
//!
//!     cargo run --release --example load_corpora [-- VECTORS CORPUS]

use std::path::PathBuf;

use treeattn::embedding_io::{load_embeddings, load_pair_corpus};

const VECTORS: &str = "\
the 0.1 0.2 0.3
cat 0.0 -0.5 0.25
sat 1.0 1.0 -1.0
mat -0.2 0.4 0.0
";

const CORPUS: &str = r#"{"premise": "The cat sat", "hypothesis": "the cat", "label": "entailment"}
{"premise": "the mat", "hypothesis": "a dog barked", "label": "contradiction"}
{"premise": "", "hypothesis": "cat", "label": "neutral"}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let (vectors, corpus) = match (args.next(), args.next()) {
        (Some(v), Some(c)) => (PathBuf::from(v), PathBuf::from(c)),
        _ => {
            let dir = std::env::temp_dir().join(format!("treeattn-load-{}", std::process::id()));
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("vectors.txt"), VECTORS)?;
            std::fs::write(dir.join("corpus.jsonl"), CORPUS)?;
            (dir.join("vectors.txt"), dir.join("corpus.jsonl"))
        }
    };

    let (vocab, embeddings) = load_embeddings(&vectors, None, 1)?;
    println!("{} words ({} with PAD and UNK), dimension {}", vocab.len() - 2, vocab.len(), embeddings.dim());
    let labels: Vec<String> = ["entailment", "neutral", "contradiction"].map(String::from).into();
    let loaded = load_pair_corpus(&corpus, &vocab, &labels, 100)?;
    println!("kept {}, skipped {} empty and {} over-long", loaded.examples.len(), loaded.skipped_empty, loaded.skipped_long);
    for ex in &loaded.examples {
        let words = |ids: &[usize]| ids.iter().map(|&i| vocab.word(i).unwrap_or("?")).collect::<Vec<_>>().join(" ");
        println!("{:<14} | {:<14} | {}", words(&ex.premise), words(&ex.hypothesis), labels[ex.label]);
    }
    Ok(())
}
