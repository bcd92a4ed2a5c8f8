//! Scores predicted trees against reference trees and against the left- and
//! right-branching baselines.
//!
//!     cargo run --release --example tree_scores

use treeattn::embedding_io::parse_tree_corpus;
use treeattn::tree_metrics::{render_table, score_corpus, unlabeled_f1, Averaging, ScoreOptions};

const PRED: &str = "\
( ( the cat ) ( sat ( on ( the mat ) ) ) )
( ( dogs bark ) loudly )
( ( ( a b ) c ) d )
";

const GOLD: &str = "\
( ( the cat ) ( sat ( on ( the mat ) ) ) )
( dogs ( bark loudly ) )
( a ( b ( c d ) ) )
";

fn main() -> treeattn::Result<()> {
    let pred = parse_tree_corpus(PRED, "pred")?;
    let gold = parse_tree_corpus(GOLD, "gold")?;
    for (p, g) in pred.trees.iter().zip(&gold.trees) {
        println!("{:>7.2}  {}", unlabeled_f1(p, g, false)?, p);
    }
    for averaging in [Averaging::Macro, Averaging::Micro] {
        let options = ScoreOptions {
            exclude_root: false,
            averaging,
        };
        let report = score_corpus(&pred.trees, Some(&gold.trees), options)?;
        println!("\n{averaging:?} averaging");
        print!("{}", render_table(&[("pred".to_string(), &report.corpus)]));
    }
    Ok(())
}
