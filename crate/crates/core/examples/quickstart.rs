//! Explain a planted anomaly in a synthetic sales table.
//!
//! ```text
//! cargo run --example quickstart
//! ```

use predex::synth::planted_conjunction;
use predex::{explain, SearchConfig, Strictness};

fn main() -> predex::Result<()> {
    let planted = planted_conjunction(7, 5_000);
    println!("planted: {}", planted.causes[0]);

    let cfg = SearchConfig {
        strictness: Strictness::new(0.5)?,
        max_explanations: 3,
        ..Default::default()
    };
    let out = explain(&planted.dataset, &planted.scores, &cfg)?;
    for (i, e) in out.explanations.iter().enumerate() {
        println!(
            "{}. {}  influence {:.2}  rows {}  bf10 {:?}",
            i + 1,
            e.predicate,
            e.influence,
            e.coverage.count,
            e.bf10
        );
    }
    Ok(())
}
