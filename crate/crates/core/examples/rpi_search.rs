//! The Bayes-factor strategy, with the evidence trace of each explanation.
//!
//! ```text
//! cargo run --example rpi_search
//! ```

use predex::synth::planted_conjunction;
use predex::{rpi_search, SearchConfig, Strategy};

fn main() -> predex::Result<()> {
    let planted = planted_conjunction(21, 3_000);
    println!("planted: {}", planted.causes[0]);
    let cfg = SearchConfig {
        strategy: Strategy::Bayes,
        max_explanations: 2,
        ..Default::default()
    };
    for e in rpi_search(&planted.dataset, &planted.scores, &cfg)? {
        let category = e.category.map_or("n/a", |c| c.as_str());
        println!("{}  BF10 {:?} ({category})", e.predicate, e.bf10);
        let trace: Vec<String> = e.trace.iter().map(|x| format!("{x:.1}")).collect();
        println!("  log BF10 per step: {}", trace.join(" -> "));
    }
    Ok(())
}
