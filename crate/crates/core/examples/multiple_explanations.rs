//! Two unrelated causes produce two explanations and their disjunction.
//!
//! ```text
//! cargo run --example multiple_explanations
//! ```

use predex::synth::planted_disjoint_causes;
use predex::{search_multiple, SearchConfig, Strictness};

fn main() -> predex::Result<()> {
    let planted = planted_disjoint_causes(3, 5_000);
    for c in &planted.causes {
        println!("planted:  {c}");
    }
    let cfg = SearchConfig {
        strictness: Strictness::new(0.5)?,
        max_explanations: 4,
        ..Default::default()
    };
    let out = search_multiple(&planted.dataset, &planted.scores, &cfg)?;
    for e in &out.explanations {
        println!("found:    {}  (influence {:.2})", e.predicate, e.influence);
    }
    if let Some(c) = &out.combined {
        let sel = c.predicate.evaluate(&planted.dataset)?;
        println!("combined: {}", c.predicate);
        let hit = sel.intersection_count(&planted.anomalies) as f64;
        println!(
            "covers {:.1}% of the planted rows; {:.1}% of the rows it selects are planted",
            100.0 * hit / planted.anomalies.len() as f64,
            100.0 * hit / sel.len() as f64
        );
    }
    Ok(())
}
