//! Restrict the search to predicates that select rows the analyst marked.
//!
//! ```text
//! cargo run --example user_pruning
//! ```

use predex::synth::planted_disjoint_causes;
use predex::{explain, SearchConfig, Strictness};

fn main() -> predex::Result<()> {
    let planted = planted_disjoint_causes(5, 6_000);
    let second = planted.causes[1].evaluate(&planted.dataset)?;
    let marked: Vec<usize> = second.rows().take(3).collect();
    println!("causes: {} | {}", planted.causes[0], planted.causes[1]);
    println!("marked rows {marked:?}");

    let base = SearchConfig {
        strictness: Strictness::new(0.5)?,
        max_explanations: 1,
        ..Default::default()
    };
    let unguided = explain(&planted.dataset, &planted.scores, &base)?;
    let guided = explain(
        &planted.dataset,
        &planted.scores,
        &SearchConfig {
            user_points: Some(marked),
            ..base
        },
    )?;
    println!("without marks: {}", unguided.explanations[0].predicate);
    println!("with marks:    {}", guided.explanations[0].predicate);
    Ok(())
}
