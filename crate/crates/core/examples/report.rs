//! Turn explanations and a bookmarked chart into a Markdown and JSON report.
//!
//! ```text
//! cargo run --example report
//! ```

use predex::synth::planted_conjunction;
use predex::{explain, score_histogram, Bookmark, Report, SearchConfig, Selection, Strictness};

fn main() -> predex::Result<()> {
    let planted = planted_conjunction(9, 4_000);
    let cfg = SearchConfig {
        strictness: Strictness::new(0.5)?,
        max_explanations: 2,
        ..Default::default()
    };
    let out = explain(&planted.dataset, &planted.scores, &cfg)?;
    let best = &out.explanations[0];
    let sel = best.predicate.evaluate(&planted.dataset)?;
    let hist = score_histogram(
        &planted.scores,
        &[
            (best.predicate.to_string(), sel),
            ("all rows".into(), Selection::all(planted.dataset.n_rows())),
        ],
        20,
    )?;
    let bookmark = Bookmark {
        title: "Score distribution".into(),
        sentence: format!("Rows where {} score far above the rest.", best.predicate),
        chart: Some(hist.chart()),
    };
    let report = Report::new(out.explanations.clone(), vec![bookmark])?;
    let dir = std::env::temp_dir().join("predex-report");
    report.write_to(&dir)?;
    println!(
        "{}",
        report.to_markdown().lines().take(6).collect::<Vec<_>>().join("\n")
    );
    println!("\nwrote {}", dir.display());
    Ok(())
}
