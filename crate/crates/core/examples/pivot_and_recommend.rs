//! Pivot a predicate on one of its features and list correlated attributes.
//!
//! ```text
//! cargo run --example pivot_and_recommend
//! ```

use predex::synth::sensor_readings;
use predex::{fit_gaussian, pivot_view, recommend, score_points, Predicate};

fn main() -> predex::Result<()> {
    let (ds, _) = sensor_readings(2, 20_000);
    let ds = ds.set_roles(&["temperature"])?;
    let sv = score_points(&fit_gaussian(&ds)?, &ds)?;

    let p = Predicate::parse("moteid in ['15'] & voltage < 2.45")?;
    let view = pivot_view(&ds, &sv, &p, "moteid", 20)?;
    println!(
        "filter: {}",
        view.filter.as_ref().map_or("none".into(), |f| f.to_string())
    );
    for bar in view.bars.iter().filter(|b| b.count > 0).take(8) {
        let mark = if bar.highlighted { "*" } else { " " };
        println!(
            "{mark} mote {:>3}: {:>5} rows, mean score {:.2}",
            bar.label, bar.count, bar.mean_score
        );
    }

    let wide = Predicate::parse("moteid in ['1','2','3','15'] & voltage < 2.7")?;
    for rec in recommend(&ds, &sv, &wide, "moteid")? {
        println!("r = {:+.2}  {}", rec.r, rec.sentence);
    }
    Ok(())
}
