//! Score sensor readings with a Gaussian model on the target columns and
//! explain the high scores with the context columns.
//!
//! ```text
//! cargo run --example gaussian_scoring
//! ```

use predex::synth::{jaccard, sensor_readings};
use predex::{explain, fit_gaussian, score_points, SearchConfig, Strictness};

fn main() -> predex::Result<()> {
    let (ds, failed) = sensor_readings(1, 20_000);
    let ds = ds.set_roles(&["temperature"])?;
    let model = fit_gaussian(&ds)?;
    let sv = score_points(&model, &ds)?;
    println!(
        "mean temperature {:.2}, variance {:.2}",
        model.mean()[0],
        model.covariance()[(0, 0)]
    );

    let cfg = SearchConfig {
        strictness: Strictness::new(0.5)?,
        max_explanations: 1,
        ..Default::default()
    };
    let best = &explain(&ds, &sv, &cfg)?.explanations[0];
    let sel = best.predicate.evaluate(&ds)?;
    println!("{}", best.predicate);
    println!("overlap with the failed readings: {:.2}", jaccard(&sel, &failed));
    Ok(())
}
