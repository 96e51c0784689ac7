//! JZS Bayes factors for a two-sample comparison of scores.
//!
//! ```text
//! cargo run --example bayes_evidence
//! ```

use predex::bayes::DEFAULT_PRIOR_SCALE;
use predex::{jzs_bayes_factor, jzs_bayes_factor_from_parts, TwoSampleStat};

fn main() -> predex::Result<()> {
    let inside = [9.1, 8.7, 9.9, 10.4, 8.8, 9.5];
    let outside = [1.2, 0.4, -0.3, 0.9, 1.1, 0.0, 0.7, -0.5, 0.2, 1.4];
    let stat = TwoSampleStat::from_groups(&inside, &outside)?;
    let bf = jzs_bayes_factor(&stat, DEFAULT_PRIOR_SCALE)?;
    println!("t = {:.2}: BF10 = {:.3e} ({})", stat.t, bf.bf10, bf.category.as_str());

    for t in [0.0, 1.0, 2.0, 3.0, 5.0] {
        let bf = jzs_bayes_factor_from_parts(t, 20.0, 5.5, DEFAULT_PRIOR_SCALE)?;
        println!("t = {t}, df = 20: BF10 = {:.3} ({})", bf.bf10, bf.category.as_str());
    }
    Ok(())
}
