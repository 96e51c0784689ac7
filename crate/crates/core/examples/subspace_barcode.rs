//! Count anomalous rows in every subspace of up to three numeric features.
//!
//! ```text
//! cargo run --example subspace_barcode
//! ```

use predex::synth::sensor_readings;
use predex::{subspace_scores, SubspaceOptions};

fn main() -> predex::Result<()> {
    let (ds, failed) = sensor_readings(4, 10_000);
    println!("{} failed readings", failed.len());
    let rows = subspace_scores(&ds, &SubspaceOptions::default())?;
    let most = rows.first().map_or(1, |r| r.anomalous_count.max(1));
    for row in rows.iter().take(10) {
        let bar = "#".repeat(row.anomalous_count * 40 / most);
        println!("{:<34} {:>5}  {bar}", row.features.join(" + "), row.anomalous_count);
    }
    Ok(())
}
