//! Seeded synthetic datasets with planted anomalies, for tests, examples
//! and benchmarks.

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::dataset::{Column, Dataset};
use crate::predicate::Predicate;
use crate::scoring::ScoreVector;
use crate::selection::Selection;

/// A dataset, its scores, and the rows and predicates that were planted.
#[derive(Debug, Clone)]
pub struct Planted {
    pub dataset: Dataset,
    pub scores: ScoreVector,
    /// Rows given anomalous scores.
    pub anomalies: Selection,
    /// One predicate per planted cause; their disjunction selects `anomalies`.
    pub causes: Vec<Predicate>,
}

const REGIONS: [&str; 4] = ["east", "north", "south", "west"];
const CHANNELS: [&str; 3] = ["phone", "store", "web"];
const TIERS: [&str; 5] = ["a", "b", "c", "d", "e"];
const CATEGORICAL: [(&str, &[&str]); 3] = [("region", &REGIONS), ("channel", &CHANNELS), ("tier", &TIERS)];
const NUMERIC: [&str; 2] = ["load", "latency"];

/// Width of one of the 20 default bins over `[0, 100]`.
const BIN_WIDTH: f64 = 5.0;

struct Base {
    rng: StdRng,
    n: usize,
    categorical: Vec<Vec<&'static str>>,
    numeric: Vec<Vec<f64>>,
}

impl Base {
    /// Three categorical and two numeric context features. Numeric values
    /// are uniform on `[0, 100]` with both ends attained, so equal-width
    /// bins fall on multiples of five.
    fn new(seed: u64, n: usize) -> Base {
        assert!(n >= 4, "need at least 4 rows");
        let mut rng = StdRng::seed_from_u64(seed);
        let categorical = CATEGORICAL
            .iter()
            .map(|(_, levels)| (0..n).map(|_| *levels.choose(&mut rng).unwrap()).collect())
            .collect();
        let numeric = NUMERIC
            .iter()
            .map(|_| {
                let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
                v[0] = 0.0;
                v[1] = 100.0;
                v
            })
            .collect();
        Base {
            rng,
            n,
            categorical,
            numeric,
        }
    }

    /// A categorical level and a numeric bin run, chosen at random.
    fn pick_cause(&mut self, cat: usize, exclude_level: Option<&str>, num: usize) -> (String, Vec<bool>) {
        let (name, levels) = CATEGORICAL[cat];
        let choices: Vec<&str> = levels.iter().copied().filter(|l| Some(*l) != exclude_level).collect();
        let level = *choices.choose(&mut self.rng).unwrap();
        let len = self.rng.random_range(2..=5usize);
        let start = self.rng.random_range(0..(20 - len));
        let (lo, hi) = (start as f64 * BIN_WIDTH, (start + len) as f64 * BIN_WIDTH);
        let text = format!("{name} = '{level}' & {lo} <= {} < {hi}", NUMERIC[num]);
        let mask = (0..self.n)
            .map(|r| self.categorical[cat][r] == level && (lo..hi).contains(&self.numeric[num][r]))
            .collect();
        (text, mask)
    }

    fn finish(mut self, causes: Vec<String>, anomalous: Vec<bool>) -> Planted {
        let inside = Normal::new(10.0, 1.0).unwrap();
        let outside = Normal::new(0.0, 1.0).unwrap();
        let scores: Vec<f64> = anomalous
            .iter()
            .map(|&a| {
                if a {
                    inside.sample(&mut self.rng)
                } else {
                    outside.sample(&mut self.rng)
                }
            })
            .collect();
        let mut columns: Vec<(String, Column)> = CATEGORICAL
            .iter()
            .zip(&self.categorical)
            .map(|((name, _), values)| {
                let opts: Vec<Option<&str>> = values.iter().map(|v| Some(*v)).collect();
                (name.to_string(), Column::categorical(&opts))
            })
            .collect();
        columns.extend(
            NUMERIC
                .iter()
                .zip(&self.numeric)
                .map(|(name, v)| (name.to_string(), Column::Numeric(v.iter().map(|x| Some(*x)).collect()))),
        );
        let dataset = Dataset::from_columns(columns).expect("generated columns are consistent");
        Planted {
            dataset,
            scores: ScoreVector::imported(scores).expect("finite scores"),
            anomalies: Selection::from_rows(
                self.n,
                anomalous.iter().enumerate().filter(|(_, a)| **a).map(|(i, _)| i),
            ),
            causes: causes
                .iter()
                .map(|t| Predicate::parse(t).expect("generated predicate parses"))
                .collect(),
        }
    }
}

/// One planted two-clause conjunction: a categorical level and a run of
/// two to five bins of a numeric feature. Scores are N(10, 1) inside and
/// N(0, 1) outside.
pub fn planted_conjunction(seed: u64, rows: usize) -> Planted {
    let mut base = Base::new(seed, rows);
    let cat = base.rng.random_range(0..CATEGORICAL.len());
    let num = base.rng.random_range(0..NUMERIC.len());
    let (text, mask) = base.pick_cause(cat, None, num);
    base.finish(vec![text], mask)
}

/// Two disjoint planted conjunctions. Both use the same categorical
/// feature with different levels, and different numeric features, so no
/// single clause merge can join them.
pub fn planted_disjoint_causes(seed: u64, rows: usize) -> Planted {
    let mut base = Base::new(seed, rows);
    let cat = base.rng.random_range(0..CATEGORICAL.len());
    let (first, first_mask) = base.pick_cause(cat, None, 0);
    let used = CATEGORICAL[cat]
        .1
        .iter()
        .copied()
        .find(|l| first.contains(&format!("'{l}'")))
        .unwrap();
    let (second, second_mask) = base.pick_cause(cat, Some(used), 1);
    let mask = first_mask.iter().zip(&second_mask).map(|(a, b)| *a || *b).collect();
    base.finish(vec![first, second], mask)
}

/// A small instance for checking the search against exhaustive
/// enumeration: one categorical feature with three levels and two numeric
/// features, positive scores with a mild planted bump.
pub fn tiny_instance(seed: u64, rows: usize) -> Planted {
    let mut rng = StdRng::seed_from_u64(seed);
    let levels = ["p", "q", "r"];
    let kind: Vec<&str> = (0..rows).map(|_| *levels.choose(&mut rng).unwrap()).collect();
    let x: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..1.0)).collect();
    let bump_level = *levels.choose(&mut rng).unwrap();
    let bump_lo = rng.random_range(0.0..0.6);
    let anomalous: Vec<bool> = (0..rows)
        .map(|r| kind[r] == bump_level && x[r] >= bump_lo && x[r] < bump_lo + 0.4)
        .collect();
    let scores: Vec<f64> = anomalous
        .iter()
        .map(|&a| {
            let noise: f64 = rng.random_range(0.0..1.0);
            if a {
                2.0 + 2.0 * noise
            } else {
                3.0 * noise * noise
            }
        })
        .collect();
    let opts: Vec<Option<&str>> = kind.iter().map(|k| Some(*k)).collect();
    let dataset = Dataset::from_columns(vec![
        ("kind".into(), Column::categorical(&opts)),
        ("x".into(), Column::Numeric(x.into_iter().map(Some).collect())),
        ("y".into(), Column::Numeric(y.into_iter().map(Some).collect())),
    ])
    .expect("generated columns are consistent");
    Planted {
        dataset,
        scores: ScoreVector::imported(scores).expect("finite scores"),
        anomalies: Selection::from_rows(rows, anomalous.iter().enumerate().filter(|(_, a)| **a).map(|(i, _)| i)),
        causes: Vec::new(),
    }
}

/// Sensor readings in the style of a building sensor network: `moteid`,
/// `dtime`, `temperature`, `humidity`, `light` and `voltage`. One mote
/// fails for a day, reporting a stuck temperature of 122.153 and a low
/// voltage. Scores are left to the caller.
pub fn sensor_readings(seed: u64, rows: usize) -> (Dataset, Selection) {
    let mut rng = StdRng::seed_from_u64(seed);
    let start = 1_077_926_400i64; // 2004-02-28 00:00:00 UTC
    let span = 7 * 86_400i64;
    let failing_mote = 15u32;
    let fail_from = start + 3 * 86_400 + 27_659;
    let fail_to = start + 3 * 86_400 + 86_399;
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut mote = Vec::with_capacity(rows);
    let mut dtime = Vec::with_capacity(rows);
    let mut temperature = Vec::with_capacity(rows);
    let mut humidity = Vec::with_capacity(rows);
    let mut light = Vec::with_capacity(rows);
    let mut voltage = Vec::with_capacity(rows);
    let mut failed = Vec::new();
    for r in 0..rows {
        let m = rng.random_range(1..=20u32);
        let t = start + rng.random_range(0..span);
        let hour = ((t - start) % 86_400) as f64 / 3_600.0;
        let daylight = (std::f64::consts::PI * (hour - 6.0) / 12.0).sin().max(0.0);
        let broken = m == failing_mote && (fail_from..=fail_to).contains(&t);
        mote.push(Some(m.to_string()));
        dtime.push(Some(t));
        if broken {
            failed.push(r);
            temperature.push(Some(122.153));
            voltage.push(Some(2.3 + 0.01 * noise.sample(&mut rng)));
            humidity.push(Some(-4.0 + noise.sample(&mut rng)));
        } else {
            temperature.push(Some(19.0 + 4.0 * daylight + noise.sample(&mut rng)));
            voltage.push(Some(2.6 + 0.05 * noise.sample(&mut rng)));
            humidity.push(Some(38.0 - 5.0 * daylight + 2.0 * noise.sample(&mut rng)));
        }
        light.push(Some((400.0 * daylight + 20.0 * noise.sample(&mut rng)).max(0.0)));
    }
    let dataset = Dataset::from_columns(vec![
        ("moteid".into(), Column::categorical(&mote)),
        ("dtime".into(), Column::Datetime(dtime)),
        ("temperature".into(), Column::Numeric(temperature)),
        ("humidity".into(), Column::Numeric(humidity)),
        ("light".into(), Column::Numeric(light)),
        ("voltage".into(), Column::Numeric(voltage)),
    ])
    .expect("generated columns are consistent");
    (dataset, Selection::from_rows(rows, failed))
}

/// Jaccard similarity of two selections; 1 for two empty sets.
pub fn jaccard(a: &Selection, b: &Selection) -> f64 {
    let union = a.union(b).len();
    if union == 0 {
        1.0
    } else {
        a.intersection_count(b) as f64 / union as f64
    }
}
