#![allow(dead_code)]

use predex::{Clause, Column, Conjunction, Dataset, Interval, Predicate};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const COLORS: [&str; 5] = ["amber", "blue", "it's", "red", "x y"];
/// 2024-01-01 00:00:00 UTC.
pub const EPOCH0: i64 = 1_704_067_200;

/// A 200-row fixture with categorical, numeric and datetime features, an
/// awkward feature name, and missing cells in every column.
pub fn fixture(rng: &mut impl Rng) -> Dataset {
    let n = 200;
    let color: Vec<Option<&str>> = (0..n)
        .map(|_| {
            if rng.random_bool(0.05) {
                None
            } else {
                Some(*COLORS.choose(rng).unwrap())
            }
        })
        .collect();
    let size = (0..n)
        .map(|_| (!rng.random_bool(0.05)).then(|| rng.random_range(-50.0..50.0f64).round() / 2.0))
        .collect();
    let price = (0..n)
        .map(|_| (!rng.random_bool(0.05)).then(|| rng.random_range(0.0..10.0)))
        .collect();
    let when = (0..n)
        .map(|_| (!rng.random_bool(0.05)).then(|| EPOCH0 + rng.random_range(0..30) * 86_400))
        .collect();
    Dataset::from_columns(vec![
        ("color".into(), Column::categorical(&color)),
        ("size".into(), Column::Numeric(size)),
        ("unit price".into(), Column::Numeric(price)),
        ("when".into(), Column::Datetime(when)),
    ])
    .unwrap()
}

fn interval(rng: &mut impl Rng, lo_range: (f64, f64), width: f64, round: impl Fn(f64) -> f64) -> Interval {
    match rng.random_range(0..4) {
        0 => Interval::point(round(rng.random_range(lo_range.0..lo_range.1))),
        1 => Interval::above(round(rng.random_range(lo_range.0..lo_range.1)), rng.random_bool(0.5)),
        2 => Interval::below(round(rng.random_range(lo_range.0..lo_range.1)), rng.random_bool(0.5)),
        _ => {
            let lo = round(rng.random_range(lo_range.0..lo_range.1));
            let hi = lo + round(rng.random_range(0.0..width)).max(1.0);
            Interval::new(lo, hi, rng.random_bool(0.5), rng.random_bool(0.5)).unwrap()
        }
    }
}

/// One clause on the fixture feature `f`.
pub fn clause(rng: &mut impl Rng, f: usize) -> Clause {
    match f {
        0 => {
            let k = rng.random_range(1..=3);
            let levels: Vec<&str> = COLORS.choose_multiple(rng, k).copied().collect();
            Clause::member_of("color", levels).unwrap()
        }
        1 => Clause::range("size", interval(rng, (-30.0, 30.0), 20.0, |x| (x * 2.0).round() / 2.0)),
        2 => Clause::range("unit price", interval(rng, (0.0, 10.0), 5.0, |x| x)),
        _ => {
            let day = 86_400.0;
            let iv = interval(rng, (EPOCH0 as f64, EPOCH0 as f64 + 30.0 * day), 10.0 * day, |x| {
                x.round()
            });
            Clause::range("when", iv.with_temporal(true))
        }
    }
}

pub fn conjunction(rng: &mut impl Rng) -> Conjunction {
    let k = rng.random_range(1..=3);
    let features: Vec<usize> = (0..4).collect::<Vec<_>>().choose_multiple(rng, k).copied().collect();
    Conjunction::new(features.into_iter().map(|f| clause(rng, f))).unwrap()
}

/// A random canonical predicate: up to three terms, possibly negated.
pub fn predicate(rng: &mut impl Rng) -> Predicate {
    let terms = (0..rng.random_range(1..=3)).map(|_| conjunction(rng)).collect();
    Predicate::new(terms, rng.random_bool(0.3)).unwrap()
}
