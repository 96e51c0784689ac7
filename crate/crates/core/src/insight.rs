//! Analyst-facing views of predicates: score histograms, pivot bars,
//! correlation recommendations with sentences, and per-subspace scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::{bin_feature, format_epoch, Column, Dataset, FeatureKind, Role};
use crate::error::{Error, Result};
use crate::predicate::{format_number, ClauseBody, Conjunction, Interval, Predicate};
use crate::scoring::{fit_on, ScoreVector};
use crate::selection::Selection;

pub const DEFAULT_HISTOGRAM_BINS: usize = 40;
pub const DEFAULT_PIVOT_BINS: usize = 20;
/// Recommendations need `|r|` above this.
pub const CORRELATION_THRESHOLD: f64 = 0.3;
/// Subspace enumeration beyond this many features needs an explicit opt-in.
pub const MAX_SUBSPACE_FEATURES: usize = 12;

// ---------------------------------------------------------------------------
// Chart specs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSeries {
    pub label: String,
    pub values: Vec<f64>,
}

/// Renderer-neutral chart data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ChartSpec {
    Histogram {
        edges: Vec<f64>,
        series: Vec<ChartSeries>,
    },
    Bar {
        categories: Vec<String>,
        series: Vec<ChartSeries>,
        #[serde(default)]
        highlighted: Vec<String>,
    },
}

// ---------------------------------------------------------------------------
// Histograms

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSeries {
    pub label: String,
    pub counts: Vec<usize>,
    pub total: usize,
}

/// Score distributions of several selections over shared edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub series: Vec<HistogramSeries>,
}

impl Histogram {
    pub fn chart(&self) -> ChartSpec {
        ChartSpec::Histogram {
            edges: self.edges.clone(),
            series: self
                .series
                .iter()
                .map(|s| ChartSeries {
                    label: s.label.clone(),
                    values: s.counts.iter().map(|&c| c as f64).collect(),
                })
                .collect(),
        }
    }
}

/// Equal-width edges over the range of all scores. A constant score
/// vector gets one unit-wide range centered on the value.
pub fn score_histogram(sv: &ScoreVector, selections: &[(String, Selection)], bins: usize) -> Result<Histogram> {
    if selections.is_empty() {
        return Err(Error::Usage("histogram needs at least one selection".into()));
    }
    if bins < 1 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if sv.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (_, sel) in selections {
        if sel.universe() != sv.len() {
            return Err(Error::LengthMismatch {
                expected: sv.len(),
                actual: sel.universe(),
            });
        }
    }
    let s = sv.as_slice();
    let (mut lo, mut hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    let bin_of = |x: f64| (((x - lo) / width) as usize).min(bins - 1);
    let series = selections
        .iter()
        .map(|(label, sel)| {
            let mut counts = vec![0; bins];
            for r in sel.rows() {
                counts[bin_of(s[r])] += 1;
            }
            HistogramSeries {
                label: label.clone(),
                counts,
                total: sel.len(),
            }
        })
        .collect();
    Ok(Histogram { edges, series })
}

// ---------------------------------------------------------------------------
// Pivot

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotBar {
    pub label: String,
    /// Bin bounds for ordered pivots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    pub count: usize,
    pub mean_score: f64,
    pub highlighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotView {
    pub pivot: String,
    /// The predicate without its pivot clause; `None` when that leaves nothing.
    pub filter: Option<Predicate>,
    pub filtered_rows: usize,
    pub bars: Vec<PivotBar>,
}

impl PivotView {
    pub fn chart(&self) -> ChartSpec {
        ChartSpec::Bar {
            categories: self.bars.iter().map(|b| b.label.clone()).collect(),
            series: vec![ChartSeries {
                label: "mean score".into(),
                values: self.bars.iter().map(|b| b.mean_score).collect(),
            }],
            highlighted: self
                .bars
                .iter()
                .filter(|b| b.highlighted)
                .map(|b| b.label.clone())
                .collect(),
        }
    }
}

struct PivotParts<'p> {
    conj: &'p Conjunction,
    pivot_idx: usize,
    filter: Conjunction,
    filtered: Selection,
}

fn pivot_parts<'p>(ds: &Dataset, pred: &'p Predicate, pivot: &str) -> Result<PivotParts<'p>> {
    let conj = pred
        .as_conjunction()
        .ok_or_else(|| Error::Usage("pivoting needs a single conjunction without NOT".into()))?;
    if !conj.has_feature(pivot) {
        return Err(Error::Usage(format!("pivot `{pivot}` is not a feature of `{pred}`")));
    }
    let pivot_idx = ds
        .feature_index(pivot)
        .ok_or_else(|| Error::UnknownFeature(pivot.to_string()))?;
    let filter = conj.without(pivot);
    let filtered = if filter.is_empty() {
        Selection::all(ds.n_rows())
    } else {
        filter.evaluate(ds)?
    };
    Ok(PivotParts {
        conj,
        pivot_idx,
        filter,
        filtered,
    })
}

/// Groups of filtered rows by pivot value or bin, in value order.
struct Groups {
    labels: Vec<String>,
    ranges: Vec<Option<(f64, f64)>>,
    rows: Vec<Vec<usize>>,
}

fn group_rows(ds: &Dataset, idx: usize, rows: &Selection, bins: usize) -> Result<Groups> {
    let column = ds.column(idx);
    match column {
        Column::Categorical { levels, codes } => {
            let mut groups = vec![Vec::new(); levels.len()];
            for r in rows.rows() {
                if let Some(c) = codes[r] {
                    groups[c as usize].push(r);
                }
            }
            Ok(Groups {
                labels: levels.clone(),
                ranges: vec![None; levels.len()],
                rows: groups,
            })
        }
        _ => {
            let Some(fb) = bin_feature(ds, idx, bins)? else {
                return Ok(Groups {
                    labels: Vec::new(),
                    ranges: Vec::new(),
                    rows: Vec::new(),
                });
            };
            let temporal = column.kind() == FeatureKind::Datetime;
            let n = fb.len();
            let mut groups = vec![Vec::new(); n];
            for r in rows.rows() {
                if let Some(b) = column.ordered_value(r).and_then(|x| fb.interval_of(x)) {
                    groups[b].push(r);
                }
            }
            let mut labels = Vec::with_capacity(n);
            let mut ranges = Vec::with_capacity(n);
            for i in 0..n {
                let (lo, hi, closed) = fb.interval(i).unwrap();
                let show = |x: f64| {
                    if temporal {
                        format_epoch(x as i64)
                    } else {
                        format_number(x)
                    }
                };
                labels.push(format!("[{}, {}{}", show(lo), show(hi), if closed { "]" } else { ")" }));
                ranges.push(Some((lo, hi)));
            }
            Ok(Groups {
                labels,
                ranges,
                rows: groups,
            })
        }
    }
}

/// Mean score per pivot value over the rows selected by the rest of the
/// predicate. Values named by the predicate's own pivot clause are highlighted.
pub fn pivot_view(ds: &Dataset, sv: &ScoreVector, pred: &Predicate, pivot: &str, bins: usize) -> Result<PivotView> {
    sv.check_rows(ds)?;
    let parts = pivot_parts(ds, pred, pivot)?;
    let clause = parts
        .conj
        .clauses()
        .find(|c| c.feature == pivot)
        .expect("pivot clause present");
    let pivot_sel = clause.evaluate(ds)?;
    let groups = group_rows(ds, parts.pivot_idx, &parts.filtered, bins)?;
    let mut bars = Vec::new();
    for ((label, range), rows) in groups.labels.into_iter().zip(groups.ranges).zip(groups.rows) {
        if rows.is_empty() {
            continue;
        }
        let mean = rows.iter().map(|&r| sv.get(r)).sum::<f64>() / rows.len() as f64;
        let highlighted = match &clause.body {
            ClauseBody::MemberOf(values) if range.is_none() => values.contains(&label),
            _ => rows.iter().any(|&r| pivot_sel.contains(r)),
        };
        bars.push(PivotBar {
            label,
            range,
            count: rows.len(),
            mean_score: mean,
            highlighted,
        });
    }
    Ok(PivotView {
        pivot: pivot.to_string(),
        filter: (!parts.filter.is_empty())
            .then(|| Predicate::conjunction(parts.filter.clone()))
            .transpose()?,
        filtered_rows: parts.filtered.len(),
        bars,
    })
}

// ---------------------------------------------------------------------------
// Recommendations

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    High,
    Low,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::High => "high",
            Direction::Low => "low",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub attribute: String,
    pub r: f64,
    pub direction: Direction,
    pub sentence: String,
    /// Mean of the attribute per pivot value over the filtered rows.
    pub chart: ChartSpec,
}

/// Pearson correlation; `None` if either side has zero variance or fewer
/// than two pairs.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Numeric and datetime attributes, outside the predicate, whose
/// correlation with the score over the filtered rows exceeds the threshold
/// in magnitude. Sorted by `|r|` descending, then name.
pub fn recommend(ds: &Dataset, sv: &ScoreVector, pred: &Predicate, pivot: &str) -> Result<Vec<Recommendation>> {
    sv.check_rows(ds)?;
    let parts = pivot_parts(ds, pred, pivot)?;
    if parts.filtered.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "recommendations need at least 3 filtered rows, found {}",
            parts.filtered.len()
        )));
    }
    let inside = pred.evaluate(ds)?;
    let groups = group_rows(ds, parts.pivot_idx, &parts.filtered, DEFAULT_PIVOT_BINS)?;
    let mut out = Vec::new();
    for (idx, f) in ds.schema().iter().enumerate() {
        if !f.kind.is_ordered() || parts.conj.has_feature(&f.name) || sv.source_column.as_deref() == Some(&f.name) {
            continue;
        }
        let column = ds.column(idx);
        let (xs, ys): (Vec<f64>, Vec<f64>) = parts
            .filtered
            .rows()
            .filter_map(|r| column.ordered_value(r).map(|x| (x, sv.get(r))))
            .unzip();
        let Some(r) = pearson(&xs, &ys) else {
            continue;
        };
        if r.abs() <= CORRELATION_THRESHOLD {
            continue;
        }
        let filtered_mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let inside_vals: Vec<f64> = inside.rows().filter_map(|row| column.ordered_value(row)).collect();
        let inside_mean = inside_vals.iter().sum::<f64>() / inside_vals.len().max(1) as f64;
        let direction = if !inside_vals.is_empty() && inside_mean > filtered_mean {
            Direction::High
        } else {
            Direction::Low
        };
        let mut categories = Vec::new();
        let mut values = Vec::new();
        for (label, rows) in groups.labels.iter().zip(&groups.rows) {
            let vals: Vec<f64> = rows.iter().filter_map(|&r| column.ordered_value(r)).collect();
            if !vals.is_empty() {
                categories.push(label.clone());
                values.push(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
        let mut rec = Recommendation {
            attribute: f.name.clone(),
            r,
            direction,
            sentence: String::new(),
            chart: ChartSpec::Bar {
                categories,
                series: vec![ChartSeries {
                    label: format!("mean {}", f.name),
                    values,
                }],
                highlighted: Vec::new(),
            },
        };
        rec.sentence = render_sentence(&rec, pred, pivot)?;
        out.push(rec);
    }
    out.sort_by(|a, b| {
        b.r.abs()
            .total_cmp(&a.r.abs())
            .then_with(|| a.attribute.cmp(&b.attribute))
    });
    Ok(out)
}

/// `a`, `a and b`, `a, b, and c`.
fn list_prose(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [a] => a.clone(),
        [a, b] => format!("{a} and {b}"),
        [rest @ .., last] => format!("{}, and {last}", rest.join(", ")),
    }
}

fn value_prose(x: f64, temporal: bool) -> String {
    if temporal && x.fract() == 0.0 && x.is_finite() {
        format_epoch(x as i64)
    } else {
        format_number(x)
    }
}

fn range_prose(iv: &Interval) -> String {
    let v = |x| value_prose(x, iv.temporal);
    if iv.is_point() {
        return v(iv.lo);
    }
    match (iv.lo.is_finite(), iv.hi.is_finite()) {
        (true, false) if iv.lo_inclusive => format!("at least {}", v(iv.lo)),
        (true, false) => format!("greater than {}", v(iv.lo)),
        (false, true) if iv.hi_inclusive => format!("at most {}", v(iv.hi)),
        (false, true) => format!("less than {}", v(iv.hi)),
        _ => format!("between {} and {}", v(iv.lo), v(iv.hi)),
    }
}

fn clause_prose(feature: &str, body: &ClauseBody) -> String {
    match body {
        ClauseBody::MemberOf(values) => {
            let items: Vec<String> = values.iter().cloned().collect();
            format!("{feature} is {}", list_prose(&items))
        }
        ClauseBody::Range(iv) => format!("{feature} is {}", range_prose(iv)),
    }
}

/// "Average {attribute} is {high|low} when {pivot} is {values} compared to
/// other {pivot}'s when {remaining clauses}".
pub fn render_sentence(rec: &Recommendation, pred: &Predicate, pivot: &str) -> Result<String> {
    let conj = pred
        .as_conjunction()
        .ok_or_else(|| Error::Usage("sentences need a single conjunction without NOT".into()))?;
    let body = conj
        .body(pivot)
        .ok_or_else(|| Error::Usage(format!("pivot `{pivot}` is not a feature of `{pred}`")))?;
    let mut s = format!(
        "Average {} is {} when {} compared to other {pivot}'s",
        rec.attribute,
        rec.direction.as_str(),
        clause_prose(pivot, body)
    );
    let rest: Vec<String> = conj
        .clauses()
        .filter(|c| c.feature != pivot)
        .map(|c| clause_prose(&c.feature, &c.body))
        .collect();
    if !rest.is_empty() {
        s.push_str(" when ");
        s.push_str(&rest.join(" and "));
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Subspaces

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceOptions {
    /// Largest subset size, 1 to 3.
    pub max_dim: usize,
    /// Tail probability of the χ² threshold for counting anomalous rows.
    pub alpha: f64,
    /// Permit more than [`MAX_SUBSPACE_FEATURES`] eligible features.
    pub allow_many: bool,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        SubspaceOptions {
            max_dim: 3,
            alpha: 0.01,
            allow_many: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceRow {
    pub features: Vec<String>,
    /// Gaussian negative log likelihood of every row on this subspace.
    pub scores: Vec<f64>,
    /// Score above which a row counts as anomalous.
    pub threshold: f64,
    pub anomalous_count: usize,
}

/// Numeric target features, or every numeric feature if none is a target.
pub fn subspace_features(ds: &Dataset) -> Vec<usize> {
    let numeric: Vec<usize> = (0..ds.n_features())
        .filter(|&i| ds.schema()[i].kind == FeatureKind::Numeric)
        .collect();
    let targets: Vec<usize> = numeric
        .iter()
        .copied()
        .filter(|&i| ds.schema()[i].role == Role::Target)
        .collect();
    if targets.is_empty() {
        numeric
    } else {
        targets
    }
}

/// Every subset of at most `max_dim` eligible features, scored by a
/// Gaussian fitted on that subset. Rows are ranked by anomalous count,
/// ties in subset order.
pub fn subspace_scores(ds: &Dataset, opts: &SubspaceOptions) -> Result<Vec<SubspaceRow>> {
    if !(1..=3).contains(&opts.max_dim) {
        return Err(Error::Config(format!(
            "subspace dimension must be 1 to 3, got {}",
            opts.max_dim
        )));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    let eligible = subspace_features(ds);
    if eligible.is_empty() {
        return Err(Error::Config("no numeric features to enumerate".into()));
    }
    if eligible.len() > MAX_SUBSPACE_FEATURES && !opts.allow_many {
        return Err(Error::Config(format!(
            "{} numeric features give too many subspaces; pass the opt-in to enumerate more than {MAX_SUBSPACE_FEATURES}",
            eligible.len()
        )));
    }
    let n = eligible.len();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for d in 1..=opts.max_dim.min(n) {
        let mut idx: Vec<usize> = (0..d).collect();
        loop {
            subsets.push(idx.iter().map(|&i| eligible[i]).collect());
            let Some(pos) = (0..d).rev().find(|&p| idx[p] < n - d + p) else {
                break;
            };
            idx[pos] += 1;
            for q in pos + 1..d {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    let mut rows = subsets
        .par_iter()
        .map(|features| subspace_row(ds, features, opts.alpha))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| std::cmp::Reverse(r.anomalous_count));
    Ok(rows)
}

fn subspace_row(ds: &Dataset, features: &[usize], alpha: f64) -> Result<SubspaceRow> {
    let model = fit_on(ds, features)?;
    let d = features.len() as f64;
    let cutoff = ChiSquared::new(d)
        .map_err(|e| Error::Config(e.to_string()))?
        .inverse_cdf(1.0 - alpha);
    let offset = 0.5 * model.log_det() + 0.5 * d * (2.0 * std::f64::consts::PI).ln();
    let columns: Vec<&Column> = features.iter().map(|&i| ds.column(i)).collect();
    let mut scores = Vec::with_capacity(ds.n_rows());
    let mut anomalous = 0;
    let mut missing = Vec::new();
    for r in 0..ds.n_rows() {
        let x: Option<Vec<f64>> = columns.iter().map(|c| c.ordered_value(r)).collect();
        match x {
            Some(x) => {
                let m2 = model.mahalanobis_sq(&x);
                if m2 > cutoff {
                    anomalous += 1;
                }
                scores.push(0.5 * m2 + offset);
            }
            None => {
                missing.push(r);
                scores.push(f64::NAN);
            }
        }
    }
    let max = scores
        .iter()
        .copied()
        .filter(|s| !s.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    for r in missing {
        scores[r] = max;
    }
    Ok(SubspaceRow {
        features: model.features().to_vec(),
        scores,
        threshold: 0.5 * cutoff + offset,
        anomalous_count: anomalous,
    })
}
