//! Typed columnar tables, CSV ingestion, and equal-width discretization.
//!
//! A [`Dataset`] is immutable once built. Every feature carries a
//! [`Role`]: target features are what a detector scores, context features
//! are what explanations are allowed to mention.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of equal-width bins per numeric feature.
pub const DEFAULT_BIN_COUNT: usize = 20;

/// Categorical features with more distinct values than this are left out of
/// base-predicate generation.
pub const DEFAULT_MAX_CARDINALITY: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical,
    Numeric,
    Datetime,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Categorical => "categorical",
            FeatureKind::Numeric => "numeric",
            FeatureKind::Datetime => "datetime",
        }
    }

    /// Numeric and datetime features both order their values on the real line.
    pub fn is_ordered(self) -> bool {
        !matches!(self, FeatureKind::Categorical)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    pub role: Role,
    /// Distinct observed values for categorical features, bin count otherwise.
    pub cardinality: usize,
}

/// One feature's values. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Categorical {
        /// Sorted distinct values.
        levels: Vec<String>,
        codes: Vec<Option<u32>>,
    },
    Numeric(Vec<Option<f64>>),
    /// Epoch seconds, UTC.
    Datetime(Vec<Option<i64>>),
}

impl Column {
    pub fn categorical<S: AsRef<str>>(values: &[Option<S>]) -> Column {
        let levels: Vec<String> = values
            .iter()
            .flatten()
            .map(|s| s.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let lookup: HashMap<&str, u32> = levels.iter().enumerate().map(|(i, s)| (s.as_str(), i as u32)).collect();
        let codes = values.iter().map(|v| v.as_ref().map(|s| lookup[s.as_ref()])).collect();
        Column::Categorical { levels, codes }
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            Column::Categorical { .. } => FeatureKind::Categorical,
            Column::Numeric(_) => FeatureKind::Numeric,
            Column::Datetime(_) => FeatureKind::Datetime,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Categorical { codes, .. } => codes.len(),
            Column::Numeric(v) => v.len(),
            Column::Datetime(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Categorical { codes, .. } => codes[row].is_none(),
            Column::Numeric(v) => v[row].is_none(),
            Column::Datetime(v) => v[row].is_none(),
        }
    }

    /// Value on the real line for numeric and datetime columns.
    pub fn ordered_value(&self, row: usize) -> Option<f64> {
        match self {
            Column::Categorical { .. } => None,
            Column::Numeric(v) => v[row],
            Column::Datetime(v) => v[row].map(|s| s as f64),
        }
    }

    pub fn level(&self, row: usize) -> Option<&str> {
        match self {
            Column::Categorical { levels, codes } => codes[row].map(|c| levels[c as usize].as_str()),
            _ => None,
        }
    }

    /// Render a cell the way it would appear in a predicate or a report.
    pub fn display_value(&self, row: usize) -> Option<String> {
        match self {
            Column::Categorical { .. } => self.level(row).map(str::to_string),
            Column::Numeric(v) => v[row].map(|x| format!("{x}")),
            Column::Datetime(v) => v[row].map(format_epoch),
        }
    }

    fn distinct_count(&self) -> usize {
        match self {
            Column::Categorical { levels, .. } => levels.len(),
            Column::Numeric(v) => v.iter().flatten().map(|x| x.to_bits()).collect::<BTreeSet<_>>().len(),
            Column::Datetime(v) => v.iter().flatten().collect::<BTreeSet<_>>().len(),
        }
    }
}

/// An immutable table with a target/context split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<FeatureSchema>,
    columns: Vec<Column>,
    index: HashMap<String, usize>,
    rows: usize,
}

impl Dataset {
    /// Build from named columns. All features start with the context role.
    pub fn from_columns(columns: Vec<(String, Column)>) -> Result<Dataset> {
        let rows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        let mut schema = Vec::with_capacity(columns.len());
        let mut index = HashMap::new();
        let mut cols = Vec::with_capacity(columns.len());
        for (i, (name, column)) in columns.into_iter().enumerate() {
            if column.len() != rows {
                return Err(Error::Schema(format!(
                    "column `{name}` has {} values, expected {rows}",
                    column.len()
                )));
            }
            if let Column::Numeric(v) = &column {
                if let Some(pos) = v.iter().position(|x| x.is_some_and(|x| !x.is_finite())) {
                    return Err(Error::Parse {
                        row: pos + 1,
                        column: name,
                        message: "numeric values must be finite".into(),
                    });
                }
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate feature name `{name}`")));
            }
            let cardinality = match column.kind() {
                FeatureKind::Categorical => column.distinct_count().max(1),
                _ => DEFAULT_BIN_COUNT,
            };
            schema.push(FeatureSchema {
                name,
                kind: column.kind(),
                role: Role::Context,
                cardinality,
            });
            cols.push(column);
        }
        Ok(Dataset {
            schema,
            columns: cols,
            index,
            rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn schema(&self) -> &[FeatureSchema] {
        &self.schema
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSchema> {
        self.feature_index(name).map(|i| &self.schema[i])
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column_by_name(&self, name: &str) -> Result<&Column> {
        self.feature_index(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn context_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.features_with_role(Role::Context)
    }

    pub fn target_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.features_with_role(Role::Target)
    }

    fn features_with_role(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.schema
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.role == role)
            .map(|(i, _)| i)
    }

    /// Mark `targets` as target features and every other feature as context.
    pub fn set_roles<S: AsRef<str>>(mut self, targets: &[S]) -> Result<Dataset> {
        let mut wanted = BTreeSet::new();
        for t in targets {
            let idx = self
                .feature_index(t.as_ref())
                .ok_or_else(|| Error::Schema(format!("unknown feature `{}`", t.as_ref())))?;
            wanted.insert(idx);
        }
        for (i, f) in self.schema.iter_mut().enumerate() {
            f.role = if wanted.contains(&i) {
                Role::Target
            } else {
                Role::Context
            };
        }
        Ok(self)
    }

    /// Change the role of a single feature, leaving the others untouched.
    pub fn with_role(mut self, name: &str, role: Role) -> Result<Dataset> {
        let idx = self
            .feature_index(name)
            .ok_or_else(|| Error::Schema(format!("unknown feature `{name}`")))?;
        self.schema[idx].role = role;
        Ok(self)
    }

    fn apply_hint_roles(mut self, hints: &SchemaHints) -> Dataset {
        for f in &mut self.schema {
            if let Some(role) = hints.0.get(&f.name).and_then(|h| h.role) {
                f.role = role;
            }
        }
        self
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

/// Per-feature overrides for schema inference.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureHint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FeatureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
}

/// JSON object mapping feature name to `{kind, role}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemaHints(pub BTreeMap<String, FeatureHint>);

impl SchemaHints {
    pub fn from_json(text: &str) -> Result<SchemaHints> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<SchemaHints> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn kind(mut self, feature: &str, kind: FeatureKind) -> Self {
        self.0.entry(feature.to_string()).or_default().kind = Some(kind);
        self
    }

    pub fn role(mut self, feature: &str, role: Role) -> Self {
        self.0.entry(feature.to_string()).or_default().role = Some(role);
        self
    }
}

pub fn is_missing_token(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("null")
}

pub fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    // Rust accepts "inf" and "NaN"; neither is a finite observation.
    t.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Parse an ISO-8601 timestamp into whole epoch seconds (UTC).
pub fn parse_datetime(cell: &str) -> Option<i64> {
    let t = cell.trim();
    if t.len() < 10 || !t.as_bytes()[0].is_ascii_digit() {
        return None;
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        return Some(dt.timestamp());
    }
    const FORMATS: [&str; 4] = [
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%dT%H:%M",
    ];
    let t = t.strip_suffix('Z').unwrap_or(t);
    for fmt in FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(t, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_epoch(secs: i64) -> String {
    DateTime::from_timestamp(secs, 0)
        .map(|dt| dt.format("%Y-%m-%d %H:%M:%S").to_string())
        .unwrap_or_else(|| secs.to_string())
}

pub fn load_csv(path: impl AsRef<Path>, hints: Option<&SchemaHints>) -> Result<Dataset> {
    read_csv(File::open(path)?, hints)
}

/// Write a headed CSV that [`read_csv`] reads back to the same values.
/// Missing cells are empty.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(ds.schema().iter().map(|f| f.name.as_str()))
        .map_err(io)?;
    for row in 0..ds.n_rows() {
        let cells: Vec<String> = (0..ds.n_features())
            .map(|i| ds.column(i).display_value(row).unwrap_or_default())
            .collect();
        w.write_record(&cells).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a headed CSV and infer a typed schema.
///
/// A column is numeric if every non-missing cell parses as a finite real,
/// datetime if every non-missing cell parses as ISO-8601, categorical
/// otherwise. Roles default to context unless a hint says otherwise.
pub fn read_csv<R: Read>(reader: R, hints: Option<&SchemaHints>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::Headers)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, 0))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyInput);
    }
    let width = header.len();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); width];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(e, row))?;
        if record.len() != width {
            return Err(Error::Parse {
                row,
                column: format!("{}", record.len().min(width) + 1),
                message: format!("row has {} fields, header has {width}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            cells[j].push(cell.to_string());
        }
    }
    if cells[0].is_empty() {
        return Err(Error::EmptyInput);
    }

    let empty = SchemaHints::default();
    let hints = hints.unwrap_or(&empty);
    for name in hints.0.keys() {
        if !header.contains(name) {
            return Err(Error::Schema(format!("schema hint names unknown feature `{name}`")));
        }
    }
    let mut columns = Vec::with_capacity(width);
    for (name, raw) in header.into_iter().zip(cells) {
        let kind = match hints.0.get(&name).and_then(|h| h.kind) {
            Some(k) => k,
            None => infer_kind(&raw),
        };
        let column = build_column(&name, &raw, kind)?;
        columns.push((name, column));
    }
    Ok(Dataset::from_columns(columns)?.apply_hint_roles(hints))
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    let row = e.position().map(|p| p.record() as usize).unwrap_or(row);
    Error::Parse {
        row,
        column: "?".into(),
        message: e.to_string(),
    }
}

fn infer_kind(raw: &[String]) -> FeatureKind {
    let present: Vec<&String> = raw.iter().filter(|c| !is_missing_token(c)).collect();
    if present.is_empty() {
        return FeatureKind::Categorical;
    }
    if present.iter().all(|c| parse_number(c).is_some()) {
        FeatureKind::Numeric
    } else if present.iter().all(|c| parse_datetime(c).is_some()) {
        FeatureKind::Datetime
    } else {
        FeatureKind::Categorical
    }
}

fn build_column(name: &str, raw: &[String], kind: FeatureKind) -> Result<Column> {
    let bad = |row: usize, what: &str| Error::Parse {
        row: row + 1,
        column: name.to_string(),
        message: format!("`{}` is not a valid {what}", raw[row]),
    };
    Ok(match kind {
        FeatureKind::Categorical => {
            let values: Vec<Option<&str>> = raw.iter().map(|c| (!is_missing_token(c)).then(|| c.trim())).collect();
            Column::categorical(&values)
        }
        FeatureKind::Numeric => Column::Numeric(
            raw.iter()
                .enumerate()
                .map(|(i, c)| {
                    if is_missing_token(c) {
                        Ok(None)
                    } else {
                        parse_number(c).map(Some).ok_or_else(|| bad(i, "number"))
                    }
                })
                .collect::<Result<_>>()?,
        ),
        FeatureKind::Datetime => Column::Datetime(
            raw.iter()
                .enumerate()
                .map(|(i, c)| {
                    if is_missing_token(c) {
                        Ok(None)
                    } else {
                        parse_datetime(c).map(Some).ok_or_else(|| bad(i, "timestamp"))
                    }
                })
                .collect::<Result<_>>()?,
        ),
    })
}

// ---------------------------------------------------------------------------
// Discretization

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub bin_count: usize,
    #[serde(default)]
    pub overrides: BTreeMap<String, usize>,
    #[serde(default = "default_max_cardinality")]
    pub max_cardinality: usize,
}

fn default_max_cardinality() -> usize {
    DEFAULT_MAX_CARDINALITY
}

impl Default for BinningSpec {
    fn default() -> Self {
        BinningSpec {
            bin_count: DEFAULT_BIN_COUNT,
            overrides: BTreeMap::new(),
            max_cardinality: DEFAULT_MAX_CARDINALITY,
        }
    }
}

impl BinningSpec {
    pub fn with_bins(bin_count: usize) -> Self {
        BinningSpec {
            bin_count,
            ..Default::default()
        }
    }

    pub fn bins_for(&self, feature: &str) -> usize {
        self.overrides.get(feature).copied().unwrap_or(self.bin_count)
    }

    fn validate(&self) -> Result<()> {
        if self.bin_count < 1 {
            return Err(Error::Config("bin count must be at least 1".into()));
        }
        if let Some((name, _)) = self.overrides.iter().find(|(_, &b)| b < 1) {
            return Err(Error::Config(format!("bin count for `{name}` must be at least 1")));
        }
        Ok(())
    }
}

/// Bins of one feature.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureBins {
    /// Bin `i` is `[edges[i], edges[i + 1])`, the last bin is closed. A
    /// constant column has the single degenerate bin `edges == [v, v]`.
    Intervals { edges: Vec<f64>, temporal: bool },
    /// One bin per level code.
    Levels { levels: Vec<String> },
}

impl FeatureBins {
    pub fn len(&self) -> usize {
        match self {
            FeatureBins::Intervals { edges, .. } => (edges.len() - 1).max(1),
            FeatureBins::Levels { levels } => levels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin index of an ordered value, `None` outside the observed range.
    pub fn interval_of(&self, x: f64) -> Option<usize> {
        let FeatureBins::Intervals { edges, .. } = self else {
            return None;
        };
        let (lo, hi) = (edges[0], edges[edges.len() - 1]);
        if !(lo..=hi).contains(&x) {
            return None;
        }
        if edges.len() == 2 || x == hi {
            return Some(edges.len().saturating_sub(2));
        }
        // edges[i] <= x < edges[i + 1]
        Some(edges.partition_point(|&e| e <= x) - 1)
    }

    /// `(lo, hi, hi_inclusive)` of interval bin `i`.
    pub fn interval(&self, i: usize) -> Option<(f64, f64, bool)> {
        match self {
            FeatureBins::Intervals { edges, .. } => {
                let last = edges.len() - 2;
                (i <= last).then(|| (edges[i], edges[i + 1], i == last))
            }
            FeatureBins::Levels { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinTable {
    /// `(feature index, bins)` for every binned context feature, schema order.
    pub features: Vec<(usize, FeatureBins)>,
    /// Categorical features excluded for exceeding the cardinality cap.
    pub skipped: Vec<String>,
}

impl BinTable {
    pub fn get(&self, feature: usize) -> Option<&FeatureBins> {
        self.features.iter().find(|(i, _)| *i == feature).map(|(_, b)| b)
    }

    /// Total number of bins, the base-predicate count before empty bins are dropped.
    pub fn total_bins(&self) -> usize {
        self.features.iter().map(|(_, b)| b.len()).sum()
    }
}

/// Equal-width bins for every context feature.
pub fn discretize(ds: &Dataset, spec: &BinningSpec) -> Result<BinTable> {
    spec.validate()?;
    if ds.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut features = Vec::new();
    let mut skipped = Vec::new();
    for idx in ds.context_features() {
        let f = &ds.schema()[idx];
        if f.kind == FeatureKind::Categorical && f.cardinality > spec.max_cardinality {
            log::warn!(
                "feature `{}` has {} distinct values (cap {}); excluded from base predicates",
                f.name,
                f.cardinality,
                spec.max_cardinality
            );
            skipped.push(f.name.clone());
            continue;
        }
        if let Some(bins) = bin_feature(ds, idx, spec.bins_for(&f.name))? {
            features.push((idx, bins));
        }
    }
    Ok(BinTable { features, skipped })
}

/// Bins of a single feature regardless of role. `None` if every value is missing.
pub fn bin_feature(ds: &Dataset, idx: usize, bin_count: usize) -> Result<Option<FeatureBins>> {
    if bin_count < 1 {
        return Err(Error::Config("bin count must be at least 1".into()));
    }
    let column = ds.column(idx);
    if let Column::Categorical { levels, .. } = column {
        return Ok((!levels.is_empty()).then(|| FeatureBins::Levels { levels: levels.clone() }));
    }
    let temporal = column.kind() == FeatureKind::Datetime;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in 0..column.len() {
        if let Some(x) = column.ordered_value(row) {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if lo > hi {
        return Ok(None);
    }
    Ok(Some(FeatureBins::Intervals {
        edges: equal_width_edges(lo, hi, bin_count, temporal),
        temporal,
    }))
}

fn equal_width_edges(lo: f64, hi: f64, bins: usize, integral: bool) -> Vec<f64> {
    if lo == hi {
        return vec![lo, hi];
    }
    let width = hi - lo;
    let mut edges = Vec::with_capacity(bins + 1);
    edges.push(lo);
    for i in 1..bins {
        let mut e = lo + width * (i as f64) / (bins as f64);
        if integral {
            e = e.floor();
        }
        if e > *edges.last().unwrap() && e < hi {
            edges.push(e);
        }
    }
    edges.push(hi);
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1_csv() -> &'static str {
        "city,temp,score\nBoston,30,9.0\nBoston,31,8.0\nChicago,30,7.0\nNYC,50,1.0\nNYC,55,1.0\nChicago,52,1.0\n"
    }

    #[test]
    fn write_csv_round_trips() {
        let text = "city,temp,when\n\"Salem, MA\",30.25,2024-03-01 10:00:00\nNYC,,\n,-1e-7,2024-03-02 00:00:00\n";
        let ds = read_csv(text.as_bytes(), None).unwrap();
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        let back = read_csv(out.as_slice(), None).unwrap();
        assert_eq!(back, ds);
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("city,temp,when\n\"Salem, MA\",30.25,"));
    }

    #[test]
    fn infers_categorical_and_numeric() {
        let ds = read_csv("city,temp\nBoston,30\nNYC,50\n".as_bytes(), None).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.feature("city").unwrap().kind, FeatureKind::Categorical);
        assert_eq!(ds.feature("temp").unwrap().kind, FeatureKind::Numeric);
        assert!(ds.schema().iter().all(|f| f.role == Role::Context));
    }

    #[test]
    fn infers_datetime_as_epoch_seconds() {
        let ds = read_csv(
            "dtime,v\n2004-03-02 07:40:59,1\n2004-03-02 23:59:59.25,2\n".as_bytes(),
            None,
        )
        .unwrap();
        let col = ds.column_by_name("dtime").unwrap();
        assert_eq!(col.kind(), FeatureKind::Datetime);
        assert_eq!(col.ordered_value(0), Some(1_078_213_259.0));
        assert_eq!(col.ordered_value(1), Some(1_078_271_999.0));
        assert_eq!(format_epoch(1_078_213_259), "2004-03-02 07:40:59");
    }

    #[test]
    fn ragged_row_names_the_row() {
        let err = read_csv("a,b\n1,2\n3\n4,5\n".as_bytes(), None).unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_input() {
        assert!(matches!(read_csv("".as_bytes(), None), Err(Error::EmptyInput)));
        assert!(matches!(read_csv("a,b\n".as_bytes(), None), Err(Error::EmptyInput)));
    }

    #[test]
    fn missing_tokens() {
        let ds = read_csv("x,c\n1,a\nNA,null\n,b\nNull,na\n".as_bytes(), None).unwrap();
        let x = ds.column_by_name("x").unwrap();
        assert_eq!(x.kind(), FeatureKind::Numeric);
        assert!(x.is_missing(1) && x.is_missing(2) && x.is_missing(3));
        let c = ds.column_by_name("c").unwrap();
        assert_eq!(ds.feature("c").unwrap().cardinality, 2);
        assert!(c.is_missing(1) && c.is_missing(3));
    }

    #[test]
    fn non_finite_cells_are_not_numeric() {
        let ds = read_csv("x\n1\nNaN\ninf\n".as_bytes(), None).unwrap();
        assert_eq!(ds.feature("x").unwrap().kind, FeatureKind::Categorical);
    }

    #[test]
    fn hints_override_kind_and_role() {
        let hints =
            SchemaHints::from_json(r#"{"temp": {"kind": "categorical"}, "score": {"role": "target"}}"#).unwrap();
        let ds = read_csv(t1_csv().as_bytes(), Some(&hints)).unwrap();
        assert_eq!(ds.feature("temp").unwrap().kind, FeatureKind::Categorical);
        assert_eq!(ds.feature("score").unwrap().role, Role::Target);
        let bad = SchemaHints::default().kind("city", FeatureKind::Numeric);
        assert!(matches!(
            read_csv(t1_csv().as_bytes(), Some(&bad)),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn set_roles_splits_features() {
        let ds = read_csv(t1_csv().as_bytes(), None).unwrap();
        let ds = ds.set_roles(&["score"]).unwrap();
        assert_eq!(ds.target_features().collect::<Vec<_>>(), vec![2]);
        assert_eq!(ds.context_features().collect::<Vec<_>>(), vec![0, 1]);
        let ds = ds.set_roles::<&str>(&[]).unwrap();
        assert_eq!(ds.context_features().count(), 3);
        assert!(matches!(ds.set_roles(&["missing_col"]), Err(Error::Schema(_))));
    }

    #[test]
    fn equal_width_bins() {
        let values: Vec<Option<f64>> = (0..=100).map(|x| Some(x as f64)).collect();
        let ds = Dataset::from_columns(vec![("temp".into(), Column::Numeric(values))]).unwrap();
        let table = discretize(&ds, &BinningSpec::with_bins(20)).unwrap();
        let bins = table.get(0).unwrap();
        assert_eq!(bins.len(), 20);
        for i in 0..20 {
            let (lo, hi, closed) = bins.interval(i).unwrap();
            assert!((hi - lo - 5.0).abs() < 1e-12);
            assert_eq!(closed, i == 19);
        }
        assert_eq!(bins.interval_of(0.0), Some(0));
        assert_eq!(bins.interval_of(5.0), Some(1));
        assert_eq!(bins.interval_of(100.0), Some(19));
        assert_eq!(bins.interval_of(100.5), None);
    }

    #[test]
    fn categorical_bins_and_constant_column() {
        let ds = Dataset::from_columns(vec![
            (
                "city".into(),
                Column::categorical(&[Some("Boston"), Some("NYC"), Some("Chicago"), None]),
            ),
            ("temperature".into(), Column::Numeric(vec![Some(122.153); 4])),
        ])
        .unwrap();
        let table = discretize(&ds, &BinningSpec::default()).unwrap();
        assert_eq!(table.get(0).unwrap().len(), 3);
        let constant = table.get(1).unwrap();
        assert_eq!(constant.len(), 1);
        assert_eq!(constant.interval(0), Some((122.153, 122.153, true)));
        assert_eq!(constant.interval_of(122.153), Some(0));
    }

    #[test]
    fn zero_bins_rejected() {
        let ds = read_csv(t1_csv().as_bytes(), None).unwrap();
        assert!(matches!(
            discretize(&ds, &BinningSpec::with_bins(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn high_cardinality_feature_is_skipped() {
        let values: Vec<Option<String>> = (0..30).map(|i| Some(format!("v{i}"))).collect();
        let ds = Dataset::from_columns(vec![("id".into(), Column::categorical(&values))]).unwrap();
        let spec = BinningSpec {
            max_cardinality: 10,
            ..Default::default()
        };
        let table = discretize(&ds, &spec).unwrap();
        assert!(table.features.is_empty());
        assert_eq!(table.skipped, vec!["id".to_string()]);
    }

    #[test]
    fn datetime_edges_are_whole_seconds() {
        let ds = Dataset::from_columns(vec![(
            "t".into(),
            Column::Datetime((0..50).map(|i| Some(1_000_000 + i * 7)).collect()),
        )])
        .unwrap();
        let table = discretize(&ds, &BinningSpec::with_bins(20)).unwrap();
        let FeatureBins::Intervals { edges, temporal } = table.get(0).unwrap() else {
            panic!()
        };
        assert!(*temporal);
        assert!(edges.iter().all(|e| e.fract() == 0.0));
        assert!(edges.windows(2).all(|w| w[0] < w[1]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn binning_is_a_partition(
                values in proptest::collection::vec(-1e6f64..1e6, 1..200),
                bins in 1usize..40,
            ) {
                let col = Column::Numeric(values.iter().copied().map(Some).collect());
                let ds = Dataset::from_columns(vec![("x".into(), col)]).unwrap();
                let table = discretize(&ds, &BinningSpec::with_bins(bins)).unwrap();
                let b = table.get(0).unwrap();
                for &x in &values {
                    let i = b.interval_of(x).expect("value inside observed range");
                    let (lo, hi, closed) = b.interval(i).unwrap();
                    prop_assert!(lo <= x);
                    prop_assert!(x < hi || (closed && x <= hi));
                    // exactly one bin holds x
                    let holders = (0..b.len())
                        .filter(|&j| {
                            let (lo, hi, closed) = b.interval(j).unwrap();
                            lo <= x && (x < hi || (closed && x <= hi))
                        })
                        .count();
                    prop_assert_eq!(holders, 1);
                }
            }
        }
    }
}
