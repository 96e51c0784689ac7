//! Clauses, conjunctions and disjunctive predicates over a [`Dataset`].
//!
//! Predicates are kept in a canonical form: clauses are ordered by feature
//! name, categorical values are sorted, and disjunction terms are sorted
//! and de-duplicated by their printed form. Two predicates are equal up to
//! clause and term order exactly when their [`Predicate::canonical_key`]s
//! are equal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{format_epoch, Column, Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::grammar;
use crate::selection::Selection;

/// A real interval with per-bound inclusivity. Infinite bounds are always
/// exclusive. `temporal` marks bounds that are epoch seconds and print as
/// quoted timestamps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_inclusive: bool,
    pub hi_inclusive: bool,
    pub temporal: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_inclusive: bool, hi_inclusive: bool) -> Result<Interval> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::Algebra("interval bound is NaN".into()));
        }
        if lo > hi {
            return Err(Error::Algebra(format!("empty interval: {lo} > {hi}")));
        }
        let (lo, hi) = (lo + 0.0, hi + 0.0); // folds -0.0
        let lo_inclusive = lo_inclusive && lo.is_finite();
        let hi_inclusive = hi_inclusive && hi.is_finite();
        if lo == hi && !(lo_inclusive && hi_inclusive) {
            return Err(Error::Algebra(format!(
                "degenerate interval at {lo} must include both bounds"
            )));
        }
        Ok(Interval {
            lo,
            hi,
            lo_inclusive,
            hi_inclusive,
            temporal: false,
        })
    }

    pub fn point(v: f64) -> Interval {
        Interval::new(v, v, true, true).expect("finite point")
    }

    pub fn half_open(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi, true, false).expect("lo < hi")
    }

    pub fn closed(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi, true, true).expect("lo <= hi")
    }

    pub fn open(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi, false, false).expect("lo < hi")
    }

    pub fn above(lo: f64, inclusive: bool) -> Interval {
        Interval::new(lo, f64::INFINITY, inclusive, false).expect("finite bound")
    }

    pub fn below(hi: f64, inclusive: bool) -> Interval {
        Interval::new(f64::NEG_INFINITY, hi, false, inclusive).expect("finite bound")
    }

    pub fn with_temporal(mut self, temporal: bool) -> Interval {
        self.temporal = temporal;
        self
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_inclusive { x >= self.lo } else { x > self.lo };
        let below = if self.hi_inclusive { x <= self.hi } else { x < self.hi };
        above && below
    }

    /// Smallest interval enclosing both, taking the wider inclusivity at a
    /// shared bound.
    pub fn hull(&self, other: &Interval) -> Interval {
        let (lo, lo_inclusive) = match self.lo.total_cmp(&other.lo) {
            std::cmp::Ordering::Less => (self.lo, self.lo_inclusive),
            std::cmp::Ordering::Greater => (other.lo, other.lo_inclusive),
            std::cmp::Ordering::Equal => (self.lo, self.lo_inclusive || other.lo_inclusive),
        };
        let (hi, hi_inclusive) = match self.hi.total_cmp(&other.hi) {
            std::cmp::Ordering::Greater => (self.hi, self.hi_inclusive),
            std::cmp::Ordering::Less => (other.hi, other.hi_inclusive),
            std::cmp::Ordering::Equal => (self.hi, self.hi_inclusive || other.hi_inclusive),
        };
        Interval {
            lo,
            hi,
            lo_inclusive,
            hi_inclusive,
            temporal: self.temporal || other.temporal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClauseBody {
    MemberOf(BTreeSet<String>),
    Range(Interval),
}

impl ClauseBody {
    fn kind_name(&self) -> &'static str {
        match self {
            ClauseBody::MemberOf(_) => "a membership clause",
            ClauseBody::Range(_) => "a range clause",
        }
    }
}

/// A single-feature condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub feature: String,
    pub body: ClauseBody,
}

impl Clause {
    pub fn equals(feature: impl Into<String>, value: impl Into<String>) -> Clause {
        Clause {
            feature: feature.into(),
            body: ClauseBody::MemberOf(BTreeSet::from([value.into()])),
        }
    }

    pub fn member_of<I, S>(feature: impl Into<String>, values: I) -> Result<Clause>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = values.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(Error::Algebra("membership clause needs at least one value".into()));
        }
        Ok(Clause {
            feature: feature.into(),
            body: ClauseBody::MemberOf(set),
        })
    }

    pub fn range(feature: impl Into<String>, interval: Interval) -> Clause {
        Clause {
            feature: feature.into(),
            body: ClauseBody::Range(interval),
        }
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<Selection> {
        Conjunction::from_clause(self.clone()).evaluate(ds)
    }
}

/// Union of two clauses on the same feature: set union for memberships,
/// interval hull for ranges.
pub fn merge(a: &Clause, b: &Clause) -> Result<Clause> {
    if a.feature != b.feature {
        return Err(Error::Algebra(format!(
            "cannot merge clauses on different features `{}` and `{}`",
            a.feature, b.feature
        )));
    }
    let body = match (&a.body, &b.body) {
        (ClauseBody::MemberOf(x), ClauseBody::MemberOf(y)) => ClauseBody::MemberOf(x.union(y).cloned().collect()),
        (ClauseBody::Range(x), ClauseBody::Range(y)) => ClauseBody::Range(x.hull(y)),
        (x, y) => {
            return Err(Error::Algebra(format!(
                "cannot merge {} with {} on `{}`",
                x.kind_name(),
                y.kind_name(),
                a.feature
            )))
        }
    };
    Ok(Clause {
        feature: a.feature.clone(),
        body,
    })
}

/// Clauses combined with AND, at most one per feature, ordered by feature name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Conjunction {
    clauses: BTreeMap<String, ClauseBody>,
}

impl Conjunction {
    pub fn new(clauses: impl IntoIterator<Item = Clause>) -> Result<Conjunction> {
        let mut map = BTreeMap::new();
        for c in clauses {
            if map.contains_key(&c.feature) {
                return Err(Error::Algebra(format!(
                    "feature `{}` appears twice in one conjunction; merge the clauses instead",
                    c.feature
                )));
            }
            map.insert(c.feature, c.body);
        }
        Ok(Conjunction { clauses: map })
    }

    pub fn from_clause(clause: Clause) -> Conjunction {
        Conjunction {
            clauses: BTreeMap::from([(clause.feature, clause.body)]),
        }
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    /// An empty conjunction selects every row.
    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.clauses.keys().map(String::as_str)
    }

    pub fn clauses(&self) -> impl Iterator<Item = Clause> + '_ {
        self.clauses.iter().map(|(f, b)| Clause {
            feature: f.clone(),
            body: b.clone(),
        })
    }

    pub fn body(&self, feature: &str) -> Option<&ClauseBody> {
        self.clauses.get(feature)
    }

    pub fn has_feature(&self, feature: &str) -> bool {
        self.clauses.contains_key(feature)
    }

    pub fn shares_feature(&self, other: &Conjunction) -> bool {
        self.clauses.keys().any(|k| other.clauses.contains_key(k))
    }

    /// Same conjunction with `feature`'s clause dropped.
    pub fn without(&self, feature: &str) -> Conjunction {
        let mut clauses = self.clauses.clone();
        clauses.remove(feature);
        Conjunction { clauses }
    }

    /// Same conjunction with `clause` replacing any clause on its feature.
    pub fn with_clause(&self, clause: Clause) -> Conjunction {
        let mut clauses = self.clauses.clone();
        clauses.insert(clause.feature, clause.body);
        Conjunction { clauses }
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<Selection> {
        let resolved = self
            .clauses
            .iter()
            .map(|(f, b)| ResolvedClause::new(ds, f, b))
            .collect::<Result<Vec<_>>>()?;
        let mut bits = FixedBitSet::with_capacity(ds.n_rows());
        for row in 0..ds.n_rows() {
            if resolved.iter().all(|c| c.matches(row)) {
                bits.insert(row);
            }
        }
        Ok(Selection::from_bits(bits))
    }
}

impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (feature, body)) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "(")?;
            write_atom(f, feature, body)?;
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// AND of two conjunctions over disjoint feature sets.
pub fn intersect(a: &Conjunction, b: &Conjunction) -> Result<Conjunction> {
    if let Some(shared) = a.features().find(|f| b.has_feature(f)) {
        return Err(Error::Algebra(format!(
            "both conjunctions constrain `{shared}`; merge those clauses instead of intersecting"
        )));
    }
    let mut clauses = a.clauses.clone();
    clauses.extend(b.clauses.clone());
    Ok(Conjunction { clauses })
}

/// A disjunction of conjunctions, optionally complemented as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    terms: Vec<Conjunction>,
    negated: bool,
}

impl Predicate {
    pub fn new(terms: Vec<Conjunction>, negated: bool) -> Result<Predicate> {
        if terms.is_empty() {
            return Err(Error::Algebra("predicate needs at least one term".into()));
        }
        if terms.iter().any(Conjunction::is_empty) {
            return Err(Error::Algebra("predicate terms must have at least one clause".into()));
        }
        let mut keyed: Vec<(String, Conjunction)> = terms.into_iter().map(|t| (t.to_string(), t)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        Ok(Predicate {
            terms: keyed.into_iter().map(|(_, t)| t).collect(),
            negated,
        })
    }

    pub fn conjunction(conj: Conjunction) -> Result<Predicate> {
        Predicate::new(vec![conj], false)
    }

    pub fn clause(clause: Clause) -> Predicate {
        Predicate {
            terms: vec![Conjunction::from_clause(clause)],
            negated: false,
        }
    }

    pub fn parse(text: &str) -> Result<Predicate> {
        grammar::parse(text)
    }

    pub fn terms(&self) -> &[Conjunction] {
        &self.terms
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    /// The single conjunction of a plain conjunctive predicate.
    pub fn as_conjunction(&self) -> Option<&Conjunction> {
        (!self.negated && self.terms.len() == 1).then(|| &self.terms[0])
    }

    pub fn clause_count(&self) -> usize {
        self.terms.iter().map(Conjunction::len).sum()
    }

    pub fn features(&self) -> BTreeSet<&str> {
        self.terms.iter().flat_map(|t| t.features()).collect()
    }

    /// Printed canonical form; equal iff predicates are equal up to ordering.
    pub fn canonical_key(&self) -> String {
        self.to_string()
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<Selection> {
        let mut sel = Selection::empty(ds.n_rows());
        for term in &self.terms {
            sel = sel.union(&term.evaluate(ds)?);
        }
        Ok(if self.negated { sel.complement() } else { sel })
    }
}

pub fn disjoin(a: &Predicate, b: &Predicate) -> Result<Predicate> {
    if a.negated || b.negated {
        return Err(Error::Algebra("cannot disjoin a negated predicate".into()));
    }
    Predicate::new(a.terms.iter().chain(&b.terms).cloned().collect(), false)
}

pub fn complement(p: &Predicate) -> Predicate {
    Predicate {
        terms: p.terms.clone(),
        negated: !p.negated,
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated && self.terms.len() == 1 && self.terms[0].len() == 1 {
            let (feature, body) = self.terms[0].clauses.iter().next().unwrap();
            f.write_str("NOT(")?;
            write_atom(f, feature, body)?;
            return f.write_str(")");
        }
        if self.negated {
            f.write_str("NOT(")?;
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" OR ")?;
            }
            write!(f, "{t}")?;
        }
        if self.negated {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Predicate> {
        Predicate::parse(s)
    }
}

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Predicate, D::Error> {
        let text = String::deserialize(d)?;
        Predicate::parse(&text).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Printing

const KEYWORDS: [&str; 4] = ["not", "or", "in", "inf"];

fn is_plain_name(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !KEYWORDS.iter().any(|k| name.eq_ignore_ascii_case(k))
}

pub(crate) fn write_name(f: &mut impl fmt::Write, name: &str) -> fmt::Result {
    if is_plain_name(name) {
        f.write_str(name)
    } else {
        write!(f, "\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

pub(crate) fn write_string(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    write!(f, "'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

pub fn format_number(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{}", x + 0.0)
    }
}

fn write_bound(f: &mut impl fmt::Write, x: f64, temporal: bool) -> fmt::Result {
    if temporal && x.is_finite() && x.fract() == 0.0 {
        write_string(f, &format_epoch(x as i64))
    } else {
        f.write_str(&format_number(x))
    }
}

fn write_atom(f: &mut impl fmt::Write, feature: &str, body: &ClauseBody) -> fmt::Result {
    match body {
        ClauseBody::MemberOf(values) if values.len() == 1 => {
            write_name(f, feature)?;
            f.write_str(" = ")?;
            write_string(f, values.iter().next().unwrap())
        }
        ClauseBody::MemberOf(values) => {
            write_name(f, feature)?;
            f.write_str(" in [")?;
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_string(f, v)?;
            }
            f.write_str("]")
        }
        ClauseBody::Range(r) => {
            let op = |inclusive: bool| if inclusive { "<=" } else { "<" };
            // A quoted point would read back as a level, so timestamps print as a range.
            if r.is_point() && !r.temporal {
                write_name(f, feature)?;
                f.write_str(" = ")?;
                write_bound(f, r.lo, r.temporal)
            } else if r.lo == f64::NEG_INFINITY && r.hi.is_finite() {
                write_name(f, feature)?;
                write!(f, " {} ", op(r.hi_inclusive))?;
                write_bound(f, r.hi, r.temporal)
            } else if r.hi == f64::INFINITY && r.lo.is_finite() {
                write_name(f, feature)?;
                write!(f, " {} ", if r.lo_inclusive { ">=" } else { ">" })?;
                write_bound(f, r.lo, r.temporal)
            } else {
                write_bound(f, r.lo, r.temporal)?;
                write!(f, " {} ", op(r.lo_inclusive))?;
                write_name(f, feature)?;
                write!(f, " {} ", op(r.hi_inclusive))?;
                write_bound(f, r.hi, r.temporal)
            }
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_atom(f, &self.feature, &self.body)
    }
}

// ---------------------------------------------------------------------------
// Evaluation

enum ResolvedClause<'a> {
    Levels {
        codes: &'a [Option<u32>],
        accept: Vec<bool>,
    },
    Range {
        column: &'a Column,
        interval: Interval,
    },
    Values {
        column: &'a Column,
        values: Vec<f64>,
    },
}

impl<'a> ResolvedClause<'a> {
    fn new(ds: &'a Dataset, feature: &str, body: &ClauseBody) -> Result<ResolvedClause<'a>> {
        let column = ds.column_by_name(feature)?;
        let mismatch = |expected| Error::KindMismatch {
            feature: feature.to_string(),
            expected,
            actual: column.kind().as_str(),
        };
        match (column, body) {
            (Column::Categorical { levels, codes }, ClauseBody::MemberOf(values)) => {
                let accept = levels.iter().map(|l| values.contains(l)).collect();
                Ok(ResolvedClause::Levels { codes, accept })
            }
            (Column::Categorical { .. }, ClauseBody::Range(_)) => Err(mismatch("a numeric or datetime feature")),
            (_, ClauseBody::Range(interval)) => Ok(ResolvedClause::Range {
                column,
                interval: *interval,
            }),
            (_, ClauseBody::MemberOf(values)) => {
                // Quoted numbers or timestamps against an ordered column.
                let kind = column.kind();
                let parsed = values
                    .iter()
                    .map(|v| match kind {
                        FeatureKind::Datetime => crate::dataset::parse_datetime(v).map(|s| s as f64),
                        _ => crate::dataset::parse_number(v),
                    })
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(|| mismatch("a categorical feature"))?;
                Ok(ResolvedClause::Values { column, values: parsed })
            }
        }
    }

    fn matches(&self, row: usize) -> bool {
        match self {
            ResolvedClause::Levels { codes, accept } => codes[row].is_some_and(|c| accept[c as usize]),
            ResolvedClause::Range { column, interval } => {
                column.ordered_value(row).is_some_and(|x| interval.contains(x))
            }
            ResolvedClause::Values { column, values } => column.ordered_value(row).is_some_and(|x| values.contains(&x)),
        }
    }
}
