//! Predicate induction.
//!
//! Two strategies share one candidate representation:
//!
//! * the bottom-up influence search, which starts from single-feature base
//!   predicates and repeats merge, intersect and prune until the best
//!   likelihood influence stops improving, with an outer loop that disjoins
//!   further explanations while the disjunction keeps improving;
//! * the recursive Bayes-factor expansion, which grows every base
//!   predicate greedily while its Bayes factor against the rest of the
//!   data improves.
//!
//! Candidates are conjunctions over binned context features. Each clause
//! is either a set of categorical levels or a contiguous run of bins, so
//! selections are unions and intersections of precomputed per-bin row sets.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{jzs_bayes_factor, BayesResult, Evidence, TwoSampleStat, DEFAULT_PRIOR_SCALE};
use crate::dataset::{discretize, BinTable, BinningSpec, Dataset, FeatureBins};
use crate::error::{Error, Result};
use crate::predicate::{disjoin, Clause, Conjunction, Interval, Predicate};
use crate::scoring::{influence_from_sum, ScoreVector, Strictness};
use crate::selection::Selection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Influence,
    Bayes,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Influence => "influence",
            Strategy::Bayes => "bayes",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Strategy> {
        match s {
            "influence" => Ok(Strategy::Influence),
            "bayes" => Ok(Strategy::Bayes),
            _ => Err(Error::Config(format!(
                "unknown strategy `{s}`, expected `influence` or `bayes`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub strictness: Strictness,
    pub binning: BinningSpec,
    pub max_iterations: usize,
    pub max_explanations: usize,
    /// Rows the analyst marked as anomalous; every candidate must select one.
    pub user_points: Option<Vec<usize>>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::Influence,
            strictness: Strictness::default(),
            binning: BinningSpec::default(),
            max_iterations: 50,
            max_explanations: 5,
            user_points: None,
            workers: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("max iterations must be at least 1".into()));
        }
        if self.max_explanations < 1 {
            return Err(Error::Config("max explanations must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        if let Some(points) = &self.user_points {
            if points.is_empty() {
                return Err(Error::Config("user point set is empty".into()));
            }
            if let Some(&bad) = points.iter().find(|&&r| r >= n_rows) {
                return Err(Error::Config(format!(
                    "user point {bad} is not a row id (dataset has {n_rows} rows)"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Explanations

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub count: usize,
    pub fraction: f64,
}

/// A predicate with its influence, Bayes evidence and coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub predicate: Predicate,
    #[serde(with = "crate::jsonfloat")]
    pub influence: f64,
    pub strictness: Strictness,
    #[serde(with = "crate::jsonfloat::option", default)]
    pub bf10: Option<f64>,
    #[serde(with = "crate::jsonfloat::option", default)]
    pub log_bf10: Option<f64>,
    #[serde(default)]
    pub category: Option<Evidence>,
    pub coverage: Coverage,
    pub mean_score_inside: f64,
    #[serde(with = "crate::jsonfloat::option", default)]
    pub mean_score_outside: Option<f64>,
    /// Best influence per iteration for the influence search, the log Bayes
    /// factor after each accepted expansion for the Bayes strategy.
    pub trace: Vec<f64>,
    pub strategy: Strategy,
}

impl Explanation {
    /// Summarize `sel`, which must be the selection of `predicate`.
    pub fn new(
        predicate: Predicate,
        sel: &Selection,
        sv: &ScoreVector,
        c: Strictness,
        trace: Vec<f64>,
        strategy: Strategy,
    ) -> Result<Explanation> {
        let sum = sv.sum_over(sel);
        if sel.is_empty() {
            return Err(Error::UndefinedInfluence(format!("`{predicate}` selects no rows")));
        }
        let bayes = match TwoSampleStat::from_selection(sv, sel) {
            Ok(stat) => Some(jzs_bayes_factor(&stat, DEFAULT_PRIOR_SCALE)?),
            Err(Error::InsufficientData(_)) => None,
            Err(e) => return Err(e),
        };
        let rest = sel.complement();
        Ok(Explanation {
            predicate,
            influence: influence_from_sum(sum, sel.len(), c),
            strictness: c,
            bf10: bayes.map(|b| b.bf10),
            log_bf10: bayes.map(|b| b.log_bf10),
            category: bayes.map(|b| b.category),
            coverage: Coverage {
                count: sel.len(),
                fraction: sel.len() as f64 / sel.universe() as f64,
            },
            mean_score_inside: sum / sel.len() as f64,
            mean_score_outside: sv.mean_over(&rest),
            trace,
            strategy,
        })
    }

    pub fn bayes(&self) -> Option<BayesResult> {
        Some(BayesResult {
            bf10: self.bf10?,
            log_bf10: self.log_bf10?,
            category: self.category?,
        })
    }
}

/// Result of [`explain`]: individual explanations, plus their disjunction
/// for the influence strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainOutput {
    pub strategy: Strategy,
    pub explanations: Vec<Explanation>,
    #[serde(default)]
    pub combined: Option<Explanation>,
}

impl ExplainOutput {
    /// Pretty JSON with a trailing newline; the on-disk and wire format.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

// ---------------------------------------------------------------------------
// Candidates

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Atom {
    /// Sorted level codes.
    Levels(Vec<u32>),
    /// Inclusive run of bin indices.
    Bins(u32, u32),
}

/// A conjunction under consideration, with its cached selection.
#[derive(Debug, Clone)]
pub struct Candidate {
    atoms: BTreeMap<usize, Atom>,
    conjunction: Conjunction,
    key: String,
    selection: Selection,
    influence: f64,
    parents: Vec<String>,
}

impl Candidate {
    pub fn conjunction(&self) -> &Conjunction {
        &self.conjunction
    }

    pub fn predicate(&self) -> Predicate {
        Predicate::conjunction(self.conjunction.clone()).expect("candidates are non-empty")
    }

    /// Canonical printed form.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn selection(&self) -> &Selection {
        &self.selection
    }

    pub fn influence(&self) -> f64 {
        self.influence
    }

    pub fn clause_count(&self) -> usize {
        self.atoms.len()
    }

    /// Keys of the candidates this one was merged or intersected from.
    pub fn parents(&self) -> &[String] {
        &self.parents
    }
}

/// Higher influence first, then fewer clauses, then smaller selection,
/// then canonical key.
pub fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.influence
        .total_cmp(&a.influence)
        .then(a.atoms.len().cmp(&b.atoms.len()))
        .then(a.selection.len().cmp(&b.selection.len()))
        .then_with(|| a.key.cmp(&b.key))
}

/// Candidates deduplicated by canonical key, kept in rank order.
#[derive(Debug, Clone, Default)]
pub struct CandidatePool {
    items: Vec<Candidate>,
    keys: HashSet<String>,
}

impl CandidatePool {
    pub fn new(candidates: impl IntoIterator<Item = Candidate>) -> CandidatePool {
        let mut pool = CandidatePool::default();
        for c in candidates {
            pool.insert(c);
        }
        pool
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.keys.contains(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate> {
        self.items.iter()
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.items.first()
    }

    /// Adds the candidate unless its key is already present.
    pub fn insert(&mut self, c: Candidate) -> bool {
        if !self.keys.insert(c.key.clone()) {
            return false;
        }
        let at = self.items.partition_point(|x| rank(x, &c) == Ordering::Less);
        self.items.insert(at, c);
        true
    }

    pub fn remove(&mut self, key: &str) -> Option<Candidate> {
        if !self.keys.remove(key) {
            return None;
        }
        let at = self.items.iter().position(|c| c.key == key)?;
        Some(self.items.remove(at))
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&Candidate) -> bool) {
        let keys = &mut self.keys;
        self.items.retain(|c| {
            let k = keep(c);
            if !k {
                keys.remove(&c.key);
            }
            k
        });
    }
}

// ---------------------------------------------------------------------------
// Search space

/// Binned context features with per-bin row sets.
pub struct Search<'a> {
    ds: &'a Dataset,
    sv: &'a ScoreVector,
    cfg: SearchConfig,
    bins: BinTable,
    bin_rows: BTreeMap<usize, Vec<Selection>>,
    user: Option<Selection>,
    workers: Option<rayon::ThreadPool>,
}

impl<'a> Search<'a> {
    pub fn new(ds: &'a Dataset, sv: &'a ScoreVector, cfg: &SearchConfig) -> Result<Search<'a>> {
        sv.check_rows(ds)?;
        cfg.validate(ds.n_rows())?;
        if ds.context_features().next().is_none() {
            return Err(Error::Config("dataset has no context features".into()));
        }
        if sv.has_negative() {
            log::warn!("some anomaly scores are negative; influence assumes higher means more anomalous");
        }
        let bins = discretize(ds, &cfg.binning)?;
        let mut bin_rows = BTreeMap::new();
        for (idx, fb) in &bins.features {
            let column = ds.column(*idx);
            let mut rows = vec![Vec::new(); fb.len()];
            for r in 0..ds.n_rows() {
                let bin = match fb {
                    FeatureBins::Levels { .. } => match column {
                        crate::dataset::Column::Categorical { codes, .. } => codes[r].map(|c| c as usize),
                        _ => None,
                    },
                    FeatureBins::Intervals { .. } => column.ordered_value(r).and_then(|x| fb.interval_of(x)),
                };
                if let Some(b) = bin {
                    rows[b].push(r);
                }
            }
            bin_rows.insert(
                *idx,
                rows.into_iter()
                    .map(|rs| Selection::from_rows(ds.n_rows(), rs))
                    .collect(),
            );
        }
        let user = cfg
            .user_points
            .as_ref()
            .map(|p| Selection::from_rows(ds.n_rows(), p.iter().copied()));
        let workers = match cfg.workers {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?,
            ),
            None => None,
        };
        Ok(Search {
            ds,
            sv,
            cfg: cfg.clone(),
            bins,
            bin_rows,
            user,
            workers,
        })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn bins(&self) -> &BinTable {
        &self.bins
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match &self.workers {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }

    fn atom_selection(&self, feature: usize, atom: &Atom) -> Selection {
        let rows = &self.bin_rows[&feature];
        let mut out = Selection::empty(self.ds.n_rows());
        match atom {
            Atom::Levels(codes) => codes.iter().for_each(|&c| out = out.union(&rows[c as usize])),
            Atom::Bins(a, b) => (*a..=*b).for_each(|i| out = out.union(&rows[i as usize])),
        }
        out
    }

    fn atom_clause(&self, feature: usize, atom: &Atom) -> Clause {
        let name = self.ds.schema()[feature].name.clone();
        let bins = self.bins.get(feature).expect("atoms refer to binned features");
        match (atom, bins) {
            (Atom::Levels(codes), FeatureBins::Levels { levels }) => {
                if codes.len() == 1 {
                    Clause::equals(name, levels[codes[0] as usize].clone())
                } else {
                    Clause::member_of(name, codes.iter().map(|&c| levels[c as usize].clone()))
                        .expect("level sets are non-empty")
                }
            }
            (Atom::Bins(a, b), FeatureBins::Intervals { edges, temporal }) => {
                let interval = if edges[0] == edges[edges.len() - 1] {
                    Interval::point(edges[0])
                } else {
                    let (lo, _, _) = bins.interval(*a as usize).unwrap();
                    let (_, hi, hi_closed) = bins.interval(*b as usize).unwrap();
                    Interval::new(lo, hi, true, hi_closed).expect("bin edges are increasing")
                };
                Clause::range(name, interval.with_temporal(*temporal))
            }
            _ => unreachable!("atom kind matches feature bins"),
        }
    }

    /// Builds a candidate if its selection is non-empty, meets the user
    /// points, and its influence exceeds `threshold`.
    fn make(&self, atoms: BTreeMap<usize, Atom>, parents: Vec<String>, threshold: f64) -> Option<Candidate> {
        let mut sel: Option<Selection> = None;
        for (f, atom) in &atoms {
            let s = self.atom_selection(*f, atom);
            sel = Some(match sel {
                None => s,
                Some(prev) => prev.intersection(&s),
            });
            if sel.as_ref().is_some_and(Selection::is_empty) {
                return None;
            }
        }
        let sel = sel?;
        if let Some(user) = &self.user {
            if !sel.intersects(user) {
                return None;
            }
        }
        let influence = influence_from_sum(self.sv.sum_over(&sel), sel.len(), self.cfg.strictness);
        if influence <= threshold {
            return None;
        }
        let conjunction =
            Conjunction::new(atoms.iter().map(|(f, a)| self.atom_clause(*f, a))).expect("one clause per feature");
        let key = Predicate::conjunction(conjunction.clone())
            .expect("non-empty")
            .canonical_key();
        Some(Candidate {
            atoms,
            conjunction,
            key,
            selection: sel,
            influence,
            parents,
        })
    }

    /// One single-clause candidate per categorical level and per bin, empty
    /// selections dropped.
    pub fn base_candidates(&self) -> Vec<Candidate> {
        let mut out = Vec::with_capacity(self.bins.total_bins());
        for (f, fb) in &self.bins.features {
            for i in 0..fb.len() as u32 {
                let atom = match fb {
                    FeatureBins::Levels { .. } => Atom::Levels(vec![i]),
                    FeatureBins::Intervals { .. } => Atom::Bins(i, i),
                };
                if let Some(c) = self.make(BTreeMap::from([(*f, atom)]), Vec::new(), f64::NEG_INFINITY) {
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn base_pool(&self) -> CandidatePool {
        CandidatePool::new(self.base_candidates())
    }

    /// Union of two clauses on the same feature, if they are distinct and
    /// neither contains the other. Bin runs may overlap or leave a gap of
    /// at most one bin.
    fn merge_atoms(a: &Atom, b: &Atom) -> Option<Atom> {
        match (a, b) {
            (Atom::Levels(x), Atom::Levels(y)) => {
                let xs: BTreeSet<u32> = x.iter().copied().collect();
                let ys: BTreeSet<u32> = y.iter().copied().collect();
                if xs.is_subset(&ys) || ys.is_subset(&xs) {
                    return None;
                }
                Some(Atom::Levels(xs.union(&ys).copied().collect()))
            }
            (Atom::Bins(a1, b1), Atom::Bins(a2, b2)) => {
                let contains = |lo: u32, hi: u32, l: u32, h: u32| lo <= l && h <= hi;
                if contains(*a1, *b1, *a2, *b2) || contains(*a2, *b2, *a1, *b1) {
                    return None;
                }
                let gap = (*a1.max(a2) as i64) - (*b1.min(b2) as i64) - 1;
                (gap <= 1).then(|| Atom::Bins(*a1.min(a2), *b1.max(b2)))
            }
            _ => None,
        }
    }

    /// Candidates over the same features that differ in exactly one
    /// mergeable clause.
    fn merged_atoms(p: &Candidate, q: &Candidate) -> Option<BTreeMap<usize, Atom>> {
        if p.atoms.len() != q.atoms.len() || !p.atoms.keys().eq(q.atoms.keys()) {
            return None;
        }
        let mut differing = p.atoms.iter().zip(q.atoms.values()).filter(|((_, a), b)| a != b);
        let ((f, a), b) = differing.next()?;
        if differing.next().is_some() {
            return None;
        }
        let merged = Self::merge_atoms(a, b)?;
        let mut atoms = p.atoms.clone();
        atoms.insert(*f, merged);
        Some(atoms)
    }

    /// Merge candidates in rank order with the highest-ranked partner whose
    /// merge beats both parents. A merged candidate replaces its parents
    /// and keeps merging. Returns every candidate created.
    pub fn merge_pass(&self, pool: &mut CandidatePool) -> Vec<Candidate> {
        let order: Vec<String> = pool.iter().map(|c| c.key.clone()).collect();
        let mut created = Vec::new();
        for key in order {
            let Some(mut cur) = pool.remove(&key) else {
                continue;
            };
            loop {
                let found = self.install(|| {
                    pool.items
                        .par_iter()
                        .map(|q| {
                            let atoms = Self::merged_atoms(&cur, q)?;
                            let threshold = cur.influence.max(q.influence);
                            let m = self.make(atoms, vec![cur.key.clone(), q.key.clone()], threshold)?;
                            (!pool.contains(&m.key)).then_some((q.key.clone(), m))
                        })
                        .find_first(Option::is_some)
                        .flatten()
                });
                match found {
                    Some((partner, merged)) => {
                        pool.remove(&partner);
                        created.push(merged.clone());
                        cur = merged;
                    }
                    None => break,
                }
            }
            pool.insert(cur);
        }
        created
    }

    /// Conjoin every feature-disjoint pair and keep those that beat both
    /// parents. Parents stay in the pool. Returns the candidates added.
    pub fn intersect_pass(&self, pool: &mut CandidatePool) -> Vec<Candidate> {
        let snapshot = &pool.items;
        let found: Vec<Candidate> = self.install(|| {
            (0..snapshot.len())
                .into_par_iter()
                .flat_map_iter(|i| {
                    let a = &snapshot[i];
                    snapshot[i + 1..].iter().filter_map(move |b| {
                        if a.atoms.keys().any(|f| b.atoms.contains_key(f)) {
                            return None;
                        }
                        let mut atoms = a.atoms.clone();
                        atoms.extend(b.atoms.iter().map(|(f, x)| (*f, x.clone())));
                        let threshold = a.influence.max(b.influence);
                        self.make(atoms, vec![a.key.clone(), b.key.clone()], threshold)
                    })
                })
                .collect()
        });
        let mut added = Vec::new();
        for c in found {
            if pool.insert(c.clone()) {
                added.push(c);
            }
        }
        added
    }

    /// Keep only candidates that select the highest-scoring row of the
    /// current best candidate, or whose intersection with the best would
    /// beat it. The best candidate always survives.
    pub fn prune_pass(&self, pool: &mut CandidatePool) {
        let Some(best) = pool.best().cloned() else {
            return;
        };
        let best_key = best.key.clone();
        let Some(x_hat) = self.sv.argmax_over(&best.selection) else {
            return;
        };
        let c = self.cfg.strictness;
        let beats_best_jointly = |q: &Candidate| {
            if q.conjunction.shares_feature(&best.conjunction) {
                return false;
            }
            let both = q.selection.intersection(&best.selection);
            !both.is_empty() && influence_from_sum(self.sv.sum_over(&both), both.len(), c) > best.influence
        };
        pool.retain(|q| q.key == best_key || q.selection.contains(x_hat) || beats_best_jointly(q));
        if let Some(user) = &self.user {
            pool.retain(|c| c.key == best_key || c.selection.intersects(user));
        }
    }

    /// Inner loop from `pool`: the best candidate, its trace, and the
    /// unused candidates (everything seen except the best and its ancestors).
    fn inner(&self, mut pool: CandidatePool) -> Result<(Candidate, Vec<f64>, Vec<Candidate>)> {
        if pool.is_empty() {
            return Err(Error::NoExplanation);
        }
        let mut archive: BTreeMap<String, Candidate> = pool.iter().map(|c| (c.key.clone(), c.clone())).collect();
        let mut trace = Vec::new();
        let mut best: Option<Candidate> = None;
        for iteration in 0..self.cfg.max_iterations {
            for c in self.merge_pass(&mut pool) {
                archive.entry(c.key.clone()).or_insert(c);
            }
            for c in self.intersect_pass(&mut pool) {
                archive.entry(c.key.clone()).or_insert(c);
            }
            let current = pool.best().expect("passes never empty the pool").clone();
            trace.push(current.influence);
            let improved = best.as_ref().is_none_or(|b| current.influence > b.influence);
            if best.as_ref().is_none_or(|b| rank(&current, b) == Ordering::Less) {
                best = Some(current);
            }
            if iteration > 0 && !improved {
                break;
            }
            self.prune_pass(&mut pool);
        }
        let best = best.expect("at least one iteration");
        let mut used = HashSet::from([best.key.clone()]);
        let mut stack = best.parents.clone();
        while let Some(k) = stack.pop() {
            if used.insert(k.clone()) {
                if let Some(c) = archive.get(&k) {
                    stack.extend(c.parents.iter().cloned());
                }
            }
        }
        let leftover = archive.into_values().filter(|c| !used.contains(&c.key)).collect();
        Ok((best, trace, leftover))
    }

    /// Best predicate by likelihood influence, plus the unused candidates.
    pub fn best_predicate(&self) -> Result<(Explanation, CandidatePool)> {
        let (best, trace, leftover) = self.inner(self.base_pool())?;
        let e = Explanation::new(
            best.predicate(),
            &best.selection,
            self.sv,
            self.cfg.strictness,
            trace,
            Strategy::Influence,
        )?;
        Ok((e, CandidatePool::new(leftover)))
    }

    /// Repeat the inner loop on the unused candidates, disjoining each new
    /// best while the disjunction's influence strictly improves.
    pub fn multiple(&self) -> Result<ExplainOutput> {
        let c = self.cfg.strictness;
        let (first, trace, mut leftover) = self.inner(self.base_pool())?;
        let mut acc_pred = first.predicate();
        let mut acc_sel = first.selection.clone();
        let mut acc_inf = first.influence;
        let mut combined_trace = vec![acc_inf];
        let mut explanations = vec![Explanation::new(
            first.predicate(),
            &first.selection,
            self.sv,
            c,
            trace,
            Strategy::Influence,
        )?];
        while explanations.len() < self.cfg.max_explanations {
            // Only candidates that could extend the disjunction are still useful.
            let pool = CandidatePool::new(leftover.into_iter().filter(|x| {
                !x.selection.is_subset(&acc_sel) && {
                    let u = acc_sel.union(&x.selection);
                    influence_from_sum(self.sv.sum_over(&u), u.len(), c) > acc_inf
                }
            }));
            if pool.is_empty() {
                break;
            }
            let (next, trace, rest) = self.inner(pool)?;
            let union = acc_sel.union(&next.selection);
            let union_inf = influence_from_sum(self.sv.sum_over(&union), union.len(), c);
            if union_inf <= acc_inf {
                break;
            }
            acc_pred = disjoin(&acc_pred, &next.predicate())?;
            acc_sel = union;
            acc_inf = union_inf;
            combined_trace.push(acc_inf);
            explanations.push(Explanation::new(
                next.predicate(),
                &next.selection,
                self.sv,
                c,
                trace,
                Strategy::Influence,
            )?);
            leftover = rest;
        }
        let combined = Explanation::new(acc_pred, &acc_sel, self.sv, c, combined_trace, Strategy::Influence)?;
        Ok(ExplainOutput {
            strategy: Strategy::Influence,
            explanations,
            combined: Some(combined),
        })
    }

    /// Bayes evidence of a candidate, if both groups are large enough and
    /// the candidate is not less anomalous than the rest.
    fn evidence(&self, c: &Candidate) -> Result<Option<(TwoSampleStat, BayesResult)>> {
        let stat = match TwoSampleStat::from_selection(self.sv, &c.selection) {
            Ok(s) => s,
            Err(Error::InsufficientData(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if stat.t < 0.0 {
            return Ok(None);
        }
        Ok(Some((stat, jzs_bayes_factor(&stat, DEFAULT_PRIOR_SCALE)?)))
    }

    /// `cur` extended by base `e`: a conjunction with a new feature, or a
    /// merge with the clause already on that feature.
    fn expand(&self, cur: &Candidate, e: &Candidate) -> Option<Candidate> {
        let (f, atom) = e.atoms.iter().next()?;
        let mut atoms = cur.atoms.clone();
        match cur.atoms.get(f) {
            None => {
                atoms.insert(*f, atom.clone());
            }
            Some(existing) => {
                atoms.insert(*f, Self::merge_atoms(existing, atom)?);
            }
        }
        self.make(atoms, vec![cur.key.clone(), e.key.clone()], f64::NEG_INFINITY)
    }

    /// Grow every base predicate while its Bayes factor strictly improves,
    /// taking the first improving base in evidence order each step.
    /// Results are deduplicated and sorted by Bayes factor, highest first.
    pub fn rpi(&self) -> Result<Vec<Explanation>> {
        let bases = self.base_candidates();
        let scored = self.install(|| {
            bases
                .into_par_iter()
                .map(|b| Ok(self.evidence(&b)?.map(|(_, r)| (b, r))))
                .collect::<Result<Vec<_>>>()
        })?;
        let mut seeds: Vec<(Candidate, BayesResult)> = scored.into_iter().flatten().collect();
        seeds.sort_by(|a, b| b.1.log_bf10.total_cmp(&a.1.log_bf10).then_with(|| rank(&a.0, &b.0)));
        let grown = self.install(|| {
            seeds
                .par_iter()
                .map(|(seed, seed_bayes)| {
                    let mut cur = seed.clone();
                    let mut cur_bayes = *seed_bayes;
                    let mut trace = vec![cur_bayes.log_bf10];
                    for _ in 0..self.cfg.max_iterations {
                        let mut improved = false;
                        for (e, _) in &seeds {
                            let Some(next) = self.expand(&cur, e) else {
                                continue;
                            };
                            if next.selection == cur.selection {
                                continue;
                            }
                            let Some((stat, bayes)) = self.evidence(&next)? else {
                                continue;
                            };
                            if stat.t > 0.0 && bayes.log_bf10 > cur_bayes.log_bf10 {
                                cur = next;
                                cur_bayes = bayes;
                                trace.push(bayes.log_bf10);
                                improved = true;
                                break;
                            }
                        }
                        if !improved {
                            break;
                        }
                    }
                    Ok((cur, cur_bayes, trace))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let mut seen = HashSet::new();
        let mut unique: Vec<(Candidate, BayesResult, Vec<f64>)> = grown
            .into_iter()
            .filter(|(c, _, _)| seen.insert(c.key.clone()))
            .collect();
        unique.sort_by(|a, b| b.1.log_bf10.total_cmp(&a.1.log_bf10).then_with(|| rank(&a.0, &b.0)));
        unique
            .into_iter()
            .map(|(c, _, trace)| {
                Explanation::new(
                    c.predicate(),
                    &c.selection,
                    self.sv,
                    self.cfg.strictness,
                    trace,
                    Strategy::Bayes,
                )
            })
            .collect()
    }

    /// Run the configured strategy.
    pub fn explain(&self) -> Result<ExplainOutput> {
        match self.cfg.strategy {
            Strategy::Influence => self.multiple(),
            Strategy::Bayes => {
                let mut explanations = self.rpi()?;
                if explanations.is_empty() {
                    return Err(Error::NoExplanation);
                }
                explanations.truncate(self.cfg.max_explanations);
                Ok(ExplainOutput {
                    strategy: Strategy::Bayes,
                    explanations,
                    combined: None,
                })
            }
        }
    }
}

pub fn search_best_predicate(
    ds: &Dataset,
    sv: &ScoreVector,
    cfg: &SearchConfig,
) -> Result<(Explanation, CandidatePool)> {
    Search::new(ds, sv, cfg)?.best_predicate()
}

pub fn search_multiple(ds: &Dataset, sv: &ScoreVector, cfg: &SearchConfig) -> Result<ExplainOutput> {
    Search::new(ds, sv, cfg)?.multiple()
}

pub fn rpi_search(ds: &Dataset, sv: &ScoreVector, cfg: &SearchConfig) -> Result<Vec<Explanation>> {
    Search::new(ds, sv, cfg)?.rpi()
}

pub fn explain(ds: &Dataset, sv: &ScoreVector, cfg: &SearchConfig) -> Result<ExplainOutput> {
    Search::new(ds, sv, cfg)?.explain()
}

/// Exhaustive best conjunction of at most `max_clauses` clauses, each a
/// categorical level set or a contiguous bin run. Exponential; meant for
/// checking the search on small instances.
pub fn exhaustive_best(
    ds: &Dataset,
    sv: &ScoreVector,
    cfg: &SearchConfig,
    max_clauses: usize,
) -> Result<Option<Candidate>> {
    let s = Search::new(ds, sv, cfg)?;
    let mut per_feature: Vec<(usize, Vec<Atom>)> = Vec::new();
    for (f, fb) in &s.bins.features {
        let n = fb.len() as u32;
        let atoms = match fb {
            FeatureBins::Levels { .. } => {
                assert!(n <= 16, "exhaustive search limited to 16 levels");
                (1u32..(1 << n))
                    .map(|mask| Atom::Levels((0..n).filter(|i| mask & (1 << i) != 0).collect()))
                    .collect()
            }
            FeatureBins::Intervals { .. } => (0..n).flat_map(|a| (a..n).map(move |b| Atom::Bins(a, b))).collect(),
        };
        per_feature.push((*f, atoms));
    }
    let mut best: Option<Candidate> = None;
    let mut consider = |atoms: BTreeMap<usize, Atom>| {
        if let Some(c) = s.make(atoms, Vec::new(), f64::NEG_INFINITY) {
            if best.as_ref().is_none_or(|b| rank(&c, b) == Ordering::Less) {
                best = Some(c);
            }
        }
    };
    fn walk(
        features: &[(usize, Vec<Atom>)],
        chosen: &mut BTreeMap<usize, Atom>,
        remaining: usize,
        consider: &mut dyn FnMut(BTreeMap<usize, Atom>),
    ) {
        if !chosen.is_empty() {
            consider(chosen.clone());
        }
        if remaining == 0 {
            return;
        }
        for (i, (f, atoms)) in features.iter().enumerate() {
            for a in atoms {
                chosen.insert(*f, a.clone());
                walk(&features[i + 1..], chosen, remaining - 1, consider);
                chosen.remove(f);
            }
        }
    }
    walk(&per_feature, &mut BTreeMap::new(), max_clauses, &mut consider);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{read_csv, Role};
    use crate::scoring::{import_scores_from_column, likelihood_influence};
    use crate::synth;

    /// city / temp / score, rows 0..6.
    fn t1() -> (Dataset, ScoreVector) {
        let csv =
            "city,temp,score\nBoston,30,9.0\nBoston,31,8.0\nChicago,30,7.0\nNYC,50,1.0\nNYC,55,1.0\nChicago,52,1.0\n";
        import_scores_from_column(read_csv(csv.as_bytes(), None).unwrap(), "score").unwrap()
    }

    /// One bin per degree over [30, 55].
    fn unit_bins() -> SearchConfig {
        SearchConfig {
            binning: BinningSpec::with_bins(25),
            ..SearchConfig::default()
        }
    }

    fn by_key<'p>(pool: &'p CandidatePool, key: &str) -> &'p Candidate {
        pool.iter()
            .find(|c| c.key() == key)
            .unwrap_or_else(|| panic!("no candidate `{key}`"))
    }

    #[test]
    fn base_predicates_cover_levels_and_bins() {
        let (ds, sv) = t1();
        let s = Search::new(&ds, &sv, &unit_bins()).unwrap();
        assert_eq!(s.bins().total_bins(), 3 + 25);
        let pool = s.base_pool();
        // only bins holding a value survive: 30, 31, 50, 52, 55
        assert_eq!(pool.len(), 3 + 5);
        let boston = by_key(&pool, "(city = 'Boston')");
        assert_eq!(boston.selection().to_vec(), vec![0, 1]);
        assert_eq!(boston.influence(), 8.5);
        let bin = by_key(&pool, "(30 <= temp < 31)");
        assert_eq!(bin.selection().to_vec(), vec![0, 2]);
        assert_eq!(by_key(&pool, "(54 <= temp <= 55)").selection().to_vec(), vec![4]);
        for c in pool.iter() {
            let p = c.predicate();
            assert_eq!(&p.evaluate(&ds).unwrap(), c.selection());
            assert_eq!(p.canonical_key(), c.key());
        }
    }

    #[test]
    fn no_context_features_is_a_config_error() {
        let (ds, sv) = t1();
        let ds = ds.set_roles(&["city", "temp", "score"]).unwrap();
        assert!(matches!(Search::new(&ds, &sv, &unit_bins()), Err(Error::Config(_))));
    }

    #[test]
    fn merge_accepts_only_strict_improvements() {
        let (ds, sv) = t1();
        let s = Search::new(&ds, &sv, &unit_bins()).unwrap();
        let mut pool = s.base_pool();
        let created = s.merge_pass(&mut pool);
        for m in &created {
            let parents: Vec<f64> = m
                .parents()
                .iter()
                .map(|k| {
                    created
                        .iter()
                        .chain(s.base_candidates().iter())
                        .find(|c| c.key() == k)
                        .unwrap()
                        .influence()
                })
                .collect();
            assert!(parents.iter().all(|&p| m.influence() > p));
        }
        // Boston (8.5) with Chicago (7.0 / 4.0 ...) never beats 8.5
        assert!(!pool.iter().any(|c| c.key().contains("city in")));
        // [30,31) at 8.0 and [31,32) at 8.0 merge to [30,32) at 8.0: rejected
        assert!(pool.contains("(30 <= temp < 31)") && pool.contains("(31 <= temp < 32)"));
    }

    #[test]
    fn merge_replaces_parents() {
        // scores 1, 5, 9 on temp 0, 1, 2 and a low outlier at 9
        let csv = "temp,score\n0,6\n1,6.5\n2,7\n9,0\n";
        let (ds, sv) = import_scores_from_column(read_csv(csv.as_bytes(), None).unwrap(), "score").unwrap();
        let cfg = SearchConfig {
            binning: BinningSpec::with_bins(9),
            strictness: Strictness::new(0.5).unwrap(),
            ..SearchConfig::default()
        };
        let s = Search::new(&ds, &sv, &cfg).unwrap();
        let mut pool = s.base_pool();
        let created = s.merge_pass(&mut pool);
        assert!(!created.is_empty());
        let best = pool.best().unwrap();
        assert_eq!(best.key(), "(0 <= temp < 3)");
        assert!(!pool.contains("(2 <= temp < 3)"));
        assert!(pool.contains("(8 <= temp <= 9)"));
    }

    #[test]
    fn merge_gap_rule() {
        use Atom::*;
        assert_eq!(Search::merge_atoms(&Bins(3, 3), &Bins(4, 4)), Some(Bins(3, 4)));
        assert_eq!(Search::merge_atoms(&Bins(3, 3), &Bins(5, 5)), Some(Bins(3, 5)));
        assert_eq!(Search::merge_atoms(&Bins(3, 3), &Bins(6, 6)), None);
        assert_eq!(Search::merge_atoms(&Bins(2, 5), &Bins(4, 7)), Some(Bins(2, 7)));
        assert_eq!(Search::merge_atoms(&Bins(2, 5), &Bins(3, 4)), None);
        assert_eq!(
            Search::merge_atoms(&Levels(vec![0]), &Levels(vec![2])),
            Some(Levels(vec![0, 2]))
        );
        assert_eq!(Search::merge_atoms(&Levels(vec![0, 1]), &Levels(vec![1])), None);
    }

    #[test]
    fn intersect_keeps_parents_and_strict_improvements() {
        let (ds, sv) = t1();
        let s = Search::new(&ds, &sv, &unit_bins()).unwrap();
        let mut pool = s.base_pool();
        let before: Vec<String> = pool.iter().map(|c| c.key().to_string()).collect();
        let added = s.intersect_pass(&mut pool);
        for k in &before {
            assert!(pool.contains(k));
        }
        // Boston (8.5) & [30,31) (8.0) selects row 0 only: 9.0
        let top = by_key(&pool, "(city = 'Boston') & (30 <= temp < 31)");
        assert_eq!(top.selection().to_vec(), vec![0]);
        assert_eq!(top.influence(), 9.0);
        // Boston & [31,32) selects row 1 at 8.0, not above 8.5
        assert!(!pool.contains("(city = 'Boston') & (31 <= temp < 32)"));
        for c in &added {
            assert_eq!(c.clause_count(), 2);
        }
    }

    #[test]
    fn prune_keeps_candidates_with_top_row() {
        let (ds, sv) = t1();
        let s = Search::new(&ds, &sv, &unit_bins()).unwrap();
        let mut pool = s.base_pool();
        s.intersect_pass(&mut pool);
        s.prune_pass(&mut pool);
        assert!(pool.iter().all(|c| c.selection().contains(0)));
        assert!(!pool.contains("(city = 'NYC')"));
    }

    #[test]
    fn user_points_restrict_candidates() {
        let (ds, sv) = t1();
        let cfg = SearchConfig {
            user_points: Some(vec![5]),
            ..unit_bins()
        };
        let s = Search::new(&ds, &sv, &cfg).unwrap();
        let pool = s.base_pool();
        assert!(!pool.contains("(city = 'NYC')"));
        assert!(pool.iter().all(|c| c.selection().contains(5)));
        let out = s.multiple().unwrap();
        for e in &out.explanations {
            assert!(e.predicate.evaluate(&ds).unwrap().contains(5));
        }
        let bad = SearchConfig {
            user_points: Some(vec![6]),
            ..unit_bins()
        };
        assert!(matches!(Search::new(&ds, &sv, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn best_predicate_on_fixture_matches_exhaustive_optimum() {
        let (ds, sv) = t1();
        let cfg = unit_bins();
        let (e, _) = search_best_predicate(&ds, &sv, &cfg).unwrap();
        let oracle = exhaustive_best(&ds, &sv, &cfg, 2).unwrap().unwrap();
        assert_eq!(e.influence, oracle.influence());
        assert_eq!(e.influence, 9.0);
        assert_eq!(e.predicate.to_string(), "(city = 'Boston') & (30 <= temp < 31)");
        assert_eq!(e.coverage.count, 1);
        let sel = e.predicate.evaluate(&ds).unwrap();
        assert_eq!(likelihood_influence(&sv, &sel, cfg.strictness).unwrap(), e.influence);
        assert!(e.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(
            e.bf10.is_none(),
            "one selected row leaves no within-group variance estimate"
        );
    }

    #[test]
    fn equal_scores_stop_after_two_iterations() {
        let csv = "city,temp,score\nBoston,30,1\nBoston,31,1\nChicago,30,1\nNYC,50,1\n";
        let (ds, sv) = import_scores_from_column(read_csv(csv.as_bytes(), None).unwrap(), "score").unwrap();
        let (e, _) = search_best_predicate(&ds, &sv, &unit_bins()).unwrap();
        assert_eq!(e.trace, vec![1.0, 1.0]);
        assert_eq!(e.predicate.clause_count(), 1);
        // ties go to the smaller selection, then the key
        assert_eq!(e.coverage.count, 1);
        assert_eq!(e.predicate.to_string(), "(30.8 <= temp < 31.6)");
    }

    #[test]
    fn single_explanation_bound() {
        let p = synth::planted_disjoint_causes(3, 2000);
        let cfg = SearchConfig {
            max_explanations: 1,
            strictness: Strictness::new(0.5).unwrap(),
            ..SearchConfig::default()
        };
        let out = search_multiple(&p.dataset, &p.scores, &cfg).unwrap();
        let (best, _) = search_best_predicate(&p.dataset, &p.scores, &cfg).unwrap();
        assert_eq!(out.explanations, vec![best.clone()]);
        assert_eq!(out.combined.unwrap().predicate, best.predicate);
    }

    #[test]
    fn two_causes_become_a_disjunction() {
        let p = synth::planted_disjoint_causes(11, 4000);
        let cfg = SearchConfig {
            strictness: Strictness::new(0.5).unwrap(),
            ..SearchConfig::default()
        };
        let out = search_multiple(&p.dataset, &p.scores, &cfg).unwrap();
        assert_eq!(
            out.explanations.len(),
            2,
            "{:#?}",
            out.explanations
                .iter()
                .map(|e| e.predicate.to_string())
                .collect::<Vec<_>>()
        );
        let combined = out.combined.unwrap();
        assert_eq!(combined.predicate.terms().len(), 2);
        let sel = combined.predicate.evaluate(&p.dataset).unwrap();
        assert!(sel.intersection_count(&p.anomalies) as f64 >= 0.95 * p.anomalies.len() as f64);
        assert!(combined.trace.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let p = synth::planted_conjunction(5, 1500);
        let run = |w| {
            let cfg = SearchConfig {
                workers: Some(w),
                ..SearchConfig::default()
            };
            serde_json::to_string(&explain(&p.dataset, &p.scores, &cfg).unwrap()).unwrap()
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn rpi_on_constant_scores_returns_bases_only() {
        let csv = "city,temp,score\nBoston,30,1\nBoston,31,1\nChicago,30,1\nNYC,50,1\nNYC,55,1\nChicago,52,1\n";
        let (ds, sv) = import_scores_from_column(read_csv(csv.as_bytes(), None).unwrap(), "score").unwrap();
        let cfg = SearchConfig {
            strategy: Strategy::Bayes,
            binning: BinningSpec::with_bins(5),
            ..SearchConfig::default()
        };
        let out = rpi_search(&ds, &sv, &cfg).unwrap();
        assert!(!out.is_empty());
        for e in &out {
            assert_eq!(e.predicate.clause_count(), 1);
            assert_eq!(e.trace.len(), 1);
            assert_eq!(e.category, Some(Evidence::NoneOrBare));
            assert!(e.bf10.unwrap() < 1.0);
        }
    }

    #[test]
    fn rpi_ranks_by_evidence_and_deduplicates() {
        let p = synth::planted_conjunction(2, 2000);
        let cfg = SearchConfig {
            strategy: Strategy::Bayes,
            ..SearchConfig::default()
        };
        let out = rpi_search(&p.dataset, &p.scores, &cfg).unwrap();
        let keys: HashSet<String> = out.iter().map(|e| e.predicate.canonical_key()).collect();
        assert_eq!(keys.len(), out.len());
        assert!(out.windows(2).all(|w| w[0].log_bf10.unwrap() >= w[1].log_bf10.unwrap()));
        let top = out[0].predicate.evaluate(&p.dataset).unwrap();
        assert!(synth::jaccard(&top, &p.anomalies) > 0.9, "{}", out[0].predicate);
        assert_eq!(out[0].category, Some(Evidence::Decisive));
        for e in &out {
            assert!(e.trace.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn explanation_json_round_trip() {
        let (ds, sv) = t1();
        let out = explain(&ds, &sv, &unit_bins()).unwrap();
        let text = serde_json::to_string(&out).unwrap();
        let back: ExplainOutput = serde_json::from_str(&text).unwrap();
        assert_eq!(back, out);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let e = &v["explanations"][0];
        for field in [
            "predicate",
            "influence",
            "strictness",
            "bf10",
            "log_bf10",
            "category",
            "coverage",
            "mean_score_inside",
            "mean_score_outside",
            "trace",
            "strategy",
        ] {
            assert!(e.get(field).is_some(), "missing {field}");
        }
        assert_eq!(e["coverage"]["count"], 1);
    }

    #[test]
    fn target_features_never_appear() {
        let (ds, sv) = t1();
        let ds = ds.with_role("temp", Role::Target).unwrap();
        let out = explain(&ds, &sv, &unit_bins()).unwrap();
        for e in &out.explanations {
            assert!(e.predicate.features().iter().all(|f| *f == "city"));
        }
    }
}
