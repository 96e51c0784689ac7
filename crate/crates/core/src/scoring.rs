//! Anomaly scores and the influence of a selection on them.
//!
//! Scores are treated as proportional to a negative log likelihood under
//! some model of normal behavior: higher means more anomalous. They come
//! either from an external detector ([`import_scores`]) or from the
//! built-in multivariate Gaussian ([`fit_gaussian`], [`score_points`]).

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset, FeatureKind, Role};
use crate::error::{Error, Result};
use crate::selection::Selection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Imported,
    GaussianNll,
}

/// One finite anomaly score per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    scores: Vec<f64>,
    pub provenance: Provenance,
    /// Rows whose score was imputed because a target value was missing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<usize>,
    /// Dataset column the scores were read from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_column: Option<String>,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, provenance: Provenance) -> Result<ScoreVector> {
        if let Some(row) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Import {
                row,
                message: format!("score {} is not finite", scores[row]),
            });
        }
        Ok(ScoreVector {
            scores,
            provenance,
            flagged: Vec::new(),
            source_column: None,
        })
    }

    pub fn imported(scores: Vec<f64>) -> Result<ScoreVector> {
        ScoreVector::new(scores, Provenance::Imported)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, row: usize) -> f64 {
        self.scores[row]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }

    pub fn check_rows(&self, ds: &Dataset) -> Result<()> {
        if self.len() != ds.n_rows() {
            return Err(Error::LengthMismatch {
                expected: ds.n_rows(),
                actual: self.len(),
            });
        }
        Ok(())
    }

    pub fn has_negative(&self) -> bool {
        self.scores.iter().any(|&s| s < 0.0)
    }

    /// Shift so the minimum score is zero.
    pub fn min_shifted(&self) -> ScoreVector {
        let min = self.scores.iter().copied().fold(f64::INFINITY, f64::min);
        let mut out = self.clone();
        if min.is_finite() {
            out.scores.iter_mut().for_each(|s| *s -= min);
        }
        out
    }

    /// Negate, for detectors where lower means more anomalous.
    pub fn negated(&self) -> ScoreVector {
        let mut out = self.clone();
        out.scores.iter_mut().for_each(|s| *s = -*s);
        out
    }

    pub fn sum_over(&self, sel: &Selection) -> f64 {
        sel.rows().map(|r| self.scores[r]).sum()
    }

    pub fn mean_over(&self, sel: &Selection) -> Option<f64> {
        (!sel.is_empty()).then(|| self.sum_over(sel) / sel.len() as f64)
    }

    /// Row of `sel` with the highest score, lowest row id on ties.
    pub fn argmax_over(&self, sel: &Selection) -> Option<usize> {
        sel.rows().fold(None, |best: Option<usize>, r| match best {
            Some(b) if self.scores[b] >= self.scores[r] => Some(b),
            _ => Some(r),
        })
    }
}

// ---------------------------------------------------------------------------
// Influence

/// Exponent on the selection size in the influence denominator, in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Strictness(f64);

impl Strictness {
    pub fn new(c: f64) -> Result<Strictness> {
        if c > 0.0 && c <= 1.0 {
            Ok(Strictness(c))
        } else {
            Err(Error::Config(format!("strictness must lie in (0, 1], got {c}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Strictness {
    fn default() -> Self {
        Strictness(1.0)
    }
}

impl TryFrom<f64> for Strictness {
    type Error = Error;

    fn try_from(c: f64) -> Result<Strictness> {
        Strictness::new(c)
    }
}

impl From<Strictness> for f64 {
    fn from(c: Strictness) -> f64 {
        c.0
    }
}

/// Sum of the selected scores divided by `|sel|^c`.
pub fn likelihood_influence(sv: &ScoreVector, sel: &Selection, c: Strictness) -> Result<f64> {
    if sel.is_empty() {
        return Err(Error::UndefinedInfluence("selection is empty".into()));
    }
    Ok(influence_from_sum(sv.sum_over(sel), sel.len(), c))
}

pub(crate) fn influence_from_sum(sum: f64, count: usize, c: Strictness) -> f64 {
    if c.0 == 1.0 {
        sum / count as f64
    } else {
        sum / (count as f64).powf(c.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
}

/// Change in `agg` from deleting the selection, per deleted row.
pub fn aggregate_influence(values: &[f64], sel: &Selection, agg: Aggregate) -> Result<f64> {
    if sel.is_empty() {
        return Err(Error::UndefinedInfluence("selection is empty".into()));
    }
    if sel.len() >= values.len() {
        return Err(Error::UndefinedInfluence(
            "selection covers every row, nothing remains to aggregate".into(),
        ));
    }
    match agg {
        Aggregate::Mean => {
            let total: f64 = values.iter().sum();
            let removed: f64 = sel.rows().map(|r| values[r]).sum();
            let all = total / values.len() as f64;
            let rest = (total - removed) / (values.len() - sel.len()) as f64;
            Ok((all - rest) / sel.len() as f64)
        }
    }
}

// ---------------------------------------------------------------------------
// Gaussian reference scorer

/// Multivariate normal fitted to the target features.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    features: Vec<String>,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    epsilon: f64,
    cholesky: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl GaussianModel {
    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    /// Squared Mahalanobis distance from the mean.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let solved = self.cholesky.solve(&diff);
        diff.dot(&solved)
    }

    /// Negative log density at `x`.
    pub fn nll(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        0.5 * self.mahalanobis_sq(x) + 0.5 * self.log_det + 0.5 * d * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }
}

fn numeric_targets(ds: &Dataset) -> Vec<usize> {
    ds.target_features()
        .filter(|&i| ds.schema()[i].kind == FeatureKind::Numeric)
        .collect()
}

fn row_values(columns: &[&Column], row: usize) -> Option<Vec<f64>> {
    columns.iter().map(|c| c.ordered_value(row)).collect()
}

/// Fit mean and covariance over the numeric target features.
pub fn fit_gaussian(ds: &Dataset) -> Result<GaussianModel> {
    let features = numeric_targets(ds);
    if features.is_empty() {
        return Err(Error::Config("no numeric target features to fit".into()));
    }
    fit_on(ds, &features)
}

/// Fit on an explicit list of numeric or datetime features, regardless of role.
pub fn fit_on(ds: &Dataset, features: &[usize]) -> Result<GaussianModel> {
    let columns: Vec<&Column> = features.iter().map(|&i| ds.column(i)).collect();
    let rows: Vec<Vec<f64>> = (0..ds.n_rows()).filter_map(|r| row_values(&columns, r)).collect();
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 rows with complete target values, found {}",
            rows.len()
        )));
    }
    let d = features.len();
    let n = rows.len() as f64;
    let mut mean = DVector::zeros(d);
    for r in &rows {
        mean += DVector::from_column_slice(r);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(d, d);
    for r in &rows {
        let diff = DVector::from_column_slice(r) - &mean;
        cov += &diff * diff.transpose();
    }
    cov /= n - 1.0;
    let trace = cov.trace();
    // Constant targets give a zero trace; fall back to an absolute ridge.
    let epsilon = if trace > 0.0 { 1e-6 * trace / d as f64 } else { 1e-6 };
    let mut regularized = cov.clone();
    for i in 0..d {
        regularized[(i, i)] += epsilon;
    }
    let cholesky = Cholesky::new(regularized.clone())
        .ok_or_else(|| Error::InsufficientData("covariance is not positive definite".into()))?;
    let log_det = 2.0 * cholesky.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Ok(GaussianModel {
        features: features.iter().map(|&i| ds.schema()[i].name.clone()).collect(),
        mean,
        covariance: regularized,
        epsilon,
        cholesky,
        log_det,
    })
}

/// Negative log likelihood of every row. Rows with a missing target value
/// get the maximum observed score and are flagged.
pub fn score_points(model: &GaussianModel, ds: &Dataset) -> Result<ScoreVector> {
    let columns = model
        .features
        .iter()
        .map(|f| ds.column_by_name(f))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<Option<f64>> = (0..ds.n_rows())
        .map(|r| row_values(&columns, r).map(|x| model.nll(&x)))
        .collect();
    let max = raw.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InsufficientData("no row has complete target values".into()));
    }
    let flagged: Vec<usize> = raw
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_none())
        .map(|(i, _)| i)
        .collect();
    let mut sv = ScoreVector::new(
        raw.into_iter().map(|s| s.unwrap_or(max)).collect(),
        Provenance::GaussianNll,
    )?;
    sv.flagged = flagged;
    Ok(sv)
}

// ---------------------------------------------------------------------------
// Import

/// Use a numeric column as the score; the column becomes a target feature
/// so explanations never mention it.
pub fn import_scores_from_column(ds: Dataset, column: &str) -> Result<(Dataset, ScoreVector)> {
    let col = ds
        .column_by_name(column)
        .map_err(|_| Error::Schema(format!("unknown score column `{column}`")))?;
    let mut scores = Vec::with_capacity(ds.n_rows());
    for row in 0..ds.n_rows() {
        match col {
            Column::Numeric(v) => match v[row] {
                Some(x) => scores.push(x),
                None => {
                    return Err(Error::Import {
                        row,
                        message: format!("missing score in column `{column}`"),
                    })
                }
            },
            _ => {
                return Err(Error::Import {
                    row,
                    message: format!("score column `{column}` is not numeric"),
                })
            }
        }
    }
    let mut sv = ScoreVector::imported(scores)?;
    sv.source_column = Some(column.to_string());
    let ds = ds.with_role(column, Role::Target)?;
    Ok((ds, sv))
}

/// Parse a score side file: one decimal per line, or CSV with a
/// `row_id,score` header. `expected_rows` must match exactly.
pub fn parse_scores(text: &str, expected_rows: usize) -> Result<ScoreVector> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();
    let keyed = lines
        .peek()
        .is_some_and(|(_, l)| l.trim().eq_ignore_ascii_case("row_id,score"));
    let scores = if keyed {
        lines.next();
        let mut slots: Vec<Option<f64>> = vec![None; expected_rows];
        for (line_no, line) in lines {
            let (id, value) = line.split_once(',').ok_or_else(|| Error::Import {
                row: line_no,
                message: "expected `row_id,score`".into(),
            })?;
            let id: usize = id.trim().parse().map_err(|_| Error::Import {
                row: line_no,
                message: format!("invalid row id `{}`", id.trim()),
            })?;
            let value = parse_score(value, id)?;
            match slots.get_mut(id) {
                Some(slot @ None) => *slot = Some(value),
                Some(Some(_)) => {
                    return Err(Error::Import {
                        row: id,
                        message: "duplicate row id".into(),
                    })
                }
                None => {
                    return Err(Error::Import {
                        row: id,
                        message: format!("row id beyond the {expected_rows} dataset rows"),
                    })
                }
            }
        }
        let present = slots.iter().filter(|s| s.is_some()).count();
        if present != expected_rows {
            return Err(Error::LengthMismatch {
                expected: expected_rows,
                actual: present,
            });
        }
        slots.into_iter().map(Option::unwrap).collect()
    } else {
        let scores = lines
            .enumerate()
            .map(|(row, (_, l))| parse_score(l, row))
            .collect::<Result<Vec<f64>>>()?;
        if scores.len() != expected_rows {
            return Err(Error::LengthMismatch {
                expected: expected_rows,
                actual: scores.len(),
            });
        }
        scores
    };
    ScoreVector::imported(scores)
}

fn parse_score(text: &str, row: usize) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| Error::Import {
        row,
        message: format!("`{}` is not a number", text.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Import {
            row,
            message: format!("score `{}` is not finite", text.trim()),
        });
    }
    Ok(v)
}

/// Read a score side file. With `higher_is_anomalous == false` the scores
/// are negated so the engine's orientation holds.
pub fn import_scores(path: impl AsRef<Path>, ds: &Dataset, higher_is_anomalous: bool) -> Result<ScoreVector> {
    let sv = parse_scores(&std::fs::read_to_string(path)?, ds.n_rows())?;
    Ok(if higher_is_anomalous { sv } else { sv.negated() })
}

/// CSV text with a `row_id,score` header.
pub fn write_scores(sv: &ScoreVector) -> String {
    let mut out = String::from("row_id,score\n");
    for (i, s) in sv.as_slice().iter().enumerate() {
        out.push_str(&format!("{i},{s}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Column;

    fn t1_scores() -> ScoreVector {
        ScoreVector::imported(vec![9.0, 8.0, 7.0, 1.0, 1.0, 1.0]).unwrap()
    }

    fn one_dim(values: &[f64]) -> Dataset {
        Dataset::from_columns(vec![(
            "x".into(),
            Column::Numeric(values.iter().copied().map(Some).collect()),
        )])
        .unwrap()
        .set_roles(&["x"])
        .unwrap()
    }

    #[test]
    fn influence_on_fixture() {
        let sv = t1_scores();
        let c1 = Strictness::default();
        let half = Strictness::new(0.5).unwrap();
        let boston = Selection::from_rows(6, [0, 1]);
        assert!((likelihood_influence(&sv, &boston, c1).unwrap() - 8.5).abs() < 1e-12);
        let v = likelihood_influence(&sv, &boston, half).unwrap();
        assert!((v - 17.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((v - 12.0208).abs() < 1e-4);
        let rest = Selection::from_rows(6, [2, 3, 4, 5]);
        assert!((likelihood_influence(&sv, &rest, c1).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn empty_selection_has_no_influence() {
        let sv = t1_scores();
        assert!(matches!(
            likelihood_influence(&sv, &Selection::empty(6), Strictness::default()),
            Err(Error::UndefinedInfluence(_))
        ));
    }

    #[test]
    fn strictness_bounds() {
        assert!(Strictness::new(0.0).is_err());
        assert!(Strictness::new(1.5).is_err());
        assert!(Strictness::new(1.0).is_ok());
        assert!(serde_json::from_str::<Strictness>("2.0").is_err());
    }

    #[test]
    fn aggregate_influence_of_mean() {
        let values = [1.0, 1.0, 1.0, 9.0];
        let sel = Selection::from_rows(4, [3]);
        assert!((aggregate_influence(&values, &sel, Aggregate::Mean).unwrap() - 2.0).abs() < 1e-12);
        // removing a value equal to the mean: mean(rest) = (12 - 3) / 3 = 3
        let values = [1.0, 3.0, 5.0, 3.0];
        let sel = Selection::from_rows(4, [1]);
        assert_eq!(aggregate_influence(&values, &sel, Aggregate::Mean).unwrap(), 0.0);
        assert!(aggregate_influence(&values, &Selection::all(4), Aggregate::Mean).is_err());
    }

    #[test]
    fn gaussian_fit_mean_and_ordering() {
        let ds = one_dim(&[0.0, 0.0, 0.0, 10.0]);
        let model = fit_gaussian(&ds).unwrap();
        assert!((model.mean()[0] - 2.5).abs() < 1e-12);
        // sample variance 25, ridge 1e-6 * 25
        assert!((model.covariance()[(0, 0)] - 25.0 * (1.0 + 1e-6)).abs() < 1e-9);
        let sv = score_points(&model, &ds).unwrap();
        assert!(sv.get(3) > sv.get(0));
        // direct evaluation: 0.5 * 7.5^2 / var + 0.5 ln var + 0.5 ln 2pi
        let var: f64 = 25.0 * (1.0 + 1e-6);
        let expected = 0.5 * 56.25 / var + 0.5 * var.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((sv.get(3) - expected).abs() < 1e-12);
        // the mean itself scores lowest
        assert!(model.nll(&[2.5]) < sv.get(0));
    }

    #[test]
    fn gaussian_constant_column_is_regularized() {
        let ds = one_dim(&[122.153; 5]);
        let model = fit_gaussian(&ds).unwrap();
        let sv = score_points(&model, &ds).unwrap();
        assert!(sv.as_slice().iter().all(|s| s.is_finite()));
    }

    #[test]
    fn gaussian_errors() {
        let ds = one_dim(&[1.0]);
        assert!(matches!(fit_gaussian(&ds), Err(Error::InsufficientData(_))));
        let ds = one_dim(&[1.0, 2.0]).set_roles::<&str>(&[]).unwrap();
        assert!(matches!(fit_gaussian(&ds), Err(Error::Config(_))));
    }

    #[test]
    fn missing_targets_get_max_score() {
        let ds = Dataset::from_columns(vec![(
            "x".into(),
            Column::Numeric(vec![Some(0.0), Some(1.0), None, Some(5.0)]),
        )])
        .unwrap()
        .set_roles(&["x"])
        .unwrap();
        let sv = score_points(&fit_gaussian(&ds).unwrap(), &ds).unwrap();
        assert_eq!(sv.flagged, vec![2]);
        assert_eq!(sv.get(2), sv.get(3));
    }

    #[test]
    fn parse_plain_and_keyed_scores() {
        let sv = parse_scores("1.5\n2\n-3\n", 3).unwrap();
        assert_eq!(sv.as_slice(), &[1.5, 2.0, -3.0]);
        let sv = parse_scores("row_id,score\n2,0.5\n0,1\n1,2\n", 3).unwrap();
        assert_eq!(sv.as_slice(), &[1.0, 2.0, 0.5]);
        assert!(matches!(
            parse_scores("1\n2\n", 3),
            Err(Error::LengthMismatch { expected: 3, actual: 2 })
        ));
        assert!(matches!(
            parse_scores("1\nNaN\n3\n", 3),
            Err(Error::Import { row: 1, .. })
        ));
        assert!(matches!(
            parse_scores("1\nabc\n3\n", 3),
            Err(Error::Import { row: 1, .. })
        ));
        let round = parse_scores(&write_scores(&sv), 3).unwrap();
        assert_eq!(round.as_slice(), sv.as_slice());
    }

    #[test]
    fn column_import_marks_target() {
        let ds = Dataset::from_columns(vec![
            ("c".into(), Column::categorical(&[Some("a"), Some("b")])),
            ("s".into(), Column::Numeric(vec![Some(1.0), Some(2.0)])),
        ])
        .unwrap();
        let (ds, sv) = import_scores_from_column(ds, "s").unwrap();
        assert_eq!(sv.as_slice(), &[1.0, 2.0]);
        assert_eq!(ds.feature("s").unwrap().role, Role::Target);
        assert_eq!(ds.context_features().count(), 1);
    }

    #[test]
    fn orientation_helpers() {
        let sv = ScoreVector::imported(vec![-2.0, 0.0, 3.0]).unwrap();
        assert!(sv.has_negative());
        assert_eq!(sv.min_shifted().as_slice(), &[0.0, 2.0, 5.0]);
        assert_eq!(sv.negated().as_slice(), &[2.0, 0.0, -3.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rank(scores: &[f64], row: usize) -> usize {
            scores.iter().take(scores.len()).filter(|&&s| s > scores[row]).count()
        }

        proptest! {
            #[test]
            fn duplicating_a_row_never_raises_its_rank(
                values in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 4..30),
                pick in any::<proptest::sample::Index>(),
                two_d in any::<bool>(),
            ) {
                let n = values.len();
                let row = pick.index(n);
                let build = |vals: &[(f64, f64)]| {
                    let mut cols = vec![(
                        "x".to_string(),
                        Column::Numeric(vals.iter().map(|v| Some(v.0)).collect()),
                    )];
                    let mut targets = vec!["x"];
                    if two_d {
                        cols.push(("y".to_string(), Column::Numeric(vals.iter().map(|v| Some(v.1)).collect())));
                        targets.push("y");
                    }
                    Dataset::from_columns(cols).unwrap().set_roles(&targets).unwrap()
                };
                let ds = build(&values);
                let before = score_points(&fit_gaussian(&ds).unwrap(), &ds).unwrap();
                let mut dup = values.clone();
                dup.push(values[row]);
                let ds2 = build(&dup);
                let after = score_points(&fit_gaussian(&ds2).unwrap(), &ds2).unwrap();
                // rank among the original rows only
                let after_orig = &after.as_slice()[..n];
                prop_assert!(rank(after_orig, row) >= rank(before.as_slice(), row));
            }
        }
    }
}
