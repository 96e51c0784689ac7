//! Explaining anomalies in tabular data with predicates.
//!
//! Load a [`Dataset`], obtain per-row anomaly scores as a [`ScoreVector`],
//! and search for the predicates over the context features whose selected
//! rows carry the most anomaly.

pub mod bayes;
pub mod dataset;
mod error;
mod grammar;
pub mod insight;
mod jsonfloat;
pub mod predicate;
mod quadrature;
pub mod report;
pub mod scoring;
pub mod search;
pub mod selection;
pub mod synth;

pub use bayes::{
    classify_evidence, jzs_bayes_factor, jzs_bayes_factor_from_parts, BayesResult, Evidence, TwoSampleStat,
};
pub use dataset::{
    discretize, load_csv, read_csv, write_csv, BinTable, BinningSpec, Column, Dataset, FeatureKind, FeatureSchema,
    Role, SchemaHints,
};
pub use error::{Error, Result};
pub use insight::{
    pivot_view, recommend, render_sentence, score_histogram, subspace_scores, ChartSeries, ChartSpec, Direction,
    Histogram, PivotView, Recommendation, SubspaceOptions, SubspaceRow,
};
pub use predicate::{complement, disjoin, intersect, merge, Clause, ClauseBody, Conjunction, Interval, Predicate};
pub use report::{Bookmark, Report};
pub use scoring::{
    aggregate_influence, fit_gaussian, import_scores, likelihood_influence, score_points, Aggregate, GaussianModel,
    ScoreVector, Strictness,
};
pub use search::{
    explain, rpi_search, search_best_predicate, search_multiple, ExplainOutput, Explanation, SearchConfig, Strategy,
};
pub use selection::Selection;
