//! Markdown and JSON reports of explanations and bookmarked evidence.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::insight::ChartSpec;
use crate::search::Explanation;

/// A saved piece of evidence: a sentence with the chart behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bookmark {
    pub title: String,
    pub sentence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub explanations: Vec<Explanation>,
    pub bookmarks: Vec<Bookmark>,
}

fn cell(x: Option<f64>) -> String {
    match x {
        None => "n/a".into(),
        Some(v) if v.is_nan() => "n/a".into(),
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".into(),
        Some(v) if v != 0.0 && (v.abs() >= 1e6 || v.abs() < 1e-3) => format!("{v:.3e}"),
        Some(v) => format!("{v:.4}"),
    }
}

fn escape_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

impl Report {
    /// Bookmarks keep their given order.
    pub fn new(explanations: Vec<Explanation>, bookmarks: Vec<Bookmark>) -> Result<Report> {
        if explanations.is_empty() {
            return Err(Error::NoExplanation);
        }
        Ok(Report {
            explanations,
            bookmarks,
        })
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Anomaly explanation report\n\n## Explanations\n\n");
        s.push_str(
            "| # | Predicate | Influence | BF10 | Evidence | Coverage | Mean score inside | Mean score outside |\n",
        );
        s.push_str("|---|---|---|---|---|---|---|---|\n");
        for (i, e) in self.explanations.iter().enumerate() {
            let _ = writeln!(
                s,
                "| {} | `{}` | {} | {} | {} | {} ({:.1}%) | {} | {} |",
                i + 1,
                escape_cell(&e.predicate.to_string()),
                cell(Some(e.influence)),
                cell(e.bf10),
                e.category.map_or("n/a", |c| c.as_str()),
                e.coverage.count,
                100.0 * e.coverage.fraction,
                cell(Some(e.mean_score_inside)),
                cell(e.mean_score_outside),
            );
        }
        if !self.bookmarks.is_empty() {
            s.push_str("\n## Evidence\n");
            for (i, b) in self.bookmarks.iter().enumerate() {
                let _ = write!(s, "\n### {}. {}\n\n{}\n", i + 1, b.title, b.sentence);
                if let Some(chart) = &b.chart {
                    let json = serde_json::to_string_pretty(chart).expect("chart serializes");
                    let _ = write!(s, "\n```json\n{json}\n```\n");
                }
            }
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Write `report.md` and `report.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.md"), self.to_markdown())?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::read_csv;
    use crate::insight::ChartSeries;
    use crate::predicate::Predicate;
    use crate::scoring::{import_scores_from_column, Strictness};
    use crate::search::Strategy;

    fn explanation() -> Explanation {
        let csv =
            "city,temp,score\nBoston,30,9.0\nBoston,31,8.0\nChicago,30,7.0\nNYC,50,1.0\nNYC,55,1.0\nChicago,52,1.0\n";
        let (ds, sv) = import_scores_from_column(read_csv(csv.as_bytes(), None).unwrap(), "score").unwrap();
        let p = Predicate::parse("city = 'Boston' OR temp < 31").unwrap();
        let sel = p.evaluate(&ds).unwrap();
        Explanation::new(p, &sel, &sv, Strictness::default(), vec![1.0], Strategy::Influence).unwrap()
    }

    fn bookmarks() -> Vec<Bookmark> {
        vec![
            Bookmark {
                title: "second".into(),
                sentence: "Average b is low".into(),
                chart: None,
            },
            Bookmark {
                title: "first".into(),
                sentence: "Average a is high".into(),
                chart: Some(ChartSpec::Bar {
                    categories: vec!["x".into()],
                    series: vec![ChartSeries {
                        label: "mean a".into(),
                        values: vec![1.5],
                    }],
                    highlighted: vec![],
                }),
            },
        ]
    }

    #[test]
    fn markdown_lists_explanations_and_bookmarks_in_order() {
        let r = Report::new(vec![explanation()], bookmarks()).unwrap();
        let md = r.to_markdown();
        assert!(
            md.contains("| 1 | `(city = 'Boston') OR (temp < 31)` | 8.0000 |"),
            "{md}"
        );
        assert!(md.contains("| 3 (50.0%) |"));
        let second = md.find("### 1. second").unwrap();
        let first = md.find("### 2. first").unwrap();
        assert!(second < first);
        assert!(md.contains("```json"));
        assert_eq!(md, Report::new(vec![explanation()], bookmarks()).unwrap().to_markdown());
    }

    #[test]
    fn json_round_trips() {
        let r = Report::new(vec![explanation()], bookmarks()).unwrap();
        let back: Report = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.bookmarks, r.bookmarks);
        assert_eq!(back.explanations[0].predicate, r.explanations[0].predicate);
    }

    #[test]
    fn empty_report_is_rejected() {
        assert!(matches!(Report::new(vec![], vec![]), Err(Error::NoExplanation)));
    }

    #[test]
    fn writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        Report::new(vec![explanation()], vec![])
            .unwrap()
            .write_to(dir.path())
            .unwrap();
        assert!(dir.path().join("report.md").exists());
        assert!(dir.path().join("report.json").exists());
    }

    #[test]
    fn cell_formats() {
        assert_eq!(cell(None), "n/a");
        assert_eq!(cell(Some(f64::INFINITY)), "inf");
        assert_eq!(cell(Some(2.5)), "2.5000");
        assert_eq!(cell(Some(1.5e8)), "1.500e8");
        assert_eq!(escape_cell("a|b"), "a\\|b");
    }
}
