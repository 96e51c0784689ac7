//! Sessions, jobs and their snapshots on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use predex::insight::ChartSpec;
use predex::{read_csv, Dataset, Explanation, Predicate, SchemaHints, ScoreVector};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

use crate::error::{ApiError, ApiResult, ErrorBody};

/// Histogram colors, assigned in predicate creation order.
pub const PALETTE: [&str; 8] = ["orange", "blue", "green", "red", "purple", "brown", "pink", "gray"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Induced,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPredicate {
    pub id: String,
    pub label: String,
    /// Canonical text.
    pub text: String,
    pub color: String,
    pub hidden: bool,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredExplanation {
    pub id: String,
    pub job_id: String,
    /// Whether this is the disjunction of a job's explanations.
    pub combined: bool,
    pub explanation: Explanation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredBookmark {
    pub id: String,
    pub title: String,
    pub sentence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
}

/// One uploaded dataset and everything derived from it.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub name: String,
    pub csv: Arc<Vec<u8>>,
    pub hints: Option<SchemaHints>,
    pub targets: Vec<String>,
    pub dataset: Arc<Dataset>,
    pub scores: Option<Arc<ScoreVector>>,
    pub predicates: Vec<StoredPredicate>,
    pub explanations: Vec<StoredExplanation>,
    pub bookmarks: Vec<StoredBookmark>,
    pub active_job: Option<String>,
    counters: Counters,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Counters {
    predicate: u64,
    explanation: u64,
    bookmark: u64,
}

/// What is written to `session.json`; the CSV is stored beside it.
#[derive(Serialize, Deserialize)]
struct Snapshot {
    id: String,
    name: String,
    hints: Option<SchemaHints>,
    targets: Vec<String>,
    scores: Option<ScoreVector>,
    predicates: Vec<StoredPredicate>,
    explanations: Vec<StoredExplanation>,
    bookmarks: Vec<StoredBookmark>,
    counters: Counters,
}

impl Session {
    pub fn new(id: String, name: String, csv: Vec<u8>, hints: Option<SchemaHints>) -> ApiResult<Session> {
        let dataset = read_csv(csv.as_slice(), hints.as_ref())?;
        let targets = dataset
            .target_features()
            .map(|i| dataset.schema()[i].name.clone())
            .collect();
        Ok(Session {
            id,
            name,
            csv: Arc::new(csv),
            hints,
            targets,
            dataset: Arc::new(dataset),
            scores: None,
            predicates: Vec::new(),
            explanations: Vec::new(),
            bookmarks: Vec::new(),
            active_job: None,
            counters: Counters::default(),
        })
    }

    pub fn set_dataset(&mut self, dataset: Dataset) {
        self.targets = dataset
            .target_features()
            .map(|i| dataset.schema()[i].name.clone())
            .collect();
        self.dataset = Arc::new(dataset);
    }

    pub fn predicate(&self, id: &str) -> ApiResult<&StoredPredicate> {
        self.predicates
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| ApiError::not_found("predicate", id))
    }

    /// A stored predicate id, or predicate text.
    pub fn resolve_predicate(&self, reference: &str) -> ApiResult<Predicate> {
        match self.predicates.iter().find(|p| p.id == reference) {
            Some(p) => Ok(Predicate::parse(&p.text)?),
            None => Ok(Predicate::parse(reference)?),
        }
    }

    pub fn scores(&self) -> ApiResult<Arc<ScoreVector>> {
        self.scores
            .clone()
            .ok_or_else(|| ApiError::conflict("scores_required", format!("dataset `{}` has no scores yet", self.id)))
    }

    /// Parse, check against the dataset, and store a new predicate.
    pub fn add_predicate(&mut self, text: &str, label: Option<String>, source: Source) -> ApiResult<StoredPredicate> {
        let p = Predicate::parse(text)?;
        p.evaluate(&self.dataset)?;
        let canonical = p.to_string();
        if source == Source::Induced {
            if let Some(existing) = self.predicates.iter().find(|x| x.text == canonical) {
                return Ok(existing.clone());
            }
        }
        self.counters.predicate += 1;
        let n = self.counters.predicate;
        let stored = StoredPredicate {
            id: format!("p{n}"),
            label: label.unwrap_or_else(|| canonical.clone()),
            text: canonical,
            color: PALETTE[((n - 1) % PALETTE.len() as u64) as usize].to_string(),
            hidden: false,
            source,
        };
        self.predicates.push(stored.clone());
        Ok(stored)
    }

    pub fn add_explanation(&mut self, job_id: &str, explanation: Explanation, combined: bool) -> String {
        self.counters.explanation += 1;
        let id = format!("e{}", self.counters.explanation);
        self.explanations.push(StoredExplanation {
            id: id.clone(),
            job_id: job_id.to_string(),
            combined,
            explanation,
        });
        id
    }

    pub fn add_bookmark(&mut self, title: String, sentence: String, chart: Option<ChartSpec>) -> StoredBookmark {
        self.counters.bookmark += 1;
        let b = StoredBookmark {
            id: format!("b{}", self.counters.bookmark),
            title,
            sentence,
            chart,
        };
        self.bookmarks.push(b.clone());
        b
    }

    /// Write the snapshot atomically: temporary file, then rename.
    pub fn persist(&self, root: &Path) -> std::io::Result<()> {
        let dir = root.join(&self.id);
        std::fs::create_dir_all(&dir)?;
        let csv_path = dir.join("data.csv");
        if !csv_path.exists() {
            write_atomic(&csv_path, &self.csv)?;
        }
        let snap = Snapshot {
            id: self.id.clone(),
            name: self.name.clone(),
            hints: self.hints.clone(),
            targets: self.targets.clone(),
            scores: self.scores.as_deref().cloned(),
            predicates: self.predicates.clone(),
            explanations: self.explanations.clone(),
            bookmarks: self.bookmarks.clone(),
            counters: self.counters.clone(),
        };
        let json = serde_json::to_vec_pretty(&snap).map_err(std::io::Error::other)?;
        write_atomic(&dir.join("session.json"), &json)
    }

    fn load(dir: &Path) -> Result<Session, String> {
        let snap: Snapshot =
            serde_json::from_slice(&std::fs::read(dir.join("session.json")).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        let csv = std::fs::read(dir.join("data.csv")).map_err(|e| e.to_string())?;
        let mut dataset = read_csv(csv.as_slice(), snap.hints.as_ref()).map_err(|e| e.to_string())?;
        dataset = dataset.set_roles(&snap.targets).map_err(|e| e.to_string())?;
        Ok(Session {
            id: snap.id,
            name: snap.name,
            csv: Arc::new(csv),
            hints: snap.hints,
            targets: snap.targets,
            dataset: Arc::new(dataset),
            scores: snap.scores.map(Arc::new),
            predicates: snap.predicates,
            explanations: snap.explanations,
            bookmarks: snap.bookmarks,
            active_job: None,
            counters: snap.counters,
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobResult {
    pub explanation_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined_id: Option<String>,
    pub predicate_ids: Vec<String>,
    pub output: predex::ExplainOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub dataset_id: String,
    pub status: JobStatus,
    pub strategy: predex::Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<JobResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Default)]
pub struct Store {
    pub sessions: BTreeMap<String, Session>,
    pub jobs: BTreeMap<String, Job>,
    next_dataset: u64,
    next_job: u64,
}

impl Store {
    pub fn session(&self, id: &str) -> ApiResult<&Session> {
        self.sessions.get(id).ok_or_else(|| ApiError::not_found("dataset", id))
    }

    pub fn session_mut(&mut self, id: &str) -> ApiResult<&mut Session> {
        self.sessions
            .get_mut(id)
            .ok_or_else(|| ApiError::not_found("dataset", id))
    }

    pub fn next_dataset_id(&mut self) -> String {
        self.next_dataset += 1;
        format!("d{}", self.next_dataset)
    }

    pub fn next_job_id(&mut self) -> String {
        self.next_job += 1;
        format!("j{}", self.next_job)
    }

    /// Sessions found under `root`. Unreadable snapshots are skipped with a warning.
    pub fn load(root: &Path) -> std::io::Result<Store> {
        let mut store = Store::default();
        if !root.exists() {
            return Ok(store);
        }
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("session.json").exists())
            .collect();
        dirs.sort();
        for dir in dirs {
            match Session::load(&dir) {
                Ok(s) => {
                    if let Some(n) = s.id.strip_prefix('d').and_then(|n| n.parse::<u64>().ok()) {
                        store.next_dataset = store.next_dataset.max(n);
                    }
                    store.sessions.insert(s.id.clone(), s);
                }
                Err(e) => log::warn!("skipping snapshot {}: {e}", dir.display()),
            }
        }
        Ok(store)
    }
}

/// Shared service state.
pub struct AppState {
    pub data_dir: Option<PathBuf>,
    pub store: RwLock<Store>,
}

impl AppState {
    pub fn in_memory() -> Arc<AppState> {
        Arc::new(AppState {
            data_dir: None,
            store: RwLock::new(Store::default()),
        })
    }

    pub fn open(data_dir: impl Into<PathBuf>) -> std::io::Result<Arc<AppState>> {
        let data_dir = data_dir.into();
        std::fs::create_dir_all(&data_dir)?;
        let store = Store::load(&data_dir)?;
        Ok(Arc::new(AppState {
            data_dir: Some(data_dir),
            store: RwLock::new(store),
        }))
    }

    pub fn persist(&self, session: &Session) -> ApiResult<()> {
        if let Some(dir) = &self.data_dir {
            session
                .persist(dir)
                .map_err(|e| ApiError::internal(format!("could not write snapshot: {e}")))?;
        }
        Ok(())
    }
}
