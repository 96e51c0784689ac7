use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use predex::bayes::selection_bayes;
use predex::insight::{self, DEFAULT_HISTOGRAM_BINS, DEFAULT_PIVOT_BINS};
use predex::scoring::{import_scores_from_column, parse_scores};
use predex::search::Coverage;
use predex::{
    complement, fit_gaussian, likelihood_influence, score_points, BayesResult, BinningSpec, ChartSpec, Dataset,
    Explanation, FeatureSchema, Histogram, Report, SchemaHints, ScoreVector, SearchConfig, Selection, Strategy,
    Strictness, SubspaceOptions,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ApiError, ApiResult};
use crate::state::{AppState, Job, JobResult, JobStatus, Session, Source, Store, StoredBookmark, StoredPredicate};

/// Influence searches on fewer rows than this may answer synchronously.
pub const SYNC_ROW_LIMIT: usize = 10_000;
/// How long a synchronous search may run before the job is returned instead.
pub const SYNC_BUDGET: Duration = Duration::from_secs(10);
const BODY_LIMIT: usize = 512 * 1024 * 1024;

type AppStateRef = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/schema", get(schema))
        .route("/datasets", post(create_dataset).get(list_datasets))
        .route("/datasets/{id}", get(get_dataset))
        .route("/datasets/{id}/scores", post(set_scores))
        .route("/datasets/{id}/explain", post(start_explain))
        .route("/datasets/{id}/explanations", get(list_explanations))
        .route("/datasets/{id}/predicates", get(list_predicates).post(create_predicate))
        .route(
            "/datasets/{id}/predicates/{pid}",
            get(get_predicate).patch(update_predicate).delete(delete_predicate),
        )
        .route("/datasets/{id}/evaluate", post(evaluate))
        .route("/datasets/{id}/histogram", get(histogram))
        .route("/datasets/{id}/pivot", get(pivot))
        .route("/datasets/{id}/recommendations", get(recommendations))
        .route("/datasets/{id}/subspaces", get(subspaces))
        .route("/datasets/{id}/bookmarks", get(list_bookmarks).post(create_bookmark))
        .route("/datasets/{id}/bookmarks/{bid}", axum::routing::delete(delete_bookmark))
        .route("/datasets/{id}/report", post(report))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/result", get(job_result))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// A JSON body; malformed or empty bodies are 422 with the usual error shape.
fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError::unprocessable("invalid_request", "request body is empty"));
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::unprocessable("invalid_request", e.to_string()))
}

/// Run CPU-bound work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn multipart_fields(mut mp: Multipart) -> ApiResult<BTreeMap<String, (Option<String>, Bytes)>> {
    let mut fields = BTreeMap::new();
    while let Some(field) = mp
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let file_name = field.file_name().map(str::to_string);
        let bytes = field.bytes().await.map_err(|e| ApiError::bad_request(e.to_string()))?;
        fields.insert(name, (file_name, bytes));
    }
    Ok(fields)
}

fn field_text(fields: &BTreeMap<String, (Option<String>, Bytes)>, name: &str) -> ApiResult<Option<String>> {
    match fields.get(name) {
        None => Ok(None),
        Some((_, b)) => String::from_utf8(b.to_vec())
            .map(Some)
            .map_err(|_| ApiError::unprocessable("invalid_request", format!("field `{name}` is not UTF-8"))),
    }
}

fn is_multipart(req: &Request) -> bool {
    req.headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"))
}

// ---------------------------------------------------------------------------
// Schema

async fn schema() -> Json<Value> {
    Json(crate::schema::document())
}

// ---------------------------------------------------------------------------
// Datasets

#[derive(Debug, Serialize)]
struct DatasetSummary {
    dataset_id: String,
    name: String,
    rows: usize,
    features: Vec<FeatureSchema>,
    targets: Vec<String>,
    scores: Option<ScoresSummary>,
    predicates: usize,
    explanations: usize,
    active_job: Option<String>,
}

#[derive(Debug, Serialize)]
struct ScoresSummary {
    provenance: predex::scoring::Provenance,
    source_column: Option<String>,
    flagged: usize,
    min: f64,
    max: f64,
    mean: f64,
}

fn summarize_scores(sv: &ScoreVector) -> ScoresSummary {
    let s = sv.as_slice();
    ScoresSummary {
        provenance: sv.provenance,
        source_column: sv.source_column.clone(),
        flagged: sv.flagged.len(),
        min: s.iter().copied().fold(f64::INFINITY, f64::min),
        max: s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: s.iter().sum::<f64>() / s.len().max(1) as f64,
    }
}

fn summarize(s: &Session) -> DatasetSummary {
    DatasetSummary {
        dataset_id: s.id.clone(),
        name: s.name.clone(),
        rows: s.dataset.n_rows(),
        features: s.dataset.schema().to_vec(),
        targets: s.targets.clone(),
        scores: s.scores.as_deref().map(summarize_scores),
        predicates: s.predicates.len(),
        explanations: s.explanations.len(),
        active_job: s.active_job.clone(),
    }
}

/// Targets as a JSON array or a comma-separated list.
fn parse_targets(text: &str) -> ApiResult<Vec<String>> {
    let text = text.trim();
    if text.starts_with('[') {
        return serde_json::from_str(text).map_err(|e| ApiError::unprocessable("invalid_request", e.to_string()));
    }
    Ok(text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect())
}

async fn create_dataset(State(state): AppStateRef, mp: Multipart) -> ApiResult<(StatusCode, Json<DatasetSummary>)> {
    let fields = multipart_fields(mp).await?;
    let (file_name, csv) = fields
        .get("file")
        .cloned()
        .ok_or_else(|| ApiError::unprocessable("invalid_request", "multipart field `file` is required"))?;
    let hints = field_text(&fields, "hints")?
        .filter(|t| !t.trim().is_empty())
        .map(|t| SchemaHints::from_json(&t))
        .transpose()?;
    let targets = field_text(&fields, "targets")?.map(|t| parse_targets(&t)).transpose()?;
    let name = field_text(&fields, "name")?
        .or(file_name)
        .unwrap_or_else(|| "dataset".to_string());

    let mut session = blocking(move || {
        let mut s = Session::new(String::new(), name, csv.to_vec(), hints)?;
        if let Some(t) = targets {
            let ds = (*s.dataset).clone().set_roles(&t)?;
            s.set_dataset(ds);
        }
        Ok(s)
    })
    .await?;

    let mut store = state.store.write().await;
    session.id = store.next_dataset_id();
    state.persist(&session)?;
    let summary = summarize(&session);
    store.sessions.insert(session.id.clone(), session);
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_datasets(State(state): AppStateRef) -> Json<Vec<DatasetSummary>> {
    let store = state.store.read().await;
    Json(store.sessions.values().map(summarize).collect())
}

async fn get_dataset(State(state): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<DatasetSummary>> {
    let store = state.store.read().await;
    Ok(Json(summarize(store.session(&id)?)))
}

// ---------------------------------------------------------------------------
// Scores

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScoresRequest {
    Model {
        model: String,
        #[serde(default)]
        targets: Option<Vec<String>>,
    },
    Column {
        column: String,
    },
    Values {
        scores: Vec<f64>,
        #[serde(default = "yes")]
        higher_is_anomalous: bool,
    },
}

fn yes() -> bool {
    true
}

fn compute_scores(ds: &Dataset, req: ScoresRequest) -> ApiResult<(Option<Dataset>, ScoreVector)> {
    match req {
        ScoresRequest::Model { model, targets } => {
            if model != "gaussian" {
                return Err(ApiError::unprocessable(
                    "invalid_request",
                    format!("unknown model `{model}`, expected `gaussian`"),
                ));
            }
            match targets {
                Some(t) => {
                    let ds = ds.clone().set_roles(&t)?;
                    let sv = score_points(&fit_gaussian(&ds)?, &ds)?;
                    Ok((Some(ds), sv))
                }
                None => Ok((None, score_points(&fit_gaussian(ds)?, ds)?)),
            }
        }
        ScoresRequest::Column { column } => {
            let (ds, sv) = import_scores_from_column(ds.clone(), &column)?;
            Ok((Some(ds), sv))
        }
        ScoresRequest::Values {
            scores,
            higher_is_anomalous,
        } => {
            let sv = ScoreVector::imported(scores)?;
            sv.check_rows(ds)?;
            Ok((None, if higher_is_anomalous { sv } else { sv.negated() }))
        }
    }
}

fn parse_flag(text: &str) -> ApiResult<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "" | "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(ApiError::unprocessable(
            "invalid_request",
            format!("`{other}` is not a boolean"),
        )),
    }
}

/// Multipart with a score side file, or a JSON body naming a model, a
/// column, or literal scores.
async fn set_scores(
    State(state): AppStateRef,
    Path(id): Path<String>,
    req: Request,
) -> ApiResult<Json<DatasetSummary>> {
    let ds = state.store.read().await.session(&id)?.dataset.clone();
    let computed = if is_multipart(&req) {
        let mp = Multipart::from_request(req, &())
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        let fields = multipart_fields(mp).await?;
        let text = field_text(&fields, "file")?
            .ok_or_else(|| ApiError::unprocessable("invalid_request", "multipart field `file` is required"))?;
        let higher = field_text(&fields, "higher_is_anomalous")?
            .map(|t| parse_flag(&t))
            .transpose()?
            .unwrap_or(true);
        blocking(move || {
            let sv = parse_scores(&text, ds.n_rows())?;
            Ok((None, if higher { sv } else { sv.negated() }))
        })
        .await?
    } else {
        let bytes = Bytes::from_request(req, &())
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        let body: ScoresRequest = parse_body(&bytes)?;
        blocking(move || compute_scores(&ds, body)).await?
    };

    let mut store = state.store.write().await;
    let session = store.session_mut(&id)?;
    let (new_ds, sv) = computed;
    if let Some(d) = new_ds {
        session.set_dataset(d);
    }
    session.scores = Some(Arc::new(sv));
    state.persist(session)?;
    Ok(Json(summarize(session)))
}

// ---------------------------------------------------------------------------
// Explain jobs

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExplainRequest {
    strategy: Option<Strategy>,
    strictness: Option<f64>,
    max_explanations: Option<usize>,
    max_iterations: Option<usize>,
    bins: Option<usize>,
    user_points: Option<Vec<usize>>,
    workers: Option<usize>,
    #[serde(rename = "async")]
    run_async: bool,
}

impl ExplainRequest {
    fn config(&self) -> ApiResult<SearchConfig> {
        let mut cfg = SearchConfig::default();
        if let Some(s) = self.strategy {
            cfg.strategy = s;
        }
        if let Some(c) = self.strictness {
            cfg.strictness = Strictness::new(c)?;
        }
        if let Some(k) = self.max_explanations {
            cfg.max_explanations = k;
        }
        if let Some(k) = self.max_iterations {
            cfg.max_iterations = k;
        }
        if let Some(b) = self.bins {
            cfg.binning = BinningSpec::with_bins(b);
        }
        cfg.user_points = self.user_points.clone();
        cfg.workers = self.workers;
        Ok(cfg)
    }
}

async fn start_explain(State(state): AppStateRef, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: ExplainRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ExplainRequest::default()
    } else {
        parse_body(&body)?
    };
    let cfg = req.config()?;

    let (job, ds, sv) = {
        let mut store = state.store.write().await;
        let session = store.session(&id)?;
        let sv = session.scores()?;
        let ds = session.dataset.clone();
        cfg.validate(ds.n_rows())?;
        if let Some(j) = &session.active_job {
            return Err(ApiError::conflict(
                "job_running",
                format!("job `{j}` is still running on dataset `{id}`"),
            ));
        }
        let job = Job {
            id: store.next_job_id(),
            dataset_id: id.clone(),
            status: JobStatus::Pending,
            strategy: cfg.strategy,
            result: None,
            error: None,
        };
        store.session_mut(&id)?.active_job = Some(job.id.clone());
        store.jobs.insert(job.id.clone(), job.clone());
        (job, ds, sv)
    };

    let sync = cfg.strategy == Strategy::Influence && ds.n_rows() < SYNC_ROW_LIMIT && !req.run_async;
    let mut handle = tokio::spawn(run_job(state.clone(), job.id.clone(), ds, sv, cfg));
    if sync && tokio::time::timeout(SYNC_BUDGET, &mut handle).await.is_ok() {
        let store = state.store.read().await;
        let done = store.jobs.get(&job.id).cloned().unwrap_or(job);
        return Ok((StatusCode::OK, Json(done)).into_response());
    }
    let current = state.store.read().await.jobs.get(&job.id).cloned().unwrap_or(job);
    Ok((StatusCode::ACCEPTED, Json(current)).into_response())
}

async fn run_job(state: Arc<AppState>, job_id: String, ds: Arc<Dataset>, sv: Arc<ScoreVector>, cfg: SearchConfig) {
    if let Some(job) = state.store.write().await.jobs.get_mut(&job_id) {
        job.status = JobStatus::Running;
    }
    let outcome = blocking(move || Ok(predex::explain(&ds, &sv, &cfg)?)).await;

    let mut store = state.store.write().await;
    let Store { sessions, jobs, .. } = &mut *store;
    let Some(job) = jobs.get_mut(&job_id) else { return };
    let Some(session) = sessions.get_mut(&job.dataset_id) else {
        job.status = JobStatus::Failed;
        job.error = Some(ApiError::internal("dataset no longer exists").body);
        return;
    };
    session.active_job = None;
    match outcome {
        Ok(output) => {
            let mut explanation_ids = Vec::new();
            let mut predicate_ids = Vec::new();
            for e in &output.explanations {
                explanation_ids.push(session.add_explanation(&job_id, e.clone(), false));
                match session.add_predicate(&e.predicate.to_string(), None, Source::Induced) {
                    Ok(p) => predicate_ids.push(p.id),
                    Err(err) => log::warn!("induced predicate `{}` not stored: {}", e.predicate, err.body.message),
                }
            }
            let combined_id = output
                .combined
                .as_ref()
                .map(|c| session.add_explanation(&job_id, c.clone(), true));
            job.status = JobStatus::Done;
            job.result = Some(JobResult {
                explanation_ids,
                combined_id,
                predicate_ids,
                output,
            });
        }
        Err(e) => {
            job.status = JobStatus::Failed;
            job.error = Some(e.body);
        }
    }
    if let Err(e) = state.persist(session) {
        log::error!("{}", e.body.message);
    }
}

async fn get_job(State(state): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    let store = state.store.read().await;
    store
        .jobs
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("job", &id))
}

/// The search output exactly as the command line tool writes it.
async fn job_result(State(state): AppStateRef, Path(id): Path<String>) -> ApiResult<Response> {
    let store = state.store.read().await;
    let job = store.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    match (&job.status, &job.result, &job.error) {
        (JobStatus::Done, Some(r), _) => {
            let text = r.output.to_json()?;
            Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
        }
        (JobStatus::Failed, _, Some(err)) => Err(ApiError::new(
            StatusCode::CONFLICT,
            "job_failed",
            format!("job `{id}` failed: {}", err.message),
            serde_json::to_value(err).unwrap_or(Value::Null),
        )),
        _ => Err(ApiError::conflict(
            "job_not_done",
            format!("job `{id}` has not finished"),
        )),
    }
}

async fn list_explanations(
    State(state): AppStateRef,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<crate::state::StoredExplanation>>> {
    let store = state.store.read().await;
    Ok(Json(store.session(&id)?.explanations.clone()))
}

// ---------------------------------------------------------------------------
// Predicates

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewPredicate {
    text: String,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredicatePatch {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    hidden: Option<bool>,
    #[serde(default)]
    color: Option<String>,
}

async fn list_predicates(State(state): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<Vec<StoredPredicate>>> {
    let store = state.store.read().await;
    Ok(Json(store.session(&id)?.predicates.clone()))
}

async fn create_predicate(
    State(state): AppStateRef,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<StoredPredicate>)> {
    let req: NewPredicate = parse_body(&body)?;
    let mut store = state.store.write().await;
    let session = store.session_mut(&id)?;
    let p = session.add_predicate(&req.text, req.label, Source::User)?;
    state.persist(session)?;
    Ok((StatusCode::CREATED, Json(p)))
}

async fn get_predicate(
    State(state): AppStateRef,
    Path((id, pid)): Path<(String, String)>,
) -> ApiResult<Json<StoredPredicate>> {
    let store = state.store.read().await;
    Ok(Json(store.session(&id)?.predicate(&pid)?.clone()))
}

async fn update_predicate(
    State(state): AppStateRef,
    Path((id, pid)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<StoredPredicate>> {
    let patch: PredicatePatch = parse_body(&body)?;
    let mut store = state.store.write().await;
    let session = store.session_mut(&id)?;
    session.predicate(&pid)?;
    let text = match &patch.text {
        Some(t) => {
            let p = predex::Predicate::parse(t)?;
            p.evaluate(&session.dataset)?;
            Some(p.to_string())
        }
        None => None,
    };
    let stored = session
        .predicates
        .iter_mut()
        .find(|p| p.id == pid)
        .expect("checked above");
    if let Some(t) = text {
        if stored.label == stored.text {
            stored.label = t.clone();
        }
        stored.text = t;
    }
    if let Some(l) = patch.label {
        stored.label = l;
    }
    if let Some(h) = patch.hidden {
        stored.hidden = h;
    }
    if let Some(c) = patch.color {
        stored.color = c;
    }
    let out = stored.clone();
    state.persist(session)?;
    Ok(Json(out))
}

async fn delete_predicate(State(state): AppStateRef, Path((id, pid)): Path<(String, String)>) -> ApiResult<StatusCode> {
    let mut store = state.store.write().await;
    let session = store.session_mut(&id)?;
    session.predicate(&pid)?;
    session.predicates.retain(|p| p.id != pid);
    state.persist(session)?;
    Ok(StatusCode::NO_CONTENT)
}

// ---------------------------------------------------------------------------
// Evaluate

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    predicate: String,
    #[serde(default)]
    strictness: Option<f64>,
    #[serde(default)]
    bins: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Evaluation {
    predicate: String,
    complement: String,
    coverage: Coverage,
    strictness: f64,
    /// Score-dependent fields are null until the dataset has scores.
    influence: Option<f64>,
    bayes: Option<BayesResult>,
    mean_score_inside: Option<f64>,
    mean_score_outside: Option<f64>,
    histogram: Option<Histogram>,
}

fn evaluate_predicate(ds: &Dataset, sv: Option<&ScoreVector>, req: &EvaluateRequest) -> ApiResult<Evaluation> {
    if req.predicate.trim().is_empty() {
        return Err(ApiError::unprocessable("invalid_request", "predicate text is empty"));
    }
    let c = req.strictness.map(Strictness::new).transpose()?.unwrap_or_default();
    let bins = req.bins.unwrap_or(DEFAULT_HISTOGRAM_BINS);
    let p = predex::Predicate::parse(&req.predicate)?;
    let sel = p.evaluate(ds)?;
    let not_p = complement(&p);
    let mut out = Evaluation {
        predicate: p.to_string(),
        complement: not_p.to_string(),
        coverage: Coverage {
            count: sel.len(),
            fraction: sel.len() as f64 / sel.universe().max(1) as f64,
        },
        strictness: c.value(),
        influence: None,
        bayes: None,
        mean_score_inside: None,
        mean_score_outside: None,
        histogram: None,
    };
    if let Some(sv) = sv {
        let rest = sel.complement();
        out.influence = likelihood_influence(sv, &sel, c).ok();
        out.bayes = match selection_bayes(sv, &sel) {
            Ok(b) => Some(b),
            Err(predex::Error::InsufficientData(_)) => None,
            Err(e) => return Err(e.into()),
        };
        out.mean_score_inside = sv.mean_over(&sel);
        out.mean_score_outside = sv.mean_over(&rest);
        out.histogram = Some(insight::score_histogram(
            sv,
            &[(out.predicate.clone(), sel), (out.complement.clone(), rest)],
            bins,
        )?);
    }
    Ok(out)
}

/// Parse, evaluate and summarize a predicate without storing anything.
async fn evaluate(State(state): AppStateRef, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Evaluation>> {
    let req: EvaluateRequest = parse_body(&body)?;
    let (ds, sv) = {
        let store = state.store.read().await;
        let s = store.session(&id)?;
        (s.dataset.clone(), s.scores.clone())
    };
    Ok(Json(
        blocking(move || evaluate_predicate(&ds, sv.as_deref(), &req)).await?,
    ))
}

// ---------------------------------------------------------------------------
// Insight views

#[derive(Debug, Deserialize)]
struct HistogramQuery {
    predicates: Option<String>,
    bins: Option<usize>,
}

#[derive(Debug, Serialize)]
struct HistogramSeriesOut {
    /// Stored predicate id; absent for the all-rows series.
    id: Option<String>,
    label: String,
    predicate: Option<String>,
    color: Option<String>,
    counts: Vec<usize>,
    total: usize,
}

#[derive(Debug, Serialize)]
struct HistogramOut {
    edges: Vec<f64>,
    series: Vec<HistogramSeriesOut>,
    chart: ChartSpec,
}

/// Score histograms of the listed predicates, of every visible predicate if
/// none is listed, or of all rows if there are none.
async fn histogram(
    State(state): AppStateRef,
    Path(id): Path<String>,
    Query(q): Query<HistogramQuery>,
) -> ApiResult<Json<HistogramOut>> {
    let (ds, sv, chosen) = {
        let store = state.store.read().await;
        let s = store.session(&id)?;
        let sv = s.scores()?;
        let chosen: Vec<StoredPredicate> = match q.predicates.as_deref().filter(|t| !t.trim().is_empty()) {
            Some(list) => list
                .split(',')
                .map(|pid| s.predicate(pid.trim()).cloned())
                .collect::<ApiResult<_>>()?,
            None => s.predicates.iter().filter(|p| !p.hidden).cloned().collect(),
        };
        (s.dataset.clone(), sv, chosen)
    };
    let bins = q.bins.unwrap_or(DEFAULT_HISTOGRAM_BINS);
    let out = blocking(move || {
        let mut sels = Vec::new();
        for p in &chosen {
            sels.push((p.label.clone(), predex::Predicate::parse(&p.text)?.evaluate(&ds)?));
        }
        if sels.is_empty() {
            sels.push(("all rows".to_string(), Selection::all(ds.n_rows())));
        }
        let h = insight::score_histogram(&sv, &sels, bins)?;
        let chart = h.chart();
        let series = h
            .series
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let p = chosen.get(i);
                HistogramSeriesOut {
                    id: p.map(|p| p.id.clone()),
                    label: s.label,
                    predicate: p.map(|p| p.text.clone()),
                    color: p.map(|p| p.color.clone()),
                    counts: s.counts,
                    total: s.total,
                }
            })
            .collect();
        Ok(HistogramOut {
            edges: h.edges,
            series,
            chart,
        })
    })
    .await?;
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
struct PivotQuery {
    predicate: String,
    feature: String,
    bins: Option<usize>,
}

#[derive(Debug, Serialize)]
struct PivotOut {
    #[serde(flatten)]
    view: insight::PivotView,
    chart: ChartSpec,
}

async fn pivot(
    State(state): AppStateRef,
    Path(id): Path<String>,
    Query(q): Query<PivotQuery>,
) -> ApiResult<Json<PivotOut>> {
    let (ds, sv, p) = {
        let store = state.store.read().await;
        let s = store.session(&id)?;
        (s.dataset.clone(), s.scores()?, s.resolve_predicate(&q.predicate)?)
    };
    let bins = q.bins.unwrap_or(DEFAULT_PIVOT_BINS);
    let out = blocking(move || {
        let view = insight::pivot_view(&ds, &sv, &p, &q.feature, bins)?;
        let chart = view.chart();
        Ok(PivotOut { view, chart })
    })
    .await?;
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
struct RecommendationQuery {
    predicate: String,
    pivot: String,
}

async fn recommendations(
    State(state): AppStateRef,
    Path(id): Path<String>,
    Query(q): Query<RecommendationQuery>,
) -> ApiResult<Json<Vec<insight::Recommendation>>> {
    let (ds, sv, p) = {
        let store = state.store.read().await;
        let s = store.session(&id)?;
        (s.dataset.clone(), s.scores()?, s.resolve_predicate(&q.predicate)?)
    };
    Ok(Json(
        blocking(move || Ok(insight::recommend(&ds, &sv, &p, &q.pivot)?)).await?,
    ))
}

#[derive(Debug, Deserialize)]
struct SubspaceQuery {
    max_dim: Option<usize>,
    alpha: Option<f64>,
    allow_many: Option<bool>,
}

async fn subspaces(
    State(state): AppStateRef,
    Path(id): Path<String>,
    Query(q): Query<SubspaceQuery>,
) -> ApiResult<Json<Vec<insight::SubspaceRow>>> {
    let ds = state.store.read().await.session(&id)?.dataset.clone();
    let defaults = SubspaceOptions::default();
    let opts = SubspaceOptions {
        max_dim: q.max_dim.unwrap_or(defaults.max_dim),
        alpha: q.alpha.unwrap_or(defaults.alpha),
        allow_many: q.allow_many.unwrap_or(defaults.allow_many),
    };
    Ok(Json(blocking(move || Ok(insight::subspace_scores(&ds, &opts)?)).await?))
}

// ---------------------------------------------------------------------------
// Bookmarks and reports

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewBookmark {
    title: String,
    sentence: String,
    #[serde(default)]
    chart: Option<ChartSpec>,
}

async fn list_bookmarks(State(state): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<Vec<StoredBookmark>>> {
    let store = state.store.read().await;
    Ok(Json(store.session(&id)?.bookmarks.clone()))
}

async fn create_bookmark(
    State(state): AppStateRef,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<StoredBookmark>)> {
    let req: NewBookmark = parse_body(&body)?;
    let mut store = state.store.write().await;
    let session = store.session_mut(&id)?;
    let b = session.add_bookmark(req.title, req.sentence, req.chart);
    state.persist(session)?;
    Ok((StatusCode::CREATED, Json(b)))
}

async fn delete_bookmark(State(state): AppStateRef, Path((id, bid)): Path<(String, String)>) -> ApiResult<StatusCode> {
    let mut store = state.store.write().await;
    let session = store.session_mut(&id)?;
    if !session.bookmarks.iter().any(|b| b.id == bid) {
        return Err(ApiError::not_found("bookmark", &bid));
    }
    session.bookmarks.retain(|b| b.id != bid);
    state.persist(session)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportRequest {
    explanation_ids: Vec<String>,
    #[serde(default)]
    bookmark_ids: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ReportOut {
    markdown: String,
    json: Value,
}

async fn report(State(state): AppStateRef, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<ReportOut>> {
    let req: ReportRequest = parse_body(&body)?;
    let store = state.store.read().await;
    let s = store.session(&id)?;
    let explanations: Vec<Explanation> = req
        .explanation_ids
        .iter()
        .map(|eid| {
            s.explanations
                .iter()
                .find(|e| &e.id == eid)
                .map(|e| e.explanation.clone())
                .ok_or_else(|| ApiError::not_found("explanation", eid))
        })
        .collect::<ApiResult<_>>()?;
    let bookmarks = req
        .bookmark_ids
        .iter()
        .map(|bid| {
            s.bookmarks
                .iter()
                .find(|b| &b.id == bid)
                .map(|b| predex::Bookmark {
                    title: b.title.clone(),
                    sentence: b.sentence.clone(),
                    chart: b.chart.clone(),
                })
                .ok_or_else(|| ApiError::not_found("bookmark", bid))
        })
        .collect::<ApiResult<_>>()?;
    let report = Report::new(explanations, bookmarks)?;
    let json = serde_json::from_str(&report.to_json()?).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(ReportOut {
        markdown: report.to_markdown(),
        json,
    }))
}
