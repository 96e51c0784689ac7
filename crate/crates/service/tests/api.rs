use std::path::Path;
use std::time::Duration;

use predex_service::schema;
use predex_service::{ServeConfig, ServeError, Server};
use reqwest::multipart::{Form, Part};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

const REGIONS: [&str; 4] = ["north", "south", "east", "west"];

/// `n` rows with scores near zero, except about 5 where region is west
/// and size is at least 60.
fn sales_csv(n: usize) -> String {
    let mut out = String::from("region,size,day,load,score\n");
    for i in 0..n {
        let region = REGIONS[i % 4];
        let size = (i * 37) % 100;
        let day = 1 + (i * 11) % 28;
        let load = size as f64 * 0.5 + (i % 7) as f64;
        let mut score = ((i * 31) % 17) as f64 / 17.0 - 0.5;
        if region == "west" && size >= 60 {
            score += 5.0;
        }
        out.push_str(&format!("{region},{size},2024-02-{day:02},{load},{score}\n"));
    }
    out
}

struct Api {
    base: String,
    client: Client,
    task: tokio::task::JoinHandle<()>,
}

impl Api {
    async fn start(data_dir: Option<&Path>) -> Api {
        let cfg = ServeConfig {
            host: "127.0.0.1".into(),
            port: 0,
            data_dir: data_dir.map(Path::to_path_buf),
        };
        let server = Server::bind(&cfg).await.unwrap();
        let base = format!("http://{}", server.local_addr().unwrap());
        let task = tokio::spawn(async move {
            server.run().await.unwrap();
        });
        Api {
            base,
            client: Client::new(),
            task,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        decode(self.client.get(self.url(path)).send().await.unwrap()).await
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        decode(self.client.post(self.url(path)).json(&body).send().await.unwrap()).await
    }

    async fn post_raw(&self, path: &str, body: &'static str) -> (StatusCode, Value) {
        let req = self
            .client
            .post(self.url(path))
            .header("content-type", "application/json")
            .body(body);
        decode(req.send().await.unwrap()).await
    }

    async fn patch(&self, path: &str, body: Value) -> (StatusCode, Value) {
        decode(self.client.patch(self.url(path)).json(&body).send().await.unwrap()).await
    }

    async fn delete(&self, path: &str) -> StatusCode {
        self.client.delete(self.url(path)).send().await.unwrap().status()
    }

    async fn upload(&self, csv: String, targets: Option<&str>) -> String {
        let mut form = Form::new().part("file", Part::text(csv).file_name("sales.csv"));
        if let Some(t) = targets {
            form = form.text("targets", t.to_string());
        }
        let resp = self
            .client
            .post(self.url("/datasets"))
            .multipart(form)
            .send()
            .await
            .unwrap();
        let (status, body) = decode(resp).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        check("Dataset", &body);
        body["dataset_id"].as_str().unwrap().to_string()
    }

    /// Upload the fixture and use its `score` column as scores.
    async fn scored(&self, n: usize) -> String {
        let id = self.upload(sales_csv(n), None).await;
        let (status, body) = self
            .post(&format!("/datasets/{id}/scores"), json!({ "column": "score" }))
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        check("Dataset", &body);
        id
    }

    async fn wait_for(&self, job: &str) -> Value {
        for _ in 0..600 {
            let (status, body) = self.get(&format!("/jobs/{job}")).await;
            assert_eq!(status, StatusCode::OK);
            check("Job", &body);
            if matches!(body["status"].as_str(), Some("done" | "failed")) {
                return body;
            }
            tokio::time::sleep(Duration::from_millis(100)).await;
        }
        panic!("job {job} did not finish");
    }
}

impl Drop for Api {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn decode(resp: reqwest::Response) -> (StatusCode, Value) {
    let status = resp.status();
    let text = resp.text().await.unwrap();
    let body = if text.is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or_else(|e| panic!("non-JSON body ({e}): {text}"))
    };
    (status, body)
}

/// Validate `value` against the published schema of `type_name`.
fn check(type_name: &str, value: &Value) {
    let validator = jsonschema::validator_for(&schema::for_type(type_name)).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(
        errors.is_empty(),
        "{type_name} does not match the schema: {errors:?}\n{value:#}"
    );
}

fn check_error(status: StatusCode, body: &Value, expected: StatusCode, code: &str) {
    assert_eq!(status, expected, "{body}");
    check("Error", body);
    assert_eq!(body["code"], code, "{body}");
}

#[tokio::test(flavor = "multi_thread")]
async fn served_schema_is_the_published_document() {
    let api = Api::start(None).await;
    let (status, body) = api.get("/schema").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, schema::document());
    jsonschema::validator_for(&body).unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn upload_then_histogram() {
    let api = Api::start(None).await;
    let id = api.scored(400).await;

    let (status, ds) = api.get(&format!("/datasets/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ds["rows"], 400);
    assert_eq!(ds["targets"], json!(["score"]));
    let (_, list) = api.get("/datasets").await;
    check("DatasetList", &list);

    let (status, h) = api.get(&format!("/datasets/{id}/histogram?bins=10")).await;
    assert_eq!(status, StatusCode::OK, "{h}");
    check("HistogramView", &h);
    assert_eq!(h["edges"].as_array().unwrap().len(), 11);
    assert_eq!(h["series"][0]["total"], 400);
    assert_eq!(h["series"][0]["label"], "all rows");
}

#[tokio::test(flavor = "multi_thread")]
async fn histogram_of_stored_predicates_uses_their_colors() {
    let api = Api::start(None).await;
    let id = api.scored(400).await;
    let (_, p1) = api
        .post(
            &format!("/datasets/{id}/predicates"),
            json!({ "text": "region = 'west'" }),
        )
        .await;
    let (_, p2) = api
        .post(&format!("/datasets/{id}/predicates"), json!({ "text": "size >= 60" }))
        .await;
    let (status, h) = api
        .get(&format!("/datasets/{id}/histogram?predicates=p2,p1&bins=5"))
        .await;
    assert_eq!(status, StatusCode::OK, "{h}");
    check("HistogramView", &h);
    assert_eq!(h["series"][0]["id"], "p2");
    assert_eq!(h["series"][0]["color"], p2["color"]);
    assert_eq!(h["series"][1]["color"], p1["color"]);
    assert_eq!(h["series"][1]["total"], 100);
    let counts: u64 = h["series"][1]["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(counts, 100);

    let (status, body) = api.get(&format!("/datasets/{id}/histogram?predicates=p1,p9")).await;
    check_error(status, &body, StatusCode::NOT_FOUND, "not_found");
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_ids_are_404_with_an_error_body() {
    let api = Api::start(None).await;
    let id = api.scored(100).await;
    let (status, body) = api.get(&format!("/datasets/{id}/predicates/p42")).await;
    check_error(status, &body, StatusCode::NOT_FOUND, "not_found");
    assert_eq!(body["detail"]["id"], "p42");
    assert!(body["message"].as_str().unwrap().contains("p42"));

    let (status, body) = api.get("/datasets/d99").await;
    check_error(status, &body, StatusCode::NOT_FOUND, "not_found");
    let (status, body) = api.get("/jobs/j99").await;
    check_error(status, &body, StatusCode::NOT_FOUND, "not_found");
    assert_eq!(
        api.delete(&format!("/datasets/{id}/bookmarks/b7")).await,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn bayes_explain_is_a_job_that_completes() {
    let api = Api::start(None).await;
    let id = api.scored(400).await;
    let (status, job) = api
        .post(
            &format!("/datasets/{id}/explain"),
            json!({ "strategy": "bayes", "max_explanations": 2 }),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    check("Job", &job);
    let job_id = job["id"].as_str().unwrap().to_string();

    let done = api.wait_for(&job_id).await;
    assert_eq!(done["status"], "done", "{done}");
    let result = &done["result"];
    let first = &result["output"]["explanations"][0];
    assert_eq!(first["strategy"], "bayes");
    let text = first["predicate"].as_str().unwrap();
    assert!(text.contains("region") || text.contains("size"), "{text}");

    let (_, preds) = api.get(&format!("/datasets/{id}/predicates")).await;
    check("PredicateList", &preds);
    let induced: Vec<&Value> = preds
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["source"] == "induced")
        .collect();
    assert_eq!(induced.len(), result["predicate_ids"].as_array().unwrap().len());
    assert!(!induced.is_empty());

    let (_, explanations) = api.get(&format!("/datasets/{id}/explanations")).await;
    check("ExplanationList", &explanations);
    assert_eq!(
        explanations.as_array().unwrap().len(),
        result["explanation_ids"].as_array().unwrap().len()
    );

    let (_, ds) = api.get(&format!("/datasets/{id}")).await;
    assert_eq!(ds["active_job"], Value::Null);
}

#[tokio::test(flavor = "multi_thread")]
async fn small_influence_search_answers_synchronously() {
    let api = Api::start(None).await;
    let id = api.scored(400).await;
    let (status, job) = api
        .post(
            &format!("/datasets/{id}/explain"),
            json!({ "strictness": 0.5, "max_explanations": 1 }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{job}");
    check("Job", &job);
    assert_eq!(job["status"], "done");
    let best = &job["result"]["output"]["explanations"][0];
    let sel = best["coverage"]["count"].as_u64().unwrap();
    assert!(sel > 0 && sel <= 100, "{best}");
    assert!(best["predicate"].as_str().unwrap().contains("region"), "{best}");

    let (status, job) = api
        .post(&format!("/datasets/{id}/explain"), json!({ "async": true }))
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    api.wait_for(job["id"].as_str().unwrap()).await;
}

#[tokio::test(flavor = "multi_thread")]
async fn job_result_is_the_engine_output_byte_for_byte() {
    let api = Api::start(None).await;
    let csv = sales_csv(300);
    let id = api.scored(300).await;
    let (status, job) = api
        .post(
            &format!("/datasets/{id}/explain"),
            json!({ "strictness": 0.5, "max_explanations": 2, "bins": 8 }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{job}");
    let served = api
        .client
        .get(api.url(&format!("/jobs/{}/result", job["id"].as_str().unwrap())))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();

    let ds = predex::read_csv(csv.as_bytes(), None).unwrap();
    let (ds, sv) = predex::scoring::import_scores_from_column(ds, "score").unwrap();
    let cfg = predex::SearchConfig {
        strictness: predex::Strictness::new(0.5).unwrap(),
        max_explanations: 2,
        binning: predex::BinningSpec::with_bins(8),
        ..Default::default()
    };
    let local = predex::explain(&ds, &sv, &cfg).unwrap().to_json().unwrap();
    assert_eq!(served, local);
    check("ExplainOutput", &serde_json::from_str(&served).unwrap());
}

#[tokio::test(flavor = "multi_thread")]
async fn second_job_on_a_session_conflicts() {
    let api = Api::start(None).await;
    let id = api.scored(40_000).await;
    let body = json!({ "strategy": "bayes", "bins": 30, "async": true });
    let (status, job) = api.post(&format!("/datasets/{id}/explain"), body.clone()).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    let (status, err) = api.post(&format!("/datasets/{id}/explain"), body).await;
    check_error(status, &err, StatusCode::CONFLICT, "job_running");

    let (status, body) = api.get(&format!("/jobs/{}/result", job["id"].as_str().unwrap())).await;
    if status != StatusCode::OK {
        check_error(status, &body, StatusCode::CONFLICT, "job_not_done");
    }

    let done = api.wait_for(job["id"].as_str().unwrap()).await;
    assert_eq!(done["status"], "done");
    let (status, _) = api
        .post(
            &format!("/datasets/{id}/explain"),
            json!({ "max_explanations": 1, "async": true }),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED);
}

#[tokio::test(flavor = "multi_thread")]
async fn explain_needs_scores() {
    let api = Api::start(None).await;
    let id = api.upload(sales_csv(50), None).await;
    let (status, body) = api.post(&format!("/datasets/{id}/explain"), json!({})).await;
    check_error(status, &body, StatusCode::CONFLICT, "scores_required");
    let (status, body) = api
        .post(&format!("/datasets/{id}/explain"), json!({ "strictness": 2.0 }))
        .await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "invalid_config");
}

#[tokio::test(flavor = "multi_thread")]
async fn evaluate_complement_predicate() {
    let api = Api::start(None).await;
    let id = api.scored(400).await;
    let (status, ev) = api
        .post(
            &format!("/datasets/{id}/evaluate"),
            json!({ "predicate": "NOT(region in ['north','south','east'])" }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{ev}");
    check("Evaluation", &ev);
    assert_eq!(ev["coverage"]["count"], 100);
    assert_eq!(ev["coverage"]["fraction"], 0.25);
    let series = ev["histogram"]["series"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    assert_eq!(series[0]["total"], 100);
    assert_eq!(series[1]["total"], 300);
    assert_eq!(series[1]["label"], ev["complement"]);
    assert!(ev["mean_score_inside"].as_f64().unwrap() > ev["mean_score_outside"].as_f64().unwrap());
    assert!(ev["bayes"]["bf10"].as_f64().unwrap() > 1.0);

    // evaluate stores nothing
    let (_, preds) = api.get(&format!("/datasets/{id}/predicates")).await;
    assert_eq!(preds, json!([]));
    let (_, again) = api
        .post(
            &format!("/datasets/{id}/evaluate"),
            json!({ "predicate": "NOT(region in ['north','south','east'])" }),
        )
        .await;
    assert_eq!(again, ev);
}

#[tokio::test(flavor = "multi_thread")]
async fn evaluate_rejects_bad_input_with_422() {
    let api = Api::start(None).await;
    let id = api.scored(100).await;
    let path = format!("/datasets/{id}/evaluate");

    let (status, body) = api.post_raw(&path, "").await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "invalid_request");
    let (status, body) = api.post(&path, json!({ "predicate": "" })).await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "invalid_request");

    let (status, body) = api.post(&path, json!({ "predicate": "colour = 'red'" })).await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "unknown_feature");
    assert_eq!(body["detail"]["feature"], "colour");
    assert!(body["message"].as_str().unwrap().contains("colour"));

    let (status, body) = api.post(&path, json!({ "predicate": "size >= " })).await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "syntax_error");
    assert!(body["detail"]["position"].is_u64());
}

#[tokio::test(flavor = "multi_thread")]
async fn predicate_lifecycle() {
    let api = Api::start(None).await;
    let id = api.scored(100).await;
    let base = format!("/datasets/{id}/predicates");

    let (status, p) = api.post(&base, json!({ "text": "size>=60 & region='west'" })).await;
    assert_eq!(status, StatusCode::CREATED, "{p}");
    check("Predicate", &p);
    assert_eq!(p["id"], "p1");
    assert_eq!(p["source"], "user");
    assert_eq!(p["color"], predex_service::PALETTE[0]);
    let canonical = p["text"].as_str().unwrap().to_string();
    assert_eq!(predex::Predicate::parse(&canonical).unwrap().to_string(), canonical);

    let (_, q) = api.post(&base, json!({ "text": "load < 10", "label": "light" })).await;
    assert_eq!(q["color"], predex_service::PALETTE[1]);
    assert_eq!(q["label"], "light");

    let (status, p) = api
        .patch(&format!("{base}/p1"), json!({ "text": "size >= 70", "hidden": true }))
        .await;
    assert_eq!(status, StatusCode::OK, "{p}");
    assert_eq!(p["text"], "(size >= 70)");
    assert_eq!(p["label"], "(size >= 70)");
    assert_eq!(p["hidden"], true);

    let (status, body) = api.patch(&format!("{base}/p1"), json!({ "text": "size >=" })).await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "syntax_error");
    let (status, body) = api.post(&base, json!({ "text": "nosuch = 1" })).await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "unknown_feature");

    assert_eq!(api.delete(&format!("{base}/p1")).await, StatusCode::NO_CONTENT);
    let (status, _) = api.get(&format!("{base}/p1")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (_, list) = api.get(&base).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn pivot_recommendations_and_subspaces() {
    let api = Api::start(None).await;
    let id = api.scored(400).await;
    let (_, p) = api
        .post(
            &format!("/datasets/{id}/predicates"),
            json!({ "text": "region = 'west' & size >= 60" }),
        )
        .await;

    let (status, pv) = api
        .get(&format!("/datasets/{id}/pivot?predicate=p1&feature=region"))
        .await;
    assert_eq!(status, StatusCode::OK, "{pv}");
    check("Pivot", &pv);
    assert_eq!(pv["pivot"], "region");
    let highlighted: Vec<&Value> = pv["bars"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|b| b["highlighted"] == true)
        .collect();
    assert_eq!(highlighted.len(), 1);
    assert_eq!(highlighted[0]["label"], "west");

    let text = p["text"].as_str().unwrap();
    let resp = api
        .client
        .get(api.url(&format!("/datasets/{id}/pivot")))
        .query(&[("predicate", text), ("feature", "region")])
        .send()
        .await
        .unwrap();
    let (status, by_text) = decode(resp).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(by_text, pv);

    let (status, body) = api
        .get(&format!("/datasets/{id}/pivot?predicate=p1&feature=load"))
        .await;
    check_error(status, &body, StatusCode::BAD_REQUEST, "bad_request");

    let (status, recs) = api
        .get(&format!("/datasets/{id}/recommendations?predicate=p1&pivot=size"))
        .await;
    assert_eq!(status, StatusCode::OK, "{recs}");
    check("RecommendationList", &recs);
    for r in recs.as_array().unwrap() {
        assert!(r["r"].as_f64().unwrap().abs() > 0.3);
    }

    let (status, subs) = api.get(&format!("/datasets/{id}/subspaces?max_dim=1")).await;
    assert_eq!(status, StatusCode::OK, "{subs}");
    check("SubspaceList", &subs);
    assert_eq!(subs[0]["features"], json!(["score"]));
    assert_eq!(subs[0]["scores"].as_array().unwrap().len(), 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn bookmarks_and_report() {
    let api = Api::start(None).await;
    let id = api.scored(300).await;
    let (status, job) = api
        .post(&format!("/datasets/{id}/explain"), json!({ "max_explanations": 1 }))
        .await;
    assert_eq!(status, StatusCode::OK, "{job}");
    let eid = job["result"]["explanation_ids"][0].as_str().unwrap().to_string();

    let chart = json!({ "type": "bar", "categories": ["a", "b"], "series": [{ "label": "mean", "values": [1.0, 2.0] }], "highlighted": ["b"] });
    let (status, b) = api
        .post(
            &format!("/datasets/{id}/bookmarks"),
            json!({ "title": "West", "sentence": "Average score is high when region is west.", "chart": chart }),
        )
        .await;
    assert_eq!(status, StatusCode::CREATED, "{b}");
    check("Bookmark", &b);
    let (_, list) = api.get(&format!("/datasets/{id}/bookmarks")).await;
    check("BookmarkList", &list);

    let (status, report) = api
        .post(
            &format!("/datasets/{id}/report"),
            json!({ "explanation_ids": [eid], "bookmark_ids": ["b1"] }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{report}");
    check("Report", &report);
    assert!(report["markdown"]
        .as_str()
        .unwrap()
        .contains("Average score is high when region is west."));
    assert_eq!(report["json"]["bookmarks"][0]["chart"], chart);

    let (status, body) = api
        .post(&format!("/datasets/{id}/report"), json!({ "explanation_ids": [] }))
        .await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "no_explanation");
    let (status, body) = api
        .post(&format!("/datasets/{id}/report"), json!({ "explanation_ids": ["e9"] }))
        .await;
    check_error(status, &body, StatusCode::NOT_FOUND, "not_found");

    assert_eq!(
        api.delete(&format!("/datasets/{id}/bookmarks/b1")).await,
        StatusCode::NO_CONTENT
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn score_side_file_and_gaussian_model() {
    let api = Api::start(None).await;
    let id = api.upload(sales_csv(20), Some("load")).await;
    let path = format!("/datasets/{id}/scores");

    let lines: String = (0..20).map(|i| format!("{}\n", i as f64)).collect();
    let form = Form::new().text("file", lines).text("higher_is_anomalous", "false");
    let (status, ds) = decode(api.client.post(api.url(&path)).multipart(form).send().await.unwrap()).await;
    assert_eq!(status, StatusCode::OK, "{ds}");
    assert_eq!(ds["scores"]["max"], 0.0);
    assert_eq!(ds["scores"]["min"], -19.0);

    let form = Form::new().text("file", "1\n2\n");
    let (status, body) = decode(api.client.post(api.url(&path)).multipart(form).send().await.unwrap()).await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "invalid_scores");
    assert_eq!(body["detail"]["expected"], 20);

    let (status, ds) = api
        .post(&path, json!({ "model": "gaussian", "targets": ["load", "size"] }))
        .await;
    assert_eq!(status, StatusCode::OK, "{ds}");
    assert_eq!(ds["scores"]["provenance"], "gaussian-nll");
    assert_eq!(ds["targets"], json!(["size", "load"]));

    let (status, body) = api.post(&path, json!({ "model": "forest" })).await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "invalid_request");
    let (status, body) = api.post(&path, json!({ "scores": [1.0, 2.0] })).await;
    check_error(status, &body, StatusCode::UNPROCESSABLE_ENTITY, "invalid_scores");
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before) = {
        let api = Api::start(Some(dir.path())).await;
        let id = api.scored(200).await;
        api.post(
            &format!("/datasets/{id}/predicates"),
            json!({ "text": "day >= '2024-02-10'" }),
        )
        .await;
        api.post(
            &format!("/datasets/{id}/bookmarks"),
            json!({ "title": "t", "sentence": "s" }),
        )
        .await;
        let (_, job) = api
            .post(&format!("/datasets/{id}/explain"), json!({ "max_explanations": 1 }))
            .await;
        assert_eq!(job["status"], "done");
        let (_, before) = api.get(&format!("/datasets/{id}")).await;
        assert_eq!(before["explanations"], 2);
        (id, before)
    };
    assert!(dir.path().join(&id).join("session.json").exists());

    let api = Api::start(Some(dir.path())).await;
    let (status, after) = api.get(&format!("/datasets/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after, before);
    let (_, preds) = api.get(&format!("/datasets/{id}/predicates")).await;
    assert_eq!(preds.as_array().unwrap().len(), 2);
    let (_, hist) = api.get(&format!("/datasets/{id}/histogram?predicates=p1")).await;
    check("HistogramView", &hist);
    let (_, explanations) = api.get(&format!("/datasets/{id}/explanations")).await;
    assert_eq!(explanations.as_array().unwrap().len(), 2);

    let second = api.upload(sales_csv(10), None).await;
    assert_ne!(second, id);
    let (_, p) = api
        .post(&format!("/datasets/{id}/predicates"), json!({ "text": "size < 5" }))
        .await;
    assert_eq!(p["id"], "p3");
}

#[tokio::test(flavor = "multi_thread")]
async fn busy_port_is_a_startup_error() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let cfg = ServeConfig {
        host: "127.0.0.1".into(),
        port: taken.local_addr().unwrap().port(),
        data_dir: None,
    };
    match Server::bind(&cfg).await {
        Err(ServeError::PortBusy(addr)) => assert!(addr.ends_with(&cfg.port.to_string())),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("bound a busy port"),
    }
}
