//! Start the service on a free port, upload a table, run a Bayes search as
//! a job and poll it until it finishes.
//!
//! ```text
//! cargo run --example serve_and_poll
//! ```

use std::time::Duration;

use predex_service::{ServeConfig, Server};
use reqwest::multipart::{Form, Part};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = Server::bind(&ServeConfig {
        port: 0,
        ..Default::default()
    })
    .await?;
    let base = format!("http://{}", server.local_addr()?);
    tokio::spawn(server.run());
    let http = reqwest::Client::new();

    let planted = predex::synth::planted_conjunction(12, 3_000);
    let mut csv = Vec::new();
    predex::write_csv(&planted.dataset, &mut csv)?;
    let form = Form::new().part("file", Part::bytes(csv).file_name("sales.csv"));
    let ds: Value = http
        .post(format!("{base}/datasets"))
        .multipart(form)
        .send()
        .await?
        .json()
        .await?;
    let id = ds["dataset_id"].as_str().unwrap_or_default().to_string();
    println!("uploaded {id}: {} rows", ds["rows"]);

    let scores = json!({ "scores": planted.scores.as_slice() });
    http.post(format!("{base}/datasets/{id}/scores"))
        .json(&scores)
        .send()
        .await?;

    let body = json!({ "strategy": "bayes", "max_explanations": 2 });
    let job: Value = http
        .post(format!("{base}/datasets/{id}/explain"))
        .json(&body)
        .send()
        .await?
        .json()
        .await?;
    let job_id = job["id"].as_str().unwrap_or_default().to_string();
    let done = loop {
        let job: Value = http.get(format!("{base}/jobs/{job_id}")).send().await?.json().await?;
        println!("job {job_id}: {}", job["status"]);
        if job["status"] == "done" || job["status"] == "failed" {
            break job;
        }
        tokio::time::sleep(Duration::from_millis(200)).await;
    };

    println!("planted: {}", planted.causes[0]);
    if let Some(list) = done["result"]["output"]["explanations"].as_array() {
        for e in list {
            println!(
                "found:   {}  BF10 {}",
                e["predicate"].as_str().unwrap_or_default(),
                e["bf10"]
            );
        }
    }

    let eval = json!({ "predicate": format!("NOT({})", planted.causes[0]) });
    let ev: Value = http
        .post(format!("{base}/datasets/{id}/evaluate"))
        .json(&eval)
        .send()
        .await?
        .json()
        .await?;
    println!(
        "complement of the planted cause selects {} rows",
        ev["coverage"]["count"]
    );
    Ok(())
}
