//! JSON Schema of every response body, served at `GET /schema`.

use serde_json::{json, Value};

/// Names under `$defs`, one per response shape.
pub const RESPONSE_TYPES: [&str; 18] = [
    "Error",
    "Dataset",
    "DatasetList",
    "Job",
    "ExplainOutput",
    "ExplanationList",
    "Predicate",
    "PredicateList",
    "Evaluation",
    "HistogramView",
    "Pivot",
    "RecommendationList",
    "SubspaceList",
    "Bookmark",
    "BookmarkList",
    "Report",
    "Chart",
    "Explanation",
];

fn obj(required: &[&str], properties: Value) -> Value {
    json!({
        "type": "object",
        "required": required,
        "properties": properties,
        "additionalProperties": false,
    })
}

fn reference(name: &str) -> Value {
    json!({ "$ref": format!("#/$defs/{name}") })
}

fn nullable(name: &str) -> Value {
    json!({ "oneOf": [{ "type": "null" }, reference(name)] })
}

fn list(name: &str) -> Value {
    json!({ "type": "array", "items": reference(name) })
}

pub fn document() -> Value {
    let number_or_null = json!({ "type": ["number", "null"] });
    let string_or_null = json!({ "type": ["string", "null"] });
    let count = json!({ "type": "integer", "minimum": 0 });
    let strings = json!({ "type": "array", "items": { "type": "string" } });
    let numbers = json!({ "type": "array", "items": { "type": "number" } });

    let defs = json!({
        "Float": { "oneOf": [{ "type": "number" }, { "enum": ["inf", "-inf", "nan"] }] },
        "FloatOrNull": { "oneOf": [{ "type": "null" }, reference("Float")] },
        "Strategy": { "enum": ["influence", "bayes"] },
        "Error": obj(&["code", "message", "detail"], json!({
            "code": { "type": "string" },
            "message": { "type": "string" },
            "detail": {},
        })),
        "Feature": obj(&["name", "kind", "role", "cardinality"], json!({
            "name": { "type": "string" },
            "kind": { "enum": ["categorical", "numeric", "datetime"] },
            "role": { "enum": ["target", "context"] },
            "cardinality": count,
        })),
        "ScoresSummary": obj(&["provenance", "source_column", "flagged", "min", "max", "mean"], json!({
            "provenance": { "enum": ["imported", "gaussian-nll"] },
            "source_column": string_or_null,
            "flagged": count,
            "min": { "type": "number" },
            "max": { "type": "number" },
            "mean": { "type": "number" },
        })),
        "Dataset": obj(
            &["dataset_id", "name", "rows", "features", "targets", "scores", "predicates", "explanations", "active_job"],
            json!({
                "dataset_id": { "type": "string" },
                "name": { "type": "string" },
                "rows": count,
                "features": list("Feature"),
                "targets": strings,
                "scores": nullable("ScoresSummary"),
                "predicates": count,
                "explanations": count,
                "active_job": string_or_null,
            }),
        ),
        "DatasetList": list("Dataset"),
        "Coverage": obj(&["count", "fraction"], json!({
            "count": count,
            "fraction": { "type": "number", "minimum": 0, "maximum": 1 },
        })),
        "Explanation": obj(
            &["predicate", "influence", "strictness", "bf10", "log_bf10", "category", "coverage",
              "mean_score_inside", "mean_score_outside", "trace", "strategy"],
            json!({
                "predicate": { "type": "string" },
                "influence": reference("Float"),
                "strictness": { "type": "number", "exclusiveMinimum": 0, "maximum": 1 },
                "bf10": reference("FloatOrNull"),
                "log_bf10": reference("FloatOrNull"),
                "category": { "enum": [null, "none-or-bare", "substantial", "strong", "decisive"] },
                "coverage": reference("Coverage"),
                "mean_score_inside": { "type": "number" },
                "mean_score_outside": reference("FloatOrNull"),
                "trace": numbers,
                "strategy": reference("Strategy"),
            }),
        ),
        "ExplainOutput": obj(&["strategy", "explanations", "combined"], json!({
            "strategy": reference("Strategy"),
            "explanations": list("Explanation"),
            "combined": nullable("Explanation"),
        })),
        "JobResult": obj(&["explanation_ids", "predicate_ids", "output"], json!({
            "explanation_ids": strings,
            "combined_id": { "type": "string" },
            "predicate_ids": strings,
            "output": reference("ExplainOutput"),
        })),
        "Job": obj(&["id", "dataset_id", "status", "strategy"], json!({
            "id": { "type": "string" },
            "dataset_id": { "type": "string" },
            "status": { "enum": ["pending", "running", "done", "failed"] },
            "strategy": reference("Strategy"),
            "result": reference("JobResult"),
            "error": reference("Error"),
        })),
        "StoredExplanation": obj(&["id", "job_id", "combined", "explanation"], json!({
            "id": { "type": "string" },
            "job_id": { "type": "string" },
            "combined": { "type": "boolean" },
            "explanation": reference("Explanation"),
        })),
        "ExplanationList": list("StoredExplanation"),
        "Predicate": obj(&["id", "label", "text", "color", "hidden", "source"], json!({
            "id": { "type": "string" },
            "label": { "type": "string" },
            "text": { "type": "string" },
            "color": { "type": "string" },
            "hidden": { "type": "boolean" },
            "source": { "enum": ["induced", "user"] },
        })),
        "PredicateList": list("Predicate"),
        "Bayes": obj(&["bf10", "log_bf10", "category"], json!({
            "bf10": reference("Float"),
            "log_bf10": reference("Float"),
            "category": { "enum": ["none-or-bare", "substantial", "strong", "decisive"] },
        })),
        "HistogramSeries": obj(&["label", "counts", "total"], json!({
            "label": { "type": "string" },
            "counts": { "type": "array", "items": count },
            "total": count,
        })),
        "Histogram": obj(&["edges", "series"], json!({
            "edges": numbers,
            "series": list("HistogramSeries"),
        })),
        "ChartSeries": obj(&["label", "values"], json!({
            "label": { "type": "string" },
            "values": { "type": "array", "items": number_or_null },
        })),
        "Chart": { "oneOf": [
            obj(&["type", "edges", "series"], json!({
                "type": { "const": "histogram" },
                "edges": numbers,
                "series": list("ChartSeries"),
            })),
            obj(&["type", "categories", "series", "highlighted"], json!({
                "type": { "const": "bar" },
                "categories": strings,
                "series": list("ChartSeries"),
                "highlighted": strings,
            })),
        ]},
        "Evaluation": obj(
            &["predicate", "complement", "coverage", "strictness", "influence", "bayes",
              "mean_score_inside", "mean_score_outside", "histogram"],
            json!({
                "predicate": { "type": "string" },
                "complement": { "type": "string" },
                "coverage": reference("Coverage"),
                "strictness": { "type": "number" },
                "influence": number_or_null,
                "bayes": nullable("Bayes"),
                "mean_score_inside": number_or_null,
                "mean_score_outside": number_or_null,
                "histogram": nullable("Histogram"),
            }),
        ),
        "HistogramView": obj(&["edges", "series", "chart"], json!({
            "edges": numbers,
            "series": { "type": "array", "items": obj(
                &["id", "label", "predicate", "color", "counts", "total"],
                json!({
                    "id": string_or_null,
                    "label": { "type": "string" },
                    "predicate": string_or_null,
                    "color": string_or_null,
                    "counts": { "type": "array", "items": count },
                    "total": count,
                }),
            )},
            "chart": reference("Chart"),
        })),
        "PivotBar": obj(&["label", "count", "mean_score", "highlighted"], json!({
            "label": { "type": "string" },
            "range": { "type": "array", "items": { "type": "number" }, "minItems": 2, "maxItems": 2 },
            "count": count,
            "mean_score": number_or_null,
            "highlighted": { "type": "boolean" },
        })),
        "Pivot": obj(&["pivot", "filter", "filtered_rows", "bars", "chart"], json!({
            "pivot": { "type": "string" },
            "filter": string_or_null,
            "filtered_rows": count,
            "bars": list("PivotBar"),
            "chart": reference("Chart"),
        })),
        "Recommendation": obj(&["attribute", "r", "direction", "sentence", "chart"], json!({
            "attribute": { "type": "string" },
            "r": { "type": "number", "minimum": -1, "maximum": 1 },
            "direction": { "enum": ["high", "low"] },
            "sentence": { "type": "string" },
            "chart": reference("Chart"),
        })),
        "RecommendationList": list("Recommendation"),
        "Subspace": obj(&["features", "scores", "threshold", "anomalous_count"], json!({
            "features": strings,
            "scores": numbers,
            "threshold": { "type": "number" },
            "anomalous_count": count,
        })),
        "SubspaceList": list("Subspace"),
        "Bookmark": obj(&["id", "title", "sentence"], json!({
            "id": { "type": "string" },
            "title": { "type": "string" },
            "sentence": { "type": "string" },
            "chart": reference("Chart"),
        })),
        "BookmarkList": list("Bookmark"),
        "Report": obj(&["markdown", "json"], json!({
            "markdown": { "type": "string" },
            "json": obj(&["explanations", "bookmarks"], json!({
                "explanations": list("Explanation"),
                "bookmarks": { "type": "array", "items": obj(&["title", "sentence"], json!({
                    "title": { "type": "string" },
                    "sentence": { "type": "string" },
                    "chart": reference("Chart"),
                })) },
            })),
        })),
    });

    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "predex service responses",
        "$defs": defs,
    })
}

/// A schema document whose root is the response type `name`.
pub fn for_type(name: &str) -> Value {
    let mut doc = document();
    doc["$ref"] = json!(format!("#/$defs/{name}"));
    doc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_reference_resolves() {
        fn walk(v: &Value, defs: &serde_json::Map<String, Value>) {
            match v {
                Value::Object(m) => {
                    if let Some(Value::String(r)) = m.get("$ref") {
                        let name = r.strip_prefix("#/$defs/").expect("local reference");
                        assert!(defs.contains_key(name), "dangling reference {r}");
                    }
                    m.values().for_each(|x| walk(x, defs));
                }
                Value::Array(a) => a.iter().for_each(|x| walk(x, defs)),
                _ => {}
            }
        }
        let doc = document();
        let defs = doc["$defs"].as_object().unwrap();
        walk(&doc, defs);
        for t in RESPONSE_TYPES {
            assert!(defs.contains_key(t), "{t}");
        }
    }
}
