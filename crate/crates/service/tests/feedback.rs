mod common;

use std::collections::BTreeSet;
use std::path::Path;

use axum::http::StatusCode;
use common::{app, get, post, rating, send};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const DIMS: [&str; 4] = ["justification", "education", "involvement", "acceptance"];
const MODES: [&str; 2] = ["with_explanation", "without_explanation"];

/// Recomputes the summary straight from the log file, without the service's
/// own types.
fn fold_log(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap_or_default();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let mut dimensions = serde_json::Map::new();
    for dim in DIMS {
        let mut modes = serde_json::Map::new();
        for mode in MODES {
            let mut histogram = [0u64; 5];
            for r in lines.iter().filter(|r| r["mode"] == mode) {
                histogram[r["ratings"][dim].as_u64().unwrap() as usize - 1] += 1;
            }
            let count: u64 = histogram.iter().sum();
            let sum: u64 = (1..=5).map(|k| k * histogram[k as usize - 1]).sum();
            let mean = if count == 0 { Value::Null } else { json!(sum as f64 / count as f64) };
            modes.insert(mode.into(), json!({ "histogram": histogram, "count": count, "mean": mean }));
        }
        dimensions.insert(dim.into(), Value::Object(modes));
    }
    json!({ "records": lines.len(), "dimensions": dimensions })
}

#[tokio::test]
async fn stored_record_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("feedback.jsonl");
    let app = app(&log);
    let (status, body) = post(&app, "/api/feedback", &rating("sess", "s01", "with_explanation", [5; 4])).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({ "id": 1 }));

    let text = std::fs::read_to_string(&log).unwrap();
    let line: Value = serde_json::from_str(text.trim_end()).unwrap();
    assert_eq!(line["id"], 1);
    assert_eq!(line["session_id"], "sess");
    assert_eq!(line["question_id"], "s01");
    assert_eq!(line["ratings"], json!({ "justification": 5, "education": 5, "involvement": 5, "acceptance": 5 }));
    assert!(line["timestamp"].as_str().is_some_and(|t| t.contains('T')));
}

#[tokio::test]
async fn invalid_ratings_are_rejected_and_not_stored() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("feedback.jsonl");
    let app = app(&log);
    let six = rating("s", "q", "with_explanation", [6, 1, 1, 1]);
    let mut missing = rating("s", "q", "with_explanation", [1; 4]);
    missing["ratings"].as_object_mut().unwrap().remove("acceptance");
    let mut bad_mode = rating("s", "q", "with_explanation", [1; 4]);
    bad_mode["mode"] = json!("sometimes");
    for body in [six, missing, bad_mode] {
        let (status, err) = post(&app, "/api/feedback", &body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(err["error"].is_string());
    }
    let (status, _) = send(&app, "POST", "/api/feedback", Some("{not json")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(std::fs::read_to_string(&log).unwrap(), "");
}

#[tokio::test]
async fn empty_log_summarizes_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("feedback.jsonl");
    let (status, summary) = get(&app(&log), "/api/survey/summary").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary, fold_log(&log));
    assert_eq!(summary["records"], 0);
    assert_eq!(
        summary["dimensions"]["education"]["with_explanation"],
        json!({ "histogram": [0, 0, 0, 0, 0], "count": 0, "mean": null })
    );
}

#[tokio::test]
async fn three_records_hand_computed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("feedback.jsonl"));
    for (q, r) in [("s01", [5, 4, 3, 2]), ("s02", [4, 4, 1, 2]), ("s03", [5, 2, 5, 1])] {
        let (status, _) = post(&app, "/api/feedback", &rating("a", q, "with_explanation", r)).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, s) = get(&app, "/api/survey/summary").await;
    let w = |dim: &str| s["dimensions"][dim]["with_explanation"].clone();
    assert_eq!(w("justification"), json!({ "histogram": [0, 0, 0, 1, 2], "count": 3, "mean": 14.0 / 3.0 }));
    assert_eq!(w("education"), json!({ "histogram": [0, 1, 0, 2, 0], "count": 3, "mean": 10.0 / 3.0 }));
    assert_eq!(w("involvement"), json!({ "histogram": [1, 0, 1, 0, 1], "count": 3, "mean": 3.0 }));
    assert_eq!(w("acceptance"), json!({ "histogram": [1, 2, 0, 0, 0], "count": 3, "mean": 5.0 / 3.0 }));
    for dim in DIMS {
        assert_eq!(s["dimensions"][dim]["without_explanation"]["count"], 0);
    }
}

#[tokio::test]
async fn modes_are_never_merged() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir.path().join("feedback.jsonl"));
    post(&app, "/api/feedback", &rating("a", "s01", "with_explanation", [5; 4])).await;
    post(&app, "/api/feedback", &rating("a", "s01", "without_explanation", [1; 4])).await;
    post(&app, "/api/feedback", &rating("b", "s01", "without_explanation", [2; 4])).await;
    let (_, s) = get(&app, "/api/survey/summary").await;
    for dim in DIMS {
        assert_eq!(s["dimensions"][dim]["with_explanation"]["histogram"], json!([0, 0, 0, 0, 1]));
        assert_eq!(s["dimensions"][dim]["without_explanation"]["histogram"], json!([1, 1, 0, 0, 0]));
        assert_eq!(s["dimensions"][dim]["without_explanation"]["mean"], 1.5);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_posts_get_distinct_ids() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("feedback.jsonl");
    let app = app(&log);
    let tasks: Vec<_> = (0..32)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move {
                let body = rating(&format!("sess{i}"), "s01", MODES[i % 2], [1 + (i % 5) as u8; 4]);
                post(&app, "/api/feedback", &body).await
            })
        })
        .collect();
    let mut ids = BTreeSet::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        ids.insert(body["id"].as_u64().unwrap());
    }
    assert_eq!(ids, (1..=32).collect());
    let text = std::fs::read_to_string(&log).unwrap();
    let logged: BTreeSet<u64> =
        text.lines().map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_u64().unwrap()).collect();
    assert_eq!(logged, ids);
}

#[tokio::test]
async fn fifty_records_match_the_log_and_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("feedback.jsonl");
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    {
        let app = app(&log);
        for i in 0..50 {
            let mode = MODES[rng.random_range(0..2)];
            let r = [0; 4].map(|_: u8| rng.random_range(1..=5u8));
            let (status, body) =
                post(&app, "/api/feedback", &rating(&format!("p{}", i / 10), &format!("s{:02}", i % 10 + 1), mode, r))
                    .await;
            assert_eq!(status, StatusCode::OK);
            assert_eq!(body["id"], i + 1);
        }
        let (_, summary) = get(&app, "/api/survey/summary").await;
        assert_eq!(summary, fold_log(&log));
        assert_eq!(summary["records"], 50);
    }
    // A fresh process sees every acknowledged record and continues the ids.
    let app = app(&log);
    let (_, summary) = get(&app, "/api/survey/summary").await;
    assert_eq!(summary, fold_log(&log));
    let (_, body) = post(&app, "/api/feedback", &rating("late", "s01", "with_explanation", [3; 4])).await;
    assert_eq!(body["id"], 51);
    let (_, summary) = get(&app, "/api/survey/summary").await;
    assert_eq!(summary, fold_log(&log));
    assert_eq!(summary["records"], 51);
}

#[tokio::test]
async fn unterminated_tail_is_discarded_on_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("feedback.jsonl");
    {
        let app = app(&log);
        post(&app, "/api/feedback", &rating("a", "s01", "with_explanation", [4; 4])).await;
    }
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str(r#"{"id":2,"timestamp":"x","sess"#);
    std::fs::write(&log, &text).unwrap();

    let app = app(&log);
    let (_, body) = post(&app, "/api/feedback", &rating("b", "s02", "with_explanation", [2; 4])).await;
    assert_eq!(body["id"], 2);
    let (_, summary) = get(&app, "/api/survey/summary").await;
    assert_eq!(summary["records"], 2);
    assert_eq!(summary, fold_log(&log));
}

#[test]
fn corrupt_log_refuses_to_open() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("feedback.jsonl");
    std::fs::write(&log, "garbage\n").unwrap();
    let err = qaexplain_service::FeedbackLog::open(&log).err().expect("corrupt log rejected");
    assert!(err.to_string().contains("line 1"), "{err}");

    let ok = r#"{"id":1,"timestamp":"t","session_id":"s","question_id":"q","mode":"with_explanation","ratings":{"justification":1,"education":2,"involvement":3,"acceptance":4}}"#;
    std::fs::write(&log, format!("{ok}\n{}\n", ok.replace("\"id\":1", "\"id\":2").replace(":4}", ":9}"))).unwrap();
    let err = qaexplain_service::FeedbackLog::open(&log).err().expect("out-of-range rating rejected");
    assert!(err.to_string().contains("line 2"), "{err}");
    std::fs::write(&log, format!("{ok}\n{ok}\n")).unwrap();
    assert!(qaexplain_service::FeedbackLog::open(&log).is_err(), "repeated id rejected");
}
