#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use expdb_core::registry::Store;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub struct App {
    pub dir: tempfile::TempDir,
    pub store: Arc<Store>,
    pub router: Router,
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }

    /// True when the body is exactly `{"error": {"code", "message", "details"}}`
    /// with a string code and message.
    pub fn is_error_body(&self) -> bool {
        let Ok(v) = serde_json::from_slice::<Value>(&self.body) else {
            return false;
        };
        let Some(obj) = v.as_object() else { return false };
        let Some(err) = obj.get("error").and_then(Value::as_object) else {
            return false;
        };
        obj.len() == 1
            && err.len() == 3
            && err.get("code").is_some_and(Value::is_string)
            && err.get("message").is_some_and(Value::is_string)
            && err.contains_key("details")
    }
}

impl App {
    pub fn new() -> App {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::open(dir.path()).unwrap());
        let router = expdb_server::router(store.clone());
        App { dir, store, router }
    }

    pub async fn call(&self, method: Method, uri: &str, body: impl Into<Body>) -> Reply {
        let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
        let res = self.router.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let content_type = res
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply {
            status,
            content_type,
            body,
        }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.call(Method::GET, uri, Body::empty()).await
    }

    pub async fn post(&self, uri: &str, body: impl Into<Body>) -> Reply {
        self.call(Method::POST, uri, body).await
    }

    pub async fn post_json(&self, uri: &str, value: &Value) -> Reply {
        self.post(uri, serde_json::to_vec(value).unwrap()).await
    }
}

/// 150 rows, 3 balanced classes, two numeric features.
pub fn three_class_arff() -> String {
    let mut s = String::from(
        "@relation flowers\n@attribute width numeric\n@attribute length numeric\n\
         @attribute species {setosa,versicolor,virginica}\n@data\n",
    );
    let names = ["setosa", "versicolor", "virginica"];
    for i in 0..150 {
        let c = i % 3;
        s.push_str(&format!("{}.{},{}.5,{}\n", c + 1, i % 10, i % 7 + c * 2, names[c]));
    }
    s
}

pub fn two_class_arff(relation: &str, n: usize) -> String {
    let mut s = format!("@relation {relation}\n@attribute x numeric\n@attribute class {{a,b}}\n@data\n");
    for i in 0..n {
        s.push_str(&format!("{i},{}\n", if i % 2 == 0 { "a" } else { "b" }));
    }
    s
}

/// Submission CSV for a task document: one row per (repeat, test row),
/// with `label(row)` as the prediction.
pub fn predictions_csv(task: &Value, label: impl Fn(usize) -> String) -> String {
    let schema: Vec<&str> = task["submission_schema"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    let mut out = schema.join(",");
    out.push('\n');
    let rows = task["splits"]["rows"].as_array().unwrap();
    let folds = task["splits"]["folds"].as_array().unwrap();
    for (repeat, assignment) in folds.iter().enumerate() {
        let assignment = assignment.as_array().unwrap();
        for (pos, row) in rows.iter().enumerate() {
            let row = row.as_u64().unwrap() as usize;
            out.push_str(&format!("{repeat},{},{row},{}", assignment[pos], label(row)));
            out.push_str(&",".repeat(schema.len() - 4));
            out.push('\n');
        }
    }
    out
}

/// Every file under `root` with its bytes, sorted by path.
pub fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.display().to_string(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
