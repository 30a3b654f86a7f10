use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, PathRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use expdb_core::evaluation::{Measure, PredictionSet};
use expdb_core::formats::FormatId;
use expdb_core::registry::{parse_measure, FlowSpec, ParameterSetting, RegistryError, Store, TaskRequest};
use expdb_core::tasks::task_document;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;

type ApiResult = Result<Response, ApiError>;
type Params = Result<Query<HashMap<String, String>>, QueryRejection>;
type IdPath = Result<Path<u64>, PathRejection>;
type Body = Result<Bytes, BytesRejection>;

pub const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;
const DEFAULT_LIMIT: usize = 100;

pub fn router(store: Arc<Store>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/datasets", get(list_datasets).post(upload_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/datasets/{id}/file", get(dataset_file))
        .route("/datasets/{id}/leaderboard", get(dataset_leaderboard))
        .route("/tasks", get(list_tasks).post(create_task))
        .route("/tasks/{id}", get(get_task))
        .route("/flows", get(list_flows).post(register_flow))
        .route("/flows/{id}", get(get_flow))
        .route("/flows/{id}/overview", get(flow_overview))
        .route("/flows/{id}/parameter-impact", get(parameter_impact))
        .route("/runs", get(list_runs).post(submit_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/predictions", get(run_predictions))
        .route("/challenges", get(list_challenges).post(create_challenge))
        .route("/challenges/{id}", get(get_challenge))
        .route("/challenges/{id}/leaderboard", get(challenge_leaderboard))
        .route("/challenges/{id}/solutions", get(list_solutions).post(submit_solution))
        .route("/search", get(search))
        .route("/compare", get(compare));
    Router::new()
        .nest("/api/v1", api)
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(store)
}

async fn not_found(uri: Uri) -> ApiError {
    ApiError::new(
        StatusCode::NOT_FOUND,
        "not_found",
        format!("no route for {}", uri.path()),
    )
}

async fn method_not_allowed(method: Method, uri: Uri) -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        format!("{method} is not supported on {}", uri.path()),
    )
}

fn json_response(status: StatusCode, value: &impl Serialize) -> Response {
    let body = serde_json::to_vec(value).expect("response serializes");
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn ok(value: &impl Serialize) -> ApiResult {
    Ok(json_response(StatusCode::OK, value))
}

fn id(path: IdPath) -> Result<u64, ApiError> {
    path.map(|Path(id)| id)
        .map_err(|e| ApiError::bad_request(format!("invalid id: {}", e.body_text())))
}

fn params(query: Params) -> Result<HashMap<String, String>, ApiError> {
    query
        .map(|Query(q)| q)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn body(bytes: Body) -> Result<Bytes, ApiError> {
    bytes.map_err(|e| ApiError::new(e.status(), "bad_request", e.body_text()))
}

fn parse_json<T: DeserializeOwned>(bytes: Body) -> Result<T, ApiError> {
    let bytes = body(bytes)?;
    serde_json::from_slice(&bytes).map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}")))
}

fn parse_param<T: FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    q.get(key)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::bad_request(format!("invalid value `{v}` for `{key}`")))
        })
        .transpose()
}

fn required<'a>(q: &'a HashMap<String, String>, key: &str) -> Result<&'a str, ApiError> {
    q.get(key)
        .map(String::as_str)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| ApiError::bad_request(format!("missing query parameter `{key}`")))
}

fn measure_param(q: &HashMap<String, String>, default: Measure) -> Result<Measure, ApiError> {
    match q.get("measure").filter(|m| !m.is_empty()) {
        Some(m) => Ok(parse_measure(m)?),
        None => Ok(default),
    }
}

fn format_param(q: &HashMap<String, String>) -> Result<Option<FormatId>, ApiError> {
    match q.get("format").filter(|f| !f.is_empty()) {
        Some(f) => f.parse().map(Some).map_err(|e: expdb_core::formats::FormatError| {
            ApiError::new(StatusCode::BAD_REQUEST, "unknown_format", e.to_string())
        }),
        None => Ok(None),
    }
}

fn page<T: Serialize>(q: &HashMap<String, String>, items: impl Iterator<Item = T>) -> ApiResult {
    let limit = parse_param(q, "limit")?.unwrap_or(DEFAULT_LIMIT);
    let offset = parse_param(q, "offset")?.unwrap_or(0);
    ok(&items.skip(offset).take(limit).collect::<Vec<_>>())
}

fn id_list(q: &HashMap<String, String>, key: &str) -> Result<Vec<u64>, ApiError> {
    required(q, key)?
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| ApiError::bad_request(format!("invalid id `{s}` in `{key}`")))
        })
        .collect()
}

/// Runs a store mutation off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, RegistryError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

async fn health() -> ApiResult {
    ok(&json!({"status": "ok"}))
}

async fn list_datasets(State(store): State<Arc<Store>>, q: Params) -> ApiResult {
    let q = params(q)?;
    let snap = store.snapshot();
    page(&q, snap.datasets())
}

async fn upload_dataset(State(store): State<Arc<Store>>, q: Params, bytes: Body) -> ApiResult {
    let q = params(q)?;
    let format = format_param(&q)?.unwrap_or(FormatId::Arff);
    if format == FormatId::Csv {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "unknown_format",
            "datasets are uploaded as arff or mld",
        ));
    }
    let name = required(&q, "name")?.to_string();
    let target = q.get("target").filter(|t| !t.is_empty()).cloned();
    let description = q.get("description").cloned().unwrap_or_default();
    let bytes = body(bytes)?;
    let (record, created) =
        blocking(move || store.register_dataset(&bytes, format, &name, target.as_deref(), &description)).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok(json_response(
        status,
        &json!({
            "dataset_id": record.dataset_id,
            "name": record.name,
            "version": record.version,
            "created": created,
        }),
    ))
}

async fn get_dataset(State(store): State<Arc<Store>>, path: IdPath) -> ApiResult {
    let snap = store.snapshot();
    ok(&snap.dataset(id(path)?)?.record)
}

async fn dataset_file(State(store): State<Arc<Store>>, path: IdPath, q: Params) -> ApiResult {
    let id = id(path)?;
    let q = params(q)?;
    let format = match format_param(&q)? {
        Some(f) => f,
        None => store.snapshot().dataset(id)?.record.format,
    };
    let bytes = blocking(move || store.dataset_file(id, format)).await?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], bytes).into_response())
}

async fn dataset_leaderboard(State(store): State<Arc<Store>>, path: IdPath, q: Params) -> ApiResult {
    let id = id(path)?;
    let q = params(q)?;
    let snap = store.snapshot();
    snap.dataset(id)?;
    let default = snap
        .tasks()
        .find(|t| t.dataset_id == id)
        .map_or(Measure::PredictiveAccuracy, |t| t.primary_measure());
    let measure = measure_param(&q, default)?;
    let entries = snap.leaderboard(id, measure)?;
    ok(&json!({"dataset_id": id, "measure": measure, "entries": entries}))
}

#[derive(Serialize)]
struct TaskSummary<'a> {
    task_id: u64,
    name: &'a str,
    #[serde(rename = "type")]
    task_type: expdb_core::tasks::TaskType,
    dataset_id: u64,
    target: &'a str,
}

async fn list_tasks(State(store): State<Arc<Store>>, q: Params) -> ApiResult {
    let q = params(q)?;
    let dataset: Option<u64> = parse_param(&q, "dataset")?;
    let snap = store.snapshot();
    page(
        &q,
        snap.tasks()
            .filter(|t| dataset.is_none_or(|d| t.dataset_id == d))
            .map(|t| TaskSummary {
                task_id: t.task_id,
                name: &t.name,
                task_type: t.task_type,
                dataset_id: t.dataset_id,
                target: &t.target,
            }),
    )
}

fn task_response(status: StatusCode, task: &expdb_core::tasks::Task) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        task_document(task),
    )
        .into_response()
}

async fn create_task(State(store): State<Arc<Store>>, bytes: Body) -> ApiResult {
    let req: TaskRequest = parse_json(bytes)?;
    let task = blocking(move || store.create_task(&req)).await?;
    Ok(task_response(StatusCode::CREATED, &task))
}

async fn get_task(State(store): State<Arc<Store>>, path: IdPath) -> ApiResult {
    let snap = store.snapshot();
    Ok(task_response(StatusCode::OK, snap.task(id(path)?)?))
}

async fn list_flows(State(store): State<Arc<Store>>, q: Params) -> ApiResult {
    let q = params(q)?;
    let snap = store.snapshot();
    page(&q, snap.flows())
}

async fn register_flow(State(store): State<Arc<Store>>, bytes: Body) -> ApiResult {
    let spec: FlowSpec = parse_json(bytes)?;
    let (record, created) = blocking(move || store.register_flow(spec)).await?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok(json_response(
        status,
        &json!({"flow_id": record.flow_id, "name": record.name, "version": record.version, "created": created}),
    ))
}

async fn get_flow(State(store): State<Arc<Store>>, path: IdPath) -> ApiResult {
    let snap = store.snapshot();
    ok(snap.flow(id(path)?)?)
}

async fn flow_overview(State(store): State<Arc<Store>>, path: IdPath) -> ApiResult {
    let snap = store.snapshot();
    ok(&snap.flow_overview(id(path)?)?)
}

async fn parameter_impact(State(store): State<Arc<Store>>, path: IdPath, q: Params) -> ApiResult {
    let id = id(path)?;
    let q = params(q)?;
    let snap = store.snapshot();
    snap.flow(id)?;
    let param = required(&q, "param")?;
    let measure = measure_param(&q, Measure::PredictiveAccuracy)?;
    let dataset = parse_param(&q, "dataset")?;
    let rows = snap.parameter_impact(id, param, measure, dataset)?;
    ok(&json!({"flow_id": id, "parameter": param, "measure": measure, "rows": rows}))
}

/// Setting values may be given as JSON strings, numbers or booleans.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingBody {
    name: String,
    value: Value,
}

fn settings(raw: Vec<SettingBody>) -> Result<Vec<ParameterSetting>, ApiError> {
    raw.into_iter()
        .map(|s| {
            let value = match s.value {
                Value::String(v) => v,
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                other => {
                    return Err(ApiError::bad_request(format!(
                        "setting `{}` must be a string, number or boolean, got {other}",
                        s.name
                    )))
                }
            };
            Ok(ParameterSetting::new(s.name, value))
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunBody {
    task_id: u64,
    flow_id: u64,
    #[serde(default)]
    settings: Vec<SettingBody>,
    predictions: String,
}

fn parse_predictions(store: &Store, task_id: u64, text: &str) -> Result<PredictionSet, ApiError> {
    let snap = store.snapshot();
    let task = snap.task(task_id)?;
    PredictionSet::from_csv(task, text)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_predictions", e.to_string()))
}

async fn list_runs(State(store): State<Arc<Store>>, q: Params) -> ApiResult {
    let q = params(q)?;
    let task: Option<u64> = parse_param(&q, "task")?;
    let flow: Option<u64> = parse_param(&q, "flow")?;
    let snap = store.snapshot();
    page(
        &q,
        snap.runs()
            .filter(|r| task.is_none_or(|t| r.task_id == t) && flow.is_none_or(|f| r.flow_id == f)),
    )
}

async fn submit_run(State(store): State<Arc<Store>>, bytes: Body) -> ApiResult {
    let req: RunBody = parse_json(bytes)?;
    let settings = settings(req.settings)?;
    store.snapshot().flow(req.flow_id)?;
    let predictions = parse_predictions(&store, req.task_id, &req.predictions)?;
    let run = blocking(move || store.submit_run(req.task_id, req.flow_id, settings, &predictions)).await?;
    Ok(json_response(
        StatusCode::CREATED,
        &json!({"run_id": run.run_id, "evaluation": run.evaluation}),
    ))
}

async fn get_run(State(store): State<Arc<Store>>, path: IdPath) -> ApiResult {
    let snap = store.snapshot();
    ok(snap.run(id(path)?)?)
}

async fn run_predictions(State(store): State<Arc<Store>>, path: IdPath) -> ApiResult {
    let digest = store.snapshot().run(id(path)?)?.predictions_digest.clone();
    let bytes = blocking(move || store.blob(&digest)).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], bytes).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChallengeBody {
    name: String,
    task_ids: Vec<u64>,
    #[serde(default)]
    description: String,
}

async fn list_challenges(State(store): State<Arc<Store>>, q: Params) -> ApiResult {
    let q = params(q)?;
    let snap = store.snapshot();
    page(&q, snap.challenges())
}

async fn create_challenge(State(store): State<Arc<Store>>, bytes: Body) -> ApiResult {
    let req: ChallengeBody = parse_json(bytes)?;
    let record = blocking(move || store.create_challenge(&req.name, &req.task_ids, &req.description)).await?;
    Ok(json_response(StatusCode::CREATED, &record))
}

async fn get_challenge(State(store): State<Arc<Store>>, path: IdPath) -> ApiResult {
    let snap = store.snapshot();
    ok(snap.challenge(id(path)?)?)
}

async fn challenge_leaderboard(State(store): State<Arc<Store>>, path: IdPath) -> ApiResult {
    let id = id(path)?;
    let snap = store.snapshot();
    let standings = snap.challenge_leaderboard(id)?;
    ok(&json!({"challenge_id": id, "name": snap.challenge(id)?.name, "standings": standings}))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionBody {
    task_id: u64,
    participant: String,
    predictions: String,
}

async fn list_solutions(State(store): State<Arc<Store>>, path: IdPath, q: Params) -> ApiResult {
    let id = id(path)?;
    let q = params(q)?;
    let snap = store.snapshot();
    snap.challenge(id)?;
    page(&q, snap.solutions().filter(|s| s.challenge_id == id))
}

async fn submit_solution(State(store): State<Arc<Store>>, path: IdPath, bytes: Body) -> ApiResult {
    let id = id(path)?;
    let req: SolutionBody = parse_json(bytes)?;
    let snap = store.snapshot();
    let challenge = snap.challenge(id)?;
    if !challenge.task_ids.contains(&req.task_id) {
        return Err(RegistryError::TaskNotInChallenge {
            challenge: id,
            task: req.task_id,
        }
        .into());
    }
    let predictions = parse_predictions(&store, req.task_id, &req.predictions)?;
    let solution = blocking(move || store.submit_solution(id, req.task_id, &req.participant, &predictions)).await?;
    Ok(json_response(StatusCode::CREATED, &solution))
}

async fn search(State(store): State<Arc<Store>>, q: Params) -> ApiResult {
    let q = params(q)?;
    let query = q.get("q").cloned().unwrap_or_default();
    let hits = store.snapshot().search(&query);
    ok(&json!({"query": query, "hits": hits}))
}

async fn compare(State(store): State<Arc<Store>>, q: Params) -> ApiResult {
    let q = params(q)?;
    let flows = id_list(&q, "flows")?;
    let datasets = id_list(&q, "datasets")?;
    let measure = measure_param(&q, Measure::PredictiveAccuracy)?;
    let table = store.snapshot().compare(&flows, &datasets, measure)?;
    match q.get("format").map(String::as_str).unwrap_or("json") {
        "json" => ok(&table),
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], table.to_csv()).into_response()),
        other => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "unknown_format",
            format!("compare output is json or csv, not `{other}`"),
        )),
    }
}
