//! The experiment database: datasets, flows, tasks, runs and challenges,
//! linked and persisted under one root directory.
//!
//! On disk every entity kind has an append-only JSON-lines log under
//! `<root>/log/` and raw uploads live in a content-addressed blob directory
//! under `<root>/blobs/`. Opening a store replays the logs; a partially
//! written trailing line is discarded and corrupt lines are skipped.
//!
//! All mutations go through a single writer. Readers work on an immutable
//! [`Snapshot`] that is swapped atomically after each successful write, so a
//! read that started before a write keeps seeing the old state.

mod blobs;
mod log;
mod queries;

use std::collections::{BTreeMap, HashSet};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{evaluate_run, EvaluationError, EvaluationResult, Measure, PredictionSet, Violation};
use crate::formats::{read_dataset, write_dataset, AttributeKind, Dataset, FormatId};
use crate::metadata::{compute_meta_features, MetaFeatureSet, MetadataError};
use crate::tasks::{create_task, mix, EstimationProcedure, Task, TaskError, TaskType};

pub use self::blobs::{digest, BlobError, BlobStore};
pub use self::log::RecoveryWarning;
pub use self::queries::{
    ChallengeStanding, CompareTable, EntityKind, FlowOverview, ImpactRow, LeaderboardEntry, OverviewEntry, Participant,
    SearchHit, TaskGroup, TaskRank,
};

use self::log::Log;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown dataset {0}")]
    UnknownDataset(u64),
    #[error("unknown task {0}")]
    UnknownTask(u64),
    #[error("unknown flow {0}")]
    UnknownFlow(u64),
    #[error("unknown run {0}")]
    UnknownRun(u64),
    #[error("unknown challenge {0}")]
    UnknownChallenge(u64),
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("dataset could not be parsed: {0}")]
    ParseFailed(String),
    #[error("parameter `{0}` declared more than once")]
    DuplicateParameter(String),
    #[error("value `{value}` is not valid for parameter `{name}`")]
    InvalidParameterValue { name: String, value: String },
    #[error("{0}")]
    InvalidInput(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("predictions failed validation ({} violations)", .0.len())]
    ValidationFailed(Vec<Violation>),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("a challenge needs at least one task")]
    EmptyChallenge,
    #[error("task {task} is not part of challenge {challenge}")]
    TaskNotInChallenge { challenge: u64, task: u64 },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<BlobError> for RegistryError {
    fn from(e: BlobError) -> Self {
        match e {
            BlobError::Io(e) => RegistryError::Io(e),
            other => RegistryError::Integrity(other.to_string()),
        }
    }
}

impl From<EvaluationError> for RegistryError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::ValidationFailed(v) => RegistryError::ValidationFailed(v),
            EvaluationError::DatasetMismatch(m) => RegistryError::Integrity(m),
        }
    }
}

pub type Result<T, E = RegistryError> = std::result::Result<T, E>;

pub fn parse_measure(id: &str) -> Result<Measure> {
    id.parse().map_err(|_| RegistryError::UnknownMeasure(id.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub dataset_id: u64,
    pub name: String,
    pub version: u32,
    #[serde(default)]
    pub description: String,
    pub format: FormatId,
    pub blob_digest: String,
    pub meta_features: MetaFeatureSet,
    pub upload_time: u64,
    pub default_target: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Int,
    Float,
    Text,
    Flag,
}

impl ParamKind {
    pub fn accepts(self, value: &str) -> bool {
        match self {
            ParamKind::Int => value.trim().parse::<i64>().is_ok(),
            ParamKind::Float => value.trim().parse::<f64>().is_ok_and(f64::is_finite),
            ParamKind::Text => true,
            ParamKind::Flag => matches!(value, "true" | "false"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowParameter {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlowProperties {
    /// Task types the flow can solve; empty means any.
    #[serde(default)]
    pub task_types: Vec<TaskType>,
    #[serde(default)]
    pub handles_missing: bool,
    #[serde(default)]
    pub handles_nominal: bool,
}

/// The user-supplied part of a flow registration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub name: String,
    pub version: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub parameters: Vec<FlowParameter>,
    #[serde(default)]
    pub properties: FlowProperties,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub flow_id: u64,
    pub name: String,
    pub version: String,
    #[serde(default)]
    pub description: String,
    pub parameters: Vec<FlowParameter>,
    pub properties: FlowProperties,
    pub upload_time: u64,
}

impl FlowRecord {
    pub fn label(&self) -> String {
        format!("{}@{}", self.name, self.version)
    }

    pub fn parameter(&self, name: &str) -> Option<&FlowParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    fn spec(&self) -> FlowSpec {
        FlowSpec {
            name: self.name.clone(),
            version: self.version.clone(),
            description: self.description.clone(),
            parameters: self.parameters.clone(),
            properties: self.properties.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParameterSetting {
    pub name: String,
    pub value: String,
}

impl ParameterSetting {
    pub fn new(name: impl Into<String>, value: impl Into<String>) -> Self {
        ParameterSetting {
            name: name.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub task_id: u64,
    pub flow_id: u64,
    /// Sorted by parameter name.
    pub parameter_settings: Vec<ParameterSetting>,
    pub evaluation: EvaluationResult,
    pub predictions_digest: String,
    pub upload_time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateRule {
    MeanRank,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeRecord {
    pub challenge_id: u64,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub task_ids: Vec<u64>,
    pub aggregate_rule: AggregateRule,
    pub upload_time: u64,
}

/// Predictions uploaded to a challenge without a registered flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub solution_id: u64,
    pub challenge_id: u64,
    pub task_id: u64,
    pub participant: String,
    pub evaluation: EvaluationResult,
    pub predictions_digest: String,
    pub upload_time: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
enum ChallengeLogEntry {
    Challenge(ChallengeRecord),
    Solution(SolutionRecord),
}

/// Options for [`Store::create_task`]; unset fields take task defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRequest {
    pub dataset_id: u64,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default, rename = "type")]
    pub task_type: Option<TaskType>,
    #[serde(default)]
    pub folds: Option<u32>,
    #[serde(default)]
    pub repeats: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stratified: Option<bool>,
    #[serde(default)]
    pub measures: Option<Vec<Measure>>,
}

#[derive(Debug)]
pub struct DatasetEntry {
    pub record: DatasetRecord,
    pub data: Dataset,
}

/// Immutable view of the whole store.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub(crate) datasets: BTreeMap<u64, Arc<DatasetEntry>>,
    pub(crate) flows: BTreeMap<u64, Arc<FlowRecord>>,
    pub(crate) tasks: BTreeMap<u64, Arc<Task>>,
    pub(crate) runs: BTreeMap<u64, Arc<RunRecord>>,
    pub(crate) challenges: BTreeMap<u64, Arc<ChallengeRecord>>,
    pub(crate) solutions: BTreeMap<u64, Arc<SolutionRecord>>,
}

fn next_id<T>(map: &BTreeMap<u64, T>) -> u64 {
    map.keys().next_back().map_or(1, |k| k + 1)
}

impl Snapshot {
    pub fn dataset(&self, id: u64) -> Result<&DatasetEntry> {
        self.datasets
            .get(&id)
            .map(|d| &**d)
            .ok_or(RegistryError::UnknownDataset(id))
    }

    pub fn flow(&self, id: u64) -> Result<&FlowRecord> {
        self.flows.get(&id).map(|f| &**f).ok_or(RegistryError::UnknownFlow(id))
    }

    pub fn task(&self, id: u64) -> Result<&Task> {
        self.tasks.get(&id).map(|t| &**t).ok_or(RegistryError::UnknownTask(id))
    }

    pub fn run(&self, id: u64) -> Result<&RunRecord> {
        self.runs.get(&id).map(|r| &**r).ok_or(RegistryError::UnknownRun(id))
    }

    pub fn challenge(&self, id: u64) -> Result<&ChallengeRecord> {
        self.challenges
            .get(&id)
            .map(|c| &**c)
            .ok_or(RegistryError::UnknownChallenge(id))
    }

    pub fn datasets(&self) -> impl Iterator<Item = &DatasetRecord> {
        self.datasets.values().map(|d| &d.record)
    }

    pub fn flows(&self) -> impl Iterator<Item = &FlowRecord> {
        self.flows.values().map(|f| &**f)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.values().map(|t| &**t)
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.values().map(|r| &**r)
    }

    pub fn challenges(&self) -> impl Iterator<Item = &ChallengeRecord> {
        self.challenges.values().map(|c| &**c)
    }

    pub fn solutions(&self) -> impl Iterator<Item = &SolutionRecord> {
        self.solutions.values().map(|s| &**s)
    }

    fn check_run(&self, run: &RunRecord) -> Result<()> {
        self.task(run.task_id)?;
        let flow = self.flow(run.flow_id)?;
        check_settings(flow, &run.parameter_settings)
    }

    fn check_challenge(&self, c: &ChallengeRecord) -> Result<()> {
        if c.task_ids.is_empty() {
            return Err(RegistryError::EmptyChallenge);
        }
        c.task_ids.iter().try_for_each(|&t| self.task(t).map(|_| ()))
    }

    fn check_solution(&self, s: &SolutionRecord) -> Result<()> {
        let c = self.challenge(s.challenge_id)?;
        if !c.task_ids.contains(&s.task_id) {
            return Err(RegistryError::TaskNotInChallenge {
                challenge: c.challenge_id,
                task: s.task_id,
            });
        }
        Ok(())
    }
}

fn check_settings(flow: &FlowRecord, settings: &[ParameterSetting]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in settings {
        let param = flow
            .parameter(&s.name)
            .ok_or_else(|| RegistryError::UnknownParameter(s.name.clone()))?;
        if !seen.insert(s.name.as_str()) {
            return Err(RegistryError::DuplicateParameter(s.name.clone()));
        }
        if !param.kind.accepts(&s.value) {
            return Err(RegistryError::InvalidParameterValue {
                name: s.name.clone(),
                value: s.value.clone(),
            });
        }
    }
    Ok(())
}

struct Logs {
    datasets: Log,
    flows: Log,
    tasks: Log,
    runs: Log,
    challenges: Log,
}

struct Writer {
    logs: Logs,
    blobs: BlobStore,
}

pub struct Store {
    root: PathBuf,
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<Writer>,
    blobs: BlobStore,
    recovery: Vec<RecoveryWarning>,
}

pub const LOG_NAMES: [&str; 5] = ["datasets", "flows", "tasks", "runs", "challenges"];

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Store {
    /// Opens the store at `root`, creating the directory layout if needed and
    /// replaying every log.
    pub fn open(root: impl AsRef<Path>) -> Result<Store> {
        let root = root.as_ref().to_path_buf();
        let log_dir = root.join("log");
        std::fs::create_dir_all(&log_dir)?;
        let blobs = BlobStore::open(root.join("blobs"))?;
        let mut warnings = Vec::new();
        let mut snap = Snapshot::default();

        let skip = |warnings: &mut Vec<RecoveryWarning>, log: &str, line: usize, err: RegistryError| {
            tracing::warn!(log, line, "skipping record: {err}");
            warnings.push(RecoveryWarning {
                log: format!("{log}.jsonl"),
                line,
                message: err.to_string(),
            });
        };
        let path = |name: &str| log_dir.join(format!("{name}.jsonl"));

        let (datasets_log, records) = Log::open::<DatasetRecord>(path("datasets"), &mut warnings)?;
        for (line, record) in records {
            let loaded = blobs
                .get(&record.blob_digest)
                .map_err(RegistryError::from)
                .and_then(|bytes| {
                    read_dataset(&bytes, record.format).map_err(|e| RegistryError::ParseFailed(e.to_string()))
                });
            match loaded {
                Ok(data) => {
                    snap.datasets
                        .insert(record.dataset_id, Arc::new(DatasetEntry { record, data }));
                }
                Err(e) => skip(&mut warnings, "datasets", line, e),
            }
        }

        let (flows_log, records) = Log::open::<FlowRecord>(path("flows"), &mut warnings)?;
        for (_, record) in records {
            snap.flows.insert(record.flow_id, Arc::new(record));
        }

        let (tasks_log, records) = Log::open::<Task>(path("tasks"), &mut warnings)?;
        for (line, task) in records {
            match snap.dataset(task.dataset_id) {
                Ok(_) => {
                    snap.tasks.insert(task.task_id, Arc::new(task));
                }
                Err(e) => skip(&mut warnings, "tasks", line, e),
            }
        }

        let (runs_log, records) = Log::open::<RunRecord>(path("runs"), &mut warnings)?;
        for (line, run) in records {
            match snap.check_run(&run) {
                Ok(()) => {
                    snap.runs.insert(run.run_id, Arc::new(run));
                }
                Err(e) => skip(&mut warnings, "runs", line, e),
            }
        }

        let (challenges_log, records) = Log::open::<ChallengeLogEntry>(path("challenges"), &mut warnings)?;
        for (line, entry) in records {
            let checked = match entry {
                ChallengeLogEntry::Challenge(c) => snap.check_challenge(&c).map(|()| {
                    snap.challenges.insert(c.challenge_id, Arc::new(c));
                }),
                ChallengeLogEntry::Solution(s) => snap.check_solution(&s).map(|()| {
                    snap.solutions.insert(s.solution_id, Arc::new(s));
                }),
            };
            if let Err(e) = checked {
                skip(&mut warnings, "challenges", line, e);
            }
        }

        Ok(Store {
            root,
            current: RwLock::new(Arc::new(snap)),
            writer: Mutex::new(Writer {
                logs: Logs {
                    datasets: datasets_log,
                    flows: flows_log,
                    tasks: tasks_log,
                    runs: runs_log,
                    challenges: challenges_log,
                },
                blobs: blobs.clone(),
            }),
            blobs,
            recovery: warnings,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Records skipped or truncated while opening the store.
    pub fn recovery_warnings(&self) -> &[RecoveryWarning] {
        &self.recovery
    }

    /// The current immutable view.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn write<T>(&self, f: impl FnOnce(&mut Writer, &mut Snapshot) -> Result<T>) -> Result<T> {
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut writer, &mut next)?;
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        Ok(out)
    }

    /// Reads a stored blob, verifying its digest.
    pub fn blob(&self, digest: &str) -> Result<Vec<u8>> {
        Ok(self.blobs.get(digest)?)
    }

    /// Stores a dataset upload. Re-uploading identical bytes under the same
    /// name returns the existing record; the boolean is true when a new
    /// record was created.
    pub fn register_dataset(
        &self,
        blob: &[u8],
        format: FormatId,
        name: &str,
        default_target: Option<&str>,
        description: &str,
    ) -> Result<(DatasetRecord, bool)> {
        if name.trim().is_empty() {
            return Err(RegistryError::InvalidInput("dataset name must not be empty".into()));
        }
        let data = read_dataset(blob, format).map_err(|e| RegistryError::ParseFailed(e.to_string()))?;
        let meta_features = compute_meta_features(&data, default_target).map_err(|e| match e {
            MetadataError::UnknownAttribute(a) => RegistryError::UnknownAttribute(a),
            MetadataError::EmptyInput => RegistryError::InvalidInput(e.to_string()),
        })?;
        let blob_digest = digest(blob);
        self.write(|w, snap| {
            let same_name: Vec<&DatasetRecord> = snap.datasets().filter(|d| d.name == name).collect();
            if let Some(existing) = same_name.iter().find(|d| d.blob_digest == blob_digest) {
                return Ok(((*existing).clone(), false));
            }
            let record = DatasetRecord {
                dataset_id: next_id(&snap.datasets),
                name: name.to_string(),
                version: same_name.iter().map(|d| d.version).max().unwrap_or(0) + 1,
                description: description.to_string(),
                format,
                blob_digest,
                meta_features,
                upload_time: now_ms(),
                default_target: default_target.map(str::to_string),
            };
            w.blobs.put(blob)?;
            w.logs.datasets.append(&record)?;
            snap.datasets.insert(
                record.dataset_id,
                Arc::new(DatasetEntry {
                    record: record.clone(),
                    data,
                }),
            );
            Ok((record, true))
        })
    }

    /// Serializes a stored dataset. The original format is served from the
    /// verified blob; other formats are converted.
    pub fn dataset_file(&self, dataset_id: u64, format: FormatId) -> Result<Vec<u8>> {
        let snap = self.snapshot();
        let entry = snap.dataset(dataset_id)?;
        if format == entry.record.format {
            self.blob(&entry.record.blob_digest)
        } else {
            Ok(write_dataset(&entry.data, format))
        }
    }

    /// Registers a flow; an identical `(name, version)` registration returns
    /// the existing record, a differing one is a conflict.
    pub fn register_flow(&self, spec: FlowSpec) -> Result<(FlowRecord, bool)> {
        if spec.name.trim().is_empty() || spec.version.trim().is_empty() {
            return Err(RegistryError::InvalidInput(
                "flow name and version must not be empty".into(),
            ));
        }
        let mut seen = HashSet::new();
        for p in &spec.parameters {
            if !seen.insert(p.name.as_str()) {
                return Err(RegistryError::DuplicateParameter(p.name.clone()));
            }
            if let Some(d) = &p.default {
                if !p.kind.accepts(d) {
                    return Err(RegistryError::InvalidParameterValue {
                        name: p.name.clone(),
                        value: d.clone(),
                    });
                }
            }
        }
        self.write(|w, snap| {
            if let Some(existing) = snap.flows().find(|f| f.name == spec.name && f.version == spec.version) {
                return if existing.spec() == spec {
                    Ok((existing.clone(), false))
                } else {
                    Err(RegistryError::Conflict(format!(
                        "flow {} is already registered with a different definition",
                        existing.label()
                    )))
                };
            }
            let record = FlowRecord {
                flow_id: next_id(&snap.flows),
                name: spec.name,
                version: spec.version,
                description: spec.description,
                parameters: spec.parameters,
                properties: spec.properties,
                upload_time: now_ms(),
            };
            w.logs.flows.append(&record)?;
            snap.flows.insert(record.flow_id, Arc::new(record.clone()));
            Ok((record, true))
        })
    }

    /// Creates a task over a stored dataset. The target defaults to the
    /// dataset's default target, the type to the target's kind, and the seed
    /// to `mix(task_id)`.
    pub fn create_task(&self, req: &TaskRequest) -> Result<Task> {
        self.write(|w, snap| {
            let entry = snap.dataset(req.dataset_id)?;
            let target = req
                .target
                .clone()
                .or_else(|| entry.record.default_target.clone())
                .ok_or_else(|| RegistryError::InvalidInput("no target given and the dataset has no default".into()))?;
            let attr = entry
                .data
                .attribute(&target)
                .ok_or_else(|| RegistryError::UnknownAttribute(target.clone()))?;
            let task_type = match (req.task_type, &attr.kind) {
                (Some(t), _) => t,
                (None, AttributeKind::Nominal(_)) => TaskType::SupervisedClassification,
                (None, AttributeKind::Numeric) => TaskType::SupervisedRegression,
                (None, AttributeKind::String) => {
                    return Err(TaskError::TargetKindMismatch {
                        target,
                        expected: "nominal or numeric",
                    }
                    .into())
                }
            };
            let task_id = next_id(&snap.tasks);
            let defaults = EstimationProcedure::defaults(task_type, mix(task_id));
            let proc = EstimationProcedure {
                folds: req.folds.unwrap_or(defaults.folds),
                repeats: req.repeats.unwrap_or(defaults.repeats),
                seed: req.seed.unwrap_or(defaults.seed),
                stratified: req.stratified.unwrap_or(defaults.stratified),
                ..defaults
            };
            let mut task = create_task(&entry.data, req.dataset_id, &target, task_type, proc)?;
            if let Some(measures) = &req.measures {
                task = task.with_measures(measures.clone())?;
            }
            task.task_id = task_id;
            task.name = format!(
                "Predict `{target}` of {} (v{})",
                entry.record.name, entry.record.version
            );
            w.logs.tasks.append(&task)?;
            snap.tasks.insert(task_id, Arc::new(task.clone()));
            Ok(task)
        })
    }

    /// Validates, evaluates and stores a run. Nothing is persisted when any
    /// check fails.
    pub fn submit_run(
        &self,
        task_id: u64,
        flow_id: u64,
        mut settings: Vec<ParameterSetting>,
        predictions: &PredictionSet,
    ) -> Result<RunRecord> {
        settings.sort();
        self.write(|w, snap| {
            let task = snap.task(task_id)?;
            let flow = snap.flow(flow_id)?;
            check_settings(flow, &settings)?;
            let types = &flow.properties.task_types;
            if !types.is_empty() && !types.contains(&task.task_type) {
                return Err(RegistryError::InvalidInput(format!(
                    "flow {} does not solve {} tasks",
                    flow.label(),
                    task.task_type.as_str()
                )));
            }
            let ds = &snap.dataset(task.dataset_id)?.data;
            let evaluation = evaluate_run(task, ds, predictions)?;
            let predictions_digest = w.blobs.put(predictions.to_csv(task).as_bytes())?;
            let run = RunRecord {
                run_id: next_id(&snap.runs),
                task_id,
                flow_id,
                parameter_settings: settings,
                evaluation,
                predictions_digest,
                upload_time: now_ms(),
            };
            w.logs.runs.append(&run)?;
            snap.runs.insert(run.run_id, Arc::new(run.clone()));
            Ok(run)
        })
    }

    pub fn create_challenge(&self, name: &str, task_ids: &[u64], description: &str) -> Result<ChallengeRecord> {
        if name.trim().is_empty() {
            return Err(RegistryError::InvalidInput("challenge name must not be empty".into()));
        }
        if task_ids.is_empty() {
            return Err(RegistryError::EmptyChallenge);
        }
        let mut unique = HashSet::new();
        if let Some(dup) = task_ids.iter().find(|t| !unique.insert(**t)) {
            return Err(RegistryError::InvalidInput(format!("task {dup} listed twice")));
        }
        self.write(|w, snap| {
            let record = ChallengeRecord {
                challenge_id: next_id(&snap.challenges),
                name: name.to_string(),
                description: description.to_string(),
                task_ids: task_ids.to_vec(),
                aggregate_rule: AggregateRule::MeanRank,
                upload_time: now_ms(),
            };
            snap.check_challenge(&record)?;
            w.logs
                .challenges
                .append(&ChallengeLogEntry::Challenge(record.clone()))?;
            snap.challenges.insert(record.challenge_id, Arc::new(record.clone()));
            Ok(record)
        })
    }

    /// Evaluates predictions for a member task of a challenge and stores
    /// them as a solution entry for `participant`.
    pub fn submit_solution(
        &self,
        challenge_id: u64,
        task_id: u64,
        participant: &str,
        predictions: &PredictionSet,
    ) -> Result<SolutionRecord> {
        if participant.trim().is_empty() {
            return Err(RegistryError::InvalidInput("participant name must not be empty".into()));
        }
        self.write(|w, snap| {
            let mut solution = SolutionRecord {
                solution_id: next_id(&snap.solutions),
                challenge_id,
                task_id,
                participant: participant.to_string(),
                evaluation: EvaluationResult {
                    measures: BTreeMap::new(),
                    confusion_matrix: None,
                },
                predictions_digest: String::new(),
                upload_time: now_ms(),
            };
            snap.check_solution(&solution)?;
            let task = snap.task(task_id)?;
            let ds = &snap.dataset(task.dataset_id)?.data;
            solution.evaluation = crate::evaluation::evaluate_solution(task, ds, predictions)?;
            solution.predictions_digest = w.blobs.put(predictions.to_csv(task).as_bytes())?;
            w.logs
                .challenges
                .append(&ChallengeLogEntry::Solution(solution.clone()))?;
            snap.solutions.insert(solution.solution_id, Arc::new(solution.clone()));
            Ok(solution)
        })
    }

    pub fn log_path(&self, name: &str) -> PathBuf {
        self.root.join("log").join(format!("{name}.jsonl"))
    }
}

#[cfg(test)]
mod tests;
