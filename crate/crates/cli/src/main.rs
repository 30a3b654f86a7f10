//! `expdb`: command-line client for the experiment database server.

mod client;
mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use expdb_core::formats::{convert, read_dataset, FormatId};
use expdb_core::metadata::{compute_meta_features, dataset_summary};
use serde_json::{json, Value};
use thiserror::Error;

use client::{Client, Reply};
use render::{cell, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{code} ({status}): {message}")]
    Api {
        status: u16,
        code: String,
        message: String,
        body: Vec<u8>,
    },
    #[error("server unreachable: {0}")]
    Unreachable(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("{0}")]
    Local(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Api { .. } | CliError::Unreachable(_) | CliError::Protocol(_) => 2,
            CliError::Local(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "expdb", version, about = "Client for the expdb experiment database")]
struct Cli {
    /// Server base URL.
    #[arg(long, global = true, env = "EXPDB_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,

    /// Print the server's JSON response body unchanged.
    #[arg(long, global = true)]
    json: bool,

    /// File format (arff, mld, csv) or output format (json, csv) depending on the command.
    #[arg(long, global = true)]
    format: Option<String>,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Upload, fetch and inspect datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Create and fetch tasks.
    #[command(subcommand)]
    Task(TaskCmd),
    /// Register flows and query their results.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Submit and fetch runs.
    #[command(subcommand)]
    Run(RunCmd),
    /// Create challenges, submit solutions, show standings.
    #[command(subcommand)]
    Challenge(ChallengeCmd),
    /// Search datasets, flows, tasks and challenges by name.
    Search { query: String },
    /// Best scores of flows across datasets.
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        flows: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        datasets: Vec<u64>,
        #[arg(long)]
        measure: Option<String>,
    },
    /// Convert a dataset file between formats (offline).
    Convert {
        input: PathBuf,
        output: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long)]
        from: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum DatasetCmd {
    Upload {
        file: PathBuf,
        /// Dataset name; defaults to the file stem.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        description: Option<String>,
    },
    Get {
        id: u64,
    },
    /// Download the dataset file.
    File {
        id: u64,
    },
    /// Profile a local dataset file (offline).
    Summarize {
        file: PathBuf,
        #[arg(long)]
        target: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum TaskCmd {
    Create(TaskArgs),
    Get { id: u64 },
}

#[derive(Debug, Args)]
struct TaskArgs {
    #[arg(long)]
    dataset: u64,
    #[arg(long)]
    target: Option<String>,
    /// supervised_classification or supervised_regression.
    #[arg(long = "type")]
    task_type: Option<String>,
    #[arg(long)]
    folds: Option<u32>,
    #[arg(long)]
    repeats: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stratified: Option<bool>,
    #[arg(long = "measure")]
    measures: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum FlowCmd {
    /// Register a flow from a JSON spec file or from flags.
    Register {
        spec: Option<PathBuf>,
        #[arg(long, required_unless_present = "spec")]
        name: Option<String>,
        #[arg(long, default_value = "1")]
        version: String,
        #[arg(long)]
        description: Option<String>,
    },
    Overview {
        id: u64,
    },
    ParamImpact {
        id: u64,
        #[arg(long)]
        param: String,
        #[arg(long)]
        measure: Option<String>,
        #[arg(long)]
        dataset: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
enum RunCmd {
    Submit {
        #[arg(long)]
        task: u64,
        #[arg(long)]
        flow: u64,
        /// Parameter setting as name=value; repeatable.
        #[arg(long = "set")]
        settings: Vec<String>,
        predictions: PathBuf,
    },
    Get {
        id: u64,
    },
}

#[derive(Debug, Subcommand)]
enum ChallengeCmd {
    Create {
        #[arg(long)]
        name: String,
        #[arg(long = "task", value_delimiter = ',', required = true)]
        tasks: Vec<u64>,
        #[arg(long)]
        description: Option<String>,
    },
    Leaderboard {
        id: u64,
    },
    /// Submit a solution to one challenge task.
    Solve {
        id: u64,
        #[arg(long)]
        task: u64,
        #[arg(long)]
        participant: String,
        predictions: PathBuf,
    },
}

struct Ctx {
    server: String,
    json: bool,
    format: Option<String>,
    output: Option<PathBuf>,
}

impl Ctx {
    fn client(&self) -> Client {
        Client::new(&self.server)
    }

    fn emit(&self, bytes: &[u8]) -> Result<(), CliError> {
        match &self.output {
            Some(path) => std::fs::write(path, bytes).map_err(|e| io_error(path, e)),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Local(e.to_string()))
            }
        }
    }

    /// Body verbatim under `--json`, otherwise the human rendering.
    fn show(&self, reply: &Reply, human: impl FnOnce(&Value) -> String) -> Result<(), CliError> {
        if self.json {
            self.emit(&reply.body)
        } else {
            self.emit(human(&reply.json()?).as_bytes())
        }
    }

    fn file_format(&self) -> Result<Option<FormatId>, CliError> {
        self.format.as_deref().map(parse_format).transpose()
    }
}

fn parse_format(s: &str) -> Result<FormatId, CliError> {
    s.parse()
        .map_err(|_| CliError::Usage(format!("unknown format `{s}` (expected arff, mld or csv)")))
}

fn format_of(path: &Path) -> Result<FormatId, CliError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    parse_format(ext).map_err(|_| {
        CliError::Usage(format!(
            "cannot infer the format of {}; pass it explicitly",
            path.display()
        ))
    })
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Local(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read(path)?).map_err(|_| CliError::Local(format!("{}: not valid UTF-8", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        server: cli.server,
        json: cli.json,
        format: cli.format,
        output: cli.output,
    };
    match cli.command {
        Command::Dataset(cmd) => dataset(&ctx, cmd),
        Command::Task(cmd) => task(&ctx, cmd),
        Command::Flow(cmd) => flow(&ctx, cmd),
        Command::Run(cmd) => run_cmd(&ctx, cmd),
        Command::Challenge(cmd) => challenge(&ctx, cmd),
        Command::Search { query } => {
            let reply = ctx.client().get("/search", &[("q", query)])?;
            ctx.show(&reply, |v| {
                let mut t = Table::new(["kind", "id", "name", "matched"]);
                for hit in v["hits"].as_array().into_iter().flatten() {
                    t.row(vec![
                        cell(&hit["kind"]),
                        cell(&hit["id"]),
                        cell(&hit["name"]),
                        cell(&hit["match_field"]),
                    ]);
                }
                t.render()
            })
        }
        Command::Compare {
            flows,
            datasets,
            measure,
        } => compare(&ctx, flows, datasets, measure),
        Command::Convert { input, output, from } => {
            let from = match from {
                Some(f) => parse_format(&f)?,
                None => format_of(&input)?,
            };
            let to = match ctx.file_format()? {
                Some(f) => f,
                None => format_of(&output)?,
            };
            let blob = read(&input)?;
            let bytes = convert(&blob, from, to).map_err(|e| CliError::Local(format!("{}: {e}", input.display())))?;
            std::fs::write(&output, &bytes).map_err(|e| io_error(&output, e))?;
            let report = if ctx.json {
                json!({"input": input, "output": output, "from": from, "to": to, "bytes": bytes.len()}).to_string()
                    + "\n"
            } else {
                format!("wrote {} ({}, {} bytes)\n", output.display(), to, bytes.len())
            };
            let mut out = std::io::stdout().lock();
            out.write_all(report.as_bytes())
                .map_err(|e| CliError::Local(e.to_string()))
        }
    }
}

fn ids_query(values: &[u64]) -> String {
    values.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

fn compare(ctx: &Ctx, flows: Vec<u64>, datasets: Vec<u64>, measure: Option<String>) -> Result<(), CliError> {
    let mut query = vec![("flows", ids_query(&flows)), ("datasets", ids_query(&datasets))];
    if let Some(m) = measure {
        query.push(("measure", m));
    }
    match ctx.format.as_deref() {
        None | Some("json") => {
            let reply = ctx.client().get("/compare", &query)?;
            if ctx.format.is_some() {
                return ctx.emit(&reply.body);
            }
            ctx.show(&reply, |v| {
                let mut headers = vec!["flow".to_string()];
                headers.extend(v["datasets"].as_array().into_iter().flatten().map(cell));
                let mut t = Table::new(headers);
                let rows = v["cells"].as_array().cloned().unwrap_or_default();
                for (flow, row) in v["flows"].as_array().into_iter().flatten().zip(rows) {
                    let mut cells = vec![cell(flow)];
                    cells.extend(row.as_array().into_iter().flatten().map(cell));
                    t.row(cells);
                }
                format!("measure: {}\n\n{}", cell(&v["measure"]), t.render())
            })
        }
        Some("csv") => {
            query.push(("format", "csv".into()));
            let reply = ctx.client().get("/compare", &query)?;
            ctx.emit(&reply.body)
        }
        Some(other) => Err(CliError::Usage(format!("compare output is json or csv, not `{other}`"))),
    }
}

fn dataset(ctx: &Ctx, cmd: DatasetCmd) -> Result<(), CliError> {
    match cmd {
        DatasetCmd::Upload {
            file,
            name,
            target,
            description,
        } => {
            let format = match ctx.file_format()? {
                Some(f) => f,
                None => format_of(&file).unwrap_or(FormatId::Arff),
            };
            let name = match name {
                Some(n) => n,
                None => file
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .map(str::to_string)
                    .ok_or_else(|| CliError::Usage("pass --name".into()))?,
            };
            let bytes = read(&file)?;
            let mut query = vec![("format", format.to_string()), ("name", name)];
            if let Some(t) = target {
                query.push(("target", t));
            }
            if let Some(d) = description {
                query.push(("description", d));
            }
            let content_type = format.content_type();
            let reply = ctx.client().post("/datasets", &query, content_type, &bytes)?;
            ctx.show(&reply, |v| render::fields(v, &[]))
        }
        DatasetCmd::Get { id } => {
            let reply = ctx.client().get(&format!("/datasets/{id}"), &[])?;
            ctx.show(&reply, |v| {
                let mut out = render::fields(v, &[]);
                let meta = &v["meta_features"];
                if meta.is_object() {
                    out.push_str("\nmeta-features\n");
                    out.push_str(&render::fields(meta, &["numeric_stats", "nominal_stats"]));
                }
                out
            })
        }
        DatasetCmd::File { id } => {
            let mut query = Vec::new();
            if let Some(f) = ctx.file_format()? {
                query.push(("format", f.to_string()));
            }
            let reply = ctx.client().get(&format!("/datasets/{id}/file"), &query)?;
            ctx.emit(&reply.body)
        }
        DatasetCmd::Summarize { file, target } => {
            let format = match ctx.file_format()? {
                Some(f) => f,
                None => format_of(&file)?,
            };
            let blob = read(&file)?;
            let ds = read_dataset(&blob, format).map_err(|e| CliError::Local(format!("{}: {e}", file.display())))?;
            let meta = compute_meta_features(&ds, target.as_deref()).map_err(|e| CliError::Local(e.to_string()))?;
            let summary = dataset_summary(&ds);
            if ctx.json {
                let v = json!({"summary": summary, "meta_features": meta});
                return ctx.emit((v.to_string() + "\n").as_bytes());
            }
            let mut out = format!(
                "relation: {}\nshape: {} rows x {} attributes\n\n",
                summary.relation, summary.shape.0, summary.shape.1
            );
            let mut t = Table::new(["attribute", "kind", "missing"]);
            for a in &summary.attributes {
                t.row(vec![a.name.clone(), a.kind.clone(), a.missing.to_string()]);
            }
            out.push_str(&t.render());
            let meta = serde_json::to_value(&meta).map_err(|e| CliError::Local(e.to_string()))?;
            out.push_str("\nmeta-features\n");
            out.push_str(&render::fields(&meta, &["numeric_stats", "nominal_stats"]));
            if !summary.preview.is_empty() {
                out.push_str("\npreview\n");
                for line in &summary.preview {
                    out.push_str(line);
                    out.push('\n');
                }
            }
            ctx.emit(out.as_bytes())
        }
    }
}

fn describe_task(v: &Value) -> String {
    let p = &v["procedure"];
    let procedure = format!(
        "{}-fold cv x{}, seed {}{}",
        cell(&p["folds"]),
        cell(&p["repeats"]),
        cell(&p["seed"]),
        if p["stratified"] == json!(true) {
            ", stratified"
        } else {
            ""
        }
    );
    let mut t = Table::new(["field", "value"]);
    for key in ["task_id", "name", "type", "dataset_id", "target", "classes", "measures"] {
        t.row(vec![key.to_string(), cell(&v[key])]);
    }
    t.row(vec!["procedure".into(), procedure]);
    let n_features = v["input_features"].as_array().map_or(0, Vec::len);
    t.row(vec!["input_features".into(), n_features.to_string()]);
    t.render()
}

fn task(ctx: &Ctx, cmd: TaskCmd) -> Result<(), CliError> {
    let reply = match cmd {
        TaskCmd::Create(a) => {
            let mut body = json!({"dataset_id": a.dataset});
            let fields = [
                ("target", a.target.map(Value::from)),
                ("type", a.task_type.map(Value::from)),
                ("folds", a.folds.map(Value::from)),
                ("repeats", a.repeats.map(Value::from)),
                ("seed", a.seed.map(Value::from)),
                ("stratified", a.stratified.map(Value::from)),
                ("measures", (!a.measures.is_empty()).then(|| Value::from(a.measures))),
            ];
            for (k, v) in fields {
                if let Some(v) = v {
                    body[k] = v;
                }
            }
            ctx.client().post_json("/tasks", &body)?
        }
        TaskCmd::Get { id } => ctx.client().get(&format!("/tasks/{id}"), &[])?,
    };
    ctx.show(&reply, describe_task)
}

fn flow(ctx: &Ctx, cmd: FlowCmd) -> Result<(), CliError> {
    match cmd {
        FlowCmd::Register {
            spec,
            name,
            version,
            description,
        } => {
            let body = match spec {
                Some(path) => {
                    let text = read_text(&path)?;
                    serde_json::from_str::<Value>(&text)
                        .map_err(|e| CliError::Local(format!("{}: {e}", path.display())))?
                }
                None => json!({"name": name, "version": version, "description": description.unwrap_or_default()}),
            };
            let reply = ctx.client().post_json("/flows", &body)?;
            ctx.show(&reply, |v| render::fields(v, &[]))
        }
        FlowCmd::Overview { id } => {
            let reply = ctx.client().get(&format!("/flows/{id}/overview"), &[])?;
            ctx.show(&reply, |v| {
                let mut t = Table::new(["task", "measure", "settings", "runs", "score", "best"]);
                for group in v["tasks"].as_array().into_iter().flatten() {
                    for e in group["entries"].as_array().into_iter().flatten() {
                        t.row(vec![
                            format!("{} {}", cell(&group["task_id"]), cell(&group["task_name"])),
                            cell(&group["measure"]),
                            render::settings(&e["settings"]),
                            e["run_ids"].as_array().map_or(0, Vec::len).to_string(),
                            cell(&e["score"]),
                            if e["best"] == json!(true) {
                                "*".into()
                            } else {
                                String::new()
                            },
                        ]);
                    }
                }
                format!("flow {} {}\n\n{}", cell(&v["flow_id"]), cell(&v["flow"]), t.render())
            })
        }
        FlowCmd::ParamImpact {
            id,
            param,
            measure,
            dataset,
        } => {
            let mut query = vec![("param", param)];
            if let Some(m) = measure {
                query.push(("measure", m));
            }
            if let Some(d) = dataset {
                query.push(("dataset", d.to_string()));
            }
            let reply = ctx.client().get(&format!("/flows/{id}/parameter-impact"), &query)?;
            ctx.show(&reply, |v| {
                let mut t = Table::new(["value", "runs", "mean score"]);
                for row in v["rows"].as_array().into_iter().flatten() {
                    t.row(vec![
                        cell(&row["value"]),
                        cell(&row["n_runs"]),
                        cell(&row["mean_score"]),
                    ]);
                }
                format!("{} by {}\n\n{}", cell(&v["measure"]), cell(&v["parameter"]), t.render())
            })
        }
    }
}

fn run_cmd(ctx: &Ctx, cmd: RunCmd) -> Result<(), CliError> {
    let reply = match cmd {
        RunCmd::Submit {
            task,
            flow,
            settings,
            predictions,
        } => {
            let settings = settings
                .iter()
                .map(|s| {
                    s.split_once('=')
                        .map(|(k, v)| json!({"name": k, "value": v}))
                        .ok_or_else(|| CliError::Usage(format!("--set expects name=value, got `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let csv = read_text(&predictions)?;
            let body = json!({"task_id": task, "flow_id": flow, "settings": settings, "predictions": csv});
            ctx.client().post_json("/runs", &body)?
        }
        RunCmd::Get { id } => ctx.client().get(&format!("/runs/{id}"), &[])?,
    };
    ctx.show(&reply, |v| {
        let mut out = render::fields(v, &["parameter_settings", "evaluation"]);
        if let Some(s) = v.get("parameter_settings") {
            out = out.trim_end().to_string() + &format!("\nsettings  {}\n", render::settings(s));
        }
        out.push('\n');
        out.push_str(&render::evaluation(&v["evaluation"]));
        out
    })
}

fn challenge(ctx: &Ctx, cmd: ChallengeCmd) -> Result<(), CliError> {
    match cmd {
        ChallengeCmd::Create {
            name,
            tasks,
            description,
        } => {
            let body = json!({"name": name, "task_ids": tasks, "description": description.unwrap_or_default()});
            let reply = ctx.client().post_json("/challenges", &body)?;
            ctx.show(&reply, |v| render::fields(v, &[]))
        }
        ChallengeCmd::Leaderboard { id } => {
            let reply = ctx.client().get(&format!("/challenges/{id}/leaderboard"), &[])?;
            ctx.show(&reply, |v| {
                let standings = v["standings"].as_array().cloned().unwrap_or_default();
                let task_ids: Vec<String> = standings
                    .first()
                    .and_then(|s| s["task_ranks"].as_array())
                    .into_iter()
                    .flatten()
                    .map(|r| format!("task {}", cell(&r["task_id"])))
                    .collect();
                let mut headers = vec![
                    "rank".to_string(),
                    "participant".into(),
                    "kind".into(),
                    "mean rank".into(),
                ];
                headers.extend(task_ids);
                let mut t = Table::new(headers);
                for s in &standings {
                    let mut row = vec![
                        cell(&s["rank"]),
                        cell(&s["participant"]["name"]),
                        cell(&s["participant"]["kind"]),
                        cell(&s["mean_rank"]),
                    ];
                    for r in s["task_ranks"].as_array().into_iter().flatten() {
                        let missing = if r["submitted"] == json!(false) { "*" } else { "" };
                        row.push(format!("{}{missing}", cell(&r["rank"])));
                    }
                    t.row(row);
                }
                let mut out = format!("challenge {} {}\n\n{}", id, cell(&v["name"]), t.render());
                if t.is_empty() {
                    out.push_str("(no submissions)\n");
                } else {
                    out.push_str("* no submission, ranked after all participants\n");
                }
                out
            })
        }
        ChallengeCmd::Solve {
            id,
            task,
            participant,
            predictions,
        } => {
            let csv = read_text(&predictions)?;
            let body = json!({"task_id": task, "participant": participant, "predictions": csv});
            let reply = ctx.client().post_json(&format!("/challenges/{id}/solutions"), &body)?;
            ctx.show(&reply, |v| {
                let mut out = render::fields(v, &["evaluation"]);
                out.push('\n');
                out.push_str(&render::evaluation(&v["evaluation"]));
                out
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid usage");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error: {first}");
            return ExitCode::from(1);
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let (true, CliError::Api { body, .. }) = (json, &e) {
                let _ = std::io::stdout().write_all(body);
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
