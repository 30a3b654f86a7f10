//! Read-only aggregation over a [`Snapshot`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{FlowRecord, ParamKind, ParameterSetting, RegistryError, Result, RunRecord, Snapshot};
use crate::evaluation::Measure;
use crate::formats::format_number;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub flow_id: u64,
    pub flow: String,
    pub settings: Vec<ParameterSetting>,
    pub run_id: u64,
    pub task_id: u64,
    pub score: f64,
    pub upload_time: u64,
}

/// Orders by score in the measure's direction, then upload time, then id.
fn rank_order(measure: Measure, a: (f64, u64, u64), b: (f64, u64, u64)) -> Ordering {
    measure
        .direction()
        .compare(a.0, b.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

fn run_key(measure: Measure, run: &RunRecord) -> Option<(f64, u64, u64)> {
    run.evaluation
        .mean(measure)
        .map(|score| (score, run.upload_time, run.run_id))
}

/// Keeps the best run per `group`, returned best first.
fn best_per<'a, K: Eq + std::hash::Hash>(
    measure: Measure,
    runs: impl Iterator<Item = &'a RunRecord>,
    group: impl Fn(&RunRecord) -> K,
) -> Vec<(&'a RunRecord, f64)> {
    let mut best: HashMap<K, (&RunRecord, (f64, u64, u64))> = HashMap::new();
    for run in runs {
        let Some(key) = run_key(measure, run) else { continue };
        best.entry(group(run))
            .and_modify(|cur| {
                if rank_order(measure, key, cur.1) == Ordering::Less {
                    *cur = (run, key);
                }
            })
            .or_insert((run, key));
    }
    let mut out: Vec<_> = best.into_values().collect();
    out.sort_by(|a, b| rank_order(measure, a.1, b.1));
    out.into_iter().map(|(run, key)| (run, key.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverviewEntry {
    pub settings: Vec<ParameterSetting>,
    pub run_ids: Vec<u64>,
    pub score: Option<f64>,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGroup {
    pub task_id: u64,
    pub task_name: String,
    pub measure: Measure,
    pub entries: Vec<OverviewEntry>,
    pub best_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowOverview {
    pub flow_id: u64,
    pub flow: String,
    pub tasks: Vec<TaskGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub value: String,
    pub n_runs: usize,
    pub mean_score: f64,
}

/// Flows × datasets; `None` marks a pair with no scored run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub measure: Measure,
    pub flows: Vec<String>,
    pub datasets: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl CompareTable {
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = vec!["flow".to_string()];
        header.extend(self.datasets.iter().cloned());
        writer.write_record(&header).expect("writing to a Vec cannot fail");
        for (flow, row) in self.flows.iter().zip(&self.cells) {
            let mut fields = vec![flow.clone()];
            fields.extend(row.iter().map(|c| c.map(format_number).unwrap_or_default()));
            writer.write_record(&fields).expect("writing to a Vec cannot fail");
        }
        String::from_utf8(writer.into_inner().expect("flushing a Vec cannot fail")).expect("UTF-8 fields")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Participant {
    Flow { flow_id: u64, name: String },
    Solution { name: String },
}

impl Participant {
    pub fn name(&self) -> &str {
        match self {
            Participant::Flow { name, .. } | Participant::Solution { name } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRank {
    pub task_id: u64,
    pub rank: usize,
    pub submitted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeStanding {
    pub rank: usize,
    pub participant: Participant,
    pub mean_rank: f64,
    pub task_ranks: Vec<TaskRank>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Dataset,
    Flow,
    Task,
    Challenge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub kind: EntityKind,
    pub id: u64,
    pub name: String,
    pub match_field: String,
}

impl Snapshot {
    /// Best run per (flow, settings) over every task on the dataset.
    pub fn leaderboard(&self, dataset_id: u64, measure: Measure) -> Result<Vec<LeaderboardEntry>> {
        self.dataset(dataset_id)?;
        let runs = self
            .runs()
            .filter(|r| self.tasks.get(&r.task_id).is_some_and(|t| t.dataset_id == dataset_id));
        let best = best_per(measure, runs, |r| (r.flow_id, r.parameter_settings.clone()));
        Ok(best
            .into_iter()
            .enumerate()
            .map(|(i, (run, score))| LeaderboardEntry {
                rank: i + 1,
                flow_id: run.flow_id,
                flow: self.flows.get(&run.flow_id).map(|f| f.label()).unwrap_or_default(),
                settings: run.parameter_settings.clone(),
                run_id: run.run_id,
                task_id: run.task_id,
                score,
                upload_time: run.upload_time,
            })
            .collect())
    }

    /// Per task the flow ran on: the mean primary score of each settings
    /// combination, with the best one marked.
    pub fn flow_overview(&self, flow_id: u64) -> Result<FlowOverview> {
        let flow = self.flow(flow_id)?;
        let mut by_task: BTreeMap<u64, BTreeMap<Vec<ParameterSetting>, Vec<&RunRecord>>> = BTreeMap::new();
        for run in self.runs().filter(|r| r.flow_id == flow_id) {
            by_task
                .entry(run.task_id)
                .or_default()
                .entry(run.parameter_settings.clone())
                .or_default()
                .push(run);
        }
        let mut tasks = Vec::new();
        for (task_id, groups) in by_task {
            let task = self.task(task_id)?;
            let measure = task.primary_measure();
            let mut entries: Vec<OverviewEntry> = groups
                .into_iter()
                .map(|(settings, runs)| {
                    let scores: Vec<f64> = runs.iter().filter_map(|r| r.evaluation.mean(measure)).collect();
                    OverviewEntry {
                        settings,
                        run_ids: runs.iter().map(|r| r.run_id).collect(),
                        score: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
                        best: false,
                    }
                })
                .collect();
            let best_score =
                entries
                    .iter()
                    .filter_map(|e| e.score)
                    .reduce(|a, b| if measure.direction().better(b, a) { b } else { a });
            if let Some(best) = best_score {
                if let Some(e) = entries.iter_mut().find(|e| e.score == Some(best)) {
                    e.best = true;
                }
            }
            tasks.push(TaskGroup {
                task_id,
                task_name: task.name.clone(),
                measure,
                entries,
                best_score,
            });
        }
        Ok(FlowOverview {
            flow_id,
            flow: flow.label(),
            tasks,
        })
    }

    /// Runs of the flow grouped by the value of one parameter (its default
    /// when unset), averaged. Int and float parameters sort numerically.
    pub fn parameter_impact(
        &self,
        flow_id: u64,
        param: &str,
        measure: Measure,
        dataset_id: Option<u64>,
    ) -> Result<Vec<ImpactRow>> {
        let flow: &FlowRecord = self.flow(flow_id)?;
        let spec = flow
            .parameter(param)
            .ok_or_else(|| RegistryError::UnknownParameter(param.to_string()))?;
        if let Some(d) = dataset_id {
            self.dataset(d)?;
        }
        let mut groups: HashMap<String, Vec<f64>> = HashMap::new();
        for run in self.runs().filter(|r| r.flow_id == flow_id) {
            if let Some(d) = dataset_id {
                if self.tasks.get(&run.task_id).map(|t| t.dataset_id) != Some(d) {
                    continue;
                }
            }
            let Some(score) = run.evaluation.mean(measure) else {
                continue;
            };
            let value = run
                .parameter_settings
                .iter()
                .find(|s| s.name == param)
                .map(|s| s.value.clone())
                .or_else(|| spec.default.clone())
                .unwrap_or_default();
            groups.entry(value).or_default().push(score);
        }
        let mut rows: Vec<ImpactRow> = groups
            .into_iter()
            .map(|(value, scores)| ImpactRow {
                value,
                n_runs: scores.len(),
                mean_score: scores.iter().sum::<f64>() / scores.len() as f64,
            })
            .collect();
        let numeric = matches!(spec.kind, ParamKind::Int | ParamKind::Float);
        rows.sort_by(|a, b| {
            let by_number = match (numeric, a.value.trim().parse::<f64>(), b.value.trim().parse::<f64>()) {
                (true, Ok(x), Ok(y)) => x.total_cmp(&y),
                _ => Ordering::Equal,
            };
            by_number.then_with(|| a.value.cmp(&b.value))
        });
        Ok(rows)
    }

    /// Best mean score of each flow on each dataset, in input order.
    pub fn compare(&self, flow_ids: &[u64], dataset_ids: &[u64], measure: Measure) -> Result<CompareTable> {
        let flows = flow_ids
            .iter()
            .map(|&f| self.flow(f).map(FlowRecord::label))
            .collect::<Result<Vec<_>>>()?;
        let datasets = dataset_ids
            .iter()
            .map(|&d| {
                self.dataset(d)
                    .map(|e| format!("{} (v{})", e.record.name, e.record.version))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cells = vec![vec![None; dataset_ids.len()]; flow_ids.len()];
        for run in self.runs() {
            let Some(fi) = flow_ids.iter().position(|&f| f == run.flow_id) else {
                continue;
            };
            let Some(task) = self.tasks.get(&run.task_id) else {
                continue;
            };
            let Some(score) = run.evaluation.mean(measure) else {
                continue;
            };
            for (di, _) in dataset_ids.iter().enumerate().filter(|(_, &d)| d == task.dataset_id) {
                let cell: &mut Option<f64> = &mut cells[fi][di];
                if cell.is_none_or(|cur| measure.direction().better(score, cur)) {
                    *cell = Some(score);
                }
            }
        }
        Ok(CompareTable {
            measure,
            flows,
            datasets,
            cells,
        })
    }

    /// Mean-rank standings. A participant's rank on a task is its position
    /// among the task's participants by the primary measure; a participant
    /// without a submission gets that task's participant count plus one.
    pub fn challenge_leaderboard(&self, challenge_id: u64) -> Result<Vec<ChallengeStanding>> {
        let challenge = self.challenge(challenge_id)?;
        let mut per_task: Vec<(u64, HashMap<Participant, usize>, usize)> = Vec::new();
        for &task_id in &challenge.task_ids {
            let measure = self.task(task_id)?.primary_measure();
            let mut scored: Vec<(Participant, (f64, u64, u64))> = Vec::new();
            let runs = self.runs().filter(|r| r.task_id == task_id);
            for (run, score) in best_per(measure, runs, |r| r.flow_id) {
                let name = self.flows.get(&run.flow_id).map(|f| f.label()).unwrap_or_default();
                let participant = Participant::Flow {
                    flow_id: run.flow_id,
                    name,
                };
                scored.push((participant, (score, run.upload_time, run.run_id)));
            }
            let mut best: HashMap<&str, (f64, u64, u64)> = HashMap::new();
            for s in self
                .solutions()
                .filter(|s| s.challenge_id == challenge_id && s.task_id == task_id)
            {
                let Some(score) = s.evaluation.mean(measure) else {
                    continue;
                };
                let key = (score, s.upload_time, s.solution_id);
                best.entry(&s.participant)
                    .and_modify(|cur| {
                        if rank_order(measure, key, *cur) == Ordering::Less {
                            *cur = key;
                        }
                    })
                    .or_insert(key);
            }
            scored.extend(
                best.into_iter()
                    .map(|(name, key)| (Participant::Solution { name: name.to_string() }, key)),
            );
            scored.sort_by(|a, b| rank_order(measure, a.1, b.1).then_with(|| a.0.cmp(&b.0)));
            let n = scored.len();
            let ranks = scored.into_iter().enumerate().map(|(i, (p, _))| (p, i + 1)).collect();
            per_task.push((task_id, ranks, n));
        }

        let mut participants: Vec<Participant> = per_task.iter().flat_map(|(_, r, _)| r.keys().cloned()).collect();
        participants.sort();
        participants.dedup();
        let mut standings: Vec<ChallengeStanding> = participants
            .into_iter()
            .map(|p| {
                let task_ranks: Vec<TaskRank> = per_task
                    .iter()
                    .map(|(task_id, ranks, n)| match ranks.get(&p) {
                        Some(&rank) => TaskRank {
                            task_id: *task_id,
                            rank,
                            submitted: true,
                        },
                        None => TaskRank {
                            task_id: *task_id,
                            rank: n + 1,
                            submitted: false,
                        },
                    })
                    .collect();
                let mean_rank = task_ranks.iter().map(|t| t.rank as f64).sum::<f64>() / task_ranks.len() as f64;
                ChallengeStanding {
                    rank: 0,
                    participant: p,
                    mean_rank,
                    task_ranks,
                }
            })
            .collect();
        standings.sort_by(|a, b| {
            a.mean_rank
                .total_cmp(&b.mean_rank)
                .then_with(|| a.participant.name().cmp(b.participant.name()))
                .then_with(|| a.participant.cmp(&b.participant))
        });
        for (i, s) in standings.iter_mut().enumerate() {
            s.rank = i + 1;
        }
        Ok(standings)
    }

    /// Case-insensitive substring search over names and descriptions.
    pub fn search(&self, query: &str) -> Vec<SearchHit> {
        let needle = query.trim().to_lowercase();
        if needle.is_empty() {
            return Vec::new();
        }
        let field = |name: &str, description: &str| {
            if name.to_lowercase().contains(&needle) {
                Some("name")
            } else if description.to_lowercase().contains(&needle) {
                Some("description")
            } else {
                None
            }
        };
        let mut hits = Vec::new();
        let mut push = |kind, id, name: &str, description: &str| {
            if let Some(f) = field(name, description) {
                hits.push(SearchHit {
                    kind,
                    id,
                    name: name.to_string(),
                    match_field: f.to_string(),
                });
            }
        };
        for d in self.datasets() {
            push(EntityKind::Dataset, d.dataset_id, &d.name, &d.description);
        }
        for f in self.flows() {
            push(EntityKind::Flow, f.flow_id, &f.name, &f.description);
        }
        for t in self.tasks() {
            push(EntityKind::Task, t.task_id, &t.name, "");
        }
        for c in self.challenges() {
            push(EntityKind::Challenge, c.challenge_id, &c.name, &c.description);
        }
        hits
    }
}
