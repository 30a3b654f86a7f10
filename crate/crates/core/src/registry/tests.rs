use super::*;
use crate::evaluation::PredictionValue;

fn arff(relation: &str, n: usize) -> String {
    let mut s = format!("@relation {relation}\n@attribute x numeric\n@attribute class {{a,b}}\n@data\n");
    for i in 0..n {
        s.push_str(&format!("{i},{}\n", if i % 2 == 0 { "a" } else { "b" }));
    }
    s
}

fn truth(row: usize) -> &'static str {
    if row.is_multiple_of(2) {
        "a"
    } else {
        "b"
    }
}

fn flip(label: &str) -> String {
    if label == "a" { "b" } else { "a" }.to_string()
}

/// Predicts the first `correct` rows right and the rest wrong.
fn predictions(task: &Task, correct: usize) -> PredictionSet {
    PredictionSet::for_task(task, |_, row| {
        PredictionValue::Label(if row < correct {
            truth(row).to_string()
        } else {
            flip(truth(row))
        })
    })
}

fn flow_spec(name: &str) -> FlowSpec {
    FlowSpec {
        name: name.into(),
        version: "1.0".into(),
        description: String::new(),
        parameters: vec![FlowParameter {
            name: "max_depth".into(),
            kind: ParamKind::Int,
            default: Some("5".into()),
        }],
        properties: FlowProperties::default(),
    }
}

struct Fixture {
    _dir: tempfile::TempDir,
    store: Store,
    dataset: u64,
    task: Task,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let (d, _) = store
        .register_dataset(arff("toy", 10).as_bytes(), FormatId::Arff, "toy", Some("class"), "")
        .unwrap();
    let task = store
        .create_task(&TaskRequest {
            dataset_id: d.dataset_id,
            folds: Some(2),
            ..Default::default()
        })
        .unwrap();
    Fixture {
        _dir: dir,
        store,
        dataset: d.dataset_id,
        task,
    }
}

fn depth(v: &str) -> Vec<ParameterSetting> {
    vec![ParameterSetting::new("max_depth", v)]
}

#[test]
fn dataset_upload_versions_and_idempotence() {
    let f = fixture();
    let snap = f.store.snapshot();
    let rec = &snap.dataset(f.dataset).unwrap().record;
    assert_eq!(rec.meta_features.n_instances, 10);
    assert_eq!(rec.version, 1);

    let (again, created) = f
        .store
        .register_dataset(arff("toy", 10).as_bytes(), FormatId::Arff, "toy", Some("class"), "")
        .unwrap();
    assert!(!created);
    assert_eq!((again.dataset_id, again.version), (f.dataset, 1));

    let (v2, created) = f
        .store
        .register_dataset(arff("toy", 12).as_bytes(), FormatId::Arff, "toy", None, "")
        .unwrap();
    assert!(created);
    assert_eq!(v2.version, 2);
    assert_ne!(v2.dataset_id, f.dataset);
}

#[test]
fn dataset_upload_errors() {
    let f = fixture();
    let err = f
        .store
        .register_dataset(b"@relation r\n@data\n1\n", FormatId::Arff, "bad", None, "")
        .unwrap_err();
    assert!(matches!(err, RegistryError::ParseFailed(_)), "{err}");
    let err = f
        .store
        .register_dataset(arff("t", 4).as_bytes(), FormatId::Arff, "t", Some("nope"), "")
        .unwrap_err();
    assert!(matches!(err, RegistryError::UnknownAttribute(a) if a == "nope"));
}

#[test]
fn dataset_file_serves_original_and_converted() {
    let f = fixture();
    let bytes = f.store.dataset_file(f.dataset, FormatId::Arff).unwrap();
    assert_eq!(bytes, arff("toy", 10).as_bytes());
    let csv = String::from_utf8(f.store.dataset_file(f.dataset, FormatId::Csv).unwrap()).unwrap();
    assert!(csv.starts_with("x,class\n0.0,a\n"));
}

#[test]
fn flow_registration() {
    let f = fixture();
    let (a, created) = f.store.register_flow(flow_spec("dtree")).unwrap();
    assert!(created);
    let (b, created) = f.store.register_flow(flow_spec("dtree")).unwrap();
    assert!(!created);
    assert_eq!(a.flow_id, b.flow_id);

    let mut changed = flow_spec("dtree");
    changed.description = "different".into();
    assert!(matches!(
        f.store.register_flow(changed),
        Err(RegistryError::Conflict(_))
    ));

    let mut dup = flow_spec("svm");
    dup.parameters = vec![
        FlowParameter {
            name: "c".into(),
            kind: ParamKind::Float,
            default: None,
        };
        2
    ];
    assert!(matches!(f.store.register_flow(dup), Err(RegistryError::DuplicateParameter(p)) if p == "c"));
}

#[test]
fn task_defaults_come_from_dataset() {
    let f = fixture();
    assert_eq!(f.task.task_id, 1);
    assert_eq!(f.task.target, "class");
    assert_eq!(f.task.task_type, TaskType::SupervisedClassification);
    assert_eq!(f.task.procedure.seed, mix(1));
    assert_eq!(f.task.procedure.folds, 2);
    assert!(matches!(
        f.store.create_task(&TaskRequest {
            dataset_id: 99,
            ..Default::default()
        }),
        Err(RegistryError::UnknownDataset(99))
    ));
}

#[test]
fn run_submission() {
    let f = fixture();
    let (flow, _) = f.store.register_flow(flow_spec("dtree")).unwrap();
    let run = f
        .store
        .submit_run(f.task.task_id, flow.flow_id, depth("3"), &predictions(&f.task, 10))
        .unwrap();
    assert_eq!(run.evaluation.mean(Measure::PredictiveAccuracy), Some(1.0));

    let err = f
        .store
        .submit_run(
            f.task.task_id,
            flow.flow_id,
            vec![ParameterSetting::new("max_deth", "3")],
            &predictions(&f.task, 10),
        )
        .unwrap_err();
    assert!(matches!(err, RegistryError::UnknownParameter(p) if p == "max_deth"));
    let err = f
        .store
        .submit_run(f.task.task_id, flow.flow_id, depth("deep"), &predictions(&f.task, 10))
        .unwrap_err();
    assert!(matches!(err, RegistryError::InvalidParameterValue { .. }));
    assert!(matches!(
        f.store.submit_run(77, flow.flow_id, vec![], &predictions(&f.task, 10)),
        Err(RegistryError::UnknownTask(77))
    ));
    assert!(matches!(
        f.store
            .submit_run(f.task.task_id, 77, vec![], &predictions(&f.task, 10)),
        Err(RegistryError::UnknownFlow(77))
    ));
}

#[test]
fn invalid_run_is_not_persisted() {
    let f = fixture();
    let (flow, _) = f.store.register_flow(flow_spec("dtree")).unwrap();
    let log = f.store.log_path("runs");
    let before = std::fs::read(&log).unwrap();
    let mut p = predictions(&f.task, 10);
    p.rows.pop();
    let err = f
        .store
        .submit_run(f.task.task_id, flow.flow_id, vec![], &p)
        .unwrap_err();
    assert!(matches!(err, RegistryError::ValidationFailed(v) if v.len() == 1));
    assert_eq!(std::fs::read(&log).unwrap(), before);
    assert_eq!(f.store.snapshot().runs().count(), 0);
}

#[test]
fn leaderboard_orders_by_score_then_upload() {
    let f = fixture();
    let acc = Measure::PredictiveAccuracy;
    assert!(f.store.snapshot().leaderboard(f.dataset, acc).unwrap().is_empty());

    let (flow, _) = f.store.register_flow(flow_spec("dtree")).unwrap();
    let (other, _) = f.store.register_flow(flow_spec("knn")).unwrap();
    f.store
        .submit_run(f.task.task_id, flow.flow_id, depth("1"), &predictions(&f.task, 8))
        .unwrap();
    let first_tie = f
        .store
        .submit_run(f.task.task_id, flow.flow_id, depth("2"), &predictions(&f.task, 9))
        .unwrap();
    let second_tie = f
        .store
        .submit_run(f.task.task_id, other.flow_id, vec![], &predictions(&f.task, 9))
        .unwrap();
    // a worse run under the same (flow, settings) does not displace the best
    f.store
        .submit_run(f.task.task_id, flow.flow_id, depth("2"), &predictions(&f.task, 3))
        .unwrap();

    let board = f.store.snapshot().leaderboard(f.dataset, acc).unwrap();
    let scores: Vec<f64> = board.iter().map(|e| e.score).collect();
    assert_eq!(scores, [0.9, 0.9, 0.8]);
    assert_eq!(board[0].run_id, first_tie.run_id);
    assert_eq!(board[1].run_id, second_tie.run_id);
    assert_eq!(board.iter().map(|e| e.rank).collect::<Vec<_>>(), [1, 2, 3]);

    // error-like measures rank ascending
    let board = f
        .store
        .snapshot()
        .leaderboard(f.dataset, Measure::FMeasureMacro)
        .unwrap();
    assert!(board.windows(2).all(|w| w[0].score >= w[1].score));
    assert!(matches!(
        f.store.snapshot().leaderboard(42, acc),
        Err(RegistryError::UnknownDataset(42))
    ));
}

#[test]
fn overview_groups_by_task_and_settings() {
    let f = fixture();
    let (flow, _) = f.store.register_flow(flow_spec("dtree")).unwrap();
    assert!(f.store.snapshot().flow_overview(flow.flow_id).unwrap().tasks.is_empty());

    let second = f
        .store
        .create_task(&TaskRequest {
            dataset_id: f.dataset,
            folds: Some(5),
            ..Default::default()
        })
        .unwrap();
    f.store
        .submit_run(f.task.task_id, flow.flow_id, depth("1"), &predictions(&f.task, 6))
        .unwrap();
    f.store
        .submit_run(f.task.task_id, flow.flow_id, depth("3"), &predictions(&f.task, 8))
        .unwrap();
    f.store
        .submit_run(second.task_id, flow.flow_id, vec![], &predictions(&second, 10))
        .unwrap();

    let overview = f.store.snapshot().flow_overview(flow.flow_id).unwrap();
    assert_eq!(overview.tasks.len(), 2);
    let g = &overview.tasks[0];
    assert_eq!(g.entries.len(), 2);
    assert_eq!(g.best_score, Some(0.8));
    let best: Vec<_> = g.entries.iter().filter(|e| e.best).collect();
    assert_eq!(best.len(), 1);
    assert_eq!(best[0].settings, depth("3"));
}

#[test]
fn parameter_impact_groups_and_averages() {
    let f = fixture();
    let (flow, _) = f.store.register_flow(flow_spec("dtree")).unwrap();
    let acc = Measure::PredictiveAccuracy;
    for (setting, correct) in [
        (depth("3"), 8),
        (depth("1"), 6),
        (depth("10"), 5),
        (vec![], 7),
        (depth("10"), 7),
    ] {
        f.store
            .submit_run(f.task.task_id, flow.flow_id, setting, &predictions(&f.task, correct))
            .unwrap();
    }
    let rows = f
        .store
        .snapshot()
        .parameter_impact(flow.flow_id, "max_depth", acc, None)
        .unwrap();

    // oracle: brute-force group and average
    let snap = f.store.snapshot();
    let mut oracle: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for run in snap.runs() {
        let v = run
            .parameter_settings
            .iter()
            .find(|s| s.name == "max_depth")
            .map_or("5".to_string(), |s| s.value.clone());
        oracle.entry(v).or_default().push(run.evaluation.mean(acc).unwrap());
    }
    for row in &rows {
        let scores = &oracle[&row.value];
        assert_eq!(row.n_runs, scores.len());
        assert!((row.mean_score - scores.iter().sum::<f64>() / scores.len() as f64).abs() < 1e-12);
    }
    let values: Vec<&str> = rows.iter().map(|r| r.value.as_str()).collect();
    assert_eq!(values, ["1", "3", "5", "10"]);
    assert!((rows[0].mean_score - 0.6).abs() < 1e-12);
    assert!((rows[1].mean_score - 0.8).abs() < 1e-12);

    assert!(matches!(
        snap.parameter_impact(flow.flow_id, "nope", acc, None),
        Err(RegistryError::UnknownParameter(_))
    ));
    let other = f
        .store
        .register_dataset(arff("other", 6).as_bytes(), FormatId::Arff, "other", Some("class"), "")
        .unwrap()
        .0;
    assert!(snap
        .parameter_impact(flow.flow_id, "max_depth", acc, Some(other.dataset_id))
        .is_err());
    let fresh = f.store.snapshot();
    assert!(fresh
        .parameter_impact(flow.flow_id, "max_depth", acc, Some(other.dataset_id))
        .unwrap()
        .is_empty());
}

#[test]
fn compare_matrix() {
    let f = fixture();
    let acc = Measure::PredictiveAccuracy;
    let (a, _) = f.store.register_flow(flow_spec("a")).unwrap();
    let (b, _) = f.store.register_flow(flow_spec("b")).unwrap();
    let (d2, _) = f
        .store
        .register_dataset(
            arff("second", 10).as_bytes(),
            FormatId::Arff,
            "second",
            Some("class"),
            "",
        )
        .unwrap();
    let t2 = f
        .store
        .create_task(&TaskRequest {
            dataset_id: d2.dataset_id,
            folds: Some(2),
            ..Default::default()
        })
        .unwrap();
    f.store
        .submit_run(f.task.task_id, a.flow_id, vec![], &predictions(&f.task, 6))
        .unwrap();
    f.store
        .submit_run(f.task.task_id, a.flow_id, depth("2"), &predictions(&f.task, 9))
        .unwrap();
    f.store
        .submit_run(f.task.task_id, b.flow_id, vec![], &predictions(&f.task, 7))
        .unwrap();
    f.store
        .submit_run(t2.task_id, a.flow_id, vec![], &predictions(&t2, 4))
        .unwrap();

    let snap = f.store.snapshot();
    let table = snap
        .compare(&[a.flow_id, b.flow_id], &[f.dataset, d2.dataset_id], acc)
        .unwrap();
    assert_eq!(table.cells, [[Some(0.9), Some(0.4)], [Some(0.7), None]]);
    assert_eq!(table.to_csv(), "flow,toy (v1),second (v1)\na@1.0,0.9,0.4\nb@1.0,0.7,\n");

    let single = snap.compare(&[a.flow_id], &[f.dataset], acc).unwrap();
    let head = snap.leaderboard(f.dataset, acc).unwrap()[0].score;
    assert_eq!(single.cells, [[Some(head)]]);

    assert!(matches!(
        snap.compare(&[99], &[f.dataset], acc),
        Err(RegistryError::UnknownFlow(99))
    ));
    assert!(matches!(
        snap.compare(&[a.flow_id], &[99], acc),
        Err(RegistryError::UnknownDataset(99))
    ));
}

#[test]
fn challenge_mean_rank_with_penalty() {
    let f = fixture();
    let t2 = f
        .store
        .create_task(&TaskRequest {
            dataset_id: f.dataset,
            folds: Some(5),
            ..Default::default()
        })
        .unwrap();
    let (t1, t2) = (&f.task, &t2);
    let c = f.store.create_challenge("duo", &[t1.task_id, t2.task_id], "").unwrap();

    // task 1: alice 1st, bob 2nd, carol 3rd, dave 4th
    // task 2: bob 1st, alice 2nd, carol 3rd; dave missing -> rank 4
    for (who, correct) in [("alice", 10), ("bob", 9), ("carol", 8), ("dave", 7)] {
        f.store
            .submit_solution(c.challenge_id, t1.task_id, who, &predictions(t1, correct))
            .unwrap();
    }
    for (who, correct) in [("bob", 10), ("alice", 9), ("carol", 8)] {
        f.store
            .submit_solution(c.challenge_id, t2.task_id, who, &predictions(t2, correct))
            .unwrap();
    }
    let board = f.store.snapshot().challenge_leaderboard(c.challenge_id).unwrap();
    let got: Vec<(&str, f64)> = board.iter().map(|s| (s.participant.name(), s.mean_rank)).collect();
    assert_eq!(got, [("alice", 1.5), ("bob", 1.5), ("carol", 3.0), ("dave", 4.0)]);
    assert_eq!(board[3].task_ranks[1].rank, 4);
    assert!(!board[3].task_ranks[1].submitted);

    let err = f
        .store
        .submit_solution(c.challenge_id, 99, "x", &predictions(t1, 1))
        .unwrap_err();
    assert!(matches!(err, RegistryError::TaskNotInChallenge { .. }));
}

#[test]
fn challenge_counts_flow_runs() {
    let f = fixture();
    let (flow, _) = f.store.register_flow(flow_spec("dtree")).unwrap();
    let c = f.store.create_challenge("solo", &[f.task.task_id], "").unwrap();
    f.store
        .submit_run(f.task.task_id, flow.flow_id, depth("1"), &predictions(&f.task, 10))
        .unwrap();
    f.store
        .submit_solution(c.challenge_id, f.task.task_id, "zed", &predictions(&f.task, 2))
        .unwrap();
    let board = f.store.snapshot().challenge_leaderboard(c.challenge_id).unwrap();
    assert_eq!(board[0].participant.name(), "dtree@1.0");
    assert_eq!(board[0].mean_rank, 1.0);
    assert_eq!(board[1].mean_rank, 2.0);
}

#[test]
fn challenge_creation_errors() {
    let f = fixture();
    assert!(matches!(
        f.store.create_challenge("x", &[], ""),
        Err(RegistryError::EmptyChallenge)
    ));
    assert!(matches!(
        f.store.create_challenge("x", &[5], ""),
        Err(RegistryError::UnknownTask(5))
    ));
    assert!(matches!(
        f.store.snapshot().challenge_leaderboard(3),
        Err(RegistryError::UnknownChallenge(3))
    ));
}

#[test]
fn search_is_case_insensitive() {
    let f = fixture();
    f.store
        .register_dataset(
            arff("iris", 6).as_bytes(),
            FormatId::Arff,
            "iris",
            None,
            "Fisher's flowers",
        )
        .unwrap();
    let snap = f.store.snapshot();
    let hits = snap.search("iris");
    assert_eq!(hits.len(), 1);
    assert_eq!((hits[0].kind, hits[0].name.as_str()), (EntityKind::Dataset, "iris"));
    assert_eq!(snap.search("IRIS"), hits);
    assert_eq!(snap.search("FLOWERS")[0].match_field, "description");
    assert!(snap.search("zzz").is_empty());
    assert!(snap.search("").is_empty());
    let kinds: Vec<EntityKind> = snap.search("toy").iter().map(|h| h.kind).collect();
    assert_eq!(kinds, [EntityKind::Dataset, EntityKind::Task]);
}

#[test]
fn reopen_recovers_everything() {
    let f = fixture();
    let (flow, _) = f.store.register_flow(flow_spec("dtree")).unwrap();
    for correct in [5, 6, 7] {
        f.store
            .submit_run(f.task.task_id, flow.flow_id, vec![], &predictions(&f.task, correct))
            .unwrap();
    }
    let c = f.store.create_challenge("c", &[f.task.task_id], "").unwrap();
    f.store
        .submit_solution(c.challenge_id, f.task.task_id, "p", &predictions(&f.task, 4))
        .unwrap();
    let before = f.store.snapshot();

    let reopened = Store::open(f.store.root()).unwrap();
    assert!(reopened.recovery_warnings().is_empty());
    let after = reopened.snapshot();
    assert_eq!(after.runs().count(), 3);
    assert_eq!(after.runs().collect::<Vec<_>>(), before.runs().collect::<Vec<_>>());
    assert_eq!(after.tasks().collect::<Vec<_>>(), before.tasks().collect::<Vec<_>>());
    assert_eq!(after.solutions().count(), 1);
    assert_eq!(
        after.dataset(f.dataset).unwrap().data,
        before.dataset(f.dataset).unwrap().data
    );
}

#[test]
fn truncated_tail_is_dropped_with_warning() {
    let f = fixture();
    let (flow, _) = f.store.register_flow(flow_spec("dtree")).unwrap();
    for correct in [5, 6, 7] {
        f.store
            .submit_run(f.task.task_id, flow.flow_id, vec![], &predictions(&f.task, correct))
            .unwrap();
    }
    let log = f.store.log_path("runs");
    let bytes = std::fs::read(&log).unwrap();
    std::fs::write(&log, &bytes[..bytes.len() - 10]).unwrap();

    let reopened = Store::open(f.store.root()).unwrap();
    assert_eq!(reopened.snapshot().runs().count(), 2);
    assert_eq!(reopened.recovery_warnings().len(), 1);
    assert_eq!(reopened.recovery_warnings()[0].log, "runs.jsonl");

    // the next append lands on a clean line
    let run = reopened
        .submit_run(f.task.task_id, flow.flow_id, vec![], &predictions(&f.task, 9))
        .unwrap();
    assert_eq!(run.run_id, 3);
    let again = Store::open(f.store.root()).unwrap();
    assert!(again.recovery_warnings().is_empty());
    assert_eq!(again.snapshot().runs().count(), 3);
}

#[test]
fn tampered_blob_is_an_integrity_error() {
    let f = fixture();
    let digest = f
        .store
        .snapshot()
        .dataset(f.dataset)
        .unwrap()
        .record
        .blob_digest
        .clone();
    let path = f.store.root().join("blobs").join(&digest);
    std::fs::write(&path, b"tampered").unwrap();
    assert!(matches!(
        f.store.dataset_file(f.dataset, FormatId::Arff),
        Err(RegistryError::Integrity(_))
    ));
    // the dataset cannot be rebuilt, so reopening skips it with a warning
    let reopened = Store::open(f.store.root()).unwrap();
    assert!(reopened.snapshot().datasets().next().is_none());
    assert!(!reopened.recovery_warnings().is_empty());
}

#[test]
fn snapshots_are_isolated_from_later_writes() {
    let f = fixture();
    let old = f.store.snapshot();
    f.store.register_flow(flow_spec("dtree")).unwrap();
    assert_eq!(old.flows().count(), 0);
    assert_eq!(f.store.snapshot().flows().count(), 1);
}

#[test]
fn concurrent_runs_get_distinct_ids() {
    let f = fixture();
    let (flow, _) = f.store.register_flow(flow_spec("dtree")).unwrap();
    let p = predictions(&f.task, 10);
    let ids: Vec<u64> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|_| {
                s.spawn(|| {
                    f.store
                        .submit_run(f.task.task_id, flow.flow_id, vec![], &p)
                        .unwrap()
                        .run_id
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted, (1..=8).collect::<Vec<_>>());
    assert_eq!(Store::open(f.store.root()).unwrap().snapshot().runs().count(), 8);
}
