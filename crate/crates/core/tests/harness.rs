use std::fs;
use std::path::Path;
use std::process::Command;

use structdm::harness::run::{checkpoint_path, seed_dir, LOSSES, MANIFEST, METRICS};
use structdm::harness::{self, ChatAgent, ChatSession, EvalRequest, ExperimentConfig, Progress};
use structdm::ontology::Ontology;

fn small(seeds: Vec<u64>, dialogues: usize, every: usize) -> ExperimentConfig {
    ExperimentConfig {
        seeds,
        train_dialogues: dialogues,
        eval_every: every,
        eval_dialogues: 50,
        domains: Some(vec!["restaurant".into(), "hotel".into()]),
        ..ExperimentConfig::acgos()
    }
}

#[test]
fn schedule_gives_one_row_and_checkpoint_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(vec![0], 2000, 500);
    let rows = harness::train(&config, dir.path(), &mut |_| {}).unwrap();
    let points: Vec<usize> = rows.iter().map(|r| r.dialogues_trained).collect();
    assert_eq!(points, vec![500, 1000, 1500, 2000]);
    for d in points {
        assert!(checkpoint_path(dir.path(), 0, d).exists());
    }
    assert_eq!(harness::read_metrics(&dir.path().join(METRICS)).unwrap(), rows);
    let losses = fs::read_to_string(seed_dir(dir.path(), 0).join(LOSSES)).unwrap();
    assert_eq!(losses.lines().count(), 2001);
    assert!(losses.starts_with("episode,L_Q,L_pi,L_IL,L_ent,buffer-size,oracle-fraction"));

    let manifest = ExperimentConfig::load(&dir.path().join(MANIFEST)).unwrap();
    assert_eq!(manifest, config);
    let h = manifest.hyper;
    assert_eq!((h.learning_rate, h.dropout, h.batch_size, h.temperature), (1e-3, 0.1, 64, 1.0));
    assert_eq!((h.weights.q, h.weights.pi, h.weights.il, h.weights.entropy), (0.5, 1.0, 1.0, 0.01));
    assert_eq!(h.margin, std::f64::consts::LN_2);
    let text = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
    assert!(text.contains("ontology_fingerprint"), "{text}");
}

#[test]
fn finished_seeds_are_not_retrained() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(vec![0, 1], 40, 20);
    let first = harness::train(&config, dir.path(), &mut |_| {}).unwrap();
    let ck = checkpoint_path(dir.path(), 0, 40);
    let before = fs::read(&ck).unwrap();
    // seed 1 died before finishing
    fs::remove_file(seed_dir(dir.path(), 1).join(METRICS)).unwrap();
    let mut skipped = Vec::new();
    let mut evaluated = 0;
    let second = harness::train(&config, dir.path(), &mut |p| match p {
        Progress::SeedSkipped(s) => skipped.push(s),
        Progress::Evaluated(_) => evaluated += 1,
    })
    .unwrap();
    assert_eq!(skipped, vec![0]);
    assert_eq!(evaluated, 2);
    assert_eq!(first, second);
    assert_eq!(fs::read(&ck).unwrap(), before);
}

#[test]
fn foreign_run_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    harness::train(&small(vec![0], 20, 20), dir.path(), &mut |_| {}).unwrap();
    let other = ExperimentConfig {
        eval_dialogues: 60,
        ..small(vec![0], 20, 20)
    };
    assert!(harness::train(&other, dir.path(), &mut |_| {}).is_err());
}

#[test]
fn bad_schedules_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(harness::train(&small(vec![0], 0, 20), dir.path(), &mut |_| {}).is_err());
    assert!(harness::train(&small(vec![0], 30, 20), dir.path(), &mut |_| {}).is_err());
    assert!(harness::train(&small(vec![], 20, 20), dir.path(), &mut |_| {}).is_err());
}

#[test]
fn evaluation_is_repeatable_and_read_only() {
    let dir = tempfile::tempdir().unwrap();
    harness::train(&small(vec![3], 30, 30), dir.path(), &mut |_| {}).unwrap();
    let ck = checkpoint_path(dir.path(), 3, 30);
    let bytes = fs::read(&ck).unwrap();
    let traj = dir.path().join("t.jsonl");
    let request = EvalRequest {
        checkpoint: Some(ck.clone()),
        dialogues: 40,
        seed: 9,
        trajectories: Some(traj.clone()),
        label: "x".into(),
        ..EvalRequest::default()
    };
    let (a, results) = harness::evaluate(&request).unwrap();
    let (b, _) = harness::evaluate(&request).unwrap();
    assert_eq!(a, b);
    assert_eq!(fs::read(&ck).unwrap(), bytes);
    let turns: usize = results.iter().map(|r| r.turns.len()).sum();
    let lines = fs::read_to_string(&traj).unwrap();
    assert_eq!(lines.lines().count(), turns);
    for l in lines.lines() {
        serde_json::from_str::<serde_json::Value>(l).unwrap();
    }
}

#[test]
fn oracle_evaluation() {
    let (row, _) = harness::evaluate(&EvalRequest::default()).unwrap();
    assert!(row.success >= 0.95 && row.complete >= 0.95, "{row:?}");
    let none = EvalRequest {
        dialogues: 0,
        ..EvalRequest::default()
    };
    assert!(harness::evaluate(&none).is_err());
}

#[test]
fn aggregate_over_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    harness::train(&small(vec![0, 1], 20, 10), a.path(), &mut |_| {}).unwrap();
    let other = ExperimentConfig {
        name: "other".into(),
        ..small(vec![0], 20, 10)
    };
    harness::train(&other, b.path(), &mut |_| {}).unwrap();
    let rows = harness::aggregate(&[a.path().to_path_buf(), b.path().to_path_buf()]).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 9);
    let s = rows
        .iter()
        .find(|r| r.config == "acgos" && r.dialogues_trained == 20 && r.metric == "success")
        .unwrap();
    assert_eq!(s.seeds, 2);
    let mut out = Vec::new();
    harness::write_aggregate(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("config,dialogues-trained,metric,seeds,q1,median,q3,whisker-low,whisker-high,outliers"));
    // the same run twice duplicates rows
    assert!(harness::aggregate(&[a.path().to_path_buf(), a.path().to_path_buf()]).is_err());
}

#[test]
fn chat_with_the_oracle() {
    let mut s = ChatSession::new(std::sync::Arc::new(Ontology::bundled()), ChatAgent::Oracle);
    let mut out = Vec::new();
    let script = "hello\n\
        inform[restaurant.food=italian]; inform[restaurant.area=centre]\n\
        inform[restaurant.pricerange=dontcare]\n\
        inform[restaurant.parking=dontcare]\n\
        request[restaurant.phone]\n\
        bye\n\
        quit\n";
    harness::run_chat(&mut s, script.as_bytes(), &mut out).unwrap();
    let t = String::from_utf8(out).unwrap();
    assert_eq!(t.matches("system:").count(), 6, "{t}");
    assert!(t.contains("offer"), "{t}");
    assert!(t.contains("verdict: success=true complete=true"), "{t}");
}

fn cli(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_structdm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

#[test]
fn command_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["evaluate", "--dialogues", "30", "--domains", "restaurant,hotel"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("config,seed,dialogues-trained,inform-P"), "{text}");

    let out = cli(&["describe", "--policy", "hgnn", "--domains", "taxi"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("taxi"));

    let out = cli(
        &["train", "--policy", "fnn", "--mode", "bc", "--dialogues", "10", "--eval-every", "5", "--eval-dialogues", "5", "--seed", "2", "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ck = dir.path().join("run/seed-2/checkpoints/000010.ckpt");
    assert!(ck.exists());
    let out = cli(&["evaluate", "--checkpoint", ck.to_str().unwrap(), "--dialogues", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = cli(&["evaluate", "--dialogues", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["describe", "--domains", "nowhere"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));
}
