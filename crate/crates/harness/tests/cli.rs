use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use blicket_core::trajectory::import_dataset;
use serde_json::Value;

fn blicket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blicket"))
        .args(args)
        .env_remove("LLM_API_KEY")
        .output()
        .unwrap()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bayes_run_scores_full_marks() {
    let dir = tempfile::tempdir().unwrap();
    let out = blicket(&["run", "--policy", "bayes-greedy", "--episodes", "30", "--out", path_arg(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let pooled = csv.lines().last().unwrap();
    assert!(pooled.starts_with("pooled,bayes-greedy,3.0,0.0,1.0,30"), "{pooled}");
}

#[test]
fn random_run_writes_one_trajectory_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let out = blicket(&["run", "--policy", "random", "--episodes", "100", "--out", path_arg(dir.path())]);
    assert!(out.status.success());
    let trajs = import_dataset(dir.path()).unwrap();
    assert_eq!(trajs.len(), 100);
    for t in &trajs {
        t.replay().unwrap();
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_trajectories"], 100);
}

#[test]
fn runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = blicket(&["run", "--policy", "random", "--space", "extended", "--seed", "9", "--episodes", "20", "--out", path_arg(d.path())]);
        assert!(out.status.success());
    }
    for f in ["metrics.csv", "trajectories.jsonl", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let run_json = |d: &Path| {
        let mut v: Value = serde_json::from_str(&fs::read_to_string(d.join("run.json")).unwrap()).unwrap();
        v["config"]["out"] = Value::Null;
        v
    };
    assert_eq!(run_json(a.path()), run_json(b.path()));
}

#[test]
fn config_errors_exit_with_2() {
    assert_eq!(blicket(&["run", "--policy", "psychic"]).status.code(), Some(2));
    assert_eq!(blicket(&["run"]).status.code(), Some(2));
    assert_eq!(blicket(&["run", "--policy", "random", "--space", "huge"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"policy": "random", "mystery": 1}"#).unwrap();
    assert_eq!(blicket(&["run", "--config", path_arg(&cfg)]).status.code(), Some(2));
    assert_eq!(blicket(&["run", "--policy", "random-k"]).status.code(), Some(2));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"env": {"space": "default", "forced_explore_k": 10}, "policy": "random-k", "episodes": 40, "seed": 2}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = blicket(&["run", "--config", path_arg(&cfg), "--episodes", "25", "--out", path_arg(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trajs = import_dataset(&out_dir).unwrap();
    assert_eq!(trajs.len(), 25);
    assert!(trajs.iter().all(|t| t.quiz_entry_step().unwrap() > 10));
}

#[test]
fn train_q_then_reload() {
    let dir = tempfile::tempdir().unwrap();
    let out = blicket(&["train-q", "--preset", "conj-ab", "--seed", "1", "--out", path_arg(dir.path())]);
    assert!(out.status.success());
    let saved = blicket_harness::commands::load_table(&dir.path().join("q_table.json")).unwrap();
    assert!(saved.stats.converged);
    let config = blicket_core::config::preset("conj-ab").unwrap().env.build(1).unwrap();
    let env = blicket_core::env::BlicketEnv::new(config).unwrap();
    let mut policy = blicket_core::agents::GreedyQPolicy::new(saved.table);
    let t = blicket_core::agents::run_episode(&env, &mut policy, 0).unwrap();
    assert_eq!(t.total_reward(), 3.0);

    let zero = tempfile::tempdir().unwrap();
    let out = blicket(&["train-q", "--episodes", "0", "--out", path_arg(zero.path())]);
    assert!(out.status.success());
    let saved = blicket_harness::commands::load_table(&zero.path().join("q_table.json")).unwrap();
    assert!(!saved.stats.converged);
}

#[test]
fn plan_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = blicket(&["plan", "--out", path_arg(dir.path())]);
    assert!(out.status.success());
    let plan: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("plan.json")).unwrap()).unwrap();
    assert!((plan["value"].as_f64().unwrap() - 8.0 / 3.0).abs() < 1e-12);
    assert!(fs::read_to_string(dir.path().join("plan.txt")).unwrap().contains("check {A,B}"));

    let point = tempfile::tempdir().unwrap();
    let out = blicket(&["plan", "--prior", "0,0,0,1,0,0", "--out", path_arg(point.path())]);
    assert!(out.status.success());
    let plan: Value = serde_json::from_str(&fs::read_to_string(point.path().join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["value"], 0.0);
    assert_eq!(plan["tree"]["kind"], "terminal");

    let ext = tempfile::tempdir().unwrap();
    let out = blicket(&["plan", "--space", "extended", "--out", path_arg(ext.path())]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("leaves: 11"));
}

#[test]
fn offline_prompts_match_goldens() {
    let dir = tempfile::tempdir().unwrap();
    let out = blicket(&["prompts", "--out", path_arg(dir.path())]);
    assert!(out.status.success());
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/prompts");
    for entry in fs::read_dir(&golden).unwrap() {
        let entry = entry.unwrap();
        let rendered = fs::read(dir.path().join("prompts").join(entry.file_name())).unwrap();
        assert_eq!(rendered, fs::read(entry.path()).unwrap());
    }
    let log = fs::read_to_string(dir.path().join("prompt_scores.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 12);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("freeform_given_disjunctive       gpt3   correct 1 wrong 6 structure Correct"));
}

#[test]
fn online_prompts_need_a_key() {
    let out = blicket(&["prompts", "--online", "--base-url", "http://127.0.0.1:9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("LLM_API_KEY"));
}
