//! End-to-end tests of the `swarmbc` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn swarmbc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmbc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

/// Small network and short training so end-to-end runs stay fast.
const QUICK_TRAIN: [&str; 6] = ["--hidden-width", "8", "--max-epochs", "15", "--batch-size", "16"];

#[test]
fn gen_data_writes_header_and_refuses_overwrite() {
    let dir = TempDir::new().unwrap();
    let out = swarmbc(&["gen-data", "--env", "point_reach", "--episodes", "1", "--seed", "0", "--out", "d.jsonl"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let path = dir.path().join("d.jsonl");
    let before = fs::read(&path).unwrap();
    assert_eq!(
        first_line(&path),
        r#"{"env":"point_reach","episodes":1,"seed":0,"obs_dim":4,"action_dim":2,"action_kind":"continuous"}"#
    );
    let record = String::from_utf8(before.clone()).unwrap().lines().nth(1).unwrap().to_string();
    assert!(record.starts_with(r#"{"s":["#) && record.contains(r#"],"a":["#));

    let again = swarmbc(&["gen-data", "--env", "point_reach", "--seed", "0", "--out", "d.jsonl"], dir.path());
    assert_eq!(code(&again), 1);
    assert!(stderr(&again).contains("--force"));
    assert_eq!(fs::read(&path).unwrap(), before);

    let forced = swarmbc(&["gen-data", "--env", "point_reach", "--seed", "1", "--out", "d.jsonl", "--force"], dir.path());
    assert_eq!(code(&forced), 0);
    assert_ne!(fs::read(&path).unwrap(), before);
}

#[test]
fn gen_data_header_records_episode_count() {
    let dir = TempDir::new().unwrap();
    let out = swarmbc(&["gen-data", "--env", "cart_balance", "--episodes", "8", "--out", "d.jsonl"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let header: serde_json::Value = serde_json::from_str(&first_line(&dir.path().join("d.jsonl"))).unwrap();
    assert_eq!(header["episodes"], 8);
    assert_eq!(header["action_kind"], "discrete");
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&swarmbc(&["bogus"], dir.path())), 1);
    assert_eq!(code(&swarmbc(&["gen-data", "--env", "point_reach"], dir.path())), 1);
    assert_eq!(code(&swarmbc(&["gen-data", "--env", "moon_lander", "--out", "x"], dir.path())), 1);
    assert_eq!(code(&swarmbc(&["--help"], dir.path())), 0);
    assert_eq!(code(&swarmbc(&["--version"], dir.path())), 0);
}

fn make_dataset(dir: &Path, env: &str) {
    let out = swarmbc(&["gen-data", "--env", env, "--episodes", "1", "--out", "d.jsonl"], dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn train_rejects_incompatible_method_parameters() {
    let dir = TempDir::new().unwrap();
    make_dataset(dir.path(), "point_reach");
    let swarm = swarmbc(&["train", "--dataset", "d.jsonl", "--method", "swarm", "--tau", "0", "--out", "m.json"], dir.path());
    assert_eq!(code(&swarm), 1);
    assert!(stderr(&swarm).contains("use ensemble"), "{}", stderr(&swarm));
    let bc = swarmbc(&["train", "--dataset", "d.jsonl", "--method", "bc", "--n", "3", "--out", "m.json"], dir.path());
    assert_eq!(code(&bc), 1);
    let ensemble = swarmbc(&["train", "--dataset", "d.jsonl", "--method", "ensemble", "--tau", "0.5", "--out", "m.json"], dir.path());
    assert_eq!(code(&ensemble), 1);
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn train_writes_model_and_decreasing_history() {
    let dir = TempDir::new().unwrap();
    make_dataset(dir.path(), "pendulum_swing");
    let mut args = vec!["train", "--dataset", "d.jsonl", "--method", "swarm", "--seed", "3", "--out", "m.json"];
    args.extend(QUICK_TRAIN);
    let out = swarmbc(&args, dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let history = fs::read_to_string(dir.path().join("m_history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,bc_term,swarm_term,total"));
    let totals: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(totals.len() > 1);
    assert!(totals.last().unwrap() < totals.first().unwrap());

    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(model["format"], "swarmbc-model");
    assert_eq!(model["method"], "swarm");
    assert_eq!(model["tau"], 0.25);
    assert_eq!(model["n"], 4);
    assert_eq!(model["layer_dims"], serde_json::json!([3, 8, 8, 1]));
    assert_eq!(model["members"].as_array().unwrap().len(), 4);

    let again = swarmbc(&args, dir.path());
    assert_eq!(code(&again), 1, "existing model must not be overwritten");
}

#[test]
fn training_is_reproducible() {
    let dir = TempDir::new().unwrap();
    make_dataset(dir.path(), "cart_balance");
    for name in ["a.json", "b.json"] {
        let mut args = vec!["train", "--dataset", "d.jsonl", "--method", "ensemble", "--seed", "5", "--out", name];
        args.extend(QUICK_TRAIN);
        assert_eq!(code(&swarmbc(&args, dir.path())), 0);
    }
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a_history.csv"), read("b_history.csv"));
}

#[test]
fn expert_evaluation_scores_about_one() {
    let dir = TempDir::new().unwrap();
    for env in ["point_reach", "pendulum_swing", "cart_balance"] {
        let out = swarmbc(&["eval", "--expert", "--env", env, "--seed", "4", "--out", env], dir.path());
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let summary = fs::read_to_string(dir.path().join(env).join("eval.csv")).unwrap();
        let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
        let scaled: f64 = row[7].parse().unwrap();
        assert!((scaled - 1.0).abs() <= 0.05, "{env}: {scaled}");
    }
}

#[test]
fn model_evaluation_is_reproducible_and_records_traces() {
    let dir = TempDir::new().unwrap();
    make_dataset(dir.path(), "point_reach");
    let mut args = vec!["train", "--dataset", "d.jsonl", "--method", "ensemble", "--n", "3", "--out", "m.json"];
    args.extend(QUICK_TRAIN);
    assert_eq!(code(&swarmbc(&args, dir.path())), 0);
    for out in ["a", "b"] {
        let run = swarmbc(&["eval", "--model", "m.json", "--episodes", "3", "--seed", "9", "--out", out], dir.path());
        assert_eq!(code(&run), 0, "{}", stderr(&run));
    }
    for file in ["eval.csv", "episodes.csv", "baselines.csv", "trajectories/episode_000.csv", "trajectories/episode_002.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let a = dir.path().join("a");
    assert_eq!(
        first_line(&a.join("eval.csv")),
        "env,method,dataset_episodes,tau,n,seed,eval_episodes,scaled_return,episode_return,mean_action_difference"
    );
    assert_eq!(first_line(&a.join("episodes.csv")), "episode,episode_return,scaled_return,mean_action_difference");
    assert_eq!(
        first_line(&a.join("trajectories/episode_000.csv")),
        "t,reward,d,a_member0_0,a_member0_1,a_member1_0,a_member1_1,a_member2_0,a_member2_1"
    );
    let trace = fs::read_to_string(a.join("trajectories/episode_000.csv")).unwrap();
    let d: f64 = trace.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(d > 0.0);

    let wrong_env = swarmbc(&["eval", "--model", "m.json", "--env", "cart_balance", "--out", "c"], dir.path());
    assert_eq!(code(&wrong_env), 1);
    let exists = swarmbc(&["eval", "--model", "m.json", "--episodes", "3", "--seed", "9", "--out", "a"], dir.path());
    assert_eq!(code(&exists), 1);
}

#[test]
fn mode_demo_reports_concentration() {
    let dir = TempDir::new().unwrap();
    let out = swarmbc(&["mode-demo"], dir.path());
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,mode_mass"));
    let rows: Vec<(u32, f64)> = lines
        .map(|l| {
            let (n, m) = l.split_once(',').unwrap();
            (n.parse().unwrap(), m.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), [1, 2, 4, 8, 16, 32]);
    assert!(rows.windows(2).all(|w| w[1].1 >= w[0].1));
    assert!(rows[5].1 >= 0.99);

    let single = swarmbc(&["mode-demo", "--n-list", "1"], dir.path());
    let single_rows: Vec<String> = stdout(&single).lines().skip(1).map(String::from).collect();
    assert_eq!(single_rows, [text.lines().nth(1).unwrap()]);

    let file = swarmbc(&["mode-demo", "--density", "bimodal", "--out", "demo.csv"], dir.path());
    assert_eq!(code(&file), 0);
    assert_eq!(first_line(&dir.path().join("demo.csv")), "N,mode_mass");
}

#[test]
fn mode_demo_uniform_density_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let out = swarmbc(&["mode-demo", "--density", "uniform"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no single mode"), "{}", stderr(&out));
}

#[test]
fn grad_check_passes() {
    let dir = TempDir::new().unwrap();
    let out = swarmbc(&["grad-check", "--trials", "20", "--seed", "1"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).starts_with("max relative error"));
}

const SMALL_SWEEP: &str = "\
envs = point_reach,cart_balance
episodes = 1,2
seeds = 2
eval_episodes = 2
baseline_episodes = 4
tau_grid = 0,0.5
n_grid = 2,3
hidden_width = 8
max_epochs = 4
";

fn sweep(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["sweep", "--quiet", "--config", "sweep.conf", "--out", out];
    args.extend(extra);
    swarmbc(&args, dir)
}

fn sweep_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("sweep.conf"), SMALL_SWEEP).unwrap();
    dir
}

#[test]
fn sweep_writes_documented_outputs() {
    let dir = sweep_dir();
    let out = sweep(dir.path(), "s", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // 2 envs x 2 seeds x (3 methods x 2 sizes + tau 0.5 + n 2 and 3).
    assert!(stdout(&out).starts_with("36 cells, 36 run, 0 failed"), "{}", stdout(&out));
    let s = dir.path().join("s");
    let results = fs::read_to_string(s.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("# swarmbc results schema 1"));
    assert_eq!(
        lines.next(),
        Some("env,method,episodes,tau,n,seed,status,scaled_return,mean_action_difference,episode_return,epochs,error")
    );
    assert_eq!(lines.count(), 36);
    let baselines = fs::read_to_string(s.join("baselines.csv")).unwrap();
    assert_eq!(
        baselines.lines().take(2).collect::<Vec<_>>(),
        ["# swarmbc baselines schema 1", "env,episodes,seed,random_return,expert_return"]
    );
    let summary = "env,method,episodes,tau,n,seeds,scaled_return_mean,scaled_return_std,mean_action_difference_mean,mean_action_difference_std";
    for file in ["summary_returns.csv", "summary_tau.csv", "summary_n.csv"] {
        assert_eq!(first_line(&s.join(file)), summary, "{file}");
    }
    assert_eq!(first_line(&s.join("summary_traces.csv")), "env,method,episodes,tau,n,t,seeds,d_mean,d_std");
    assert_eq!(
        first_line(&s.join("traces/point_reach_swarm_ep1_tau0.25_n4_seed0.csv")),
        "t,d_mean,episodes"
    );
    for plot in ["returns_point_reach.svg", "difference_cart_balance.svg", "trace_point_reach_ep1.svg", "tau_cart_balance_ep1.svg", "n_point_reach_ep1.svg"] {
        let svg = fs::read_to_string(s.join("plots").join(plot)).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"), "{plot}");
    }
}

#[test]
fn sweep_resumes_and_skips_completed_cells() {
    let dir = sweep_dir();
    assert_eq!(code(&sweep(dir.path(), "full", &[])), 0);
    let full = fs::read(dir.path().join("full/results.csv")).unwrap();

    let rerun = sweep(dir.path(), "full", &[]);
    assert_eq!(code(&rerun), 0);
    assert!(stdout(&rerun).starts_with("36 cells, 0 run"), "{}", stdout(&rerun));
    assert_eq!(fs::read(dir.path().join("full/results.csv")).unwrap(), full);

    // Simulate an interrupted run: keep the schema, header and ten rows.
    let partial = dir.path().join("partial");
    fs::create_dir_all(&partial).unwrap();
    let text = String::from_utf8(full.clone()).unwrap();
    let kept: Vec<&str> = text.lines().take(12).collect();
    fs::write(partial.join("results.csv"), kept.join("\n") + "\n").unwrap();
    let resumed = sweep(dir.path(), "partial", &[]);
    assert_eq!(code(&resumed), 0, "{}", stderr(&resumed));
    assert!(stdout(&resumed).starts_with("36 cells, 26 run"), "{}", stdout(&resumed));
    assert_eq!(fs::read(partial.join("results.csv")).unwrap(), full);

    let forced = sweep(dir.path(), "full", &["--force"]);
    assert!(stdout(&forced).starts_with("36 cells, 36 run"));
    assert_eq!(fs::read(dir.path().join("full/results.csv")).unwrap(), full);
}

#[test]
fn sweep_output_does_not_depend_on_worker_count() {
    let dir = sweep_dir();
    assert_eq!(code(&sweep(dir.path(), "one", &["--workers", "1"])), 0);
    assert_eq!(code(&sweep(dir.path(), "three", &["--workers", "3"])), 0);
    for file in ["results.csv", "baselines.csv", "summary_returns.csv", "summary_tau.csv", "summary_n.csv", "summary_traces.csv"] {
        assert_eq!(
            fs::read(dir.path().join("one").join(file)).unwrap(),
            fs::read(dir.path().join("three").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn sweep_config_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    for (text, needle) in [
        ("tau_grid =\n", "tau_grid"),
        ("epsiodes = 1,2\n", "epsiodes"),
        ("seeds = 0\n", "seeds"),
    ] {
        fs::write(dir.path().join("bad.conf"), text).unwrap();
        let out = swarmbc(&["sweep", "--config", "bad.conf", "--out", "o"], dir.path());
        assert_eq!(code(&out), 1, "{text}");
        assert!(stderr(&out).contains(needle), "{text}: {}", stderr(&out));
    }
}
