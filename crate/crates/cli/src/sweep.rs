//! Experiment sweeps: enumerate cells, run the missing ones, summarize.
//!
//! A cell is one `(env, method, dataset episodes, tau, n, seed index)`
//! combination. Running it generates the demonstrations, trains the
//! ensemble and evaluates it against the env's cached baselines. The core
//! grid crosses every method with every dataset size; the ablations vary
//! `tau` and `n` for the swarm method at the ablation dataset sizes.
//!
//! Output directory layout:
//!
//! ```text
//! results.csv            one row per cell
//! baselines.csv          expert and random returns per env
//! traces/<cell>.csv      per-timestep mean action difference of a cell
//! summary_returns.csv    core grid, mean and std over seeds
//! summary_tau.csv        tau ablation
//! summary_n.csv          n ablation
//! summary_traces.csv     per-timestep disagreement, mean and std over seeds
//! plots/*.svg            line charts of the summaries
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::Serialize;
use swarmbc_core::{generate_dataset, train, Baselines, EnvId};

use crate::config::SweepConfig;
use crate::error::{CliError, Result};
use crate::eval::{evaluate, Actor};
use crate::method::Method;
use crate::seeds;
use crate::store::{CellKey, CellMetrics, ResultsStore, RunRecord};
use crate::svg::{line_chart, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub workers: usize,
    /// Re-run cells that already have a result.
    pub force: bool,
    /// Suppress per-cell progress lines on stderr.
    pub quiet: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            workers: 1,
            force: false,
            quiet: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub env: String,
    pub method: String,
    pub episodes: usize,
    pub tau: f64,
    pub n: usize,
    pub seeds: usize,
    pub scaled_return_mean: Option<f64>,
    pub scaled_return_std: Option<f64>,
    pub mean_action_difference_mean: Option<f64>,
    pub mean_action_difference_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub env: String,
    pub method: String,
    pub episodes: usize,
    pub tau: f64,
    pub n: usize,
    pub t: usize,
    pub seeds: usize,
    pub d_mean: f64,
    pub d_std: f64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub cells: usize,
    pub ran: usize,
    pub failed: usize,
    pub returns: Vec<SummaryRow>,
    pub tau_ablation: Vec<SummaryRow>,
    pub n_ablation: Vec<SummaryRow>,
}

fn core_key(config: &SweepConfig, env: EnvId, method: Method, episodes: usize, seed: usize) -> CellKey {
    let (tau, n) = match method {
        Method::Bc => (0.0, 1),
        Method::Ensemble => (0.0, config.n),
        Method::Swarm => (config.tau, config.n),
    };
    CellKey {
        env,
        method,
        episodes,
        tau,
        n,
        seed,
    }
}

fn tau_key(config: &SweepConfig, env: EnvId, episodes: usize, tau: f64, seed: usize) -> CellKey {
    let method = if tau == 0.0 { Method::Ensemble } else { Method::Swarm };
    CellKey {
        env,
        method,
        episodes,
        tau,
        n: config.n,
        seed,
    }
}

fn n_key(config: &SweepConfig, env: EnvId, episodes: usize, n: usize, seed: usize) -> CellKey {
    CellKey {
        env,
        method: Method::Swarm,
        episodes,
        tau: config.tau,
        n,
        seed,
    }
}

/// Every cell the configuration asks for, deduplicated, in canonical order.
pub fn cells(config: &SweepConfig) -> Vec<CellKey> {
    let mut set = BTreeSet::new();
    for &env in &config.envs {
        for seed in 0..config.seeds {
            for &method in &config.methods {
                for &episodes in &config.episodes {
                    set.insert(core_key(config, env, method, episodes, seed));
                }
            }
            if config.ablations {
                for &episodes in &config.ablation_episodes {
                    for &tau in &config.tau_grid {
                        set.insert(tau_key(config, env, episodes, tau, seed));
                    }
                    for &n in &config.n_grid {
                        set.insert(n_key(config, env, episodes, n, seed));
                    }
                }
            }
        }
    }
    set.into_iter().collect()
}

pub fn trace_file_name(key: &CellKey) -> String {
    format!(
        "{}_{}_ep{}_tau{}_n{}_seed{}.csv",
        key.env.name(),
        key.method.name(),
        key.episodes,
        key.tau,
        key.n,
        key.seed
    )
}

/// Trains and evaluates one cell. Failures become failed records.
pub fn run_cell(config: &SweepConfig, key: &CellKey, baselines: &Baselines) -> (RunRecord, Option<Vec<(f64, usize)>>) {
    let master = config.master_seed;
    let result = (|| -> std::result::Result<_, String> {
        let data_seed = seeds::dataset_seed(master, key.env, key.episodes, key.seed);
        let dataset = generate_dataset(key.env, key.episodes, data_seed).map_err(|e| e.to_string())?;
        let trained = train(
            &dataset,
            key.n,
            key.tau,
            &config.training,
            seeds::train_seed(master, key),
        )
        .map_err(|e| e.to_string())?;
        let eval_seed = seeds::eval_seed(master, key.env, key.episodes, key.seed);
        let evaluation = evaluate(
            key.env,
            Actor::Ensemble(&trained.ensemble),
            config.eval_episodes,
            eval_seed,
            baselines,
        )
        .map_err(|e| e.to_string())?;
        let metrics = CellMetrics {
            scaled_return: evaluation.scaled_return,
            mean_action_difference: evaluation.mean_action_difference,
            episode_return: evaluation.episode_return,
            epochs: Some(trained.history.len()),
        };
        Ok((metrics, evaluation.difference_trace))
    })();
    match result {
        Ok((metrics, trace)) => (
            RunRecord {
                key: *key,
                outcome: Ok(metrics),
            },
            trace,
        ),
        Err(e) => (
            RunRecord {
                key: *key,
                outcome: Err(e),
            },
            None,
        ),
    }
}

fn trace_csv(trace: &[(f64, usize)]) -> String {
    let mut out = String::from("t,d_mean,episodes\n");
    for (t, (d, count)) in trace.iter().enumerate() {
        let _ = writeln!(out, "{t},{d},{count}");
    }
    out
}

fn read_trace(path: &Path) -> Option<Vec<f64>> {
    let text = fs::read_to_string(path).ok()?;
    text.lines()
        .skip(1)
        .map(|line| line.split(',').nth(1)?.parse().ok())
        .collect()
}

fn describe(key: &CellKey) -> String {
    format!(
        "{} {} episodes={} tau={} n={} seed={}",
        key.env.name(),
        key.method.name(),
        key.episodes,
        key.tau,
        key.n,
        key.seed
    )
}

pub fn run_sweep(config: &SweepConfig, out: &Path, options: SweepOptions) -> Result<SweepOutcome> {
    if options.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let mut store = ResultsStore::open(out)?;
    let trace_dir = out.join("traces");
    fs::create_dir_all(&trace_dir).map_err(|e| CliError::io(&trace_dir, e))?;

    let mut baselines = BTreeMap::new();
    for &env in &config.envs {
        let b = store.baselines(env, config.baseline_episodes, seeds::baseline_seed(config.master_seed, env))?;
        baselines.insert(env.name(), b);
    }

    let all = cells(config);
    let pending: Vec<CellKey> = all
        .iter()
        .filter(|k| options.force || store.get(k).is_none())
        .copied()
        .collect();
    let total = pending.len();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut failed = 0;

    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..options.workers.min(total.max(1)) {
            let tx = tx.clone();
            let (pending, next, baselines) = (&pending, &next, &baselines);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(key) = pending.get(i) else { break };
                let start = Instant::now();
                let (record, trace) = run_cell(config, key, &baselines[key.env.name()]);
                if tx.send((record, trace, start.elapsed())).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (done, (record, trace, elapsed)) in rx.iter().enumerate() {
            if let Some(trace) = trace {
                let path = trace_dir.join(trace_file_name(&record.key));
                fs::write(&path, trace_csv(&trace)).map_err(|e| CliError::io(&path, e))?;
            }
            if !options.quiet {
                let status = match &record.outcome {
                    Ok(m) => match m.mean_action_difference {
                        Some(d) => format!("return {:.3} d {:.4}", m.scaled_return, d),
                        None => format!("return {:.3}", m.scaled_return),
                    },
                    Err(e) => format!("FAILED: {e}"),
                };
                eprintln!(
                    "[{}/{}] {} -> {} ({:.1}s)",
                    done + 1,
                    total,
                    describe(&record.key),
                    status,
                    elapsed.as_secs_f64()
                );
            }
            if record.outcome.is_err() {
                failed += 1;
            }
            store.append(record)?;
        }
        Ok(())
    })?;
    store.finalize()?;

    let outcome = summarize(config, &store, &trace_dir, out)?;
    Ok(SweepOutcome {
        cells: all.len(),
        ran: total,
        failed,
        ..outcome
    })
}

/// Sample mean and standard deviation (zero for a single value).
fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

fn summary_row(store: &ResultsStore, keys: &[CellKey]) -> SummaryRow {
    let first = keys[0];
    let metrics: Vec<&CellMetrics> = keys
        .iter()
        .filter_map(|k| store.get(k))
        .filter_map(|r| r.outcome.as_ref().ok())
        .collect();
    let returns: Vec<f64> = metrics.iter().map(|m| m.scaled_return).collect();
    let diffs: Vec<f64> = metrics.iter().filter_map(|m| m.mean_action_difference).collect();
    let r = mean_std(&returns);
    let d = if diffs.len() == metrics.len() { mean_std(&diffs) } else { None };
    SummaryRow {
        env: first.env.name().to_string(),
        method: first.method.name().to_string(),
        episodes: first.episodes,
        tau: first.tau,
        n: first.n,
        seeds: metrics.len(),
        scaled_return_mean: r.map(|v| v.0),
        scaled_return_std: r.map(|v| v.1),
        mean_action_difference_mean: d.map(|v| v.0),
        mean_action_difference_std: d.map(|v| v.1),
    }
}

fn write_csv<T: Serialize>(path: &Path, header: &str, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    if rows.is_empty() {
        text.push_str(header);
        text.push('\n');
    } else {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in rows {
            writer.serialize(row).expect("rows serialize");
        }
        text = String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("csv is utf-8");
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub const SUMMARY_HEADER: &str = "env,method,episodes,tau,n,seeds,scaled_return_mean,scaled_return_std,mean_action_difference_mean,mean_action_difference_std";
pub const TRACE_SUMMARY_HEADER: &str = "env,method,episodes,tau,n,t,seeds,d_mean,d_std";

fn points(rows: &[&SummaryRow], x: impl Fn(&SummaryRow) -> f64, difference: bool) -> Vec<(f64, f64, f64)> {
    rows.iter()
        .filter_map(|r| {
            let (m, s) = if difference {
                (r.mean_action_difference_mean?, r.mean_action_difference_std?)
            } else {
                (r.scaled_return_mean?, r.scaled_return_std?)
            };
            Some((x(r), m, s))
        })
        .collect()
}

fn save_plot(dir: &Path, name: &str, svg: String) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, svg).map_err(|e| CliError::io(&path, e))
}

fn summarize(config: &SweepConfig, store: &ResultsStore, trace_dir: &Path, out: &Path) -> Result<SweepOutcome> {
    let seeds: Vec<usize> = (0..config.seeds).collect();
    let group = |f: &dyn Fn(usize) -> CellKey| -> Vec<CellKey> { seeds.iter().map(|&s| f(s)).collect() };
    let plots: PathBuf = out.join("plots");
    fs::create_dir_all(&plots).map_err(|e| CliError::io(&plots, e))?;

    let mut returns = Vec::new();
    for &env in &config.envs {
        for &method in &config.methods {
            for &episodes in &config.episodes {
                returns.push(summary_row(store, &group(&|s| core_key(config, env, method, episodes, s))));
            }
        }
    }
    let mut tau_ablation = Vec::new();
    let mut n_ablation = Vec::new();
    if config.ablations {
        for &env in &config.envs {
            for &episodes in &config.ablation_episodes {
                for &tau in &config.tau_grid {
                    tau_ablation.push(summary_row(store, &group(&|s| tau_key(config, env, episodes, tau, s))));
                }
                for &n in &config.n_grid {
                    n_ablation.push(summary_row(store, &group(&|s| n_key(config, env, episodes, n, s))));
                }
            }
        }
    }

    let mut traces = Vec::new();
    for &env in &config.envs {
        for &episodes in &config.trace_episodes {
            let mut series = Vec::new();
            for &method in config.methods.iter().filter(|&&m| m != Method::Bc) {
                let keys = group(&|s| core_key(config, env, method, episodes, s));
                let per_seed: Vec<Vec<f64>> = keys
                    .iter()
                    .filter_map(|k| read_trace(&trace_dir.join(trace_file_name(k))))
                    .collect();
                let longest = per_seed.iter().map(Vec::len).max().unwrap_or(0);
                let mut pts = Vec::new();
                for t in 0..longest {
                    let values: Vec<f64> = per_seed.iter().filter_map(|tr| tr.get(t).copied()).collect();
                    if let Some((m, s)) = mean_std(&values) {
                        traces.push(TraceRow {
                            env: env.name().to_string(),
                            method: method.name().to_string(),
                            episodes,
                            tau: keys[0].tau,
                            n: keys[0].n,
                            t,
                            seeds: values.len(),
                            d_mean: m,
                            d_std: s,
                        });
                        pts.push((t as f64, m, s));
                    }
                }
                if !pts.is_empty() {
                    series.push(Series {
                        label: method.name().to_string(),
                        points: pts,
                    });
                }
            }
            if !series.is_empty() {
                let title = format!("{}: action difference over time ({} episodes)", env.name(), episodes);
                save_plot(
                    &plots,
                    &format!("trace_{}_ep{}.svg", env.name(), episodes),
                    line_chart(&title, "timestep", "mean action difference", &series),
                )?;
            }
        }
    }

    for &env in &config.envs {
        let rows_of = |method: Method| -> Vec<&SummaryRow> {
            returns
                .iter()
                .filter(|r| r.env == env.name() && r.method == method.name())
                .collect()
        };
        let by_episodes = |difference: bool| -> Vec<Series> {
            config
                .methods
                .iter()
                .map(|&m| Series {
                    label: m.name().to_string(),
                    points: points(&rows_of(m), |r| r.episodes as f64, difference),
                })
                .filter(|s| !s.points.is_empty())
                .collect()
        };
        save_plot(
            &plots,
            &format!("returns_{}.svg", env.name()),
            line_chart(&format!("{}: scaled return", env.name()), "expert episodes", "scaled return", &by_episodes(false)),
        )?;
        let diff_series = by_episodes(true);
        if !diff_series.is_empty() {
            save_plot(
                &plots,
                &format!("difference_{}.svg", env.name()),
                line_chart(
                    &format!("{}: mean action difference", env.name()),
                    "expert episodes",
                    "mean action difference",
                    &diff_series,
                ),
            )?;
        }
        if config.ablations {
            for &episodes in &config.ablation_episodes {
                let pick = |rows: &[SummaryRow]| -> Vec<SummaryRow> {
                    rows.iter()
                        .filter(|r| r.env == env.name() && r.episodes == episodes)
                        .cloned()
                        .collect()
                };
                let tau_rows = pick(&tau_ablation);
                let tau_refs: Vec<&SummaryRow> = tau_rows.iter().collect();
                save_plot(
                    &plots,
                    &format!("tau_{}_ep{}.svg", env.name(), episodes),
                    line_chart(
                        &format!("{}: tau ablation ({} episodes, n = {})", env.name(), episodes, config.n),
                        "tau",
                        "scaled return",
                        &[Series {
                            label: "scaled return".into(),
                            points: points(&tau_refs, |r| r.tau, false),
                        }],
                    ),
                )?;
                let n_rows = pick(&n_ablation);
                let n_refs: Vec<&SummaryRow> = n_rows.iter().collect();
                save_plot(
                    &plots,
                    &format!("n_{}_ep{}.svg", env.name(), episodes),
                    line_chart(
                        &format!("{}: ensemble size ablation ({} episodes, tau = {})", env.name(), episodes, config.tau),
                        "n",
                        "scaled return",
                        &[Series {
                            label: "scaled return".into(),
                            points: points(&n_refs, |r| r.n as f64, false),
                        }],
                    ),
                )?;
            }
        }
    }

    write_csv(&out.join("summary_returns.csv"), SUMMARY_HEADER, &returns)?;
    write_csv(&out.join("summary_tau.csv"), SUMMARY_HEADER, &tau_ablation)?;
    write_csv(&out.join("summary_n.csv"), SUMMARY_HEADER, &n_ablation)?;
    write_csv(&out.join("summary_traces.csv"), TRACE_SUMMARY_HEADER, &traces)?;
    Ok(SweepOutcome {
        cells: 0,
        ran: 0,
        failed: 0,
        returns,
        tau_ablation,
        n_ablation,
    })
}
