//! Argument parsing and the subcommand implementations.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use swarmbc_core::gradcheck::check_random_ensembles;
use swarmbc_core::theory::{concentration_report, BuiltinDensity};
use swarmbc_core::train::TrainError;
use swarmbc_core::{generate_dataset, train, EnvId, TrainConfig};

use crate::config::SweepConfig;
use crate::dataset_io::{read_dataset, write_dataset};
use crate::error::{CliError, Result};
use crate::eval::{evaluate, trajectory_csv, Actor};
use crate::files;
use crate::method::Method;
use crate::model_io::{load_model, save_model, Model};
use crate::seeds;
use crate::store::ResultsStore;
use crate::sweep::{run_sweep, SweepOptions};

/// Largest gradient-check error that still counts as agreement.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "swarmbc", version, about = "Ensemble behavior cloning experiments")]
pub struct Cli {
    /// Seed for everything random in the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs (sweep: re-run completed cells).
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record expert demonstrations as a JSONL dataset.
    GenData(GenDataArgs),
    /// Train a bc, ensemble or swarm policy on a dataset.
    Train(TrainArgs),
    /// Roll out a trained model (or the expert) and score it.
    Eval(EvalArgs),
    /// Run an experiment grid from a config file.
    Sweep(SweepArgs),
    /// Mode concentration of a powered grid density.
    ModeDemo(ModeDemoArgs),
    /// Check analytic gradients against finite differences.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub env: String,
    #[arg(long, default_value_t = 1)]
    pub episodes: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// bc, ensemble or swarm.
    #[arg(long, default_value = "swarm")]
    pub method: String,
    /// Alignment coefficient (swarm default 0.25).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Ensemble size (default 4, bc uses 1).
    #[arg(long)]
    pub n: Option<usize>,
    /// Loss history CSV (default: `<out stem>_history.csv`).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub hidden_width: Option<usize>,
    #[arg(long)]
    pub hidden_layers: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Cap on optimizer steps; 0 removes the cap.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Average the alignment penalty over member pairs and layer widths.
    #[arg(long)]
    pub normalized_pairs: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trained model JSON.
    #[arg(long, required_unless_present = "expert")]
    pub model: Option<PathBuf>,
    /// Evaluate the scripted expert instead of a model.
    #[arg(long, conflicts_with = "model", requires = "env")]
    pub expert: bool,
    /// Environment (defaults to the model's).
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub episodes: usize,
    /// Rollouts behind the expert and random baselines.
    #[arg(long, default_value_t = 20)]
    pub baseline_episodes: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Config file; every key has a default.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Only print the final summary.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ModeDemoArgs {
    /// gaussian, bimodal, uniform or gaussian2d.
    #[arg(long, default_value = "gaussian")]
    pub density: String,
    /// Comma-separated powers.
    #[arg(long, default_value = "1,2,4,8,16,32", value_delimiter = ',')]
    pub n_list: Vec<u32>,
    /// Window edge around the mode.
    #[arg(long, default_value_t = BuiltinDensity::DEFAULT_TAU)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

fn required_out(out: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    out.clone()
        .ok_or_else(|| CliError::Usage(format!("--out is required: {what}")))
}

fn parse_env(name: &str) -> Result<EnvId> {
    EnvId::from_name(name).ok_or_else(|| {
        let known: Vec<&str> = EnvId::ALL.iter().map(|e| e.name()).collect();
        CliError::Usage(format!("unknown env '{name}' (expected one of {})", known.join(", ")))
    })
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::GenData(args) => gen_data(args, seed, &required_out(&cli.out, "dataset path")?, cli.force),
        Command::Train(args) => cmd_train(args, seed, &required_out(&cli.out, "model path")?, cli.force),
        Command::Eval(args) => cmd_eval(args, seed, &required_out(&cli.out, "output directory")?, cli.force),
        Command::Sweep(args) => cmd_sweep(args, &cli),
        Command::ModeDemo(args) => mode_demo(args, cli.out.as_deref(), cli.force),
        Command::GradCheck(args) => grad_check(args, seed),
    }
}

fn gen_data(args: &GenDataArgs, seed: u64, out: &Path, force: bool) -> Result<()> {
    let env = parse_env(&args.env)?;
    if args.episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let dataset = generate_dataset(env, args.episodes, seed).map_err(|e| CliError::Numerical(e.to_string()))?;
    write_dataset(out, &dataset, force)?;
    eprintln!("wrote {} samples to {}", dataset.len(), out.display());
    Ok(())
}

fn training_config(args: &TrainArgs) -> TrainConfig {
    let mut config = TrainConfig::default();
    if let Some(v) = args.hidden_width {
        config.hidden_width = v;
    }
    if let Some(v) = args.hidden_layers {
        config.hidden_layers = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.max_epochs {
        config.max_epochs = v;
    }
    if let Some(v) = args.max_steps {
        config.max_steps = (v > 0).then_some(v);
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    if let Some(v) = args.learning_rate {
        config.adam.learning_rate = v;
    }
    config.normalized_pairs = args.normalized_pairs;
    config
}

pub const HISTORY_HEADER: &str = "epoch,bc_term,swarm_term,total";

fn history_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_history.csv"))
}

fn cmd_train(args: &TrainArgs, seed: u64, out: &Path, force: bool) -> Result<()> {
    let method = Method::from_name(&args.method)
        .ok_or_else(|| CliError::Usage(format!("unknown method '{}' (expected bc, ensemble or swarm)", args.method)))?;
    let (tau, n) = method.resolve(args.tau, args.n)?;
    let dataset = read_dataset(&args.dataset)?;
    let env = parse_env(&dataset.meta().env)?;
    let history_path = args.history.clone().unwrap_or_else(|| history_path(out));
    for path in [out, history_path.as_path()] {
        if !force && path.exists() {
            return Err(CliError::Exists { path: path.to_path_buf() });
        }
    }
    let model = |ensemble| Model {
        env,
        dataset_episodes: dataset.meta().episodes,
        seed,
        ensemble,
    };
    let outcome = match train(&dataset, n, tau, &training_config(args), seed) {
        Ok(outcome) => outcome,
        Err(TrainError::Diverged { epoch, checkpoint }) => {
            save_model(out, &model(*checkpoint), force)?;
            return Err(CliError::Numerical(format!(
                "loss became non-finite in epoch {epoch}; parameters from before that epoch saved to {}",
                out.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let mut history = String::from(HISTORY_HEADER);
    history.push('\n');
    for stats in &outcome.history {
        let l = stats.loss;
        let _ = writeln!(history, "{},{},{},{}", stats.epoch, l.bc_term, l.swarm_term, l.total);
    }
    let last = outcome.history.last().map(|s| s.loss.total);
    save_model(out, &model(outcome.ensemble), force)?;
    files::write(&history_path, &history, force)?;
    eprintln!(
        "{method} (tau = {tau}, n = {n}) trained for {} epochs, final loss {}",
        outcome.history.len(),
        last.map_or("n/a".into(), |v| format!("{v:.6}"))
    );
    Ok(())
}

pub const EVAL_HEADER: &str = "env,method,dataset_episodes,tau,n,seed,eval_episodes,scaled_return,episode_return,mean_action_difference";
pub const EPISODES_HEADER: &str = "episode,episode_return,scaled_return,mean_action_difference";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn cmd_eval(args: &EvalArgs, seed: u64, out: &Path, force: bool) -> Result<()> {
    if args.episodes == 0 || args.baseline_episodes == 0 {
        return Err(CliError::Usage("--episodes and --baseline-episodes must be at least 1".into()));
    }
    let model = args.model.as_deref().map(load_model).transpose()?;
    let env = match (&args.env, &model) {
        (Some(name), Some(m)) => {
            let env = parse_env(name)?;
            if env != m.env {
                return Err(CliError::Usage(format!(
                    "model was trained on {}, not {}",
                    m.env.name(),
                    env.name()
                )));
            }
            env
        }
        (Some(name), None) => parse_env(name)?,
        (None, Some(m)) => m.env,
        (None, None) => return Err(CliError::Usage("--env is required with --expert".into())),
    };
    let summary_path = out.join("eval.csv");
    if !force && summary_path.exists() {
        return Err(CliError::Exists { path: summary_path });
    }
    let mut store = ResultsStore::open(out)?;
    let baselines = store.baselines(env, args.baseline_episodes, seeds::baseline_seed(seed, env))?;
    let actor = model.as_ref().map_or(Actor::Expert, |m| Actor::Ensemble(&m.ensemble));
    let evaluation = evaluate(env, actor, args.episodes, seeds::hash_seed(&[&seed.to_string(), env.name(), "eval"]), &baselines)?;

    let (method, dataset_episodes, tau, n) = match &model {
        Some(m) => (m.method().name(), m.dataset_episodes.to_string(), m.ensemble.tau().to_string(), m.ensemble.len().to_string()),
        None => ("expert", String::new(), String::new(), String::new()),
    };
    let summary = format!(
        "{EVAL_HEADER}\n{},{method},{dataset_episodes},{tau},{n},{seed},{},{},{},{}\n",
        env.name(),
        args.episodes,
        evaluation.scaled_return,
        evaluation.episode_return,
        opt(evaluation.mean_action_difference)
    );
    let mut episodes = String::from(EPISODES_HEADER);
    episodes.push('\n');
    let action_dim = env.spec().action_dim;
    let trajectory_dir = out.join("trajectories");
    for (k, tr) in evaluation.trajectories.iter().enumerate() {
        let _ = writeln!(
            episodes,
            "{k},{},{},{}",
            tr.episode_return,
            baselines.scale(tr.episode_return)?,
            opt(tr.mean_action_difference())
        );
        files::write(&trajectory_dir.join(format!("episode_{k:03}.csv")), &trajectory_csv(tr, action_dim), force)?;
    }
    files::write(&out.join("episodes.csv"), &episodes, force)?;
    files::write(&summary_path, &summary, force)?;
    println!(
        "{} {method}: scaled return {:.4}, mean action difference {}",
        env.name(),
        evaluation.scaled_return,
        evaluation.mean_action_difference.map_or("n/a".into(), |d| format!("{d:.6}"))
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, cli: &Cli) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set `out` in the config".into()))?;
    let options = SweepOptions {
        workers: cli.workers.unwrap_or(1),
        force: cli.force,
        quiet: args.quiet,
    };
    let outcome = run_sweep(&config, &out, options)?;
    println!(
        "{} cells, {} run, {} failed; results in {}",
        outcome.cells,
        outcome.ran,
        outcome.failed,
        out.display()
    );
    if outcome.failed > 0 {
        return Err(CliError::Numerical(format!(
            "{} cells failed; see the error column of {}",
            outcome.failed,
            out.join(crate::store::RESULTS_FILE).display()
        )));
    }
    Ok(())
}

pub const MODE_DEMO_HEADER: &str = "N,mode_mass";

fn mode_demo(args: &ModeDemoArgs, out: Option<&Path>, force: bool) -> Result<()> {
    let density = BuiltinDensity::from_name(&args.density).ok_or_else(|| {
        let known: Vec<&str> = BuiltinDensity::ALL.iter().map(|d| d.name()).collect();
        CliError::Usage(format!("unknown density '{}' (expected one of {})", args.density, known.join(", ")))
    })?;
    if args.n_list.is_empty() {
        return Err(CliError::Usage("--n-list must not be empty".into()));
    }
    let report = concentration_report(&density.build(), args.tau, &args.n_list)?;
    let mut csv = String::from(MODE_DEMO_HEADER);
    csv.push('\n');
    for (n, mass) in report {
        let _ = writeln!(csv, "{n},{mass}");
    }
    match out {
        Some(path) => files::write(path, &csv, force),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn grad_check(args: &GradCheckArgs, seed: u64) -> Result<()> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let report = check_random_ensembles(args.trials, seed).map_err(|e| CliError::Usage(e.to_string()))?;
    println!(
        "max relative error {:e} over {} trials ({} parameters)",
        report.max_error, report.trials, report.parameters
    );
    if !(report.max_error < GRAD_CHECK_TOLERANCE) {
        return Err(CliError::Numerical(format!(
            "gradient mismatch in trial {}: {:e} >= {GRAD_CHECK_TOLERANCE:e}",
            report.worst_trial, report.max_error
        )));
    }
    Ok(())
}
