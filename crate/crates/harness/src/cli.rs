//! Argument parsing and dispatch for the `blicket` binary.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use blicket_core::agents::QHyperparams;
use blicket_core::config::{preset, presets, EnvSpec, PolicyKind, RunConfig};
use blicket_core::env::RewardMode;
use blicket_core::hypothesis::Family;
use blicket_core::prompts::{Condition, Score};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::commands::{cmd_plan, cmd_prompts_offline, cmd_prompts_online, cmd_run, cmd_train_q};
use crate::error::{HarnessError, Result};
use crate::llm::{EndpointConfig, LlmClient};
use crate::server::{bind, serve, AppState};

#[derive(Debug, Parser)]
#[command(name = "blicket", version, about = "Blicket-detector benchmark runs, planning, prompts and play service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a policy and write metrics plus a trajectory dataset.
    Run(RunArgs),
    /// Train a tabular Q-learner and save the table.
    TrainQ(TrainArgs),
    /// Solve for the minimum-expected-checks identification tree.
    Plan(PlanArgs),
    /// Render language-model prompts and score replies.
    Prompts(PromptArgs),
    /// Start the HTTP session service.
    Serve(ServeArgs),
    /// List the named environment presets.
    Presets,
}

#[derive(Debug, Args)]
pub struct EnvArgs {
    /// JSON run configuration; other flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named environment preset (see `blicket presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Hypothesis family: default or extended.
    #[arg(long)]
    pub space: Option<String>,
    /// blicket or modality.
    #[arg(long)]
    pub reward_mode: Option<String>,
    #[arg(long)]
    pub forced_explore: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// random, random-k, q, bayes-greedy or bayes-minstep.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Training budget in episodes.
    #[arg(long, default_value_t = 10_000)]
    pub episodes: usize,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub discount: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, default_value = "default")]
    pub space: String,
    #[arg(long, default_value_t = 3)]
    pub n_objects: usize,
    /// Comma-separated weights, one per hypothesis in canonical order.
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    /// Comma-separated condition names such as `freeform_given_disjunctive`;
    /// all eight by default.
    #[arg(long)]
    pub conditions: Option<String>,
    /// Query an endpoint instead of scoring the recorded replies.
    #[arg(long)]
    pub online: bool,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub attempts: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// JSON-lines file that completed sessions are appended to.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

fn parse_word<T: DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| HarnessError::Config(format!("unknown {what} '{s}'")))
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    Ok(RunConfig::from_json(&text)?)
}

/// Config file (if any) with command-line overrides applied.
pub fn resolve(env: &EnvArgs, policy: Option<&str>, episodes: Option<usize>, default_policy: Option<PolicyKind>) -> Result<RunConfig> {
    let policy = policy.map(str::parse::<PolicyKind>).transpose()?;
    let mut config = match &env.config {
        Some(path) => load_config(path)?,
        None => RunConfig {
            env: EnvSpec::default(),
            policy: policy.or(default_policy).ok_or_else(|| {
                HarnessError::Config("--policy is required without --config".into())
            })?,
            episodes: 100,
            seed: 0,
            out: None,
        },
    };
    if let Some(p) = policy {
        config.policy = p;
    }
    if let Some(name) = &env.preset {
        config.env = preset(name)
            .ok_or_else(|| HarnessError::Config(format!("unknown preset '{name}'")))?
            .env;
    }
    if let Some(space) = &env.space {
        config.env.space = parse_word::<Family>("space", space)?;
    }
    if let Some(mode) = &env.reward_mode {
        config.env.reward_mode = parse_word::<RewardMode>("reward mode", mode)?;
    }
    if let Some(k) = env.forced_explore {
        config.env.forced_explore_k = k;
    }
    if let Some(seed) = env.seed {
        config.seed = seed;
    }
    if let Some(n) = episodes {
        config.episodes = n;
    }
    config.out = Some(env.out.clone());
    Ok(config)
}

fn parse_prior(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("bad prior weight '{w}'")))
        })
        .collect()
}

fn parse_conditions(text: Option<&str>) -> Result<Vec<Condition>> {
    match text {
        None => Ok(Condition::all()),
        Some(list) => list
            .split(',')
            .map(|c| c.trim().parse::<Condition>().map_err(|e| HarnessError::Config(e.to_string())))
            .collect(),
    }
}

fn score_line(condition: &Condition, model: Option<&str>, score: &Score) -> String {
    format!(
        "{:<32} {:<6} correct {} wrong {} structure {:?}",
        condition.slug(),
        model.unwrap_or("-"),
        score.n_correct,
        score.n_wrong,
        score.structure
    )
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = resolve(&args.env, args.policy.as_deref(), args.episodes, None)?;
            let eval = cmd_run(&config, &args.env.out)?;
            for row in eval.rows.iter().chain(std::iter::once(&eval.pooled)) {
                println!(
                    "{} {}: mean reward {:.3} (sd {:.3}), FCA {:.3}, {} episodes",
                    row.config, row.policy, row.mean_reward, row.std_reward, row.fca, row.n_episodes
                );
            }
            println!("wrote {}", args.env.out.display());
        }
        Command::TrainQ(args) => {
            let config = resolve(&args.env, None, None, Some(PolicyKind::Q))?;
            let defaults = QHyperparams::default();
            let hyper = QHyperparams {
                epsilon: args.epsilon.unwrap_or(defaults.epsilon),
                learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
                discount: args.discount.unwrap_or(defaults.discount),
                convergence_window: args.window.unwrap_or(defaults.convergence_window),
            };
            let saved = cmd_train_q(&config, &hyper, args.episodes, &args.env.out)?;
            println!("{}", serde_json::to_string_pretty(&saved.stats)?);
        }
        Command::Plan(args) => {
            let family = parse_word::<Family>("space", &args.space)?;
            let prior = args.prior.as_deref().map(parse_prior).transpose()?;
            let plan = cmd_plan(family, args.n_objects, prior.as_deref(), &args.out)?;
            println!("expected checks: {}", plan.value);
            println!("leaves: {}, depth: {}", plan.tree.leaves(), plan.tree.depth());
        }
        Command::Prompts(args) => {
            let conditions = parse_conditions(args.conditions.as_deref())?;
            if args.online {
                let base_url = args
                    .base_url
                    .ok_or_else(|| HarnessError::Config("--online needs --base-url".into()))?;
                let mut endpoint = EndpointConfig::new(base_url, args.model.unwrap_or_else(|| "default".into()));
                if let Some(t) = args.temperature {
                    endpoint.temperature = t;
                }
                if let Some(m) = args.max_tokens {
                    endpoint.max_tokens = m;
                }
                if let Some(a) = args.attempts {
                    endpoint.attempts = a;
                }
                let client = LlmClient::from_env(endpoint)?;
                let records = runtime()?.block_on(cmd_prompts_online(&client, &conditions, &args.out))?;
                for r in &records {
                    println!("{}", score_line(&r.record.condition, r.record.model.as_deref(), &r.record.score));
                }
            } else {
                for r in cmd_prompts_offline(&conditions, &args.out)? {
                    println!("{}", score_line(&r.condition, r.model.as_deref(), &r.score));
                }
            }
        }
        Command::Serve(args) => {
            let rt = runtime()?;
            rt.block_on(async {
                let listener = bind(args.addr).await?;
                println!("listening on http://{}", listener.local_addr()?);
                serve(listener, AppState::new(args.store)).await
            })?;
        }
        Command::Presets => {
            for p in presets() {
                println!("{:<10} {}", p.name, p.description);
            }
        }
    }
    Ok(())
}
