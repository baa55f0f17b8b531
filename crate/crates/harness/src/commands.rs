//! Batch commands behind the CLI. Every file they write embeds the digest of
//! the configuration that produced it, and nothing depends on wall-clock time,
//! so equal configs and seeds give identical outputs.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use blicket_core::agents::{
    evaluate, train_q, BayesAgent, BayesMode, Evaluation, GreedyQPolicy, Policy, QHyperparams,
    QTable, RandomPolicy, TrainStats,
};
use blicket_core::belief::Belief;
use blicket_core::config::{digest, PolicyKind, RunConfig};
use blicket_core::env::{BlicketEnv, EnvConfig};
use blicket_core::hypothesis::{enumerate_space, Family};
use blicket_core::planner::{min_expected_steps, Plan};
use blicket_core::prompts::{
    evaluate_reply, recorded_replies, render_prompt, Condition, PromptRecord,
    DEFAULT_SENTENCE_LIMIT,
};
use blicket_core::trajectory::export_dataset;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::llm::LlmClient;

/// Episodes of Q-learning run before a `q` policy is evaluated.
pub const Q_TRAINING_EPISODES: usize = 10_000;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// The sampler's distribution spread over the whole space, so a Bayes agent
/// starts from exactly the prior the environment draws from.
pub fn sampler_prior(config: &EnvConfig) -> Result<Belief> {
    let space = Arc::new(config.space.clone());
    let mut weights = vec![0.0; space.len()];
    for (h, w) in config.sampler.hypotheses.iter().zip(&config.sampler.weights) {
        let i = space
            .index_of(h)
            .ok_or_else(|| HarnessError::Config(format!("{h} is not in the space")))?;
        weights[i] += w;
    }
    Ok(Belief::from_prior(space, &weights)?)
}

fn build_policy(kind: PolicyKind, config: &EnvConfig, seed: u64) -> Result<Box<dyn Policy>> {
    let n = config.n_objects();
    Ok(match kind {
        PolicyKind::Random => Box::new(RandomPolicy::new(n, seed)),
        PolicyKind::RandomK => {
            if config.forced_explore_k == 0 {
                return Err(HarnessError::Config(
                    "policy random-k needs forced_explore_k > 0".into(),
                ));
            }
            Box::new(RandomPolicy::new(n, seed))
        }
        PolicyKind::Q => {
            let (table, _) = train_q(config, &QHyperparams::default(), Q_TRAINING_EPISODES, seed)?;
            Box::new(GreedyQPolicy::new(table))
        }
        PolicyKind::BayesGreedy => Box::new(BayesAgent::new(sampler_prior(config)?, BayesMode::Greedy)?),
        PolicyKind::BayesMinstep => Box::new(BayesAgent::new(sampler_prior(config)?, BayesMode::MinStep)?),
    })
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    digest: String,
    config: &'a RunConfig,
    evaluation: &'a Evaluation,
}

/// Evaluates the configured policy and writes `metrics.csv`, `run.json` and
/// a trajectory dataset into `out`.
pub fn cmd_run(config: &RunConfig, out: &Path) -> Result<Evaluation> {
    if config.episodes == 0 {
        return Err(HarnessError::Config("episodes must be positive".into()));
    }
    let env_config = config.env.build(config.seed)?;
    let mut policy = build_policy(config.policy, &env_config, config.seed)?;
    let env = BlicketEnv::new(env_config)?;
    let eval = evaluate(policy.as_mut(), &[(config.digest(), env)], config.episodes)?;
    fs::create_dir_all(out)?;
    eval.write_csv(fs::File::create(out.join("metrics.csv"))?)?;
    write_json(
        &out.join("run.json"),
        &RunSummary {
            digest: config.digest(),
            config,
            evaluation: &eval,
        },
    )?;
    export_dataset(&eval.trajectories, out)?;
    Ok(eval)
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct SavedTable {
    pub digest: String,
    pub hyperparams: QHyperparams,
    pub stats: TrainStats,
    pub table: QTable,
}

/// Trains a Q-table and saves it as `q_table.json`.
pub fn cmd_train_q(
    config: &RunConfig,
    hyper: &QHyperparams,
    max_episodes: usize,
    out: &Path,
) -> Result<SavedTable> {
    let env_config = config.env.build(config.seed)?;
    let (table, stats) = train_q(&env_config, hyper, max_episodes, config.seed)?;
    let saved = SavedTable {
        digest: config.digest(),
        hyperparams: *hyper,
        stats,
        table,
    };
    fs::create_dir_all(out)?;
    write_json(&out.join("q_table.json"), &saved)?;
    Ok(saved)
}

pub fn load_table(path: &Path) -> Result<SavedTable> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Serialize)]
struct SavedPlan<'a> {
    digest: String,
    family: Family,
    n_objects: usize,
    prior: &'a [f64],
    value: f64,
    tree: &'a blicket_core::planner::PolicyTree,
}

/// Solves for the minimum-expected-checks tree and writes `plan.txt` and
/// `plan.json`.
pub fn cmd_plan(family: Family, n_objects: usize, prior: Option<&[f64]>, out: &Path) -> Result<Plan> {
    let space = Arc::new(enumerate_space(n_objects, family)?);
    let belief = match prior {
        Some(w) => Belief::from_prior(Arc::clone(&space), w)?,
        None => Belief::uniform(Arc::clone(&space)),
    };
    let plan = min_expected_steps(&belief)?;
    let weights = belief.weights().to_vec();
    let saved = SavedPlan {
        digest: digest(&(family, n_objects, &weights)),
        family,
        n_objects,
        prior: &weights,
        value: plan.value,
        tree: &plan.tree,
    };
    fs::create_dir_all(out)?;
    fs::write(
        out.join("plan.txt"),
        format!(
            "# digest {}\n# expected checks {}\n{}",
            saved.digest,
            plan.value,
            plan.tree.to_text(&space)
        ),
    )?;
    write_json(&out.join("plan.json"), &saved)?;
    Ok(plan)
}

fn write_prompt_outputs<T: Serialize>(records: &[T], conditions: &[Condition], out: &Path) -> Result<()> {
    let prompts = out.join("prompts");
    fs::create_dir_all(&prompts)?;
    for c in conditions {
        fs::write(prompts.join(format!("{}.txt", c.slug())), render_prompt(*c).text)?;
    }
    let mut log = String::new();
    for r in records {
        log.push_str(&serde_json::to_string(r)?);
        log.push('\n');
    }
    fs::write(out.join("prompt_scores.jsonl"), log)?;
    Ok(())
}

/// Renders `conditions` and scores the recorded replies for them.
pub fn cmd_prompts_offline(conditions: &[Condition], out: &Path) -> Result<Vec<PromptRecord>> {
    let records: Vec<PromptRecord> = recorded_replies()
        .into_iter()
        .filter(|r| conditions.contains(&r.condition))
        .map(|r| PromptRecord {
            model: Some(format!("{:?}", r.model).to_lowercase()),
            ..evaluate_reply(r.condition, r.text, DEFAULT_SENTENCE_LIMIT)
        })
        .collect();
    write_prompt_outputs(&records, conditions, out)?;
    Ok(records)
}

/// A scored reply plus the decoding parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct OnlineRecord {
    #[serde(flatten)]
    pub record: PromptRecord,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// Queries the endpoint once per condition, one request at a time.
pub async fn cmd_prompts_online(
    client: &LlmClient,
    conditions: &[Condition],
    out: &Path,
) -> Result<Vec<OnlineRecord>> {
    let config = client.config();
    let mut records = Vec::new();
    for c in conditions {
        let reply = client.complete(&render_prompt(*c).text).await?;
        records.push(OnlineRecord {
            record: PromptRecord {
                model: Some(config.model_name.clone()),
                ..evaluate_reply(*c, &reply, DEFAULT_SENTENCE_LIMIT)
            },
            temperature: config.temperature,
            max_tokens: config.max_tokens,
        });
    }
    write_prompt_outputs(&records, conditions, out)?;
    Ok(records)
}
