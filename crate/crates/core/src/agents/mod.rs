//! Policies, episode rollouts and evaluation.

mod bayes;
mod qlearning;
mod random;

use std::io::Write;

use serde::Serialize;

use crate::env::{Action, BlicketEnv, Observation};
use crate::error::{Error, Result};
use crate::hypothesis::Form;
use crate::trajectory::{Trajectory, TrajectoryHeader};

pub use bayes::{BayesAgent, BayesMode};
pub use qlearning::{
    q_select, q_update, state_key, train_q, GreedyQPolicy, QHyperparams, QTable, TrainStats,
};
pub use random::RandomPolicy;

/// Anything that picks actions from the observation history.
pub trait Policy {
    fn name(&self) -> String;

    /// Called before each episode.
    fn reset(&mut self, n_objects: usize, seed: u64);

    /// `history` starts with the initial observation and grows by one per step.
    fn act(&mut self, history: &[Observation]) -> Result<Action>;

    fn notify(&mut self, _reward: f64) {}

    /// Explicit conjunctive/disjunctive judgment, if the policy forms one.
    fn modality_guess(&self) -> Option<Form> {
        None
    }
}

/// Seed handed to the policy, decorrelated from the one that draws the
/// hidden hypothesis.
pub fn policy_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Plays one episode. A policy error or a malformed action aborts the
/// episode with the step at which it happened.
pub fn run_episode(env: &BlicketEnv, policy: &mut dyn Policy, seed: u64) -> Result<Trajectory> {
    let (state, obs) = env.reset(seed);
    play(env, policy, seed, state, obs)
}

fn play(
    env: &BlicketEnv,
    policy: &mut dyn Policy,
    seed: u64,
    mut state: crate::env::EpisodeState,
    obs: Observation,
) -> Result<Trajectory> {
    let config = env.config();
    let episode_id = format!("{}-{seed}", config.digest());
    let mut traj = Trajectory::new(TrajectoryHeader::new(episode_id, *state.hidden(), config, seed));
    policy.reset(env.n_objects(), policy_seed(seed));
    let mut history = vec![obs];
    while !state.is_done() {
        let step = state.step();
        let abort = |e: Error| Error::EpisodeAborted {
            step,
            source: Box::new(e),
        };
        let action = policy.act(&history).map_err(abort)?;
        let phase = state.phase();
        let outcome = env.step(&mut state, &action).map_err(abort)?;
        traj.record(phase, &action, &outcome);
        policy.notify(outcome.reward);
        history.push(outcome.observation);
    }
    Ok(traj)
}

/// Plays one episode against a chosen hidden hypothesis.
pub fn run_episode_with(
    env: &BlicketEnv,
    policy: &mut dyn Policy,
    hidden: crate::hypothesis::Hypothesis,
    seed: u64,
) -> Result<Trajectory> {
    let (state, obs) = env.start(hidden);
    play(env, policy, seed, state, obs)
}

/// Summary statistics for one configuration, or pooled over several.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub config: String,
    pub policy: String,
    pub mean_reward: f64,
    /// Population standard deviation of episode returns.
    pub std_reward: f64,
    /// Fraction of episodes whose conjunctive/disjunctive judgment matched.
    pub fca: f64,
    pub n_episodes: usize,
    #[serde(skip_serializing)]
    pub mean_exploration_steps: f64,
}

/// Running sums; merging is associative so rows pool exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
    pub form_correct: usize,
    pub exploration: usize,
}

impl Accumulator {
    pub fn add(&mut self, reward: f64, form_correct: bool, exploration: usize) {
        self.n += 1;
        self.sum += reward;
        self.sum_sq += reward * reward;
        self.form_correct += usize::from(form_correct);
        self.exploration += exploration;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.form_correct += other.form_correct;
        self.exploration += other.exploration;
    }

    pub fn row(&self, config: &str, policy: &str) -> EvalRow {
        let n = self.n.max(1) as f64;
        let mean = self.sum / n;
        EvalRow {
            config: config.to_string(),
            policy: policy.to_string(),
            mean_reward: mean,
            std_reward: (self.sum_sq / n - mean * mean).max(0.0).sqrt(),
            fca: self.form_correct as f64 / n,
            n_episodes: self.n,
            mean_exploration_steps: self.exploration as f64 / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub rows: Vec<EvalRow>,
    pub pooled: EvalRow,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

impl Evaluation {
    /// Writes per-config rows followed by the pooled row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows.iter().chain(std::iter::once(&self.pooled)) {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The judgment credited to an episode: the policy's own if it has one,
/// otherwise whatever its quiz answers imply.
pub fn judged_form(policy: &dyn Policy, traj: &Trajectory) -> Option<Form> {
    match traj.header.reward_mode {
        crate::env::RewardMode::Modality => traj.implied_modality(),
        crate::env::RewardMode::Blicket => policy.modality_guess().or_else(|| traj.implied_modality()),
    }
}

/// Runs `n_episodes` per environment with seeds `config.seed + i`.
pub fn evaluate(
    policy: &mut dyn Policy,
    envs: &[(String, BlicketEnv)],
    n_episodes: usize,
) -> Result<Evaluation> {
    if envs.is_empty() {
        return Err(Error::InvalidInput("no environments to evaluate".into()));
    }
    let name = policy.name();
    let mut rows = Vec::new();
    let mut pooled = Accumulator::default();
    let mut trajectories = Vec::new();
    for (label, env) in envs {
        let mut acc = Accumulator::default();
        for i in 0..n_episodes {
            let seed = env.config().seed.wrapping_add(i as u64);
            let traj = run_episode(env, policy, seed)?;
            let correct = judged_form(policy, &traj) == Some(traj.header.hidden_hypothesis.form());
            acc.add(traj.total_reward(), correct, traj.exploration_steps());
            trajectories.push(traj);
        }
        pooled.merge(&acc);
        rows.push(acc.row(label, &name));
    }
    Ok(Evaluation {
        rows,
        pooled: pooled.row("pooled", &name),
        trajectories,
    })
}
