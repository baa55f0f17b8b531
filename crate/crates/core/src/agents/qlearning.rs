//! Tabular Q-learning over full observation histories.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Policy;
use crate::env::{Action, BlicketEnv, EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::hypothesis::Hypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QHyperparams {
    pub epsilon: f64,
    pub learning_rate: f64,
    pub discount: f64,
    /// Consecutive perfect greedy evaluations required to call training converged.
    pub convergence_window: usize,
}

impl Default for QHyperparams {
    fn default() -> Self {
        QHyperparams {
            epsilon: 0.1,
            learning_rate: 0.95,
            discount: 0.99,
            convergence_window: 500,
        }
    }
}

impl QHyperparams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.epsilon) || !unit(self.learning_rate) || !unit(self.discount) {
            return Err(Error::InvalidConfig(
                "epsilon, learning rate and discount must lie in [0, 1]".into(),
            ));
        }
        if self.convergence_window == 0 {
            return Err(Error::InvalidConfig("convergence window must be positive".into()));
        }
        Ok(())
    }
}

/// Observation bit strings of the whole history joined by `/`.
pub fn state_key(history: &[Observation]) -> String {
    history
        .iter()
        .map(Observation::bit_string)
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub n_objects: usize,
    pub values: BTreeMap<String, Vec<f64>>,
}

impl QTable {
    pub fn new(n_objects: usize) -> Self {
        QTable {
            n_objects,
            values: BTreeMap::new(),
        }
    }

    pub fn n_actions(&self) -> usize {
        1 << (self.n_objects + 1)
    }

    pub fn get(&self, key: &str, action: u32) -> f64 {
        self.values.get(key).map_or(0.0, |v| v[action as usize])
    }

    /// Highest-valued action encoding; ties and unseen states go to the
    /// lowest encoding.
    pub fn argmax(&self, key: &str) -> u32 {
        let Some(row) = self.values.get(key) else {
            return 0;
        };
        let mut best = 0;
        for (a, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = a;
            }
        }
        best as u32
    }

    pub fn max_value(&self, key: &str) -> f64 {
        self.values
            .get(key)
            .map_or(0.0, |row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Epsilon-greedy selection.
pub fn q_select<R: Rng>(table: &QTable, key: &str, epsilon: f64, rng: &mut R) -> Action {
    let code = if rng.random_bool(epsilon) {
        rng.random_range(0..table.n_actions() as u32)
    } else {
        table.argmax(key)
    };
    Action::from_encoding(code, table.n_objects).expect("encoding is within range")
}

/// One-step update toward `reward + discount * max Q(next)`, with no
/// bootstrap from terminal states.
pub fn q_update(
    table: &mut QTable,
    key: &str,
    action: u32,
    reward: f64,
    next_key: &str,
    terminal: bool,
    hyper: &QHyperparams,
) {
    let future = if terminal { 0.0 } else { table.max_value(next_key) };
    let n_actions = table.n_actions();
    let row = table
        .values
        .entry(key.to_string())
        .or_insert_with(|| vec![0.0; n_actions]);
    let q = &mut row[action as usize];
    *q += hyper.learning_rate * (reward + hyper.discount * future - *q);
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub converged: bool,
    /// First episode (1-based) of the run of perfect greedy evaluations.
    pub episodes_to_convergence: Option<usize>,
    /// Environment steps taken up to the end of that episode.
    pub steps_to_convergence: Option<usize>,
    pub updates_to_convergence: Option<usize>,
    pub episodes_run: usize,
    pub total_steps: usize,
    pub total_updates: usize,
    pub states: usize,
}

fn greedy_return(table: &QTable, env: &BlicketEnv, hidden: Hypothesis) -> Result<f64> {
    let (mut state, obs) = env.start(hidden);
    let mut history = vec![obs];
    while !state.is_done() {
        let action = Action::from_encoding(table.argmax(&state_key(&history)), table.n_objects)?;
        history.push(env.step(&mut state, &action)?.observation);
    }
    Ok(state.accumulated_reward())
}

/// Trains a table on `config`. After every episode the greedy policy is run
/// once against each hypothesis the sampler can draw; training stops once it
/// earns the maximum reward on all of them for `convergence_window`
/// consecutive episodes.
pub fn train_q(
    config: &EnvConfig,
    hyper: &QHyperparams,
    max_episodes: usize,
    seed: u64,
) -> Result<(QTable, TrainStats)> {
    hyper.validate()?;
    let env = BlicketEnv::new(config.clone())?;
    let support: Vec<Hypothesis> = config.sampler.support().copied().collect();
    let max_reward = config.max_reward();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = QTable::new(config.n_objects());
    let mut stats = TrainStats::default();
    let mut streak = 0;
    let mut run_start = (0, 0);
    for episode in 1..=max_episodes {
        let (mut state, obs) = env.reset(rng.random());
        let mut history = vec![obs];
        let mut key = state_key(&history);
        while !state.is_done() {
            let action = q_select(&table, &key, hyper.epsilon, &mut rng);
            let out = env.step(&mut state, &action)?;
            history.push(out.observation);
            let next_key = state_key(&history);
            q_update(&mut table, &key, action.encoding(), out.reward, &next_key, out.done, hyper);
            stats.total_steps += 1;
            stats.total_updates += 1;
            key = next_key;
        }
        stats.episodes_run = episode;

        let mut perfect = true;
        for h in &support {
            if greedy_return(&table, &env, *h)? < max_reward {
                perfect = false;
                break;
            }
        }
        if perfect {
            if streak == 0 {
                run_start = (episode, stats.total_steps);
            }
            streak += 1;
            if streak >= hyper.convergence_window {
                stats.converged = true;
                stats.episodes_to_convergence = Some(run_start.0);
                stats.steps_to_convergence = Some(run_start.1);
                stats.updates_to_convergence = Some(run_start.1);
                break;
            }
        } else {
            streak = 0;
        }
    }
    stats.states = table.len();
    Ok((table, stats))
}

/// Acts greedily from a trained table.
#[derive(Debug, Clone)]
pub struct GreedyQPolicy {
    table: QTable,
}

impl GreedyQPolicy {
    pub fn new(table: QTable) -> Self {
        GreedyQPolicy { table }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }
}

impl Policy for GreedyQPolicy {
    fn name(&self) -> String {
        "q".into()
    }

    fn reset(&mut self, _n_objects: usize, _seed: u64) {}

    fn act(&mut self, history: &[Observation]) -> Result<Action> {
        Action::from_encoding(self.table.argmax(&state_key(history)), self.table.n_objects)
    }
}
