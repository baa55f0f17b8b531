use serde::{Deserialize, Serialize};

use super::Policy;
use crate::belief::Belief;
use crate::env::{Action, Observation};
use crate::error::{Error, Result};
use crate::hypothesis::{Form, ObjectSet};
use crate::planner::{min_expected_steps, PolicyTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BayesMode {
    /// One-step information gain.
    Greedy,
    /// Follows the expectimax tree.
    MinStep,
}

/// Exact posterior agent. Checks until one hypothesis remains, requests the
/// quiz with an empty placement, then answers from the posterior.
#[derive(Debug, Clone)]
pub struct BayesAgent {
    prior: Belief,
    belief: Belief,
    mode: BayesMode,
    tree: Option<PolicyTree>,
    path: Vec<bool>,
    pending: Option<ObjectSet>,
}

impl BayesAgent {
    pub fn new(prior: Belief, mode: BayesMode) -> Result<Self> {
        let tree = match mode {
            BayesMode::Greedy => None,
            BayesMode::MinStep => Some(min_expected_steps(&prior)?.tree),
        };
        Ok(BayesAgent {
            belief: prior.clone(),
            prior,
            mode,
            tree,
            path: Vec::new(),
            pending: None,
        })
    }

    pub fn greedy(prior: Belief) -> Self {
        BayesAgent::new(prior, BayesMode::Greedy).expect("greedy construction is infallible")
    }

    pub fn min_step(prior: Belief) -> Result<Self> {
        BayesAgent::new(prior, BayesMode::MinStep)
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    fn next_check(&self) -> Result<ObjectSet> {
        match &self.tree {
            None => self.belief.greedy_policy(),
            Some(tree) => {
                let mut node = tree;
                for &lit in &self.path {
                    node = node.child(lit).ok_or(Error::NothingToLearn)?;
                }
                match node {
                    PolicyTree::Internal { check, .. } => Ok(*check),
                    PolicyTree::Terminal { .. } => Err(Error::NothingToLearn),
                }
            }
        }
    }
}

impl Policy for BayesAgent {
    fn name(&self) -> String {
        match self.mode {
            BayesMode::Greedy => "bayes-greedy".into(),
            BayesMode::MinStep => "bayes-minstep".into(),
        }
    }

    fn reset(&mut self, _n_objects: usize, _seed: u64) {
        self.belief = self.prior.clone();
        self.path.clear();
        self.pending = None;
    }

    fn act(&mut self, history: &[Observation]) -> Result<Action> {
        let obs = history
            .last()
            .ok_or_else(|| Error::InvalidInput("empty observation history".into()))?;
        let n = obs.n_objects;
        if let Some(placed) = self.pending.take() {
            if obs.placed == placed {
                self.belief = self.belief.update(placed, obs.lit)?;
                self.path.push(obs.lit);
            }
        }
        if obs.quiz {
            let answers = self.belief.map_quiz_answers();
            let yes = match obs.query {
                Some(id) => answers.blickets[id.0],
                None => answers.modality == Form::Conjunctive,
            };
            return Ok(Action::answer(n, yes));
        }
        if self.belief.support_len() <= 1 {
            return Ok(Action::enter_quiz(n, ObjectSet::EMPTY));
        }
        let check = self.next_check()?;
        self.pending = Some(check);
        Ok(Action::check(n, check))
    }

    fn modality_guess(&self) -> Option<Form> {
        Some(self.belief.map_quiz_answers().modality)
    }
}
