//! Exact posterior over a hypothesis space.
//!
//! Detector likelihoods are deterministic, so Bayes' rule reduces to zeroing
//! the hypotheses that disagree with an observation and renormalizing.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypothesis::{Evidence, Form, Hypothesis, HypothesisSpace, ObjectId, ObjectSet};

/// Slack used when comparing probabilities and information values.
pub const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    space: Arc<HypothesisSpace>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorEntry {
    pub hypothesis: Hypothesis,
    pub label: String,
    pub weight: f64,
}

/// Quiz responses implied by a belief.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuizAnswers {
    pub blickets: Vec<bool>,
    pub modality: Form,
}

impl Belief {
    pub fn uniform(space: Arc<HypothesisSpace>) -> Self {
        let n = space.len();
        Belief {
            weights: vec![1.0 / n as f64; n],
            space,
        }
    }

    /// Normalizes `prior`; it must be nonnegative with positive total.
    pub fn from_prior(space: Arc<HypothesisSpace>, prior: &[f64]) -> Result<Self> {
        if prior.len() != space.len() {
            return Err(Error::InvalidConfig(format!(
                "prior has {} weights for a space of {}",
                prior.len(),
                space.len()
            )));
        }
        if prior.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("prior weights must be finite and nonnegative".into()));
        }
        let total: f64 = prior.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidConfig("prior weights sum to zero".into()));
        }
        Ok(Belief {
            weights: prior.iter().map(|w| w / total).collect(),
            space,
        })
    }

    pub fn space(&self) -> &Arc<HypothesisSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    pub fn support_len(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }

    /// Index of the identified hypothesis once the support is a singleton.
    pub fn identified(&self) -> Option<usize> {
        let support = self.support();
        (support.len() == 1).then(|| support[0])
    }

    /// Probability that the detector lights for `placed`.
    pub fn prob_lit(&self, placed: ObjectSet) -> f64 {
        self.space
            .hypotheses()
            .iter()
            .zip(&self.weights)
            .filter(|(h, _)| h.lights(placed))
            .map(|(_, w)| w)
            .sum()
    }

    pub fn update(&self, placed: ObjectSet, lit: bool) -> Result<Belief> {
        let mut weights: Vec<f64> = self
            .space
            .hypotheses()
            .iter()
            .zip(&self.weights)
            .map(|(h, w)| if h.lights(placed) == lit { *w } else { 0.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Contradiction);
        }
        // Uninformative evidence leaves the weights bit-identical.
        if weights == self.weights {
            return Ok(self.clone());
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Belief {
            space: Arc::clone(&self.space),
            weights,
        })
    }

    pub fn update_all(&self, evidence: &Evidence) -> Result<Belief> {
        evidence
            .trials
            .iter()
            .try_fold(self.clone(), |b, t| b.update(t.placed, t.lit))
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.weights)
    }

    /// Expected entropy reduction from checking `placed`.
    pub fn info_gain(&self, placed: ObjectSet) -> f64 {
        let mut lit = Vec::new();
        let mut dark = Vec::new();
        for (h, &w) in self.space.hypotheses().iter().zip(&self.weights) {
            if w > 0.0 {
                if h.lights(placed) {
                    lit.push(w);
                } else {
                    dark.push(w);
                }
            }
        }
        let p_lit: f64 = lit.iter().sum();
        let p_dark: f64 = dark.iter().sum();
        let conditional = |branch: &[f64], p: f64| {
            if p > 0.0 {
                let normalized: Vec<f64> = branch.iter().map(|w| w / p).collect();
                p * entropy_of(&normalized)
            } else {
                0.0
            }
        };
        let gain = self.entropy() - conditional(&lit, p_lit) - conditional(&dark, p_dark);
        gain.max(0.0)
    }

    /// Placement with the largest information gain. Ties go to the smaller
    /// subset, then to the lexicographically first one.
    pub fn greedy_policy(&self) -> Result<ObjectSet> {
        if self.support_len() < 2 {
            return Err(Error::NothingToLearn);
        }
        let mut best = (ObjectSet::EMPTY, 0.0);
        for s in ObjectSet::all_canonical(self.space.n_objects()) {
            let g = self.info_gain(s);
            if g > best.1 + TOLERANCE {
                best = (s, g);
            }
        }
        if best.1 <= TOLERANCE {
            return Err(Error::InvalidInput(
                "no placement separates the remaining hypotheses".into(),
            ));
        }
        Ok(best.0)
    }

    /// An object is answered "yes" when its posterior blicket mass exceeds
    /// one half; the modality is the form with more mass (ties: disjunctive).
    pub fn map_quiz_answers(&self) -> QuizAnswers {
        let hyps = self.space.hypotheses();
        let blickets = (0..self.space.n_objects())
            .map(|i| {
                let mass: f64 = hyps
                    .iter()
                    .zip(&self.weights)
                    .filter(|(h, _)| h.is_blicket(ObjectId(i)))
                    .map(|(_, w)| w)
                    .sum();
                mass > 0.5 + TOLERANCE
            })
            .collect();
        let conj: f64 = hyps
            .iter()
            .zip(&self.weights)
            .filter(|(h, _)| h.form() == Form::Conjunctive)
            .map(|(_, w)| w)
            .sum();
        let modality = if conj > 1.0 - conj + TOLERANCE {
            Form::Conjunctive
        } else {
            Form::Disjunctive
        };
        QuizAnswers { blickets, modality }
    }

    pub fn posterior(&self) -> Vec<PosteriorEntry> {
        self.space
            .hypotheses()
            .iter()
            .zip(&self.weights)
            .map(|(h, w)| PosteriorEntry {
                hypothesis: *h,
                label: h.to_string(),
                weight: *w,
            })
            .collect()
    }
}

fn entropy_of(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| -w * w.log2())
        .sum()
}
