//! Run configuration files, digests and named presets.
//!
//! Configs are JSON. The digest of a value is the SHA-256 of its compact
//! `serde_json` serialization (struct fields in declaration order), truncated
//! to 16 hex characters; it is stamped into every output file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{EnvConfig, RewardMode, Sampler, DEFAULT_MAX_STEPS};
use crate::error::{Error, Result};
use crate::hypothesis::{enumerate_space, split_space, Family, Hypothesis, SplitSpec};

pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types always serialize");
    let mut hex = hex::encode(Sha256::digest(&bytes));
    hex.truncate(16);
    hex
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSide {
    #[default]
    Train,
    Test,
}

/// Human-writable environment description; [`EnvSpec::build`] turns it into
/// a validated [`EnvConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    #[serde(default = "default_family")]
    pub space: Family,
    #[serde(default = "default_objects")]
    pub n_objects: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    #[serde(default)]
    pub split_side: SplitSide,
    /// Pin the hidden hypothesis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<Hypothesis>,
    /// Sampling weights, one per sampled hypothesis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub forced_explore_k: usize,
    #[serde(default)]
    pub reward_mode: RewardMode,
}

fn default_family() -> Family {
    Family::Default
}

fn default_objects() -> usize {
    3
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

impl Default for EnvSpec {
    fn default() -> Self {
        EnvSpec {
            space: Family::Default,
            n_objects: 3,
            split: None,
            split_side: SplitSide::Train,
            hypothesis: None,
            prior: None,
            max_steps: DEFAULT_MAX_STEPS,
            forced_explore_k: 0,
            reward_mode: RewardMode::Blicket,
        }
    }
}

impl EnvSpec {
    pub fn family(space: Family) -> Self {
        EnvSpec {
            space,
            ..EnvSpec::default()
        }
    }

    pub fn build(&self, seed: u64) -> Result<EnvConfig> {
        let space = enumerate_space(self.n_objects, self.space)?;
        let candidates = match (&self.hypothesis, &self.split) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "a pinned hypothesis and a split are mutually exclusive".into(),
                ))
            }
            (Some(h), None) => vec![*h],
            (None, Some(split)) => {
                let parts = split_space(&space, split)?;
                match self.split_side {
                    SplitSide::Train => parts.train,
                    SplitSide::Test => parts.test,
                }
            }
            (None, None) => space.hypotheses().to_vec(),
        };
        let sampler = match &self.prior {
            Some(w) => Sampler {
                hypotheses: candidates,
                weights: w.clone(),
            },
            None => Sampler::uniform(candidates),
        };
        let config = EnvConfig::new(space)
            .with_sampler(sampler)
            .with_max_steps(self.max_steps)
            .with_forced_explore(self.forced_explore_k)
            .with_reward_mode(self.reward_mode)
            .with_seed(seed);
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Random,
    /// Random actions under forced exploration.
    RandomK,
    Q,
    BayesGreedy,
    BayesMinstep,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::RandomK => "random-k",
            PolicyKind::Q => "q",
            PolicyKind::BayesGreedy => "bayes-greedy",
            PolicyKind::BayesMinstep => "bayes-minstep",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown policy '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub env: EnvSpec,
    pub policy: PolicyKind,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_episodes() -> usize {
    100
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Digest over everything except the output location.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        digest(&canonical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub env: EnvSpec,
}

pub fn presets() -> Vec<Preset> {
    let preset = |name: &str, description: &str, env: EnvSpec| Preset {
        name: name.to_string(),
        description: description.to_string(),
        env,
    };
    let pinned = |space: Family, h: Hypothesis| EnvSpec {
        space,
        hypothesis: Some(h),
        ..EnvSpec::default()
    };
    vec![
        preset(
            "default",
            "Three objects; one disjunctive blicket or a conjunctive pair, uniform",
            EnvSpec::default(),
        ),
        preset(
            "extended",
            "Three objects; every disjunctive and conjunctive blicket set",
            EnvSpec::family(Family::Extended),
        ),
        preset(
            "modality",
            "Default space; single conjunctive-vs-disjunctive question",
            EnvSpec {
                reward_mode: RewardMode::Modality,
                ..EnvSpec::default()
            },
        ),
        preset(
            "forced-15",
            "Default space; quiz unavailable for the first 15 checks",
            EnvSpec {
                forced_explore_k: 15,
                ..EnvSpec::default()
            },
        ),
        preset(
            "conj-ab",
            "Fixed world: A and B are blickets, both needed",
            pinned(Family::Default, Hypothesis::conjunctive(&[0, 1]).expect("valid")),
        ),
        preset(
            "disj-ab",
            "Fixed world: A and B are blickets, either suffices",
            pinned(Family::Extended, Hypothesis::disjunctive(&[0, 1]).expect("valid")),
        ),
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}
