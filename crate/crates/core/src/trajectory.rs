//! Episode transcripts and offline datasets.
//!
//! A trajectory serializes as JSON lines: one `header` line followed by one
//! `step` line per action. Agents, CLI runs and human sessions all write the
//! same schema, and any transcript can be replayed through [`BlicketEnv`] to
//! check it bit for bit.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{Action, BlicketEnv, EnvConfig, Phase, RewardMode, StepOutcome};
use crate::error::{Error, Result};
use crate::hypothesis::{Form, Hypothesis, HypothesisSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub episode_id: String,
    pub hidden_hypothesis: Hypothesis,
    pub config_digest: String,
    pub seed: u64,
    pub n_objects: usize,
    pub max_steps: usize,
    pub forced_explore_k: usize,
    pub reward_mode: RewardMode,
    /// `human` or `agent` for service sessions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
}

impl TrajectoryHeader {
    pub fn new(episode_id: String, hidden: Hypothesis, config: &EnvConfig, seed: u64) -> Self {
        TrajectoryHeader {
            episode_id,
            hidden_hypothesis: hidden,
            config_digest: config.digest(),
            seed,
            n_objects: config.n_objects(),
            max_steps: config.max_steps,
            forced_explore_k: config.forced_explore_k,
            reward_mode: config.reward_mode,
            owner: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode_id: String,
    pub step: usize,
    /// Phase in which the action was taken.
    pub phase: Phase,
    pub action_bits: Vec<bool>,
    pub observation_bits: Vec<bool>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Line {
    Header(TrajectoryHeader),
    Step(StepRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn new(header: TrajectoryHeader) -> Self {
        Trajectory {
            header,
            steps: Vec::new(),
        }
    }

    pub fn record(&mut self, phase: Phase, action: &Action, outcome: &StepOutcome) {
        self.steps.push(StepRecord {
            episode_id: self.header.episode_id.clone(),
            step: self.steps.len(),
            phase,
            action_bits: action.bits(),
            observation_bits: outcome.observation.bits(),
            reward: outcome.reward,
            done: outcome.done,
        });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.steps.last().is_some_and(|s| s.done)
    }

    /// Explore actions taken up to and including the one that started the quiz.
    pub fn quiz_entry_step(&self) -> Option<usize> {
        let explore = self.steps.iter().filter(|s| s.phase == Phase::Explore).count();
        self.steps.iter().any(|s| s.phase == Phase::Quiz).then_some(explore)
    }

    /// Explore checks, not counting an action whose only job was to request
    /// the quiz.
    pub fn exploration_steps(&self) -> usize {
        let explore: Vec<&StepRecord> =
            self.steps.iter().filter(|s| s.phase == Phase::Explore).collect();
        let n = self.header.n_objects;
        match explore.last() {
            Some(last) if last.action_bits[n] && last.observation_bits[n + 1] => explore.len() - 1,
            _ => explore.len(),
        }
    }

    /// Answer bits given during the quiz.
    pub fn answers(&self) -> Vec<bool> {
        self.steps
            .iter()
            .filter(|s| s.phase == Phase::Quiz)
            .map(|s| s.action_bits[0])
            .collect()
    }

    /// Conjunctive/disjunctive judgment implied by the transcript: the answer
    /// itself in modality mode, otherwise "conjunctive" when at least two
    /// objects were called blickets.
    pub fn implied_modality(&self) -> Option<Form> {
        let answers = self.answers();
        if answers.is_empty() {
            return None;
        }
        let conj = match self.header.reward_mode {
            RewardMode::Modality => answers[0],
            RewardMode::Blicket => answers.iter().filter(|a| **a).count() >= 2,
        };
        Some(if conj {
            Form::Conjunctive
        } else {
            Form::Disjunctive
        })
    }

    fn replay_env(&self) -> Result<BlicketEnv> {
        let h = &self.header;
        let space = HypothesisSpace::custom(h.n_objects, vec![h.hidden_hypothesis])?;
        let config = EnvConfig::new(space)
            .with_max_steps(h.max_steps)
            .with_forced_explore(h.forced_explore_k)
            .with_reward_mode(h.reward_mode);
        BlicketEnv::new(config)
    }

    /// Re-executes the logged actions against the logged hidden hypothesis and
    /// checks every observation, reward and done flag.
    pub fn replay(&self) -> Result<()> {
        let env = self.replay_env()?;
        let n = self.header.n_objects;
        let (mut state, _) = env.start(self.header.hidden_hypothesis);
        for (i, rec) in self.steps.iter().enumerate() {
            let mismatch = |detail: String| Error::ReplayMismatch { step: i, detail };
            if rec.phase != state.phase() {
                return Err(mismatch(format!(
                    "logged phase {:?}, env phase {:?}",
                    rec.phase,
                    state.phase()
                )));
            }
            let action = Action::from_bits(&rec.action_bits, n).map_err(|e| mismatch(e.to_string()))?;
            let out = env.step(&mut state, &action).map_err(|e| mismatch(e.to_string()))?;
            if out.observation.bits() != rec.observation_bits {
                return Err(mismatch("observation differs".into()));
            }
            if out.reward.to_bits() != rec.reward.to_bits() {
                return Err(mismatch(format!("reward {} vs logged {}", out.reward, rec.reward)));
            }
            if out.done != rec.done {
                return Err(mismatch("done flag differs".into()));
            }
        }
        Ok(())
    }

    pub fn lines(&self) -> impl Iterator<Item = Line> + '_ {
        std::iter::once(Line::Header(self.header.clone()))
            .chain(self.steps.iter().cloned().map(Line::Step))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for line in self.lines() {
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Parses a stream of header/step lines into trajectories.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Trajectory>> {
    let mut out: Vec<Trajectory> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Line>(&line)? {
            Line::Header(h) => out.push(Trajectory::new(h)),
            Line::Step(s) => {
                let current = out.last_mut().ok_or_else(|| {
                    Error::InvalidInput(format!("line {}: step before any header", lineno + 1))
                })?;
                if s.episode_id != current.header.episode_id {
                    return Err(Error::InvalidInput(format!(
                        "line {}: step for episode {} inside episode {}",
                        lineno + 1,
                        s.episode_id,
                        current.header.episode_id
                    )));
                }
                current.steps.push(s);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n_trajectories: usize,
    pub n_steps: usize,
    pub max_trajectory_len: usize,
    pub config_digests: BTreeMap<String, usize>,
    /// Episode return → count.
    pub reward_histogram: BTreeMap<String, usize>,
    pub trajectories_file: String,
}

pub const DATASET_FILE: &str = "trajectories.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `trajectories.jsonl` and `manifest.json` into `dir`.
pub fn export_dataset(trajectories: &[Trajectory], dir: &Path) -> Result<Manifest> {
    if trajectories.is_empty() {
        return Err(Error::InvalidInput("refusing to export an empty dataset".into()));
    }
    fs::create_dir_all(dir)?;
    let mut out = BufWriter::new(File::create(dir.join(DATASET_FILE))?);
    let mut config_digests = BTreeMap::new();
    let mut reward_histogram = BTreeMap::new();
    for t in trajectories {
        t.write_jsonl(&mut out)?;
        *config_digests.entry(t.header.config_digest.clone()).or_insert(0) += 1;
        *reward_histogram.entry(format!("{}", t.total_reward())).or_insert(0) += 1;
    }
    out.flush()?;
    let manifest = Manifest {
        n_trajectories: trajectories.len(),
        n_steps: trajectories.iter().map(Trajectory::len).sum(),
        max_trajectory_len: trajectories.iter().map(Trajectory::len).max().unwrap_or(0),
        config_digests,
        reward_histogram,
        trajectories_file: DATASET_FILE.to_string(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Reads a dataset written by [`export_dataset`]; `path` may be the directory
/// or the JSON-lines file itself.
pub fn import_dataset(path: &Path) -> Result<Vec<Trajectory>> {
    let file: PathBuf = if path.is_dir() {
        path.join(DATASET_FILE)
    } else {
        path.to_path_buf()
    };
    read_jsonl(BufReader::new(File::open(file)?))
}
