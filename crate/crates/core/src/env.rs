//! The explore-then-quiz episode.
//!
//! During exploration every action places a subset of objects on the
//! detector, which is checked and cleared immediately. Setting the final
//! action bit asks to enter the quiz. In the quiz each object is queried in
//! index order and the agent answers with bit 0; every answer scores ±1.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::digest;
use crate::error::{Error, Result};
use crate::hypothesis::{
    split_space, Evidence, Hypothesis, HypothesisSpace, ObjectId, ObjectSet, SplitSpec, Trial,
};

pub const DEFAULT_MAX_STEPS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Per-object yes/no answers, ±1 each.
    #[default]
    #[serde(alias = "blicket_quiz")]
    Blicket,
    /// A single conjunctive-vs-disjunctive judgment, ±1.
    #[serde(alias = "modality_quiz")]
    Modality,
}

/// Weighted distribution over hidden hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    pub hypotheses: Vec<Hypothesis>,
    pub weights: Vec<f64>,
}

impl Sampler {
    pub fn uniform(hypotheses: Vec<Hypothesis>) -> Self {
        let weights = vec![1.0; hypotheses.len()];
        Sampler { hypotheses, weights }
    }

    pub fn fixed(h: Hypothesis) -> Self {
        Sampler::uniform(vec![h])
    }

    /// Hypotheses that can actually be drawn.
    pub fn support(&self) -> impl Iterator<Item = &Hypothesis> {
        self.hypotheses
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(h, _)| h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub space: HypothesisSpace,
    pub sampler: Sampler,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub forced_explore_k: usize,
    #[serde(default)]
    pub reward_mode: RewardMode,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

impl EnvConfig {
    /// Uniform sampler over the whole space, 25-step episodes.
    pub fn new(space: HypothesisSpace) -> Self {
        let sampler = Sampler::uniform(space.hypotheses().to_vec());
        EnvConfig {
            space,
            sampler,
            max_steps: DEFAULT_MAX_STEPS,
            forced_explore_k: 0,
            reward_mode: RewardMode::Blicket,
            seed: 0,
        }
    }

    /// Sampler restricted to the train (or test) side of a split.
    pub fn from_split(space: HypothesisSpace, split: &SplitSpec, test_side: bool) -> Result<Self> {
        let parts = split_space(&space, split)?;
        let side = if test_side { parts.test } else { parts.train };
        Ok(EnvConfig::new(space).with_sampler(Sampler::uniform(side)))
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_fixed(self, hidden: Hypothesis) -> Self {
        self.with_sampler(Sampler::fixed(hidden))
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_forced_explore(mut self, k: usize) -> Self {
        self.forced_explore_k = k;
        self
    }

    pub fn with_reward_mode(mut self, mode: RewardMode) -> Self {
        self.reward_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_objects(&self) -> usize {
        self.space.n_objects()
    }

    /// Number of quiz steps in one episode.
    pub fn quiz_len(&self) -> usize {
        match self.reward_mode {
            RewardMode::Blicket => self.n_objects(),
            RewardMode::Modality => 1,
        }
    }

    /// Best attainable episode reward.
    pub fn max_reward(&self) -> f64 {
        self.quiz_len() as f64
    }

    pub fn digest(&self) -> String {
        digest(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_objects();
        if self.max_steps < n + 1 {
            return Err(Error::InvalidConfig(format!(
                "max_steps {} leaves no room for an explore step plus a {n}-object quiz",
                self.max_steps
            )));
        }
        if self.forced_explore_k > self.max_steps - self.quiz_len() {
            return Err(Error::InvalidConfig(format!(
                "forced_explore_k {} exceeds the explore budget of {} steps",
                self.forced_explore_k,
                self.max_steps - self.quiz_len()
            )));
        }
        let s = &self.sampler;
        if s.hypotheses.is_empty() {
            return Err(Error::InvalidConfig("sampler has no hypotheses".into()));
        }
        if s.hypotheses.len() != s.weights.len() {
            return Err(Error::InvalidConfig(format!(
                "sampler lists {} hypotheses but {} weights",
                s.hypotheses.len(),
                s.weights.len()
            )));
        }
        if s.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "sampler weights must be finite and nonnegative".into(),
            ));
        }
        if s.weights.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidConfig("sampler weights are all zero".into()));
        }
        if let Some(h) = s.hypotheses.iter().find(|h| self.space.index_of(h).is_none()) {
            return Err(Error::InvalidConfig(format!(
                "sampler hypothesis {h} is not in the configured space"
            )));
        }
        Ok(())
    }
}

/// `n_objects + 1` bits: placement flags followed by the phase/answer flag.
///
/// In the quiz only bit 0 matters: it is the yes/no answer (or "conjunctive"
/// in modality mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    n_objects: usize,
    placement: ObjectSet,
    flag: bool,
}

impl Action {
    pub fn check(n_objects: usize, placement: ObjectSet) -> Self {
        Action {
            n_objects,
            placement,
            flag: false,
        }
    }

    /// Check `placement` and ask to move to the quiz.
    pub fn enter_quiz(n_objects: usize, placement: ObjectSet) -> Self {
        Action {
            n_objects,
            placement,
            flag: true,
        }
    }

    /// Quiz answer carried on bit 0.
    pub fn answer(n_objects: usize, yes: bool) -> Self {
        let placement = if yes {
            ObjectSet::from_mask(1)
        } else {
            ObjectSet::EMPTY
        };
        Action::check(n_objects, placement)
    }

    pub fn from_bits(bits: &[bool], n_objects: usize) -> Result<Self> {
        if bits.len() != n_objects + 1 {
            return Err(Error::InvalidInput(format!(
                "action has {} bits, expected {}",
                bits.len(),
                n_objects + 1
            )));
        }
        let mut mask = 0u32;
        for (i, b) in bits[..n_objects].iter().enumerate() {
            if *b {
                mask |= 1 << i;
            }
        }
        Ok(Action {
            n_objects,
            placement: ObjectSet::from_mask(mask),
            flag: bits[n_objects],
        })
    }

    /// Inverse of [`Action::encoding`]: placement in the low bits, flag at bit `n`.
    pub fn from_encoding(code: u32, n_objects: usize) -> Result<Self> {
        if u64::from(code) >= 1u64 << (n_objects + 1) {
            return Err(Error::InvalidInput(format!(
                "action code {code} does not fit in {} bits",
                n_objects + 1
            )));
        }
        Ok(Action {
            n_objects,
            placement: ObjectSet::from_mask(code & ((1 << n_objects) - 1)),
            flag: code >> n_objects & 1 == 1,
        })
    }

    pub fn encoding(&self) -> u32 {
        self.placement.mask() | (u32::from(self.flag) << self.n_objects)
    }

    pub fn bits(&self) -> Vec<bool> {
        let mut bits: Vec<bool> = (0..self.n_objects)
            .map(|i| self.placement.contains(ObjectId(i)))
            .collect();
        bits.push(self.flag);
        bits
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn placement(&self) -> ObjectSet {
        self.placement
    }

    pub fn flag(&self) -> bool {
        self.flag
    }

    pub fn answer_bit(&self) -> bool {
        self.placement.contains(ObjectId(0))
    }
}

/// What the agent sees: last checked subset, detector state, phase flag and
/// the queried object. Width `2n + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "ObservationRecord", try_from = "ObservationRecord")]
pub struct Observation {
    pub n_objects: usize,
    pub placed: ObjectSet,
    pub lit: bool,
    pub quiz: bool,
    pub query: Option<ObjectId>,
}

#[derive(Serialize, Deserialize)]
struct ObservationRecord {
    placed: Vec<bool>,
    lit: bool,
    phase: bool,
    quiz_query: Vec<bool>,
}

impl From<Observation> for ObservationRecord {
    fn from(o: Observation) -> Self {
        let n = o.n_objects;
        let bits = o.bits();
        ObservationRecord {
            placed: bits[..n].to_vec(),
            lit: o.lit,
            phase: o.quiz,
            quiz_query: bits[n + 2..].to_vec(),
        }
    }
}

impl TryFrom<ObservationRecord> for Observation {
    type Error = Error;

    fn try_from(r: ObservationRecord) -> Result<Self> {
        let mut bits = r.placed;
        bits.push(r.lit);
        bits.push(r.phase);
        bits.extend(r.quiz_query);
        let n = bits.len().saturating_sub(2) / 2;
        Observation::from_bits(&bits, n)
    }
}

impl Observation {
    pub fn initial(n_objects: usize) -> Self {
        Observation {
            n_objects,
            placed: ObjectSet::EMPTY,
            lit: false,
            quiz: false,
            query: None,
        }
    }

    pub fn width(&self) -> usize {
        2 * self.n_objects + 2
    }

    pub fn bits(&self) -> Vec<bool> {
        let n = self.n_objects;
        let mut bits = Vec::with_capacity(2 * n + 2);
        bits.extend((0..n).map(|i| self.placed.contains(ObjectId(i))));
        bits.push(self.lit);
        bits.push(self.quiz);
        bits.extend((0..n).map(|i| self.query == Some(ObjectId(i))));
        bits
    }

    pub fn from_bits(bits: &[bool], n_objects: usize) -> Result<Self> {
        let n = n_objects;
        if bits.len() != 2 * n + 2 {
            return Err(Error::InvalidInput(format!(
                "observation has {} bits, expected {}",
                bits.len(),
                2 * n + 2
            )));
        }
        let placed = ObjectSet::from_indices((0..n).filter(|i| bits[*i]))?;
        let queried: Vec<usize> = (0..n).filter(|i| bits[n + 2 + i]).collect();
        if queried.len() > 1 {
            return Err(Error::InvalidInput("quiz query is not one-hot".into()));
        }
        Ok(Observation {
            n_objects,
            placed,
            lit: bits[n],
            quiz: bits[n + 1],
            query: queried.first().map(|&i| ObjectId(i)),
        })
    }

    /// `0`/`1` string, used for canonical history keys.
    pub fn bit_string(&self) -> String {
        self.bits().iter().map(|b| if *b { '1' } else { '0' }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Explore,
    Quiz,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeState {
    hidden: Hypothesis,
    phase: Phase,
    step: usize,
    history: Evidence,
    quiz_cursor: usize,
    accumulated_reward: f64,
    quiz_entry_step: Option<usize>,
    last_check: Option<Trial>,
}

impl EpisodeState {
    pub fn hidden(&self) -> &Hypothesis {
        &self.hidden
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Actions taken so far, explore and quiz combined.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn history(&self) -> &Evidence {
        &self.history
    }

    pub fn quiz_cursor(&self) -> usize {
        self.quiz_cursor
    }

    pub fn accumulated_reward(&self) -> f64 {
        self.accumulated_reward
    }

    /// Number of explore actions taken when the quiz began, if it has.
    pub fn quiz_entry_step(&self) -> Option<usize> {
        self.quiz_entry_step
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

/// Validated, immutable environment. Episodes are separate [`EpisodeState`]s.
#[derive(Debug, Clone)]
pub struct BlicketEnv {
    config: EnvConfig,
    weights: WeightedIndex<f64>,
}

impl BlicketEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let weights = WeightedIndex::new(&config.sampler.weights)
            .map_err(|e| Error::InvalidConfig(format!("sampler weights: {e}")))?;
        Ok(BlicketEnv { config, weights })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn n_objects(&self) -> usize {
        self.config.n_objects()
    }

    /// Draws the hidden hypothesis from the sampler with a generator seeded by `seed`.
    pub fn reset(&self, seed: u64) -> (EpisodeState, Observation) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = self.config.sampler.hypotheses[self.weights.sample(&mut rng)];
        self.start(hidden)
    }

    /// Starts an episode with a known hidden hypothesis (used for replay and
    /// exhaustive evaluation).
    pub fn start(&self, hidden: Hypothesis) -> (EpisodeState, Observation) {
        let state = EpisodeState {
            hidden,
            phase: Phase::Explore,
            step: 0,
            history: Evidence::new(),
            quiz_cursor: 0,
            accumulated_reward: 0.0,
            quiz_entry_step: None,
            last_check: None,
        };
        let obs = self.encode_observation(&state);
        (state, obs)
    }

    pub fn step(&self, state: &mut EpisodeState, action: &Action) -> Result<StepOutcome> {
        if state.phase == Phase::Done {
            return Err(Error::EpisodeFinished);
        }
        let n = self.n_objects();
        if action.n_objects() != n {
            return Err(Error::InvalidInput(format!(
                "action width {} does not match {} objects",
                action.n_objects() + 1,
                n
            )));
        }
        let mut reward = 0.0;
        match state.phase {
            Phase::Explore => {
                let placed = action.placement();
                if !placed.is_subset(ObjectSet::full(n)) {
                    return Err(Error::InvalidInput(format!("placement {placed} out of range")));
                }
                let lit = state.hidden.lights(placed);
                state.history.push(placed, lit);
                state.last_check = Some(Trial { placed, lit });
                let before = state.step;
                state.step += 1;
                let requested = action.flag() && before >= self.config.forced_explore_k;
                let out_of_time = state.step >= self.config.max_steps - self.config.quiz_len();
                if requested || out_of_time {
                    state.phase = Phase::Quiz;
                    state.quiz_entry_step = Some(state.step);
                }
            }
            Phase::Quiz => {
                let answer = action.answer_bit();
                let truth = match self.config.reward_mode {
                    RewardMode::Blicket => state.hidden.is_blicket(ObjectId(state.quiz_cursor)),
                    RewardMode::Modality => {
                        state.hidden.form() == crate::hypothesis::Form::Conjunctive
                    }
                };
                reward = if answer == truth { 1.0 } else { -1.0 };
                state.quiz_cursor += 1;
                state.step += 1;
                if state.quiz_cursor == self.config.quiz_len() {
                    state.phase = Phase::Done;
                }
            }
            Phase::Done => unreachable!(),
        }
        state.accumulated_reward += reward;
        Ok(StepOutcome {
            observation: self.encode_observation(state),
            reward,
            done: state.phase == Phase::Done,
        })
    }

    pub fn encode_observation(&self, state: &EpisodeState) -> Observation {
        let n = self.n_objects();
        let (placed, lit) = state
            .last_check
            .map_or((ObjectSet::EMPTY, false), |t| (t.placed, t.lit));
        let query = match (state.phase, self.config.reward_mode) {
            (Phase::Quiz, RewardMode::Blicket) => Some(ObjectId(state.quiz_cursor)),
            _ => None,
        };
        Observation {
            n_objects: n,
            placed,
            lit,
            quiz: state.phase != Phase::Explore,
            query,
        }
    }
}
