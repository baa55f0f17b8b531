//! Hypothesis spaces over blicket detectors.
//!
//! A [`Hypothesis`] is one causal world: a structural form (how many blickets
//! must be on the detector for it to light) together with the set of objects
//! that are blickets. A [`HypothesisSpace`] is an ordered list of such worlds;
//! its ordering is stable so that indices can be used as keys in logs, Q-tables
//! and held-out splits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on objects per detector. Subsets are stored as `u32` bitmasks
/// and most algorithms here enumerate all `2^n` placements.
pub const MAX_OBJECTS: usize = 16;

/// Dense object index in `0..n_objects`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub usize);

impl ObjectId {
    /// Display letter: `A`, `B`, `C`, ... (falls back to `#i` past `Z`).
    pub fn label(self) -> String {
        if self.0 < 26 {
            char::from(b'A' + self.0 as u8).to_string()
        } else {
            format!("#{}", self.0)
        }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A set of objects, stored as a bitmask. Serialized as a sorted index list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct ObjectSet(u32);

impl ObjectSet {
    pub const EMPTY: ObjectSet = ObjectSet(0);

    pub fn from_mask(mask: u32) -> Self {
        ObjectSet(mask)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        let mut mask = 0u32;
        for i in indices {
            if i >= MAX_OBJECTS {
                return Err(Error::InvalidInput(format!(
                    "object index {i} exceeds the supported maximum of {MAX_OBJECTS} objects"
                )));
            }
            mask |= 1 << i;
        }
        Ok(ObjectSet(mask))
    }

    /// Every object in `0..n`.
    pub fn full(n_objects: usize) -> Self {
        ObjectSet(((1u64 << n_objects) - 1) as u32)
    }

    pub fn contains(self, id: ObjectId) -> bool {
        id.0 < 32 && self.0 & (1 << id.0) != 0
    }

    pub fn insert(&mut self, id: ObjectId) {
        self.0 |= 1 << id.0;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: ObjectSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersection(self, other: ObjectSet) -> ObjectSet {
        ObjectSet(self.0 & other.0)
    }

    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|i| self.0 & (1 << i) != 0).collect()
    }

    pub fn iter(self) -> impl Iterator<Item = ObjectId> {
        self.indices().into_iter().map(ObjectId)
    }

    /// Largest index plus one, i.e. the minimum universe this set fits in.
    pub fn span(self) -> usize {
        32 - self.0.leading_zeros() as usize
    }

    /// All `2^n` subsets ordered by size, then lexicographically by their
    /// sorted index lists. This is the tie-break order used by every planner.
    pub fn all_canonical(n_objects: usize) -> Vec<ObjectSet> {
        let mut all: Vec<ObjectSet> = (0..(1u32 << n_objects)).map(ObjectSet).collect();
        all.sort_by_key(|s| (s.len(), s.indices()));
        all
    }
}

impl From<ObjectSet> for Vec<usize> {
    fn from(s: ObjectSet) -> Self {
        s.indices()
    }
}

impl TryFrom<Vec<usize>> for ObjectSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        ObjectSet::from_indices(v)
    }
}

impl fmt::Display for ObjectSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.iter().map(ObjectId::label).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

/// Structural form of a detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Lights when at least one blicket is placed.
    Disjunctive,
    /// Lights when at least two blickets are placed.
    Conjunctive,
}

impl Form {
    pub fn threshold(self) -> usize {
        match self {
            Form::Disjunctive => 1,
            Form::Conjunctive => 2,
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Disjunctive => "disjunctive",
            Form::Conjunctive => "conjunctive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "HypothesisRecord")]
pub struct Hypothesis {
    form: Form,
    blickets: ObjectSet,
}

#[derive(Deserialize)]
struct HypothesisRecord {
    form: Form,
    blickets: ObjectSet,
}

impl TryFrom<HypothesisRecord> for Hypothesis {
    type Error = Error;

    fn try_from(r: HypothesisRecord) -> Result<Self> {
        Hypothesis::new(r.form, r.blickets)
    }
}

impl Hypothesis {
    pub fn new(form: Form, blickets: ObjectSet) -> Result<Self> {
        if blickets.len() < form.threshold() {
            return Err(Error::InvalidInput(format!(
                "{form} hypothesis needs at least {} blicket(s), got {blickets}",
                form.threshold()
            )));
        }
        Ok(Hypothesis { form, blickets })
    }

    pub fn disjunctive(blickets: &[usize]) -> Result<Self> {
        Hypothesis::new(Form::Disjunctive, ObjectSet::from_indices(blickets.iter().copied())?)
    }

    pub fn conjunctive(blickets: &[usize]) -> Result<Self> {
        Hypothesis::new(Form::Conjunctive, ObjectSet::from_indices(blickets.iter().copied())?)
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn blickets(&self) -> ObjectSet {
        self.blickets
    }

    pub fn threshold(&self) -> usize {
        self.form.threshold()
    }

    pub fn is_blicket(&self, id: ObjectId) -> bool {
        self.blickets.contains(id)
    }

    /// Detector response to a placement. Callers that know the object
    /// universe should go through [`detector_lit`] to get range checking.
    pub fn lights(&self, placed: ObjectSet) -> bool {
        placed.intersection(self.blickets).len() >= self.threshold()
    }

    /// True iff the hypothesis reproduces every recorded trial.
    pub fn consistent(&self, evidence: &Evidence) -> bool {
        evidence.trials.iter().all(|t| self.lights(t.placed) == t.lit)
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.form {
            Form::Disjunctive => "Disj",
            Form::Conjunctive => "Conj",
        };
        write!(f, "{tag}{}", self.blickets)
    }
}

/// Range-checked detector response.
pub fn detector_lit(h: &Hypothesis, placed: ObjectSet, n_objects: usize) -> Result<bool> {
    if !placed.is_subset(ObjectSet::full(n_objects)) {
        return Err(Error::InvalidInput(format!(
            "placement {placed} is outside the {n_objects}-object universe"
        )));
    }
    Ok(h.lights(placed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Disjunctive singletons and conjunctive pairs.
    Default,
    /// Every nonempty disjunctive set and every conjunctive set of size ≥ 2.
    Extended,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpaceRecord")]
pub struct HypothesisSpace {
    n_objects: usize,
    family: Family,
    hypotheses: Vec<Hypothesis>,
}

#[derive(Deserialize)]
struct SpaceRecord {
    n_objects: usize,
    family: Family,
    #[serde(default)]
    hypotheses: Option<Vec<Hypothesis>>,
}

impl TryFrom<SpaceRecord> for HypothesisSpace {
    type Error = Error;

    fn try_from(r: SpaceRecord) -> Result<Self> {
        match (r.family, r.hypotheses) {
            (Family::Custom, Some(h)) => HypothesisSpace::custom(r.n_objects, h),
            (Family::Custom, None) => Err(Error::InvalidConfig(
                "custom hypothesis space requires an explicit hypothesis list".into(),
            )),
            (family, listed) => {
                let space = enumerate_space(r.n_objects, family)?;
                match listed {
                    Some(h) if h != space.hypotheses => Err(Error::InvalidConfig(format!(
                        "hypothesis list does not match the {family:?} family for {} objects",
                        r.n_objects
                    ))),
                    _ => Ok(space),
                }
            }
        }
    }
}

impl HypothesisSpace {
    pub fn default_space(n_objects: usize) -> Result<Self> {
        enumerate_space(n_objects, Family::Default)
    }

    pub fn extended(n_objects: usize) -> Result<Self> {
        enumerate_space(n_objects, Family::Extended)
    }

    pub fn custom(n_objects: usize, hypotheses: Vec<Hypothesis>) -> Result<Self> {
        check_objects(n_objects)?;
        if hypotheses.is_empty() {
            return Err(Error::InvalidConfig("hypothesis space is empty".into()));
        }
        for (i, h) in hypotheses.iter().enumerate() {
            if h.blickets.span() > n_objects {
                return Err(Error::InvalidConfig(format!(
                    "hypothesis {h} references objects outside 0..{n_objects}"
                )));
            }
            if hypotheses[..i].contains(h) {
                return Err(Error::InvalidConfig(format!("duplicate hypothesis {h}")));
            }
        }
        Ok(HypothesisSpace {
            n_objects,
            family: Family::Custom,
            hypotheses,
        })
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Hypothesis> {
        self.hypotheses.get(index)
    }

    pub fn index_of(&self, h: &Hypothesis) -> Option<usize> {
        self.hypotheses.iter().position(|x| x == h)
    }
}

fn check_objects(n_objects: usize) -> Result<()> {
    if n_objects == 0 || n_objects > MAX_OBJECTS {
        return Err(Error::InvalidConfig(format!(
            "n_objects must be in 1..={MAX_OBJECTS}, got {n_objects}"
        )));
    }
    Ok(())
}

/// Builds a hypothesis space. Disjunctive hypotheses come first, then
/// conjunctive; within a form, blicket sets follow [`ObjectSet::all_canonical`].
pub fn enumerate_space(n_objects: usize, family: Family) -> Result<HypothesisSpace> {
    check_objects(n_objects)?;
    let subsets = ObjectSet::all_canonical(n_objects);
    type SizeRule = fn(usize) -> bool;
    let (disj_ok, conj_ok): (SizeRule, SizeRule) = match family {
        Family::Default => {
            if n_objects < 2 {
                return Err(Error::InvalidConfig(
                    "the default family needs at least 2 objects to form a conjunctive pair"
                        .into(),
                ));
            }
            (|k| k == 1, |k| k == 2)
        }
        Family::Extended => (|k| k >= 1, |k| k >= 2),
        Family::Custom => {
            return Err(Error::InvalidConfig(
                "custom spaces are built with HypothesisSpace::custom".into(),
            ))
        }
    };
    let mut hypotheses = Vec::new();
    for (form, keep) in [(Form::Disjunctive, disj_ok), (Form::Conjunctive, conj_ok)] {
        hypotheses.extend(
            subsets
                .iter()
                .filter(|s| keep(s.len()))
                .map(|&blickets| Hypothesis { form, blickets }),
        );
    }
    Ok(HypothesisSpace {
        n_objects,
        family,
        hypotheses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub placed: ObjectSet,
    pub lit: bool,
}

/// Ordered history of detector checks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub trials: Vec<Trial>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, placed: ObjectSet, lit: bool) {
        self.trials.push(Trial { placed, lit });
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }
}

pub fn consistent(h: &Hypothesis, evidence: &Evidence) -> bool {
    h.consistent(evidence)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    None,
    ConjunctiveOnly,
    DisjunctiveOnly,
    LeaveOneOutConj,
    LeaveOneOutDisj,
    LeaveOneOutBoth,
}

/// Train/test partition request. `held_out_indices` index into the space
/// and are only consulted by the leave-one-out modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    #[serde(default)]
    pub held_out_indices: Vec<usize>,
}

impl SplitSpec {
    pub fn none() -> Self {
        SplitSpec {
            mode: SplitMode::None,
            held_out_indices: Vec::new(),
        }
    }

    pub fn new(mode: SplitMode, held_out_indices: Vec<usize>) -> Self {
        SplitSpec {
            mode,
            held_out_indices,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<Hypothesis>,
    pub test: Vec<Hypothesis>,
}

pub fn split_space(space: &HypothesisSpace, spec: &SplitSpec) -> Result<Split> {
    let all = space.hypotheses().to_vec();
    let of_form = |form: Form| -> Vec<Hypothesis> {
        all.iter().copied().filter(|h| h.form() == form).collect()
    };
    let split = match spec.mode {
        SplitMode::None => Split {
            train: all.clone(),
            test: all.clone(),
        },
        SplitMode::ConjunctiveOnly => Split {
            train: of_form(Form::Conjunctive),
            test: all.clone(),
        },
        SplitMode::DisjunctiveOnly => Split {
            train: of_form(Form::Disjunctive),
            test: all.clone(),
        },
        SplitMode::LeaveOneOutConj | SplitMode::LeaveOneOutDisj | SplitMode::LeaveOneOutBoth => {
            let required = match spec.mode {
                SplitMode::LeaveOneOutConj => Some(Form::Conjunctive),
                SplitMode::LeaveOneOutDisj => Some(Form::Disjunctive),
                _ => None,
            };
            if spec.held_out_indices.is_empty() {
                return Err(Error::InvalidConfig(
                    "leave-one-out split needs at least one held-out index".into(),
                ));
            }
            let mut held = vec![false; all.len()];
            for &i in &spec.held_out_indices {
                let h = space.get(i).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "held-out index {i} out of range for a space of {}",
                        all.len()
                    ))
                })?;
                if let Some(form) = required {
                    if h.form() != form {
                        return Err(Error::InvalidConfig(format!(
                            "held-out hypothesis {h} is not {form}"
                        )));
                    }
                }
                held[i] = true;
            }
            let (test, train): (Vec<_>, Vec<_>) =
                all.iter().enumerate().partition(|(i, _)| held[*i]);
            Split {
                train: train.into_iter().map(|(_, h)| *h).collect(),
                test: test.into_iter().map(|(_, h)| *h).collect(),
            }
        }
    };
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{:?} split leaves an empty train or test set",
            spec.mode
        )));
    }
    Ok(split)
}
