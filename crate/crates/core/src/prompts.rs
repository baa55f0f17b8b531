//! Text versions of the detector task for language models.
//!
//! The canonical prompts are stored verbatim under `assets/prompts` and
//! assembled by [`render_prompt`]. Replies are truncated to their first few
//! sentences, scanned for object names asserted to be blickets and for a
//! striped/dotted machine claim, then scored against the condition's truth.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::config::digest;
use crate::error::{Error, Result};
use crate::hypothesis::{Evidence, Form, ObjectId};

const FREEFORM_PREAMBLE: &str = include_str!("../assets/prompts/freeform_preamble.txt");
const FREEFORM_GIVEN: &str = include_str!("../assets/prompts/freeform_given.txt");
const FREEFORM_NOT_GIVEN: &str = include_str!("../assets/prompts/freeform_not_given.txt");
const FREEFORM_DISJUNCTIVE: &str = include_str!("../assets/prompts/freeform_disjunctive.txt");
const FREEFORM_CONJUNCTIVE: &str = include_str!("../assets/prompts/freeform_conjunctive.txt");
const FREEFORM_QUESTION: &str = include_str!("../assets/prompts/freeform_question.txt");
const FEWSHOT_PREAMBLE: &str = include_str!("../assets/prompts/fewshot_preamble.txt");
const FEWSHOT_GIVEN: &str = include_str!("../assets/prompts/fewshot_given.txt");
const FEWSHOT_NOT_GIVEN: &str = include_str!("../assets/prompts/fewshot_not_given.txt");
const FEWSHOT_DISJUNCTIVE: &str = include_str!("../assets/prompts/fewshot_disjunctive.txt");
const FEWSHOT_CONJUNCTIVE: &str = include_str!("../assets/prompts/fewshot_conjunctive.txt");

/// Every object name used across the prompts, training machines included.
pub const OBJECT_NAMES: [&str; 9] = [
    "blue pyramid",
    "green cube",
    "orange sphere",
    "yellow cylinder",
    "purple cone",
    "red dome",
    "teal prism",
    "pink frustum",
    "brown torus",
];

/// Alternative spellings that occur in the prompts, with their canonical name.
pub const NAME_ALIASES: [(&str, &str); 1] = [("red half dome", "red dome")];

/// The three objects on the test machine.
pub const TEST_OBJECTS: [&str; 3] = ["teal prism", "pink frustum", "brown torus"];

pub const DEFAULT_SENTENCE_LIMIT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    Freeform,
    FewShot,
}

/// Machine vocabulary used in the prompts: striped machines need two
/// blickets, dotted machines need one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Machine {
    Striped,
    Dotted,
}

impl From<Form> for Machine {
    fn from(form: Form) -> Self {
        match form {
            Form::Conjunctive => Machine::Striped,
            Form::Disjunctive => Machine::Dotted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    /// Whether the two training machines are shown first.
    pub hypotheses_given: bool,
    pub structure: Form,
    pub style: Style,
}

impl Condition {
    pub fn new(hypotheses_given: bool, structure: Form, style: Style) -> Self {
        Condition {
            hypotheses_given,
            structure,
            style,
        }
    }

    pub fn all() -> Vec<Condition> {
        let mut out = Vec::with_capacity(8);
        for style in [Style::Freeform, Style::FewShot] {
            for given in [true, false] {
                for structure in [Form::Disjunctive, Form::Conjunctive] {
                    out.push(Condition::new(given, structure, style));
                }
            }
        }
        out
    }

    /// File-name form, e.g. `fewshot_not_given_conjunctive`.
    pub fn slug(&self) -> String {
        let style = match self.style {
            Style::Freeform => "freeform",
            Style::FewShot => "fewshot",
        };
        let given = if self.hypotheses_given { "given" } else { "not_given" };
        format!("{style}_{given}_{}", self.structure)
    }

    pub fn truth_blickets(&self) -> BTreeSet<String> {
        let names: &[&str] = match self.structure {
            Form::Disjunctive => &["brown torus"],
            Form::Conjunctive => &["teal prism", "brown torus"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// `None` when the training machines are withheld, so no machine type
    /// can be inferred.
    pub fn truth_structure(&self) -> Option<Machine> {
        self.hypotheses_given.then(|| self.structure.into())
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::all()
            .into_iter()
            .find(|c| c.slug() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown prompt condition '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDoc {
    pub condition: Condition,
    pub text: String,
    pub truth_blickets: BTreeSet<String>,
    pub truth_structure: Option<Machine>,
}

pub fn render_prompt(condition: Condition) -> PromptDoc {
    let given = condition.hypotheses_given;
    let parts: Vec<&str> = match condition.style {
        Style::Freeform => vec![
            FREEFORM_PREAMBLE,
            if given { FREEFORM_GIVEN } else { FREEFORM_NOT_GIVEN },
            match condition.structure {
                Form::Disjunctive => FREEFORM_DISJUNCTIVE,
                Form::Conjunctive => FREEFORM_CONJUNCTIVE,
            },
            FREEFORM_QUESTION,
        ],
        Style::FewShot => vec![
            FEWSHOT_PREAMBLE,
            if given { FEWSHOT_GIVEN } else { FEWSHOT_NOT_GIVEN },
            match condition.structure {
                Form::Disjunctive => FEWSHOT_DISJUNCTIVE,
                Form::Conjunctive => FEWSHOT_CONJUNCTIVE,
            },
        ],
    };
    PromptDoc {
        condition,
        text: parts.join("\n"),
        truth_blickets: condition.truth_blickets(),
        truth_structure: condition.truth_structure(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub blickets_claimed: BTreeSet<String>,
    pub structure_claimed: Option<Machine>,
    /// Sentences actually scanned.
    pub truncated_to: usize,
}

static NAME_RE: LazyLock<Regex> = LazyLock::new(|| {
    let mut names: Vec<&str> = OBJECT_NAMES.to_vec();
    names.extend(NAME_ALIASES.iter().map(|(alias, _)| *alias));
    names.sort_by_key(|n| std::cmp::Reverse(n.len()));
    let alternation: Vec<String> = names.iter().map(|n| regex::escape(n)).collect();
    Regex::new(&format!(r"(?i)\b({})\b", alternation.join("|"))).expect("static regex")
});

static CLAIM_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bblickets?\b(\s+(detector|machine))?").expect("static regex"));

static NEGATION_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(not|no|never|isn't|aren't|isnt|arent)\b").expect("static regex")
});

static SEGMENT_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)[,;]|\bbut\b").expect("static regex"));

static MACHINE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(striped|dotted)\b").expect("static regex"));

fn canonical_name(found: &str) -> String {
    let lower = found.to_lowercase();
    NAME_ALIASES
        .iter()
        .find(|(alias, _)| *alias == lower)
        .map_or(lower.clone(), |(_, name)| name.to_string())
}

/// Splits on periods, dropping empty pieces, and keeps the first `limit`.
pub fn first_sentences(text: &str, limit: usize) -> Vec<&str> {
    text.split('.')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .take(limit)
        .collect()
}

fn is_claim_sentence(sentence: &str) -> bool {
    CLAIM_RE.captures_iter(sentence).any(|c| c.get(1).is_none())
}

fn segments(sentence: &str) -> impl Iterator<Item = &str> {
    SEGMENT_RE.split(sentence).filter(|s| !NEGATION_RE.is_match(s))
}

/// Reads the blicket and machine claims out of a model reply.
pub fn parse_answer(text: &str, sentence_limit: usize) -> ParsedAnswer {
    let sentences = first_sentences(text, sentence_limit.max(1));
    let mut blickets_claimed = BTreeSet::new();
    let mut structure_claimed = None;
    for sentence in &sentences {
        let claim = is_claim_sentence(sentence);
        for segment in segments(sentence) {
            if claim {
                for m in NAME_RE.find_iter(segment) {
                    blickets_claimed.insert(canonical_name(m.as_str()));
                }
            }
            if structure_claimed.is_none() {
                structure_claimed = MACHINE_RE.find(segment).map(|m| {
                    if m.as_str().eq_ignore_ascii_case("striped") {
                        Machine::Striped
                    } else {
                        Machine::Dotted
                    }
                });
            }
        }
    }
    ParsedAnswer {
        blickets_claimed,
        structure_claimed,
        truncated_to: sentences.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureScore {
    Correct,
    Wrong,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Score {
    pub n_correct: usize,
    pub n_wrong: usize,
    pub structure: StructureScore,
}

pub fn score_answer(parsed: &ParsedAnswer, doc: &PromptDoc) -> Score {
    let n_correct = parsed.blickets_claimed.intersection(&doc.truth_blickets).count();
    let structure = match doc.truth_structure {
        None => StructureScore::NotApplicable,
        Some(truth) if parsed.structure_claimed == Some(truth) => StructureScore::Correct,
        Some(_) => StructureScore::Wrong,
    };
    Score {
        n_correct,
        n_wrong: parsed.blickets_claimed.len() - n_correct,
        structure,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Gpt3,
    Palm,
}

/// A model reply recorded alongside the canonical prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RecordedReply {
    pub model: Model,
    pub condition: Condition,
    pub text: &'static str,
}

macro_rules! reply {
    ($model:expr, $given:expr, $form:expr, $style:expr, $file:literal) => {
        RecordedReply {
            model: $model,
            condition: Condition {
                hypotheses_given: $given,
                structure: $form,
                style: $style,
            },
            text: include_str!(concat!("../assets/replies/", $file)),
        }
    };
}

/// The twelve recorded replies: GPT-3 and PaLM freeform, PaLM few-shot.
pub fn recorded_replies() -> Vec<RecordedReply> {
    use Form::{Conjunctive as C, Disjunctive as D};
    use Model::{Gpt3, Palm};
    use Style::{FewShot, Freeform};
    vec![
        reply!(Gpt3, true, D, Freeform, "gpt3_freeform_given_disjunctive.txt"),
        reply!(Gpt3, true, C, Freeform, "gpt3_freeform_given_conjunctive.txt"),
        reply!(Gpt3, false, D, Freeform, "gpt3_freeform_not_given_disjunctive.txt"),
        reply!(Gpt3, false, C, Freeform, "gpt3_freeform_not_given_conjunctive.txt"),
        reply!(Palm, true, D, Freeform, "palm_freeform_given_disjunctive.txt"),
        reply!(Palm, true, C, Freeform, "palm_freeform_given_conjunctive.txt"),
        reply!(Palm, false, D, Freeform, "palm_freeform_not_given_disjunctive.txt"),
        reply!(Palm, false, C, Freeform, "palm_freeform_not_given_conjunctive.txt"),
        reply!(Palm, true, D, FewShot, "palm_fewshot_given_disjunctive.txt"),
        reply!(Palm, true, C, FewShot, "palm_fewshot_given_conjunctive.txt"),
        reply!(Palm, false, D, FewShot, "palm_fewshot_not_given_disjunctive.txt"),
        reply!(Palm, false, C, FewShot, "palm_fewshot_not_given_conjunctive.txt"),
    ]
}

/// One line of a prompt run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub prompt_digest: String,
    pub reply: String,
    pub parsed: ParsedAnswer,
    pub score: Score,
}

/// Renders, parses and scores in one go.
pub fn evaluate_reply(condition: Condition, reply: &str, sentence_limit: usize) -> PromptRecord {
    let doc = render_prompt(condition);
    let parsed = parse_answer(reply, sentence_limit);
    let score = score_answer(&parsed, &doc);
    PromptRecord {
        condition,
        model: None,
        prompt_digest: digest(&doc.text),
        reply: reply.to_string(),
        parsed,
        score,
    }
}

fn name_list(names: &[&str], article: &str) -> String {
    let with_article: Vec<String> = names.iter().map(|n| format!("{article} {n}")).collect();
    match with_article.split_last() {
        None => String::new(),
        Some((last, [])) => last.clone(),
        Some((last, rest)) => format!("{} and {last}", rest.join(" and ")),
    }
}

/// Freeform-style description of arbitrary evidence with arbitrary object
/// names. Not one of the canonical prompts: use it for variations only.
pub fn generate_prompt(names: &[&str], evidence: &Evidence) -> Result<String> {
    if names.is_empty() {
        return Err(Error::InvalidInput("at least one object name is required".into()));
    }
    let detector = "checkerboard pattern blicket detector";
    let mut out = format!(
        "{FREEFORM_PREAMBLE}\nI have a {detector}. I have {} objects, {}.",
        names.len(),
        name_list(names, "a")
    );
    for (i, trial) in evidence.trials.iter().enumerate() {
        let placed: Vec<&str> = trial
            .placed
            .iter()
            .map(|ObjectId(ix)| {
                names.get(ix).copied().ok_or_else(|| {
                    Error::InvalidInput(format!("no name for object {}", ObjectId(ix)))
                })
            })
            .collect::<Result<_>>()?;
        let opener = if i == 0 { "First" } else { "Then" };
        let what = if placed.is_empty() {
            "nothing".to_string()
        } else {
            name_list(&placed, "the")
        };
        let result = if trial.lit {
            "does light up!"
        } else {
            "does not light up."
        };
        out.push_str(&format!(" {opener} I put {what} on the {detector} and it {result}"));
    }
    out.push('\n');
    out.push_str(FREEFORM_QUESTION);
    Ok(out)
}
