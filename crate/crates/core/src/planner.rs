//! Identification planners.
//!
//! [`min_expected_steps`] is exact expectimax over belief supports: the
//! value of a support is the expected number of checks needed to reduce it
//! to a single hypothesis. Because likelihoods are deterministic and the
//! prior is fixed for the duration of a call, the posterior is a function of
//! its support alone, so memoizing on the support is exact.
//!
//! [`greedy_tree`] unrolls the one-step information-gain policy into the same
//! tree shape so both can be compared with [`PolicyTree::expected_steps`].

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::belief::{Belief, TOLERANCE};
use crate::error::{Error, Result};
use crate::hypothesis::{Hypothesis, HypothesisSpace, ObjectSet};

/// Observation tree. Internal nodes name the subset to check; children are
/// indexed by whether the detector lit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyTree {
    Terminal {
        hypothesis: usize,
    },
    Internal {
        check: ObjectSet,
        lit: Box<PolicyTree>,
        dark: Box<PolicyTree>,
    },
}

impl PolicyTree {
    pub fn leaves(&self) -> usize {
        match self {
            PolicyTree::Terminal { .. } => 1,
            PolicyTree::Internal { lit, dark, .. } => lit.leaves() + dark.leaves(),
        }
    }

    /// Number of checks on the longest branch.
    pub fn depth(&self) -> usize {
        match self {
            PolicyTree::Terminal { .. } => 0,
            PolicyTree::Internal { lit, dark, .. } => 1 + lit.depth().max(dark.depth()),
        }
    }

    /// Follows the tree under `hidden`; returns the leaf's hypothesis index
    /// and the number of checks taken.
    pub fn simulate(&self, hidden: &Hypothesis) -> (usize, usize) {
        let mut node = self;
        let mut steps = 0;
        loop {
            match node {
                PolicyTree::Terminal { hypothesis } => return (*hypothesis, steps),
                PolicyTree::Internal { check, lit, dark } => {
                    steps += 1;
                    node = if hidden.lights(*check) { lit } else { dark };
                }
            }
        }
    }

    /// Next node after observing `lit` at an internal node.
    pub fn child(&self, lit_outcome: bool) -> Option<&PolicyTree> {
        match self {
            PolicyTree::Terminal { .. } => None,
            PolicyTree::Internal { lit, dark, .. } => Some(if lit_outcome { lit } else { dark }),
        }
    }

    /// Expected checks under `belief`, weighting each supported hypothesis.
    pub fn expected_steps(&self, belief: &Belief) -> f64 {
        let hyps = belief.space().hypotheses();
        belief
            .support()
            .into_iter()
            .map(|i| belief.weights()[i] * self.simulate(&hyps[i]).1 as f64)
            .sum()
    }

    /// Indented rendering, one line per node, read left to right:
    ///
    /// ```text
    /// check {A,B}
    ///   lit  -> check {A}
    ///     lit  -> done Disj{A}
    /// ```
    pub fn to_text(&self, space: &HypothesisSpace) -> String {
        let mut out = String::new();
        self.write_text(space, 0, "", &mut out);
        out
    }

    fn write_text(&self, space: &HypothesisSpace, depth: usize, prefix: &str, out: &mut String) {
        let indent = "  ".repeat(depth);
        match self {
            PolicyTree::Terminal { hypothesis } => {
                let label = space
                    .get(*hypothesis)
                    .map_or_else(|| format!("#{hypothesis}"), |h| h.to_string());
                let _ = writeln!(out, "{indent}{prefix}done {label}");
            }
            PolicyTree::Internal { check, lit, dark } => {
                let _ = writeln!(out, "{indent}{prefix}check {check}");
                lit.write_text(space, depth + 1, "lit  -> ", out);
                dark.write_text(space, depth + 1, "dark -> ", out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub value: f64,
    pub tree: PolicyTree,
}

type SupportKey = Vec<u64>;

fn key_of(support: &[usize], len: usize) -> SupportKey {
    let mut words = vec![0u64; len.div_ceil(64)];
    for &i in support {
        words[i / 64] |= 1 << (i % 64);
    }
    words
}

struct Expectimax<'a> {
    belief: &'a Belief,
    subsets: Vec<ObjectSet>,
    memo: HashMap<SupportKey, (f64, Option<ObjectSet>)>,
}

impl Expectimax<'_> {
    fn mass(&self, support: &[usize]) -> f64 {
        support.iter().map(|&i| self.belief.weights()[i]).sum()
    }

    fn split(&self, support: &[usize], check: ObjectSet) -> (Vec<usize>, Vec<usize>) {
        let hyps = self.belief.space().hypotheses();
        support.iter().partition(|&&i| hyps[i].lights(check))
    }

    fn solve(&mut self, support: &[usize]) -> Result<f64> {
        if support.len() <= 1 {
            return Ok(0.0);
        }
        let key = key_of(support, self.belief.weights().len());
        if let Some((v, _)) = self.memo.get(&key) {
            return Ok(*v);
        }
        let total = self.mass(support);
        let mut seen: Vec<Vec<usize>> = Vec::new();
        let mut best: Option<(f64, ObjectSet)> = None;
        for check in self.subsets.clone() {
            let (lit, dark) = self.split(support, check);
            if lit.is_empty() || dark.is_empty() || seen.contains(&lit) {
                continue;
            }
            let value = 1.0
                + self.mass(&lit) / total * self.solve(&lit)?
                + self.mass(&dark) / total * self.solve(&dark)?;
            seen.push(lit);
            if best.is_none_or(|(b, _)| value < b - TOLERANCE) {
                best = Some((value, check));
            }
        }
        let (value, check) = best.ok_or_else(|| {
            Error::InvalidInput("remaining hypotheses cannot be told apart by any check".into())
        })?;
        self.memo.insert(key, (value, Some(check)));
        Ok(value)
    }

    fn tree(&self, support: &[usize]) -> PolicyTree {
        if support.len() == 1 {
            return PolicyTree::Terminal {
                hypothesis: support[0],
            };
        }
        let key = key_of(support, self.belief.weights().len());
        let check = self.memo[&key].1.expect("solved supports record their check");
        let (lit, dark) = self.split(support, check);
        PolicyTree::Internal {
            check,
            lit: Box::new(self.tree(&lit)),
            dark: Box::new(self.tree(&dark)),
        }
    }
}

/// Minimum expected number of checks to identify the hidden hypothesis,
/// with a policy tree achieving it. Ties between checks follow the
/// canonical subset order.
pub fn min_expected_steps(belief: &Belief) -> Result<Plan> {
    let support = belief.support();
    let mut solver = Expectimax {
        belief,
        subsets: ObjectSet::all_canonical(belief.space().n_objects()),
        memo: HashMap::new(),
    };
    let value = solver.solve(&support)?;
    Ok(Plan {
        value,
        tree: solver.tree(&support),
    })
}

/// Tree obtained by always taking [`Belief::greedy_policy`].
pub fn greedy_tree(belief: &Belief) -> Result<PolicyTree> {
    if let Some(h) = belief.identified() {
        return Ok(PolicyTree::Terminal { hypothesis: h });
    }
    let check = belief.greedy_policy()?;
    Ok(PolicyTree::Internal {
        check,
        lit: Box::new(greedy_tree(&belief.update(check, true)?)?),
        dark: Box::new(greedy_tree(&belief.update(check, false)?)?),
    })
}

/// Expected checks of the greedy policy, rolled over every supported
/// hypothesis.
pub fn greedy_expected_steps(belief: &Belief) -> Result<f64> {
    Ok(greedy_tree(belief)?.expected_steps(belief))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    fn uniform(space: HypothesisSpace) -> Belief {
        Belief::uniform(Arc::new(space))
    }

    #[test]
    fn default_space_value() {
        let b = uniform(HypothesisSpace::default_space(3).unwrap());
        let plan = min_expected_steps(&b).unwrap();
        assert!((plan.value - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(plan.tree.leaves(), 6);
        assert!((plan.tree.expected_steps(&b) - plan.value).abs() < 1e-12);
    }

    #[test]
    fn point_mass_and_pair() {
        let space = Arc::new(HypothesisSpace::default_space(3).unwrap());
        let point = Belief::from_prior(Arc::clone(&space), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let plan = min_expected_steps(&point).unwrap();
        assert_eq!(plan.value, 0.0);
        assert_eq!(plan.tree, PolicyTree::Terminal { hypothesis: 2 });
        let pair = Belief::from_prior(space, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(min_expected_steps(&pair).unwrap().value, 1.0);
    }

    #[test]
    fn leaves_identify_their_hypothesis() {
        let space = HypothesisSpace::extended(3).unwrap();
        let b = uniform(space.clone());
        for tree in [min_expected_steps(&b).unwrap().tree, greedy_tree(&b).unwrap()] {
            assert_eq!(tree.leaves(), 11);
            assert!(tree.depth() < space.len());
            for (i, h) in space.hypotheses().iter().enumerate() {
                assert_eq!(tree.simulate(h).0, i);
            }
        }
    }

    #[test]
    fn text_rendering() {
        let space = HypothesisSpace::default_space(3).unwrap();
        let plan = min_expected_steps(&uniform(space.clone())).unwrap();
        let text = plan.tree.to_text(&space);
        assert!(text.starts_with("check {A,B}\n  lit  -> check {A}\n"));
        assert_eq!(text.lines().filter(|l| l.contains("done")).count(), 6);
    }

    #[test]
    fn json_round_trip() {
        let plan = min_expected_steps(&uniform(HypothesisSpace::default_space(3).unwrap())).unwrap();
        let json = serde_json::to_string(&plan.tree).unwrap();
        assert!(json.starts_with(r#"{"kind":"internal","check":[0,1]"#));
        let back: PolicyTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan.tree);
    }
}
