mod common;

use std::sync::Arc;

use blicket_core::agents::{run_episode, RandomPolicy};
use blicket_core::belief::Belief;
use blicket_core::env::{BlicketEnv, EnvConfig, RewardMode};
use blicket_core::hypothesis::{Evidence, Form, Hypothesis, HypothesisSpace, ObjectSet};
use blicket_core::prompts::{parse_answer, render_prompt, score_answer, Condition, Style};
use common::{ref_lights, ref_min_expected, to_f64};
use proptest::prelude::*;

fn hypothesis(n: usize) -> impl Strategy<Value = Hypothesis> {
    (any::<bool>(), 1u32..(1 << n)).prop_filter_map("conjunctive needs two blickets", |(conj, mask)| {
        let form = if conj { Form::Conjunctive } else { Form::Disjunctive };
        Hypothesis::new(form, ObjectSet::from_mask(mask)).ok()
    })
}

fn trials(n: usize, len: usize) -> impl Strategy<Value = Vec<(u32, bool)>> {
    prop::collection::vec((0u32..(1 << n), any::<bool>()), 0..len)
}

fn space() -> impl Strategy<Value = HypothesisSpace> {
    prop_oneof![
        Just(HypothesisSpace::default_space(3).unwrap()),
        Just(HypothesisSpace::extended(3).unwrap()),
        Just(HypothesisSpace::default_space(4).unwrap()),
    ]
}

proptest! {
    #[test]
    fn detector_is_monotone(h in hypothesis(5), a in 0u32..32, b in 0u32..32) {
        let small = ObjectSet::from_mask(a & b);
        let large = ObjectSet::from_mask(a);
        if h.lights(small) {
            prop_assert!(h.lights(large));
        }
    }

    #[test]
    fn detector_matches_reference(h in hypothesis(5), placed in 0u32..32) {
        let r = (h.threshold() as u32, h.blickets().mask());
        prop_assert_eq!(h.lights(ObjectSet::from_mask(placed)), ref_lights(r, placed));
    }

    #[test]
    fn consistency_ignores_trial_order(h in hypothesis(3), ts in trials(3, 8), rot in 0usize..8) {
        let mut forward = Evidence::new();
        for &(m, lit) in &ts {
            forward.push(ObjectSet::from_mask(m), lit);
        }
        let mut rotated = Evidence::new();
        let k = if ts.is_empty() { 0 } else { rot % ts.len() };
        for &(m, lit) in ts[k..].iter().chain(&ts[..k]) {
            rotated.push(ObjectSet::from_mask(m), lit);
        }
        prop_assert_eq!(h.consistent(&forward), h.consistent(&rotated));
    }

    #[test]
    fn belief_support_only_shrinks(space in space(), hidden_ix in 0usize..100, checks in prop::collection::vec(0u32..16, 0..6)) {
        let hidden = space.hypotheses()[hidden_ix % space.len()];
        let n = space.n_objects();
        let mut b = Belief::uniform(Arc::new(space));
        for m in checks {
            let placed = ObjectSet::from_mask(m & ((1 << n) - 1));
            let before = b.support();
            prop_assert!(b.info_gain(placed) >= 0.0);
            b = b.update(placed, hidden.lights(placed)).unwrap();
            let after = b.support();
            prop_assert!(after.iter().all(|i| before.contains(i)));
            prop_assert!((b.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(after.contains(&b.space().index_of(&hidden).unwrap()));
        }
    }

    #[test]
    fn update_is_idempotent(space in space(), hidden_ix in 0usize..100, m in 0u32..16) {
        let hidden = space.hypotheses()[hidden_ix % space.len()];
        let placed = ObjectSet::from_mask(m & ((1 << space.n_objects()) - 1));
        let b = Belief::uniform(Arc::new(space));
        let once = b.update(placed, hidden.lights(placed)).unwrap();
        let twice = once.update(placed, hidden.lights(placed)).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn planner_matches_reference_on_random_supports(keep in 1u32..(1 << 11)) {
        let space = HypothesisSpace::extended(3).unwrap();
        let prior: Vec<f64> = (0..11).map(|i| f64::from(keep >> i & 1)).collect();
        let belief = Belief::from_prior(Arc::new(space.clone()), &prior).unwrap();
        let reference: Vec<(u32, u32)> = space
            .hypotheses()
            .iter()
            .map(|h| (h.threshold() as u32, h.blickets().mask()))
            .collect();
        let support: Vec<usize> = (0..11).filter(|i| keep >> i & 1 == 1).collect();
        let oracle = to_f64(ref_min_expected(&reference, 3, &support));
        let plan = blicket_core::planner::min_expected_steps(&belief).unwrap();
        prop_assert!((plan.value - oracle).abs() < 1e-9);
        let greedy = blicket_core::planner::greedy_expected_steps(&belief).unwrap();
        prop_assert!(greedy >= plan.value - 1e-9);
    }

    #[test]
    fn random_episodes_replay(seed in any::<u64>(), k in 0usize..20, modality in any::<bool>()) {
        let mode = if modality { RewardMode::Modality } else { RewardMode::Blicket };
        let config = EnvConfig::new(HypothesisSpace::extended(3).unwrap())
            .with_forced_explore(k)
            .with_reward_mode(mode);
        let env = BlicketEnv::new(config).unwrap();
        let mut policy = RandomPolicy::new(3, 0);
        let t = run_episode(&env, &mut policy, seed).unwrap();
        prop_assert!(t.is_complete());
        prop_assert!(t.len() <= 25);
        prop_assert!(t.quiz_entry_step().unwrap() > k);
        prop_assert!(t.replay().is_ok());
    }

    #[test]
    fn extra_wrong_names_never_help(extra in prop::sample::subsequence(blicket_core::prompts::OBJECT_NAMES.to_vec(), 0..9)) {
        let doc = render_prompt(Condition::new(true, Form::Conjunctive, Style::Freeform));
        let base = parse_answer("The teal prism is a blicket.", 2);
        let mut more = base.clone();
        more.blickets_claimed.extend(extra.iter().map(|s| s.to_string()));
        let (a, b) = (score_answer(&base, &doc), score_answer(&more, &doc));
        prop_assert!(b.n_wrong >= a.n_wrong);
        let added_truth = extra.iter().filter(|n| doc.truth_blickets.contains(**n) && **n != "teal prism").count();
        prop_assert_eq!(b.n_correct, a.n_correct + added_truth);
    }
}

#[test]
fn perfect_synthetic_replies_score_fully() {
    for c in Condition::all() {
        let doc = render_prompt(c);
        let names: Vec<&str> = doc.truth_blickets.iter().map(String::as_str).collect();
        let machine = match c.structure {
            Form::Conjunctive => "striped",
            Form::Disjunctive => "dotted",
        };
        let reply = format!("The blickets are the {}. It behaves like the {machine} machine.", names.join(" and the "));
        let score = score_answer(&parse_answer(&reply, 2), &doc);
        assert_eq!(score.n_correct, doc.truth_blickets.len(), "{c}");
        assert_eq!(score.n_wrong, 0);
        let want = if c.hypotheses_given {
            blicket_core::prompts::StructureScore::Correct
        } else {
            blicket_core::prompts::StructureScore::NotApplicable
        };
        assert_eq!(score.structure, want);
    }
}

#[test]
fn rendering_is_pure() {
    for c in Condition::all() {
        assert_eq!(render_prompt(c), render_prompt(c));
    }
}
