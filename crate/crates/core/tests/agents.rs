use std::sync::Arc;

use blicket_core::agents::{
    evaluate, q_select, q_update, run_episode, run_episode_with, train_q, BayesAgent,
    GreedyQPolicy, Policy, QHyperparams, QTable, RandomPolicy,
};
use blicket_core::belief::Belief;
use blicket_core::config::{EnvSpec, SplitSide};
use blicket_core::env::{BlicketEnv, EnvConfig, RewardMode};
use blicket_core::hypothesis::{Family, Hypothesis, HypothesisSpace, SplitMode, SplitSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn default_space() -> HypothesisSpace {
    HypothesisSpace::default_space(3).unwrap()
}

#[test]
fn q_update_algebra() {
    let hyper = QHyperparams::default();
    let mut t = QTable::new(3);
    q_update(&mut t, "s", 2, 1.0, "s'", true, &hyper);
    assert_eq!(t.get("s", 2), 0.95);

    let mut t = QTable::new(3);
    q_update(&mut t, "s", 2, 0.0, "s'", true, &hyper);
    assert_eq!(t.get("s", 2), 0.0);

    let one = QHyperparams {
        learning_rate: 1.0,
        ..hyper
    };
    let mut t = QTable::new(3);
    q_update(&mut t, "s", 2, 1.0, "s'", true, &one);
    q_update(&mut t, "s", 2, 1.0, "s'", true, &one);
    assert_eq!(t.get("s", 2), 1.0);
}

#[test]
fn q_select_extremes() {
    let mut t = QTable::new(3);
    q_update(&mut t, "s", 5, 1.0, "x", true, &QHyperparams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..50 {
        assert_eq!(q_select(&t, "s", 0.0, &mut rng).encoding(), 5);
    }
    let explored: std::collections::BTreeSet<u32> =
        (0..500).map(|_| q_select(&t, "s", 1.0, &mut rng).encoding()).collect();
    assert_eq!(explored.len(), 16);
}

#[test]
fn q_training_is_reproducible_and_table_round_trips() {
    let h = Hypothesis::disjunctive(&[2]).unwrap();
    let config = EnvConfig::new(default_space()).with_fixed(h);
    let hyper = QHyperparams::default();
    let (a, sa) = train_q(&config, &hyper, 2_000, 11).unwrap();
    let (b, sb) = train_q(&config, &hyper, 2_000, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert!(sa.converged);
    assert_eq!(sa.steps_to_convergence, sa.updates_to_convergence);

    let reloaded: QTable = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    let env = BlicketEnv::new(config).unwrap();
    let t = run_episode_with(&env, &mut GreedyQPolicy::new(reloaded), h, 0).unwrap();
    assert_eq!(t.total_reward(), 3.0);
}

#[test]
fn random_policy_is_uniform_over_actions() {
    let mut p = RandomPolicy::new(3, 4);
    let history = [blicket_core::env::Observation::initial(3)];
    let mut counts = [0usize; 16];
    for _ in 0..16_000 {
        counts[p.act(&history).unwrap().encoding() as usize] += 1;
    }
    assert!(counts.iter().all(|&c| (800..1200).contains(&c)), "{counts:?}");
}

#[test]
fn bayes_agent_under_forced_exploration_and_modality() {
    let space = default_space();
    let belief = Belief::uniform(Arc::new(space.clone()));
    for (k, mode) in [(10, RewardMode::Blicket), (0, RewardMode::Modality), (15, RewardMode::Modality)] {
        let config = EnvConfig::new(space.clone())
            .with_forced_explore(k)
            .with_reward_mode(mode);
        let env = BlicketEnv::new(config.clone()).unwrap();
        let mut agent = BayesAgent::min_step(belief.clone()).unwrap();
        for h in space.hypotheses() {
            let t = run_episode_with(&env, &mut agent, *h, 0).unwrap();
            assert_eq!(t.total_reward(), config.max_reward(), "{h} k={k} {mode:?}");
            assert!(t.quiz_entry_step().unwrap() > k);
            t.replay().unwrap();
        }
    }
}

#[test]
fn bayes_agent_with_misspecified_space_still_finishes() {
    // Own checks always split the support in two, so the belief never
    // empties; the agent just settles on the wrong hypothesis.
    let belief = Belief::uniform(Arc::new(default_space()));
    let env = BlicketEnv::new(EnvConfig::new(HypothesisSpace::extended(3).unwrap())).unwrap();
    let hidden = Hypothesis::disjunctive(&[0, 1, 2]).unwrap();
    let mut agent = BayesAgent::greedy(belief);
    let t = run_episode_with(&env, &mut agent, hidden, 0).unwrap();
    assert!(t.is_complete());
    assert!(t.total_reward() < 3.0);
    assert_eq!(agent.belief().support_len(), 1);
}

#[test]
fn evaluation_rows_and_csv() {
    let space = default_space();
    let belief = Belief::uniform(Arc::new(space));
    let envs: Vec<(String, BlicketEnv)> = [SplitSide::Train, SplitSide::Test]
        .into_iter()
        .map(|side| {
            let spec = EnvSpec {
                split: Some(SplitSpec::new(SplitMode::LeaveOneOutConj, vec![5])),
                split_side: side,
                ..EnvSpec::default()
            };
            (format!("{side:?}"), BlicketEnv::new(spec.build(3).unwrap()).unwrap())
        })
        .collect();
    let mut agent = BayesAgent::greedy(belief);
    let eval = evaluate(&mut agent, &envs, 20).unwrap();
    assert_eq!(eval.rows.len(), 2);
    assert_eq!(eval.pooled.n_episodes, 40);
    assert_eq!(eval.pooled.mean_reward, 3.0);
    assert_eq!(eval.pooled.std_reward, 0.0);
    assert_eq!(eval.pooled.fca, 1.0);
    assert_eq!(eval.trajectories.len(), 40);

    let mut buf = Vec::new();
    eval.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("config,policy,mean_reward,std_reward,fca,n_episodes"));
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().last().unwrap().starts_with("pooled,bayes-greedy,3.0,0.0,1.0,40"));
}

#[test]
fn random_policy_judgment_is_a_coin_flip() {
    let env = BlicketEnv::new(EnvSpec::family(Family::Default).build(0).unwrap()).unwrap();
    let mut p = RandomPolicy::new(3, 0);
    let eval = evaluate(&mut p, &[("default".into(), env)], 4_000).unwrap();
    assert!((eval.pooled.fca - 0.5).abs() < 0.03, "{}", eval.pooled.fca);
    assert!(eval.pooled.mean_reward.abs() < 0.15);
}

#[test]
fn evaluate_needs_environments() {
    let mut p = RandomPolicy::new(3, 0);
    assert!(evaluate(&mut p, &[], 1).is_err());
}

#[test]
fn run_episode_is_seed_deterministic() {
    let env = BlicketEnv::new(EnvConfig::new(HypothesisSpace::extended(3).unwrap())).unwrap();
    let a = run_episode(&env, &mut RandomPolicy::new(3, 0), 77).unwrap();
    let b = run_episode(&env, &mut RandomPolicy::new(3, 999), 77).unwrap();
    assert_eq!(a, b);
}
