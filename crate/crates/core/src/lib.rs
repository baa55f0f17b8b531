//! Blicket-detector benchmark for causal overhypothesis learning.
//!
//! An agent explores a detector that lights up for some combinations of
//! objects, then is quizzed on which objects are blickets. The crate
//! provides the episode simulator, an exact Bayesian belief and planner,
//! baseline agents (random, tabular Q-learning, Bayes-optimal), trajectory
//! export for offline learners, and a prompt harness for language models.
//!
//! ```
//! use blicket_core::hypothesis::{Hypothesis, ObjectSet};
//!
//! let h = Hypothesis::conjunctive(&[0, 1])?;
//! assert!(h.lights(ObjectSet::from_indices([0, 1])?));
//! assert!(!h.lights(ObjectSet::from_indices([0, 2])?));
//! # Ok::<(), blicket_core::Error>(())
//! ```

pub mod agents;
pub mod belief;
pub mod config;
pub mod env;
mod error;
pub mod hypothesis;
pub mod planner;
pub mod prompts;
pub mod trajectory;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/hypotheses.md")]
    mod hypotheses {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/belief.md")]
    mod belief {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/prompts.md")]
    mod prompts {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
}
