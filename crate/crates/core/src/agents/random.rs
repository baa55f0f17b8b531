use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Policy;
use crate::env::{Action, Observation};
use crate::error::Result;

/// Every action bit is an independent fair coin.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    n_objects: usize,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(n_objects: usize, seed: u64) -> Self {
        RandomPolicy {
            n_objects,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn reset(&mut self, n_objects: usize, seed: u64) {
        *self = RandomPolicy::new(n_objects, seed);
    }

    fn act(&mut self, _history: &[Observation]) -> Result<Action> {
        let code = self.rng.random_range(0..1u32 << (self.n_objects + 1));
        Action::from_encoding(code, self.n_objects)
    }
}
