//! Reproducible random streams keyed by `(seed, stream id)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{Game, MixedAction, MixedProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// A profile drawn uniformly from the interior of the product of simplices.
pub fn interior_profile(game: &Game, stream: RngStream) -> MixedProfile {
    let mut rng = stream.rng();
    let mut draw = |n: usize| {
        let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = w.iter().sum();
        MixedAction::from_raw(w.into_iter().map(|v| v / s).collect())
    };
    let x1 = draw(game.rows());
    MixedProfile::new(x1, draw(game.cols()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_keys_give_identical_draws() {
        let a: Vec<u64> = (0..8).map({
            let mut r = RngStream::new(7, 3).rng();
            move |_| r.gen()
        }).collect();
        let b: Vec<u64> = (0..8).map({
            let mut r = RngStream::new(7, 3).rng();
            move |_| r.gen()
        }).collect();
        let c: Vec<u64> = (0..8).map({
            let mut r = RngStream::new(7, 4).rng();
            move |_| r.gen()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
