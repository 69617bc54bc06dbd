//! Component sampling: random reshuffling permutations and
//! with-replacement draws.
//!
//! All randomness comes from ChaCha8 streams keyed by the run seed. The
//! stream id packs a purpose tag, the player and the epoch, so each player
//! gets an independent permutation per epoch and runs can execute in
//! parallel without shared generator state.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamPurpose {
    Permutation = 1,
    Draw = 2,
    Init = 3,
    Perturb = 4,
    GameParams = 5,
    Constants = 6,
    Graph = 7,
    Variance = 8,
}

/// Generator for `(seed, purpose, player, epoch)`.
pub fn stream_rng(seed: u64, purpose: StreamPurpose, player: usize, epoch: u64) -> ChaCha8Rng {
    assert!(player < 1 << 24, "player index {player} exceeds the stream layout");
    assert!(epoch < 1 << 32, "epoch {epoch} exceeds the stream layout");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | ((player as u64) << 32) | epoch);
    rng
}

/// How components are visited within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplingMode {
    /// Random reshuffling: one fresh permutation per player per epoch.
    Rr,
    /// With-replacement SGD: `m` i.i.d. uniform draws per player per epoch.
    Sgd,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMode::Rr => "rr",
            SamplingMode::Sgd => "sgd",
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rr" => Ok(SamplingMode::Rr),
            "sgd" => Ok(SamplingMode::Sgd),
            other => Err(format!("unknown sampling mode `{other}` (allowed: rr, sgd)")),
        }
    }
}

/// A permutation of the zero-based component indices `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pub order: Vec<usize>,
}

impl Permutation {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.order.len()];
        self.order.iter().all(|&k| k < seen.len() && !std::mem::replace(&mut seen[k], true))
    }
}

/// Uniform permutation of `0..m` (Fisher-Yates).
pub fn fresh_permutation<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Permutation {
    assert!(m >= 1, "need at least one component");
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    Permutation { order }
}

/// Uniform index in `0..m`.
pub fn draw_with_replacement<R: Rng + ?Sized>(rng: &mut R, m: usize) -> usize {
    assert!(m >= 1, "need at least one component");
    rng.gen_range(0..m)
}

/// The `m` component indices player `player` visits in `epoch`.
pub fn epoch_indices(seed: u64, mode: SamplingMode, player: usize, epoch: u64, m: usize) -> Vec<usize> {
    match mode {
        SamplingMode::Rr => {
            let mut rng = stream_rng(seed, StreamPurpose::Permutation, player, epoch);
            fresh_permutation(&mut rng, m).order
        }
        SamplingMode::Sgd => {
            let mut rng = stream_rng(seed, StreamPurpose::Draw, player, epoch);
            (0..m).map(|_| draw_with_replacement(&mut rng, m)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_component() {
        let mut rng = stream_rng(1, StreamPurpose::Permutation, 0, 0);
        assert_eq!(fresh_permutation(&mut rng, 1).order, vec![0]);
        for _ in 0..10 {
            assert_eq!(draw_with_replacement(&mut rng, 1), 0);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<_> = (0..20).map(|e| epoch_indices(9, SamplingMode::Rr, 2, e, 12)).collect();
        let b: Vec<_> = (0..20).map(|e| epoch_indices(9, SamplingMode::Rr, 2, e, 12)).collect();
        assert_eq!(a, b);
        let other_player: Vec<_> = (0..20).map(|e| epoch_indices(9, SamplingMode::Rr, 3, e, 12)).collect();
        assert_ne!(a, other_player);
        let d1: Vec<_> = (0..5).map(|e| epoch_indices(4, SamplingMode::Sgd, 0, e, 6)).collect();
        let d2: Vec<_> = (0..5).map(|e| epoch_indices(4, SamplingMode::Sgd, 0, e, 6)).collect();
        assert_eq!(d1, d2);
    }

    #[test]
    fn draw_frequencies_uniform() {
        // law of large numbers: 1e5 draws, m = 4, each frequency 0.25 +- 0.01
        let mut rng = stream_rng(123, StreamPurpose::Draw, 0, 0);
        let mut counts = [0usize; 4];
        for _ in 0..100_000 {
            counts[draw_with_replacement(&mut rng, 4)] += 1;
        }
        for c in counts {
            let f = c as f64 / 1e5;
            assert!((f - 0.25).abs() <= 0.01, "frequency {f}");
        }
    }

    #[test]
    fn permutation_positions_uniform() {
        // chi-square style check on the first position, m = 5
        let mut counts = [0usize; 5];
        for e in 0..50_000u64 {
            counts[epoch_indices(77, SamplingMode::Rr, 0, e, 5)[0]] += 1;
        }
        for c in counts {
            assert!((c as f64 / 50_000.0 - 0.2).abs() < 0.01);
        }
    }

    #[test]
    fn bijection_check() {
        assert!(Permutation { order: vec![2, 0, 1] }.is_bijection());
        assert!(!Permutation { order: vec![0, 0, 1] }.is_bijection());
        assert!(!Permutation { order: vec![0, 3, 1] }.is_bijection());
    }

    proptest! {
        #[test]
        fn permutations_are_bijections(seed in any::<u64>(), m in 1usize..40, player in 0usize..8, epoch in 0u64..10_000) {
            let order = epoch_indices(seed, SamplingMode::Rr, player, epoch, m);
            let mut sorted = order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..m).collect::<Vec<_>>());
        }
    }
}
