//! Fixtures shared by the benchmarks.

use compactqn::oracle::{random_pairs, PairSource};
use compactqn::{LmHistory, Mode, PairPolicy};

/// A full inverse-mode history of `memory` random pairs in dimension `d`.
pub fn inverse_history(d: usize, memory: usize, source: PairSource, seed: u64) -> LmHistory {
    let policy = match source {
        PairSource::S => PairPolicy::EqualsS,
        PairSource::Y => PairPolicy::EqualsY,
        PairSource::Random => PairPolicy::Custom,
    };
    let mut h = LmHistory::new(d, memory, Mode::Inverse, policy);
    for p in random_pairs(d, memory, seed, source, Mode::Inverse) {
        h.push_pair(&p.s, &p.y, Some(&p.p)).expect("pair dimensions match");
    }
    h
}

/// A deterministic probe vector.
pub fn probe(d: usize) -> Vec<f64> {
    (0..d).map(|i| (0.37 * i as f64).sin()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histories_are_full() {
        let h = inverse_history(20, 5, PairSource::Y, 1);
        assert_eq!(h.len(), 5);
        assert_eq!(probe(20).len(), 20);
    }
}
