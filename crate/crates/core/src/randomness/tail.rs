//! Tail behaviour of sums of `b`-wise independent Bernoulli variables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::field::{bernoulli_threshold, PolyHash, PrimeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub t: u64,
    pub b: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub trials: u64,
    /// Fraction of trials with `|X - delta T| >= epsilon T`.
    pub empirical: f64,
    /// `(b^2 / (4 T epsilon^2))^(b/2)`.
    pub bound: f64,
    pub mean_sum: f64,
}

/// Draws `trials` fresh degree-`b-1` hashes over `field` and, for each,
/// sums the bits `h(i) < floor(delta p)` over `i = 1..=t`.
pub fn limited_independence_tail<R: Rng>(
    field: PrimeField,
    t: u64,
    b: u64,
    delta: f64,
    epsilon: f64,
    trials: u64,
    rng: &mut R,
) -> TailReport {
    let p = field.modulus();
    let threshold = bernoulli_threshold(delta, p);
    let mut hits = 0u64;
    let mut total = 0u64;
    for _ in 0..trials {
        let hash = PolyHash::new(field, (0..b).map(|_| rng.gen_range(0..p)).collect());
        let x = (1..=t).filter(|&i| hash.eval(i as u128) < threshold).count() as u64;
        total += x;
        if (x as f64 - delta * t as f64).abs() >= epsilon * t as f64 {
            hits += 1;
        }
    }
    TailReport {
        t,
        b,
        delta,
        epsilon,
        trials,
        empirical: hits as f64 / trials.max(1) as f64,
        bound: (b as f64 * b as f64 / (4.0 * t as f64 * epsilon * epsilon)).powf(b as f64 / 2.0),
        mean_sum: total as f64 / trials.max(1) as f64,
    }
}
