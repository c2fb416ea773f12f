//! Exact seed-bit accounting.

use num_bigint::BigUint;
use num_traits::FromPrimitive;
use serde::{Serialize, Serializer};

use super::field::next_prime;
use super::params::TheoryShape;
use crate::error::{Error, Result};

fn decimal<S: Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_str_radix(10))
}

/// Bits of seed consumed, split by role. Each coefficient costs `word_bits`
/// bits, the bit length of the field prime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RandomnessLedger {
    pub word_bits: u64,
    #[serde(serialize_with = "decimal")]
    pub hbar: BigUint,
    #[serde(serialize_with = "decimal")]
    pub b: BigUint,
    /// Bernoulli and timestep hashes: `hbar * 2 * b * word_bits`.
    #[serde(serialize_with = "decimal")]
    pub bits_s1: BigUint,
    /// Sampler hashes: `hbar * b * word_bits`. The draw budget itself costs nothing.
    #[serde(serialize_with = "decimal")]
    pub bits_s2: BigUint,
    #[serde(serialize_with = "decimal")]
    pub total_bits: BigUint,
}

impl RandomnessLedger {
    pub fn from_layout(hbar: BigUint, b: BigUint, word_bits: u64) -> Self {
        let per_family = &hbar * &b * BigUint::from(word_bits);
        let bits_s1 = &per_family * 2u32;
        let bits_s2 = per_family;
        let total_bits = &bits_s1 + &bits_s2;
        Self {
            word_bits,
            hbar,
            b,
            bits_s1,
            bits_s2,
            total_bits,
        }
    }

    /// Number of coefficient words in the layout, `3 * hbar * b`.
    pub fn words(&self) -> BigUint {
        &self.hbar * &self.b * 3u32
    }
}

/// Ledger for theory-mode parameters at an arbitrary label universe, with
/// every integer kept exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryLedger {
    pub epsilon: f64,
    pub d: u64,
    pub rho: f64,
    pub ell: u64,
    #[serde(serialize_with = "decimal")]
    pub universe: BigUint,
    pub delta: f64,
    pub phi: f64,
    #[serde(serialize_with = "decimal")]
    pub sample_budget: BigUint,
    pub ledger: RandomnessLedger,
}

impl TheoryLedger {
    pub fn new(epsilon: f64, d: u64, rho: f64, ell: u64, universe: &BigUint) -> Result<Self> {
        let shape = TheoryShape::new(epsilon, d, rho, ell)?;
        let big = |name: &str, x: f64| {
            BigUint::from_f64(x).ok_or_else(|| Error::Overflow(format!("{name} = {x:e} is not finite")))
        };
        let target = (universe * BigUint::from(ell)) << 10usize;
        let target = target.max(BigUint::from(1u64 << 31));
        let word_bits = next_prime(&target).bits();
        Ok(Self {
            epsilon,
            d,
            rho,
            ell,
            universe: universe.clone(),
            delta: shape.delta,
            phi: shape.phi,
            sample_budget: big("sample_budget", shape.sample_budget)?,
            ledger: RandomnessLedger::from_layout(big("hbar", shape.hbar)?, big("b", shape.b)?, word_bits),
        })
    }
}
