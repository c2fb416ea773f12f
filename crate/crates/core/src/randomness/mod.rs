//! Limited-independence randomness: polynomial hash families over a prime
//! field, the seed bundle that holds them, and seed-bit accounting.

pub mod field;
pub mod ledger;
pub mod params;
pub mod seed;
pub mod tail;

pub use field::{PolyHash, PrimeField};
pub use ledger::{RandomnessLedger, TheoryLedger};
pub use params::{Mode, Params};
pub use seed::{field_for, Phase, SeedBundle, SeedHeader, MAGIC};
pub use tail::{limited_independence_tail, TailReport};
