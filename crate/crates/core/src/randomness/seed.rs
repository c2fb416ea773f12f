//! Seed bundles: the per-phase hash families and their byte layout.
//!
//! Layout: magic `LRPO1`; a params block of `epsilon d rho ell delta b hbar`
//! (little-endian f64/u64); then for each phase `h = 1..=hbar` the `b`
//! Bernoulli coefficients followed by the `b` timestep coefficients; then for
//! each phase the `b` sampler coefficients. Every coefficient is one word of
//! `ceil(bits(p)/8)` bytes, big-endian, reduced mod `p`.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::field::{bernoulli_threshold, next_prime, PolyHash, PrimeField};
use super::ledger::RandomnessLedger;
use super::params::Params;
use crate::error::{Error, Result};
use crate::graph::Label;

pub const MAGIC: &[u8; 5] = b"LRPO1";
const HEADER_LEN: usize = MAGIC.len() + 7 * 8;

/// Phase of a vertex: the first phase whose Bernoulli bit fired, or
/// `Unphased`, which orders after every phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    At(u32),
    Unphased,
}

impl Phase {
    pub fn index(self) -> Option<u32> {
        match self {
            Phase::At(h) => Some(h),
            Phase::Unphased => None,
        }
    }
}

/// Field for a label universe `N` and diffusion length `ell`: the smallest
/// prime `p >= max(N * ell * 2^10, 2^31)`.
pub fn field_for(universe: u64, ell: u64) -> Result<PrimeField> {
    let target = (BigUint::from(universe) * BigUint::from(ell)) << 10usize;
    let target = target.max(BigUint::from(1u64 << 31));
    let p = next_prime(&target);
    PrimeField::from_biguint(&p).ok_or_else(|| {
        Error::Params(format!(
            "field prime for N = {universe}, ell = {ell} exceeds 127 bits"
        ))
    })
}

/// The fields of [`Params`] fixed by a seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedHeader {
    pub epsilon: f64,
    pub d: u64,
    pub rho: f64,
    pub ell: u64,
    pub delta: f64,
    pub b: u64,
    pub hbar: u64,
}

impl SeedHeader {
    pub fn of(params: &Params) -> Self {
        Self {
            epsilon: params.epsilon,
            d: params.d,
            rho: params.rho,
            ell: params.ell,
            delta: params.delta,
            b: params.b,
            hbar: params.hbar,
        }
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.epsilon.to_le_bytes());
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend_from_slice(&self.rho.to_le_bytes());
        out.extend_from_slice(&self.ell.to_le_bytes());
        out.extend_from_slice(&self.delta.to_le_bytes());
        out.extend_from_slice(&self.b.to_le_bytes());
        out.extend_from_slice(&self.hbar.to_le_bytes());
    }

    fn read(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Seed("missing LRPO1 header".into()));
        }
        let word = |i: usize| -> [u8; 8] {
            let at = MAGIC.len() + 8 * i;
            bytes[at..at + 8].try_into().expect("8-byte slice")
        };
        Ok(Self {
            epsilon: f64::from_le_bytes(word(0)),
            d: u64::from_le_bytes(word(1)),
            rho: f64::from_le_bytes(word(2)),
            ell: u64::from_le_bytes(word(3)),
            delta: f64::from_le_bytes(word(4)),
            b: u64::from_le_bytes(word(5)),
            hbar: u64::from_le_bytes(word(6)),
        })
    }

    fn same_as(&self, other: &Self) -> bool {
        self.epsilon.to_bits() == other.epsilon.to_bits()
            && self.d == other.d
            && self.rho.to_bits() == other.rho.to_bits()
            && self.ell == other.ell
            && self.delta.to_bits() == other.delta.to_bits()
            && self.b == other.b
            && self.hbar == other.hbar
    }
}

/// All randomness consumed by one partition: Bernoulli and timestep hashes
/// per phase (S1) and findr sampler hashes per phase (S2).
#[derive(Debug, Clone, PartialEq)]
pub struct SeedBundle {
    header: SeedHeader,
    field: PrimeField,
    threshold: u128,
    sample_budget: u64,
    bernoulli: Vec<PolyHash>,
    timestep: Vec<PolyHash>,
    sampler: Vec<PolyHash>,
}

impl SeedBundle {
    /// Builds a bundle from explicit coefficient lists, one list of `b`
    /// coefficients per phase in each family.
    pub fn from_coefficients(
        params: &Params,
        field: PrimeField,
        bernoulli: Vec<Vec<u128>>,
        timestep: Vec<Vec<u128>>,
        sampler: Vec<Vec<u128>>,
    ) -> Result<Self> {
        let hbar = params.hbar as usize;
        for (name, fam) in [("bernoulli", &bernoulli), ("timestep", &timestep), ("sampler", &sampler)] {
            if fam.len() != hbar || fam.iter().any(|c| c.len() as u64 != params.b) {
                return Err(Error::Seed(format!(
                    "{name} family must hold {hbar} lists of {} coefficients",
                    params.b
                )));
            }
        }
        let wrap = |fam: Vec<Vec<u128>>| fam.into_iter().map(|c| PolyHash::new(field, c)).collect();
        Ok(Self {
            header: SeedHeader::of(params),
            field,
            threshold: bernoulli_threshold(params.delta, field.modulus()),
            sample_budget: params.sample_budget,
            bernoulli: wrap(bernoulli),
            timestep: wrap(timestep),
            sampler: wrap(sampler),
        })
    }

    /// Draws every coefficient uniformly from `[0, p)`.
    pub fn from_rng<R: Rng>(rng: &mut R, params: &Params, universe: u64) -> Result<Self> {
        params.validate()?;
        let field = field_for(universe, params.ell)?;
        let p = field.modulus();
        let mut draw = || -> Vec<u128> { (0..params.b).map(|_| rng.gen_range(0..p)).collect() };
        // draw order matches the byte layout: per phase, bernoulli then timestep
        let mut bernoulli = Vec::with_capacity(params.hbar as usize);
        let mut timestep = Vec::with_capacity(params.hbar as usize);
        for _ in 0..params.hbar {
            bernoulli.push(draw());
            timestep.push(draw());
        }
        let sampler = (0..params.hbar).map(|_| draw()).collect();
        Self::from_coefficients(params, field, bernoulli, timestep, sampler)
    }

    /// Expands a short key: ChaCha20 seeded with SHA-256 of the key.
    pub fn from_key(key: &[u8], params: &Params, universe: u64) -> Result<Self> {
        let mut rng = ChaCha20Rng::from_seed(Sha256::digest(key).into());
        Self::from_rng(&mut rng, params, universe)
    }

    /// Parses a full serialized seed; its params block must agree with `params`.
    pub fn from_bytes(bytes: &[u8], params: &Params, universe: u64) -> Result<Self> {
        params.validate()?;
        let header = SeedHeader::read(bytes)?;
        if !header.same_as(&SeedHeader::of(params)) {
            return Err(Error::Seed(format!(
                "seed params {header:?} disagree with requested params"
            )));
        }
        let field = field_for(universe, params.ell)?;
        let w = field.word_bytes();
        let hbar = params.hbar as usize;
        let b = params.b as usize;
        let expect = HEADER_LEN + 3 * hbar * b * w;
        if bytes.len() != expect {
            return Err(Error::Seed(format!(
                "expected {expect} bytes for this layout, found {}",
                bytes.len()
            )));
        }
        let mut words = bytes[HEADER_LEN..].chunks_exact(w).map(|chunk| {
            let v = chunk.iter().fold(0u128, |acc, &x| (acc << 8) | x as u128);
            if v >= field.modulus() {
                Err(Error::Seed(format!("coefficient {v} not reduced mod p")))
            } else {
                Ok(v)
            }
        });
        let mut take = |count: usize| -> Result<Vec<u128>> { (&mut words).take(count).collect() };
        let mut bernoulli = Vec::with_capacity(hbar);
        let mut timestep = Vec::with_capacity(hbar);
        for _ in 0..hbar {
            bernoulli.push(take(b)?);
            timestep.push(take(b)?);
        }
        let sampler = (0..hbar).map(|_| take(b)).collect::<Result<Vec<_>>>()?;
        Self::from_coefficients(params, field, bernoulli, timestep, sampler)
    }

    /// Accepts either a full serialized seed or a short key, hex-encoded.
    pub fn from_hex(text: &str, params: &Params, universe: u64) -> Result<Self> {
        let bytes = hex::decode(text.trim()).map_err(|e| Error::Seed(format!("bad hex: {e}")))?;
        if bytes.starts_with(MAGIC) {
            Self::from_bytes(&bytes, params, universe)
        } else {
            Self::from_key(&bytes, params, universe)
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let w = self.field.word_bytes();
        let mut out = Vec::with_capacity(HEADER_LEN + 3 * self.bernoulli.len() * self.header.b as usize * w);
        self.header.write(&mut out);
        let mut put = |c: u128| out.extend_from_slice(&c.to_be_bytes()[16 - w..]);
        for (bern, ts) in self.bernoulli.iter().zip(&self.timestep) {
            bern.coeffs().iter().for_each(|&c| put(c));
            ts.coeffs().iter().for_each(|&c| put(c));
        }
        for s in &self.sampler {
            s.coeffs().iter().for_each(|&c| put(c));
        }
        out
    }

    /// Hex SHA-256 of the serialized seed.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn header(&self) -> SeedHeader {
        self.header
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn hbar(&self) -> u32 {
        self.bernoulli.len() as u32
    }

    pub fn sample_budget(&self) -> u64 {
        self.sample_budget
    }

    fn check_phase(&self, h: u32) -> Result<usize> {
        if h == 0 || h > self.hbar() {
            return Err(Error::Range {
                what: "phase",
                value: h as u64,
                lo: 1,
                hi: self.hbar() as u64,
            });
        }
        Ok(h as usize - 1)
    }

    /// Bernoulli bit `H_v^(h)`: `h_h(v) < floor(delta * p)`.
    pub fn phase_bit(&self, h: u32, v: Label) -> Result<bool> {
        let i = self.check_phase(h)?;
        Ok(self.bernoulli[i].eval(v as u128) < self.threshold)
    }

    pub fn phase_of(&self, v: Label) -> Phase {
        self.bernoulli
            .iter()
            .position(|hash| hash.eval(v as u128) < self.threshold)
            .map_or(Phase::Unphased, |i| Phase::At(i as u32 + 1))
    }

    /// Diffusion length `T_v^(h) = 1 + (h_h(v) mod ell)`.
    pub fn timestep(&self, h: u32, v: Label) -> Result<u64> {
        let i = self.check_phase(h)?;
        Ok(1 + (self.timestep[i].eval(v as u128) % self.header.ell as u128) as u64)
    }

    /// The `j`-th findr draw of phase `h`: a vertex index in `[1, n]`.
    pub fn sample_vertex(&self, h: u32, j: u64, n: usize) -> Result<usize> {
        let i = self.check_phase(h)?;
        if j == 0 || j > self.sample_budget {
            return Err(Error::Budget {
                j,
                budget: self.sample_budget,
            });
        }
        if n == 0 {
            return Err(Error::Domain("cannot sample from an empty graph".into()));
        }
        Ok(1 + (self.sampler[i].eval(j as u128) % n as u128) as usize)
    }

    pub fn ledger(&self) -> RandomnessLedger {
        RandomnessLedger::from_layout(
            BigUint::from(self.hbar()),
            BigUint::from(self.header.b),
            self.field.bits() as u64,
        )
    }
}
