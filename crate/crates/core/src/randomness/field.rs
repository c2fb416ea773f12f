//! Prime-field arithmetic and polynomial hashing.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Bases for Miller–Rabin; deterministic for every n < 3.3·10^24.
const MR_BASES: [u32; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

const SMALL_PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

pub fn is_prime(n: &BigUint) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for &sp in &SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if n == &sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'bases: for &a in &MR_BASES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `>= n`.
pub fn next_prime(n: &BigUint) -> BigUint {
    let two = BigUint::from(2u32);
    if n <= &two {
        return two;
    }
    let mut c = n.clone();
    if (&c % &two).is_zero() {
        c += 1u32;
    }
    while !is_prime(&c) {
        c += 2u32;
    }
    c
}

/// Arithmetic modulo a prime `p < 2^127`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    p: u128,
}

impl PrimeField {
    pub fn new(p: u128) -> Self {
        assert!((2..1 << 127).contains(&p), "modulus out of supported range");
        Self { p }
    }

    pub fn from_biguint(p: &BigUint) -> Option<Self> {
        let p = p.to_u128()?;
        ((2..1 << 127).contains(&p)).then_some(Self { p })
    }

    pub fn modulus(&self) -> u128 {
        self.p
    }

    /// Bit length of `p`, which is also the bit cost of one coefficient.
    pub fn bits(&self) -> u32 {
        128 - self.p.leading_zeros()
    }

    /// Bytes per serialized coefficient word.
    pub fn word_bytes(&self) -> usize {
        (self.bits() as usize).div_ceil(8)
    }

    #[inline]
    pub fn add(&self, a: u128, b: u128) -> u128 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn mul(&self, a: u128, b: u128) -> u128 {
        if self.p <= u64::MAX as u128 {
            return mul_mod_u64(a as u64, b as u64, self.p as u64) as u128;
        }
        let mut r = 0u128;
        for i in (0..128 - b.leading_zeros()).rev() {
            r = self.add(r, r);
            if (b >> i) & 1 == 1 {
                r = self.add(r, a);
            }
        }
        r
    }

    #[inline]
    pub fn reduce(&self, x: u128) -> u128 {
        x % self.p
    }
}

#[inline]
fn mul_mod_u64(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

/// `h(x) = c_0 + c_1 x + ... + c_{b-1} x^{b-1} mod p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyHash {
    field: PrimeField,
    coeffs: Vec<u128>,
}

impl PolyHash {
    /// Coefficients are reduced mod `p`.
    pub fn new(field: PrimeField, coeffs: Vec<u128>) -> Self {
        let coeffs = coeffs.into_iter().map(|c| field.reduce(c)).collect();
        Self { field, coeffs }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn coeffs(&self) -> &[u128] {
        &self.coeffs
    }

    pub fn eval(&self, x: u128) -> u128 {
        let f = self.field;
        let x = f.reduce(x);
        self.coeffs
            .iter()
            .rev()
            .fold(0u128, |acc, &c| f.add(f.mul(acc, x), c))
    }
}

/// `floor(delta * p)`, computed exactly from the binary expansion of `delta`.
pub fn bernoulli_threshold(delta: f64, p: u128) -> u128 {
    assert!((0.0..=1.0).contains(&delta), "delta must lie in [0, 1]");
    if delta == 0.0 {
        return 0;
    }
    if delta == 1.0 {
        return p;
    }
    let bits = delta.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let (mantissa, e) = if exp == 0 {
        (bits & ((1 << 52) - 1), -1074)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), exp - 1075)
    };
    // delta = mantissa * 2^e with e < 0
    let prod = BigUint::from(mantissa) * BigUint::from(p);
    let t = prod >> (-e) as usize;
    t.to_u128().expect("threshold below p")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_is_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|i| i * i <= n).all(|i| !n.is_multiple_of(i))
    }

    #[test]
    fn primality_matches_trial_division() {
        for n in 0..5000u64 {
            assert_eq!(is_prime(&BigUint::from(n)), naive_is_prime(n), "n = {n}");
        }
        // strong pseudoprimes to several small bases
        for n in [3215031751u64, 2152302898747, 3474749660383, 341550071728321] {
            assert!(!is_prime(&BigUint::from(n)));
        }
        assert!(is_prime(&BigUint::from((1u128 << 61) - 1)));
        assert!(is_prime(&BigUint::from((1u128 << 89) - 1)));
    }

    #[test]
    fn next_prime_small() {
        let np = |n: u32| next_prime(&BigUint::from(n));
        assert_eq!(np(0), BigUint::from(2u32));
        assert_eq!(np(14), BigUint::from(17u32));
        assert_eq!(np(17), BigUint::from(17u32));
        assert_eq!(next_prime(&BigUint::from(1u64 << 31)), BigUint::from(2147483659u64));
    }

    #[test]
    fn hand_evaluations() {
        let h = PolyHash::new(PrimeField::new(7), vec![3, 2]);
        assert_eq!(h.eval(0), 3);
        assert_eq!(h.eval(2), 0);
        let h = PolyHash::new(PrimeField::new(11), vec![4, 1]);
        assert_eq!(h.eval(3), 7);
        let h = PolyHash::new(PrimeField::new(13), vec![2, 3]);
        assert_eq!(h.eval(2), 8);
    }

    #[test]
    fn wide_field_multiplication() {
        let p = (1u128 << 89) - 1;
        let f = PrimeField::new(p);
        let a = p - 1;
        // (p-1)^2 = 1 mod p
        assert_eq!(f.mul(a, a), 1);
        let big = BigUint::from(p);
        for (x, y) in [(123456789u128, 987654321987654321u128), (p - 5, p - 7)] {
            let expect = (BigUint::from(x) * BigUint::from(y)) % &big;
            assert_eq!(BigUint::from(f.mul(x, y)), expect);
        }
    }

    #[test]
    fn threshold_rounding() {
        assert_eq!(bernoulli_threshold(0.3, 7), 2);
        assert_eq!(bernoulli_threshold(0.0, 7), 0);
        assert_eq!(bernoulli_threshold(1.0, 7), 7);
        assert_eq!(bernoulli_threshold(0.5, 1 << 100), 1 << 99);
        let p = 2147483659u128;
        let t = bernoulli_threshold(0.05, p);
        assert_eq!(t, (0.05f64 * p as f64).floor() as u128);
    }

    #[test]
    fn field_parameters() {
        let f = PrimeField::new(2147483659);
        assert_eq!(f.bits(), 32);
        assert_eq!(f.word_bytes(), 4);
        assert_eq!(PrimeField::new(5).word_bytes(), 1);
    }
}
