//! Public protocol parameters: safe-prime group, basis list, the derived
//! constant `k`, and the verification exponent `r`, plus generation,
//! validation, and the parameter file format.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use num_integer::Integer;
use num_traits::{Num, One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::modmath::{derive_k, mod_exp};
use crate::scalar::UnsignedInt;
use crate::Natural;

/// Public protocol context, shared by both parties before any session.
///
/// `p = 2q + 1` is a safe prime; every basis `u_i` is a nonunit square mod
/// `p`, hence of order exactly `q`; `k * u2 = u1 (mod p)`; `r` is the public
/// verification exponent, coprime to `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolParams<T = Natural> {
    pub p: T,
    pub q: T,
    pub bases: Vec<T>,
    pub k: T,
    pub r: T,
}

impl<T: UnsignedInt> ProtocolParams<T> {
    /// Number of bases.
    pub fn m(&self) -> usize {
        self.bases.len()
    }

    /// Basis by 1-based index, as in the field names `u1..um`.
    pub fn basis(&self, index: usize) -> Option<&T> {
        if index == 0 {
            return None;
        }
        self.bases.get(index - 1)
    }
}

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("bit length must be at least 16, got {0}")]
    BitLengthTooSmall(u64),
    #[error("need at least 2 bases, got {0}")]
    BasisCountTooSmall(usize),
    #[error("no safe prime found after {attempts} candidates")]
    Generation { attempts: u64 },
    #[error("r must satisfy 2 <= r < q and gcd(r, q) = 1")]
    BadR,
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("duplicate field `{0}`")]
    DuplicateField(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{field}`: {reason}")]
    BadValue { field: String, reason: String },
    #[error("parameters violate invariants:\n{0}")]
    Invalid(ValidationReport),
}

/// Pass/fail per parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub p_is_prime: bool,
    pub q_is_prime: bool,
    pub p_is_2q_plus_1: bool,
    pub basis_count_ok: bool,
    pub bases_in_range: bool,
    pub bases_have_order_q: bool,
    pub bases_distinct: bool,
    pub k_consistent: bool,
    pub r_in_range: bool,
    pub r_coprime_to_q: bool,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.p_is_prime
            && self.q_is_prime
            && self.p_is_2q_plus_1
            && self.basis_count_ok
            && self.bases_in_range
            && self.bases_have_order_q
            && self.bases_distinct
            && self.k_consistent
            && self.r_in_range
            && self.r_coprime_to_q
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = |ok: bool| if ok { "ok" } else { "FAIL" };
        writeln!(f, "p_is_prime: {}", line(self.p_is_prime))?;
        writeln!(f, "q_is_prime: {}", line(self.q_is_prime))?;
        writeln!(f, "p_is_2q_plus_1: {}", line(self.p_is_2q_plus_1))?;
        writeln!(f, "basis_count_ok: {}", line(self.basis_count_ok))?;
        writeln!(f, "bases_in_range: {}", line(self.bases_in_range))?;
        writeln!(f, "bases_have_order_q: {}", line(self.bases_have_order_q))?;
        writeln!(f, "bases_distinct: {}", line(self.bases_distinct))?;
        writeln!(f, "k_consistent: {}", line(self.k_consistent))?;
        writeln!(f, "r_in_range: {}", line(self.r_in_range))?;
        write!(f, "r_coprime_to_q: {}", line(self.r_coprime_to_q))
    }
}

const GENERATION_ATTEMPT_CAP: u64 = 1_000_000;

fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let limit = 2048usize;
        let mut sieve = vec![true; limit];
        let mut primes = Vec::new();
        for n in 2..limit {
            if sieve[n] {
                primes.push(n as u64);
                for multiple in (n * n..limit).step_by(n) {
                    sieve[multiple] = false;
                }
            }
        }
        primes
    })
}

/// Deterministic Miller-Rabin below 2^64 (fixed witness set), 64 rounds with
/// witnesses from `rng` above.
pub fn is_prime_with_rng(n: &Natural, rng: &mut dyn RngCore) -> bool {
    let two = Natural::from(2u32);
    if *n < two {
        return false;
    }
    for &sp in small_primes() {
        let sp = Natural::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    // n is odd and > every sieve prime here
    let n_minus_1 = n - 1u32;
    let mut d = n_minus_1.clone();
    let mut s = 0u32;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }
    let witness_passes = |a: &Natural| -> bool {
        let a = a % n;
        if a.is_zero() {
            return true;
        }
        let mut x = mod_exp(&a, &d, n).expect("modulus > 1");
        if x.is_one() || x == n_minus_1 {
            return true;
        }
        for _ in 1..s {
            x = x.mul_mod(&x.clone(), n);
            if x == n_minus_1 {
                return true;
            }
        }
        false
    };
    if n.bits() <= 64 {
        const WITNESSES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
        WITNESSES.iter().all(|&w| witness_passes(&Natural::from(w)))
    } else {
        (0..64).all(|_| {
            let w = Natural::sample_uniform_range(&two, &n_minus_1, rng);
            witness_passes(&w)
        })
    }
}

/// Primality test with deterministic behavior: above 2^64 the Miller-Rabin
/// witnesses come from an RNG seeded by the candidate itself.
pub fn is_prime(n: &Natural) -> bool {
    let mut rng = ChaCha20Rng::from_seed(Sha256::digest(n.to_be_bytes_minimal()).into());
    is_prime_with_rng(n, &mut rng)
}

impl ProtocolParams<Natural> {
    /// Generate parameters: safe prime `p` of exactly `bits` bits, `m`
    /// distinct bases of order `q` (random squares, unit rejected), derived
    /// `k`, and `r` either validated from `r_choice` or sampled from `[2, q)`
    /// coprime to `q`. Deterministic for a given RNG state.
    pub fn generate(
        bits: u64,
        m: usize,
        r_choice: Option<Natural>,
        rng: &mut dyn RngCore,
    ) -> Result<Self, ParamsError> {
        use num_bigint::RandBigInt;
        if bits < 16 {
            return Err(ParamsError::BitLengthTooSmall(bits));
        }
        if m < 2 {
            return Err(ParamsError::BasisCountTooSmall(m));
        }

        let one = Natural::one();
        let top_bit = &one << (bits - 2);
        let mut q = Natural::zero();
        let mut p = Natural::zero();
        let mut found = false;
        let mut attempts = 0u64;
        'search: while attempts < GENERATION_ATTEMPT_CAP {
            attempts += 1;
            q = rng.gen_biguint(bits - 1) | &top_bit | &one;
            p = (&q << 1) | &one;
            for &sp in small_primes() {
                let sp = Natural::from(sp);
                if (&q % &sp).is_zero() || (&p % &sp).is_zero() {
                    continue 'search;
                }
            }
            if is_prime_with_rng(&q, &mut *rng) && is_prime_with_rng(&p, &mut *rng) {
                found = true;
                break;
            }
        }
        if !found {
            return Err(ParamsError::Generation { attempts });
        }

        let two = Natural::from(2u32);
        let mut bases: Vec<Natural> = Vec::with_capacity(m);
        while bases.len() < m {
            let g = rng.gen_biguint_range(&two, &p);
            let u = g.mul_mod(&g.clone(), &p);
            if u.is_one() || bases.contains(&u) {
                continue;
            }
            bases.push(u);
        }

        let k = derive_k(&bases[0], &bases[1], &p).expect("p prime, bases nonzero");

        let r = match r_choice {
            Some(r) => {
                if r < two || r >= q || !r.gcd(&q).is_one() {
                    return Err(ParamsError::BadR);
                }
                r
            }
            None => loop {
                let candidate = rng.gen_biguint_range(&two, &q);
                if candidate.gcd(&q).is_one() {
                    break candidate;
                }
            },
        };

        Ok(ProtocolParams { p, q, bases, k, r })
    }

    /// [`ProtocolParams::generate`] with a fresh ChaCha20 RNG from a 64-bit seed.
    pub fn generate_seeded(
        bits: u64,
        m: usize,
        r_choice: Option<Natural>,
        seed: u64,
    ) -> Result<Self, ParamsError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Self::generate(bits, m, r_choice, &mut rng)
    }

    /// Check every invariant; the report carries one flag per check.
    pub fn validate(&self) -> ValidationReport {
        let one = Natural::one();
        let two = Natural::from(2u32);
        let p_is_prime = is_prime(&self.p);
        let q_is_prime = is_prime(&self.q);
        let p_is_2q_plus_1 = self.p == (&self.q << 1) + &one;
        let basis_count_ok = self.bases.len() >= 2;
        let bases_in_range = self.bases.iter().all(|u| !u.is_zero() && *u < self.p);
        let bases_have_order_q = bases_in_range
            && self.bases.iter().all(|u| {
                !u.is_one()
                    && mod_exp(u, &self.q, &self.p)
                        .map(|x| x.is_one())
                        .unwrap_or(false)
            });
        let bases_distinct = {
            let mut sorted = self.bases.clone();
            sorted.sort();
            sorted.windows(2).all(|w| w[0] != w[1])
        };
        let k_consistent = basis_count_ok
            && self
                .basis(2)
                .map(|u2| self.k.mul_mod(u2, &self.p) == &self.bases[0] % &self.p)
                .unwrap_or(false);
        let r_in_range = self.r >= two && self.r < self.q;
        let r_coprime_to_q = self.r.gcd(&self.q).is_one();
        ValidationReport {
            p_is_prime,
            q_is_prime,
            p_is_2q_plus_1,
            basis_count_ok,
            bases_in_range,
            bases_have_order_q,
            bases_distinct,
            k_consistent,
            r_in_range,
            r_coprime_to_q,
        }
    }

    /// Canonical parameter file text: one `field=value` per line, lowercase
    /// hex except the decimal basis count `m`.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("p={:x}\n", self.p));
        out.push_str(&format!("q={:x}\n", self.q));
        out.push_str(&format!("m={}\n", self.bases.len()));
        for (i, u) in self.bases.iter().enumerate() {
            out.push_str(&format!("u{}={:x}\n", i + 1, u));
        }
        out.push_str(&format!("k={:x}\n", self.k));
        out.push_str(&format!("r={:x}\n", self.r));
        out
    }

    /// Parse the parameter file format. Rejects missing fields, duplicate
    /// fields, unknown fields, and any invariant violation. Lines starting
    /// with `#` and blank lines are ignored.
    pub fn from_file_str(text: &str) -> Result<Self, ParamsError> {
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ParamsError::BadValue {
                field: line.to_string(),
                reason: "expected `field=value`".into(),
            })?;
            let key = key.trim().to_string();
            if fields
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(ParamsError::DuplicateField(key));
            }
        }

        let take = |fields: &mut BTreeMap<String, String>, name: &str| {
            fields
                .remove(name)
                .ok_or_else(|| ParamsError::MissingField(name.to_string()))
        };
        let parse_hex = |name: &str, value: &str| {
            Natural::from_str_radix(value, 16).map_err(|e| ParamsError::BadValue {
                field: name.to_string(),
                reason: e.to_string(),
            })
        };

        let m_text = take(&mut fields, "m")?;
        let m: usize = m_text.parse().map_err(|_| ParamsError::BadValue {
            field: "m".into(),
            reason: format!("not a decimal count: `{m_text}`"),
        })?;
        if m < 2 {
            return Err(ParamsError::BasisCountTooSmall(m));
        }
        let p = parse_hex("p", &take(&mut fields, "p")?)?;
        let q = parse_hex("q", &take(&mut fields, "q")?)?;
        let mut bases = Vec::with_capacity(m);
        for i in 1..=m {
            let name = format!("u{i}");
            bases.push(parse_hex(&name, &take(&mut fields, &name)?)?);
        }
        let k = parse_hex("k", &take(&mut fields, "k")?)?;
        let r = parse_hex("r", &take(&mut fields, "r")?)?;
        if let Some(extra) = fields.into_keys().next() {
            return Err(ParamsError::UnknownField(extra));
        }

        let params = ProtocolParams { p, q, bases, k, r };
        let report = params.validate();
        if !report.all_pass() {
            return Err(ParamsError::Invalid(report));
        }
        Ok(params)
    }

    /// SHA-256 of the canonical file text; what the wire PARAMS message
    /// carries.
    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_file_string().as_bytes()).into()
    }

    /// Convert to a fixed-width scalar when every field fits. Pick a width
    /// whose `mul_mod` supports `p` (u64 widens internally; u128 is good for
    /// p below 2^64).
    pub fn narrow<T: UnsignedInt>(&self) -> Option<ProtocolParams<T>> {
        let conv = |n: &Natural| n.to_u128().and_then(T::from_u128);
        Some(ProtocolParams {
            p: conv(&self.p)?,
            q: conv(&self.q)?,
            bases: self.bases.iter().map(conv).collect::<Option<Vec<_>>>()?,
            k: conv(&self.k)?,
            r: conv(&self.r)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn is_prime_agrees_with_trial_division() {
        let trial = |n: u64| {
            n >= 2
                && (2..n)
                    .take_while(|d| d * d <= n)
                    .all(|d| !n.is_multiple_of(d))
        };
        for n in 0u64..3000 {
            assert_eq!(is_prime(&Natural::from(n)), trial(n), "n = {n}");
        }
        // a few known larger cases
        assert!(is_prime(&Natural::from(2_147_483_647u64))); // 2^31 - 1
        assert!(!is_prime(&Natural::from(2_147_483_649u64)));
    }

    #[test]
    fn generate_satisfies_postconditions() {
        for (m, seed) in [(2usize, 7u64), (4, 11)] {
            let params =
                ProtocolParams::generate_seeded(16, m, Some(Natural::from(3u32)), seed).unwrap();
            assert_eq!(params.m(), m);
            assert_eq!(params.p.bits(), 16);
            // validity oracle: direct exponentiation of each basis
            for u in &params.bases {
                assert!(!u.is_one());
                assert!(mod_exp(u, &params.q, &params.p).unwrap().is_one());
            }
            let report = params.validate();
            assert!(report.all_pass(), "{report}");
        }
    }

    #[test]
    fn generate_is_deterministic_per_seed() {
        let a = ProtocolParams::generate_seeded(16, 3, None, 42).unwrap();
        let b = ProtocolParams::generate_seeded(16, 3, None, 42).unwrap();
        let c = ProtocolParams::generate_seeded(16, 3, None, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generate_rejects_bad_requests() {
        assert!(matches!(
            ProtocolParams::generate_seeded(8, 2, None, 1),
            Err(ParamsError::BitLengthTooSmall(8))
        ));
        assert!(matches!(
            ProtocolParams::generate_seeded(16, 1, None, 1),
            Err(ParamsError::BasisCountTooSmall(1))
        ));
        assert!(matches!(
            ProtocolParams::generate_seeded(16, 2, Some(Natural::from(1u32)), 1),
            Err(ParamsError::BadR)
        ));
    }

    #[test]
    fn validate_flags_tampered_params() {
        let good = ProtocolParams::generate_seeded(16, 2, None, 5).unwrap();
        assert!(good.validate().all_pass());

        let mut unit_basis = good.clone();
        unit_basis.bases[0] = Natural::one();
        let report = unit_basis.validate();
        assert!(!report.bases_have_order_q);
        assert!(report.p_is_prime);

        let mut bad_k = good.clone();
        bad_k.k = (&bad_k.k + 1u32) % &bad_k.p;
        let report = bad_k.validate();
        assert!(!report.k_consistent);
        assert!(report.bases_have_order_q);
    }

    #[test]
    fn file_round_trip() {
        let params = ProtocolParams::generate_seeded(16, 3, None, 9).unwrap();
        let text = params.to_file_string();
        let back = ProtocolParams::from_file_str(&text).unwrap();
        assert_eq!(params, back);
        // comments and blank lines are tolerated
        let commented = format!("# protocol parameters\n\n{text}");
        assert_eq!(ProtocolParams::from_file_str(&commented).unwrap(), params);
    }

    #[test]
    fn file_rejects_missing_duplicate_unknown_and_invalid() {
        let params = ProtocolParams::generate_seeded(16, 2, None, 9).unwrap();
        let text = params.to_file_string();

        let missing = text.replace("r=", "# r=");
        assert!(matches!(
            ProtocolParams::from_file_str(&missing),
            Err(ParamsError::MissingField(f)) if f == "r"
        ));

        let duplicated = format!("{text}r=3\n");
        assert!(matches!(
            ProtocolParams::from_file_str(&duplicated),
            Err(ParamsError::DuplicateField(f)) if f == "r"
        ));

        let unknown = format!("{text}extra=1\n");
        assert!(matches!(
            ProtocolParams::from_file_str(&unknown),
            Err(ParamsError::UnknownField(f)) if f == "extra"
        ));

        // tamper k so an invariant breaks
        let k_line = text
            .lines()
            .find(|l| l.starts_with("k="))
            .unwrap()
            .to_string();
        let tampered = text.replace(&k_line, "k=1");
        assert!(matches!(
            ProtocolParams::from_file_str(&tampered),
            Err(ParamsError::Invalid(_))
        ));
    }

    #[test]
    fn narrow_round_trips_small_params() {
        let params = ProtocolParams::generate_seeded(16, 2, None, 3).unwrap();
        let narrow: ProtocolParams<u64> = params.narrow().unwrap();
        assert_eq!(Natural::from(narrow.p), params.p);
        assert_eq!(narrow.bases.len(), params.bases.len());
    }
}
