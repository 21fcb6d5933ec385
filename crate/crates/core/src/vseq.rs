//! The power-sum verification sequence `G(n) = v^n + w^n mod p` and its
//! two-term linear recurrence.
//!
//! For distinct roots `v, w` and a step `k >= 2`, the coefficients
//! `(alpha_k, beta_k)` solving `v^k = alpha_k*v + beta_k` and
//! `w^k = alpha_k*w + beta_k` give
//! `G(n) = alpha_k*G(n-k+1) + beta_k*G(n-k) (mod p)`.
//! Note the recurrence consumes the *first two* entries of an ascending
//! window `[G(n-k), ..., G(n)]`, skipping the k-2 entries in between.
//!
//! A receiver holding one genuine power and receiving the other can build
//! three consecutive `G` values by multiplying each side by its own base,
//! without knowing the exponent, and test the `k = 2` recurrence. Any
//! sequence of the form `c1*v^t + c2*w^t` satisfies that recurrence, so the
//! check constrains the bases, not the exponents; the simulator's statistics
//! surface what this does and does not catch.

use thiserror::Error;

use crate::modmath::{mod_exp, mod_inv, MathError};
use crate::scalar::UnsignedInt;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VseqError {
    #[error("equal roots make the coefficient system singular; compare values directly")]
    SingularSystem,
    #[error("root difference is not invertible modulo the given modulus")]
    NonInvertible,
    #[error("modulus must be at least 2")]
    InvalidModulus,
    #[error("step size must be at least 2, got {0}")]
    StepTooSmall(usize),
    #[error("window must hold {expected} values, got {actual}")]
    WindowLength { expected: usize, actual: usize },
}

impl From<MathError> for VseqError {
    fn from(e: MathError) -> Self {
        match e {
            MathError::InvalidModulus => VseqError::InvalidModulus,
            MathError::NonInvertible => VseqError::NonInvertible,
        }
    }
}

/// Coefficients `(alpha, beta)` of the step-`k` recurrence for one root pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecurrenceCoefficients<T> {
    pub alpha: T,
    pub beta: T,
    pub k: usize,
    pub modulus: T,
}

/// The sequence terms `G(0)..G(n_max)` together with the roots they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GSequence<T> {
    pub v: T,
    pub w: T,
    pub modulus: T,
    pub terms: Vec<T>,
}

/// Outcome of checking a received power against one's own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Values are equal and the roots coincide.
    Match,
    /// Values differ but the window satisfies the recurrence.
    RecurrenceOk,
    /// Neither equal nor recurrence-consistent.
    RecurrenceFail,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Match => "match",
            Verdict::RecurrenceOk => "recurrence_ok",
            Verdict::RecurrenceFail => "recurrence_fail",
        }
    }
}

/// Solve `{v^k = alpha*v + beta, w^k = alpha*w + beta} (mod modulus)`:
/// `alpha = (v^k - w^k) * (v - w)^-1`, `beta = v^k - alpha*v`.
pub fn solve_coefficients<T: UnsignedInt>(
    v: &T,
    w: &T,
    k: usize,
    modulus: &T,
) -> Result<RecurrenceCoefficients<T>, VseqError> {
    if k < 2 {
        return Err(VseqError::StepTooSmall(k));
    }
    let two = T::from_u8(2).expect("small constant");
    if *modulus < two {
        return Err(VseqError::InvalidModulus);
    }
    let v = v.clone() % modulus.clone();
    let w = w.clone() % modulus.clone();
    if v == w {
        return Err(VseqError::SingularSystem);
    }
    let diff_inv = mod_inv(&v.sub_mod(&w, modulus), modulus)?;
    let k_exp = T::from_usize(k).expect("small step");
    let vk = mod_exp(&v, &k_exp, modulus)?;
    let wk = mod_exp(&w, &k_exp, modulus)?;
    let alpha = vk.sub_mod(&wk, modulus).mul_mod(&diff_inv, modulus);
    let beta = vk.sub_mod(&alpha.mul_mod(&v, modulus), modulus);
    Ok(RecurrenceCoefficients {
        alpha,
        beta,
        k,
        modulus: modulus.clone(),
    })
}

/// `G(0)..G(n_max)` by running powers of both roots; no general
/// exponentiation, one multiplication per root per term.
pub fn g_sequence<T: UnsignedInt>(v: &T, w: &T, modulus: &T, n_max: usize) -> GSequence<T> {
    let two = T::from_u8(2).expect("small constant");
    assert!(*modulus >= two, "modulus must be at least 2");
    let v = v.clone() % modulus.clone();
    let w = w.clone() % modulus.clone();
    let mut v_pow = T::one();
    let mut w_pow = T::one();
    let mut terms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            v_pow = v_pow.mul_mod(&v, modulus);
            w_pow = w_pow.mul_mod(&w, modulus);
        }
        terms.push(v_pow.add_mod(&w_pow, modulus));
    }
    GSequence {
        v,
        w,
        modulus: modulus.clone(),
        terms,
    }
}

/// Test the last entry of an ascending window `[G(n-k), ..., G(n)]` against
/// `alpha*G(n-k+1) + beta*G(n-k)`, i.e. the second and first entries.
pub fn check_recurrence<T: UnsignedInt>(
    coeffs: &RecurrenceCoefficients<T>,
    window: &[T],
) -> Result<bool, VseqError> {
    let expected = coeffs.k + 1;
    if window.len() != expected {
        return Err(VseqError::WindowLength {
            expected,
            actual: window.len(),
        });
    }
    let m = &coeffs.modulus;
    let predicted = coeffs
        .alpha
        .mul_mod(&window[1], m)
        .add_mod(&coeffs.beta.mul_mod(&window[0], m), m);
    Ok(predicted == window[coeffs.k].clone() % m.clone())
}

/// Check a received power of `v` against one's own power of `w` without
/// knowing the exponent: equal roots compare directly; distinct roots build
/// `G(n), G(n+1), G(n+2)` by one multiplication per side and test the
/// `k = 2` recurrence.
pub fn verify_received_power<T: UnsignedInt>(
    v: &T,
    w: &T,
    received_vn: &T,
    own_wn: &T,
    modulus: &T,
) -> Result<Verdict, VseqError> {
    let two = T::from_u8(2).expect("small constant");
    if *modulus < two {
        return Err(VseqError::InvalidModulus);
    }
    let v = v.clone() % modulus.clone();
    let w = w.clone() % modulus.clone();
    let received = received_vn.clone() % modulus.clone();
    let own = own_wn.clone() % modulus.clone();
    if v == w {
        return Ok(if received == own {
            Verdict::Match
        } else {
            Verdict::RecurrenceFail
        });
    }
    let g0 = received.add_mod(&own, modulus);
    let rv = received.mul_mod(&v, modulus);
    let ow = own.mul_mod(&w, modulus);
    let g1 = rv.add_mod(&ow, modulus);
    let g2 = rv
        .mul_mod(&v, modulus)
        .add_mod(&ow.mul_mod(&w, modulus), modulus);
    let coeffs = solve_coefficients(&v, &w, 2, modulus)?;
    Ok(if check_recurrence(&coeffs, &[g0, g1, g2])? {
        Verdict::RecurrenceOk
    } else {
        Verdict::RecurrenceFail
    })
}

/// True when the recurrence machinery applies over a (possibly composite)
/// modulus: both roots and their difference must be units.
pub fn extend_composite_modulus_check<T: UnsignedInt>(v: &T, w: &T, modulus: &T) -> bool {
    let two = T::from_u8(2).expect("small constant");
    assert!(*modulus >= two, "modulus must be at least 2");
    let v = v.clone() % modulus.clone();
    let w = w.clone() % modulus.clone();
    let diff = v.sub_mod(&w, modulus);
    v.gcd(modulus).is_one() && w.gcd(modulus).is_one() && diff.gcd(modulus).is_one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Natural;

    proptest::proptest! {
        #[test]
        fn recurrence_holds_for_random_roots_steps_and_positions(
            prime_index in 0usize..7,
            v in 1u64..1000,
            w in 1u64..1000,
            k in 2usize..=5,
            n in 0usize..=20,
        ) {
            let p = [5u64, 17, 19, 23, 101, 499, 997][prime_index];
            let (v, w) = (v % p, w % p);
            proptest::prop_assume!(v != w && v > 0 && w > 0);
            let n = n.max(k);
            let seq = g_sequence(&v, &w, &p, n);
            let coeffs = solve_coefficients(&v, &w, k, &p).unwrap();
            proptest::prop_assert!(check_recurrence(&coeffs, &seq.terms[n - k..=n]).unwrap());
        }
    }

    #[test]
    fn coefficients_for_known_series() {
        let c = solve_coefficients(&3u64, &7, 2, &19).unwrap();
        assert_eq!((c.alpha, c.beta), (10, 17));
        let c = solve_coefficients(&3u64, &5, 2, &17).unwrap();
        assert_eq!((c.alpha, c.beta), (8, 2));
        let c = solve_coefficients(
            &Natural::from(3u32),
            &Natural::from(7u32),
            2,
            &Natural::from(19u32),
        )
        .unwrap();
        assert_eq!(c.alpha, Natural::from(10u32));
        assert_eq!(c.beta, Natural::from(17u32));
    }

    #[test]
    fn step_three_coefficients_match_brute_force() {
        // oracle: scan all (alpha, beta) pairs solving both equations
        let (v, w, p) = (3u64, 7u64, 19u64);
        let vk = v.pow(3) % p;
        let wk = w.pow(3) % p;
        let mut solutions = Vec::new();
        for alpha in 0..p {
            for beta in 0..p {
                if (alpha * v + beta) % p == vk && (alpha * w + beta) % p == wk {
                    solutions.push((alpha, beta));
                }
            }
        }
        assert_eq!(solutions, vec![(3, 18)]);
        let c = solve_coefficients(&v, &w, 3, &p).unwrap();
        assert_eq!((c.alpha, c.beta), (3, 18));
    }

    #[test]
    fn equal_roots_are_singular() {
        assert_eq!(
            solve_coefficients(&5u64, &5, 2, &17),
            Err(VseqError::SingularSystem)
        );
    }

    #[test]
    fn non_invertible_difference_over_composite_modulus() {
        // v - w = 4 shares a factor with 20
        assert_eq!(
            solve_coefficients(&7u64, &3, 2, &20),
            Err(VseqError::NonInvertible)
        );
    }

    #[test]
    fn sequence_examples() {
        assert_eq!(g_sequence(&3u64, &7, &19, 6).terms, [2, 10, 1, 9, 12, 7, 8]);
        assert_eq!(
            g_sequence(&3u64, &5, &17, 9).terms,
            [2, 8, 0, 16, 9, 2, 0, 4, 15, 9]
        );
        assert_eq!(g_sequence(&0u64, &0, &17, 2).terms, [2, 0, 0]);
    }

    #[test]
    fn recurrence_check_examples() {
        let c = solve_coefficients(&3u64, &7, 2, &19).unwrap();
        assert!(check_recurrence(&c, &[10, 1, 9]).unwrap());
        assert!(!check_recurrence(&c, &[10, 1, 8]).unwrap());
        assert_eq!(
            check_recurrence(&c, &[10, 1]),
            Err(VseqError::WindowLength {
                expected: 3,
                actual: 2
            })
        );

        let c3 = solve_coefficients(&3u64, &7, 3, &19).unwrap();
        assert_eq!((c3.alpha, c3.beta), (3, 18));
        assert!(check_recurrence(&c3, &[2, 10, 1, 9]).unwrap());
    }

    #[test]
    fn verify_received_power_examples() {
        use Verdict::*;
        assert_eq!(
            verify_received_power(&3u64, &3, &7, &7, &19).unwrap(),
            Match
        );
        // equal exponents n = 4: 3^4 = 5, 7^4 = 7 mod 19
        assert_eq!(mod_exp(&3u64, &4, &19).unwrap(), 5);
        assert_eq!(mod_exp(&7u64, &4, &19).unwrap(), 7);
        assert_eq!(
            verify_received_power(&3u64, &7, &5, &7, &19).unwrap(),
            RecurrenceOk
        );
        assert_eq!(
            verify_received_power(&3u64, &3, &5, &7, &19).unwrap(),
            RecurrenceFail
        );
    }

    #[test]
    fn genuine_equal_exponent_powers_always_pass() {
        let p = 103u64;
        for v in 1..p {
            for w in 1..p {
                for n in [0u64, 1, 2, 5, 17] {
                    let received = mod_exp(&v, &n, &p).unwrap();
                    let own = mod_exp(&w, &n, &p).unwrap();
                    let verdict = verify_received_power(&v, &w, &received, &own, &p).unwrap();
                    assert_ne!(verdict, Verdict::RecurrenceFail, "v {v} w {w} n {n}");
                }
            }
        }
    }

    #[test]
    fn composite_modulus_gate() {
        assert!(!extend_composite_modulus_check(&3u64, &7, &20)); // gcd(v-w, 20) = 4
        assert!(extend_composite_modulus_check(&3u64, &7, &25));
        assert!(!extend_composite_modulus_check(&4u64, &7, &20)); // gcd(4, 20) = 4
    }

    #[test]
    fn theorem_holds_across_primes_steps_and_windows() {
        // reduced version of the acceptance sweep: a handful of primes
        for p in [5u64, 19, 17, 23, 97] {
            for v in 1..p {
                for w in (v + 1)..p {
                    let seq = g_sequence(&v, &w, &p, 25);
                    for k in 2..=5usize {
                        let c = solve_coefficients(&v, &w, k, &p).unwrap();
                        for n in k..=25 {
                            assert!(
                                check_recurrence(&c, &seq.terms[n - k..=n]).unwrap(),
                                "p {p} v {v} w {w} k {k} n {n}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_linear_solve_for_step_two() {
        // alpha = v + w, beta = -v*w; second route for the same coefficients
        for p in [17u64, 19, 101] {
            for v in 1..p {
                for w in 1..p {
                    if v == w {
                        continue;
                    }
                    let c = solve_coefficients(&v, &w, 2, &p).unwrap();
                    assert_eq!(c.alpha, (v + w) % p);
                    assert_eq!(c.beta, (p - v * w % p) % p);
                }
            }
        }
    }

    #[test]
    fn sequence_terms_agree_with_mod_exp() {
        let (v, w, p) = (
            Natural::from(123_456u64),
            Natural::from(987_654u64),
            Natural::from(1_000_003u64),
        );
        let seq = g_sequence(&v, &w, &p, 40);
        for n in [0usize, 1, 7, 23, 40] {
            let n_exp = Natural::from(n as u64);
            let expected = mod_exp(&v, &n_exp, &p)
                .unwrap()
                .add_mod(&mod_exp(&w, &n_exp, &p).unwrap(), &p);
            assert_eq!(seq.terms[n], expected);
        }
    }
}
