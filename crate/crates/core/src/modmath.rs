//! Modular exponentiation and inversion, generic over [`UnsignedInt`].

use thiserror::Error;

use crate::scalar::UnsignedInt;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MathError {
    #[error("modulus must be at least 2")]
    InvalidModulus,
    #[error("value is not invertible modulo the given modulus")]
    NonInvertible,
}

fn check_modulus<T: UnsignedInt>(modulus: &T) -> Result<(), MathError> {
    if *modulus < T::from_u8(2).expect("small constant") {
        return Err(MathError::InvalidModulus);
    }
    Ok(())
}

/// `base^exponent mod modulus` by square-and-multiply,
/// O(bits(exponent)) multiplications.
pub fn mod_exp<T: UnsignedInt>(base: &T, exponent: &T, modulus: &T) -> Result<T, MathError> {
    check_modulus(modulus)?;
    Ok(base.pow_mod(exponent, modulus))
}

/// Inverse of `x` modulo `modulus` via the extended Euclidean algorithm,
/// tracking the Bezout coefficient of `x` reduced mod `modulus` so the whole
/// computation stays in unsigned arithmetic.
pub fn mod_inv<T: UnsignedInt>(x: &T, modulus: &T) -> Result<T, MathError> {
    check_modulus(modulus)?;
    let x = x.clone() % modulus.clone();
    if x.is_zero() {
        return Err(MathError::NonInvertible);
    }
    let (mut r0, mut r1) = (modulus.clone(), x);
    let (mut t0, mut t1) = (T::zero(), T::one());
    while !r1.is_zero() {
        let (quot, rem) = r0.div_rem(&r1);
        r0 = r1;
        r1 = rem;
        let step = quot.mul_mod(&t1, modulus);
        let t2 = t0.sub_mod(&step, modulus);
        t0 = t1;
        t1 = t2;
    }
    if !r0.is_one() {
        return Err(MathError::NonInvertible);
    }
    Ok(t0 % modulus.clone())
}

/// The public constant relating the first two bases: `k = u1 * u2^-1 mod p`,
/// so `k * u2 = u1 (mod p)`.
pub fn derive_k<T: UnsignedInt>(u1: &T, u2: &T, p: &T) -> Result<T, MathError> {
    let inv = mod_inv(u2, p)?;
    Ok((u1.clone() % p.clone()).mul_mod(&inv, p))
}
