//! The unsigned integer scalar the whole stack is generic over.
//!
//! Everything above this module (modular arithmetic, the verification
//! sequence, the protocol itself) works for any [`UnsignedInt`]. Pick the
//! type by modulus size: `u32`/`u64`/`u128` for fixed-width desk-scale runs,
//! [`crate::Natural`] for arbitrary precision.

use std::fmt;

use num_integer::Integer;
use num_traits::{FromPrimitive, Unsigned};
use rand::RngCore;

/// Unsigned integer scalar for modular arithmetic.
///
/// The default `*_mod` implementations compute in `Self`, so they are only
/// correct when sums and products of two residues are representable.
/// `u32` and `u64` override them with widening arithmetic and therefore
/// support any modulus of their full width; `u128` is good for moduli up to
/// 64 bits; `Natural` never overflows.
pub trait UnsignedInt:
    Integer + Unsigned + FromPrimitive + Clone + fmt::Debug + fmt::Display + fmt::LowerHex
{
    /// Minimal big-endian byte encoding; zero encodes as a single `0x00`.
    fn to_be_bytes_minimal(&self) -> Vec<u8>;

    /// Uniform sample from `[low, high)`. Panics if the range is empty.
    fn sample_uniform_range(low: &Self, high: &Self, rng: &mut dyn RngCore) -> Self;

    /// Integer-halve in place; exponent scanning in the square-and-multiply
    /// loop.
    fn halve(&mut self) {
        let two = Self::one() + Self::one();
        *self = self.clone() / two;
    }

    /// `self^exponent mod modulus` by square-and-multiply; the modulus must
    /// be at least 2.
    fn pow_mod(&self, exponent: &Self, modulus: &Self) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone() % modulus.clone();
        let mut exp = exponent.clone();
        while !exp.is_zero() {
            if exp.is_odd() {
                acc = acc.mul_mod(&base, modulus);
            }
            exp.halve();
            if !exp.is_zero() {
                let squared = base.mul_mod(&base, modulus);
                base = squared;
            }
        }
        acc
    }

    /// `(self * other) mod modulus`.
    fn mul_mod(&self, other: &Self, modulus: &Self) -> Self {
        (self.clone() * other.clone()) % modulus.clone()
    }

    /// `(self + other) mod modulus`.
    fn add_mod(&self, other: &Self, modulus: &Self) -> Self {
        (self.clone() + other.clone()) % modulus.clone()
    }

    /// `(self - other) mod modulus`; both operands must already be reduced.
    fn sub_mod(&self, other: &Self, modulus: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            modulus.clone() - (other.clone() - self.clone())
        }
    }
}

fn strip_leading_zeros(bytes: Vec<u8>) -> Vec<u8> {
    let first = bytes.iter().position(|&b| b != 0);
    match first {
        Some(i) => bytes[i..].to_vec(),
        None => vec![0],
    }
}

impl UnsignedInt for u32 {
    fn to_be_bytes_minimal(&self) -> Vec<u8> {
        strip_leading_zeros(self.to_be_bytes().to_vec())
    }

    fn halve(&mut self) {
        *self >>= 1;
    }

    fn sample_uniform_range(low: &Self, high: &Self, rng: &mut dyn RngCore) -> Self {
        use rand::Rng;
        rng.gen_range(*low..*high)
    }

    fn mul_mod(&self, other: &Self, modulus: &Self) -> Self {
        ((*self as u64 * *other as u64) % *modulus as u64) as u32
    }

    fn add_mod(&self, other: &Self, modulus: &Self) -> Self {
        ((*self as u64 + *other as u64) % *modulus as u64) as u32
    }

    fn sub_mod(&self, other: &Self, modulus: &Self) -> Self {
        if self >= other {
            self - other
        } else {
            modulus - (other - self)
        }
    }
}

impl UnsignedInt for u64 {
    fn to_be_bytes_minimal(&self) -> Vec<u8> {
        strip_leading_zeros(self.to_be_bytes().to_vec())
    }

    fn halve(&mut self) {
        *self >>= 1;
    }

    fn sample_uniform_range(low: &Self, high: &Self, rng: &mut dyn RngCore) -> Self {
        use rand::Rng;
        rng.gen_range(*low..*high)
    }

    fn mul_mod(&self, other: &Self, modulus: &Self) -> Self {
        ((*self as u128 * *other as u128) % *modulus as u128) as u64
    }

    fn add_mod(&self, other: &Self, modulus: &Self) -> Self {
        ((*self as u128 + *other as u128) % *modulus as u128) as u64
    }

    fn sub_mod(&self, other: &Self, modulus: &Self) -> Self {
        if self >= other {
            self - other
        } else {
            modulus - (other - self)
        }
    }
}

impl UnsignedInt for u128 {
    fn to_be_bytes_minimal(&self) -> Vec<u8> {
        strip_leading_zeros(self.to_be_bytes().to_vec())
    }

    fn halve(&mut self) {
        *self >>= 1;
    }

    fn sample_uniform_range(low: &Self, high: &Self, rng: &mut dyn RngCore) -> Self {
        use rand::Rng;
        rng.gen_range(*low..*high)
    }

    fn sub_mod(&self, other: &Self, modulus: &Self) -> Self {
        if self >= other {
            self - other
        } else {
            modulus - (other - self)
        }
    }
}

impl UnsignedInt for num_bigint::BigUint {
    fn to_be_bytes_minimal(&self) -> Vec<u8> {
        // BigUint::to_bytes_be already yields [0] for zero and no leading
        // zeros otherwise.
        self.to_bytes_be()
    }

    fn halve(&mut self) {
        *self >>= 1;
    }

    fn sample_uniform_range(low: &Self, high: &Self, rng: &mut dyn RngCore) -> Self {
        use num_bigint::RandBigInt;
        rng.gen_biguint_range(low, high)
    }

    // num-bigint's modpow is the same square-and-multiply with Montgomery
    // multiplication behind it.
    fn pow_mod(&self, exponent: &Self, modulus: &Self) -> Self {
        self.modpow(exponent, modulus)
    }

    fn mul_mod(&self, other: &Self, modulus: &Self) -> Self {
        (self * other) % modulus
    }

    fn add_mod(&self, other: &Self, modulus: &Self) -> Self {
        (self + other) % modulus
    }

    fn sub_mod(&self, other: &Self, modulus: &Self) -> Self {
        if self >= other {
            self - other
        } else {
            modulus - (other - self)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    #[test]
    fn minimal_bytes_zero_is_single_byte() {
        assert_eq!(0u64.to_be_bytes_minimal(), vec![0]);
        assert_eq!(BigUint::from(0u32).to_be_bytes_minimal(), vec![0]);
    }

    #[test]
    fn minimal_bytes_strip_leading_zeros() {
        assert_eq!(7u64.to_be_bytes_minimal(), vec![7]);
        assert_eq!(0x1234u64.to_be_bytes_minimal(), vec![0x12, 0x34]);
        assert_eq!(
            BigUint::from(0x1234u32).to_be_bytes_minimal(),
            vec![0x12, 0x34]
        );
    }

    #[test]
    fn widening_mul_mod_survives_large_operands() {
        let m = u64::MAX - 58; // arbitrary large modulus
        let a = m - 1;
        let b = m - 2;
        let via_u128 = ((a as u128 * b as u128) % m as u128) as u64;
        assert_eq!(a.mul_mod(&b, &m), via_u128);
        let big = BigUint::from(a).mul_mod(&BigUint::from(b), &BigUint::from(m));
        assert_eq!(big, BigUint::from(via_u128));
    }

    #[test]
    fn pow_mod_override_agrees_with_default_loop() {
        // BigUint delegates to modpow; u128 runs the default
        // square-and-multiply. Same answers on a shared domain.
        let mut x: u128 = 0x9e37_79b9_7f4a_7c15;
        for _ in 0..200 {
            x = x.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            let base = x >> 64;
            let exp = (x >> 32) & 0xffff_ffff;
            let modulus = (x & 0xffff_ffff) | 2;
            let narrow = base.pow_mod(&exp, &modulus);
            let wide = BigUint::from(base).pow_mod(&BigUint::from(exp), &BigUint::from(modulus));
            assert_eq!(wide, BigUint::from(narrow));
        }
    }

    #[test]
    fn sub_mod_wraps() {
        assert_eq!(3u64.sub_mod(&5, &19), 17);
        assert_eq!(5u64.sub_mod(&3, &19), 2);
        let m = u64::MAX - 58;
        assert_eq!(1u64.sub_mod(&(m - 1), &m), 2);
    }
}
