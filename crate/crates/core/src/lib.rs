//! A DH-style oblivious transfer with a verification step.
//!
//! Two parties each pick one of `m` published group elements and run a
//! Diffie-Hellman exchange over it. Keys agree exactly when the picks
//! collide, which the sender cannot observe, so the receiver obtains the
//! secret with probability `1/m`. A public-exponent verification value and a
//! power-sum recurrence check let the receiver detect a sender who encrypted
//! under a key she never committed to; a batch-level statistical audit
//! covers the variant the per-session check provably cannot see.
//!
//! The arithmetic and the protocol are generic over [`scalar::UnsignedInt`];
//! the `Natural` alias (arbitrary precision) is the default scalar
//! everywhere, with `u64`/`u128` available for exhaustive desk-scale sweeps.

pub mod modmath;
pub mod params;
pub mod protocol;
pub mod scalar;
pub mod sim;
pub mod vseq;
pub mod wire;

/// Arbitrary-precision unsigned integer, the default scalar of the stack.
pub type Natural = num_bigint::BigUint;

pub use params::{ProtocolParams, ValidationReport};
pub use protocol::{AliceState, BobState, CheatMode, CheatStrategy, SessionTranscript};
pub use scalar::UnsignedInt;
pub use sim::{AuditVerdict, TrialStats};
pub use vseq::Verdict;
