//! The two-party session: commitments, key agreement, secret transfer, the
//! verification value, and the cheat strategies the verification step is
//! meant to expose.
//!
//! One session: Alice commits `A = u_i^a`, Bob commits `B = u_j^b`, each
//! exponentiates the other's commitment into a key, Alice encrypts the
//! secret under hers, then sends `K^r` for the public exponent `r` so Bob
//! can compare it against his own `K^r`. Keys agree exactly when the basis
//! choices collide, which neither party can see, so the transfer succeeds
//! with probability `1/m` over the basis choices.

use rand::RngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::modmath::{mod_exp, MathError};
use crate::params::ProtocolParams;
use crate::scalar::UnsignedInt;
use crate::vseq::{self, Verdict, VseqError};
use crate::Natural;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("commitment must lie in (0, p)")]
    MalformedCommitment,
    #[error("basis index {index} out of range 1..={count}")]
    BadBasisIndex { index: usize, count: usize },
    #[error("exponent must satisfy 2 <= e < q and gcd(e, q) = 1")]
    BadExponent,
    #[error("fake exponent must differ from the honest exponent")]
    BadFakeExponent,
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Vseq(#[from] VseqError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecryptError {
    #[error("ciphertext shorter than the 32-byte tag")]
    MalformedCiphertext,
    #[error("tag mismatch: wrong key or corrupted ciphertext")]
    TagMismatch,
}

/// Which strategy Alice plays, without the sampled exponent; what CLIs and
/// simulators select.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheatMode {
    Honest,
    /// Encrypt under a fake key but send the honest verification value;
    /// exposed whenever the bases collide.
    FakeKeyHonestVerify,
    /// Encrypt under a fake key and derive the verification value from it;
    /// invisible per session, caught by the batch audit.
    FakeKeyFakeVerify,
}

impl CheatMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheatMode::Honest => "honest",
            CheatMode::FakeKeyHonestVerify => "fake-key-honest-verify",
            CheatMode::FakeKeyFakeVerify => "fake-key-fake-verify",
        }
    }
}

/// Alice's strategy with its fake exponent, when one is in play.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheatStrategy<T = Natural> {
    Honest,
    FakeKeyHonestVerify { fake_exponent: T },
    FakeKeyFakeVerify { fake_exponent: T },
}

impl<T: UnsignedInt> CheatStrategy<T> {
    pub fn mode(&self) -> CheatMode {
        match self {
            CheatStrategy::Honest => CheatMode::Honest,
            CheatStrategy::FakeKeyHonestVerify { .. } => CheatMode::FakeKeyHonestVerify,
            CheatStrategy::FakeKeyFakeVerify { .. } => CheatMode::FakeKeyFakeVerify,
        }
    }

    /// Sample the strategy for `mode`, resampling the fake exponent until it
    /// differs from `honest_exponent`.
    pub fn sample(mode: CheatMode, honest_exponent: &T, q: &T, rng: &mut dyn RngCore) -> Self {
        match mode {
            CheatMode::Honest => CheatStrategy::Honest,
            CheatMode::FakeKeyHonestVerify => CheatStrategy::FakeKeyHonestVerify {
                fake_exponent: sample_fake_exponent(honest_exponent, q, rng),
            },
            CheatMode::FakeKeyFakeVerify => CheatStrategy::FakeKeyFakeVerify {
                fake_exponent: sample_fake_exponent(honest_exponent, q, rng),
            },
        }
    }
}

/// Uniform exponent in `[2, q)` coprime to `q`.
pub fn sample_exponent<T: UnsignedInt>(q: &T, rng: &mut dyn RngCore) -> T {
    let two = T::from_u8(2).expect("small constant");
    assert!(*q > two, "subgroup order too small to sample exponents");
    loop {
        let e = T::sample_uniform_range(&two, q, rng);
        if e.gcd(q).is_one() {
            return e;
        }
    }
}

fn sample_fake_exponent<T: UnsignedInt>(honest: &T, q: &T, rng: &mut dyn RngCore) -> T {
    loop {
        let f = sample_exponent(q, rng);
        if f != *honest {
            return f;
        }
    }
}

fn sample_basis_index(m: usize, rng: &mut dyn RngCore) -> usize {
    use rand::Rng;
    rng.gen_range(1..=m)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliceState<T = Natural> {
    pub exponent: T,
    /// 1-based basis choice.
    pub basis_index: usize,
    pub strategy: CheatStrategy<T>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobState<T = Natural> {
    pub exponent: T,
    /// 1-based basis choice.
    pub basis_index: usize,
}

fn check_exponent<T: UnsignedInt>(e: &T, q: &T) -> Result<(), ProtocolError> {
    let two = T::from_u8(2).expect("small constant");
    if *e < two || e >= q || !e.gcd(q).is_one() {
        return Err(ProtocolError::BadExponent);
    }
    Ok(())
}

fn check_basis_index<T: UnsignedInt>(
    index: usize,
    params: &ProtocolParams<T>,
) -> Result<(), ProtocolError> {
    if index == 0 || index > params.m() {
        return Err(ProtocolError::BadBasisIndex {
            index,
            count: params.m(),
        });
    }
    Ok(())
}

impl<T: UnsignedInt> AliceState<T> {
    pub fn new(
        params: &ProtocolParams<T>,
        exponent: T,
        basis_index: usize,
        strategy: CheatStrategy<T>,
    ) -> Result<Self, ProtocolError> {
        check_exponent(&exponent, &params.q)?;
        check_basis_index(basis_index, params)?;
        match &strategy {
            CheatStrategy::Honest => {}
            CheatStrategy::FakeKeyHonestVerify { fake_exponent }
            | CheatStrategy::FakeKeyFakeVerify { fake_exponent } => {
                check_exponent(fake_exponent, &params.q)?;
                if *fake_exponent == exponent {
                    return Err(ProtocolError::BadFakeExponent);
                }
            }
        }
        Ok(AliceState {
            exponent,
            basis_index,
            strategy,
        })
    }

    /// Draw exponent, basis choice, and (for cheat modes) fake exponent from
    /// one RNG, in that order.
    pub fn sample(params: &ProtocolParams<T>, mode: CheatMode, rng: &mut dyn RngCore) -> Self {
        let exponent = sample_exponent(&params.q, rng);
        let basis_index = sample_basis_index(params.m(), rng);
        let strategy = CheatStrategy::sample(mode, &exponent, &params.q, rng);
        AliceState {
            exponent,
            basis_index,
            strategy,
        }
    }

    /// As [`AliceState::sample`], but the fake exponent comes from its own RNG.
    pub fn sample_with_fake_rng(
        params: &ProtocolParams<T>,
        mode: CheatMode,
        rng: &mut dyn RngCore,
        fake_rng: &mut dyn RngCore,
    ) -> Self {
        let exponent = sample_exponent(&params.q, rng);
        let basis_index = sample_basis_index(params.m(), rng);
        let strategy = CheatStrategy::sample(mode, &exponent, &params.q, fake_rng);
        AliceState {
            exponent,
            basis_index,
            strategy,
        }
    }

    fn validate(&self, params: &ProtocolParams<T>) -> Result<(), ProtocolError> {
        Self::new(
            params,
            self.exponent.clone(),
            self.basis_index,
            self.strategy.clone(),
        )
        .map(|_| ())
    }
}

impl<T: UnsignedInt> BobState<T> {
    pub fn new(
        params: &ProtocolParams<T>,
        exponent: T,
        basis_index: usize,
    ) -> Result<Self, ProtocolError> {
        check_exponent(&exponent, &params.q)?;
        check_basis_index(basis_index, params)?;
        Ok(BobState {
            exponent,
            basis_index,
        })
    }

    pub fn sample(params: &ProtocolParams<T>, rng: &mut dyn RngCore) -> Self {
        BobState {
            exponent: sample_exponent(&params.q, rng),
            basis_index: sample_basis_index(params.m(), rng),
        }
    }

    fn validate(&self, params: &ProtocolParams<T>) -> Result<(), ProtocolError> {
        Self::new(params, self.exponent.clone(), self.basis_index).map(|_| ())
    }
}

/// Everything that crossed the channel in one session plus both outcomes.
/// Basis indices are audit-only: they are never transmitted, so an endpoint
/// transcript only knows its own side's index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTranscript<T = Natural> {
    pub commit_a: T,
    pub commit_b: T,
    pub ciphertext: Vec<u8>,
    pub verification_value: T,
    pub bob_verdict: Verdict,
    pub bob_decrypted: bool,
    pub bob_flags_cheating: bool,
    pub alice_basis: Option<usize>,
    pub bob_basis: Option<usize>,
}

impl<T: UnsignedInt> SessionTranscript<T> {
    /// Line-oriented text form: `field=value`, integers in lowercase hex.
    /// Audit-only basis lines are omitted when the writer does not know them.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("A={:x}\n", self.commit_a));
        out.push_str(&format!("B={:x}\n", self.commit_b));
        out.push_str(&format!("ciphertext={}\n", hex::encode(&self.ciphertext)));
        out.push_str(&format!(
            "verification_value={:x}\n",
            self.verification_value
        ));
        out.push_str(&format!("bob_verdict={}\n", self.bob_verdict.as_str()));
        out.push_str(&format!("bob_decrypted={}\n", self.bob_decrypted));
        out.push_str(&format!("bob_flags_cheating={}\n", self.bob_flags_cheating));
        if let Some(i) = self.alice_basis {
            out.push_str(&format!("i={i:x}\n"));
        }
        if let Some(j) = self.bob_basis {
            out.push_str(&format!("j={j:x}\n"));
        }
        out
    }

    /// The fields both endpoints and the in-process runner can see.
    pub fn wire_fields(&self) -> (&T, &T, &[u8], &T, Verdict, bool, bool) {
        (
            &self.commit_a,
            &self.commit_b,
            &self.ciphertext,
            &self.verification_value,
            self.bob_verdict,
            self.bob_decrypted,
            self.bob_flags_cheating,
        )
    }
}

/// `A = u_i^a mod p`.
pub fn alice_commit<T: UnsignedInt>(
    params: &ProtocolParams<T>,
    state: &AliceState<T>,
) -> Result<T, ProtocolError> {
    check_basis_index(state.basis_index, params)?;
    let basis = params.basis(state.basis_index).expect("index checked");
    Ok(mod_exp(basis, &state.exponent, &params.p)?)
}

/// `B = u_j^b mod p`.
pub fn bob_commit<T: UnsignedInt>(
    params: &ProtocolParams<T>,
    state: &BobState<T>,
) -> Result<T, ProtocolError> {
    check_basis_index(state.basis_index, params)?;
    let basis = params.basis(state.basis_index).expect("index checked");
    Ok(mod_exp(basis, &state.exponent, &params.p)?)
}

/// Raise the peer's commitment to one's own exponent; both key-derivation
/// steps are this one operation.
pub fn compute_key<T: UnsignedInt>(
    received: &T,
    own_exponent: &T,
    p: &T,
) -> Result<T, ProtocolError> {
    if received.is_zero() || received >= p {
        return Err(ProtocolError::MalformedCommitment);
    }
    Ok(mod_exp(received, own_exponent, p)?)
}

/// Self-test of the public relation between the two keys:
/// `u1^(ab) = u2^(ab) * k^(ab) mod p`. Not on the protocol path.
pub fn key_relationship_holds<T: UnsignedInt>(
    params: &ProtocolParams<T>,
    a: &T,
    b: &T,
) -> Result<bool, ProtocolError> {
    let ab = a.clone() * b.clone();
    let u1 = params.basis(1).ok_or(ProtocolError::BadBasisIndex {
        index: 1,
        count: params.m(),
    })?;
    let u2 = params.basis(2).ok_or(ProtocolError::BadBasisIndex {
        index: 2,
        count: params.m(),
    })?;
    let lhs = mod_exp(u1, &ab, &params.p)?;
    let rhs = mod_exp(u2, &ab, &params.p)?.mul_mod(&mod_exp(&params.k, &ab, &params.p)?, &params.p);
    Ok(lhs == rhs)
}

/// 32-byte symmetric key from a group element: SHA-256 over the 4-byte
/// big-endian length of the minimal big-endian encoding, then the encoding.
pub fn derive_symmetric_key<T: UnsignedInt>(key_residue: &T, p: &T) -> [u8; 32] {
    debug_assert!(key_residue < p, "key must be a residue mod p");
    let bytes = key_residue.to_be_bytes_minimal();
    let mut hasher = Sha256::new();
    hasher.update((bytes.len() as u32).to_be_bytes());
    hasher.update(&bytes);
    hasher.finalize().into()
}

/// A secret bound to the key that sealed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretPayload {
    pub plaintext: Vec<u8>,
    /// `SHA-256(key || plaintext)`.
    pub tag: [u8; 32],
}

impl SecretPayload {
    pub fn seal(key: &[u8; 32], plaintext: &[u8]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(key);
        hasher.update(plaintext);
        SecretPayload {
            plaintext: plaintext.to_vec(),
            tag: hasher.finalize().into(),
        }
    }

    pub fn verify(&self, key: &[u8; 32]) -> bool {
        Self::seal(key, &self.plaintext).tag == self.tag
    }
}

fn keystream_block(key: &[u8; 32], counter: u32) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(key);
    hasher.update(counter.to_be_bytes());
    hasher.finalize().into()
}

fn xor_keystream(key: &[u8; 32], data: &mut [u8]) {
    for (block_index, chunk) in data.chunks_mut(32).enumerate() {
        let block = keystream_block(key, block_index as u32);
        for (byte, pad) in chunk.iter_mut().zip(block.iter()) {
            *byte ^= pad;
        }
    }
}

/// XOR the plaintext with a SHA-256 counter keystream and append the 32-byte
/// binding tag; output length is `plaintext.len() + 32`.
pub fn encrypt_secret(key: &[u8; 32], plaintext: &[u8]) -> Vec<u8> {
    assert!(
        plaintext.len() as u64 <= u32::MAX as u64,
        "plaintext too large"
    );
    let payload = SecretPayload::seal(key, plaintext);
    let mut out = payload.plaintext;
    xor_keystream(key, &mut out);
    out.extend_from_slice(&payload.tag);
    out
}

/// Invert [`encrypt_secret`]; the tag decides whether the key fit, which is
/// what makes decryption success recognizable.
pub fn decrypt_secret(key: &[u8; 32], ciphertext: &[u8]) -> Result<Vec<u8>, DecryptError> {
    if ciphertext.len() < 32 {
        return Err(DecryptError::MalformedCiphertext);
    }
    let (body, tag) = ciphertext.split_at(ciphertext.len() - 32);
    let mut plaintext = body.to_vec();
    xor_keystream(key, &mut plaintext);
    let payload = SecretPayload {
        plaintext,
        tag: tag.try_into().expect("32-byte split"),
    };
    if !payload.verify(key) {
        return Err(DecryptError::TagMismatch);
    }
    Ok(payload.plaintext)
}

/// Alice's step-5 value: her key (honest or fake, per strategy) raised to
/// the public exponent `r`, i.e. `u_j^(abr)` in the honest case.
pub fn alice_verification_value<T: UnsignedInt>(
    k_alice: &T,
    r: &T,
    p: &T,
) -> Result<T, ProtocolError> {
    Ok(mod_exp(k_alice, r, p)?)
}

/// Bob's step-6 check. Equal `K^r` values mean the bases collided, so a
/// failed decryption there is proof of cheating. Unequal values are expected
/// on a basis mismatch; Bob rebuilds the power-sum window against every
/// candidate basis other than his own, since he cannot know which one
/// underlies his key.
pub fn bob_verify<T: UnsignedInt>(
    params: &ProtocolParams<T>,
    bob: &BobState<T>,
    k_bob: &T,
    received_vn: &T,
    decrypt_succeeded: bool,
) -> Result<(Verdict, bool), ProtocolError> {
    check_basis_index(bob.basis_index, params)?;
    let own_wn = mod_exp(k_bob, &params.r, &params.p)?;
    if *received_vn == own_wn {
        return Ok((Verdict::Match, !decrypt_succeeded));
    }
    let own_basis = params.basis(bob.basis_index).expect("index checked");
    let mut verdict = Verdict::RecurrenceFail;
    for (c, candidate) in params.bases.iter().enumerate() {
        if c + 1 == bob.basis_index {
            continue;
        }
        let v = vseq::verify_received_power(own_basis, candidate, received_vn, &own_wn, &params.p)?;
        if v == Verdict::RecurrenceOk {
            verdict = Verdict::RecurrenceOk;
            break;
        }
    }
    Ok((verdict, verdict == Verdict::RecurrenceFail))
}

/// Alice's step-3 keys under her strategy: the one she encrypts with and the
/// one her verification value is derived from.
pub(crate) fn alice_session_keys<T: UnsignedInt>(
    params: &ProtocolParams<T>,
    alice: &AliceState<T>,
    commit_b: &T,
) -> Result<(T, T), ProtocolError> {
    let honest_key = compute_key(commit_b, &alice.exponent, &params.p)?;
    Ok(match &alice.strategy {
        CheatStrategy::Honest => (honest_key.clone(), honest_key),
        CheatStrategy::FakeKeyHonestVerify { fake_exponent } => {
            (compute_key(commit_b, fake_exponent, &params.p)?, honest_key)
        }
        CheatStrategy::FakeKeyFakeVerify { fake_exponent } => {
            let fake = compute_key(commit_b, fake_exponent, &params.p)?;
            (fake.clone(), fake)
        }
    })
}

/// Run the full six-step session in process and record the transcript.
pub fn run_session<T: UnsignedInt>(
    params: &ProtocolParams<T>,
    alice: &AliceState<T>,
    bob: &BobState<T>,
    secret: &[u8],
) -> Result<SessionTranscript<T>, ProtocolError> {
    alice.validate(params)?;
    bob.validate(params)?;

    let commit_a = alice_commit(params, alice)?;
    let commit_b = bob_commit(params, bob)?;

    let (encryption_key, verification_key) = alice_session_keys(params, alice, &commit_b)?;
    let ciphertext = encrypt_secret(&derive_symmetric_key(&encryption_key, &params.p), secret);
    let verification_value = alice_verification_value(&verification_key, &params.r, &params.p)?;

    let k_bob = compute_key(&commit_a, &bob.exponent, &params.p)?;
    let bob_key = derive_symmetric_key(&k_bob, &params.p);
    let bob_decrypted = decrypt_secret(&bob_key, &ciphertext).is_ok();
    let (bob_verdict, bob_flags_cheating) =
        bob_verify(params, bob, &k_bob, &verification_value, bob_decrypted)?;

    Ok(SessionTranscript {
        commit_a,
        commit_b,
        ciphertext,
        verification_value,
        bob_verdict,
        bob_decrypted,
        bob_flags_cheating,
        alice_basis: Some(alice.basis_index),
        bob_basis: Some(bob.basis_index),
    })
}
