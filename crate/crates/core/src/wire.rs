//! Binary wire protocol for running one session between two processes over a
//! byte stream.
//!
//! Framing: 1 type byte, 4-byte big-endian payload length, payload.
//! Integer payloads are a 4-byte big-endian length followed by the minimal
//! big-endian magnitude (zero is the single byte `0x00`).
//!
//! Message sequence, Alice first:
//! PARAMS (each side sends the SHA-256 of the canonical parameter file;
//! agreement on the actual values happens out of band) then
//! COMMIT_A -> COMMIT_B -> CIPHERTEXT -> VERIFY_VALUE -> RESULT.
//! RESULT carries Bob's verdict, decrypt outcome, and cheating flag so
//! Alice's transcript is complete.

use std::io::{ErrorKind, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::params::ProtocolParams;
use crate::protocol::{
    alice_commit, alice_session_keys, alice_verification_value, bob_commit, bob_verify,
    compute_key, decrypt_secret, derive_symmetric_key, encrypt_secret, AliceState, BobState,
    CheatMode, ProtocolError, SessionTranscript,
};
use crate::vseq::Verdict;
use crate::Natural;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Params = 0x01,
    CommitA = 0x02,
    CommitB = 0x03,
    Ciphertext = 0x04,
    VerifyValue = 0x05,
    Result = 0x06,
}

impl MsgType {
    pub fn from_byte(byte: u8) -> Option<MsgType> {
        match byte {
            0x01 => Some(MsgType::Params),
            0x02 => Some(MsgType::CommitA),
            0x03 => Some(MsgType::CommitB),
            0x04 => Some(MsgType::Ciphertext),
            0x05 => Some(MsgType::VerifyValue),
            0x06 => Some(MsgType::Result),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MsgType::Params => "PARAMS",
            MsgType::CommitA => "COMMIT_A",
            MsgType::CommitB => "COMMIT_B",
            MsgType::Ciphertext => "CIPHERTEXT",
            MsgType::VerifyValue => "VERIFY_VALUE",
            MsgType::Result => "RESULT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("unknown message type byte 0x{0:02x}")]
    UnknownMessageType(u8),
    #[error("incomplete frame")]
    IncompleteFrame,
    #[error("payload exceeds the 4-byte length field")]
    OversizedPayload,
    #[error("protocol order violation: expected {expected}, got {got}")]
    OutOfOrder {
        expected: &'static str,
        got: &'static str,
    },
    #[error("malformed {0} payload")]
    MalformedPayload(&'static str),
    #[error("peer parameter digest differs from ours")]
    ParamsMismatch,
    #[error("channel timed out")]
    Timeout,
    #[error("channel closed before the session finished")]
    Closed,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// One frame: type byte, big-endian length, payload.
pub fn encode_message(msg: &WireMessage) -> Result<Vec<u8>, WireError> {
    let len = u32::try_from(msg.payload.len()).map_err(|_| WireError::OversizedPayload)?;
    let mut out = Vec::with_capacity(5 + msg.payload.len());
    out.push(msg.msg_type as u8);
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&msg.payload);
    Ok(out)
}

/// Inverse of [`encode_message`]; returns the message and the bytes
/// consumed. A prefix of a frame is `IncompleteFrame`, never a different
/// message.
pub fn decode_message(bytes: &[u8]) -> Result<(WireMessage, usize), WireError> {
    if bytes.len() < 5 {
        return Err(WireError::IncompleteFrame);
    }
    let msg_type = MsgType::from_byte(bytes[0]).ok_or(WireError::UnknownMessageType(bytes[0]))?;
    let len = u32::from_be_bytes(bytes[1..5].try_into().expect("4 bytes")) as usize;
    if bytes.len() < 5 + len {
        return Err(WireError::IncompleteFrame);
    }
    Ok((
        WireMessage {
            msg_type,
            payload: bytes[5..5 + len].to_vec(),
        },
        5 + len,
    ))
}

/// Length-prefixed minimal big-endian integer payload.
pub fn encode_uint(n: &Natural) -> Vec<u8> {
    use crate::scalar::UnsignedInt;
    let bytes = n.to_be_bytes_minimal();
    let mut out = Vec::with_capacity(4 + bytes.len());
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(&bytes);
    out
}

pub fn decode_uint(payload: &[u8]) -> Result<Natural, WireError> {
    if payload.len() < 4 {
        return Err(WireError::MalformedPayload("integer"));
    }
    let len = u32::from_be_bytes(payload[..4].try_into().expect("4 bytes")) as usize;
    let bytes = &payload[4..];
    if bytes.len() != len || len == 0 || (len > 1 && bytes[0] == 0) {
        return Err(WireError::MalformedPayload("integer"));
    }
    Ok(Natural::from_bytes_be(bytes))
}

fn encode_result(verdict: Verdict, decrypted: bool, flags: bool) -> Vec<u8> {
    let verdict_byte = match verdict {
        Verdict::Match => 0u8,
        Verdict::RecurrenceOk => 1,
        Verdict::RecurrenceFail => 2,
    };
    vec![verdict_byte, decrypted as u8, flags as u8]
}

fn decode_result(payload: &[u8]) -> Result<(Verdict, bool, bool), WireError> {
    let malformed = WireError::MalformedPayload("RESULT");
    if payload.len() != 3 {
        return Err(malformed);
    }
    let verdict = match payload[0] {
        0 => Verdict::Match,
        1 => Verdict::RecurrenceOk,
        2 => Verdict::RecurrenceFail,
        _ => return Err(malformed),
    };
    let flag = |b: u8| match b {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(WireError::MalformedPayload("RESULT")),
    };
    Ok((verdict, flag(payload[1])?, flag(payload[2])?))
}

fn map_io(e: std::io::Error, at_boundary: bool) -> WireError {
    match e.kind() {
        ErrorKind::WouldBlock | ErrorKind::TimedOut => WireError::Timeout,
        ErrorKind::UnexpectedEof => {
            if at_boundary {
                WireError::Closed
            } else {
                WireError::IncompleteFrame
            }
        }
        _ => WireError::Io(e),
    }
}

/// Blocking read of exactly one frame. Timeouts come from the stream's own
/// configuration (e.g. `TcpStream::set_read_timeout`).
pub fn read_message<S: Read>(stream: &mut S) -> Result<WireMessage, WireError> {
    let mut header = [0u8; 5];
    stream
        .read_exact(&mut header[..1])
        .map_err(|e| map_io(e, true))?;
    let msg_type = MsgType::from_byte(header[0]).ok_or(WireError::UnknownMessageType(header[0]))?;
    stream
        .read_exact(&mut header[1..])
        .map_err(|e| map_io(e, false))?;
    let len = u32::from_be_bytes(header[1..5].try_into().expect("4 bytes")) as usize;
    let mut payload = vec![0u8; len];
    stream
        .read_exact(&mut payload)
        .map_err(|e| map_io(e, false))?;
    Ok(WireMessage { msg_type, payload })
}

pub fn write_message<S: Write>(stream: &mut S, msg: &WireMessage) -> Result<(), WireError> {
    let bytes = encode_message(msg)?;
    stream.write_all(&bytes).map_err(|e| map_io(e, false))?;
    stream.flush().map_err(|e| map_io(e, false))?;
    Ok(())
}

fn expect_message<S: Read>(stream: &mut S, expected: MsgType) -> Result<Vec<u8>, WireError> {
    let msg = read_message(stream)?;
    if msg.msg_type != expected {
        return Err(WireError::OutOfOrder {
            expected: expected.name(),
            got: msg.msg_type.name(),
        });
    }
    Ok(msg.payload)
}

fn send(stream: &mut impl Write, msg_type: MsgType, payload: Vec<u8>) -> Result<(), WireError> {
    write_message(stream, &WireMessage { msg_type, payload })
}

/// Drive Alice's side of one session. Her exponent, basis choice, and (for
/// cheat modes) fake exponent are drawn from `seed`, the fake exponent from
/// `fake_exponent_seed` instead when given. The returned transcript matches
/// the in-process [`crate::protocol::run_session`] on every transmitted
/// field; Bob's basis index is not transmitted and stays unknown.
pub fn run_alice_endpoint<S: Read + Write>(
    params: &ProtocolParams<Natural>,
    mode: CheatMode,
    secret: &[u8],
    channel: &mut S,
    seed: u64,
    fake_exponent_seed: Option<u64>,
) -> Result<SessionTranscript<Natural>, WireError> {
    let digest = params.digest();
    send(channel, MsgType::Params, digest.to_vec())?;
    if expect_message(channel, MsgType::Params)? != digest {
        return Err(WireError::ParamsMismatch);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let alice = match fake_exponent_seed {
        None => AliceState::sample(params, mode, &mut rng),
        Some(fs) => {
            let mut fake_rng = ChaCha20Rng::seed_from_u64(fs);
            AliceState::sample_with_fake_rng(params, mode, &mut rng, &mut fake_rng)
        }
    };

    let commit_a = alice_commit(params, &alice)?;
    send(channel, MsgType::CommitA, encode_uint(&commit_a))?;
    let commit_b = decode_uint(&expect_message(channel, MsgType::CommitB)?)?;

    let (encryption_key, verification_key) = alice_session_keys(params, &alice, &commit_b)?;
    let ciphertext = encrypt_secret(&derive_symmetric_key(&encryption_key, &params.p), secret);
    send(channel, MsgType::Ciphertext, ciphertext.clone())?;
    let verification_value = alice_verification_value(&verification_key, &params.r, &params.p)?;
    send(
        channel,
        MsgType::VerifyValue,
        encode_uint(&verification_value),
    )?;

    let (bob_verdict, bob_decrypted, bob_flags_cheating) =
        decode_result(&expect_message(channel, MsgType::Result)?)?;

    Ok(SessionTranscript {
        commit_a,
        commit_b,
        ciphertext,
        verification_value,
        bob_verdict,
        bob_decrypted,
        bob_flags_cheating,
        alice_basis: Some(alice.basis_index),
        bob_basis: None,
    })
}

/// What Bob's endpoint hands back: his transcript and, when his key fit,
/// the secret itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobEndpointOutcome {
    pub transcript: SessionTranscript<Natural>,
    pub recovered_secret: Option<Vec<u8>>,
}

/// Drive Bob's side of one session; exponent and basis choice come from
/// `seed`.
pub fn run_bob_endpoint<S: Read + Write>(
    params: &ProtocolParams<Natural>,
    channel: &mut S,
    seed: u64,
) -> Result<BobEndpointOutcome, WireError> {
    let digest = params.digest();
    if expect_message(channel, MsgType::Params)? != digest {
        return Err(WireError::ParamsMismatch);
    }
    send(channel, MsgType::Params, digest.to_vec())?;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bob = BobState::sample(params, &mut rng);

    let commit_a = decode_uint(&expect_message(channel, MsgType::CommitA)?)?;
    let commit_b = bob_commit(params, &bob)?;
    send(channel, MsgType::CommitB, encode_uint(&commit_b))?;

    let ciphertext = expect_message(channel, MsgType::Ciphertext)?;
    let verification_value = decode_uint(&expect_message(channel, MsgType::VerifyValue)?)?;

    let k_bob = compute_key(&commit_a, &bob.exponent, &params.p)?;
    let recovered = decrypt_secret(&derive_symmetric_key(&k_bob, &params.p), &ciphertext).ok();
    let bob_decrypted = recovered.is_some();
    let (bob_verdict, bob_flags_cheating) =
        bob_verify(params, &bob, &k_bob, &verification_value, bob_decrypted)?;

    send(
        channel,
        MsgType::Result,
        encode_result(bob_verdict, bob_decrypted, bob_flags_cheating),
    )?;

    Ok(BobEndpointOutcome {
        transcript: SessionTranscript {
            commit_a,
            commit_b,
            ciphertext,
            verification_value,
            bob_verdict,
            bob_decrypted,
            bob_flags_cheating,
            alice_basis: None,
            bob_basis: Some(bob.basis_index),
        },
        recovered_secret: recovered,
    })
}
