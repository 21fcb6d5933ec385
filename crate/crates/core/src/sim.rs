//! Monte Carlo batches over in-process sessions, and the batch-level audit
//! that catches the cheat variant the per-session check cannot.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::params::ProtocolParams;
use crate::protocol::{run_session, AliceState, BobState, CheatMode};
use crate::scalar::UnsignedInt;
use crate::vseq::Verdict;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("cannot audit an empty batch")]
    EmptyBatch,
    #[error("significance must lie strictly between 0 and 1")]
    BadSignificance,
}

/// Aggregate counters from one batch of independent sessions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrialStats {
    pub trials: u64,
    /// Sessions where the two basis choices coincided (audit-side knowledge).
    pub basis_matches: u64,
    pub decrypt_successes: u64,
    pub cheating_flags: u64,
    pub match_verdicts: u64,
    pub recurrence_ok_verdicts: u64,
    pub recurrence_fail_verdicts: u64,
}

impl TrialStats {
    /// Rate of MATCH verdicts, the quantity the audit tests against `1/m`.
    pub fn match_rate(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.match_verdicts as f64 / self.trials as f64
    }

    pub fn decrypt_rate(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.decrypt_successes as f64 / self.trials as f64
    }
}

/// Per-trial seed, derived from the batch seed by counter so trial order can
/// never affect the aggregate.
pub fn trial_seed(batch_seed: u64, index: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"trial");
    hasher.update(batch_seed.to_be_bytes());
    hasher.update(index.to_be_bytes());
    hasher.finalize().into()
}

const TRIAL_SECRET: &[u8] = b"per-trial fixed secret";

/// Run `n_trials` independent sessions with fresh exponents and basis
/// choices; deterministic for a given seed.
pub fn run_trials<T: UnsignedInt>(
    params: &ProtocolParams<T>,
    n_trials: u64,
    mode: CheatMode,
    seed: u64,
) -> TrialStats {
    let mut stats = TrialStats::default();
    for index in 0..n_trials {
        let mut rng = ChaCha20Rng::from_seed(trial_seed(seed, index));
        let alice = AliceState::sample(params, mode, &mut rng);
        let bob = BobState::sample(params, &mut rng);
        let t = run_session(params, &alice, &bob, TRIAL_SECRET).expect("sampled states are valid");
        stats.trials += 1;
        if alice.basis_index == bob.basis_index {
            stats.basis_matches += 1;
        }
        if t.bob_decrypted {
            stats.decrypt_successes += 1;
        }
        if t.bob_flags_cheating {
            stats.cheating_flags += 1;
        }
        match t.bob_verdict {
            Verdict::Match => stats.match_verdicts += 1,
            Verdict::RecurrenceOk => stats.recurrence_ok_verdicts += 1,
            Verdict::RecurrenceFail => stats.recurrence_fail_verdicts += 1,
        }
    }
    stats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditVerdict {
    Consistent,
    Anomalous,
}

impl AuditVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            AuditVerdict::Consistent => "consistent",
            AuditVerdict::Anomalous => "anomalous",
        }
    }
}

/// Exact two-sided binomial test p-value: the total probability of outcomes
/// no more likely than the observed one under `Binomial(n, p0)`. Computed by
/// summation of the full pmf in log space, no normal approximation.
pub fn binomial_two_sided_p_value(n: u64, observed: u64, p0: f64) -> f64 {
    assert!(n >= 1, "empty sample");
    assert!(observed <= n, "observed count exceeds sample size");
    assert!(p0 > 0.0 && p0 < 1.0, "degenerate null probability");
    let ln_p = p0.ln();
    let ln_q = (-p0).ln_1p();
    let n_f = n as f64;
    let mut ln_pmf = Vec::with_capacity(n as usize + 1);
    let mut current = n_f * ln_q;
    ln_pmf.push(current);
    for k in 1..=n {
        let k_f = k as f64;
        current += ((n_f - k_f + 1.0) / k_f).ln() + ln_p - ln_q;
        ln_pmf.push(current);
    }
    // tolerance absorbs accumulated rounding when deciding ties
    let threshold = ln_pmf[observed as usize] + 1e-9;
    let p: f64 = ln_pmf
        .iter()
        .filter(|&&v| v <= threshold)
        .map(|&v| v.exp())
        .sum();
    p.min(1.0)
}

/// Two-sided exact binomial test of the MATCH-verdict rate against `1/m`.
/// A sender who always fakes the verification value produces no MATCH
/// verdicts at all, which this flags decisively; honest batches are flagged
/// with probability at most `significance`.
pub fn audit_match_rate(
    stats: &TrialStats,
    m: usize,
    significance: f64,
) -> Result<AuditVerdict, SimError> {
    if stats.trials == 0 {
        return Err(SimError::EmptyBatch);
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(SimError::BadSignificance);
    }
    let p_value = binomial_two_sided_p_value(stats.trials, stats.match_verdicts, 1.0 / m as f64);
    Ok(if p_value < significance {
        AuditVerdict::Anomalous
    } else {
        AuditVerdict::Consistent
    })
}
