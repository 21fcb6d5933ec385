use std::fs;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_traits::Num;
use rand::Rng;

use otv::protocol::CheatMode;
use otv::sim::{audit_match_rate, run_trials};
use otv::vseq::g_sequence;
use otv::wire::{run_alice_endpoint, run_bob_endpoint};
use otv::{Natural, ProtocolParams};

#[derive(Parser)]
#[command(
    name = "otv",
    about = "Probabilistic secret transfer over a published basis list, with verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Honest,
    FakeKeyHonestVerify,
    FakeKeyFakeVerify,
}

impl From<Mode> for CheatMode {
    fn from(mode: Mode) -> CheatMode {
        match mode {
            Mode::Honest => CheatMode::Honest,
            Mode::FakeKeyHonestVerify => CheatMode::FakeKeyHonestVerify,
            Mode::FakeKeyFakeVerify => CheatMode::FakeKeyFakeVerify,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a parameter file: safe prime, basis list, derived constant,
    /// verification exponent.
    GenParams {
        /// Bit length of the prime modulus (>= 16).
        #[arg(long)]
        bits: u64,
        /// Number of bases (>= 2); the transfer probability is 1/bases.
        #[arg(long)]
        bases: usize,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        /// RNG seed; drawn from OS entropy (and printed) when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Verification exponent; random in [2, q) when absent.
        #[arg(long, value_name = "R")]
        r: Option<String>,
    },
    /// Listen for one session as the sender.
    Alice {
        #[arg(long)]
        params: PathBuf,
        /// Address to listen on, e.g. 127.0.0.1:4070.
        #[arg(long)]
        listen: String,
        /// File whose bytes are the secret.
        #[arg(long)]
        secret: PathBuf,
        /// Play a cheating strategy instead of the honest one.
        #[arg(long, value_enum, default_value = "honest")]
        cheat: Mode,
        /// Separate seed for the fake exponent of the cheat strategies.
        #[arg(long)]
        fake_exponent_seed: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Socket timeout in seconds.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
    },
    /// Connect and run one session as the receiver.
    Bob {
        #[arg(long)]
        params: PathBuf,
        /// Address to connect to.
        #[arg(long)]
        connect: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Socket timeout in seconds.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        /// Write the recovered secret here when decryption succeeds.
        #[arg(long)]
        recovered_out: Option<PathBuf>,
    },
    /// Print the power-sum sequence v^n + w^n mod p as comma-separated
    /// decimals.
    Gseq {
        #[arg(long)]
        v: String,
        #[arg(long)]
        w: String,
        #[arg(long = "mod")]
        modulus: String,
        /// Largest index; prints n+1 terms.
        #[arg(long)]
        n: usize,
    },
    /// Run a Monte Carlo batch of in-process sessions and audit the
    /// MATCH-verdict rate against 1/m.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        trials: u64,
        #[arg(long, value_enum)]
        strategy: Mode,
        #[arg(long)]
        seed: u64,
        /// Emit one JSON object instead of the text summary.
        #[arg(long)]
        json: bool,
        /// Audit significance level.
        #[arg(long, default_value_t = 0.001)]
        significance: f64,
    },
}

fn parse_natural(text: &str, what: &str) -> Result<Natural> {
    BigUint::from_str_radix(text, 10).with_context(|| format!("{what} must be a decimal integer"))
}

fn load_params(path: &PathBuf) -> Result<ProtocolParams> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading parameter file {}", path.display()))?;
    ProtocolParams::from_file_str(&text).context("parsing parameter file")
}

fn entropy_seed(seed: Option<u64>, label: &str) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::thread_rng().gen();
            eprintln!("{label} seed: {s}");
            s
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenParams {
            bits,
            bases,
            out,
            seed,
            r,
        } => {
            let seed = entropy_seed(seed, "generation");
            let r_choice = r.map(|r| parse_natural(&r, "--r")).transpose()?;
            let params = ProtocolParams::generate_seeded(bits, bases, r_choice, seed)
                .context("parameter generation failed")?;
            fs::write(&out, params.to_file_string())
                .with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "wrote {} ({}-bit p, {} bases)",
                out.display(),
                bits,
                params.m()
            );
        }
        Command::Alice {
            params,
            listen,
            secret,
            cheat,
            fake_exponent_seed,
            seed,
            timeout,
        } => {
            let params = load_params(&params)?;
            let secret = fs::read(&secret)
                .with_context(|| format!("reading secret file {}", secret.display()))?;
            let seed = entropy_seed(seed, "session");
            let listener =
                TcpListener::bind(&listen).with_context(|| format!("binding {listen}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            let (mut stream, peer) = listener.accept().context("accepting connection")?;
            eprintln!("session with {peer}");
            configure(&stream, timeout)?;
            let transcript = run_alice_endpoint(
                &params,
                cheat.into(),
                &secret,
                &mut stream,
                seed,
                fake_exponent_seed,
            )?;
            print!("{}", transcript.to_text());
        }
        Command::Bob {
            params,
            connect,
            seed,
            timeout,
            recovered_out,
        } => {
            let params = load_params(&params)?;
            let seed = entropy_seed(seed, "session");
            let mut stream =
                TcpStream::connect(&connect).with_context(|| format!("connecting to {connect}"))?;
            configure(&stream, timeout)?;
            let outcome = run_bob_endpoint(&params, &mut stream, seed)?;
            print!("{}", outcome.transcript.to_text());
            match (outcome.recovered_secret, recovered_out) {
                (Some(bytes), Some(path)) => {
                    fs::write(&path, bytes)
                        .with_context(|| format!("writing {}", path.display()))?;
                    eprintln!("recovered secret written to {}", path.display());
                }
                (Some(bytes), None) => eprintln!("recovered secret ({} bytes)", bytes.len()),
                (None, _) => eprintln!("secret not recovered (key mismatch)"),
            }
        }
        Command::Gseq { v, w, modulus, n } => {
            let v = parse_natural(&v, "--v")?;
            let w = parse_natural(&w, "--w")?;
            let modulus = parse_natural(&modulus, "--mod")?;
            if modulus < Natural::from(2u32) {
                bail!("--mod must be at least 2");
            }
            let seq = g_sequence(&v, &w, &modulus, n);
            let rendered: Vec<String> = seq.terms.iter().map(|t| t.to_string()).collect();
            println!("{}", rendered.join(", "));
        }
        Command::Simulate {
            params,
            trials,
            strategy,
            seed,
            json,
            significance,
        } => {
            let params = load_params(&params)?;
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let stats = run_trials(&params, trials, strategy.into(), seed);
            let verdict = audit_match_rate(&stats, params.m(), significance)?;
            if json {
                let doc = serde_json::json!({
                    "trials": stats.trials,
                    "basis_matches": stats.basis_matches,
                    "decrypt_successes": stats.decrypt_successes,
                    "cheating_flags": stats.cheating_flags,
                    "recurrence_fails": stats.recurrence_fail_verdicts,
                    "match_rate": stats.match_rate(),
                    "audit_verdict": verdict.as_str(),
                });
                println!("{doc}");
            } else {
                println!("trials:             {}", stats.trials);
                println!("basis matches:      {}", stats.basis_matches);
                println!("decrypt successes:  {}", stats.decrypt_successes);
                println!("cheating flags:     {}", stats.cheating_flags);
                println!("match verdicts:     {}", stats.match_verdicts);
                println!("recurrence ok:      {}", stats.recurrence_ok_verdicts);
                println!("recurrence fail:    {}", stats.recurrence_fail_verdicts);
                println!("match rate:         {:.4}", stats.match_rate());
                println!(
                    "audit ({} expected {:.4}): {}",
                    params.m(),
                    1.0 / params.m() as f64,
                    verdict.as_str()
                );
            }
        }
    }
    Ok(())
}

fn configure(stream: &TcpStream, timeout_secs: u64) -> Result<()> {
    let timeout = Some(Duration::from_secs(timeout_secs));
    stream.set_read_timeout(timeout)?;
    stream.set_write_timeout(timeout)?;
    stream.set_nodelay(true)?;
    Ok(())
}
