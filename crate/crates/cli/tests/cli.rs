//! End-to-end checks of the `otv` binary: parameter files, sequence
//! printing, simulation JSON, and a real two-process session over loopback.

use std::collections::BTreeSet;
use std::net::TcpListener;
use std::process::{Command, Output, Stdio};
use std::thread;
use std::time::Duration;

use otv::ProtocolParams;

fn otv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otv"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn otv");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn gen_params_file(dir: &tempfile::TempDir, bases: u32, seed: u64) -> std::path::PathBuf {
    let path = dir.path().join(format!("params-{bases}-{seed}.txt"));
    run_ok(otv().args([
        "gen-params",
        "--bits",
        "16",
        "--bases",
        &bases.to_string(),
        "--out",
        path.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
    ]));
    path
}

#[test]
fn gen_params_writes_a_valid_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_params_file(&dir, 3, 5);
    let text = std::fs::read_to_string(&path).unwrap();
    let params = ProtocolParams::from_file_str(&text).unwrap();
    assert_eq!(params.m(), 3);
    assert!(params.validate().all_pass());
}

#[test]
fn gseq_prints_the_worked_series() {
    let out = run_ok(otv().args(["gseq", "--v", "3", "--w", "7", "--mod", "19", "--n", "6"]));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "2, 10, 1, 9, 12, 7, 8\n"
    );
    let out = run_ok(otv().args(["gseq", "--v", "3", "--w", "5", "--mod", "17", "--n", "9"]));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "2, 8, 0, 16, 9, 2, 0, 4, 15, 9\n"
    );
}

#[test]
fn simulate_emits_the_documented_json_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_params_file(&dir, 2, 6);
    let out = run_ok(otv().args([
        "simulate",
        "--params",
        path.to_str().unwrap(),
        "--trials",
        "300",
        "--strategy",
        "honest",
        "--seed",
        "9",
        "--json",
    ]));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let keys: BTreeSet<&str> = doc
        .as_object()
        .unwrap()
        .keys()
        .map(|k| k.as_str())
        .collect();
    let expected: BTreeSet<&str> = [
        "trials",
        "basis_matches",
        "decrypt_successes",
        "cheating_flags",
        "recurrence_fails",
        "match_rate",
        "audit_verdict",
    ]
    .into_iter()
    .collect();
    assert_eq!(keys, expected);
    assert_eq!(doc["trials"], 300);
    assert_eq!(doc["cheating_flags"], 0);
    assert_eq!(doc["audit_verdict"], "consistent");
    assert!(doc["match_rate"].as_f64().unwrap() > 0.3);
}

#[test]
fn simulate_audit_flags_fake_verify_batches() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_params_file(&dir, 2, 6);
    let out = run_ok(otv().args([
        "simulate",
        "--params",
        path.to_str().unwrap(),
        "--trials",
        "400",
        "--strategy",
        "fake-key-fake-verify",
        "--seed",
        "10",
        "--json",
    ]));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["audit_verdict"], "anomalous");
    assert_eq!(doc["decrypt_successes"], 0);
}

#[test]
fn rejects_a_tampered_parameter_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen_params_file(&dir, 2, 7);
    let tampered: String = std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(|l| if l.starts_with("k=") { "k=1" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&path, tampered).unwrap();
    let out = otv()
        .args([
            "simulate",
            "--params",
            path.to_str().unwrap(),
            "--trials",
            "10",
            "--strategy",
            "honest",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parameter"));
}

#[test]
fn two_process_session_over_loopback() {
    let dir = tempfile::tempdir().unwrap();
    let params_path = gen_params_file(&dir, 2, 8);
    let secret_path = dir.path().join("secret.bin");
    std::fs::write(&secret_path, b"between two processes").unwrap();
    let recovered_path = dir.path().join("recovered.bin");

    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let addr = format!("127.0.0.1:{port}");

    let alice = otv()
        .args([
            "alice",
            "--params",
            params_path.to_str().unwrap(),
            "--listen",
            &addr,
            "--secret",
            secret_path.to_str().unwrap(),
            "--seed",
            "21",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();

    // the listener may not be up yet; retry the client
    let mut bob_out = None;
    for _ in 0..100 {
        let out = otv()
            .args([
                "bob",
                "--params",
                params_path.to_str().unwrap(),
                "--connect",
                &addr,
                "--seed",
                "22",
                "--recovered-out",
                recovered_path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        if out.status.success() {
            bob_out = Some(out);
            break;
        }
        thread::sleep(Duration::from_millis(50));
    }
    let bob_out = bob_out.expect("bob never connected");
    let alice_out = alice.wait_with_output().unwrap();
    assert!(alice_out.status.success());

    let alice_text = String::from_utf8_lossy(&alice_out.stdout).to_string();
    let bob_text = String::from_utf8_lossy(&bob_out.stdout).to_string();

    // every transmitted field agrees between the two transcripts
    let shared = |text: &str| -> Vec<String> {
        text.lines()
            .filter(|l| !l.starts_with("i=") && !l.starts_with("j="))
            .map(str::to_string)
            .collect()
    };
    assert_eq!(shared(&alice_text), shared(&bob_text));
    assert!(alice_text.lines().any(|l| l.starts_with("i=")));
    assert!(bob_text.lines().any(|l| l.starts_with("j=")));

    let decrypted = bob_text.contains("bob_decrypted=true");
    assert_eq!(recovered_path.exists(), decrypted);
    if decrypted {
        assert_eq!(
            std::fs::read(&recovered_path).unwrap(),
            b"between two processes"
        );
    }
}
