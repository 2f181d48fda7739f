//! Exit codes and flag precedence of the binary.

use std::fs;
use std::process::{Command, Output};

fn mlpot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlpot")).args(args).output().unwrap()
}

#[test]
fn invalid_kernel_order_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mlpot(&["eval-op", "--m", "2", "--N", "16", "--kernel", "frac-1", "--out-dir", out]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpha in (0, nm) = (0, 2)"), "{err}");
}

#[test]
fn unmet_hypothesis_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mlpot(&[
        "verify", "--theorem", "coifman", "--case", "i", "--m", "2", "--N", "16", "--kernel", "frac1",
        "--p", "2", "--out-dir", out,
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_flag_exits_one() {
    assert_eq!(mlpot(&["verify", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("c.json");
    let body = serde_json::json!({
        "command": "verify", "theorem": "coifman", "case": "i", "m": 2, "N": 16,
        "kernel": "frac1", "exponents": {"p": [1.0]}, "corpus_size": 3, "out_dir": out,
    });
    fs::write(&config, body.to_string()).unwrap();
    let o = mlpot(&["verify", "--config", config.to_str().unwrap(), "--N", "32", "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("coifman-i.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["N"], 32);
    assert_eq!(json["config"]["seed"], 4);
    assert_eq!(json["config"]["kernel"], "frac1");
}
