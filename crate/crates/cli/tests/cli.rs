use std::process::{Command, Output};

fn ofec_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ofec-sim")).args(args).env("RUST_BACKTRACE", "0").output().unwrap()
}

#[test]
fn genpattern_then_regress() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("cat1.csv");
    let out = ofec_sim(&["genpattern", "--category", "1", "--count", "2", "--out", corpus.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = ofec_sim(&["regress", "--corpus", corpus.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("pattern,label,category,seed,decoder,verdict,residual,spr_invocations"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("ibdd: 0/2 resolved"));
    assert!(stderr.contains("ibdd-rapp: 2/2 resolved"));
    assert!(stderr.contains("ibdd-pipeline: 2/2 resolved"));
}

#[test]
fn simulate_bsc_writes_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bsc.csv");
    let args = ["simulate", "--channel", "bsc", "--p", "0.02,0.001", "--decoder", "ibdd", "--max-bits", "200000",
        "--batch", "8", "--out", csv.to_str().unwrap()];
    let out = ofec_sim(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
    let body = std::fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with('#'));
    assert_eq!(body.lines().count(), 4);

    let again = ofec_sim(&args);
    assert!(again.status.success());
    assert!(again.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), body);
}

#[test]
fn bad_arguments_are_rejected() {
    assert!(!ofec_sim(&["simulate", "--channel", "bsc", "--snr-db", "14", "--out", "/dev/null"]).status.success());
    assert!(!ofec_sim(&["genpattern", "--category", "3", "--out", "/dev/null"]).status.success());
    assert!(!ofec_sim(&["regress", "--corpus", "/nonexistent.csv"]).status.success());
}
