use std::process::{Command, Output};

fn pgsmdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgsmdp")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn missing_config_is_an_io_error() {
    let out = pgsmdp(&["--config", "/nonexistent/run.toml", "train"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "schema_version = 1\n[learner]\np_a = 0.3\nbatch_size = 0\n").unwrap();
    let out = pgsmdp(&["--config", path.to_str().unwrap(), "train"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2 problem"), "{err}");

    std::fs::write(&path, "schema_version = 1\n[lerner]\n").unwrap();
    assert_eq!(code(&pgsmdp(&["--config", path.to_str().unwrap(), "train"])), 2);
}

#[test]
fn gradcheck_exit_codes() {
    let ok = pgsmdp(&["gradcheck", "--instances", "50"]);
    assert_eq!(code(&ok), 0);
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.contains("PASS") && !text.contains("FAIL"), "{text}");
    let bad = pgsmdp(&["gradcheck", "--instances", "50", "--inject-rad-sign-flip"]);
    assert_eq!(code(&bad), 4);
}

#[test]
fn default_config_parses_back() {
    let out = pgsmdp(&["default-config"]);
    assert_eq!(code(&out), 0);
    let cfg = pgsmdp::harness::RunConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, pgsmdp::harness::RunConfig::default());
}

#[test]
fn train_eval_heatmap_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let o = out_dir.to_str().unwrap();
    let train = pgsmdp(&["--trials", "1", "--episodes", "200", "--scenario", "winning", "--out", o, "train"]);
    assert_eq!(code(&train), 0, "{}", String::from_utf8_lossy(&train.stderr));
    assert!(String::from_utf8_lossy(&train.stdout).contains("goals"));
    let ck = out_dir.join(pgsmdp::harness::checkpoint_name(0));
    let ck = ck.to_str().unwrap();

    let eval_dir = dir.path().join("eval");
    let eval = pgsmdp(&["--episodes", "20", "--greedy", "--out", eval_dir.to_str().unwrap(), "eval", ck]);
    assert_eq!(code(&eval), 0, "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(eval_dir.join(pgsmdp::harness::EVAL_FILE).exists());

    let heat = pgsmdp(&["--out", o, "heatmap", ck, "--resolution", "4"]);
    assert_eq!(code(&heat), 0);
    assert!(String::from_utf8_lossy(&heat.stdout).contains("near halfway"));

    let missing = pgsmdp(&["eval", "/nonexistent/checkpoint.json"]);
    assert_eq!(code(&missing), 3);
}
