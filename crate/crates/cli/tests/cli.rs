use std::path::Path;
use std::process::Command;

fn run(args: &[&str], cwd: &Path) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_mimu-dr"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    out
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn simulate_train_evaluate_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.kv"), "model.arch = compact\ntrain.epochs = 2\ntrain.stride = 120\n").unwrap();
    ok(
        &["simulate", "--spec", "horizontal-periodic", "--n-imus", "2", "--seed", "3", "--n-trajectories", "4",
          "--duration", "12", "--out-dir", "corpus"],
        d,
    );
    let rec = d.join("corpus/horizontal-periodic/4");
    assert!(rec.join("imu2.csv").exists() && rec.join("gt.csv").exists());

    let ins = ok(&["ins-baseline", "--recording", "corpus/horizontal-periodic/4", "--imus", "1,2", "--out", "ins"], d);
    assert!(ins.starts_with("ins: rmse="));
    let metrics = std::fs::read_to_string(d.join("ins/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3, "header, 3-D row, horizontal row:\n{metrics}");

    ok(&["--config", "c.kv", "train", "--corpus", "corpus", "--split", "D1", "--test-trajectory", "4",
         "--out-model", "m.json"], d);
    let ev = ok(&["evaluate", "--mode", "rda", "--models", "m.json", "--recording", "corpus/horizontal-periodic/4",
                  "--out", "res/table.csv"], d);
    assert_eq!(ev.lines().count(), 2);
    let table = std::fs::read_to_string(d.join("res/table.csv")).unwrap();
    assert!(table.starts_with("k,n_subsets,rmse_m,max_m,std_m\n1,2,"), "{table}");

    ok(&["report", "--results-dir", "res", "--out", "agg"], d);
    let agg = std::fs::read_to_string(d.join("agg/combinations.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
    assert!(agg.lines().nth(1).unwrap().starts_with("table,1,2,"));
}

#[test]
fn rejects_unknown_config_key_and_bad_models() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.kv"), "train.epoch = 3\n").unwrap();
    let out = run(&["--config", "bad.kv", "report", "--results-dir", ".", "--out", "x"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.epoch"));

    let out = run(&["evaluate", "--mode", "rda", "--models", "missing.json", "--recording", "nowhere",
                    "--kind", "straight", "--out", "t.csv"], d);
    assert!(!out.status.success());
}
