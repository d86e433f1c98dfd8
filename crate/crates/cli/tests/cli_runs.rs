//! End-to-end runs of the `sa-lab` binary: determinism, artifacts, exit codes.

use std::path::Path;
use std::process::Command;

fn run(args: &[&str], out: &Path) -> (i32, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_sa-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
    )
}

#[test]
fn expand_is_byte_identical_across_runs() {
    let dir = std::env::temp_dir().join("sa-lab-test-determinism");
    let args = ["expand", "--seed", "7", "--dim", "3", "--K", "4", "--function", "gaussian"];
    let (code_a, stdout_a) = run(&args, &dir.join("a"));
    let (code_b, stdout_b) = run(&args, &dir.join("b"));
    assert_eq!(code_a, 0);
    assert_eq!(code_b, 0);
    assert_eq!(stdout_a, stdout_b, "stdout differs between identical runs");
    let file_a = std::fs::read(dir.join("a/expand.json")).unwrap();
    let file_b = std::fs::read(dir.join("b/expand.json")).unwrap();
    assert_eq!(file_a, file_b, "report files differ between identical runs");
}

#[test]
fn expand_emits_convergence_csv() {
    let dir = std::env::temp_dir().join("sa-lab-test-csv");
    let (code, _) = run(
        &[
            "expand", "--seed", "3", "--dim", "2", "--K", "3", "--format", "csv", "--trials",
            "2",
        ],
        &dir,
    );
    assert_eq!(code, 0);
    for trial in 0..2 {
        let csv =
            std::fs::read_to_string(dir.join(format!("convergence_{trial:03}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "K,lhs,partial_sum,abs_error,bound");
        assert_eq!(lines.count(), 3);
    }
}

#[test]
fn bad_function_spec_exits_with_config_error() {
    let dir = std::env::temp_dir().join("sa-lab-test-badfn");
    let (code, stdout) = run(&["expand", "--function", "sinc"], &dir);
    assert_eq!(code, 2);
    let value: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(value["error"], "invalid-config");
}

#[test]
fn path_guard_exits_with_guard_violation() {
    let dir = std::env::temp_dir().join("sa-lab-test-guard");
    // dim^(2K) = 10^12 overruns the contraction guard.
    let (code, stdout) = run(&["expand", "--dim", "10", "--K", "6"], &dir);
    assert_eq!(code, 3);
    let value: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(value["error"], "guard-violation");
}

#[test]
fn cocycle_check_passes_and_writes_report() {
    let dir = std::env::temp_dir().join("sa-lab-test-cocycle");
    let (code, stdout) = run(
        &["cocycle-check", "--dim", "2", "--orders", "4", "--tuples", "10", "--seed", "5"],
        &dir,
    );
    assert_eq!(code, 0, "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("cocycle-check.json")).unwrap())
            .unwrap();
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["identities"].as_array().unwrap().len(), 8);
}

#[test]
fn config_file_overrides_flags() {
    let dir = std::env::temp_dir().join("sa-lab-test-config");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("config.json");
    std::fs::write(&config_path, r#"{"seed": 42, "dim": 2, "k": 2}"#).unwrap();
    let (code, stdout) = run(
        &[
            "expand",
            "--seed",
            "7",
            "--dim",
            "3",
            "--config",
            config_path.to_str().unwrap(),
        ],
        &dir.join("out"),
    );
    assert_eq!(code, 0);
    let report: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(report["config"]["seed"], 42, "config file must win over flags");
    assert_eq!(report["config"]["dim"], 2);
}

#[test]
fn explicit_matrix_files_feed_the_triple() {
    let dir = std::env::temp_dir().join("sa-lab-test-files");
    std::fs::create_dir_all(&dir).unwrap();
    let d_path = dir.join("d.json");
    let a_path = dir.join("a.json");
    let b_path = dir.join("b.json");
    // D = diag(1, -1); a = i·I (scalar head), b = flip.
    std::fs::write(&d_path, r#"{"dim":2,"entries":[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[-1.0,0.0]]]}"#)
        .unwrap();
    std::fs::write(&a_path, r#"{"dim":2,"entries":[[[0.0,0.4],[0.0,0.0]],[[0.0,0.0],[0.0,0.4]]]}"#)
        .unwrap();
    std::fs::write(&b_path, r#"{"dim":2,"entries":[[[0.0,0.0],[1.0,0.0]],[[1.0,0.0],[0.0,0.0]]]}"#)
        .unwrap();
    let config_path = dir.join("config.json");
    std::fs::write(
        &config_path,
        format!(
            r#"{{"dim": 2, "k": 3, "d_file": "{}", "generator_files": [{{"a": "{}", "b": "{}"}}]}}"#,
            d_path.display(),
            a_path.display(),
            b_path.display()
        ),
    )
    .unwrap();
    let (code, stdout) = run(
        &["expand", "--config", config_path.to_str().unwrap()],
        &dir.join("out"),
    );
    assert_eq!(code, 0, "stdout: {stdout}");
    let report: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    // V = i·0.4·[D, flip] = 0.8·(off-diagonal), a sizeable perturbation:
    // D + V has eigenvalues ±√(1+0.64), and the hand value of the trace
    // difference pins the lhs.
    let lhs = report["trials"][0]["lhs"].as_f64().unwrap();
    let expected = 2.0 * ((-1.64f64).exp() - (-1.0f64).exp());
    assert!((lhs - expected).abs() < 1e-12, "lhs {lhs} vs hand value {expected}");
    assert_eq!(report["trials"][0]["strictly_decreasing"], true);
}

#[test]
fn moi_verify_smoke() {
    let dir = std::env::temp_dir().join("sa-lab-test-moiv");
    let (code, stdout) = run(&["moi-verify", "--dim", "2", "--seed", "9"], &dir);
    assert_eq!(code, 0, "stdout: {stdout}");
    let report: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(report["all_pass"], true);
}
