//! End-to-end checks of the command-line binary: the documented subcommands,
//! file formats, exit codes (0 success / 2 invalid input; the check-failure
//! code 1 is covered by unit tests of the error classification, since a
//! converged boost provably meets its regret target), byte-identical
//! determinism, and thread-count independence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use swapcal::audit::audit;
use swapcal::distributions::Predictor;
use swapcal::separations::build_glm_instance;
use swapcal::synth::random_instance;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_swapcal")
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("swapcal-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("create temp dir");
    dir
}

/// Write the canonical matching-loss instance to JSON files.
fn write_glm_files(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let (dist, pred, class) = build_glm_instance();
    let d = dir.join("dist.json");
    let p = dir.join("pred.json");
    let c = dir.join("class.json");
    fs::write(&d, dist.to_json_string()).expect("write dist");
    fs::write(&p, pred.to_json_string()).expect("write pred");
    fs::write(&c, class.to_json_string()).expect("write class");
    (d, p, c)
}

fn parse(stdout: &[u8]) -> serde_json::Value {
    serde_json::from_slice(stdout).expect("stdout is one JSON document")
}

#[test]
fn audit_reports_the_matching_instance_metrics() {
    let dir = temp_dir("audit");
    let (d, p, c) = write_glm_files(&dir);
    let out = run(
        &[
            "audit",
            "--dist",
            d.to_str().unwrap(),
            "--pred",
            p.to_str().unwrap(),
            "--class",
            c.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "audit exits 0: {out:?}");
    let report = parse(&out.stdout);
    assert_eq!(report["mce"].as_f64(), Some(0.125), "mce is exactly 1/8");
    assert_eq!(report["smce"].as_f64(), Some(0.125), "smce is exactly 1/8");
    assert_eq!(report["calibration_error"].as_f64(), Some(0.0));
    assert_eq!(report["multiaccuracy_error"].as_f64(), Some(0.0));
    let levels = report["level_sets"].as_array().expect("level sets");
    let values: Vec<f64> = levels.iter().map(|l| l["v"].as_f64().unwrap()).collect();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(values, sorted, "level sets are ascending");
}

#[test]
fn audit_output_is_byte_identical_across_runs_and_sinks() {
    let dir = temp_dir("determinism");
    let (d, p, c) = write_glm_files(&dir);
    let args = [
        "audit",
        "--dist",
        d.to_str().unwrap(),
        "--pred",
        p.to_str().unwrap(),
        "--class",
        c.to_str().unwrap(),
    ];
    let first = run(&args, &[]);
    let second = run(&args, &[]);
    assert!(first.status.success() && second.status.success());
    assert_eq!(first.stdout, second.stdout, "stdout is byte-identical");

    let out_path = dir.join("report.json");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out_path.to_str().unwrap()]);
    let third = run(&with_out, &[]);
    assert!(third.status.success());
    let file_bytes = fs::read(&out_path).expect("report written");
    assert_eq!(file_bytes, first.stdout, "--out writes the same bytes");
}

#[test]
fn audit_floats_use_seventeen_significant_digits() {
    let dir = temp_dir("digits");
    let (d, p, c) = write_glm_files(&dir);
    let out = run(
        &[
            "audit",
            "--dist",
            d.to_str().unwrap(),
            "--pred",
            p.to_str().unwrap(),
            "--class",
            c.to_str().unwrap(),
        ],
        &[],
    );
    let text = String::from_utf8(out.stdout).expect("utf-8");
    assert!(
        text.contains("\"mce\":1.2500000000000000e-1"),
        "pinned float format, got: {}",
        &text[..text.len().min(400)]
    );
}

#[test]
fn boost_round_trips_through_files_and_re_audits_clean() {
    let dir = temp_dir("boost");
    let inst = random_instance(3);
    let d = dir.join("dist.json");
    let c = dir.join("class.json");
    fs::write(&d, inst.dist.to_json_string()).expect("write dist");
    fs::write(&c, inst.class.to_json_string()).expect("write class");
    let out_path = dir.join("boosted.json");
    let out = run(
        &[
            "boost",
            "--dist",
            d.to_str().unwrap(),
            "--class",
            c.to_str().unwrap(),
            "--alpha",
            "0.05",
            "--out",
            out_path.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "boost exits 0: {out:?}");

    let boosted =
        Predictor::from_json_str(&fs::read_to_string(&out_path).expect("predictor written"))
            .expect("predictor parses");
    let report = audit(&inst.dist, &boosted, &inst.class).expect("re-audit");
    assert!(
        report.smce <= 0.05,
        "boosted file re-audits within alpha, got {}",
        report.smce
    );

    let trace = fs::read_to_string(dir.join("boosted.json.trace.jsonl")).expect("trace written");
    let last = trace.lines().last().expect("summary line");
    let summary: serde_json::Value = serde_json::from_str(last).expect("summary parses");
    assert_eq!(summary["converged"].as_bool(), Some(true));
}

#[test]
fn boost_with_loss_learns_to_the_regret_target() {
    let dir = temp_dir("learn");
    let inst = random_instance(5);
    let d = dir.join("dist.json");
    let c = dir.join("class.json");
    fs::write(&d, inst.dist.to_json_string()).expect("write dist");
    fs::write(&c, inst.class.to_json_string()).expect("write class");
    let out = run(
        &[
            "boost",
            "--dist",
            d.to_str().unwrap(),
            "--class",
            c.to_str().unwrap(),
            "--alpha",
            "0.1",
            "--loss",
            "half_squared",
        ],
        &[],
    );
    assert!(out.status.success(), "learning exits 0: {out:?}");
    let learned = parse(&out.stdout);
    let regret = learned["verified_regret"].as_f64().expect("regret field");
    assert!(regret <= 0.1, "verified regret {regret} within target");
    assert!(
        learned["hypothesis"]["table"].as_object().map(|t| !t.is_empty()) == Some(true),
        "hypothesis table emitted"
    );
}

#[test]
fn postprocess_tabulates_optimal_actions_over_the_image() {
    let dir = temp_dir("postprocess");
    let (_, p, _) = write_glm_files(&dir);
    let out = run(
        &[
            "postprocess",
            "--pred",
            p.to_str().unwrap(),
            "--loss",
            "squared",
            "--loss",
            "logistic:4",
            "--delta",
            "0.25",
        ],
        &[],
    );
    assert!(out.status.success(), "postprocess exits 0: {out:?}");
    let tables = parse(&out.stdout);
    let squared = &tables["tables"][0];
    assert_eq!(squared["loss"].as_str(), Some("squared"));
    let rows = squared["actions"].as_array().expect("action rows");
    let mut prev = f64::NEG_INFINITY;
    for row in rows {
        let v = row["v"].as_f64().unwrap();
        assert!(v > prev, "rows ascending in prediction value");
        prev = v;
        assert_eq!(
            row["action"].as_f64().unwrap(),
            v,
            "squared loss acts at the prediction itself"
        );
    }
    let logistic = &tables["tables"][1];
    assert_eq!(logistic["loss"].as_str(), Some("logistic(4)"));
    let last = logistic["actions"].as_array().unwrap().last().unwrap();
    assert_eq!(last["v"].as_f64(), Some(1.0), "top bucket is 1");
    assert_eq!(
        last["action"].as_f64(),
        Some(4.0),
        "logit of 1 clamps to the truncation"
    );
}

#[test]
fn separations_suite_passes_from_the_cli() {
    let out = run(&["separations", "--instances", "5"], &[]);
    assert!(out.status.success(), "separations exit 0: {out:?}");
    let report = parse(&out.stdout);
    assert_eq!(report["all_pass"].as_bool(), Some(true));
    assert!(
        !out.stderr.is_empty(),
        "human-readable table goes to stderr"
    );
}

#[test]
fn missing_file_is_invalid_input() {
    let dir = temp_dir("missing");
    let (_, p, c) = write_glm_files(&dir);
    let out = run(
        &[
            "audit",
            "--dist",
            dir.join("nope.json").to_str().unwrap(),
            "--pred",
            p.to_str().unwrap(),
            "--class",
            c.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2), "missing file exits 2");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("error:"),
        "diagnostic on stderr"
    );
}

#[test]
fn malformed_json_is_invalid_input() {
    let dir = temp_dir("malformed");
    let (_, p, c) = write_glm_files(&dir);
    let bad = dir.join("bad.json");
    fs::write(&bad, "not json at all").expect("write");
    let out = run(
        &[
            "audit",
            "--dist",
            bad.to_str().unwrap(),
            "--pred",
            p.to_str().unwrap(),
            "--class",
            c.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2), "unparsable file exits 2");
}

#[test]
fn budget_without_loss_is_invalid_input() {
    let dir = temp_dir("budget");
    let inst = random_instance(7);
    let d = dir.join("dist.json");
    let c = dir.join("class.json");
    fs::write(&d, inst.dist.to_json_string()).expect("write dist");
    fs::write(&c, inst.class.to_json_string()).expect("write class");
    let out = run(
        &[
            "boost",
            "--dist",
            d.to_str().unwrap(),
            "--class",
            c.to_str().unwrap(),
            "--alpha",
            "0.1",
            "--budget",
            "2",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2), "--budget needs --loss");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("--loss"),
        "diagnostic names the missing flag"
    );
}

#[test]
fn non_unit_fraction_delta_is_invalid_input() {
    let dir = temp_dir("delta");
    let (_, p, _) = write_glm_files(&dir);
    let out = run(
        &[
            "postprocess",
            "--pred",
            p.to_str().unwrap(),
            "--loss",
            "squared",
            "--delta",
            "0.3",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2), "1/0.3 is not an integer");
}

#[test]
fn thread_count_does_not_change_learned_output() {
    let dir = temp_dir("threads");
    let inst = random_instance(11);
    let d = dir.join("dist.json");
    let c = dir.join("class.json");
    fs::write(&d, inst.dist.to_json_string()).expect("write dist");
    fs::write(&c, inst.class.to_json_string()).expect("write class");
    let args = [
        "boost",
        "--dist",
        d.to_str().unwrap(),
        "--class",
        c.to_str().unwrap(),
        "--alpha",
        "0.1",
        "--loss",
        "half_squared",
    ];
    let single = run(&args, &[("SWAPCAL_THREADS", "1")]);
    let multi = run(&args, &[("SWAPCAL_THREADS", "3")]);
    assert!(single.status.success() && multi.status.success());
    assert_eq!(
        single.stdout, multi.stdout,
        "grid verification merges in a fixed order regardless of threads"
    );
}

#[test]
fn closed_stdout_pipe_is_a_quiet_success() {
    // `swapcal ... | head` closes stdout early; the process must exit 0
    // without a panic. A predictor with thousands of distinct values makes
    // the postprocess output far exceed the OS pipe buffer, so the child
    // observes the closed pipe deterministically when we drop the read end.
    let dir = temp_dir("pipe");
    let n = 4096u32;
    let values: std::collections::BTreeMap<String, f64> = (0..n)
        .map(|i| (format!("x{i:04}"), f64::from(i) / f64::from(n)))
        .collect();
    let pred = dir.join("pred.json");
    fs::write(
        &pred,
        serde_json::json!({ "values": values, "grid_step": 1.0 / f64::from(n) }).to_string(),
    )
    .expect("write pred");

    let mut child = Command::new(bin())
        .args([
            "postprocess",
            "--pred",
            pred.to_str().unwrap(),
            "--loss",
            "squared",
            "--loss",
            "half_squared",
            "--loss",
            "logistic:10",
        ])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .expect("binary spawns");
    drop(child.stdout.take());
    let status = child.wait().expect("child reaped");
    let mut stderr = Vec::new();
    use std::io::Read as _;
    child
        .stderr
        .take()
        .expect("stderr piped")
        .read_to_end(&mut stderr)
        .expect("read stderr");
    let stderr = String::from_utf8_lossy(&stderr);
    assert_eq!(status.code(), Some(0), "stderr: {stderr}");
    assert!(
        !stderr.contains("panicked"),
        "no panic on a closed pipe: {stderr}"
    );
}
