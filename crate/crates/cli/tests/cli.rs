use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn newsdisc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_newsdisc"))
        .args(args)
        .env_remove("NEWSDISC_API_TOKEN")
        .output()
        .expect("spawn newsdisc")
}

fn ok(args: &[&str]) -> Output {
    let out = newsdisc(args);
    assert!(
        out.status.success(),
        "newsdisc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

/// Small synthetic run: `n` generated profiles over the bundled grid.
fn small_run(dir: &Path, n: usize, seed: &str) -> (PathBuf, PathBuf) {
    let profiles = dir.join("profiles.csv");
    let traits = dir.join("traits.csv");
    let n = n.to_string();
    ok(&["generate-profiles", "--inventory", "bfi2s", "--n", &n, "--seed", "3", "--out", s(&profiles)]);
    ok(&["score", "--responses", s(&profiles), "--out", s(&traits)]);
    ok(&["run", "--profiles", s(&profiles), "--seed", seed, "--out-dir", s(&dir.join("run"))]);
    (dir.join("run/sessions.jsonl"), traits)
}

#[test]
fn score_handles_both_inventories() {
    let tmp = tempfile::tempdir().unwrap();
    for (file, rows) in [("profiles_bfi2s_336.csv", 336), ("profiles_bfi2_438.csv", 438)] {
        let out = tmp.path().join(format!("{rows}.csv"));
        ok(&["score", "--responses", s(&fixture(file)), "--out", s(&out)]);
        let lines = data_lines(&out);
        assert_eq!(lines[0], "participant_id,E,A,C,N,O");
        assert_eq!(lines.len(), rows + 1);
        for line in &lines[1..] {
            for v in line.split(',').skip(1) {
                let v: f64 = v.parse().unwrap();
                assert!((1.0..=5.0).contains(&v));
            }
        }
    }
}

#[test]
fn score_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = newsdisc(&["score", "--responses", s(&empty), "--out", s(&tmp.path().join("o.csv"))]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));

    let text = std::fs::read_to_string(fixture("profiles_bfi2s_336.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().take(3).map(String::from).collect();
    lines[2] = lines[2].replacen(",3,", ",7,", 1);
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let out = newsdisc(&["score", "--responses", s(&bad), "--out", s(&tmp.path().join("o.csv"))]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn live_backend_without_token_fails_before_any_request() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let out = newsdisc(&[
        "run",
        "--profiles",
        s(&fixture("profiles_bfi2s_336.csv")),
        "--backend",
        "live",
        "--endpoint-url",
        "http://127.0.0.1:9/v1/chat/completions",
        "--out-dir",
        s(&out_dir),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("NEWSDISC_API_TOKEN"), "{}", stderr(&out));
    assert!(!out_dir.join("sessions.jsonl").exists());
}

#[test]
fn analyze_writes_every_table_and_lists_them() {
    let tmp = tempfile::tempdir().unwrap();
    let (sessions, traits) = small_run(tmp.path(), 12, "5");
    assert_eq!(data_lines(&sessions).len(), 8 * 13 * 24);
    let report = tmp.path().join("report");
    ok(&[
        "analyze",
        "--sessions",
        s(&sessions),
        "--trait-scores",
        s(&traits),
        "--reference-fixtures",
        "bundled",
        "--out-dir",
        s(&report),
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    for table in ["comparison", "correlations", "regressions", "similarity"] {
        for ext in ["csv", "md"] {
            let name = format!("{table}.{ext}");
            assert!(files.contains(&name.as_str()), "{name} not in {files:?}");
            assert!(report.join(&name).exists());
        }
    }
    assert!(report.join("summaries.csv").exists());
    let header = std::fs::read_to_string(report.join("correlations.csv")).unwrap();
    for key in ["# tool_version=", "# run_id=", "# seeds=5", "# prompt_template_hash="] {
        assert!(header.contains(key), "missing {key}");
    }
    let comparison = data_lines(&report.join("comparison.csv"));
    assert_eq!(comparison.len(), 9);
}

#[test]
fn analyze_refuses_mixed_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    let (log_a, traits) = small_run(&a, 4, "1");
    let (log_b, _) = small_run(&b, 4, "2");
    let mixed = tmp.path().join("mixed.jsonl");
    let mut bytes = std::fs::read(&log_a).unwrap();
    bytes.extend(std::fs::read(&log_b).unwrap());
    std::fs::write(&mixed, bytes).unwrap();
    let out = newsdisc(&[
        "analyze",
        "--sessions",
        s(&mixed),
        "--trait-scores",
        s(&traits),
        "--out-dir",
        s(&tmp.path().join("report")),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("run"), "{}", stderr(&out));
}

#[test]
fn resume_refuses_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, _) = small_run(tmp.path(), 3, "1");
    let profiles = tmp.path().join("profiles.csv");
    let out_dir = tmp.path().join("run");
    let again = newsdisc(&["run", "--profiles", s(&profiles), "--seed", "1", "--out-dir", s(&out_dir)]);
    assert!(!again.status.success(), "rerun without --resume must not append");
    let changed = newsdisc(&["run", "--profiles", s(&profiles), "--seed", "2", "--out-dir", s(&out_dir), "--resume"]);
    assert!(!changed.status.success());
    let same = ok(&["run", "--profiles", s(&profiles), "--seed", "1", "--out-dir", s(&out_dir), "--resume"]);
    assert!(stderr(&same).contains("0 written"), "{}", stderr(&same));
}

#[test]
fn validate_corpus_checks_balance() {
    let tmp = tempfile::tempdir().unwrap();
    let full = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/corpus/synthetic-fixture-24.json");
    ok(&["validate-corpus", "--corpus", s(&full)]);

    let mut headlines: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(&full).unwrap()).unwrap();
    headlines.pop();
    let short = tmp.path().join("short.json");
    std::fs::write(&short, serde_json::to_string(&headlines).unwrap()).unwrap();
    let out = newsdisc(&["validate-corpus", "--corpus", s(&short)]);
    assert!(!out.status.success());
    ok(&["validate-corpus", "--corpus", s(&short), "--no-balance"]);
}

#[test]
fn baseline_writes_requested_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("baseline.csv");
    ok(&["baseline", "--rating", "2", "--n", "50", "--seed", "9", "--out", s(&out)]);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "sample");
    assert_eq!(lines.len(), 51);
    let first = std::fs::read(&out).unwrap();
    ok(&["baseline", "--rating", "2", "--n", "50", "--seed", "9", "--out", s(&out)]);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}
