use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_excursion")).args(args).output().unwrap()
}

fn run_to(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

const BASE: &str = r#"
command = "estimate"

[model]
kernel = "exponential"
lengthscale = 1.0

[model.domain]
lower = [0.0]
upper = [1.0]

[points]
explicit = [[0.0], [1.0]]

[run]
algorithm = "finite"
b = 3.0
n = 2000
seed = 1
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn estimate_json_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("estimate.json");
    let o = run_to(&config("estimate_finite.toml"), &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    for key in ["estimate", "std_error", "cv", "n", "M", "a", "gamma", "seed", "wall_time_s"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert!(doc["wall_time_s"].is_f64());
    let summary = String::from_utf8_lossy(&o.stdout);
    assert!(summary.contains("±") && summary.contains("n=100000") && summary.contains("M=4"), "{summary}");
}

#[test]
fn compare_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &(BASE.replace("command = \"estimate\"", "command = \"compare\"").replace("b = 3.0", "levels = [2.0, 3.0]\nn_naive = 20000") + "\n[output]\nformat = \"csv\"\n"),
    );
    let out = dir.path().join("compare.csv");
    let o = run_to(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "b,is_estimate,is_se,naive_estimate,naive_se,z,efficiency_multiplier");
    assert_eq!(lines.count(), 2);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("sweep_smooth.toml");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    assert!(run_to(&cfg, &a, &["--no-timing"]).status.success());
    assert!(run_to(&cfg, &b, &["--no-timing", "--threads", "2"]).status.success());
    assert!(run_to(&cfg, &c, &["--no-timing", "--seed", "12"]).status.success());
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn format_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("e.csv");
    assert!(run_to(&cfg, &out, &["--format", "csv"]).status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("algorithm,estimate,std_error,cv,"), "{text}");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (BASE.replace("lengthscale = 1.0", "lengthscale = 0.0"), 2, "lengthscale"),
        (BASE.replace("b = 3.0", "b = 60.0"), 4, "level-out-of-range"),
        (
            BASE.replace("command = \"estimate\"", "command = \"cond-expect\"")
                .replace("algorithm = \"finite\"", "algorithm = \"naive\"")
                .replace("b = 3.0", "b = 9.0\nfunctional = \"exceed-count-fraction\""),
            3,
            "numeric",
        ),
    ];
    for (text, code, needle) in cases {
        let cfg = write_config(dir.path(), &text);
        let out = dir.path().join("never.json");
        let o = run_to(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(code), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains(needle));
        assert!(!out.exists(), "failed run left an output file");
    }
    let o = run(&["--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn document_goes_to_stdout_without_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let o = run(&["--config", cfg.to_str().unwrap(), "--no-timing"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["wall_time_s"].is_null());
    assert_eq!(doc["M"], 2);
}

#[test]
fn json_numbers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("e.json");
    assert!(run_to(&cfg, &out, &[]).status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let estimate = doc["estimate"].as_f64().unwrap();
    let literal = text.lines().find(|l| l.contains("\"estimate\"")).unwrap().split(':').nth(1).unwrap().trim().trim_end_matches(',');
    assert_eq!(literal.parse::<f64>().unwrap().to_bits(), estimate.to_bits());
}
