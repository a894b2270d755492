use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set",
    "topology.users=8",
    "--set",
    "sim.session_chunks=10",
    "--set",
    "mimo.symbols_per_slot=4000",
    "--set",
    "sim.n=5",
];

fn dppstream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dppstream")).args(args).output().expect("spawn")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a provenance-prefixed CSV as header -> value maps.
fn table(path: &Path) -> Vec<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="), "{}", path.display());
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn field<'a>(row: &'a [(String, String)], key: &str) -> &'a str {
    &row.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no column {key}")).1
}

#[test]
fn missing_config_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    let o = dppstream(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(missing.to_str().unwrap()), "{}", stderr(&o));
}

#[test]
fn bad_key_is_a_usage_error() {
    let o = dppstream(&["run", "--set", "mimo.antennas=4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mimo.antennas"), "{}", stderr(&o));
    let o = dppstream(&["run", "--set", "mimo.S=50", "--set", "mimo.M=10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_two_csvs_and_records_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("min.cfg");
    std::fs::write(&cfg, "# minimal\ntopology.users = 8\nsim.session_chunks = 10\nsim.n = 5\n").unwrap();
    let out = dir.path().join("out");
    let o = dppstream(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "mimo.symbols_per_slot=4000",
        "--set",
        "V=1e13",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let digest = String::from_utf8_lossy(&o.stdout);
    assert!(digest.contains("utility=") && digest.contains("mean_quality=") && digest.contains("mean_buffering="));
    let run = table(&out.join("run.csv"));
    assert_eq!(run.len(), 1);
    assert_eq!(field(&run[0], "V").parse::<f64>().unwrap(), 1e13);
    let summary = table(&out.join("summary.csv"));
    assert_eq!(summary.len().to_string(), field(&run[0], "users"));
}

#[test]
fn sweep_three_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["sweep", "--out", out, "--param", "V", "--values", "1e12,1e13,1e14,1e13"];
    args.extend_from_slice(SMALL);
    let o = dppstream(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("duplicate"), "{}", stderr(&o));
    for v in ["1e12", "1e13", "1e14"] {
        assert!(dir.path().join(format!("V={v}")).join("summary.csv").is_file());
    }
    let subdirs = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(subdirs, 3);
    let agg = table(&dir.path().join("sweep.csv"));
    assert_eq!(agg.iter().map(|r| field(r, "V").to_string()).collect::<Vec<_>>(), ["1e12", "1e13", "1e14"]);
}

#[test]
fn sweep_needs_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = dppstream(&["sweep", "--out", dir.path().to_str().unwrap(), "--param", "V", "--values", ""]);
    assert_eq!(o.status.code(), Some(2));
    let o = dppstream(&["sweep", "--out", dir.path().to_str().unwrap(), "--param", "rho", "--values", "1,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_counts_and_injection() {
    let o = dppstream(&["validate", "--instances", "500"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("greedy_vs_exhaustive: 500/500"), "{text}");
    assert!(text.contains("gamma_closed_form: 500/500"), "{text}");
    let o = dppstream(&["validate", "--instances", "50", "--inject-failure"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("counterexample"), "{}", stderr(&o));
}

#[test]
fn topology_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = dppstream(&["topology", "--out", dir.path().to_str().unwrap(), "--set", "topology.users=20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let nodes = table(&dir.path().join("nodes.csv"));
    assert!(nodes.len() >= 5);
    assert!(dir.path().join("gains.csv").is_file());
}

#[test]
fn traces_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["run", "--out", out, "--set", "trace.schedule=true", "--set", "trace.client=true", "--set", "trace.playback=true"];
    args.extend_from_slice(SMALL);
    let o = dppstream(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trace_schedule.csv", "trace_client.csv", "trace_playback.csv"] {
        assert!(!table(&dir.path().join(f)).is_empty(), "{f}");
    }
}
