use std::path::{Path, PathBuf};
use std::process::Command;

use markov_sparsify::harness::{load_config, run_experiment, sweep_k, write_metrics_csv, CACHE_ENV};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_markov-sparsify"));
    c.env(CACHE_ENV, std::env::temp_dir().join("markov-sparsify-test-cache"));
    c
}

fn csv_bytes(config: &Path) -> Vec<u8> {
    let c = load_config(config).unwrap();
    let outcome = run_experiment(&c).unwrap();
    let mut buf = Vec::new();
    write_metrics_csv(&outcome.trace, &mut buf).unwrap();
    buf
}

#[test]
fn metrics_match_golden_file() {
    let golden = std::fs::read(fixture("small_metrics.csv")).unwrap();
    assert_eq!(csv_bytes(&fixture("small.toml")), golden);
}

#[test]
fn cli_writes_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}.csv"));
        let status = cli()
            .args(["train", "--config"])
            .arg(fixture("small.toml"))
            .arg("--output")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        outputs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], std::fs::read(fixture("small_metrics.csv")).unwrap());
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    std::fs::copy(fixture("small.libsvm"), dir.join("small.libsvm")).unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn unknown_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "[data]\npath = \"small.libsvm\"\nclients = 2\n\n[optimizer]\nkind = \"mqsgd\"\ngamma = 0.1\nstep = 3\n",
    );
    let out = cli().args(["train", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));
}

#[test]
fn missing_data_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[data]\npath = \"absent.libsvm\"\n\n[optimizer]\nkind = \"mqsgd\"\ngamma = 0.1\n").unwrap();
    let out = cli().args(["train", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "[data]\npath = \"small.libsvm\"\nclients = 2\n\n[optimizer]\nkind = \"mqsgd\"\ngamma = 1e200\n\n[compressor]\nkind = \"identity\"\n\n[run]\niterations = 50\n",
    );
    let out = cli().args(["train", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_reports_one_row_per_feasible_k() {
    let c = load_config(&fixture("small.toml")).unwrap();
    // d = 8, m = 2: K = 3 leaves exactly one mask and a periodic chain, so it is skipped too.
    let table = sweep_k(&c, &[0, 1, 2, 3, 4, 9]).unwrap();
    assert_eq!(table.rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn empty_history_reproduces_uniform_sampling() {
    let mut banlast = load_config(&fixture("small.toml")).unwrap();
    banlast.compressor.k = Some(0);
    let mut rand = banlast.clone();
    rand.compressor.kind = markov_sparsify::compressors::CompressorKind::RandM;
    let a = run_experiment(&banlast).unwrap().trace.records;
    let b = run_experiment(&rand).unwrap().trace.records;
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.f_value, y.f_value);
    }
}

#[test]
fn analyze_chain_prints_csv_row() {
    let out = cli()
        .args(["analyze-chain", "--compressor", "banlast", "--d", "4", "--m", "1", "--k", "1", "--eps", "0.01"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("d,m,K,b,states,pi_max_dev,tau_mix,rho,C\n4,1,1,,4,"));
}

#[test]
fn optimal_k_lists_the_grid() {
    let out = cli().args(["optimal-k", "--alpha-grid", "10,20"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,K_star,banlast,randm");
    assert!(lines[1].starts_with("10,7,"));
    assert!(lines[2].starts_with("20,15,"));
}

#[test]
fn history_report_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli().args(["history-report", "--out-dir"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.path().join("history_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 10);
    assert!(dir.path().join("history_curves.csv").is_file());
}
