use std::fs;
use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"{"base": {"num_aps": 6, "num_users": 2}, "schemes": ["sp_pct_only", "ep", "uniform_sp"]}"#;

fn cfotfs(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cfotfs")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_twice_gives_byte_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = cfotfs(&[
            "run",
            "--config",
            &cfg,
            "--seed",
            "7",
            "--drops",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(fs::read(out.join("records.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "drop,seed,scheme,user,se_bits,min_se,status,bis_iters,sca_iters,wall_ms"
    );
    // 2 drops x 3 schemes x 2 users
    assert_eq!(lines.count(), 12);
}

#[test]
fn json_format_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("o");
    let o = cfotfs(&[
        "run",
        "--config",
        &cfg,
        "--drops",
        "1",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let recs = cellfree_otfs_sim::output::read_records_json(fs::File::open(out.join("records.json")).unwrap()).unwrap();
    assert_eq!(recs.len(), 3);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.json", r#"{"base": {"num_aps": 6}, "colour": "blue"}"#);
    let o = cfotfs(&["run", "--config", &unknown, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = cfotfs(&["run", "--config", "/nonexistent/spec.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cfotfs(&["run", "--drops", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cfotfs(&["run", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fig2_emits_one_row_per_user_count_and_scheme() {
    let dir = tempfile::tempdir().unwrap();
    // 16x16 grid: N_guard = 3 * 5 = 15 with one delay bin of spread, so at most 17 users.
    let cfg = write(
        dir.path(),
        "f.json",
        r#"{"base": {"num_aps": 6, "num_subcarriers": 16, "num_doppler_bins": 16, "k_max": 1},
            "schemes": ["ep", "sp_pct_only"], "sweep": {"num_users": [2, 20]}}"#,
    );
    let out = dir.path().join("o");
    let o = cfotfs(&["fig2", "--config", &cfg, "--drops", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(out.join("fig2.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(&header[..5], ["num_users", "scheme", "se_95", "mean_se", "ep_feasible"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let k: usize = r[0].parse().unwrap();
        let feasible: bool = r[4].parse().unwrap();
        assert_eq!(feasible, k == 2, "row {r:?}");
        let se: f64 = r[2].parse().unwrap();
        if &r[1] == "ep" {
            assert_eq!(se > 0.0, feasible);
        } else {
            assert!(se > 0.0);
        }
    }
}

#[test]
fn fig1_writes_cdf_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("o");
    let o = cfotfs(&["fig1", "--config", &cfg, "--drops", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cdf = fs::read_to_string(out.join("fig1_cdf.csv")).unwrap();
    assert!(cdf.starts_with("shadowing,scheme,se_bits,cdf\n"));
    // 2 shadowing models x 3 schemes x 2 drops x 2 users
    assert_eq!(cdf.lines().count(), 1 + 24);
    assert!(cdf.contains("uncorrelated,ep,"));
    assert!(out.join("fig1_summary.csv").exists());
    assert!(out.join("fig1_records_correlated.csv").exists());
}
