use std::path::Path;
use std::process::{Command, Output};

use kgspline::cli::{run_table, table_header, TableOptions};
use kgspline::config::{RunConfig, TableConfig};

fn kgspline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgspline"))
        .args(args)
        .env_remove("KGSPLINE_WORKERS")
        .output()
        .expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_traveling_wave_reports_final_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = kgspline(&[
        "run",
        "--problem",
        "traveling_wave",
        "--h",
        "0.1",
        "--dt",
        "0.02",
        "--t-end",
        "10",
        "--lambda",
        "0",
        "--out",
        out,
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let rows = data_rows(&read(&dir.path().join("report.csv")));
    assert_eq!(rows.len(), 1);
    let linf: f64 = rows[0][1].parse().unwrap();
    assert!((linf - 2.7968e-3).abs() < 0.2 * 2.7968e-3, "{linf}");
    for name in ["report.json", "snapshot_t10.csv", "manifest.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let json: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(json["parameters"]["h"], "0.1");
    assert!(json["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn run_solitary_wave_with_samples() {
    let dir = tempfile::tempdir().unwrap();
    let res = kgspline(&[
        "run",
        "--problem",
        "solitary_wave",
        "--h",
        "0.05",
        "--dt",
        "0.01",
        "--t-end",
        "3",
        "--sample",
        "1,2,3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let rows = data_rows(&read(&dir.path().join("report.csv")));
    let expected = [8.5481e-4, 1.9112e-3, 6.0948e-3];
    assert_eq!(rows.len(), 3);
    for (row, want) in rows.iter().zip(expected) {
        let got: f64 = row[1].parse().unwrap();
        assert!((got - want).abs() < 0.25 * want, "{got} vs {want}");
    }
    for t in ["1", "2", "3"] {
        let snap = read(&dir.path().join(format!("snapshot_t{t}.csv")));
        assert_eq!(data_rows(&snap).len(), 501);
    }
}

#[test]
fn missing_problem_is_a_usage_error() {
    let res = kgspline(&["run", "--h", "0.1", "--dt", "0.02"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("missing problem"));
    let res = kgspline(&[
        "run",
        "--problem",
        "traveling_wave",
        "--h",
        "0.7",
        "--dt",
        "0.02",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let res = kgspline(&["bogus"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn invalid_worker_variable_is_rejected() {
    let res = Command::new(env!("CARGO_BIN_EXE_kgspline"))
        .args([
            "run",
            "--problem",
            "traveling_wave",
            "--h",
            "0.2",
            "--dt",
            "0.05",
            "--out",
        ])
        .arg(tempfile::tempdir().unwrap().path())
        .env("KGSPLINE_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn identical_parameters_give_identical_csv_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let res = kgspline(&[
            "run",
            "--problem",
            "traveling_wave",
            "--h",
            "0.2",
            "--dt",
            "0.05",
            "--lambda",
            "-0.0101",
            "--sample",
            "5,10",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(res.status.success());
    }
    for name in ["report.csv", "snapshot_t5.csv", "snapshot_t10.csv"] {
        assert_eq!(
            read(&a.path().join(name)),
            read(&b.path().join(name)),
            "{name}"
        );
    }
    let report = read(&a.path().join("report.csv"));
    assert!(report.contains("# lambda=-0.0101\n"));
    assert!(report.contains("\nt,linf,E,P,C(E),C(P)\n"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "problem = traveling_wave\nh = 0.1\ndt = 0.05\nformats = json\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = Command::new(env!("CARGO_BIN_EXE_kgspline"))
        .args(["run", "--config"])
        .arg(&cfg_path)
        .args(["--h", "0.2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(!out.join("report.csv").exists());
    let json: serde_json::Value = serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    assert_eq!(json["parameters"]["h"], "0.2");
    assert_eq!(json["report"]["metadata"]["n_intervals"], 300);
}

#[test]
fn config_file_round_trip_is_idempotent() {
    let text = "# comment\nproblem = solitary_wave\nh=0.05\ndt = 0.01\nsample_times = 1, 2 ,3\nlambda = scan\npivot_free = true\n";
    let first = RunConfig::parse(text).unwrap().serialize();
    let second = RunConfig::parse(&first).unwrap().serialize();
    assert_eq!(first, second);
}

#[test]
fn custom_problem_runs_without_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bump.csv");
    let mut text = String::from("x,u,v\n");
    for i in 0..=100 {
        let x = -5.0 + 0.1 * i as f64;
        text.push_str(&format!("{x},{},0\n", 0.5 * (-x * x).exp()));
    }
    std::fs::write(&data, text).unwrap();
    let out = dir.path().join("out");
    let res = Command::new(env!("CARGO_BIN_EXE_kgspline"))
        .args([
            "run",
            "--problem",
            "custom",
            "--epsilon1",
            "-1",
            "--epsilon2",
            "-1",
        ])
        .args([
            "--a", "-5", "--b", "5", "--t-end", "1", "--h", "0.1", "--dt", "0.05",
        ])
        .arg("--initial-data")
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let rows = data_rows(&read(&out.join("report.csv")));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "");
    let energy_change: f64 = rows[0][4].parse().unwrap();
    assert!(energy_change < 1e-3);
}

#[test]
fn empty_table_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.cfg");
    std::fs::write(&cfg, "").unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_kgspline"))
        .arg("table")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0));
    let csv = read(&dir.path().join("table.csv"));
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, vec!["h,dt,status"]);
}

#[test]
fn bundled_tables_mirror_the_published_layout() {
    let t2 = TableConfig::bundled("table2").unwrap();
    assert_eq!(t2.rows.len(), 4);
    assert_eq!(
        table_header(&t2),
        [
            "h",
            "dt",
            "linf_t10_lambda0",
            "linf_t10_opt",
            "lambda_opt",
            "status"
        ]
    );
    let t3 = TableConfig::bundled("table3").unwrap();
    assert_eq!(
        table_header(&t3),
        [
            "h",
            "dt",
            "ce_t10_lambda0",
            "ce_t10_opt",
            "cp_t10_lambda0",
            "cp_t10_opt",
            "lambda_opt",
            "status"
        ]
    );
    let t4 = TableConfig::bundled("table4").unwrap();
    assert_eq!(
        table_header(&t4),
        [
            "h",
            "dt",
            "linf_t1_lambda0",
            "linf_t2_lambda0",
            "linf_t3_lambda0",
            "status"
        ]
    );
    let t5 = TableConfig::bundled("table5").unwrap();
    assert_eq!(
        table_header(&t5),
        ["h", "dt", "ce_t3_lambda0", "cp_t3_lambda0", "status"]
    );
}

#[test]
fn table_rows_fail_independently() {
    let dir = tempfile::tempdir().unwrap();
    let table = TableConfig::parse(
        "name = mixed\nproblem = traveling_wave\nsamples = 10\nmetrics = linf, ce\nrow = 0.7, 0.05\nrow = 0.2, 0.05\n",
    )
    .unwrap();
    let opts = TableOptions {
        out_dir: dir.path().to_path_buf(),
        ..TableOptions::default()
    };
    let outcome = run_table(&table, &opts).unwrap();
    assert_eq!(outcome.rows.len(), 2);
    assert!(outcome.rows[0].last().unwrap().contains("integer number"));
    assert_eq!(outcome.rows[0][2], "");
    assert_eq!(outcome.rows[1].last().unwrap(), "ok");
    let linf: f64 = outcome.rows[1][2].parse().unwrap();
    assert!((linf - 1.0709e-2).abs() < 0.2 * 1.0709e-2);
    let csv = read(&dir.path().join("mixed.csv"));
    assert_eq!(data_rows(&csv).len(), 2);
}

#[test]
fn desk_scale_skips_scans_on_full_rows() {
    let dir = tempfile::tempdir().unwrap();
    let table = TableConfig::parse(
        "name = desk\nproblem = traveling_wave\nsamples = 10\nlambdas = 0, scan\nrow = 0.2, 0.05, full\n",
    )
    .unwrap();
    let opts = TableOptions {
        desk_scale: true,
        out_dir: dir.path().to_path_buf(),
        ..TableOptions::default()
    };
    let outcome = run_table(&table, &opts).unwrap();
    let row = &outcome.rows[0];
    assert!(!row[2].is_empty());
    assert_eq!(row[3], "");
    assert_eq!(row[4], "");
    assert!(row[5].contains("desk scale"));
}

#[test]
fn list_problems_names_builtins() {
    let res = kgspline(&["list-problems"]);
    assert!(res.status.success());
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("traveling_wave") && text.contains("solitary_wave"));
}
