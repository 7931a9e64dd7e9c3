use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cfnorm_cli::report::{ReportRecord, Results};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cfnorm"));
    c.env_remove("CFNORM_THREADS").arg("--quiet");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(out: &Output) -> ReportRecord {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    ReportRecord::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// Fixed pseudo-normal rows (Box-Muller on a small LCG), so the CSV needs no
/// random-number crate.
fn normal_csv(n: usize, d: usize) -> String {
    let mut state: u64 = 12345;
    let mut unif = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    };
    let mut body = String::new();
    for _ in 0..n {
        let row: Vec<String> = (0..d)
            .map(|_| {
                let z = (-2.0 * unif().ln()).sqrt() * (2.0 * std::f64::consts::PI * unif()).cos();
                format!("{z:.8}")
            })
            .collect();
        body.push_str(&row.join(","));
        body.push('\n');
    }
    body
}

fn example_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/log_returns.csv")
}

#[test]
fn test_command_is_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "x.csv", &normal_csv(30, 2));
    let path = csv.to_str().unwrap();
    let args = [
        "test",
        "--data",
        path,
        "--a",
        "1,5,inf",
        "--reps",
        "300",
        "--seed",
        "9",
        "--competitors",
    ];
    let one = report(&bin().args(["--threads", "1"]).args(args).output().unwrap());
    let four = report(&bin().env("CFNORM_THREADS", "4").args(args).output().unwrap());
    assert_eq!(one.results, four.results);
    let Results::Test(t) = &one.results else {
        panic!("wrong kind")
    };
    assert_eq!((t.n, t.d, t.rows.len()), (30, 2, 7));
    assert!(t.columns.is_empty());
    assert!(one.low_precision);
    assert_eq!(one.parameters.a, ["1", "5", "inf"]);
}

#[test]
fn stdout_round_trips() {
    let out = run(&["delta", "--alt", "uniform", "--d", "1", "--a", "0.5,5"]);
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let rec = report(&out);
    assert_eq!(ReportRecord::from_json(&rec.to_json()).unwrap(), rec);
    assert_eq!(rec.to_json().trim(), text.trim());
}

#[test]
fn delta_command_values() {
    let rec = report(&run(&["delta", "--alt", "logistic", "--d", "2", "--a", "2"]));
    let Results::Delta(dr) = rec.results else { panic!() };
    assert!((dr.rows[0].delta - 0.001942).abs() < 5e-5);

    let rec = report(&run(&["delta", "--alt", "uniform", "--d", "1", "--a", "5"]));
    let Results::Delta(dr) = rec.results else { panic!() };
    assert!((dr.rows[0].delta - 0.000259).abs() < 5e-5);

    let rec = report(&run(&["delta", "--alt", "normal", "--d", "2", "--a", "1"]));
    let Results::Delta(dr) = rec.results else { panic!() };
    assert_eq!(dr.rows[0].delta, 0.0);
}

#[test]
fn single_column_boundary_sample() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "x.csv", "value\n0.3\n-1.2\n2.0\n");
    let rec = report(&run(&[
        "test",
        "--data",
        csv.to_str().unwrap(),
        "--a",
        "1",
        "--reps",
        "200",
    ]));
    let Results::Test(t) = rec.results else { panic!() };
    assert_eq!((t.n, t.d), (3, 1));
    assert_eq!(t.columns, ["value"]);
}

#[test]
fn critvals_writes_table_and_flags_low_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cv.csv");
    let rec = report(&run(&[
        "critvals",
        "--n",
        "10,20",
        "--d",
        "1",
        "--a",
        "1,2",
        "--reps",
        "100",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(rec.low_precision);
    let table = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "n,d,a,quantile");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("10,1,1,"));

    let json = dir.path().join("cv.json");
    report(&run(&[
        "critvals",
        "--n",
        "10",
        "--d",
        "1",
        "--a",
        "1",
        "--reps",
        "100",
        "--out",
        json.to_str().unwrap(),
    ]));
    let back = ReportRecord::from_json(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert!(matches!(back.results, Results::Critvals { .. }));
}

#[test]
fn null_power_matches_level() {
    let rec = report(&run(&[
        "power", "--alt", "normal", "--n", "20", "--d", "1", "--a", "1", "--reps", "4000",
    ]));
    let Results::Power { rows } = rec.results else { panic!() };
    assert!((rows[0].rejection_pct - 5.0).abs() <= 1.0, "{}", rows[0].rejection_pct);
}

#[test]
fn coverage_reports_standard_error() {
    let rec = report(&run(&[
        "coverage", "--alt", "laplace", "--n", "30", "--d", "1", "--a", "1", "--reps", "100",
    ]));
    let Results::Coverage(c) = rec.results else { panic!() };
    assert!(rec.low_precision);
    assert!(c.std_error_pct > 0.0 && (0.0..=100.0).contains(&c.coverage_pct));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = write(dir.path(), "r.csv", "a,b\n1,2\n3\n");
    let out = run(&["test", "--data", ragged.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    let tiny = write(dir.path(), "t.csv", "1,2\n3,4\n");
    let out = run(&["test", "--data", tiny.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));

    let missing = dir.path().join("missing.csv");
    assert_eq!(
        run(&["test", "--data", missing.to_str().unwrap()]).status.code(),
        Some(5)
    );
    assert_eq!(run(&["delta", "--alt", "nmix1", "--d", "1"]).status.code(), Some(2));
    assert_eq!(
        run(&["power", "--alt", "t:0", "--n", "20", "--d", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
#[ignore = "100000 null replications"]
fn example_data_is_rejected() {
    let data = example_data();
    let rec = report(&run(&["test", "--data", data.to_str().unwrap(), "--reps", "100000"]));
    let Results::Test(t) = rec.results else { panic!() };
    assert!(t.rows.iter().all(|r| r.p_value < 0.001));
}

#[test]
#[ignore = "100000 replications per cell"]
fn critvals_full_replication() {
    let dir = tempfile::tempdir().unwrap();
    for (n, d, a, want) in [("20", "1", "0.5", 2.57), ("100", "3", "10", 190.30)] {
        let out = dir.path().join("cv.csv");
        let rec = report(&run(&[
            "critvals",
            "--n",
            n,
            "--d",
            d,
            "--a",
            a,
            "--reps",
            "100000",
            "--out",
            out.to_str().unwrap(),
        ]));
        let Results::Critvals { rows } = rec.results else {
            panic!()
        };
        assert!(
            (rows[0].quantile - want).abs() <= 0.02 * want,
            "{} vs {want}",
            rows[0].quantile
        );
    }
}

#[test]
#[ignore = "10000 replications"]
fn power_and_coverage_full_replication() {
    let rec = report(&run(&[
        "power", "--alt", "nmix1", "--n", "50", "--d", "1", "--a", "1", "--reps", "10000",
    ]));
    let Results::Power { rows } = rec.results else { panic!() };
    assert!((rows[0].rejection_pct - 60.0).abs() <= 2.0, "{}", rows[0].rejection_pct);

    let rec = report(&run(&[
        "coverage", "--alt", "uniform", "--n", "100", "--d", "1", "--a", "0.5", "--reps", "10000",
    ]));
    let Results::Coverage(c) = rec.results else { panic!() };
    assert!((c.coverage_pct - 94.53).abs() <= 1.0, "{}", c.coverage_pct);

    // the tabulated 37.85 belongs to n = 10
    let rec = report(&run(&[
        "coverage", "--alt", "logistic", "--n", "10", "--d", "2", "--a", "1", "--reps", "10000",
    ]));
    let Results::Coverage(c) = rec.results else { panic!() };
    assert!((c.coverage_pct - 37.85).abs() <= 2.0, "{}", c.coverage_pct);
}
