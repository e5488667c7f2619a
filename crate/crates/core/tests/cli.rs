use std::io::Write;
use std::process::{Command, Output, Stdio};

use caks::sim::SimRng;

fn caks(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_caks"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn caks");
    // the process may exit before consuming its input
    let _ = child.stdin.take().unwrap().write_all(stdin);
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn uniform_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SimRng::new(seed);
    (0..n).map(|_| rng.uniform01()).collect()
}

fn as_text(values: &[f64]) -> Vec<u8> {
    values.iter().map(|v| format!("{v:e}\n")).collect::<String>().into_bytes()
}

fn as_binary(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

#[test]
fn test_smoke_with_builtin_calibration() {
    let data = as_text(&uniform_values(10_000, 1));
    let o = caks(&["test", "--null", "uniform", "--chunk-size", "100", "--output", "json"], &data);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 1, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["T"], 100);
    assert_eq!(v["J"], 100);
    assert_eq!(v["n_used"], 10_000);
    assert_eq!(v["method"], "CAKS");
    assert_eq!(v["reject"], code == 1);
}

#[test]
fn test_reads_file_argument_and_text_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.txt");
    std::fs::write(&path, as_text(&uniform_values(10_050, 2))).unwrap();
    let o = caks(
        &["test", "--null", "uniform", "-J", "100", path.to_str().unwrap()],
        b"",
    );
    let out = stdout(&o);
    assert!(out.contains("method:      CAKS"), "{out}");
    assert!(out.contains("n_discarded: 50"), "{out}");
}

#[test]
fn test_rejects_wrong_null_with_exit_1() {
    // uniform data tested against N(0,1)
    let data = as_text(&uniform_values(10_000, 3));
    let o = caks(&["test", "--null", "normal:0,1", "-J", "100", "--output", "csv"], &data);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), caks::decide::CSV_HEADER);
    assert!(lines.next().unwrap().starts_with("CAKS,"));
}

#[test]
fn test_short_input_is_an_error() {
    let data = as_text(&uniform_values(99, 4));
    let o = caks(&["test", "--null", "uniform", "-J", "100"], &data);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no complete chunk"));
}

#[test]
fn test_unparseable_line_reports_line_number() {
    let o = caks(&["test", "--null", "uniform", "-J", "100"], b"0.5\n0.25\nfoo\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn text_and_binary_encodings_agree() {
    let values = uniform_values(20_000, 5);
    let args = |fmt: &'static str| {
        vec!["test", "--null", "uniform", "-J", "200", "--format", fmt, "--output", "json"]
    };
    let text = caks(&args("text"), &as_text(&values));
    let binary = caks(&args("binary"), &as_binary(&values));
    let a: serde_json::Value = serde_json::from_str(stdout(&text).trim()).unwrap();
    let b: serde_json::Value = serde_json::from_str(stdout(&binary).trim()).unwrap();
    let (za, zb) = (a["statistic"].as_f64().unwrap(), b["statistic"].as_f64().unwrap());
    assert!((za - zb).abs() <= 1e-15, "{za} vs {zb}");
    assert_eq!(a["T"], 100);
}

#[test]
fn binary_ragged_input_is_an_error() {
    let mut bytes = as_binary(&uniform_values(300, 6));
    bytes.extend_from_slice(&[0, 1, 2]);
    let o = caks(&["test", "--null", "uniform", "-J", "100", "--format", "binary"], &bytes);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibration_file_feeds_test() {
    let dir = tempfile::tempdir().unwrap();
    let cal = dir.path().join("cal.csv");
    let o = caks(
        &["calibrate", "--chunk-size", "50", "--replicates", "20000", "--seed", "9", "--out", cal.to_str().unwrap()],
        b"",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let data = as_text(&uniform_values(5_000, 7));
    let o = caks(
        &["test", "--null", "uniform", "-J", "50", "--calibration", cal.to_str().unwrap(), "--output", "json"],
        &data,
    );
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["T"], 100);
    // a file lacking the requested J
    let o = caks(&["test", "--null", "uniform", "-J", "100", "--calibration", cal.to_str().unwrap()], &data);
    assert_eq!(o.status.code(), Some(2));
}

const GOLDEN_J100_R1E5_SEED2017: &str = "J,mu_J,sigma2_J,replicates,seed\n\
100,8.5184300035371488e-2,6.7021587465034655e-4,100000,2017\n";

#[test]
fn calibrate_writes_golden_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = caks(
        &["calibrate", "--chunk-size", "100", "--replicates", "100000", "--seed", "2017", "--out", out.to_str().unwrap()],
        b"",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), GOLDEN_J100_R1E5_SEED2017);
}

#[test]
fn calibrate_j1_and_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c1.csv");
    let o = caks(
        &["calibrate", "-J", "1", "--replicates", "100000", "--seed", "1", "--out", out.to_str().unwrap()],
        b"",
    );
    assert_eq!(o.status.code(), Some(0));
    let rows = caks::calib::read_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert!((rows[0].mu_j - 0.75).abs() < 0.003);

    let o = caks(&["calibrate", "-J", "10", "--replicates", "1", "--seed", "1", "--out", out.to_str().unwrap()], b"");
    assert_eq!(o.status.code(), Some(2));
    let o = caks(
        &["calibrate", "-J", "10", "--replicates", "100", "--seed", "1", "--out", "/nonexistent-dir/x.csv"],
        b"",
    );
    assert_eq!(o.status.code(), Some(2));
    // seed is mandatory
    let o = caks(&["calibrate", "-J", "10", "--replicates", "100", "--out", out.to_str().unwrap()], b"");
    assert_eq!(o.status.code(), Some(2));
}

fn simulate(args: &[&str]) -> (u64, String) {
    let mut full = vec!["simulate"];
    full.extend_from_slice(args);
    let o = caks(&full, b"");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), caks::sim::SCENARIO_CSV_HEADER);
    let row = lines.next().unwrap().to_string();
    let rejections = row.split(',').nth(6).unwrap().parse().unwrap();
    (rejections, row)
}

#[test]
fn simulate_rows() {
    let (r, row) = simulate(&["--scenario", "s1", "--effect", "0", "--T", "100", "--J", "100", "--reps", "100", "--seed", "11"]);
    assert!((3..=18).contains(&r), "{row}");
    assert!(row.starts_with("S1,0,100,100,100,0.1,"));
    assert!(row.ends_with(",11"));

    let (r, _) = simulate(&["--scenario", "s2", "--effect", "0.8", "--T", "100", "--J", "1000", "--reps", "100", "--seed", "12"]);
    assert_eq!(r, 100);

    let (r, _) = simulate(&["--scenario", "s3", "--effect", "1", "--T", "100", "--J", "100", "--reps", "100", "--seed", "13"]);
    assert_eq!(r, 100);

    let (r, _) = simulate(&[
        "--scenario", "s3", "--effect", "1", "--T", "100", "--J", "100", "--reps", "20", "--seed", "14",
        "--direction", "reversed",
    ]);
    assert_eq!(r, 20);

    let (r, _) = simulate(&["--scenario", "s1", "--effect", "-1", "--T", "100", "--J", "100", "--reps", "10", "--seed", "15"]);
    assert_eq!(r, 10);
}

#[test]
fn simulate_errors() {
    let bad = [
        vec!["--scenario", "s4", "--effect", "0", "--T", "10", "--J", "100", "--reps", "1", "--seed", "1"],
        vec!["--scenario", "s2", "--effect", "-1", "--T", "10", "--J", "100", "--reps", "1", "--seed", "1"],
        vec!["--scenario", "s1", "--effect", "0", "--T", "10", "--J", "137", "--reps", "1", "--seed", "1"],
        vec!["--scenario", "s1", "--effect", "0", "--T", "10", "--J", "100", "--reps", "1"],
    ];
    for args in bad {
        let mut full = vec!["simulate"];
        full.extend(args.iter());
        assert_eq!(caks(&full, b"").status.code(), Some(2), "{args:?}");
    }
    let o = caks(
        &["simulate", "--scenario", "s1", "--effect", "0", "--T", "10", "--J", "137", "--reps", "2", "--seed", "1", "--auto-calibrate", "2000,3"],
        b"",
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn bench_rows() {
    let o = caks(&["bench", "--n", "1000000", "--chunk-size", "10000", "--null", "normal:0,1", "--seed", "1"], b"");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "n,J,caks_s,batch_stat_s,batch_pvalue_s");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..2], &["1000000", "10000"]);
    for cell in &row[2..] {
        assert!(cell.parse::<f64>().unwrap() >= 0.0);
    }

    let o = caks(&["bench", "--n", "10", "--chunk-size", "100", "--null", "uniform", "--seed", "1"], b"");
    assert_eq!(o.status.code(), Some(2));
}
