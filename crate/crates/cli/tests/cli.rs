use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dirms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirms"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn dirms_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirms"))
        .args(args)
        .env(key, val)
        .output()
        .expect("binary runs")
}

fn sample(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|_| panic!("{}", path.display()))).unwrap()
}

fn out(dir: &TempDir, sub: &str) -> String {
    dir.path().join(sub).display().to_string()
}

fn write(dir: &TempDir, name: &str, contents: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, contents).unwrap();
    p.display().to_string()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn circular_sample_gives_two_clusters_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let input = sample("sample_circular.csv");
    let run = |sub: &str| {
        dirms(&[
            "cluster", "--input", &input, "--format", "angles_rad", "--bandwidth", "0.3",
            "--seed", "42", "--output-dir", &out(&dir, sub),
        ])
    };
    let o = run("a");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(dir.path().join("a/report.json"));
    assert_eq!(report["n_modes"], 2);
    assert_eq!(report["seed"], 42);
    assert_eq!(report["bandwidth"]["h"], 0.3);
    assert_eq!(report["labels"].as_array().unwrap().len(), 60);
    assert!(report["modes"][0]["theta"].is_number());

    assert_eq!(code(&run("b")), 0);
    let a = fs::read(dir.path().join("a/labels.csv")).unwrap();
    let b = fs::read(dir.path().join("b/labels.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lonlat_sample_bandwidth_sweep_and_filter() {
    let dir = TempDir::new().unwrap();
    let input = sample("sample_lonlat.csv");
    let modes = |h: &str, sub: &str| {
        let o = dirms(&["cluster", "--input", &input, "--bandwidth", h, "--output-dir", &out(&dir, sub)]);
        assert_eq!(code(&o), 0);
        json(dir.path().join(sub).join("report.json"))["n_modes"].as_u64().unwrap()
    };
    let fine = modes("0.3", "fine");
    let coarse = modes("1.0", "coarse");
    assert_eq!(coarse, 1);
    assert!(fine > coarse);

    let o = dirms(&[
        "cluster", "--input", &input, "--min-filter", "diameter_km=5", "--blurring",
        "--output-dir", &out(&dir, "filtered"),
    ]);
    assert_eq!(code(&o), 0);
    let r = json(dir.path().join("filtered/report.json"));
    let (points, filtered) = (r["input"]["points"].as_u64().unwrap(), r["input"]["filtered"].as_u64().unwrap());
    assert_eq!(points + filtered, 90);
    assert!(filtered > 0);
    assert!(r["sweeps"].as_u64().unwrap() >= 1);
    assert_eq!(r["bandwidth"]["mode"], "auto");
    // omitted seed is generated and echoed
    assert!(r["seed"].is_u64());
}

#[test]
fn malformed_rows_are_reported() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.csv", "lon,lat\n10,20\n270,0\nabc,1\n0,95\n12,21\n11,19\n");
    let o = dirms(&["cluster", "--input", &input, "--bandwidth", "0.5", "--output-dir", &out(&dir, "o")]);
    assert_eq!(code(&o), 0);
    let r = json(dir.path().join("o/report.json"));
    assert_eq!(r["input"]["rows_read"], 6);
    assert_eq!(r["input"]["points"], 4);
    assert_eq!(r["input"]["dropped"], 2);
    let lines: Vec<u64> = r["input"]["dropped_rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["line"].as_u64().unwrap())
        .collect();
    assert_eq!(lines, vec![4, 5]);
    let rows = read_csv(&dir.path().join("o/labels.csv"));
    // 270° east is stored as −90°
    assert_eq!(rows[1][1].parse::<f64>().unwrap().round(), -90.0);
}

#[test]
fn input_errors_exit_with_code_three() {
    let dir = TempDir::new().unwrap();
    let o = dirms(&["cluster", "--input", "/does/not/exist.csv", "--output-dir", &out(&dir, "x")]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));

    let input = write(&dir, "in.csv", "a,b\n1,2\n");
    assert_eq!(code(&dirms(&["cluster", "--input", &input, "--output-dir", &out(&dir, "x")])), 3);

    let input = write(&dir, "bad.csv", "lon,lat\nx,y\n");
    assert_eq!(code(&dirms(&["cluster", "--input", &input, "--output-dir", &out(&dir, "x")])), 3);

    assert_eq!(code(&dirms(&["simulate", "--scenario", "nowhere"])), 3);
    assert_eq!(code(&dirms(&["cluster", "--input", &input, "--kernel", "gaussian"])), 3);

    let ok = sample("sample_circular.csv");
    let o = dirms_env(&["cluster", "--input", &ok, "--format", "angles_rad"], "DIRMS_THREADS", "0");
    assert_eq!(code(&o), 3);
}

#[test]
fn partial_convergence_exits_with_code_two() {
    let dir = TempDir::new().unwrap();
    let input = sample("sample_lonlat.csv");
    let o = dirms(&[
        "cluster", "--input", &input, "--bandwidth", "0.3", "--max-iter", "1",
        "--output-dir", &out(&dir, "o"),
    ]);
    assert_eq!(code(&o), 2);
    let r = json(dir.path().join("o/report.json"));
    assert_eq!(r["all_converged"], false);
    assert!(r["labels"].as_array().unwrap().iter().any(Value::is_null));
}

#[test]
fn density_grid_for_single_point_on_sphere() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "one.csv", "lon,lat\n30,40\n");
    let o = dirms(&["density", "--input", &input, "--bandwidth", "0.4", "--output-dir", &out(&dir, "d")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(dir.path().join("d/density_report.json"));
    assert_eq!(r["grid"], serde_json::json!([181, 91]));
    assert!((r["integral"].as_f64().unwrap() - 1.0).abs() < 0.01);
    assert_eq!(r["max_at"], serde_json::json!([30.0, 40.0]));

    let rows = read_csv(&dir.path().join("d/density.csv"));
    assert_eq!(rows.len(), 181 * 91);
    // along the meridian lon = 30 the density decays away from lat = 40
    let mut meridian: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r[0] == "30")
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    meridian.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in meridian.windows(2) {
        if w[1].0 <= 40.0 {
            assert!(w[1].1 >= w[0].1);
        } else {
            assert!(w[1].1 <= w[0].1);
        }
    }
}

#[test]
fn density_grid_on_circle_and_dimension_limit() {
    let dir = TempDir::new().unwrap();
    let input = sample("sample_circular.csv");
    let o = dirms(&[
        "density", "--input", &input, "--format", "angles_rad", "--bandwidth", "0.3",
        "--grid-res", "720", "--output-dir", &out(&dir, "d"),
    ]);
    assert_eq!(code(&o), 0);
    let r = json(dir.path().join("d/density_report.json"));
    assert!((r["integral"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(read_csv(&dir.path().join("d/density.csv")).len(), 720);

    let cart = write(&dir, "q3.csv", "x0,x1,x2,x3\n1,0,0,0\n0,1,0,0\n");
    let o = dirms(&["density", "--input", &cart, "--format", "cartesian", "--bandwidth", "0.5"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn simulate_is_deterministic_for_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let run = |sub: &str, threads: &str| {
        let o = dirms_env(
            &["simulate", "--scenario", "circular", "--repeats", "3", "--seed", "9", "--output-dir", &out(&dir, sub)],
            "DIRMS_THREADS",
            threads,
        );
        assert!(code(&o) == 0 || code(&o) == 2);
    };
    run("a", "1");
    run("b", "3");
    for f in ["rates.csv", "summary.csv", "data/circular_q1_r0.csv", "data/circular_q1_r2.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let strip = |mut v: Value| {
        let o = v.as_object_mut().unwrap();
        o.remove("seconds");
        o.remove("threads");
        v
    };
    assert_eq!(strip(json(dir.path().join("a/report.json"))), strip(json(dir.path().join("b/report.json"))));

    let r = json(dir.path().join("a/report.json"));
    assert_eq!(r["n"], 60);
    assert_eq!(r["bandwidth"], "0.3");
    // simulated datasets are valid inputs
    let data = dir.path().join("a/data/circular_q1_r0.csv").display().to_string();
    let o = dirms(&["cluster", "--input", &data, "--format", "angles_rad", "--bandwidth", "0.3", "--output-dir", &out(&dir, "c")]);
    assert_eq!(code(&o), 0);
}

#[test]
fn sphere3_misclassification_over_twenty_repeats() {
    let dir = TempDir::new().unwrap();
    let o = dirms(&["simulate", "--scenario", "sphere3", "--repeats", "20", "--seed", "2024", "--output-dir", &out(&dir, "s")]);
    assert_eq!(code(&o), 0);
    let r = json(dir.path().join("s/report.json"));
    let mean = r["summary"][0]["mean"].as_f64().unwrap();
    assert!((0.02..=0.08).contains(&mean), "mean misclassification {mean}");
    assert_eq!(read_csv(&dir.path().join("s/rates.csv")).len(), 20);
}

#[test]
fn hyperq_sweep_trend() {
    let dir = TempDir::new().unwrap();
    let o = dirms(&[
        "simulate", "--scenario", "hyperq", "--q", "3", "--q-max", "12", "--repeats", "2",
        "--seed", "77", "--output-dir", &out(&dir, "h"),
    ]);
    assert!(code(&o) == 0 || code(&o) == 2);
    let r = json(dir.path().join("h/report.json"));
    assert_eq!(r["summary"].as_array().unwrap().len(), 10);
    let rho = r["spearman_q"].as_f64().unwrap();
    assert!(rho > 0.8, "spearman {rho}");
}

#[test]
fn verify_passes_on_fresh_sample() {
    let dir = TempDir::new().unwrap();
    let o = dirms(&["simulate", "--scenario", "sphere1", "--n", "200", "--seed", "5", "--output-dir", &out(&dir, "s")]);
    assert_eq!(code(&o), 0);
    let data = dir.path().join("s/data/sphere1_q2_r0.csv").display().to_string();
    let o = dirms(&["verify", "--input", &data, "--seed", "1", "--output-dir", &out(&dir, "v")]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r = json(dir.path().join("v/verify.json"));
    assert_eq!(r["passed"], true);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["status"] == "pass"));

    let o = dirms(&["verify", "--input", &sample("sample_circular.csv"), "--format", "angles_rad", "--bandwidth", "0.3"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn verify_reports_underflow_and_bad_kernels() {
    let dir = TempDir::new().unwrap();
    let o = dirms(&["simulate", "--scenario", "sphere1", "--n", "50", "--seed", "6", "--output-dir", &out(&dir, "s")]);
    assert_eq!(code(&o), 0);
    let data = dir.path().join("s/data/sphere1_q2_r0.csv").display().to_string();

    let o = dirms(&["verify", "--input", &data, "--bandwidth", "1e-6"]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    assert!(text.contains("[INFO] underflow"), "{text}");
    assert!(text.contains("[FAIL]"));

    let o = dirms(&["verify", "--input", &data, "--kernel", "inverse-sqrt"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("[FAIL] kernel"));
}
