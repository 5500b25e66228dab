//! End-to-end runs of the binary against temporary files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ccgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccgp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_step_csv(path: &Path, n: usize) {
    let mut text = String::from("x,y\n");
    // deterministic low-discrepancy-ish grid around the step at 0
    for i in 0..n {
        let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
        let y = if x < 0.0 { 0.0 } else { 10.0 + x };
        text.push_str(&format!("{x},{y}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn fit_predict_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("train.csv");
    let artifact = dir.path().join("model.json");
    write_step_csv(&data, 50);

    let out = ccgp(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        artifact.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(summary.contains("clusters (K):    2"), "{summary}");
    assert!(summary.contains("stage seconds"));

    // refit is byte-identical
    let first = fs::read(&artifact).unwrap();
    let out = ccgp(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        artifact.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    assert_eq!(first, fs::read(&artifact).unwrap());

    // predict the training inputs in hard mode: interpolation regime
    let inputs = dir.path().join("inputs.csv");
    let mut text = String::from("x\n");
    for i in 0..50 {
        let x = -1.0 + 2.0 * (i as f64 + 0.5) / 50.0;
        text.push_str(&format!("{x}\n"));
    }
    fs::write(&inputs, text).unwrap();
    let pred_path = dir.path().join("pred.csv");
    let out = ccgp(&[
        "predict",
        "--artifact",
        artifact.to_str().unwrap(),
        "--data",
        inputs.to_str().unwrap(),
        "--out",
        pred_path.to_str().unwrap(),
        "--mode",
        "hard",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pred = fs::read_to_string(&pred_path).unwrap();
    let lines: Vec<&str> = pred.lines().collect();
    assert_eq!(lines.len(), 51, "row count preserved plus header");
    assert_eq!(lines[0], "x,mean,variance,label,class_prob_1,class_prob_2");
    for (i, line) in lines[1..].iter().enumerate() {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let x = -1.0 + 2.0 * (i as f64 + 0.5) / 50.0;
        let truth = if x < 0.0 { 0.0 } else { 10.0 + x };
        assert!(
            (fields[1] - truth).abs() < 1e-4,
            "row {i}: mean {} vs truth {truth}",
            fields[1]
        );
        let prob_sum = fields[4] + fields[5];
        assert!((prob_sum - 1.0).abs() < 1e-9);
    }

    // soft mode probabilities also sum to one per row
    let out = ccgp(&[
        "predict",
        "--artifact",
        artifact.to_str().unwrap(),
        "--data",
        inputs.to_str().unwrap(),
        "--out",
        pred_path.to_str().unwrap(),
        "--mode",
        "soft",
    ]);
    assert!(out.status.success());
    let pred = fs::read_to_string(&pred_path).unwrap();
    for line in pred.lines().skip(1) {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((fields[4] + fields[5] - 1.0).abs() < 1e-9);
    }

    // direct is not an artifact mode
    let out = ccgp(&[
        "predict",
        "--artifact",
        artifact.to_str().unwrap(),
        "--data",
        inputs.to_str().unwrap(),
        "--out",
        pred_path.to_str().unwrap(),
        "--mode",
        "direct",
    ]);
    assert!(!out.status.success());
}

#[test]
fn bad_inputs_fail_loudly() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("empty.csv");
    fs::write(&data, "x,y\n").unwrap();
    let artifact = dir.path().join("model.json");
    let out = ccgp(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        artifact.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no data rows"));

    let data = dir.path().join("bad.csv");
    fs::write(&data, "x,y\n0.0,1.0\n0.5,oops\n").unwrap();
    let out = ccgp(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        artifact.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3"), "{err}");

    // unknown configuration keys are rejected with the key named
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\n[pipeline]\nrecombinatoin = \"hard\"\n").unwrap();
    write_step_csv(&data, 30);
    let out = ccgp(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--out",
        artifact.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("recombinatoin"), "{err}");

    // dimension mismatch at predict time
    write_step_csv(&data, 40);
    let out = ccgp(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        artifact.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "a,b\n0.1,0.2\n").unwrap();
    let pred = dir.path().join("pred.csv");
    let out = ccgp(&[
        "predict",
        "--artifact",
        artifact.to_str().unwrap(),
        "--data",
        wide.to_str().unwrap(),
        "--out",
        pred.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("input columns"));
}

fn strip_wall_times(csv: &str) -> String {
    // the fit_seconds column is wall time and legitimately varies between
    // reruns; everything else must reproduce exactly
    csv.lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() == 10 {
                let mut f = fields;
                f[8] = "-";
                f.join(",")
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bench_and_report_cycle() {
    let dir = TempDir::new().unwrap();
    let csv_out = dir.path().join("report.csv");
    let json_out = dir.path().join("summary.json");
    let cfg_path = dir.path().join("bench.toml");
    let cfg = format!(
        r#"
problem = "truss"
sizes = [30]
repetitions = 2
n_validation = 150
methods = ["direct", "hard"]
seed = 5
csv_out = "{}"
summary_out = "{}"

[pipeline.svc]
budget = 18

[pipeline.gp]
max_evals = 30
restarts = 1

[[thresholds]]
metric = "nmse"
n = 30
method = "hard"
baseline = "direct"
max_median_ratio = 1000.0
"#,
        csv_out.display(),
        json_out.display()
    );
    fs::write(&cfg_path, &cfg).unwrap();

    let out = ccgp(&["bench", "--config", cfg_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pass"));

    let report = fs::read_to_string(&csv_out).unwrap();
    assert_eq!(report.lines().count(), 2 + 1 * 2 * 2, "header+comment+rows");
    let summary = fs::read_to_string(&json_out).unwrap();
    assert!(summary.contains("nmse_median"));

    // identical master seed reproduces everything except wall times
    let first = strip_wall_times(&report);
    let out = ccgp(&["bench", "--config", cfg_path.to_str().unwrap()]);
    assert!(out.status.success());
    let second = strip_wall_times(&fs::read_to_string(&csv_out).unwrap());
    assert_eq!(first, second);

    // the report command round-trips the CSV into the same summary
    let json2 = dir.path().join("summary2.json");
    let out = ccgp(&[
        "report",
        "--data",
        csv_out.to_str().unwrap(),
        "--out",
        json2.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let direct = fs::read_to_string(&json_out).unwrap();
    let via_csv = fs::read_to_string(&json2).unwrap();
    // wall times differ; compare everything else line by line
    for (a, b) in direct.lines().zip(via_csv.lines()) {
        if a.contains("fit_seconds") {
            continue;
        }
        assert_eq!(a, b);
    }

    // an impossible threshold makes the run fail
    let cfg = cfg.replace("max_median_ratio = 1000.0", "max_median_ratio = 0.000001");
    fs::write(&cfg_path, cfg).unwrap();
    let out = ccgp(&["bench", "--config", cfg_path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
