use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ensdens"));
    cmd.env("ENSDENS_THREADS", "1");
    cmd
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn run(cmd: &mut Command) -> (i32, String) {
    let out = cmd.output().unwrap();
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    (out.status.code().unwrap_or(-1), text)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Fits a reduced iris grid into `dir` and returns the pool path.
fn fit_iris(dir: &Path) -> PathBuf {
    let iris = data_dir().join("iris.csv");
    let (code, text) = run(bin()
        .args(["fit", "--header", "--k-max", "4", "--structures", "EII,VVI,VVV", "--data"])
        .arg(&iris)
        .arg("--out-dir")
        .arg(dir));
    assert_eq!(code, 0, "{text}");
    dir.join("pool.json")
}

#[test]
fn malformed_csv_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1.0,2.0\n3.0,abc\n4.0\n").unwrap();
    let (code, text) = run(bin().arg("fit").arg("--data").arg(&bad).arg("--out-dir").arg(dir.path()));
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("line"), "{text}");
}

#[test]
fn unknown_flags_and_missing_files_are_usage_errors() {
    assert_eq!(run(bin().args(["fit", "--bogus"])).0, 2);
    assert_eq!(run(bin().args(["report", "--results", "/nonexistent/results.csv"])).0, 2);
    assert_eq!(run(bin().arg("--help")).0, 0);
}

#[test]
fn iris_fit_ensemble_cluster_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let pool = fit_iris(dir.path());
    let pool_json = read_json(&pool);
    assert_eq!(pool_json["schema_version"], 1);
    assert_eq!(pool_json["n"], 150);
    assert!(dir.path().join("fit_report.csv").exists());

    let iris = data_dir().join("iris.csv");
    let (code, text) = run(bin()
        .args(["ensemble", "--header", "--penalty", "bic", "--pool"])
        .arg(&pool)
        .arg("--data")
        .arg(&iris)
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code, 0, "{text}");
    let weights = read_json(&dir.path().join("weights.json"));
    assert_eq!(weights["schema_version"], 1);
    assert!((weights["lambda"].as_f64().unwrap() - 2.505).abs() < 1e-3);
    let alpha: Vec<f64> = weights["alpha"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let (code, text) = run(bin()
        .args(["cluster", "--header", "--pool"])
        .arg(&pool)
        .arg("--weights")
        .arg(dir.path().join("weights.json"))
        .arg("--data")
        .arg(&iris)
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code, 0, "{text}");
    let partition = read_json(&dir.path().join("partition.json"));
    assert_eq!(partition["schema_version"], 1);
    assert_eq!(partition["labels"].as_array().unwrap().len(), 150);

    let (code, text) = run(bin()
        .args(["evaluate", "--header", "--partition"])
        .arg(dir.path().join("partition.json"))
        .arg("--truth")
        .arg(data_dir().join("iris_species.csv"))
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code, 0, "{text}");
    let metrics = read_json(&dir.path().join("metrics.json"));
    assert_eq!(metrics["schema_version"], 1);
    let ari = metrics["ari"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&ari));
}

#[test]
fn zero_lambda_gives_unpenalized_weights() {
    let dir = tempfile::tempdir().unwrap();
    let pool = fit_iris(dir.path());
    let (code, text) = run(bin()
        .args(["ensemble", "--header", "--lambda", "0", "--pool"])
        .arg(&pool)
        .arg("--data")
        .arg(data_dir().join("iris.csv"))
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code, 0, "{text}");
    let weights = read_json(&dir.path().join("weights.json"));
    assert_eq!(weights["lambda"].as_f64().unwrap(), 0.0);
    assert_eq!(weights["penalty"], "manual");

    let (code, _) = run(bin()
        .args(["ensemble", "--header", "--lambda", "-1", "--pool"])
        .arg(&pool)
        .arg("--data")
        .arg(data_dir().join("iris.csv"))
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code, 2);
}

#[test]
fn fit_is_deterministic_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = fs::read(fit_iris(a.path())).unwrap();
    let pb = fs::read(fit_iris(b.path())).unwrap();
    assert_eq!(pa, pb);
}

#[test]
fn simulate_twice_is_byte_identical_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    fs::write(
        &plan,
        "scenarios = [\"M1\", \"M4\"]\nB = 2\nn = [120]\nmethods = [\"SB\", \"LAMBDA_BIC\"]\nseed = 17\nk_max = 3\nensemble_size = 6\nise_resolution = 100\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let out = dir.path().join(format!("run{run_id}"));
        fs::create_dir_all(&out).unwrap();
        let (code, text) = run(bin().arg("simulate").arg("--plan").arg(&plan).arg("--out-dir").arg(&out));
        assert_eq!(code, 0, "{text}");
        outputs.push(fs::read(out.join("results.csv")).unwrap());
        assert_eq!(read_json(&out.join("summary.json"))["schema_version"], 1);
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(csv.starts_with("scenario,n,method,replicate,ise,ari,k_hat,lambda,seed"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);

    let (code, text) = run(bin()
        .arg("report")
        .arg("--results")
        .arg(dir.path().join("run0/results.csv"))
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("M4"), "{text}");
}
