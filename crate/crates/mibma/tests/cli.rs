use std::path::Path;
use std::process::{Command, Output};

use mibma::io::{read_dataset, write_dataset};
use mibma_core::{informative_sample, Family, RngStream, Scenario, ScenarioConfig};
use nalgebra::{DMatrix, DVector};

fn mibma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mibma"))
        .args(args)
        .env_remove("MIBMA_SEED")
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const TOY: &str = "y,delta,pi,x1\n0.0,1,0.5,0\n1.0,1,0.25,1\n1.0,1,1.0,2\n2.5,1,0.5,3\n";

#[test]
fn simulate_smoke_run_writes_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mibma(&[
        "simulate",
        "--scenario",
        "I",
        "--reps",
        "2",
        "--seed",
        "7",
        "--m",
        "5",
        "--burn-in",
        "10",
        "--thin",
        "2",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("metrics.csv"));
    let methods: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(
        methods.into_iter().collect::<Vec<_>>(),
        ["MI_BMA", "MI_FULL", "MI_TRUE"]
    );
    for r in &rows {
        assert_eq!(r.len(), 11);
        for v in &r[3..9] {
            assert!(v.parse::<f64>().unwrap().is_finite());
        }
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed=7"));
    assert!(manifest.contains("selection_rule=median_probability"));
}

#[test]
fn simulate_is_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let common = [
        "simulate",
        "--scenario",
        "II",
        "--reps",
        "4",
        "--seed",
        "3",
        "--m",
        "4",
        "--burn-in",
        "5",
        "--thin",
        "1",
    ];
    let run = |dir: &Path, threads: &str| {
        let mut args = common.to_vec();
        args.extend(["--threads", threads, "--out", dir.to_str().unwrap()]);
        assert!(mibma(&args).status.success());
        std::fs::read(dir.join("metrics.csv")).unwrap()
    };
    let first = run(a.path(), "1");
    assert_eq!(first, run(b.path(), "3"));
    assert_eq!(first, run(a.path(), "2"));
}

#[test]
fn seed_falls_back_to_the_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = [
        "simulate",
        "--reps",
        "2",
        "--m",
        "3",
        "--burn-in",
        "2",
        "--thin",
        "1",
        "--out",
    ];
    let mut with_flag = base.to_vec();
    with_flag.extend([a.path().to_str().unwrap(), "--seed", "42"]);
    assert!(mibma(&with_flag).status.success());
    let mut from_env = base.to_vec();
    from_env.push(b.path().to_str().unwrap());
    let o = Command::new(env!("CARGO_BIN_EXE_mibma"))
        .args(&from_env)
        .env("MIBMA_SEED", "42")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(a.path().join("metrics.csv")).unwrap(),
        std::fs::read(b.path().join("metrics.csv")).unwrap()
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    write(&cfg, "# small run\nscenario = II\nreps = 3\nm = 3\nburn_in = 2\nthin = 1\nseed = 5\nn_pop = 3000\n");
    let out = dir.path().join("out");
    let o = mibma(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--reps",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("scenario=II"));
    assert!(manifest.contains("reps=2"));
    assert!(manifest.contains("n_pop=3000"));
    assert!(manifest.contains("seed=5"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = mibma(&[
        "simulate",
        "--config",
        "/nonexistent/run.cfg",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());

    let bad = dir.path().join("bad.cfg");
    write(&bad, "frobnicate = 1\n");
    assert_eq!(
        mibma(&["simulate", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(mibma(&["simulate", "--reps", "0"]).status.code(), Some(2));
    assert_eq!(mibma(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn fit_matches_the_normal_equations() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    write(&data, TOY);
    let o = mibma(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&dir.path().join("fit.csv"));
    assert_eq!(
        rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(),
        ["beta0", "beta1", "log_sigma2"]
    );

    let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
    let w = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0, 1.0, 2.0]));
    let y = DVector::from_vec(vec![0.0, 1.0, 1.0, 2.5]);
    let beta = (x.transpose() * &w * &x)
        .lu()
        .solve(&(x.transpose() * &w * &y))
        .unwrap();
    for k in 0..2 {
        assert!((rows[k][1].parse::<f64>().unwrap() - beta[k]).abs() < 1e-10);
        assert!(rows[k][2].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn intercept_only_fit_is_the_weighted_mean() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    write(&data, TOY);
    let o = mibma(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--mask",
        "0x0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rows = read_csv(&dir.path().join("fit.csv"));
    // (2·0 + 4·1 + 1·1 + 2·2.5) / 9
    assert!((rows[0][1].parse::<f64>().unwrap() - 10.0 / 9.0).abs() < 1e-12);
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn fit_reports_a_missing_column_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("nodelta.csv");
    write(&data, "y,pi,x1\n0,1,0\n1,1,1\n2,1,3\n");
    let o = mibma(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));

    let bad = dir.path().join("bad.csv");
    write(&bad, "y,delta,pi,x1\nzero,1,1,0\n");
    assert_eq!(
        mibma(&["fit", "--data", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn fit_can_write_model_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sample.csv");
    let cfg = ScenarioConfig::desk(Scenario::I);
    write_dataset(
        &path,
        &informative_sample(&cfg, 300, false, &mut RngStream::new(1, 0)).unwrap(),
    )
    .unwrap();
    let o = mibma(&[
        "fit",
        "--data",
        path.to_str().unwrap(),
        "--posterior",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rows = read_csv(&dir.path().join("posterior.csv"));
    assert_eq!(rows.len(), 64);
    let total: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(rows.iter().all(|r| r[0].starts_with("0x")));
}

#[test]
fn single_mode_requires_a_mask() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    write(&data, TOY);
    let o = mibma(&["mi", "--data", data.to_str().unwrap(), "--mode", "single"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_model_imputation_without_missingness_agrees_with_fit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sample.csv");
    let cfg = ScenarioConfig::desk(Scenario::I);
    write_dataset(
        &path,
        &informative_sample(&cfg, 300, false, &mut RngStream::new(2, 0)).unwrap(),
    )
    .unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(mibma(&[
        "fit",
        "--data",
        path.to_str().unwrap(),
        "--mask",
        "0x1",
        "--out",
        d
    ])
    .status
    .success());
    let o = mibma(&[
        "mi",
        "--data",
        path.to_str().unwrap(),
        "--mode",
        "single",
        "--mask",
        "0x1",
        "--m",
        "5",
        "--out",
        d,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit = read_csv(&dir.path().join("fit.csv"));
    let mi = read_csv(&dir.path().join("mi.csv"));
    for k in 0..8 {
        let f: f64 = fit[k][1].parse().unwrap();
        let m: f64 = mi[k][1].parse().unwrap();
        let sd: f64 = mi[k][3].parse().unwrap();
        assert!((f - m).abs() <= 3.0 * sd + 1e-12, "slot {k}");
    }
}

#[test]
fn model_averaged_imputation_finds_the_relevant_covariate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sample.csv");
    let cfg = ScenarioConfig::desk(Scenario::I);
    let sample = informative_sample(&cfg, 2000, true, &mut RngStream::new(3, 0)).unwrap();
    write_dataset(&path, &sample).unwrap();
    let reread = read_dataset(&path, Family::Gaussian).unwrap();
    assert_eq!(reread.n(), 2000);
    assert_eq!(reread.n_missing(), sample.n_missing());

    let run = |out: &Path| {
        let o = mibma(&[
            "mi",
            "--data",
            path.to_str().unwrap(),
            "--m",
            "20",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            std::fs::read(out.join("mi.csv")).unwrap(),
            std::fs::read(out.join("models.csv")).unwrap(),
        )
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(a.path());
    assert_eq!(first, run(b.path()));
    let models = read_csv(&a.path().join("models.csv"));
    assert_eq!(models[0][0], "x1");
    assert!(models[0][1].parse::<f64>().unwrap() > 0.9);
    let draws = read_csv(&a.path().join("draws.csv"));
    assert_eq!(draws.len(), 21);
    assert_eq!(draws[20][1], "pooled");
}
