use std::path::PathBuf;
use std::process::{Command, Output};

fn snc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snc")).args(args).output().expect("binary runs")
}

fn snc_threads(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snc"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("snc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn capacity_curve_rows_and_header() {
    let out = stdout(&snc(&["capacity-curve", "--lambda", "1/6"]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("# schema=capacity-curve/v1 lambda=1/6 omega_step=1/100"));
    assert_eq!(lines.next(), Some("omega,capacity,singleton,achievable_k"));
    assert!(out.contains("\n0.2,0.64,0.5,25\n"));
    assert!(out.contains("\n0.21,0.6306833333333334,0.48333333333333334,\n"));
    let dots: Vec<&str> = out.lines().skip(2).filter(|l| !l.ends_with(',')).collect();
    let tail: Vec<&str> = dots.iter().rev().take(3).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(tail, ["6", "7", "8"]);
    for row in out.lines().skip(2) {
        let cols: Vec<&str> = row.split(',').collect();
        if !cols[2].is_empty() {
            assert!(cols[1].parse::<f64>().unwrap() >= cols[2].parse::<f64>().unwrap());
        }
    }
}

#[test]
fn degree_dist_report() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&snc(&["degree-dist", "--k", "3", "--b", "6"]))).unwrap();
    assert_eq!(v["integral_rho"], "4/15");
    assert_eq!(v["p_prime_1"], "15/4");
    assert_eq!(v["encoder_condition"], true);
    let v: serde_json::Value = serde_json::from_str(&stdout(&snc(&["degree-dist", "--k", "2", "--b", "5"]))).unwrap();
    let rho: Vec<&str> = ["2", "3", "4", "5"].iter().map(|d| v["rho"][d].as_str().unwrap()).collect();
    assert_eq!(rho, ["1/4", "1/2", "1/6", "1/12"]);
    assert_eq!(snc(&["degree-dist", "--k", "3", "--b", "3"]).status.code(), Some(1));
}

#[test]
fn scalar_de_rows() {
    let out = stdout(&snc(&["de-scalar", "--k", "3", "--b", "6", "--iters", "4"]));
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows[0], "t,alpha");
    assert_eq!(rows[1], "0,1.000000000000e0");
    assert_eq!(rows[2], "1,6.000000000000e-1");
    assert_eq!(rows[3], "2,2.194560000000e-1");
    let out = stdout(&snc(&["de-scalar", "--k", "3", "--rho", "3:1", "--iters", "2"]));
    assert_eq!(out.lines().nth(3), Some("1,0"));
}

#[test]
fn population_de_without_noise() {
    let out = stdout(&snc(&[
        "de-population", "--N", "24", "--lambda", "1/2", "--omega", "0", "--k", "3", "--iters", "2", "--pop-size", "100",
    ]));
    assert!(out.starts_with("# schema=de-population/v1 "));
    assert!(out.contains(" D=0 "));
    assert_eq!(out.lines().nth(1), Some("t,frac_zero,frac_full,frac_interior,mean_dim"));
    for row in out.lines().skip(2) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[3..], ["0", "0"]);
    }
}

#[test]
fn noiseless_simulation_is_exact() {
    let out = stdout(&snc(&[
        "simulate", "--q", "3", "--N", "24", "--lambda", "1/2", "--omega", "0", "--k", "3", "--zero-rows", "4",
        "--trials", "10", "--pop-size", "100",
    ]));
    let header: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let row: Vec<&str> = out.lines().nth(2).unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("symbol_error"), "0");
    assert_eq!(col("wrong_determinations"), "0");
}

#[test]
fn simulation_is_byte_deterministic() {
    let run = |tag: &str, threads: usize| {
        let out = scratch(&format!("sim-{tag}.csv"));
        let args = [
            "simulate", "--N", "24", "--lambda", "1/2", "--omega", "1/3", "--trials", "70", "--pop-size", "200",
            "--seed", "5", "--out", out.to_str().unwrap(),
        ];
        let o = snc_threads(&args, threads);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let log = out.with_file_name(format!("sim-{tag}.trials.jsonl"));
        (std::fs::read(&out).unwrap(), std::fs::read(&log).unwrap())
    };
    let a = run("a", 4);
    let b = run("b", 4);
    let c = run("c", 1);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(String::from_utf8(a.1).unwrap().lines().count(), 70);
    let summary = String::from_utf8(a.0).unwrap();
    assert!(summary.starts_with("# schema=simulate-summary/v1 q=2 N=24 lambda=1/2 omega=1/3 "));
    assert!(summary.contains(" seed=5 "));
}

#[test]
fn summary_schema_is_pinned() {
    let out = stdout(&snc(&[
        "simulate", "--N", "24", "--lambda", "1/2", "--omega", "1/3", "--trials", "2", "--pop-size", "100",
    ]));
    assert_eq!(
        out.lines().nth(1),
        Some("trials,n_v,n_c,design_rate,min_exact_rate,capacity,symbol_error,ci99_lo,ci99_hi,recovered,recovery_frequency,recovery_probability,conditional_symbol_error,de_prediction,de_lo,de_hi,within_de_interval,wrong_determinations,containment_violations")
    );
}

#[test]
fn exit_codes() {
    assert_eq!(snc(&["capacity-curve", "--lambda", "0.5"]).status.code(), Some(1));
    assert_eq!(snc(&["simulate", "--N", "25", "--lambda", "1/2", "--omega", "1/3"]).status.code(), Some(1));
    assert_eq!(snc(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        snc(&["capacity-curve", "--lambda", "1/6", "--out", "/nonexistent-dir/x.csv"]).status.code(),
        Some(3)
    );
    assert_eq!(snc(&["oracle", "rank-count"]).status.code(), Some(0));
    assert_eq!(snc(&["oracle", "subspace-ops", "--q", "2", "--m", "4"]).status.code(), Some(0));
    let dev = snc(&["oracle", "deviation-bound", "--q", "2", "--m", "8", "--trials", "100"]);
    assert_eq!(dev.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&dev.stdout).unwrap();
    assert_eq!(report["reports"][0]["passed"], false);
    assert_eq!(report["reports"][0]["notes"]["floor_violations"], 0);
    assert!(!report["reports"][0]["failures"].as_array().unwrap().is_empty());
}
