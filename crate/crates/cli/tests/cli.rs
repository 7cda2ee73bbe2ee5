use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bwf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwf")).args(args).env("BWF_NUM_THREADS", "2").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

/// Two 2×2 responses per covariate value, written in long format.
fn two_by_two(dir: &Path, mats: &[[f64; 3]]) -> (String, String) {
    let mut cov = String::from("x1\n");
    let mut resp = String::from("sample_id,row,col,value\n");
    for (i, m) in mats.iter().enumerate() {
        cov.push_str(&format!("{}\n", i as f64 / mats.len() as f64));
        resp.push_str(&format!("{i},0,0,{}\n{i},0,1,{}\n{i},1,1,{}\n", m[0], m[1], m[2]));
    }
    (write(dir, "x.csv", &cov), write(dir, "q.csv", &resp))
}

#[test]
fn scalar_fit_at_the_mean_is_the_squared_root_mean() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "x.csv", "x1\n0\n1\n");
    let r = write(dir.path(), "q.csv", "sample_id,row,col,value\n0,0,0,1\n1,0,0,9\n");
    let out = bwf(&["fit", "--covariates", &c, "--responses", &r, "--x", "0.5"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["estimate"][0][0].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert_eq!(v["diagnostics"]["converged"], true);
}

#[test]
fn identical_responses_give_zero_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let (c, r) = two_by_two(dir.path(), &[[2.0, 0.3, 1.0]; 6]);
    let out = bwf(&["test", "--covariates", &c, "--responses", &r, "--mc", "2000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["result"]["statistic"].as_f64().unwrap().abs() < 1e-20);
    assert_eq!(v["result"]["p_value"], 1.0);
    assert_eq!(v["result"]["reject"], false);
}

#[test]
fn ci_covers_every_upper_entry() {
    let dir = tempfile::tempdir().unwrap();
    let mats = [[2.0, 0.3, 1.0], [1.0, -0.2, 3.0], [4.0, 0.0, 1.0], [1.5, 0.5, 2.0], [3.0, 1.0, 2.0]];
    let (c, r) = two_by_two(dir.path(), &mats);
    let out = bwf(&["ci", "--covariates", &c, "--responses", &r, "--x", "0.3", "--alpha", "0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["level"], 0.9);
    let iv = v["intervals"].as_array().unwrap();
    assert_eq!(iv.len(), 3);
    for e in iv {
        let (lo, est, hi) = (e["lower"].as_f64().unwrap(), e["estimate"].as_f64().unwrap(), e["upper"].as_f64().unwrap());
        assert!(lo <= est && est <= hi);
    }
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "x.csv", "x1\n0\n1\n");
    let bad = write(dir.path(), "bad.csv", "sample_id,row,col,value\n0,0,0,1\n1,0,0,-1\n");
    let out = bwf(&["fit", "--covariates", &c, "--responses", &bad, "--x", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "NotPositiveDefinite");
    assert!(!out.stderr.is_empty());

    let missing = dir.path().join("none.csv");
    let out = bwf(&["fit", "--covariates", &c, "--responses", missing.to_str().unwrap(), "--x", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let mats = [[4.0, 1.9, 1.0], [1.0, -0.9, 9.0], [0.1, 0.0, 5.0], [6.0, 2.0, 1.0]];
    let (c2, r2) = two_by_two(dir.path(), &mats);
    let out = bwf(&["fit", "--covariates", &c2, "--responses", &r2, "--x", "0.2", "--max-iters", "1", "--eps", "1e-14"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["error"]["kind"], "NonConvergence");

    let out = bwf(&["test", "--covariates", &c2, "--responses", &r2, "--alpha", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let (ra, rb) = (dir.path().join("ra.csv"), dir.path().join("rb.csv"));
    for (out, rep, threads) in [(&a, &ra, "1"), (&b, &rb, "3")] {
        let status = Command::new(env!("CARGO_BIN_EXE_bwf"))
            .args(["simulate", "--experiment", "size", "--n", "40", "--p", "2", "--d", "2", "--trials", "6"])
            .args(["--mc", "3000", "--seed", "11", "--out", out.to_str().unwrap(), "--report", rep.to_str().unwrap()])
            .env("BWF_NUM_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let report = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(report(&ra), report(&rb));
    assert_eq!(report(&ra.with_extension("json")), report(&rb.with_extension("json")));
    let (ja, jb) = (String::from_utf8(report(&a)).unwrap(), String::from_utf8(report(&b)).unwrap());
    // only the echoed paths differ
    assert_eq!(ja.replace("/ra.", "/r_."), jb.replace("/rb.", "/r_."));
}
