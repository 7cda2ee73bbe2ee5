use bw_frechet::io::*;
use bw_frechet::simulation::{generate, run_qq_experiment, ExampleConfig, ExampleKind};
use bw_frechet::*;
use nalgebra::DVector;

#[test]
fn generated_dataset_round_trips_exactly() {
    for which in [ExampleKind::Example1, ExampleKind::Example2] {
        let cfg = ExampleConfig { which, n: 25, p: 3, d: 4, delta: 0.2, seed: 31 };
        let (data, _) = generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (c, r) = (dir.path().join("x.csv"), dir.path().join("q.csv"));
        save_dataset(&data, &c, &r).unwrap();
        let back = load_dataset(&c, &r).unwrap();
        assert_eq!(back.covariates(), data.covariates());
        for (a, b) in back.responses().iter().zip(data.responses()) {
            assert!((a.as_matrix() - b.as_matrix()).abs().max() <= 1e-15 * b.as_matrix().abs().max());
        }
        let text = std::fs::read_to_string(&r).unwrap();
        assert_eq!(text.lines().count(), 1 + 25 * 10);
    }
}

#[test]
fn upper_triangle_is_mirrored() {
    let cov = "x1\n0\n1\n";
    let resp = "sample_id,row,col,value\n0,0,0,2\n0,0,1,0.5\n0,1,1,1\n1,0,0,1\n1,0,1,0\n1,1,1,1\n";
    let data = read_dataset(cov.as_bytes(), "c", resp.as_bytes(), "r").unwrap();
    let q = data.responses()[0].as_matrix();
    assert_eq!(q[(1, 0)], 0.5);
    assert_eq!(q[(0, 1)], 0.5);
}

#[test]
fn missing_sample_is_reported() {
    let cov = "x1\n0\n1\n";
    let resp = "sample_id,row,col,value\n0,0,0,2\n";
    assert!(matches!(
        read_dataset(cov.as_bytes(), "c", resp.as_bytes(), "r"),
        Err(Error::MissingCell { sample: 1, row: 0, col: 0 })
    ));
    let resp = "sample_id,row,col,value\n0,0,0,2\n1,0,0,1\n2,0,0,1\n";
    assert!(matches!(read_dataset(cov.as_bytes(), "c", resp.as_bytes(), "r"), Err(Error::Parse { line: 4, .. })));
}

#[test]
fn report_files_are_written() {
    let cfg = ExampleConfig { which: ExampleKind::Example1, n: 30, p: 2, d: 2, delta: 0.0, seed: 1 };
    let rep = run_qq_experiment(&cfg, 3, &DVector::zeros(2), &[(0, 0)], &FitConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (c, j) = (dir.path().join("r.csv"), dir.path().join("r.json"));
    save_report(&rep, &c, &j).unwrap();
    let csv = std::fs::read_to_string(&c).unwrap();
    assert!(csv.starts_with("trial,row,col,estimate,truth,variance,z\n"));
    assert_eq!(csv.lines().count(), 4);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&j).unwrap()).unwrap();
    assert_eq!(meta["kind"], "QQ");
    assert_eq!(meta["row_count"], 3);
    assert_eq!(meta["metadata"]["version"], env!("CARGO_PKG_VERSION"));
}
