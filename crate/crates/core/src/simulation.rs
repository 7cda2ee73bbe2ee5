//! Synthetic data generators and reproducible experiment drivers.
//!
//! Both examples draw covariates `X ~ Uniform[−1, 1]^p` and a diagonal
//! multiplicative noise `V = diag(1 + Uniform[−0.1, 0.1])`.
//!
//! * Example 1: `Qᵢ = U Vᵢ f(Xᵢ)² Vᵢ Uᵀ` with a single Haar rotation `U`
//!   per dataset and `f(x)ₖₖ = 1.5 + k/2 + δ Σⱼ xⱼ`. All responses commute,
//!   and the regression target is `U f(x)² Uᵀ`.
//! * Example 2: `Qᵢ = Uᵢ Vᵢ g(Xᵢ)² Vᵢ Uᵢᵀ` with a fresh block-diagonal Haar
//!   rotation of `2 × 2` blocks per sample and
//!   `g(x)ₖₖ = 1.5 + ½⌈k/2⌉ + δ Σⱼ xⱼ`. The regression target is `g(x)²`.
//!
//! Trial `t` of an experiment with master seed `s` uses the data seed
//! [`trial_seed`]`(s, t)`; every other stream of that trial is derived from
//! the data seed, so results do not depend on thread scheduling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::chisq::weighted_chisq_draws;
use crate::error::{Error, Result};
use crate::geometry::{sqrtm, SpdMatrix};
use crate::inference::{clt_covariance, estimated_covariance_test, normal_quantile, TestOptions};
use crate::numeric::{min_value, sym_eigen, symmetrize, NumericConfig};
use crate::regression::{empirical_moments, fit, Dataset, FitConfig, Rho};
use crate::stats::{ks_normal_distance, ks_p_value, normal_scores, ols_line, sorted_quantile};

const NOISE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExampleKind {
    Example1,
    Example2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleConfig {
    pub which: ExampleKind,
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub delta: f64,
    pub seed: u64,
}

impl ExampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 || self.d == 0 {
            return Err(Error::InvalidArgument(format!(
                "need n >= 2, p >= 1, d >= 1 (got n={}, p={}, d={})",
                self.n, self.p, self.d
            )));
        }
        let bound = 2.0 / self.p as f64;
        if !(self.delta > -bound && self.delta < bound) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (-{bound}, {bound}), got {}",
                self.delta
            )));
        }
        if self.which == ExampleKind::Example2 && self.d % 2 != 0 {
            return Err(Error::OddDimension(self.d));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }
}

/// Diagonal `f(x)` (Example 1) or `g(x)` (Example 2).
pub fn example_diagonal(which: ExampleKind, d: usize, delta: f64, x: &DVector<f64>) -> Vec<f64> {
    let shift = delta * x.sum();
    (1..=d)
        .map(|k| match which {
            ExampleKind::Example1 => 1.5 + k as f64 / 2.0 + shift,
            ExampleKind::Example2 => 1.5 + 0.5 * k.div_ceil(2) as f64 + shift,
        })
        .collect()
}

/// Regression target `x ↦ R diag(h(x)²) Rᵀ` of a generated dataset.
#[derive(Debug, Clone)]
pub struct TrueMean {
    which: ExampleKind,
    delta: f64,
    rotation: DMatrix<f64>,
}

impl TrueMean {
    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn eval(&self, x: &DVector<f64>) -> SpdMatrix {
        let d = self.rotation.nrows();
        let h = example_diagonal(self.which, d, self.delta, x);
        let sq: Vec<f64> = h.iter().map(|v| v * v).collect();
        SpdMatrix::from_diagonal(&sq)
            .expect("diagonal is positive")
            .conjugate(&self.rotation)
    }
}

/// Haar-distributed orthogonal matrix via QR of a Gaussian matrix.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn draw_covariate<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.random_range(-1.0..=1.0))
}

fn draw_noise<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| 1.0 + rng.random_range(-NOISE..=NOISE)).collect()
}

fn response(rotation: &DMatrix<f64>, v: &[f64], h: &[f64]) -> Result<SpdMatrix> {
    let diag: Vec<f64> = v.iter().zip(h).map(|(a, b)| (a * b) * (a * b)).collect();
    Ok(SpdMatrix::from_diagonal(&diag)?.conjugate(rotation))
}

pub fn generate_example1(cfg: &ExampleConfig) -> Result<(Dataset, TrueMean)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u = haar_orthogonal(cfg.d, &mut rng);
    let mut cov = DMatrix::zeros(cfg.n, cfg.p);
    let mut responses = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let x = draw_covariate(cfg.p, &mut rng);
        let v = draw_noise(cfg.d, &mut rng);
        let f = example_diagonal(ExampleKind::Example1, cfg.d, cfg.delta, &x);
        responses.push(response(&u, &v, &f)?);
        cov.row_mut(i).copy_from(&x.transpose());
    }
    let truth = TrueMean {
        which: ExampleKind::Example1,
        delta: cfg.delta,
        rotation: u,
    };
    Ok((Dataset::new(cov, responses)?, truth))
}

pub fn generate_example2(cfg: &ExampleConfig) -> Result<(Dataset, TrueMean)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cov = DMatrix::zeros(cfg.n, cfg.p);
    let mut responses = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let x = draw_covariate(cfg.p, &mut rng);
        let v = draw_noise(cfg.d, &mut rng);
        let mut u = DMatrix::zeros(cfg.d, cfg.d);
        for b in 0..cfg.d / 2 {
            let block = haar_orthogonal(2, &mut rng);
            u.view_mut((2 * b, 2 * b), (2, 2)).copy_from(&block);
        }
        let g = example_diagonal(ExampleKind::Example2, cfg.d, cfg.delta, &x);
        responses.push(response(&u, &v, &g)?);
        cov.row_mut(i).copy_from(&x.transpose());
    }
    let truth = TrueMean {
        which: ExampleKind::Example2,
        delta: cfg.delta,
        rotation: DMatrix::identity(cfg.d, cfg.d),
    };
    Ok((Dataset::new(cov, responses)?, truth))
}

pub fn generate(cfg: &ExampleConfig) -> Result<(Dataset, TrueMean)> {
    match cfg.which {
        ExampleKind::Example1 => generate_example1(cfg),
        ExampleKind::Example2 => generate_example2(cfg),
    }
}

/// Replaces every response by the sample covariance of `n_tilde` draws from `N(0, Qᵢ)`.
pub fn surrogate_responses<R: Rng + ?Sized>(data: &Dataset, n_tilde: usize, rng: &mut R) -> Result<Dataset> {
    let d = data.d();
    if n_tilde < d {
        return Err(Error::InvalidArgument(format!("n_tilde must be >= d = {d}, got {n_tilde}")));
    }
    let floor = NumericConfig::default().eig_floor;
    let mut out = Vec::with_capacity(data.n());
    for (i, q) in data.responses().iter().enumerate() {
        let root = sqrtm(q)?;
        let eps = DMatrix::from_fn(d, n_tilde, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = root.as_matrix() * eps;
        let s = symmetrize(&(&z * z.transpose() / n_tilde as f64));
        let (values, _) = sym_eigen(&s);
        let lo = min_value(&values);
        if lo <= floor {
            return Err(Error::RankDeficientSurrogate {
                sample: i,
                min_eigenvalue: lo,
            });
        }
        out.push(SpdMatrix::new(s)?);
    }
    data.with_responses(out)
}

/// SplitMix64 of `master + (index + 1) · γ`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn map_trials<T: Send>(trials: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Vec<Result<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub delta: f64,
    pub kind: String,
    pub message: String,
}

fn split_outcomes<T>(outcomes: Vec<Result<T>>, delta: f64) -> (Vec<(usize, T)>, Vec<TrialFailure>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (t, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push((t, v)),
            Err(e) => failed.push(TrialFailure {
                trial: t,
                delta,
                kind: e.kind().to_string(),
                message: e.to_string(),
            }),
        }
    }
    (ok, failed)
}

fn check_failures(failures: &[TrialFailure], trials: usize) -> Result<()> {
    if !failures.is_empty() && failures.len() * 20 >= trials {
        return Err(Error::ExperimentFailed {
            failed: failures.len(),
            trials,
            first: failures[0].message.clone(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportKind {
    QQ,
    NullQQ,
    Size,
    Power,
    Coverage,
    Trials,
}

/// Plot-ready table plus summary and provenance metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: ReportKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: serde_json::Value,
    pub metadata: serde_json::Value,
    pub failures: Vec<TrialFailure>,
}

impl ExperimentReport {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

fn metadata(kind: &str, cfg: &ExampleConfig, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "experiment": kind,
        "version": env!("CARGO_PKG_VERSION"),
        "example": cfg,
        "master_seed": cfg.seed,
        "seed_scheme": "trial t uses splitmix64(master + (t + 1) * 0x9E3779B97F4A7C15)",
        "settings": extra,
    })
}

/// Normalized errors `√n (Q̂(x₀) − Q*(x₀))ᵢⱼ / √v̂ᵢⱼ` across trials.
///
/// Columns: `trial, row, col, estimate, truth, variance, z`.
pub fn run_qq_experiment(
    cfg: &ExampleConfig,
    trials: usize,
    x0: &DVector<f64>,
    entries: &[(usize, usize)],
    fit_config: &FitConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if x0.len() != cfg.p {
        return Err(Error::DimensionMismatch { expected: cfg.p, found: x0.len() });
    }
    if let Some(&(i, j)) = entries.iter().find(|(i, j)| *i >= cfg.d || *j >= cfg.d) {
        return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside dimension {}", cfg.d)));
    }
    let n = cfg.n as f64;
    let outcomes = map_trials(trials, |t| {
        let (data, truth) = generate(&cfg.with_seed(trial_seed(cfg.seed, t as u64)))?;
        let moments = empirical_moments(&data, Rho::Auto.resolve(data.n()))?;
        let f = fit(x0, &data, &moments, fit_config)?;
        if !f.converged {
            return Err(Error::NonConvergence { indices: vec![], barycenter_converged: false });
        }
        let clt = clt_covariance(x0, &data, &f, &moments)?;
        let q = truth.eval(x0);
        Ok(entries
            .iter()
            .map(|&(i, j)| {
                let est = f.estimate.as_matrix()[(i, j)];
                let tru = q.as_matrix()[(i, j)];
                let v = clt.entry_variances[(i, j)];
                vec![t as f64, i as f64, j as f64, est, tru, v, n.sqrt() * (est - tru) / v.sqrt()]
            })
            .collect::<Vec<_>>())
    });
    let (ok, failures) = split_outcomes(outcomes, cfg.delta);
    check_failures(&failures, trials)?;
    let rows: Vec<Vec<f64>> = ok.into_iter().flat_map(|(_, r)| r).collect();

    let mut per_entry = Vec::new();
    for &(i, j) in entries {
        let mut z: Vec<f64> = rows
            .iter()
            .filter(|r| r[1] == i as f64 && r[2] == j as f64)
            .map(|r| r[6])
            .filter(|v| v.is_finite())
            .collect();
        if z.len() < 2 {
            continue;
        }
        z.sort_by(f64::total_cmp);
        let ks = ks_normal_distance(&z);
        let (slope, intercept) = ols_line(&normal_scores(z.len()), &z);
        per_entry.push(json!({
            "row": i, "col": j, "count": z.len(),
            "ks_distance": ks, "ks_p_value": ks_p_value(ks, z.len()),
            "qq_slope": slope, "qq_intercept": intercept,
        }));
    }
    Ok(ExperimentReport {
        kind: ReportKind::QQ,
        columns: ["trial", "row", "col", "estimate", "truth", "variance", "z"].map(String::from).to_vec(),
        rows,
        summary: json!({ "entries": per_entry }),
        metadata: metadata(
            "qq",
            cfg,
            json!({ "trials": trials, "x0": x0.as_slice(), "entries": entries, "rho": "auto",
                    "eta": fit_config.eta, "max_iters": fit_config.max_iters, "eps": fit_config.eps }),
        ),
        failures,
    })
}

/// Pointwise interval coverage derived from a Q-Q report.
///
/// Columns: `trial, row, col, lower, upper, truth, covered`.
pub fn coverage_report(qq: &ExperimentReport, level: f64) -> Result<ExperimentReport> {
    if qq.kind != ReportKind::QQ {
        return Err(Error::InvalidArgument("coverage needs a QQ report".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let n = qq.metadata["example"]["n"].as_f64().unwrap_or(f64::NAN);
    let z = normal_quantile(0.5 * (1.0 + level));
    let rows: Vec<Vec<f64>> = qq
        .rows
        .iter()
        .map(|r| {
            let half = z * (r[5] / n).sqrt();
            let covered = ((r[3] - r[4]).abs() <= half) as u8 as f64;
            vec![r[0], r[1], r[2], r[3] - half, r[3] + half, r[4], covered]
        })
        .collect();
    let rate = if rows.is_empty() {
        f64::NAN
    } else {
        rows.iter().map(|r| r[6]).sum::<f64>() / rows.len() as f64
    };
    let mut metadata = qq.metadata.clone();
    metadata["settings"]["level"] = json!(level);
    Ok(ExperimentReport {
        kind: ReportKind::Coverage,
        columns: ["trial", "row", "col", "lower", "upper", "truth", "covered"].map(String::from).to_vec(),
        rows,
        summary: json!({ "level": level, "coverage": rate }),
        metadata,
        failures: qq.failures.clone(),
    })
}

/// One replicate of the no-effect test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub delta: f64,
    pub trial: usize,
    pub seed: u64,
    pub statistic: f64,
    pub quantile: f64,
    pub p_value: f64,
    pub reject: bool,
    pub eigenvalues: Vec<f64>,
    pub max_fit_iters: usize,
}

/// Raw output of repeated tests over a grid of effect sizes.
#[derive(Debug, Clone, Serialize)]
pub struct TestRun {
    pub config: ExampleConfig,
    pub deltas: Vec<f64>,
    pub trials: usize,
    pub alpha: f64,
    pub mc: usize,
    pub n_tilde: usize,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

/// Settings shared by [`run_test_trials`] and the size/power driver.
#[derive(Debug, Clone)]
pub struct TestTrialSettings {
    pub trials: usize,
    pub options: TestOptions,
    pub n_tilde: usize,
}

/// Runs `trials` tests for every `δ`. The seed of trial `t` at grid index
/// `k` is `trial_seed(master, k · 2³² + t)`; its Monte-Carlo and surrogate
/// streams use `trial_seed(data_seed, 1)` and `trial_seed(data_seed, 2)`.
pub fn run_test_trials(cfg: &ExampleConfig, deltas: &[f64], settings: &TestTrialSettings) -> Result<TestRun> {
    for &delta in deltas {
        cfg.with_delta(delta).validate()?;
    }
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (k, &delta) in deltas.iter().enumerate() {
        let base = cfg.with_delta(delta);
        let outcomes = map_trials(settings.trials, |t| {
            let seed = trial_seed(cfg.seed, ((k as u64) << 32) + t as u64);
            let (data, _) = generate(&base.with_seed(seed))?;
            let opts = TestOptions { seed: trial_seed(seed, 1), ..settings.options.clone() };
            let r = estimated_covariance_test(&data, settings.n_tilde, trial_seed(seed, 2), &opts)?;
            Ok(TrialRecord {
                delta,
                trial: t,
                seed,
                statistic: r.statistic,
                quantile: r.quantile,
                p_value: r.p_value,
                reject: r.reject,
                eigenvalues: r.eigenvalues,
                max_fit_iters: r.max_fit_iters,
            })
        });
        let (ok, failed) = split_outcomes(outcomes, delta);
        check_failures(&failed, settings.trials)?;
        records.extend(ok.into_iter().map(|(_, r)| r));
        failures.extend(failed);
    }
    Ok(TestRun {
        config: cfg.clone(),
        deltas: deltas.to_vec(),
        trials: settings.trials,
        alpha: settings.options.alpha,
        mc: settings.options.mc,
        n_tilde: settings.n_tilde,
        records,
        failures,
    })
}

fn run_metadata(run: &TestRun, kind: &str) -> serde_json::Value {
    metadata(
        kind,
        &run.config,
        json!({ "deltas": run.deltas, "trials": run.trials, "alpha": run.alpha,
                "mc": run.mc, "n_tilde": run.n_tilde, "rho": "auto" }),
    )
}

/// Rejection rate per `δ`. Columns: `delta, trials, rejections, rate, se`.
pub fn size_power_report(run: &TestRun) -> ExperimentReport {
    let mut rows = Vec::new();
    for &delta in &run.deltas {
        let recs: Vec<&TrialRecord> = run.records.iter().filter(|r| r.delta == delta).collect();
        let m = recs.len() as f64;
        let rej = recs.iter().filter(|r| r.reject).count() as f64;
        let rate = if m > 0.0 { rej / m } else { f64::NAN };
        let se = if m > 0.0 { (rate * (1.0 - rate) / m).sqrt() } else { f64::NAN };
        rows.push(vec![delta, m, rej, rate, se]);
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a][0].abs().total_cmp(&rows[b][0].abs()));
    let mut violations = Vec::new();
    for w in order.windows(2) {
        let (a, b) = (&rows[w[0]], &rows[w[1]]);
        let tol = 2.0 * (a[4] * a[4] + b[4] * b[4]).sqrt();
        if b[3] < a[3] - tol {
            violations.push(json!({ "from_delta": a[0], "to_delta": b[0], "drop": a[3] - b[3], "tolerance": tol }));
        }
    }
    let kind = if run.deltas.iter().all(|&d| d == 0.0) { ReportKind::Size } else { ReportKind::Power };
    ExperimentReport {
        kind,
        columns: ["delta", "trials", "rejections", "rate", "se"].map(String::from).to_vec(),
        rows,
        summary: json!({ "monotone_within_2se": violations.is_empty(), "violations": violations }),
        metadata: run_metadata(run, if kind == ReportKind::Size { "size" } else { "power" }),
        failures: run.failures.clone(),
    }
}

/// Per-replicate records. Columns: `delta, trial, statistic, quantile, p_value, reject, max_fit_iters`.
pub fn trials_report(run: &TestRun) -> ExperimentReport {
    let rows = run
        .records
        .iter()
        .map(|r| {
            vec![
                r.delta,
                r.trial as f64,
                r.statistic,
                r.quantile,
                r.p_value,
                r.reject as u8 as f64,
                r.max_fit_iters as f64,
            ]
        })
        .collect();
    ExperimentReport {
        kind: ReportKind::Trials,
        columns: ["delta", "trial", "statistic", "quantile", "p_value", "reject", "max_fit_iters"]
            .map(String::from)
            .to_vec(),
        rows,
        summary: json!({}),
        metadata: run_metadata(run, "trials"),
        failures: run.failures.clone(),
    }
}

/// Sorted statistics against quantiles of the pooled plug-in null.
///
/// Each replicate contributes `draws_per_trial` draws from its own
/// weighted chi-square law; the pooled sample approximates the mixture the
/// statistics should follow. Columns: `rank, statistic, null_quantile`.
pub fn null_qq_report(run: &TestRun, delta: f64, draws_per_trial: usize) -> Result<ExperimentReport> {
    let recs: Vec<&TrialRecord> = run.records.iter().filter(|r| r.delta == delta).collect();
    if recs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two replicates".into()));
    }
    let p = run.config.p;
    let pooled: Vec<Result<Vec<f64>>> = recs
        .iter()
        .map(|r| weighted_chisq_draws(&r.eigenvalues, p, draws_per_trial, trial_seed(r.seed, 3)))
        .collect();
    let mut pooled: Vec<f64> = pooled.into_iter().collect::<Result<Vec<_>>>()?.concat();
    pooled.sort_by(f64::total_cmp);
    let mut stats: Vec<f64> = recs.iter().map(|r| r.statistic).collect();
    stats.sort_by(f64::total_cmp);
    let m = stats.len();
    let theo: Vec<f64> = (1..=m)
        .map(|k| sorted_quantile(&pooled, (k as f64 - 0.5) / m as f64))
        .collect();
    let (slope, intercept) = ols_line(&theo, &stats);
    let median = sorted_quantile(&pooled, 0.5);
    let rows = (0..m).map(|k| vec![(k + 1) as f64, stats[k], theo[k]]).collect();
    let mut meta = run_metadata(run, "null_qq");
    meta["settings"]["qq_delta"] = json!(delta);
    meta["settings"]["draws_per_trial"] = json!(draws_per_trial);
    Ok(ExperimentReport {
        kind: ReportKind::NullQQ,
        columns: ["rank", "statistic", "null_quantile"].map(String::from).to_vec(),
        rows,
        summary: json!({ "qq_slope": slope, "qq_intercept": intercept, "null_median": median }),
        metadata: meta,
        failures: run.failures.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(which: ExampleKind, d: usize) -> ExampleConfig {
        ExampleConfig { which, n: 20, p: 3, d, delta: 0.1, seed: 11 }
    }

    #[test]
    fn diagonals_follow_formulas() {
        let x0 = DVector::zeros(5);
        assert_eq!(example_diagonal(ExampleKind::Example1, 5, 0.0, &x0), vec![2.0, 2.5, 3.0, 3.5, 4.0]);
        assert_eq!(
            example_diagonal(ExampleKind::Example2, 6, 0.0, &DVector::zeros(2)),
            vec![2.0, 2.0, 2.5, 2.5, 3.0, 3.0]
        );
        let ones = DVector::from_element(5, 1.0);
        let f = example_diagonal(ExampleKind::Example1, 3, 0.2, &ones);
        for (k, v) in f.iter().enumerate() {
            assert!((v - (1.5 + (k + 1) as f64 / 2.0 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        assert!(matches!(cfg(ExampleKind::Example2, 5).validate(), Err(Error::OddDimension(5))));
        let mut c = cfg(ExampleKind::Example1, 4);
        c.delta = 2.0 / 3.0;
        assert!(c.validate().is_err());
        c.delta = -0.6;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn generators_are_deterministic() {
        for which in [ExampleKind::Example1, ExampleKind::Example2] {
            let (a, _) = generate(&cfg(which, 4)).unwrap();
            let (b, _) = generate(&cfg(which, 4)).unwrap();
            assert_eq!(a.covariates(), b.covariates());
            for (qa, qb) in a.responses().iter().zip(b.responses()) {
                assert_eq!(qa.as_matrix(), qb.as_matrix());
            }
        }
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|t| trial_seed(5, t)).collect();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn empty_qq_experiment() {
        let r = run_qq_experiment(&cfg(ExampleKind::Example1, 3), 0, &DVector::zeros(3), &[(0, 0)], &FitConfig::default())
            .unwrap();
        assert!(r.rows.is_empty());
    }
}
