//! Global Fréchet regression of SPD responses on Euclidean covariates.
//!
//! The estimate at a covariate value `x` minimizes the weighted objective
//!
//! ```text
//! F(x, S) = n⁻¹ Σᵢ wᵢ(x) W²(S, Qᵢ),   wᵢ(x) = 1 + (x − X̄)ᵀ Σ̂_ρ⁻¹ (Xᵢ − X̄)
//! ```
//!
//! with `Σ̂_ρ = n⁻¹ Σ (Xᵢ − X̄)(Xᵢ − X̄)ᵀ + ρ I`. Weights can be negative and
//! are used exactly as given. The minimizer is found by Riemannian gradient
//! descent: `G = I + η n⁻¹ Σ wᵢ (T_S^{Qᵢ} − I)`, then `S ← G S G`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sqrtm_with, w2_from_sqrt, SpdMatrix, TransportEigen};
use crate::numeric::{
    max_value, min_value, spectral_apply, sym_eigen, symmetrize, CompensatedSum,
    MatrixAccumulator, NumericConfig,
};

/// Paired covariates `Xᵢ ∈ ℝᵖ` and SPD responses `Qᵢ`.
#[derive(Debug, Clone)]
pub struct Dataset {
    covariates: DMatrix<f64>,
    responses: Vec<SpdMatrix>,
    response_sqrts: Vec<DMatrix<f64>>,
}

impl Dataset {
    /// `covariates` is `n × p`, one row per sample.
    pub fn new(covariates: DMatrix<f64>, responses: Vec<SpdMatrix>) -> Result<Self> {
        Self::with_config(covariates, responses, &NumericConfig::default())
    }

    pub fn with_config(
        covariates: DMatrix<f64>,
        responses: Vec<SpdMatrix>,
        cfg: &NumericConfig,
    ) -> Result<Self> {
        let n = covariates.nrows();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 samples, got {n}")));
        }
        if covariates.ncols() == 0 {
            return Err(Error::InvalidDataset("covariate dimension is zero".into()));
        }
        if responses.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{n} covariate rows but {} responses",
                responses.len()
            )));
        }
        if let Some(pos) = covariates.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite covariate in row {}",
                pos % n
            )));
        }
        let d = responses[0].dim();
        let mut response_sqrts = Vec::with_capacity(n);
        for (i, q) in responses.iter().enumerate() {
            if q.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: q.dim(),
                });
            }
            let r = sqrtm_with(q, cfg).map_err(|e| match e {
                Error::NotPositiveDefinite { min_eigenvalue } => {
                    Error::ResponseNotPositiveDefinite {
                        sample: i,
                        min_eigenvalue,
                    }
                }
                other => other,
            })?;
            response_sqrts.push(r.into_matrix());
        }
        Ok(Self {
            covariates,
            responses,
            response_sqrts,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn d(&self) -> usize {
        self.responses[0].dim()
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn covariate(&self, i: usize) -> DVector<f64> {
        self.covariates.row(i).transpose()
    }

    pub fn responses(&self) -> &[SpdMatrix] {
        &self.responses
    }

    pub(crate) fn response_sqrt(&self, i: usize) -> &DMatrix<f64> {
        &self.response_sqrts[i]
    }

    /// Same covariates with new responses.
    pub fn with_responses(&self, responses: Vec<SpdMatrix>) -> Result<Dataset> {
        Dataset::new(self.covariates.clone(), responses)
    }

    /// Reorders samples; `order[k]` is the source index of the k-th sample.
    pub fn permuted(&self, order: &[usize]) -> Result<Dataset> {
        let cov = DMatrix::from_fn(self.n(), self.p(), |r, c| self.covariates[(order[r], c)]);
        let resp = order.iter().map(|&i| self.responses[i].clone()).collect();
        Dataset::new(cov, resp)
    }
}

/// Empirical covariate moments `X̄` and `Σ̂_ρ`.
#[derive(Debug, Clone)]
pub struct MomentEstimates {
    pub mean: DVector<f64>,
    pub cov_reg: DMatrix<f64>,
    pub rho: f64,
    cov_reg_inv: DMatrix<f64>,
}

impl MomentEstimates {
    pub fn cov_reg_inv(&self) -> &DMatrix<f64> {
        &self.cov_reg_inv
    }
}

/// Ridge policy for the covariate covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Rho {
    /// `ρ = 1/n`.
    #[default]
    Auto,
    Zero,
    Value(f64),
}

impl Rho {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            Rho::Auto => 1.0 / n as f64,
            Rho::Zero => 0.0,
            Rho::Value(v) => v,
        }
    }
}

/// Computes `X̄` and `Σ̂_ρ = n⁻¹ Σ (Xᵢ − X̄)(Xᵢ − X̄)ᵀ + ρ I`.
pub fn empirical_moments(data: &Dataset, rho: f64) -> Result<MomentEstimates> {
    empirical_moments_with(data, rho, &NumericConfig::default())
}

pub fn empirical_moments_with(
    data: &Dataset,
    rho: f64,
    cfg: &NumericConfig,
) -> Result<MomentEstimates> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be >= 0, got {rho}")));
    }
    let n = data.n();
    let p = data.p();
    let nf = n as f64;
    if rho != 0.0 && (rho - 1.0 / nf).abs() > 1e-15 {
        log::warn!("rho = {rho} is neither 0 nor 1/n");
    }
    let x = data.covariates();
    let mean = DVector::from_fn(p, |c, _| {
        let mut s = CompensatedSum::default();
        for r in 0..n {
            s.add(x[(r, c)]);
        }
        s.value() / nf
    });
    let mut cov = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let mut s = CompensatedSum::default();
            for r in 0..n {
                s.add((x[(r, a)] - mean[a]) * (x[(r, b)] - mean[b]));
            }
            cov[(a, b)] = s.value() / nf;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    for k in 0..p {
        cov[(k, k)] += rho;
    }
    let (values, vectors) = sym_eigen(&cov);
    let (lo, hi) = (min_value(&values), max_value(&values));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= cfg.condition_limit) {
        return Err(Error::SingularCovariance { condition });
    }
    let cov_reg_inv = spectral_apply(&values, &vectors, |l| 1.0 / l);
    Ok(MomentEstimates {
        mean,
        cov_reg: cov,
        rho,
        cov_reg_inv,
    })
}

/// Regression weights `w_{n,ρ}(x, Xᵢ)` for every sample.
pub fn weights(x: &DVector<f64>, moments: &MomentEstimates, data: &Dataset) -> Result<DVector<f64>> {
    if x.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: x.len(),
        });
    }
    let u = moments.cov_reg_inv() * (x - &moments.mean);
    Ok(DVector::from_fn(data.n(), |i, _| {
        let mut acc = 1.0;
        for k in 0..data.p() {
            acc += u[k] * (data.covariates()[(i, k)] - moments.mean[k]);
        }
        acc
    }))
}

/// The weighted Fréchet objective `F_{n,ρ}(x, S)`.
pub fn objective(
    x: &DVector<f64>,
    s: &SpdMatrix,
    data: &Dataset,
    moments: &MomentEstimates,
) -> Result<f64> {
    let w = weights(x, moments, data)?;
    objective_with_weights(&w, s, data, &NumericConfig::default())
}

fn objective_with_weights(
    w: &DVector<f64>,
    s: &SpdMatrix,
    data: &Dataset,
    cfg: &NumericConfig,
) -> Result<f64> {
    if s.dim() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            found: s.dim(),
        });
    }
    let mut acc = CompensatedSum::default();
    for (i, q) in data.responses().iter().enumerate() {
        let w2 = w2_from_sqrt(s.as_matrix(), q.as_matrix(), data.response_sqrt(i), cfg)?;
        acc.add(w[i] * w2);
    }
    Ok(acc.value() / data.n() as f64)
}

/// Starting point of the gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Identity,
    /// Arithmetic mean of the responses.
    Mean,
    Custom(SpdMatrix),
}

/// Parameters of the gradient-descent fit.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub eta: f64,
    pub max_iters: usize,
    pub eps: f64,
    pub init: Init,
    /// Record the objective after every iterate.
    pub track_objective: bool,
    pub numeric: NumericConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            max_iters: 30,
            eps: 1e-6,
            init: Init::Identity,
            track_objective: false,
            numeric: NumericConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a gradient-descent fit.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub estimate: SpdMatrix,
    /// `‖n⁻¹ Σ wᵢ (T_S^{Qᵢ} − I)‖_F` at the returned estimate.
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
    /// Objective at the initial point and after each update, when tracked.
    pub objective_trace: Vec<f64>,
}

impl RegressionFit {
    /// Number of consecutive objective increases larger than `slack`.
    pub fn descent_violations(&self, slack: f64) -> usize {
        self.objective_trace
            .windows(2)
            .filter(|w| w[1] > w[0] + slack)
            .count()
    }
}

/// `n⁻¹ Σ wᵢ (T_S^{Qᵢ} − I)`, the negative Riemannian gradient of the objective.
pub(crate) fn weighted_residual(
    s: &DMatrix<f64>,
    w: &DVector<f64>,
    data: &Dataset,
    cfg: &NumericConfig,
) -> Result<DMatrix<f64>> {
    let d = data.d();
    let mut acc = MatrixAccumulator::zeros(d, d);
    let id = DMatrix::<f64>::identity(d, d);
    for i in 0..data.n() {
        let te = TransportEigen::new(s, data.response_sqrt(i), cfg)?;
        acc.add_scaled(&(te.map() - &id), w[i]);
    }
    Ok(symmetrize(&acc.value()) / data.n() as f64)
}

fn initial_point(init: &Init, data: &Dataset) -> Result<SpdMatrix> {
    Ok(match init {
        Init::Identity => SpdMatrix::identity(data.d()),
        Init::Mean => {
            let d = data.d();
            let mut acc = MatrixAccumulator::zeros(d, d);
            for q in data.responses() {
                acc.add_scaled(q.as_matrix(), 1.0);
            }
            SpdMatrix::from_trusted(acc.value() / data.n() as f64)
        }
        Init::Custom(s) => {
            if s.dim() != data.d() {
                return Err(Error::DimensionMismatch {
                    expected: data.d(),
                    found: s.dim(),
                });
            }
            s.clone()
        }
    })
}

/// Runs the gradient descent with precomputed weights.
pub fn fit_with_weights(w: &DVector<f64>, data: &Dataset, config: &FitConfig) -> Result<RegressionFit> {
    config.validate()?;
    if w.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: w.len(),
        });
    }
    let cfg = &config.numeric;
    let d = data.d();
    let id = DMatrix::<f64>::identity(d, d);
    let mut s = initial_point(&config.init, data)?.into_matrix();
    let mut trace = Vec::new();
    if config.track_objective {
        trace.push(objective_with_weights(w, &SpdMatrix::from_trusted(s.clone()), data, cfg)?);
    }

    let mut grad_norm = f64::INFINITY;
    for t in 1..=config.max_iters {
        let residual = weighted_residual(&s, w, data, cfg)?;
        grad_norm = residual.norm();
        if !grad_norm.is_finite() {
            return Err(Error::NumericalBreakdown(format!(
                "non-finite gradient at iteration {t}"
            )));
        }
        if config.eta * grad_norm < config.eps {
            return Ok(RegressionFit {
                estimate: SpdMatrix::from_trusted(s),
                grad_norm,
                iters: t,
                converged: true,
                objective_trace: trace,
            });
        }
        let g = &id + residual * config.eta;
        s = symmetrize(&(&g * &s * &g));
        s = enforce_positive(s, t, cfg)?;
        if config.track_objective {
            trace.push(objective_with_weights(w, &SpdMatrix::from_trusted(s.clone()), data, cfg)?);
        }
    }
    let residual = weighted_residual(&s, w, data, cfg)?;
    let final_norm = residual.norm();
    if final_norm.is_finite() {
        grad_norm = final_norm;
    }
    let converged = config.eta * grad_norm < config.eps;
    if !converged {
        log::debug!("fit stopped after {} iterations, residual {grad_norm:e}", config.max_iters);
    }
    Ok(RegressionFit {
        estimate: SpdMatrix::from_trusted(s),
        grad_norm,
        iters: config.max_iters,
        converged,
        objective_trace: trace,
    })
}

fn enforce_positive(s: DMatrix<f64>, iteration: usize, cfg: &NumericConfig) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen(&s);
    let min = min_value(&values);
    if min > cfg.eig_floor {
        return Ok(s);
    }
    if min < -cfg.eig_floor || !min.is_finite() {
        return Err(Error::IterateNotPositiveDefinite {
            iteration,
            min_eigenvalue: min,
        });
    }
    log::warn!("iterate {iteration} has eigenvalue {min:e}; clamping to {:e}", cfg.eig_floor);
    let floor = cfg.eig_floor;
    Ok(spectral_apply(&values, &vectors, |l| l.max(floor)))
}

/// Fréchet regression estimate `Q̂_ρ(x)`.
pub fn fit(
    x: &DVector<f64>,
    data: &Dataset,
    moments: &MomentEstimates,
    config: &FitConfig,
) -> Result<RegressionFit> {
    let w = weights(x, moments, data)?;
    fit_with_weights(&w, data, config)
}

/// Fréchet mean of the responses, i.e. the fit at `x = X̄`.
pub fn barycenter(data: &Dataset, moments: &MomentEstimates, config: &FitConfig) -> Result<RegressionFit> {
    fit(&moments.mean, data, moments, config)
}
