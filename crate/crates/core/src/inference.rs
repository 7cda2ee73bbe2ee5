//! Pointwise confidence intervals and the Wasserstein F-test of no effect.
//!
//! Confidence intervals come from the plug-in sandwich covariance
//! `Ω̂ₓ = Ĥₓ⁻¹ Ξ̂ₓ Ĥₓ⁻¹`, where `Ĥₓ = n⁻¹ Σ −wᵢ dT_{Q̂(x)}^{Qᵢ}` and
//! `Ξ̂ₓ = n⁻¹ Σ vec(Vᵢ) vec(Vᵢ)ᵀ` with `Vᵢ = V₁ᵢ + V₂ᵢ`:
//!
//! ```text
//! V₁ᵢ = wᵢ (T_{Q̂}^{Qᵢ} − I)
//! V₂ᵢ = −Σₖ aᵢₖ Bₖ,   aᵢ = Σ⃗_ρ⁻¹ (X⃗ᵢX⃗ᵢᵀ − Σ⃗) Σ⃗_ρ⁻¹ x⃗,   Bₖ = n⁻¹ Σⱼ X⃗ⱼₖ (T_{Q̂}^{Qⱼ} − I)
//! ```
//!
//! with augmented covariates `X⃗ = (1, Xᵀ)ᵀ`.
//!
//! The test statistic is `T̂ = Σᵢ ‖Ĥ (Q̂(Xᵢ) − Q̂(X̄))‖²_F` with
//! `Ĥ = −n⁻¹ Σ dT_{Q̂(X̄)}^{Qᵢ}`; its null law is approximated by
//! `Σ λ̂ₖ χ²_p`, the `λ̂ₖ` being eigenvalues of
//! `n⁻¹ Σ vec(Tᵢ − I) vec(Tᵢ − I)ᵀ` at the barycenter.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chisq::{NullSample, DEFAULT_MC};
use crate::error::{Error, Result};
use crate::geometry::{sqrtm_with, vec_index, SpdMatrix, SymMatrix, SymOperator, TransportEigen};
use crate::numeric::{spectral_apply, sym_eigen, symmetrize, MatrixAccumulator, NumericConfig};
use crate::regression::{
    barycenter, empirical_moments_with, fit_with_weights, weights, Dataset, FitConfig,
    MomentEstimates, RegressionFit, Rho,
};

/// Second moments of the augmented covariates `X⃗ = (1, Xᵀ)ᵀ`.
#[derive(Debug, Clone)]
pub struct AugmentedMoments {
    /// `n⁻¹ Σ X⃗ᵢ X⃗ᵢᵀ`.
    pub vec_sigma_hat: DMatrix<f64>,
    /// The same with `ρ` added to the covariate block, so that
    /// `x⃗ᵀ Σ⃗_ρ⁻¹ X⃗ᵢ = w_{n,ρ}(x, Xᵢ)`.
    pub vec_sigma_hat_reg: DMatrix<f64>,
    reg_inv: DMatrix<f64>,
}

impl AugmentedMoments {
    pub fn new(data: &Dataset, moments: &MomentEstimates) -> Result<Self> {
        let n = data.n();
        let p = data.p();
        let mut acc = MatrixAccumulator::zeros(p + 1, p + 1);
        for i in 0..n {
            let v = augment(&data.covariate(i));
            acc.add_scaled(&(&v * v.transpose()), 1.0);
        }
        let vec_sigma_hat = symmetrize(&(acc.value() / n as f64));
        let mut reg = vec_sigma_hat.clone();
        for k in 1..=p {
            reg[(k, k)] += moments.rho;
        }
        let (values, vectors) = sym_eigen(&reg);
        if values.iter().any(|&l| l <= 0.0) {
            return Err(Error::SingularCovariance {
                condition: f64::INFINITY,
            });
        }
        let reg_inv = spectral_apply(&values, &vectors, |l| 1.0 / l);
        Ok(Self {
            vec_sigma_hat,
            vec_sigma_hat_reg: reg,
            reg_inv,
        })
    }

    pub fn reg_inv(&self) -> &DMatrix<f64> {
        &self.reg_inv
    }
}

fn augment(x: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(x.len() + 1);
    v[0] = 1.0;
    v.rows_mut(1, x.len()).copy_from(x);
    v
}

/// Plug-in pieces of the pointwise central limit theorem at one `x`.
#[derive(Debug, Clone)]
pub struct CltEstimate {
    /// `Ξ̂ₓ`.
    pub xi_hat: SymOperator,
    /// `Ĥₓ = n⁻¹ Σ −wᵢ dT_{Q̂(x)}^{Qᵢ}`.
    pub h_hat: SymOperator,
    /// Inverse of `Ĥₓ` on symmetric matrices.
    pub h_hat_inv: SymOperator,
    /// `Ω̂ₓ = Ĥₓ⁻¹ Ξ̂ₓ Ĥₓ⁻¹`, covariance of `√n vec(Q̂(x) − Q*(x))`.
    pub omega_hat: DMatrix<f64>,
    /// `v̂_{x,ij}`, the diagonal of `Ω̂ₓ` arranged as a `d × d` array.
    pub entry_variances: DMatrix<f64>,
    /// `(n⁻¹ Σ ‖V₂ᵢ‖²_F)^{1/2}`, size of the covariate-estimation term.
    pub v2_rms: f64,
}

/// Plug-in covariance of the estimator at `x`.
pub fn clt_covariance(
    x: &DVector<f64>,
    data: &Dataset,
    fit: &RegressionFit,
    moments: &MomentEstimates,
) -> Result<CltEstimate> {
    clt_covariance_with(x, data, fit, moments, &NumericConfig::default())
}

pub fn clt_covariance_with(
    x: &DVector<f64>,
    data: &Dataset,
    fit: &RegressionFit,
    moments: &MomentEstimates,
    cfg: &NumericConfig,
) -> Result<CltEstimate> {
    if !fit.converged {
        return Err(Error::InvalidArgument(
            "plug-in covariance requires a converged fit".into(),
        ));
    }
    let n = data.n();
    let p = data.p();
    let d = data.d();
    let nf = n as f64;
    let w = weights(x, moments, data)?;
    let aug = AugmentedMoments::new(data, moments)?;
    let id = DMatrix::<f64>::identity(d, d);
    let qhat = fit.estimate.as_matrix();

    let mut tangents = Vec::with_capacity(n);
    let mut h_acc = MatrixAccumulator::zeros(d * d, d * d);
    for i in 0..n {
        let te = TransportEigen::new(qhat, data.response_sqrt(i), cfg)?;
        tangents.push(te.map() - &id);
        h_acc.add_scaled(&te.operator(), -w[i]);
    }
    let h_hat = SymOperator::from_trusted(d, h_acc.value() / nf);
    let h_hat_inv = h_hat.inverse_on_symmetric(cfg.singular_operator_tol)?;

    // Bₖ = n⁻¹ Σⱼ X⃗ⱼₖ (Tⱼ − I)
    let mut b: Vec<MatrixAccumulator> = (0..=p).map(|_| MatrixAccumulator::zeros(d, d)).collect();
    for (j, t) in tangents.iter().enumerate() {
        let xv = augment(&data.covariate(j));
        for (k, acc) in b.iter_mut().enumerate() {
            acc.add_scaled(t, xv[k]);
        }
    }
    let b: Vec<DMatrix<f64>> = b.iter().map(|acc| acc.value() / nf).collect();

    let c = aug.reg_inv() * augment(x);
    let sc = &aug.vec_sigma_hat * &c;
    let mut xi_acc = MatrixAccumulator::zeros(d * d, d * d);
    let mut v2_sq = 0.0;
    for (i, t) in tangents.iter().enumerate() {
        let xv = augment(&data.covariate(i));
        let a = aug.reg_inv() * (&xv * xv.dot(&c) - &sc);
        let mut v2 = DMatrix::zeros(d, d);
        for (k, bk) in b.iter().enumerate() {
            v2 -= bk * a[k];
        }
        v2_sq += v2.norm_squared();
        let v = t * w[i] + v2;
        let vv = DVector::from_column_slice(symmetrize(&v).as_slice());
        xi_acc.add_scaled(&(&vv * vv.transpose()), 1.0);
    }
    let xi_hat = SymOperator::from_trusted(d, xi_acc.value() / nf);
    let omega_hat = symmetrize(&(h_hat_inv.matrix() * xi_hat.matrix() * h_hat_inv.matrix()));
    let entry_variances = DMatrix::from_fn(d, d, |i, j| {
        let k = vec_index(i, j, d);
        omega_hat[(k, k)].max(0.0)
    });
    Ok(CltEstimate {
        xi_hat,
        h_hat,
        h_hat_inv,
        omega_hat,
        entry_variances,
        v2_rms: (v2_sq / nf).sqrt(),
    })
}

/// Standard normal quantile.
pub fn normal_quantile(prob: f64) -> f64 {
    Normal::standard().inverse_cdf(prob)
}

/// Two-sided interval `Q̂ᵢⱼ ± z · √(v̂ᵢⱼ / n)` at confidence `level`.
pub fn confidence_interval(
    entry: (usize, usize),
    level: f64,
    clt: &CltEstimate,
    fit: &RegressionFit,
    n: usize,
) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let d = fit.estimate.dim();
    let (i, j) = entry;
    if i >= d || j >= d {
        return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside a {d}x{d} matrix")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let center = fit.estimate.as_matrix()[(i, j)];
    let var = clt.entry_variances[(i, j)];
    if var == 0.0 {
        return Ok((center, center));
    }
    let half = normal_quantile(0.5 * (1.0 + level)) * (var / n as f64).sqrt();
    Ok((center - half, center + half))
}

/// The statistic together with the fits it was built from.
#[derive(Debug, Clone)]
pub struct TestStatistic {
    pub statistic: f64,
    /// `Q̂(Xᵢ)` for every sample.
    pub fits: Vec<RegressionFit>,
    /// `Q̂(X̄)`.
    pub bary: RegressionFit,
    /// `Ĥ = −n⁻¹ Σ dT_{Q̂(X̄)}^{Qᵢ}`.
    pub h_hat: SymOperator,
}

fn fits_at_samples(data: &Dataset, moments: &MomentEstimates, config: &FitConfig) -> Result<Vec<RegressionFit>> {
    let one = |i: usize| -> Result<RegressionFit> {
        let w = weights(&data.covariate(i), moments, data)?;
        fit_with_weights(&w, data, config)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..data.n()).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..data.n()).map(one).collect()
    }
}

/// `−n⁻¹ Σ dT_{center}^{Qᵢ}` as an operator.
pub fn mean_negative_dt(center: &SpdMatrix, data: &Dataset, cfg: &NumericConfig) -> Result<SymOperator> {
    let d = data.d();
    let mut acc = MatrixAccumulator::zeros(d * d, d * d);
    for i in 0..data.n() {
        let te = TransportEigen::new(center.as_matrix(), data.response_sqrt(i), cfg)?;
        acc.add_scaled(&te.operator(), -1.0);
    }
    Ok(SymOperator::from_trusted(d, acc.value() / data.n() as f64))
}

/// Wasserstein F-statistic `T̂_ρ`.
pub fn test_statistic(data: &Dataset, moments: &MomentEstimates, config: &FitConfig) -> Result<TestStatistic> {
    let bary = barycenter(data, moments, config)?;
    let fits = fits_at_samples(data, moments, config)?;
    let failed: Vec<usize> = fits
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.converged)
        .map(|(i, _)| i)
        .collect();
    if !failed.is_empty() || !bary.converged {
        return Err(Error::NonConvergence {
            indices: failed,
            barycenter_converged: bary.converged,
        });
    }
    let h_hat = mean_negative_dt(&bary.estimate, data, &config.numeric)?;
    let center = bary.estimate.as_matrix();
    let mut acc = crate::numeric::CompensatedSum::default();
    for f in &fits {
        let diff = SymMatrix::symmetrized(&(f.estimate.as_matrix() - center));
        acc.add(h_hat.apply(&diff).norm().powi(2));
    }
    Ok(TestStatistic {
        statistic: acc.value(),
        fits,
        bary,
        h_hat,
    })
}

/// Eigenvalues (descending) of `m⁻¹ Σ vec(Tᵢ − I) vec(Tᵢ − I)ᵀ` with `Tᵢ = T_{center}^{Qᵢ}`.
pub fn tangent_covariance_eigenvalues(center: &SpdMatrix, responses: &[SpdMatrix]) -> Result<Vec<f64>> {
    let cfg = NumericConfig::default();
    let sqrts = responses
        .iter()
        .map(|q| sqrtm_with(q, &cfg).map(SpdMatrix::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    tangent_eigs(center, &sqrts, &cfg)
}

fn tangent_eigs(center: &SpdMatrix, sqrts: &[DMatrix<f64>], cfg: &NumericConfig) -> Result<Vec<f64>> {
    if sqrts.is_empty() {
        return Err(Error::InvalidArgument("need at least one response".into()));
    }
    let d = center.dim();
    let m = sqrts.len();
    let id = DMatrix::<f64>::identity(d, d);
    let mut y = DMatrix::zeros(d * d, m);
    for (i, r) in sqrts.iter().enumerate() {
        let t = TransportEigen::new(center.as_matrix(), r, cfg)?.map() - &id;
        y.column_mut(i).copy_from_slice(t.as_slice());
    }
    let gram = symmetrize(&(&y * y.transpose() / m as f64));
    let (values, _) = sym_eigen(&gram);
    let mut v: Vec<f64> = values.iter().copied().collect();
    if let Some(&bad) = v.iter().find(|&&l| l < -cfg.null_eig_neg_tol) {
        return Err(Error::NumericalBreakdown(format!("negative null eigenvalue {bad:e}")));
    }
    for l in v.iter_mut() {
        *l = l.max(0.0);
    }
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Plug-in null eigenvalues `λ̂` at the barycenter fit.
pub fn null_eigenvalues(data: &Dataset, bary: &RegressionFit) -> Result<Vec<f64>> {
    if !bary.converged {
        return Err(Error::InvalidArgument("barycenter fit did not converge".into()));
    }
    let sqrts: Vec<DMatrix<f64>> = (0..data.n()).map(|i| data.response_sqrt(i).clone()).collect();
    tangent_eigs(&bary.estimate, &sqrts, &NumericConfig::default())
}

/// Drops eigenvalues below `cutoff · λ₁`.
pub fn truncate_eigenvalues(sorted_desc: &[f64], cutoff: f64) -> Vec<f64> {
    let top = sorted_desc.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Vec::new();
    }
    sorted_desc.iter().copied().filter(|&l| l >= cutoff * top).collect()
}

/// Top null eigenvalue per response dimension below which the spectrum is roundoff.
const DEGENERATE_SPECTRUM: f64 = 1e-20;

/// Options of the no-effect test.
#[derive(Debug, Clone)]
pub struct TestOptions {
    pub alpha: f64,
    pub rho: Rho,
    pub fit: FitConfig,
    pub mc: usize,
    pub seed: u64,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            rho: Rho::Auto,
            fit: FitConfig::default(),
            mc: DEFAULT_MC,
            seed: 0,
        }
    }
}

/// Outcome of the level-α test.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Null eigenvalues retained in the weighted sum, descending.
    pub eigenvalues: Vec<f64>,
    pub p_dof: usize,
    pub alpha: f64,
    pub quantile: f64,
    pub p_value: f64,
    pub reject: bool,
    pub mc_samples: usize,
    pub seed: u64,
    pub rho: f64,
    /// Largest iteration count among the `n + 1` fits.
    pub max_fit_iters: usize,
}

/// Wasserstein F-test of `Q*(x) ≡ const`.
pub fn run_test(data: &Dataset, opts: &TestOptions) -> Result<TestResult> {
    if !(opts.alpha > 0.0 && opts.alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {}", opts.alpha)));
    }
    let rho = opts.rho.resolve(data.n());
    let moments = empirical_moments_with(data, rho, &opts.fit.numeric)?;
    let ts = test_statistic(data, &moments, &opts.fit)?;
    let all = null_eigenvalues(data, &ts.bary)?;
    let mut kept = truncate_eigenvalues(&all, opts.fit.numeric.null_eig_cutoff);
    let mut statistic = ts.statistic;
    // Responses with no spread around the barycenter leave only roundoff in both
    // the spectrum and the statistic; treat that as the exact zero it represents.
    if all.first().map_or(true, |&top| top <= DEGENERATE_SPECTRUM * data.d() as f64) {
        kept.clear();
        statistic = 0.0;
    }
    let null = NullSample::new(&kept, data.p(), opts.mc, opts.seed)?;
    let quantile = null.upper_quantile(opts.alpha)?;
    let p_value = null.exceedance(statistic);
    let max_fit_iters = ts
        .fits
        .iter()
        .map(|f| f.iters)
        .chain(std::iter::once(ts.bary.iters))
        .max()
        .unwrap_or(0);
    Ok(TestResult {
        statistic,
        eigenvalues: kept,
        p_dof: data.p(),
        alpha: opts.alpha,
        quantile,
        p_value,
        reject: statistic > quantile,
        mc_samples: opts.mc,
        seed: opts.seed,
        rho,
        max_fit_iters,
    })
}

/// The same test with each response replaced by the sample covariance of
/// `n_tilde` Gaussian draws; `n_tilde = 0` uses the exact responses.
pub fn estimated_covariance_test(
    data: &Dataset,
    n_tilde: usize,
    surrogate_seed: u64,
    opts: &TestOptions,
) -> Result<TestResult> {
    if n_tilde == 0 {
        return run_test(data, opts);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(surrogate_seed);
    let surrogate = crate::simulation::surrogate_responses(data, n_tilde, &mut rng)?;
    run_test(&surrogate, opts)
}
