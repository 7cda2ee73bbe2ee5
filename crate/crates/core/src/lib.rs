//! Fréchet regression of symmetric positive-definite matrix responses under
//! the Bures-Wasserstein metric, with pointwise confidence intervals and a
//! global test of no covariate effect.
//!
//! ```
//! use bw_frechet::{bw_distance, SpdMatrix};
//!
//! let a = SpdMatrix::identity(2);
//! let b = SpdMatrix::from_diagonal(&[4.0, 4.0]).unwrap();
//! assert!((bw_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-12);
//! ```

pub mod chisq;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod io;
pub mod numeric;
pub mod regression;
pub mod simulation;
pub mod stats;

pub use chisq::{weighted_chisq_quantile, NullSample};
pub use error::{Error, Result};
pub use geometry::{
    bw_distance, bw_distance_squared, dt_map, dt_operator, geodesic, ot_map, sqrtm, w2_gradient, SpdMatrix,
    SymMatrix, SymOperator,
};
pub use inference::{
    clt_covariance, confidence_interval, null_eigenvalues, run_test, test_statistic, CltEstimate, TestOptions,
    TestResult,
};
pub use numeric::NumericConfig;
pub use regression::{
    barycenter, empirical_moments, fit, Dataset, FitConfig, Init, MomentEstimates, RegressionFit, Rho,
};
