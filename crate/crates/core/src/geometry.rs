//! Bures-Wasserstein geometry on symmetric positive-definite matrices.
//!
//! The squared distance between covariances `A` and `B` is
//!
//! ```text
//! W²(A, B) = tr A + tr B − 2 tr (A^{1/2} B A^{1/2})^{1/2}
//! ```
//!
//! and the optimal transport map pushing `N(0, Q)` onto `N(0, S)` is the
//! symmetric matrix `T_Q^S = S^{1/2} (S^{1/2} Q S^{1/2})^{-1/2} S^{1/2}`.
//!
//! Conventions
//! -----------
//! - Matrices are vectorized by column-major stacking of all `d²` entries,
//!   so entry `(i, j)` lives at position `j·d + i` (see [`vec_index`]). The
//!   Frobenius inner product is then the plain dot product.
//! - Linear operators on symmetric matrices ([`SymOperator`]) are `d² × d²`
//!   matrices that annihilate antisymmetric inputs.
//! - Derivatives of `T_Q^S` are always taken in the source argument `Q`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{
    max_abs, max_asymmetry, min_value, spectral_apply, sym_eigen, symmetrize, NumericConfig,
};

/// Position of entry `(i, j)` of a `d × d` matrix in its column-major vectorization.
#[inline]
pub fn vec_index(i: usize, j: usize, d: usize) -> usize {
    j * d + i
}

fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite matrix entry".into()));
    }
    let asym = max_asymmetry(m);
    if asym > tol * (1.0 + max_abs(m)) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// A symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness with the default tolerances.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_config(m, &NumericConfig::default())
    }

    pub fn with_config(m: DMatrix<f64>, cfg: &NumericConfig) -> Result<Self> {
        check_symmetric(&m, cfg.symmetry_tol)?;
        let m = symmetrize(&m);
        let (values, _) = sym_eigen(&m);
        let min = min_value(&values);
        if min <= cfg.eig_floor {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
            });
        }
        Ok(Self { m })
    }

    /// Wraps a matrix already known to be SPD; only symmetrizes it.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        Self { m: symmetrize(&m) }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let (values, _) = sym_eigen(&self.m);
        let mut v: Vec<f64> = values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_value(&sym_eigen(&self.m).0)
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// `O A Oᵀ` for a square `o` of matching size.
    pub fn conjugate(&self, o: &DMatrix<f64>) -> SpdMatrix {
        Self::from_trusted(o * &self.m * o.transpose())
    }

    /// `c·A` for `c > 0`.
    pub fn scaled(&self, c: f64) -> SpdMatrix {
        assert!(c > 0.0, "scale must be positive");
        Self {
            m: &self.m * c,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.m)
    }
}

/// A symmetric matrix, typically a tangent direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m, NumericConfig::default().symmetry_tol)?;
        Ok(Self { m: symmetrize(&m) })
    }

    /// Symmetric part `(M + Mᵀ)/2` of an arbitrary square matrix.
    pub fn symmetrized(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "matrix must be square");
        Self { m: symmetrize(m) }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            m: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    /// Column-major vectorization.
    pub fn to_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(self.m.as_slice())
    }

    /// Inverse of [`SymMatrix::to_vec`]; the result is symmetrized.
    pub fn from_vec(d: usize, v: &DVector<f64>) -> Self {
        assert_eq!(v.len(), d * d, "vector length must be d²");
        Self::symmetrized(&DMatrix::from_column_slice(d, d, v.as_slice()))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.m)
    }
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Self-adjoint linear operator on `d × d` symmetric matrices, stored as a
/// `d² × d²` matrix acting on column-major vectorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct SymOperator {
    dim: usize,
    matrix: DMatrix<f64>,
}

impl SymOperator {
    /// Checks shape and self-adjointness, then stores the symmetrized matrix.
    pub fn new(dim: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        let tol = NumericConfig::default().operator_symmetry_tol;
        let asym = max_asymmetry(&matrix);
        if asym > tol * (1.0 + max_abs(&matrix)) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self {
            dim,
            matrix: symmetrize(&matrix),
        })
    }

    pub(crate) fn from_trusted(dim: usize, matrix: DMatrix<f64>) -> Self {
        Self {
            dim,
            matrix: symmetrize(&matrix),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            matrix: DMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, h: &SymMatrix) -> SymMatrix {
        assert_eq!(h.dim(), self.dim, "operator and matrix dimensions differ");
        SymMatrix::from_vec(self.dim, &(&self.matrix * h.to_vec()))
    }

    pub fn scaled(&self, c: f64) -> SymOperator {
        Self {
            dim: self.dim,
            matrix: &self.matrix * c,
        }
    }

    /// Eigenvalues of the operator restricted to symmetric matrices, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let basis = sym_basis(self.dim);
        let reduced = basis.transpose() * &self.matrix * &basis;
        let (values, _) = sym_eigen(&reduced);
        let mut v: Vec<f64> = values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Inverse on the symmetric subspace, extended by zero on antisymmetric
    /// matrices. Fails when the restricted operator has an eigenvalue below
    /// `min_eigenvalue`, so it is meant for positive-definite operators.
    pub fn inverse_on_symmetric(&self, min_eigenvalue: f64) -> Result<SymOperator> {
        let basis = sym_basis(self.dim);
        let reduced = basis.transpose() * &self.matrix * &basis;
        let (values, vectors) = sym_eigen(&reduced);
        let min = min_value(&values);
        if min < min_eigenvalue {
            return Err(Error::SingularOperator {
                min_eigenvalue: min,
            });
        }
        let inv = spectral_apply(&values, &vectors, |l| 1.0 / l);
        Ok(Self::from_trusted(
            self.dim,
            &basis * inv * basis.transpose(),
        ))
    }
}

/// Orthonormal basis of the symmetric subspace of `ℝ^{d²}`, one column per
/// `E_kk` and `(E_kl + E_lk)/√2` with `k < l`.
pub fn sym_basis(d: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(d * d, d * (d + 1) / 2);
    let mut col = 0;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for l in 0..d {
        for k in 0..=l {
            if k == l {
                b[(vec_index(k, k, d), col)] = 1.0;
            } else {
                b[(vec_index(k, l, d), col)] = r;
                b[(vec_index(l, k, d), col)] = r;
            }
            col += 1;
        }
    }
    b
}

/// The vectorized symmetrizer `vec(H) ↦ vec((H + Hᵀ)/2)`.
pub fn sym_projector(d: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            p[(vec_index(i, j, d), vec_index(i, j, d))] += 0.5;
            p[(vec_index(i, j, d), vec_index(j, i, d))] += 0.5;
        }
    }
    p
}

/// Principal square root via symmetric eigendecomposition.
pub fn sqrtm(a: &SpdMatrix) -> Result<SpdMatrix> {
    sqrtm_with(a, &NumericConfig::default())
}

pub fn sqrtm_with(a: &SpdMatrix, cfg: &NumericConfig) -> Result<SpdMatrix> {
    let (values, vectors) = sym_eigen(a.as_matrix());
    let min = min_value(&values);
    if min <= cfg.eig_floor {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(SpdMatrix::from_trusted(spectral_apply(
        &values,
        &vectors,
        f64::sqrt,
    )))
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// `tr (R A R)^{1/2}` for `R = B^{1/2}`, i.e. the fidelity term of `W²(A, B)`.
fn root_fidelity(a: &DMatrix<f64>, b_sqrt: &DMatrix<f64>) -> f64 {
    let m = b_sqrt * a * b_sqrt;
    let (values, _) = sym_eigen(&m);
    values.iter().map(|&l| l.max(0.0).sqrt()).sum()
}

pub(crate) fn w2_from_sqrt(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    b_sqrt: &DMatrix<f64>,
    cfg: &NumericConfig,
) -> Result<f64> {
    let r = a.trace() + b.trace() - 2.0 * root_fidelity(a, b_sqrt);
    if r >= 0.0 {
        Ok(r)
    } else if r >= -cfg.radicand_tol {
        Ok(0.0)
    } else {
        Err(Error::NumericalBreakdown(format!(
            "negative squared distance {r:e}"
        )))
    }
}

/// Squared Bures-Wasserstein distance.
pub fn bw_distance_squared(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let cfg = NumericConfig::default();
    let b_sqrt = sqrtm_with(b, &cfg)?;
    w2_from_sqrt(a.as_matrix(), b.as_matrix(), b_sqrt.as_matrix(), &cfg)
}

/// Bures-Wasserstein distance between two SPD matrices.
pub fn bw_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    bw_distance_squared(a, b).map(f64::sqrt)
}

/// Eigendata of `S^{1/2} Q S^{1/2}` from which both `T_Q^S` and its
/// differential in `Q` are read off.
///
/// With `S^{1/2} Q S^{1/2} = V Λ Vᵀ` and `A = S^{1/2} V`:
/// `T_Q^S = A Λ^{-1/2} Aᵀ` and `dT_Q^S(H) = −A (C ∘ AᵀHA) Aᵀ` where
/// `C_ij = 1 / (√λ_i √λ_j (√λ_i + √λ_j))`.
#[derive(Debug, Clone)]
pub(crate) struct TransportEigen {
    a: DMatrix<f64>,
    sqrt_lambda: DVector<f64>,
}

impl TransportEigen {
    pub(crate) fn new(
        source: &DMatrix<f64>,
        target_sqrt: &DMatrix<f64>,
        cfg: &NumericConfig,
    ) -> Result<Self> {
        let m = target_sqrt * source * target_sqrt;
        let (values, vectors) = sym_eigen(&m);
        let min = min_value(&values);
        if min <= cfg.eig_floor {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
            });
        }
        Ok(Self {
            a: target_sqrt * vectors,
            sqrt_lambda: values.map(f64::sqrt),
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub(crate) fn map(&self) -> DMatrix<f64> {
        let mut scaled = self.a.clone();
        for (j, &s) in self.sqrt_lambda.iter().enumerate() {
            scaled.column_mut(j).scale_mut(1.0 / s.sqrt());
        }
        symmetrize(&(&scaled * scaled.transpose()))
    }

    fn kernel(&self) -> DMatrix<f64> {
        let d = self.dim();
        let s = &self.sqrt_lambda;
        DMatrix::from_fn(d, d, |i, j| 1.0 / (s[i] * s[j] * (s[i] + s[j])))
    }

    pub(crate) fn differential(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let inner = self.a.transpose() * h * &self.a;
        let weighted = inner.component_mul(&self.kernel());
        symmetrize(&(-(&self.a * weighted * self.a.transpose())))
    }

    /// `d² × d²` matrix of `H ↦ dT(sym(H))`.
    pub(crate) fn operator(&self) -> DMatrix<f64> {
        let d = self.dim();
        let k = self.a.kronecker(&self.a);
        let c = self.kernel();
        let mut kd = k.clone();
        for j in 0..d {
            for i in 0..d {
                let col = vec_index(i, j, d);
                kd.column_mut(col).scale_mut(c[(i, j)]);
            }
        }
        let full = -(kd * k.transpose());
        // Right-multiplying by the symmetrizer averages columns (k,l) and (l,k).
        let mut out = full.clone();
        for l in 0..d {
            for kk in 0..d {
                let c1 = vec_index(kk, l, d);
                let c2 = vec_index(l, kk, d);
                for r in 0..d * d {
                    out[(r, c1)] = 0.5 * (full[(r, c1)] + full[(r, c2)]);
                }
            }
        }
        symmetrize(&out)
    }
}

/// Optimal transport map `T_Q^S` pushing `N(0, Q)` onto `N(0, S)`.
pub fn ot_map(q: &SpdMatrix, s: &SpdMatrix) -> Result<SymMatrix> {
    check_dims(q.dim(), s.dim())?;
    let cfg = NumericConfig::default();
    let s_sqrt = sqrtm_with(s, &cfg)?;
    let te = TransportEigen::new(q.as_matrix(), s_sqrt.as_matrix(), &cfg)?;
    Ok(SymMatrix { m: te.map() })
}

/// Directional derivative `dT_Q^S(H)` of the transport map in `Q`.
pub fn dt_map(q: &SpdMatrix, s: &SpdMatrix, h: &SymMatrix) -> Result<SymMatrix> {
    check_dims(q.dim(), s.dim())?;
    check_dims(q.dim(), h.dim())?;
    let cfg = NumericConfig::default();
    let s_sqrt = sqrtm_with(s, &cfg)?;
    let te = TransportEigen::new(q.as_matrix(), s_sqrt.as_matrix(), &cfg)?;
    Ok(SymMatrix {
        m: te.differential(h.as_matrix()),
    })
}

/// `dT_Q^S` as a [`SymOperator`].
pub fn dt_operator(q: &SpdMatrix, s: &SpdMatrix) -> Result<SymOperator> {
    check_dims(q.dim(), s.dim())?;
    let cfg = NumericConfig::default();
    let s_sqrt = sqrtm_with(s, &cfg)?;
    let te = TransportEigen::new(q.as_matrix(), s_sqrt.as_matrix(), &cfg)?;
    Ok(SymOperator::from_trusted(q.dim(), te.operator()))
}

/// Frobenius gradient `I − T_Q^S` of `W²(·, S)` at `Q`.
pub fn w2_gradient(q: &SpdMatrix, s: &SpdMatrix) -> Result<SymMatrix> {
    let t = ot_map(q, s)?;
    let d = q.dim();
    Ok(SymMatrix {
        m: DMatrix::identity(d, d) - t.m,
    })
}

/// Point at time `t ∈ [0, 1]` on the Bures-Wasserstein geodesic from `a` to `b`:
/// `((1−t) I + t T_a^b) a ((1−t) I + t T_a^b)`.
pub fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("geodesic time {t} outside [0, 1]")));
    }
    let tmap = ot_map(a, b)?;
    let d = a.dim();
    let g = DMatrix::identity(d, d) * (1.0 - t) + tmap.as_matrix() * t;
    Ok(SpdMatrix::from_trusted(&g * a.as_matrix() * &g))
}
