//! Numeric tolerances and small accumulation helpers shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// All tolerances used by the library, gathered in one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericConfig {
    /// Eigenvalues at or below this value are treated as non-positive.
    pub eig_floor: f64,
    /// Relative tolerance for matrix symmetry checks.
    pub symmetry_tol: f64,
    /// Negative squared-distance radicands down to `-radicand_tol` are clamped to zero.
    pub radicand_tol: f64,
    /// Relative tolerance for self-adjointness of operator matrices.
    pub operator_symmetry_tol: f64,
    /// Smallest admissible eigenvalue of a plug-in Hessian operator.
    pub singular_operator_tol: f64,
    /// Covariate covariance condition number above which it counts as singular.
    pub condition_limit: f64,
    /// Null-distribution eigenvalues below `null_eig_cutoff * largest` are dropped.
    pub null_eig_cutoff: f64,
    /// Negative null eigenvalues below `-null_eig_neg_tol` are an error.
    pub null_eig_neg_tol: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            eig_floor: 1e-12,
            symmetry_tol: 1e-10,
            radicand_tol: 1e-10,
            operator_symmetry_tol: 1e-8,
            singular_operator_tol: 1e-10,
            condition_limit: 1e12,
            null_eig_cutoff: 1e-12,
            null_eig_neg_tol: 1e-10,
        }
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Entry-wise compensated accumulator for matrices of a fixed shape.
#[derive(Debug, Clone)]
pub struct MatrixAccumulator {
    sum: DMatrix<f64>,
    comp: DMatrix<f64>,
}

impl MatrixAccumulator {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            sum: DMatrix::zeros(rows, cols),
            comp: DMatrix::zeros(rows, cols),
        }
    }

    /// Adds `scale * m`.
    pub fn add_scaled(&mut self, m: &DMatrix<f64>, scale: f64) {
        debug_assert_eq!(m.shape(), self.sum.shape());
        let sums = self.sum.as_mut_slice();
        let comps = self.comp.as_mut_slice();
        for ((s, c), &x) in sums.iter_mut().zip(comps.iter_mut()).zip(m.as_slice()) {
            let v = scale * x;
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    pub fn value(&self) -> DMatrix<f64> {
        &self.sum + &self.comp
    }
}

/// Symmetric eigendecomposition of the symmetric part of `m`.
pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues, eig.eigenvectors)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

/// `V diag(f(λ)) Vᵀ`.
pub(crate) fn spectral_apply(
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, &l) in values.iter().enumerate() {
        let fl = f(l);
        scaled.column_mut(j).scale_mut(fl);
    }
    let out = scaled * vectors.transpose();
    symmetrize(&out)
}

pub(crate) fn min_value(v: &DVector<f64>) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub(crate) fn max_value(v: &DVector<f64>) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn matrix_accumulator_matches_plain_sum() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut acc = MatrixAccumulator::zeros(2, 2);
        acc.add_scaled(&a, 0.5);
        acc.add_scaled(&a, 1.5);
        assert_eq!(acc.value(), a * 2.0);
    }
}
