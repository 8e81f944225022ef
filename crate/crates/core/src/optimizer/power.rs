//! Dominant eigenpair of a Hermitian PSD matrix by power iteration.

use crate::linalg::{hermitian_eigen, CMatrix, CVector, C64};

const MAX_ITER: usize = 200;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigPair {
    pub value: f64,
    pub vector: CVector,
    /// Set when the input is the zero matrix; `vector` is then `e_1`.
    pub zero_matrix: bool,
    /// Set when power iteration stalled and the dense solver was used.
    pub dense_fallback: bool,
    pub iterations: usize,
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian PSD matrix.
///
/// Starts from the column of largest norm, stops once
/// `‖Mu − λu‖ ≤ 1e-10 λ`, and falls back to a dense eigensolver after 200
/// iterations.
pub fn max_eigpair(m: &CMatrix) -> EigPair {
    let n = m.nrows();
    let mut e1 = CVector::zeros(n);
    if n > 0 {
        e1[0] = C64::new(1.0, 0.0);
    }
    let (best_col, best_norm) = (0..m.ncols())
        .map(|j| (j, m.column(j).norm()))
        .fold((0, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
    if best_norm == 0.0 || !best_norm.is_finite() {
        return EigPair {
            value: 0.0,
            vector: e1,
            zero_matrix: best_norm == 0.0,
            dense_fallback: false,
            iterations: 0,
        };
    }
    let mut u: CVector = m.column(best_col) / C64::new(best_norm, 0.0);
    for it in 1..=MAX_ITER {
        let mu = m * &u;
        let lambda = u.dotc(&mu).re;
        let residual = (&mu - &u * C64::new(lambda, 0.0)).norm();
        if residual <= RESIDUAL_TOL * lambda.abs() {
            return EigPair {
                value: lambda,
                vector: u,
                zero_matrix: false,
                dense_fallback: false,
                iterations: it,
            };
        }
        let norm = mu.norm();
        if norm == 0.0 {
            break;
        }
        u = mu / C64::new(norm, 0.0);
    }
    let (values, vectors) = hermitian_eigen(m);
    EigPair {
        value: values[0],
        vector: vectors.column(0).into_owned(),
        zero_matrix: false,
        dense_fallback: true,
        iterations: MAX_ITER,
    }
}
