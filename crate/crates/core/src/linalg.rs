//! Dense complex linear algebra helpers shared by the PHY, optimizer and
//! adversary modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// `a b^H`.
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn scaled_identity(n: usize, s: f64) -> CMatrix {
    CMatrix::identity(n, n) * C64::new(s, 0.0)
}

/// Real part of `a^H M b`; used for quadratic forms of Hermitian matrices.
pub fn quad_form(v: &CVector, m: &CMatrix) -> f64 {
    (v.adjoint() * m * v)[(0, 0)].re
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.trace().re
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `‖M − M^H‖_F ≤ tol · max(‖M‖_F, tiny)`.
pub fn is_hermitian(m: &CMatrix, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (m - m.adjoint()).norm() <= rel_tol * scale
}

/// Eigenvalues (descending) and matching orthonormal eigenvectors of a
/// Hermitian matrix. The input is symmetrized first.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(hermitian_part(m));
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Hermitian PSD check: `min eig ≥ −tol · max(trace, tiny)`.
pub fn is_psd(m: &CMatrix, rel_tol: f64) -> bool {
    let tr = trace_re(m).abs().max(f64::MIN_POSITIVE);
    min_eigenvalue(m) >= -rel_tol * tr
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `tol`.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    singular_values(m).into_iter().filter(|&s| s > tol).count()
}

/// Moore–Penrose pseudoinverse; singular values below `rel_tol · σ_max` are
/// treated as zero.
pub fn pinv(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMatrix::zeros(m.ncols(), m.nrows());
    }
    let tol = rel_tol * smax;
    let u = svd.u.expect("svd computed with u");
    let vt = svd.v_t.expect("svd computed with v_t");
    let mut out = CMatrix::zeros(m.ncols(), m.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let vi = vt.row(i).adjoint();
            let ui = u.column(i).adjoint();
            out += (vi * ui) * C64::new(1.0 / s, 0.0);
        }
    }
    out
}

/// Solves `X z = b` for Hermitian positive definite `X`.
pub fn solve_hpd(x: &CMatrix, b: &CVector) -> Result<CVector> {
    let chol = hermitian_part(x).cholesky().ok_or(Error::Singular("Hermitian solve"))?;
    Ok(chol.solve(b))
}

pub fn solve_hpd_mat(x: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let chol = hermitian_part(x).cholesky().ok_or(Error::Singular("Hermitian solve"))?;
    Ok(chol.solve(b))
}

pub fn inv_hpd(x: &CMatrix) -> Result<CMatrix> {
    let chol = hermitian_part(x).cholesky().ok_or(Error::Singular("Hermitian inverse"))?;
    Ok(chol.inverse())
}

/// Principal square root of a Hermitian PSD matrix (negative eigenvalues
/// clipped to zero).
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let s = C64::new(lam.max(0.0).sqrt(), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// Circularly-symmetric complex Gaussian sample with `E|z|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

pub fn complex_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> CVector {
    CVector::from_iterator(n, (0..n).map(|_| complex_gaussian(rng, variance)))
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

/// Random Hermitian PSD matrix `A A^H` with i.i.d. unit-variance entries.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMatrix {
    let a = complex_gaussian_matrix(rng, n, rank, 1.0);
    &a * a.adjoint()
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigen_sorted_descending_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_psd(&mut rng, 5, 5);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(
            5,
            vals.iter().map(|&v| C64::new(v, 0.0)),
        ));
        let rebuilt = &vecs * diag * vecs.adjoint();
        assert!((rebuilt - m).norm() < 1e-9);
    }

    #[test]
    fn pinv_of_full_row_rank_is_right_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = complex_gaussian_matrix(&mut rng, 3, 5, 1.0);
        let gp = pinv(&g, 1e-10);
        assert!((&g * &gp - identity(3)).norm() < 1e-10);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_psd(&mut rng, 4, 2);
        let r = psd_sqrt(&m);
        assert!((&r * &r - &m).norm() < 1e-9 * m.norm());
    }
}
