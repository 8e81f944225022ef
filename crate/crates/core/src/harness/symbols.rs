//! Isometric map between real embedding coordinates and complex symbols.
//!
//! Token embeddings are rotated onto the principal axes of the batch second
//! moment (an orthonormal change of basis, so squared errors are preserved),
//! consecutive coordinate pairs become real and imaginary parts, and the
//! resulting stream is permuted by a seeded interleaver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::linalg::C64;

/// Diagonal loading applied when the batch second moment is degenerate.
pub const LOADING: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMap {
    /// Orthonormal `dim × dim` basis; symbols carry `rotation^T e`.
    pub rotation: DMatrix<f64>,
    /// Stream position of symbol `i` is `interleaver[i]`.
    pub interleaver: Vec<usize>,
    /// The batch second moment was rank-deficient and loaded.
    pub loaded: bool,
}

impl SymbolMap {
    /// Fits the rotation to a batch of token embeddings (each of length
    /// `dim`, even) and draws an interleaver for `stream_len` symbols.
    pub fn fit<R: Rng + ?Sized>(tokens: &[&[f64]], dim: usize, stream_len: usize, rng: &mut R) -> Self {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for e in tokens {
            let v = DVector::from_column_slice(e);
            m += &v * v.transpose();
        }
        if !tokens.is_empty() {
            m /= tokens.len() as f64;
        }
        let trace = m.trace();
        let eig = SymmetricEigen::new(m.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let loaded = !(min > 1e-12 * trace.max(f64::MIN_POSITIVE));
        let eig = if loaded {
            SymmetricEigen::new(m + DMatrix::identity(dim, dim) * LOADING)
        } else {
            eig
        };
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut rotation = DMatrix::zeros(dim, dim);
        for (dst, &src) in order.iter().enumerate() {
            rotation.set_column(dst, &eig.eigenvectors.column(src));
        }
        let mut interleaver: Vec<usize> = (0..stream_len).collect();
        interleaver.shuffle(rng);
        Self {
            rotation,
            interleaver,
            loaded,
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.nrows()
    }

    /// Symbols of one token embedding.
    pub fn token_to_symbols(&self, e: &[f64]) -> Vec<C64> {
        let r = self.rotation.transpose() * DVector::from_column_slice(e);
        r.as_slice().chunks(2).map(|p| C64::new(p[0], p[1])).collect()
    }

    pub fn symbols_to_token(&self, s: &[C64]) -> Vec<f64> {
        let flat: Vec<f64> = s.iter().flat_map(|z| [z.re, z.im]).collect();
        (&self.rotation * DVector::from_vec(flat)).as_slice().to_vec()
    }

    /// Interleaved symbol stream of a batch (token embeddings in order).
    pub fn to_stream(&self, tokens: &[&[f64]]) -> Vec<C64> {
        let plain: Vec<C64> = tokens.iter().flat_map(|e| self.token_to_symbols(e)).collect();
        let mut out = vec![C64::new(0.0, 0.0); plain.len()];
        for (i, s) in plain.into_iter().enumerate() {
            out[self.interleaver[i]] = s;
        }
        out
    }

    /// Inverse of [`SymbolMap::to_stream`]; returns token embeddings.
    pub fn from_stream(&self, stream: &[C64]) -> Vec<Vec<f64>> {
        let half = self.dim() / 2;
        let plain: Vec<C64> = (0..stream.len()).map(|i| stream[self.interleaver[i]]).collect();
        plain.chunks(half).map(|c| self.symbols_to_token(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect()).collect()
    }

    #[test]
    fn round_trip_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = batch(&mut rng, 20, 6);
        let refs: Vec<&[f64]> = b.iter().map(|v| v.as_slice()).collect();
        let map = SymbolMap::fit(&refs, 6, 60, &mut rng);
        assert!(!map.loaded);
        let stream = map.to_stream(&refs);
        let back = map.from_stream(&stream);
        for (x, y) in b.iter().zip(&back) {
            for (a, c) in x.iter().zip(y) {
                assert!((a - c).abs() < 1e-9);
            }
        }
        let noisy: Vec<C64> = stream.iter().enumerate().map(|(i, s)| s + C64::new(0.01 * i as f64, -0.02)).collect();
        let delta: f64 = stream.iter().zip(&noisy).map(|(a, b)| (a - b).norm_sqr()).sum();
        let back = map.from_stream(&noisy);
        let err: f64 = b
            .iter()
            .zip(&back)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(a, c)| (a - c).powi(2)))
            .sum();
        assert!((err - delta).abs() < 1e-9 * delta);
    }

    #[test]
    fn degenerate_batch_is_loaded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zeros = vec![vec![0.0; 4]; 3];
        let refs: Vec<&[f64]> = zeros.iter().map(|v| v.as_slice()).collect();
        let map = SymbolMap::fit(&refs, 4, 6, &mut rng);
        assert!(map.loaded);
        let r = &map.rotation;
        assert!((r.transpose() * r - DMatrix::identity(4, 4)).norm() < 1e-12);
    }
}
