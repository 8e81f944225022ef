//! DoA-based surrogate of the jamming-plus-noise covariance,
//! `C̃ = η A(θ_G) A(θ_G)^H + σ² I`.

use crate::channel::array_manifold;
use crate::linalg::{scaled_identity, CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCov {
    pub c_tilde: CMatrix,
    pub eta: f64,
    pub doas_g: Vec<f64>,
    /// No jammer DoAs were supplied although `η > 0`.
    pub degenerate: bool,
}

impl SurrogateCov {
    /// The same matrix for each of `resource_elements` REs.
    pub fn per_re(&self, resource_elements: usize) -> Vec<CMatrix> {
        vec![self.c_tilde.clone(); resource_elements]
    }
}

pub fn surrogate_covariance(doas_g: &[f64], eta: f64, sigma2: f64, rx_antennas: usize) -> SurrogateCov {
    let mut c = scaled_identity(rx_antennas, sigma2);
    if eta > 0.0 && !doas_g.is_empty() {
        let a = array_manifold(doas_g, rx_antennas);
        c += (&a * a.adjoint()) * C64::new(eta, 0.0);
    }
    SurrogateCov {
        c_tilde: c,
        eta,
        doas_g: doas_g.to_vec(),
        degenerate: eta > 0.0 && doas_g.is_empty(),
    }
}
