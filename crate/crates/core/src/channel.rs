//! Beamspace MIMO-OFDM channel realizations over the (subcarrier, symbol)
//! resource grid.
//!
//! Resource elements are stored flat with index `n * K + k`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{dim_err, Result};
use crate::linalg::{all_finite, complex_gaussian, CMatrix, CVector, C64};

/// Half-wavelength ULA response, `a_m = exp(jπ m sin θ)`.
pub fn steering_vector(theta: f64, n_antennas: usize) -> CVector {
    let phase = PI * theta.sin();
    CVector::from_iterator(
        n_antennas,
        (0..n_antennas).map(|m| C64::from_polar(1.0, phase * m as f64)),
    )
}

/// Array manifold `[a(θ_1), …, a(θ_L)]`.
pub fn array_manifold(thetas: &[f64], n_antennas: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n_antennas, thetas.len());
    for (l, &t) in thetas.iter().enumerate() {
        a.set_column(l, &steering_vector(t, n_antennas));
    }
    a
}

/// Per-path parameters of one beamspace channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub gains: Vec<C64>,
    pub doa: Vec<f64>,
    pub dod: Vec<f64>,
    pub doppler: Vec<f64>,
    pub delay: Vec<f64>,
}

impl PathParams {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    fn check(&self) -> Result<()> {
        let l = self.gains.len();
        for (name, len) in [
            ("doa", self.doa.len()),
            ("dod", self.dod.len()),
            ("doppler", self.doppler.len()),
            ("delay", self.delay.len()),
        ] {
            if len != l {
                return Err(dim_err("path parameters", format!("{l} {name} entries"), len));
            }
        }
        Ok(())
    }
}

/// Sampled directions of arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doas {
    /// `user[q][l]`
    pub user: Vec<Vec<f64>>,
    pub jammer: Vec<f64>,
}

/// Legitimate channels `H[q][re]` (N_R × N_T) and jamming channels `G[re]`
/// (N_R × N_J).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<Vec<CMatrix>>,
    pub g: Vec<CMatrix>,
    pub paths_h: Vec<PathParams>,
    pub paths_g: PathParams,
    pub subcarriers: usize,
    pub symbols: usize,
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn resource_elements(&self) -> usize {
        self.g.len()
    }

    pub fn re_index(&self, n: usize, k: usize) -> usize {
        n * self.symbols + k
    }

    pub fn rx_antennas(&self) -> usize {
        self.g.first().map_or(0, |g| g.nrows())
    }

    pub fn tx_antennas(&self, q: usize) -> usize {
        self.h[q].first().map_or(0, |h| h.ncols())
    }

    pub fn jammer_antennas(&self) -> usize {
        self.g.first().map_or(0, |g| g.ncols())
    }

    /// Builds a channel set directly from per-RE matrices, checking shapes.
    pub fn from_matrices(
        h: Vec<Vec<CMatrix>>,
        g: Vec<CMatrix>,
        subcarriers: usize,
        symbols: usize,
    ) -> Result<Self> {
        let res = subcarriers * symbols;
        if g.len() != res {
            return Err(dim_err("jamming channel grid", res, g.len()));
        }
        let n_r = g.first().map_or(0, |m| m.nrows());
        for m in &g {
            if m.nrows() != n_r || m.ncols() != g[0].ncols() {
                return Err(dim_err("jamming channel", format!("{n_r} rows"), m.nrows()));
            }
        }
        for per_user in &h {
            if per_user.len() != res {
                return Err(dim_err("user channel grid", res, per_user.len()));
            }
            for m in per_user {
                if m.nrows() != n_r || m.ncols() != per_user[0].ncols() {
                    return Err(dim_err("user channel", format!("{n_r} rows"), m.nrows()));
                }
            }
        }
        let empty = |l: usize| PathParams {
            gains: vec![C64::new(0.0, 0.0); l],
            doa: vec![0.0; l],
            dod: vec![0.0; l],
            doppler: vec![0.0; l],
            delay: vec![0.0; l],
        };
        Ok(Self {
            paths_h: vec![empty(0); h.len()],
            h,
            g,
            paths_g: empty(0),
            subcarriers,
            symbols,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.g.iter().all(all_finite) && self.h.iter().flatten().all(all_finite)
    }
}

/// Draws `θ_{q,l} = θ_H + φ`, `φ ~ U[−spread_H, spread_H]` and likewise for
/// the jammer.
pub fn sample_doas<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Doas {
    let user = (0..config.users)
        .map(|_| {
            (0..config.user_paths)
                .map(|_| config.user_doa + symmetric(rng, config.user_spread))
                .collect()
        })
        .collect();
    let jammer = (0..config.jammer_paths)
        .map(|_| config.jammer_doa + symmetric(rng, config.jammer_spread))
        .collect();
    Doas { user, jammer }
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.random_range(-half_width..=half_width)
    }
}

/// Draws gains, departure angles, Dopplers and delays for the given arrival
/// angles and evaluates every channel on the resource grid.
pub fn realize_channels<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    doas: &Doas,
    rng: &mut R,
) -> Result<ChannelSet> {
    if doas.user.len() != config.users {
        return Err(dim_err("user DoA sets", config.users, doas.user.len()));
    }
    if let Some(bad) = doas.user.iter().find(|d| d.len() != config.user_paths) {
        return Err(dim_err("user DoAs", config.user_paths, bad.len()));
    }
    if doas.jammer.len() != config.jammer_paths {
        return Err(dim_err("jammer DoAs", config.jammer_paths, doas.jammer.len()));
    }
    let paths_h: Vec<PathParams> = doas
        .user
        .iter()
        .map(|d| draw_paths(config, d, rng))
        .collect();
    let paths_g = draw_paths(config, &doas.jammer, rng);
    let grid = Grid::from_config(config);
    let h = paths_h
        .iter()
        .map(|p| grid.evaluate(p, config.rx_antennas, config.tx_antennas))
        .collect::<Result<Vec<_>>>()?;
    let g = grid.evaluate(&paths_g, config.rx_antennas, config.jammer_antennas)?;
    Ok(ChannelSet {
        h,
        g,
        paths_h,
        paths_g,
        subcarriers: config.subcarriers,
        symbols: config.symbols,
    })
}

fn draw_paths<R: Rng + ?Sized>(config: &ScenarioConfig, doa: &[f64], rng: &mut R) -> PathParams {
    let l = doa.len();
    let variance = 10f64.powf(-config.path_loss_db / 10.0) / l.max(1) as f64;
    let max_delay = 1.0 / config.subcarrier_spacing;
    let mut p = PathParams {
        gains: Vec::with_capacity(l),
        doa: doa.to_vec(),
        dod: Vec::with_capacity(l),
        doppler: Vec::with_capacity(l),
        delay: Vec::with_capacity(l),
    };
    for _ in 0..l {
        p.gains.push(complex_gaussian(rng, variance));
        p.dod.push(symmetric(rng, config.dod_spread));
        p.doppler.push(symmetric(rng, config.doppler_max));
        p.delay.push(rng.random_range(0.0..max_delay));
    }
    p
}

/// Resource-grid timing needed to evaluate path phases.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub subcarriers: usize,
    pub symbols: usize,
    pub symbol_period: f64,
    pub subcarrier_spacing: f64,
}

impl Grid {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            subcarriers: config.subcarriers,
            symbols: config.symbols,
            symbol_period: config.symbol_period,
            subcarrier_spacing: config.subcarrier_spacing,
        }
    }

    /// `Σ_l b_l a_Rx(θ_l) a_Tx(ψ_l)^H e^{j2π(kνT_s − nτΔf)}` for every RE.
    pub fn evaluate(&self, paths: &PathParams, n_rx: usize, n_tx: usize) -> Result<Vec<CMatrix>> {
        paths.check()?;
        let a_rx = array_manifold(&paths.doa, n_rx);
        let a_tx_h = array_manifold(&paths.dod, n_tx).adjoint();
        let mut out = Vec::with_capacity(self.subcarriers * self.symbols);
        let mut scaled = a_rx.clone();
        for n in 0..self.subcarriers {
            for k in 0..self.symbols {
                for l in 0..paths.len() {
                    let omega = k as f64 * paths.doppler[l] * self.symbol_period
                        - n as f64 * paths.delay[l] * self.subcarrier_spacing;
                    let c = paths.gains[l] * C64::from_polar(1.0, 2.0 * PI * omega);
                    let col = a_rx.column(l) * c;
                    scaled.set_column(l, &col);
                }
                out.push(&scaled * &a_tx_h);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::numerical_rank;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn steering_examples() {
        let a = steering_vector(0.0, 4);
        assert!(a.iter().all(|z| close(*z, C64::new(1.0, 0.0))));
        let a = steering_vector(PI / 2.0, 2);
        assert!(close(a[1], C64::new(-1.0, 0.0)));
        let a = steering_vector(PI / 6.0, 3);
        assert!(close(a[0], C64::new(1.0, 0.0)));
        assert!(close(a[1], C64::new(0.0, 1.0)));
        assert!(close(a[2], C64::new(-1.0, 0.0)));
    }

    fn small_config() -> ScenarioConfig {
        ScenarioConfig {
            users: 2,
            tx_antennas: 3,
            rx_antennas: 4,
            jammer_antennas: 5,
            subcarriers: 3,
            symbols: 2,
            user_paths: 2,
            jammer_paths: 3,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn zero_spread_pins_doas() {
        let cfg = ScenarioConfig {
            user_spread: 0.0,
            ..small_config()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = sample_doas(&cfg, &mut rng);
        assert!(d.user.iter().flatten().all(|&t| t == cfg.user_doa));
    }

    #[test]
    fn single_static_path_is_rank_one_outer_product() {
        let grid = Grid {
            subcarriers: 2,
            symbols: 2,
            symbol_period: 1e-4,
            subcarrier_spacing: 15e3,
        };
        let paths = PathParams {
            gains: vec![C64::new(1.0, 0.0)],
            doa: vec![0.3],
            dod: vec![-0.2],
            doppler: vec![0.0],
            delay: vec![0.0],
        };
        let hs = grid.evaluate(&paths, 4, 3).unwrap();
        let expect = steering_vector(0.3, 4) * steering_vector(-0.2, 3).adjoint();
        for h in &hs {
            assert!((h - &expect).norm() < 1e-12);
            assert_eq!(numerical_rank(h, 1e-9), 1);
        }
    }

    #[test]
    fn mismatched_paths_rejected() {
        let grid = Grid {
            subcarriers: 1,
            symbols: 1,
            symbol_period: 1e-4,
            subcarrier_spacing: 15e3,
        };
        let paths = PathParams {
            gains: vec![C64::new(1.0, 0.0); 2],
            doa: vec![0.0],
            dod: vec![0.0; 2],
            doppler: vec![0.0; 2],
            delay: vec![0.0; 2],
        };
        assert!(grid.evaluate(&paths, 2, 2).is_err());
    }

    #[test]
    fn realization_is_reproducible_and_rank_bounded() {
        let cfg = small_config();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let d = sample_doas(&cfg, &mut rng);
            realize_channels(&cfg, &d, &mut rng).unwrap()
        };
        let a = draw();
        let b = draw();
        assert_eq!(a, b);
        assert!(a.is_finite());
        assert_eq!(a.resource_elements(), 6);
        for h in a.h.iter().flatten() {
            assert!(numerical_rank(h, 1e-9) <= 2);
        }
    }
}
