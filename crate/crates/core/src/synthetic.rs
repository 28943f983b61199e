//! Seeded synthetic data with known structure, for tests, benchmarks and
//! demos. Nothing here is used by the forecasting pipeline itself.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::tensor::{reconstruct_values, DemandTensor};

const BURN_IN: usize = 200;

/// ARMA(1,1) with unit-variance Gaussian innovations after a 200-step burn-in:
/// `y_t = φ y_{t-1} + e_t + θ e_{t-1}`.
pub fn arma11(phi: f64, theta: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n + BURN_IN);
    let (mut prev_y, mut prev_e) = (0.0, 0.0);
    for _ in 0..n + BURN_IN {
        let e: f64 = StandardNormal.sample(&mut rng);
        let v = phi * prev_y + e + theta * prev_e;
        y.push(v);
        prev_y = v;
        prev_e = e;
    }
    y.split_off(BURN_IN)
}

/// Shape of a planted low-rank demand tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub utilities: usize,
    pub industries: usize,
    pub years: usize,
    pub rank: usize,
    pub first_year: i32,
    /// AR(1) coefficient of the deviation around each factor's trend.
    pub phi: f64,
    /// Standard deviation of those AR(1) innovations, relative to the level.
    pub innovation_scale: f64,
    /// Standard deviation of the multiplicative noise on every element.
    pub noise: f64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            utilities: 10,
            industries: 10,
            years: 42,
            rank: 2,
            first_year: 1974,
            phi: 0.8,
            innovation_scale: 0.02,
            noise: 0.05,
        }
    }
}

/// A rank-`R` CP tensor whose annual factor columns follow a linear trend
/// plus AR(1) deviations, times elementwise `max(0, 1 + noise * N(0, 1))`.
/// Returns the noisy tensor and the noiseless factors `(A, B, C)`.
pub fn planted(spec: &PlantedSpec, seed: u64) -> Result<(DemandTensor, [Array2<f64>; 3])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = spec.rank;
    let a = Array2::from_shape_fn((spec.utilities, r), |_| rng.random_range(0.5..1.5));
    let b = Array2::from_shape_fn((spec.industries, r), |_| rng.random_range(0.5..1.5));
    let mut c = Array2::zeros((spec.years, r));
    for col in 0..r {
        let level = rng.random_range(50.0..100.0);
        let slope = rng.random_range(-0.005..0.02) * level;
        let mut dev = 0.0;
        for t in 0..spec.years {
            let e: f64 = StandardNormal.sample(&mut rng);
            dev = spec.phi * dev + spec.innovation_scale * level * e;
            c[[t, col]] = (level + slope * t as f64 + dev).max(0.0);
        }
    }
    let mut values: Array3<f64> = reconstruct_values(&a, &b, &c);
    values.mapv_inplace(|v| {
        let z: f64 = StandardNormal.sample(&mut rng);
        v * (1.0 + spec.noise * z).max(0.0)
    });
    Ok((DemandTensor::from_values(values, spec.first_year)?, [a, b, c]))
}

/// A random exact rank-`rank` non-negative tensor with factor entries drawn
/// uniformly from `[0.1, 1.1)`.
pub fn exact_low_rank(dims: (usize, usize, usize), rank: usize, seed: u64) -> Result<DemandTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| Array2::from_shape_fn((n, rank), |_| rng.random_range(0.1..1.1));
    let (a, b, c) = (draw(dims.0), draw(dims.1), draw(dims.2));
    DemandTensor::from_values(reconstruct_values(&a, &b, &c), 0)
}
