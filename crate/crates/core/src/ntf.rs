//! Non-negative CP factorization with ratio-form multiplicative updates.
//!
//! Each sweep updates the utility, industry and annual factors in that order,
//! rebuilding the reconstruction between blocks. The updates are the
//! generalized Kullback-Leibler multiplicative rules, so the KL divergence is
//! the quantity that decreases monotonically; the reported fit is the
//! Frobenius-based reconstruction accuracy. Both are traced per sweep.

use ndarray::{Array2, Array3, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{accuracy_of_values, frobenius_norm_view, reconstruct_values, CpModel, DemandTensor};

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NtfConfig {
    pub rank: usize,
    /// Number of full update sweeps; there is no early stopping.
    pub iterations: usize,
    pub seed: u64,
    /// Added to every reconstruction entry used as a divisor and used as the
    /// floor for every denominator sum.
    pub epsilon: f64,
}

impl Default for NtfConfig {
    fn default() -> Self {
        Self {
            rank: 8,
            iterations: 100,
            seed: 10,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl NtfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("ntf rank must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("ntf iterations must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1e-3) {
            return Err(Error::InvalidConfig(format!(
                "ntf epsilon must lie in (0, 1e-3), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtfResult {
    pub model: CpModel,
    /// Reconstruction accuracy on the input tensor after each sweep.
    pub accuracy_trace: Vec<f64>,
    /// Generalized KL divergence after each sweep.
    pub kl_trace: Vec<f64>,
    pub final_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankPoint {
    pub rank: usize,
    pub accuracy: f64,
}

/// Draws every factor entry independently from the uniform distribution on
/// `(epsilon, 1]`, filling A, then B, then C in row-major order.
pub fn init_factors(dims: (usize, usize, usize), rank: usize, seed: u64, epsilon: f64) -> CpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize| {
        Array2::from_shape_simple_fn((rows, rank), || {
            // random() is in [0, 1); flip it to (0, 1] and lift above epsilon.
            let u = 1.0 - rng.random::<f64>();
            epsilon + (1.0 - epsilon) * u
        })
    };
    let a = draw(dims.0);
    let b = draw(dims.1);
    let c = draw(dims.2);
    CpModel::from_parts_unchecked(a, b, c)
}

/// Generalized KL divergence `Σ X·ln(X/X̃) − X + X̃`, with `0·ln 0 = 0`.
pub fn kl_divergence(x: ArrayView3<'_, f64>, x_hat: ArrayView3<'_, f64>) -> f64 {
    x.iter()
        .zip(x_hat.iter())
        .map(|(&v, &w)| if v > 0.0 { v * (v / w).ln() - v + w } else { w })
        .sum()
}

fn ratio_tensor(x: ArrayView3<'_, f64>, x_hat: &Array3<f64>, epsilon: f64) -> Array3<f64> {
    let mut q = x.to_owned();
    q.zip_mut_with(x_hat, |v, &w| *v /= w + epsilon);
    q
}

fn update_a(x: ArrayView3<'_, f64>, a: &mut Array2<f64>, b: &Array2<f64>, c: &Array2<f64>, epsilon: f64) {
    let q = ratio_tensor(x, &reconstruct_values(a, b, c), epsilon);
    let (ni, nj, nk) = q.dim();
    for r in 0..a.ncols() {
        let den = (b.column(r).sum() * c.column(r).sum()).max(epsilon);
        for i in 0..ni {
            let mut num = 0.0;
            for j in 0..nj {
                let bj = b[[j, r]];
                for k in 0..nk {
                    num += q[[i, j, k]] * bj * c[[k, r]];
                }
            }
            a[[i, r]] *= num / den;
        }
    }
}

fn update_b(x: ArrayView3<'_, f64>, a: &Array2<f64>, b: &mut Array2<f64>, c: &Array2<f64>, epsilon: f64) {
    let q = ratio_tensor(x, &reconstruct_values(a, b, c), epsilon);
    let (ni, nj, nk) = q.dim();
    for r in 0..b.ncols() {
        let den = (a.column(r).sum() * c.column(r).sum()).max(epsilon);
        for j in 0..nj {
            let mut num = 0.0;
            for i in 0..ni {
                let ai = a[[i, r]];
                for k in 0..nk {
                    num += q[[i, j, k]] * ai * c[[k, r]];
                }
            }
            b[[j, r]] *= num / den;
        }
    }
}

fn update_c(x: ArrayView3<'_, f64>, a: &Array2<f64>, b: &Array2<f64>, c: &mut Array2<f64>, epsilon: f64) {
    let q = ratio_tensor(x, &reconstruct_values(a, b, c), epsilon);
    let (ni, nj, nk) = q.dim();
    for r in 0..c.ncols() {
        let den = (a.column(r).sum() * b.column(r).sum()).max(epsilon);
        for k in 0..nk {
            let mut num = 0.0;
            for i in 0..ni {
                let ai = a[[i, r]];
                for j in 0..nj {
                    num += q[[i, j, k]] * ai * b[[j, r]];
                }
            }
            c[[k, r]] *= num / den;
        }
    }
}

fn sweep_in_place(x: ArrayView3<'_, f64>, a: &mut Array2<f64>, b: &mut Array2<f64>, c: &mut Array2<f64>, epsilon: f64) {
    update_a(x, a, b, c, epsilon);
    update_b(x, a, b, c, epsilon);
    update_c(x, a, b, c, epsilon);
}

/// One full A → B → C multiplicative sweep.
pub fn update_sweep(x: &DemandTensor, model: &CpModel, epsilon: f64) -> Result<CpModel> {
    if x.dims() != model.dims() {
        return Err(Error::DimensionMismatch {
            expected: x.dims(),
            found: model.dims(),
        });
    }
    let (mut a, mut b, mut c) = model.clone().into_factors();
    sweep_in_place(x.values().view(), &mut a, &mut b, &mut c, epsilon);
    Ok(CpModel::from_parts_unchecked(a, b, c))
}

/// Seeded initialization followed by exactly `config.iterations` sweeps.
pub fn factorize(x: &DemandTensor, config: &NtfConfig) -> Result<NtfResult> {
    config.validate()?;
    let values = x.values().view();
    if frobenius_norm_view(values) == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let (mut a, mut b, mut c) = init_factors(x.dims(), config.rank, config.seed, config.epsilon).into_factors();
    let mut accuracy_trace = Vec::with_capacity(config.iterations);
    let mut kl_trace = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        sweep_in_place(values, &mut a, &mut b, &mut c, config.epsilon);
        let x_hat = reconstruct_values(&a, &b, &c);
        accuracy_trace.push(accuracy_of_values(values, x_hat.view())?);
        kl_trace.push(kl_divergence(values, x_hat.view()));
    }
    let model = CpModel::new(a, b, c)?;
    let final_accuracy = *accuracy_trace.last().expect("iterations >= 1");
    Ok(NtfResult {
        model,
        accuracy_trace,
        kl_trace,
        final_accuracy,
    })
}

/// Factorizes `x` once per rank with a shared seed; output follows input order.
pub fn rank_sweep(x: &DemandTensor, ranks: &[usize], iterations: usize, seed: u64) -> Result<Vec<RankPoint>> {
    if ranks.is_empty() {
        return Err(Error::InvalidConfig("rank sweep needs at least one rank".into()));
    }
    ranks
        .par_iter()
        .map(|&rank| {
            let config = NtfConfig {
                rank,
                iterations,
                seed,
                epsilon: DEFAULT_EPSILON,
            };
            factorize(x, &config).map(|res| RankPoint {
                rank,
                accuracy: res.final_accuracy,
            })
        })
        .collect()
}
