//! Non-seasonal ARIMA(p, d, q) estimated by conditional sum of squares.
//!
//! The differenced series `w` follows
//! `w_t − μ = Σ φ_i (w_{t−i} − μ) + e_t + Σ θ_j e_{t−j}`.
//! `μ` is the sample mean of `w` when `d = 0` and zero otherwise, so a
//! differenced model never carries drift. Residuals are computed from
//! `t = p` onward with pre-sample innovations fixed at zero, and (φ, θ) are
//! found by Levenberg-Marquardt on those residuals starting from the AR-only
//! least-squares solution with θ = 0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observations required after differencing on top of `max(p, q)`.
pub const MIN_EXTRA_OBSERVATIONS: usize = 10;

const MAX_ITERATIONS: usize = 500;
const REL_SSE_TOL: f64 = 1e-13;
const STEP_TOL: f64 = 1e-10;
const MAX_DAMPING: f64 = 1e16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaSpec {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// Minimum length of the undifferenced series this spec can be fit on.
    pub fn min_series_len(&self) -> usize {
        self.d + self.p.max(self.q) + MIN_EXTRA_OBSERVATIONS
    }

    pub fn within(&self, bounds: &OrderBounds) -> bool {
        self.p <= bounds.p_max && self.d <= bounds.d_max && self.q <= bounds.q_max
    }
}

impl std::fmt::Display for ArimaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// Inclusive upper bounds on (p, d, q); lower bounds are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderBounds {
    pub p_max: usize,
    pub d_max: usize,
    pub q_max: usize,
}

impl Default for OrderBounds {
    fn default() -> Self {
        Self {
            p_max: 5,
            d_max: 2,
            q_max: 5,
        }
    }
}

/// State carried from the end of the fitted sample into forecasting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaTail {
    /// Last `p` values of the differenced series, oldest first.
    pub recent_differenced: Vec<f64>,
    /// Last `q` in-sample innovations, oldest first.
    pub recent_residuals: Vec<f64>,
    /// Last `d` observations on the original scale, oldest first.
    pub anchor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// An AR root lies on or inside the unit circle.
    pub nonstationary_ar: bool,
    /// An MA root lies on or inside the unit circle.
    pub noninvertible_ma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub spec: ArimaSpec,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub intercept: f64,
    pub residual_variance: f64,
    pub tail: ArimaTail,
    pub diagnostics: Diagnostics,
}

impl ArimaModel {
    /// Assembles a model from known parameters, e.g. for closed-form checks.
    pub fn from_parts(
        spec: ArimaSpec,
        ar_coeffs: Vec<f64>,
        ma_coeffs: Vec<f64>,
        intercept: f64,
        residual_variance: f64,
        tail: ArimaTail,
    ) -> Result<Self> {
        if ar_coeffs.len() != spec.p
            || ma_coeffs.len() != spec.q
            || tail.recent_differenced.len() != spec.p
            || tail.recent_residuals.len() != spec.q
            || tail.anchor.len() != spec.d
        {
            return Err(Error::InvalidModel(format!(
                "coefficient or tail lengths do not match ARIMA{spec}"
            )));
        }
        if residual_variance < 0.0 {
            return Err(Error::InvalidModel("negative residual variance".into()));
        }
        let finite = ar_coeffs
            .iter()
            .chain(&ma_coeffs)
            .chain(&tail.recent_differenced)
            .chain(&tail.recent_residuals)
            .chain(&tail.anchor)
            .chain([&intercept, &residual_variance])
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("ARIMA model parameters"));
        }
        let diagnostics = diagnose(&ar_coeffs, &ma_coeffs);
        Ok(Self {
            spec,
            ar_coeffs,
            ma_coeffs,
            intercept,
            residual_variance,
            tail,
            diagnostics,
        })
    }
}

/// Applies the first-difference operator `d` times.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::SeriesTooShort {
            needed: d + 1,
            available: series.len(),
        });
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Undoes `d` differences of a continuation, given the last `d`
/// original-scale observations that precede it.
pub fn integrate(diff_forecasts: &[f64], anchor_tail: &[f64], d: usize) -> Result<Vec<f64>> {
    if anchor_tail.len() != d {
        return Err(Error::InvalidModel(format!(
            "integration anchor must hold {d} values, got {}",
            anchor_tail.len()
        )));
    }
    // Last value of each difference level 0..d of the anchor.
    let last_levels: Vec<f64> = (0..d)
        .map(|m| *difference(anchor_tail, m).expect("m < d").last().expect("non-empty"))
        .collect();
    let mut out = diff_forecasts.to_vec();
    for &start in last_levels.iter().rev() {
        let mut acc = start;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    Ok(out)
}

struct Css<'a> {
    z: &'a [f64],
    p: usize,
    q: usize,
}

impl Css<'_> {
    fn residuals(&self, phi: &[f64], theta: &[f64]) -> Vec<f64> {
        let n = self.z.len();
        let mut e = vec![0.0; n];
        for t in self.p..n {
            let mut v = self.z[t];
            for (i, f) in phi.iter().enumerate() {
                v -= f * self.z[t - 1 - i];
            }
            for (j, th) in theta.iter().enumerate() {
                if t > j {
                    v -= th * e[t - 1 - j];
                }
            }
            e[t] = v;
        }
        e
    }

    fn sse(e: &[f64], p: usize) -> f64 {
        e[p..].iter().map(|v| v * v).sum()
    }

    /// Residuals and their Jacobian with respect to `[φ; θ]`.
    #[allow(clippy::needless_range_loop)]
    fn residuals_and_jacobian(&self, phi: &[f64], theta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let n = self.z.len();
        let m = self.p + self.q;
        let e = self.residuals(phi, theta);
        let mut de = vec![vec![0.0; m]; n];
        for t in self.p..n {
            for col in 0..m {
                let mut v = if col < self.p {
                    -self.z[t - 1 - col]
                } else {
                    let j = col - self.p;
                    if t > j {
                        -e[t - 1 - j]
                    } else {
                        0.0
                    }
                };
                for (l, th) in theta.iter().enumerate() {
                    if t > l {
                        v -= th * de[t - 1 - l][col];
                    }
                }
                de[t][col] = v;
            }
        }
        let rows = n - self.p;
        let jac = DMatrix::from_fn(rows, m, |r, c| de[r + self.p][c]);
        (e, jac)
    }
}

/// Least-squares AR(p) regression on a centered series, no intercept.
fn ar_least_squares(z: &[f64], p: usize) -> Vec<f64> {
    if p == 0 {
        return Vec::new();
    }
    let rows = z.len() - p;
    let x = DMatrix::from_fn(rows, p, |r, c| z[r + p - 1 - c]);
    let y = DVector::from_fn(rows, |r, _| z[r + p]);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty).iter().copied().collect(),
        None => xtx
            .lu()
            .solve(&xty)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_else(|| vec![0.0; p]),
    }
}

fn spectral_radius_exceeds_one(first_row: &[f64]) -> bool {
    let n = first_row.len();
    if n == 0 {
        return false;
    }
    let companion = DMatrix::from_fn(n, n, |r, c| {
        if r == 0 {
            first_row[c]
        } else if c + 1 == r {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .any(|ev| ev.norm() >= 1.0 - 1e-12)
}

fn diagnose(phi: &[f64], theta: &[f64]) -> Diagnostics {
    let neg_theta: Vec<f64> = theta.iter().map(|t| -t).collect();
    Diagnostics {
        nonstationary_ar: spectral_radius_exceeds_one(phi),
        noninvertible_ma: spectral_radius_exceeds_one(&neg_theta),
    }
}

/// Levenberg-Marquardt on the CSS residuals, restricted to invertible MA
/// polynomials. Returns `(φ, θ)`.
fn minimize_css(css: &Css<'_>, phi0: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (p, q) = (css.p, css.q);
    let m = p + q;
    let mut beta: Vec<f64> = phi0.into_iter().chain(std::iter::repeat_n(0.0, q)).collect();
    let split = |b: &[f64]| (b[..p].to_vec(), b[p..].to_vec());

    let (phi, theta) = split(&beta);
    let (mut e, mut jac) = css.residuals_and_jacobian(&phi, &theta);
    let mut sse = Css::sse(&e, p);
    if !sse.is_finite() {
        return Err(Error::NonFinite("CSS objective at the starting point"));
    }
    let mut damping = 1e-3;
    let mut growth = 2.0;

    for _ in 0..MAX_ITERATIONS {
        let r = DVector::from_column_slice(&e[p..]);
        let grad = jac.transpose() * &r;
        let hess = jac.transpose() * &jac;
        if grad.amax() <= 1e-14 * (1.0 + sse) {
            return Ok(split(&beta));
        }
        loop {
            let scale = DVector::from_fn(m, |k, _| hess[(k, k)] + 1e-12);
            let mut lhs = hess.clone();
            for k in 0..m {
                lhs[(k, k)] += damping * scale[k];
            }
            let step = lhs.lu().solve(&(-&grad));
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                damping *= growth;
                growth *= 2.0;
                if damping > MAX_DAMPING {
                    return Ok(split(&beta));
                }
                continue;
            };
            let candidate: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + s).collect();
            let (cphi, ctheta) = split(&candidate);
            // Smooth series can keep lowering the CSS objective as θ runs off
            // past the unit circle, so steps are kept on the invertible side.
            let invertible = !diagnose(&[], &ctheta).noninvertible_ma;
            let csse = if invertible {
                Css::sse(&css.residuals(&cphi, &ctheta), p)
            } else {
                f64::INFINITY
            };
            // Reduction predicted by the damped quadratic model.
            let predicted = step.dot(&(damping * scale.component_mul(&step) - &grad));
            if csse.is_finite() && csse < sse && predicted > 0.0 {
                let gain = (sse - csse) / predicted;
                let step_norm = step.norm();
                let beta_norm = beta.iter().map(|v| v * v).sum::<f64>().sqrt();
                let improvement = sse - csse;
                beta = candidate;
                (e, jac) = css.residuals_and_jacobian(&cphi, &ctheta);
                sse = csse;
                damping = (damping * (1.0 - (2.0 * gain - 1.0).powi(3)).max(1.0 / 3.0)).max(1e-12);
                growth = 2.0;
                if improvement <= REL_SSE_TOL * sse || step_norm <= STEP_TOL * (beta_norm + STEP_TOL) {
                    return Ok(split(&beta));
                }
                break;
            }
            damping *= growth;
            growth *= 2.0;
            if damping > MAX_DAMPING {
                // No descent direction left at working precision.
                return Ok(split(&beta));
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Fits ARIMA(p, d, q) by conditional sum of squares.
pub fn fit(series: &[f64], spec: ArimaSpec) -> Result<ArimaModel> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ARIMA input series"));
    }
    if series.len() < spec.min_series_len() {
        return Err(Error::SeriesTooShort {
            needed: spec.min_series_len(),
            available: series.len(),
        });
    }
    let w = difference(series, spec.d)?;
    let intercept = if spec.d == 0 {
        w.iter().sum::<f64>() / w.len() as f64
    } else {
        0.0
    };
    let z: Vec<f64> = w.iter().map(|v| v - intercept).collect();
    let css = Css {
        z: &z,
        p: spec.p,
        q: spec.q,
    };

    let (phi, theta) = if spec.p + spec.q == 0 {
        (Vec::new(), Vec::new())
    } else {
        minimize_css(&css, ar_least_squares(&z, spec.p))?
    };

    let e = css.residuals(&phi, &theta);
    let n_effective = z.len() - spec.p;
    let residual_variance = Css::sse(&e, spec.p) / n_effective as f64;
    if !residual_variance.is_finite() {
        return Err(Error::NonFinite("ARIMA residuals"));
    }
    let tail = ArimaTail {
        recent_differenced: w[w.len() - spec.p..].to_vec(),
        recent_residuals: e[e.len() - spec.q..].to_vec(),
        anchor: series[series.len() - spec.d..].to_vec(),
    };
    ArimaModel::from_parts(spec, phi, theta, intercept, residual_variance, tail)
}

/// Point forecasts `1..=horizon` steps ahead on the original scale, with
/// future innovations set to zero.
pub fn forecast(model: &ArimaModel, horizon: usize) -> Vec<f64> {
    let mu = model.intercept;
    let mut w_hist: Vec<f64> = model.tail.recent_differenced.iter().map(|v| v - mu).collect();
    let mut e_hist = model.tail.recent_residuals.clone();
    let mut diffs = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut v = 0.0;
        for (i, phi) in model.ar_coeffs.iter().enumerate() {
            v += phi * w_hist[w_hist.len() - 1 - i];
        }
        for (j, theta) in model.ma_coeffs.iter().enumerate() {
            v += theta * e_hist[e_hist.len() - 1 - j];
        }
        diffs.push(v + mu);
        if model.spec.p > 0 {
            w_hist.push(v);
        }
        if model.spec.q > 0 {
            e_hist.push(0.0);
        }
    }
    integrate(&diffs, &model.tail.anchor, model.spec.d).expect("anchor length matches d")
}
