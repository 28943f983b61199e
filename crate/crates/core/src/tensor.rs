//! Dense third-order consumption tensors and rank-R CP models.

use ndarray::{s, Array2, Array3, ArrayView3, Axis};

use crate::error::{Error, Result};

/// Non-negative utility × industry × year tensor with axis labels.
///
/// Years are consecutive calendar years; the year axis is the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTensor {
    values: Array3<f64>,
    utility_labels: Vec<String>,
    industry_labels: Vec<String>,
    year_labels: Vec<i32>,
}

impl DemandTensor {
    pub fn new(
        values: Array3<f64>,
        utility_labels: Vec<String>,
        industry_labels: Vec<String>,
        year_labels: Vec<i32>,
    ) -> Result<Self> {
        let (i, j, k) = values.dim();
        if i == 0 || j == 0 || k == 0 {
            return Err(Error::InvalidTensor(format!(
                "every dimension must be positive, got ({i}, {j}, {k})"
            )));
        }
        if utility_labels.len() != i || industry_labels.len() != j || year_labels.len() != k {
            return Err(Error::InvalidTensor(format!(
                "label lengths ({}, {}, {}) do not match dims ({i}, {j}, {k})",
                utility_labels.len(),
                industry_labels.len(),
                year_labels.len()
            )));
        }
        if let Some(w) = year_labels.windows(2).find(|w| w[1] != w[0] + 1) {
            return Err(Error::InvalidTensor(format!(
                "years must be consecutive, found {} followed by {}",
                w[0], w[1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidTensor(format!(
                "values must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self {
            values,
            utility_labels,
            industry_labels,
            year_labels,
        })
    }

    /// Builds a tensor with generated labels (`U1`.., `I1`..) and years
    /// starting at `first_year`.
    pub fn from_values(values: Array3<f64>, first_year: i32) -> Result<Self> {
        let (i, j, k) = values.dim();
        let utilities = (1..=i).map(|n| format!("U{n}")).collect();
        let industries = (1..=j).map(|n| format!("I{n}")).collect();
        let years = (0..k as i32).map(|n| first_year + n).collect();
        Self::new(values, utilities, industries, years)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array3<f64> {
        self.values
    }

    pub fn utility_labels(&self) -> &[String] {
        &self.utility_labels
    }

    pub fn industry_labels(&self) -> &[String] {
        &self.industry_labels
    }

    pub fn year_labels(&self) -> &[i32] {
        &self.year_labels
    }

    pub fn first_year(&self) -> i32 {
        self.year_labels[0]
    }

    pub fn last_year(&self) -> i32 {
        self.year_labels[self.year_labels.len() - 1]
    }

    /// Series of one (utility, industry) cell across all years.
    pub fn series(&self, utility: usize, industry: usize) -> Vec<f64> {
        self.values.slice(s![utility, industry, ..]).to_vec()
    }

    /// Copies the labels of `template` onto `values`, which must have the
    /// template's utility/industry dims. Years start at the template's first
    /// year unless `first_year` is given.
    pub fn relabeled(values: Array3<f64>, template: &DemandTensor, first_year: Option<i32>) -> Result<Self> {
        let (i, j, k) = values.dim();
        let (ti, tj, _) = template.dims();
        if (i, j) != (ti, tj) {
            return Err(Error::DimensionMismatch {
                expected: (ti, tj, k),
                found: (i, j, k),
            });
        }
        let start = first_year.unwrap_or(template.first_year());
        Self::new(
            values,
            template.utility_labels.clone(),
            template.industry_labels.clone(),
            (0..k as i32).map(|n| start + n).collect(),
        )
    }

    fn year_index(&self, year: i32) -> Result<usize> {
        let first = self.first_year();
        let last = self.last_year();
        if year < first || year > last {
            return Err(Error::YearOutOfRange { year, first, last });
        }
        Ok((year - first) as usize)
    }
}

/// Rank-R CP model: `X̃[i,j,k] = Σ_r A[i,r]·B[j,r]·C[k,r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    factor_a: Array2<f64>,
    factor_b: Array2<f64>,
    factor_c: Array2<f64>,
}

impl CpModel {
    pub fn new(factor_a: Array2<f64>, factor_b: Array2<f64>, factor_c: Array2<f64>) -> Result<Self> {
        let rank = factor_a.ncols();
        if rank == 0 || factor_b.ncols() != rank || factor_c.ncols() != rank {
            return Err(Error::InvalidModel(format!(
                "factor column counts differ or are zero: ({}, {}, {})",
                factor_a.ncols(),
                factor_b.ncols(),
                factor_c.ncols()
            )));
        }
        if factor_a.nrows() == 0 || factor_b.nrows() == 0 || factor_c.nrows() == 0 {
            return Err(Error::InvalidModel("factor with zero rows".into()));
        }
        let all = factor_a.iter().chain(factor_b.iter()).chain(factor_c.iter());
        if let Some(v) = all.into_iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidModel(format!(
                "factor entries must be finite and non-negative, found {v}"
            )));
        }
        Ok(Self {
            factor_a,
            factor_b,
            factor_c,
        })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts_unchecked(a: Array2<f64>, b: Array2<f64>, c: Array2<f64>) -> Self {
        Self {
            factor_a: a,
            factor_b: b,
            factor_c: c,
        }
    }

    pub fn rank(&self) -> usize {
        self.factor_a.ncols()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.factor_a.nrows(), self.factor_b.nrows(), self.factor_c.nrows())
    }

    pub fn factor_a(&self) -> &Array2<f64> {
        &self.factor_a
    }

    pub fn factor_b(&self) -> &Array2<f64> {
        &self.factor_b
    }

    pub fn factor_c(&self) -> &Array2<f64> {
        &self.factor_c
    }

    pub fn into_factors(self) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        (self.factor_a, self.factor_b, self.factor_c)
    }
}

/// Dense reconstruction `Σ_r a_r ∘ b_r ∘ c_r` as a raw array.
///
/// `factor_c` may hold negative entries here (forecast factors are not
/// constrained), so this does not go through [`DemandTensor`] validation.
pub fn reconstruct_values(a: &Array2<f64>, b: &Array2<f64>, c: &Array2<f64>) -> Array3<f64> {
    let (ni, nj, nk, rank) = (a.nrows(), b.nrows(), c.nrows(), a.ncols());
    let mut out = Array3::<f64>::zeros((ni, nj, nk));
    for i in 0..ni {
        for j in 0..nj {
            let mut lane = out.slice_mut(s![i, j, ..]);
            for r in 0..rank {
                let ab = a[[i, r]] * b[[j, r]];
                if ab == 0.0 {
                    continue;
                }
                for (k, x) in lane.iter_mut().enumerate() {
                    *x += ab * c[[k, r]];
                }
            }
        }
    }
    out
}

/// Reconstructs the tensor of a CP model. Labels are generated and the year
/// axis starts at 0; use [`DemandTensor::relabeled`] to attach real labels.
pub fn reconstruct(model: &CpModel) -> DemandTensor {
    let values = reconstruct_values(&model.factor_a, &model.factor_b, &model.factor_c);
    DemandTensor::from_values(values, 0).expect("non-negative factors give a valid tensor")
}

pub(crate) fn frobenius_norm_view(values: ArrayView3<'_, f64>) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn frobenius_norm(t: &DemandTensor) -> f64 {
    frobenius_norm_view(t.values.view())
}

/// `α = 1 − ‖X − X̂‖_F / ‖X‖_F`, unclamped (negative when the error exceeds
/// the data norm).
pub fn accuracy_of_values(x: ArrayView3<'_, f64>, x_hat: ArrayView3<'_, f64>) -> Result<f64> {
    if x.dim() != x_hat.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: x_hat.dim(),
        });
    }
    let norm = frobenius_norm_view(x);
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let err = x
        .iter()
        .zip(x_hat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(1.0 - err / norm)
}

pub fn reconstruction_accuracy(x: &DemandTensor, x_hat: &DemandTensor) -> Result<f64> {
    accuracy_of_values(x.values.view(), x_hat.values.view())
}

/// Inclusive year range `first_year..=last_year`.
pub fn slice_years(t: &DemandTensor, first_year: i32, last_year: i32) -> Result<DemandTensor> {
    if first_year > last_year {
        return Err(Error::InvalidTensor(format!(
            "empty year range {first_year}..={last_year}"
        )));
    }
    let lo = t.year_index(first_year)?;
    let hi = t.year_index(last_year)?;
    Ok(DemandTensor {
        values: t.values.slice(s![.., .., lo..=hi]).to_owned(),
        utility_labels: t.utility_labels.clone(),
        industry_labels: t.industry_labels.clone(),
        year_labels: t.year_labels[lo..=hi].to_vec(),
    })
}

/// Appends `later` to `earlier` along the year axis. The year ranges must be
/// adjacent and the utility/industry labels identical.
pub fn concat_years(earlier: &DemandTensor, later: &DemandTensor) -> Result<DemandTensor> {
    if earlier.utility_labels != later.utility_labels || earlier.industry_labels != later.industry_labels {
        return Err(Error::InvalidTensor(
            "cannot concatenate tensors with different labels".into(),
        ));
    }
    if later.first_year() != earlier.last_year() + 1 {
        return Err(Error::InvalidTensor(format!(
            "year ranges are not adjacent: {} then {}",
            earlier.last_year(),
            later.first_year()
        )));
    }
    let values = ndarray::concatenate(Axis(2), &[earlier.values.view(), later.values.view()])
        .expect("utility/industry dims agree");
    let mut years = earlier.year_labels.clone();
    years.extend_from_slice(&later.year_labels);
    Ok(DemandTensor {
        values,
        utility_labels: earlier.utility_labels.clone(),
        industry_labels: earlier.industry_labels.clone(),
        year_labels: years,
    })
}

pub(crate) fn totals_of_values(values: ArrayView3<'_, f64>) -> Vec<f64> {
    let nk = values.dim().2;
    (0..nk).map(|k| values.slice(s![.., .., k]).iter().sum()).collect()
}

/// Per-year total `Σ_{i,j} X[i,j,k]`.
pub fn annual_totals(t: &DemandTensor) -> Vec<f64> {
    totals_of_values(t.values.view())
}
