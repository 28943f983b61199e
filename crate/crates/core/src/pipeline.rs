//! Experimental protocol: year splits, the NTF + GA method, the two ablation
//! baselines, seed-sensitivity sweeps and top-k ensembling.
//!
//! Factorization and every ARIMA fit only ever see slices taken before the
//! fit, so validation and test years cannot leak into a model unless the
//! refit mode explicitly folds validation into training for the test
//! forecast.

use ndarray::{s, Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arima::{self, ArimaSpec};
use crate::error::{Error, Result};
use crate::ga::{self, mean_squared_error, Chromosome, FitnessContext, FitnessKind, GaConfig, GenerationStats};
use crate::ntf::{self, NtfConfig, NtfResult};
use crate::tensor::{
    accuracy_of_values, concat_years, reconstruct_values, slice_years, totals_of_values, DemandTensor,
};

/// Added to the NTF seed to obtain the GA seed in seed-sensitivity runs.
pub const GA_SEED_OFFSET: u64 = 1_000_003;
pub const DEFAULT_SEEDS: [u64; 5] = [10, 20, 30, 42, 45];
pub const DEFAULT_TOP_K: usize = 3;
/// Fallback spec for per-series fits that fail in the no-NTF baseline.
pub const FALLBACK_SPEC: ArimaSpec = ArimaSpec::new(0, 1, 0);

/// Inclusive training, validation and test year ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: (i32, i32),
    pub validation: (i32, i32),
    pub test: (i32, i32),
}

impl SplitSpec {
    pub fn case_a2010() -> Self {
        Self {
            train: (1963, 2003),
            validation: (2004, 2009),
            test: (2010, 2015),
        }
    }

    pub fn case_a2000() -> Self {
        Self {
            train: (1963, 1993),
            validation: (1994, 1999),
            test: (2000, 2005),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("train", self.train),
            ("validation", self.validation),
            ("test", self.test),
        ];
        for (name, (a, b)) in ranges {
            if a > b {
                return Err(Error::InvalidConfig(format!("{name} range {a}..={b} is empty")));
            }
        }
        if self.validation.0 != self.train.1 + 1 || self.test.0 != self.validation.1 + 1 {
            return Err(Error::InvalidConfig(format!(
                "split ranges must be contiguous and ordered: train {:?}, validation {:?}, test {:?}",
                self.train, self.validation, self.test
            )));
        }
        Ok(())
    }

    pub fn validate_for(&self, data: &DemandTensor) -> Result<()> {
        self.validate()?;
        for year in [self.train.0, self.test.1] {
            if year < data.first_year() || year > data.last_year() {
                return Err(Error::YearOutOfRange {
                    year,
                    first: data.first_year(),
                    last: data.last_year(),
                });
            }
        }
        Ok(())
    }

    pub fn validation_len(&self) -> usize {
        (self.validation.1 - self.validation.0 + 1) as usize
    }

    pub fn test_len(&self) -> usize {
        (self.test.1 - self.test.0 + 1) as usize
    }
}

/// How the test-window forecast is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Models fit on training years forecast validation and test jointly.
    #[default]
    TrainOnly,
    /// The test forecast comes from models refit on training + validation
    /// years; validation metrics still use the training-only forecast.
    RefitTrainValidation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    pub label: String,
    pub split: SplitSpec,
    pub fitness_kind: FitnessKind,
    #[serde(default)]
    pub forecast_mode: ForecastMode,
}

impl PatternConfig {
    /// The four published patterns: `A2010`, `B2010`, `A2000`, `B2000`.
    pub fn preset(label: &str) -> Option<Self> {
        let (split, fitness_kind) = match label {
            "A2010" => (SplitSpec::case_a2010(), FitnessKind::NegTotalMse),
            "B2010" => (SplitSpec::case_a2010(), FitnessKind::ReconstructionAccuracy),
            "A2000" => (SplitSpec::case_a2000(), FitnessKind::NegTotalMse),
            "B2000" => (SplitSpec::case_a2000(), FitnessKind::ReconstructionAccuracy),
            _ => return None,
        };
        Some(Self {
            label: label.to_string(),
            split,
            fitness_kind,
            forecast_mode: ForecastMode::TrainOnly,
        })
    }
}

/// Fixed ARIMA orders used by the no-GA baseline for each published pattern.
pub fn baseline_spec_for(label: &str) -> Option<ArimaSpec> {
    match label {
        "A2010" => Some(ArimaSpec::new(3, 2, 3)),
        "B2010" => Some(ArimaSpec::new(2, 1, 3)),
        "A2000" => Some(ArimaSpec::new(3, 2, 2)),
        "B2000" => Some(ArimaSpec::new(2, 1, 2)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    WithoutNtf,
    WithoutGa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearTotals {
    pub year: i32,
    pub predicted_total: f64,
    pub actual_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub mse_total: f64,
    pub reconstruction_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: Method,
    pub pattern_label: String,
    /// MSE of annual totals over the test years, in raw squared units.
    pub mse_total: f64,
    /// Reconstruction accuracy of the test-window forecast.
    pub reconstruction_accuracy: f64,
    pub dof: usize,
    pub chromosome: Option<Chromosome>,
    /// One entry per test year.
    pub per_year: Vec<YearTotals>,
    pub seed: Option<u64>,
    pub validation: PeriodMetrics,
    pub forecast_mode: ForecastMode,
    /// Training-fit accuracy of the factorization, when one was run.
    pub ntf_train_accuracy: Option<f64>,
    /// Per-series fits in the no-NTF baseline that fell back to (0,1,0).
    pub fallbacks: Vec<String>,
}

/// A report plus the arrays behind it.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvaluationReport,
    pub predicted_validation: Array3<f64>,
    pub predicted_test: Array3<f64>,
    pub actual_test: Array3<f64>,
    pub test_years: Vec<i32>,
    pub ntf: Option<NtfResult>,
    pub ga_history: Option<Vec<GenerationStats>>,
}

struct Slices {
    train: DemandTensor,
    validation: DemandTensor,
    test: DemandTensor,
}

fn split_data(data: &DemandTensor, split: &SplitSpec) -> Result<Slices> {
    split.validate_for(data)?;
    Ok(Slices {
        train: slice_years(data, split.train.0, split.train.1)?,
        validation: slice_years(data, split.validation.0, split.validation.1)?,
        test: slice_years(data, split.test.0, split.test.1)?,
    })
}

fn period_metrics(actual: &Array3<f64>, predicted: &Array3<f64>) -> Result<PeriodMetrics> {
    let pred = totals_of_values(predicted.view());
    let truth = totals_of_values(actual.view());
    Ok(PeriodMetrics {
        mse_total: mean_squared_error(&pred, &truth),
        reconstruction_accuracy: accuracy_of_values(actual.view(), predicted.view())?,
    })
}

fn per_year_totals(years: &[i32], actual: &Array3<f64>, predicted: &Array3<f64>) -> Vec<YearTotals> {
    let pred = totals_of_values(predicted.view());
    let truth = totals_of_values(actual.view());
    years
        .iter()
        .zip(pred.iter().zip(&truth))
        .map(|(&year, (&p, &a))| YearTotals {
            year,
            predicted_total: p,
            actual_total: a,
        })
        .collect()
}

/// Sum of AR and MA orders over all genes; differencing orders are excluded.
pub fn degrees_of_freedom(chrom: &Chromosome) -> usize {
    chrom.genes.iter().map(|g| g.p + g.q).sum()
}

/// Validation and test forecasts of an NTF model under `chrom`.
fn factor_forecasts(
    slices: &Slices,
    ntf_result: &NtfResult,
    ntf_cfg: &NtfConfig,
    chrom: &Chromosome,
    mode: ForecastMode,
) -> Result<(Array3<f64>, Array3<f64>)> {
    let model = &ntf_result.model;
    let n_val = slices.validation.dims().2;
    let n_test = slices.test.dims().2;
    let c_hat = ga::forecast_factor_columns(model.factor_c().view(), chrom, n_val + n_test)?;
    let (a, b) = (model.factor_a(), model.factor_b());
    let val = reconstruct_values(a, b, &c_hat.slice(s![..n_val, ..]).to_owned());
    let test = match mode {
        ForecastMode::TrainOnly => reconstruct_values(a, b, &c_hat.slice(s![n_val.., ..]).to_owned()),
        ForecastMode::RefitTrainValidation => {
            let joined = concat_years(&slices.train, &slices.validation)?;
            let refit = ntf::factorize(&joined, ntf_cfg)?.model;
            let c_test = ga::forecast_factor_columns(refit.factor_c().view(), chrom, n_test)?;
            reconstruct_values(refit.factor_a(), refit.factor_b(), &c_test)
        }
    };
    Ok((val, test))
}

fn build_outcome(
    method: Method,
    pattern: &PatternConfig,
    slices: &Slices,
    predicted_validation: Array3<f64>,
    predicted_test: Array3<f64>,
) -> Result<RunOutcome> {
    let actual_test = slices.test.values().clone();
    let test_metrics = period_metrics(&actual_test, &predicted_test)?;
    let validation = period_metrics(slices.validation.values(), &predicted_validation)?;
    let test_years = slices.test.year_labels().to_vec();
    let report = EvaluationReport {
        method,
        pattern_label: pattern.label.clone(),
        mse_total: test_metrics.mse_total,
        reconstruction_accuracy: test_metrics.reconstruction_accuracy,
        dof: 0,
        chromosome: None,
        per_year: per_year_totals(&test_years, &actual_test, &predicted_test),
        seed: None,
        validation,
        forecast_mode: pattern.forecast_mode,
        ntf_train_accuracy: None,
        fallbacks: Vec::new(),
    };
    Ok(RunOutcome {
        report,
        predicted_validation,
        predicted_test,
        actual_test,
        test_years,
        ntf: None,
        ga_history: None,
    })
}

fn run_with_chromosome(
    method: Method,
    pattern: &PatternConfig,
    slices: &Slices,
    ntf_cfg: &NtfConfig,
    ntf_result: NtfResult,
    chrom: Chromosome,
) -> Result<RunOutcome> {
    let (val, test) = factor_forecasts(slices, &ntf_result, ntf_cfg, &chrom, pattern.forecast_mode)?;
    let mut outcome = build_outcome(method, pattern, slices, val, test)?;
    outcome.report.dof = degrees_of_freedom(&chrom);
    outcome.report.chromosome = Some(chrom);
    outcome.report.seed = Some(ntf_cfg.seed);
    outcome.report.ntf_train_accuracy = Some(ntf_result.final_accuracy);
    outcome.ntf = Some(ntf_result);
    Ok(outcome)
}

/// NTF on the training years, GA over ARIMA orders scored on validation,
/// then forecasts of the winning chromosome scored on the test years.
pub fn run_proposed(
    data: &DemandTensor,
    pattern: &PatternConfig,
    ntf_cfg: &NtfConfig,
    ga_cfg: &GaConfig,
) -> Result<RunOutcome> {
    ga_cfg.validate()?;
    let slices = split_data(data, &pattern.split)?;
    let ntf_result = ntf::factorize(&slices.train, ntf_cfg)?;
    let ctx = FitnessContext::new(&ntf_result.model, &slices.validation, pattern.fitness_kind)?;
    let evolution = ga::evolve(ga_cfg, &ctx)?;
    if !evolution.best_fitness.is_finite() {
        return Err(Error::NoViableChromosome);
    }
    log::debug!(
        "pattern {}: best chromosome {} with fitness {}",
        pattern.label,
        evolution.best,
        evolution.best_fitness
    );
    let mut outcome = run_with_chromosome(Method::Proposed, pattern, &slices, ntf_cfg, ntf_result, evolution.best)?;
    outcome.ga_history = Some(evolution.history);
    Ok(outcome)
}

/// NTF with every factor forecast by the same fixed ARIMA spec.
pub fn run_without_ga(
    data: &DemandTensor,
    pattern: &PatternConfig,
    ntf_cfg: &NtfConfig,
    fixed_spec: ArimaSpec,
) -> Result<RunOutcome> {
    let slices = split_data(data, &pattern.split)?;
    let ntf_result = ntf::factorize(&slices.train, ntf_cfg)?;
    let chrom = Chromosome::uniform(fixed_spec, ntf_cfg.rank);
    run_with_chromosome(Method::WithoutGa, pattern, &slices, ntf_cfg, ntf_result, chrom)
}

/// Fits `spec` to one series and forecasts `horizon` steps, falling back to a
/// flat (0,1,0) forecast when the fit or forecast fails.
fn forecast_series(series: &[f64], spec: ArimaSpec, horizon: usize) -> Result<(Vec<f64>, Option<String>)> {
    let attempt = arima::fit(series, spec).and_then(|m| {
        let f = arima::forecast(&m, horizon);
        if f.iter().all(|v| v.is_finite()) {
            Ok(f)
        } else {
            Err(Error::NonFinite("series forecast"))
        }
    });
    match attempt {
        Ok(f) => Ok((f, None)),
        Err(e) => {
            let fallback = arima::fit(series, FALLBACK_SPEC)?;
            Ok((arima::forecast(&fallback, horizon), Some(e.to_string())))
        }
    }
}

/// One ARIMA per (utility, industry) series, no factorization.
pub fn run_without_ntf(data: &DemandTensor, pattern: &PatternConfig, fixed_spec: ArimaSpec) -> Result<RunOutcome> {
    let slices = split_data(data, &pattern.split)?;
    let (ni, nj, _) = data.dims();
    let n_val = slices.validation.dims().2;
    let n_test = slices.test.dims().2;
    let refit = match pattern.forecast_mode {
        ForecastMode::TrainOnly => None,
        ForecastMode::RefitTrainValidation => Some(concat_years(&slices.train, &slices.validation)?),
    };

    type Cell = (usize, usize, Vec<f64>, Vec<f64>, Vec<String>, usize);
    let cells: Vec<(usize, usize)> = (0..ni).flat_map(|i| (0..nj).map(move |j| (i, j))).collect();
    let results: Vec<Cell> = cells
        .par_iter()
        .map(|&(i, j)| -> Result<Cell> {
            let mut notes = Vec::new();
            let mut dof = fixed_spec.p + fixed_spec.q;
            let series = slices.train.series(i, j);
            let (joint, failure) = forecast_series(&series, fixed_spec, n_val + n_test)?;
            if let Some(reason) = failure {
                dof = 0;
                notes.push(format!(
                    "{}/{}: {reason}",
                    data.utility_labels()[i],
                    data.industry_labels()[j]
                ));
            }
            let val = joint[..n_val].to_vec();
            let test = match &refit {
                None => joint[n_val..].to_vec(),
                Some(joined) => {
                    let (f, failure) = forecast_series(&joined.series(i, j), fixed_spec, n_test)?;
                    if let Some(reason) = failure {
                        notes.push(format!(
                            "{}/{} (refit): {reason}",
                            data.utility_labels()[i],
                            data.industry_labels()[j]
                        ));
                    }
                    f
                }
            };
            Ok((i, j, val, test, notes, dof))
        })
        .collect::<Result<_>>()?;

    let mut pred_val = Array3::zeros((ni, nj, n_val));
    let mut pred_test = Array3::zeros((ni, nj, n_test));
    let mut fallbacks = Vec::new();
    let mut dof = 0;
    for (i, j, val, test, notes, cell_dof) in results {
        for (k, v) in val.into_iter().enumerate() {
            pred_val[[i, j, k]] = v;
        }
        for (k, v) in test.into_iter().enumerate() {
            pred_test[[i, j, k]] = v;
        }
        for note in &notes {
            log::warn!("no-NTF baseline fallback to {FALLBACK_SPEC}: {note}");
        }
        fallbacks.extend(notes);
        dof += cell_dof;
    }

    let mut outcome = build_outcome(Method::WithoutNtf, pattern, &slices, pred_val, pred_test)?;
    outcome.report.dof = dof;
    outcome.report.fallbacks = fallbacks;
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub validation_accuracy: f64,
    pub outcome: RunOutcome,
}

/// Runs the full method once per seed. The NTF seed is the listed seed and the
/// GA seed is `seed + GA_SEED_OFFSET`. Output is sorted by validation accuracy,
/// best first; ties keep input order.
pub fn seed_sensitivity(
    data: &DemandTensor,
    pattern: &PatternConfig,
    ntf_cfg: &NtfConfig,
    ga_cfg: &GaConfig,
    seeds: &[u64],
) -> Result<Vec<SeedRun>> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("seed list is empty".into()));
    }
    for (n, s) in seeds.iter().enumerate() {
        if seeds[..n].contains(s) {
            return Err(Error::InvalidConfig(format!("seed {s} listed twice")));
        }
    }
    let mut runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&seed| {
            let ntf_seeded = NtfConfig { seed, ..*ntf_cfg };
            let ga_seeded = GaConfig {
                seed: seed.wrapping_add(GA_SEED_OFFSET),
                ..*ga_cfg
            };
            run_proposed(data, pattern, &ntf_seeded, &ga_seeded).map(|outcome| SeedRun {
                seed,
                validation_accuracy: outcome.report.validation.reconstruction_accuracy,
                outcome,
            })
        })
        .collect::<Result<_>>()?;
    runs.sort_by(|a, b| b.validation_accuracy.total_cmp(&a.validation_accuracy));
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub pattern_label: String,
    pub k: usize,
    /// Seeds of the averaged runs, best validation accuracy first.
    pub seeds: Vec<u64>,
    pub mse_total: f64,
    pub reconstruction_accuracy: f64,
    pub per_year: Vec<YearTotals>,
}

#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub report: EnsembleReport,
    pub predicted_test: Array3<f64>,
}

/// Element-wise mean of the test forecasts of the `k` runs with the highest
/// validation accuracy.
pub fn ensemble_topk(results: &[SeedRun], k: usize) -> Result<EnsembleOutcome> {
    if k == 0 || k > results.len() {
        return Err(Error::InvalidConfig(format!(
            "ensemble size {k} outside 1..={}",
            results.len()
        )));
    }
    let mut ranked: Vec<&SeedRun> = results.iter().collect();
    ranked.sort_by(|a, b| b.validation_accuracy.total_cmp(&a.validation_accuracy));
    let members = &ranked[..k];

    let first = &members[0].outcome;
    let shape = first.predicted_test.raw_dim();
    if members.iter().any(|m| m.outcome.predicted_test.raw_dim() != shape) {
        return Err(Error::InvalidConfig("ensemble members have different shapes".into()));
    }
    let stacked: Vec<_> = members.iter().map(|m| m.outcome.predicted_test.view()).collect();
    let stacked = ndarray::stack(Axis(3), &stacked).expect("shapes checked above");
    let predicted = stacked.map_axis(Axis(3), |lane| {
        let mean = lane.sum() / k as f64;
        let lo = lane.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = lane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // The exact mean lies in [lo, hi]; keep rounding from leaving it.
        mean.clamp(lo, hi)
    });

    let metrics = period_metrics(&first.actual_test, &predicted)?;
    let report = EnsembleReport {
        pattern_label: first.report.pattern_label.clone(),
        k,
        seeds: members.iter().map(|m| m.seed).collect(),
        mse_total: metrics.mse_total,
        reconstruction_accuracy: metrics.reconstruction_accuracy,
        per_year: per_year_totals(&first.test_years, &first.actual_test, &predicted),
    };
    Ok(EnsembleOutcome {
        report,
        predicted_test: predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::OrderBounds;
    use crate::tensor::reconstruct_values;
    use ndarray::Array2;

    fn g(p: usize, d: usize, q: usize) -> ArimaSpec {
        ArimaSpec::new(p, d, q)
    }

    fn small_ga() -> GaConfig {
        GaConfig {
            population_size: 10,
            generations: 4,
            bounds: OrderBounds {
                p_max: 2,
                d_max: 1,
                q_max: 1,
            },
            ..GaConfig::default()
        }
    }

    fn small_ntf() -> NtfConfig {
        NtfConfig {
            rank: 2,
            iterations: 40,
            seed: 10,
            ..NtfConfig::default()
        }
    }

    /// Rank-2 tensor whose annual factors are a straight line and a constant.
    fn linear_tensor(k: usize) -> DemandTensor {
        let a = Array2::from_shape_fn((3, 2), |(i, r)| 1.0 + (i * 2 + r) as f64);
        let b = Array2::from_shape_fn((2, 2), |(j, r)| 0.5 + (j + r) as f64);
        let c = Array2::from_shape_fn((k, 2), |(t, r)| if r == 0 { 10.0 + t as f64 } else { 5.0 });
        DemandTensor::from_values(reconstruct_values(&a, &b, &c), 1990).unwrap()
    }

    fn pattern(train: usize, val: usize, test: usize) -> PatternConfig {
        let t0 = 1990;
        PatternConfig {
            label: "synthetic".into(),
            split: SplitSpec {
                train: (t0, t0 + train as i32 - 1),
                validation: (t0 + train as i32, t0 + (train + val) as i32 - 1),
                test: (t0 + (train + val) as i32, t0 + (train + val + test) as i32 - 1),
            },
            fitness_kind: FitnessKind::NegTotalMse,
            forecast_mode: ForecastMode::TrainOnly,
        }
    }

    #[test]
    fn presets_and_baseline_specs() {
        let a2010 = PatternConfig::preset("A2010").unwrap();
        assert_eq!(a2010.split, SplitSpec::case_a2010());
        assert_eq!(a2010.fitness_kind, FitnessKind::NegTotalMse);
        let b2000 = PatternConfig::preset("B2000").unwrap();
        assert_eq!(b2000.split, SplitSpec::case_a2000());
        assert_eq!(b2000.fitness_kind, FitnessKind::ReconstructionAccuracy);
        assert!(PatternConfig::preset("C1999").is_none());

        assert_eq!(baseline_spec_for("A2010"), Some(g(3, 2, 3)));
        assert_eq!(baseline_spec_for("B2010"), Some(g(2, 1, 3)));
        assert_eq!(baseline_spec_for("A2000"), Some(g(3, 2, 2)));
        assert_eq!(baseline_spec_for("B2000"), Some(g(2, 1, 2)));
    }

    #[test]
    fn split_validation() {
        assert!(SplitSpec::case_a2010().validate().is_ok());
        let gap = SplitSpec {
            train: (1963, 2000),
            validation: (2002, 2005),
            test: (2006, 2008),
        };
        assert!(gap.validate().is_err());
        let overlap = SplitSpec {
            train: (1963, 2003),
            validation: (2003, 2005),
            test: (2006, 2008),
        };
        assert!(overlap.validate().is_err());
        let data = linear_tensor(20);
        assert!(matches!(
            SplitSpec::case_a2000().validate_for(&data),
            Err(Error::YearOutOfRange { .. })
        ));
    }

    #[test]
    fn dof_sums_ar_and_ma_orders() {
        // Σp = 25, Σq = 21 over eight genes.
        let ps = [4, 3, 3, 3, 3, 3, 3, 3];
        let qs = [3, 3, 3, 3, 3, 2, 2, 2];
        let chrom = Chromosome::new(ps.iter().zip(qs).map(|(&p, q)| g(p, 2, q)).collect());
        assert_eq!(degrees_of_freedom(&chrom), 46);
        assert_eq!(degrees_of_freedom(&Chromosome::uniform(g(0, 2, 0), 8)), 0);
        let mut reversed = chrom.clone();
        reversed.genes.reverse();
        assert_eq!(degrees_of_freedom(&reversed), 46);
    }

    #[test]
    fn perfect_continuation_scores_perfectly() {
        let data = linear_tensor(30);
        let pat = pattern(20, 5, 5);
        // Factor columns are exactly linear and constant; (0,2,0) reproduces both.
        let out = run_without_ga(
            &data,
            &pat,
            &NtfConfig {
                iterations: 5000,
                ..small_ntf()
            },
            g(0, 2, 0),
        )
        .unwrap();
        let rel = out.report.mse_total.sqrt() / out.report.per_year[0].actual_total;
        assert!(rel < 1e-3, "relative total error {rel}");
        assert!(
            out.report.reconstruction_accuracy > 0.999,
            "{}",
            out.report.reconstruction_accuracy
        );
    }

    #[test]
    fn without_ntf_on_constant_tensor_is_exact() {
        let data = DemandTensor::from_values(Array3::from_elem((2, 3, 25), 7.5), 1990).unwrap();
        let out = run_without_ntf(&data, &pattern(15, 5, 5), g(0, 1, 0)).unwrap();
        assert_eq!(out.report.mse_total, 0.0);
        assert_eq!(out.report.reconstruction_accuracy, 1.0);
        assert_eq!(out.report.method, Method::WithoutNtf);
        assert!(out.report.fallbacks.is_empty());
    }

    #[test]
    fn without_ntf_single_cell_equals_direct_forecast() {
        let values = Array3::from_shape_fn((1, 1, 30), |(_, _, k)| 3.0 + (k as f64 * 0.7).sin() + 0.1 * k as f64);
        let data = DemandTensor::from_values(values.clone(), 1990).unwrap();
        let spec = g(1, 1, 1);
        let out = run_without_ntf(&data, &pattern(20, 5, 5), spec).unwrap();
        let series: Vec<f64> = values.iter().take(20).copied().collect();
        let direct = arima::forecast(&arima::fit(&series, spec).unwrap(), 10);
        let got: Vec<f64> = out.predicted_test.iter().copied().collect();
        assert_eq!(got, direct[5..].to_vec());
        assert_eq!(out.report.dof, 2);
    }

    #[test]
    fn without_ntf_falls_back_on_short_series() {
        // 12 training years cannot host (3,2,3) but can host (0,1,0).
        let data = linear_tensor(22);
        let out = run_without_ntf(&data, &pattern(12, 5, 5), g(3, 2, 3)).unwrap();
        assert_eq!(out.report.fallbacks.len(), 6);
        assert_eq!(out.report.dof, 0);
    }

    #[test]
    fn report_totals_are_self_consistent() {
        let data = linear_tensor(30);
        let out = run_proposed(&data, &pattern(20, 5, 5), &small_ntf(), &small_ga()).unwrap();
        let r = &out.report;
        let mse = r
            .per_year
            .iter()
            .map(|y| (y.predicted_total - y.actual_total).powi(2))
            .sum::<f64>()
            / r.per_year.len() as f64;
        assert!((mse - r.mse_total).abs() <= 1e-9 * r.mse_total.max(1e-300));
        assert_eq!(
            r.per_year.iter().map(|y| y.year).collect::<Vec<_>>(),
            (2015..2020).collect::<Vec<_>>()
        );
        assert_eq!(r.dof, degrees_of_freedom(r.chromosome.as_ref().unwrap()));
        assert_eq!(r.seed, Some(10));
        assert_eq!(out.ga_history.as_ref().unwrap().len(), 4);
    }

    #[test]
    fn proposed_is_deterministic() {
        let data = linear_tensor(30);
        let pat = pattern(20, 5, 5);
        let r1 = run_proposed(&data, &pat, &small_ntf(), &small_ga()).unwrap();
        let r2 = run_proposed(&data, &pat, &small_ntf(), &small_ga()).unwrap();
        assert_eq!(r1.report, r2.report);
        assert_eq!(r1.predicted_test, r2.predicted_test);
    }

    #[test]
    fn without_ga_matches_proposed_on_same_chromosome() {
        let data = linear_tensor(30);
        let pat = pattern(20, 5, 5);
        let proposed = run_proposed(&data, &pat, &small_ntf(), &small_ga()).unwrap();
        let chrom = proposed.report.chromosome.clone().unwrap();
        let spec = chrom.genes[0];
        if chrom.genes.iter().all(|g| *g == spec) {
            let fixed = run_without_ga(&data, &pat, &small_ntf(), spec).unwrap();
            assert_eq!(fixed.predicted_test, proposed.predicted_test);
            assert_eq!(fixed.report.mse_total, proposed.report.mse_total);
        }
        // Force the coincidence directly through the shared path.
        let slices = split_data(&data, &pat.split).unwrap();
        let ntf_result = ntf::factorize(&slices.train, &small_ntf()).unwrap();
        let uniform = Chromosome::uniform(g(1, 1, 0), 2);
        let a = run_with_chromosome(Method::Proposed, &pat, &slices, &small_ntf(), ntf_result, uniform).unwrap();
        let b = run_without_ga(&data, &pat, &small_ntf(), g(1, 1, 0)).unwrap();
        assert_eq!(a.predicted_test, b.predicted_test);
        assert_eq!(a.report.mse_total, b.report.mse_total);
        assert_eq!(a.report.reconstruction_accuracy, b.report.reconstruction_accuracy);
    }

    #[test]
    fn test_years_do_not_leak_into_fits() {
        let data = linear_tensor(30);
        let pat = pattern(20, 5, 5);
        let mut perturbed = data.values().clone();
        perturbed.slice_mut(s![.., .., 25..]).mapv_inplace(|v| v * 3.0 + 1.0);
        let perturbed = DemandTensor::from_values(perturbed, 1990).unwrap();

        let a = run_proposed(&data, &pat, &small_ntf(), &small_ga()).unwrap();
        let b = run_proposed(&perturbed, &pat, &small_ntf(), &small_ga()).unwrap();
        assert_eq!(a.ntf.as_ref().unwrap().model, b.ntf.as_ref().unwrap().model);
        assert_eq!(a.report.chromosome, b.report.chromosome);
        assert_eq!(a.predicted_test, b.predicted_test);
        assert_eq!(a.report.validation, b.report.validation);
        assert_ne!(a.report.mse_total, b.report.mse_total);
    }

    #[test]
    fn refit_mode_uses_validation_years() {
        let data = linear_tensor(30);
        let mut pat = pattern(20, 5, 5);
        pat.forecast_mode = ForecastMode::RefitTrainValidation;
        let out = run_without_ntf(&data, &pat, g(0, 1, 0)).unwrap();
        // A flat forecast from the last validation year.
        let last_val = data.series(0, 0)[24];
        assert!(out.predicted_test.slice(s![0, 0, ..]).iter().all(|&v| v == last_val));
        let fixed = run_without_ga(&data, &pat, &small_ntf(), g(0, 2, 0)).unwrap();
        assert_eq!(fixed.report.forecast_mode, ForecastMode::RefitTrainValidation);
    }

    #[test]
    fn seeds_are_sorted_and_ensembles_bounded() {
        let data = linear_tensor(30);
        let pat = pattern(20, 5, 5);
        let runs = seed_sensitivity(&data, &pat, &small_ntf(), &small_ga(), &[10, 20, 30]).unwrap();
        assert_eq!(runs.len(), 3);
        for w in runs.windows(2) {
            assert!(w[0].validation_accuracy >= w[1].validation_accuracy);
        }

        let top1 = ensemble_topk(&runs, 1).unwrap();
        assert_eq!(top1.predicted_test, runs[0].outcome.predicted_test);
        assert_eq!(top1.report.mse_total, runs[0].outcome.report.mse_total);

        let top3 = ensemble_topk(&runs, 3).unwrap();
        for ((idx, &v), _) in top3.predicted_test.indexed_iter().zip(0..) {
            let vals: Vec<f64> = runs.iter().map(|r| r.outcome.predicted_test[idx]).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= v && v <= hi);
        }
        assert!(ensemble_topk(&runs, 0).is_err());
        assert!(ensemble_topk(&runs, 4).is_err());
    }

    #[test]
    fn single_seed_matches_run_proposed() {
        let data = linear_tensor(30);
        let pat = pattern(20, 5, 5);
        let runs = seed_sensitivity(&data, &pat, &small_ntf(), &small_ga(), &[42]).unwrap();
        let direct = run_proposed(
            &data,
            &pat,
            &NtfConfig {
                seed: 42,
                ..small_ntf()
            },
            &GaConfig {
                seed: 42 + GA_SEED_OFFSET,
                ..small_ga()
            },
        )
        .unwrap();
        assert_eq!(runs[0].outcome.report, direct.report);
        assert!(seed_sensitivity(&data, &pat, &small_ntf(), &small_ga(), &[]).is_err());
        assert!(seed_sensitivity(&data, &pat, &small_ntf(), &small_ga(), &[1, 1]).is_err());
    }

    #[test]
    fn identical_members_average_to_themselves() {
        let data = linear_tensor(30);
        let pat = pattern(20, 5, 5);
        let run = seed_sensitivity(&data, &pat, &small_ntf(), &small_ga(), &[10])
            .unwrap()
            .remove(0);
        let copies: Vec<SeedRun> = (0..3).map(|n| SeedRun { seed: n, ..run.clone() }).collect();
        let ens = ensemble_topk(&copies, 3).unwrap();
        assert_eq!(ens.predicted_test, run.outcome.predicted_test);
    }
}
