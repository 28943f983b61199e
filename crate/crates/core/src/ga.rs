//! Genetic search over per-factor ARIMA orders.
//!
//! A chromosome is the concatenation `[p₁,d₁,q₁,…,p_R,d_R,q_R]`, stored as R
//! [`ArimaSpec`] genes. Variation never splits a (p, d, q) triple. All
//! randomness comes from one seeded stream consumed sequentially by the
//! variation operators; fitness evaluation draws nothing from it and may run
//! in parallel.

use std::collections::HashMap;

use ndarray::{Array2, Array3, ArrayView2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arima::{self, ArimaSpec, OrderBounds};
use crate::error::{Error, Result};
use crate::tensor::{accuracy_of_values, reconstruct_values, totals_of_values, CpModel, DemandTensor};

/// Fitness assigned to chromosomes whose models cannot be fit or forecast.
pub const WORST_FITNESS: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Chromosome {
    pub genes: Vec<ArimaSpec>,
}

impl Chromosome {
    pub fn new(genes: Vec<ArimaSpec>) -> Self {
        Self { genes }
    }

    /// `rank` copies of one spec.
    pub fn uniform(spec: ArimaSpec, rank: usize) -> Self {
        Self {
            genes: vec![spec; rank],
        }
    }

    pub fn random<R: Rng>(rank: usize, bounds: &OrderBounds, rng: &mut R) -> Self {
        let genes = (0..rank)
            .map(|_| {
                let p = rng.random_range(0..=bounds.p_max);
                let d = rng.random_range(0..=bounds.d_max);
                let q = rng.random_range(0..=bounds.q_max);
                ArimaSpec::new(p, d, q)
            })
            .collect();
        Self { genes }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn within(&self, bounds: &OrderBounds) -> bool {
        self.genes.iter().all(|g| g.within(bounds))
    }

    /// Flat `[p₁,d₁,q₁,…]` encoding.
    pub fn to_flat(&self) -> Vec<usize> {
        self.genes.iter().flat_map(|g| [g.p, g.d, g.q]).collect()
    }
}

impl std::fmt::Display for Chromosome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.genes.iter().map(|g| g.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    /// Number of evaluated populations, the random initial one included.
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob_per_gene: f64,
    pub bounds: OrderBounds,
    pub seed: u64,
    pub elitism_count: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            generations: 60,
            tournament_size: 3,
            crossover_prob: 0.9,
            mutation_prob_per_gene: 0.15,
            bounds: OrderBounds::default(),
            seed: 10,
            elitism_count: 2,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.population_size == 0 || self.generations == 0 {
            return fail("ga population_size and generations must be at least 1".into());
        }
        if self.tournament_size < 2 || self.tournament_size > self.population_size {
            return fail(format!(
                "ga tournament_size must lie in 2..={}, got {}",
                self.population_size, self.tournament_size
            ));
        }
        if self.elitism_count >= self.population_size {
            return fail(format!(
                "ga elitism_count ({}) must be below population_size ({})",
                self.elitism_count, self.population_size
            ));
        }
        for (name, v) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob_per_gene", self.mutation_prob_per_gene),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("ga {name} must lie in [0, 1], got {v}"));
            }
        }
        Ok(())
    }
}

/// What the GA maximizes on the validation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessKind {
    /// Negative MSE of annual totals (Pattern A).
    NegTotalMse,
    /// Negative MSE over every tensor element.
    NegElementMse,
    /// Reconstruction accuracy of the forecast tensor (Pattern B).
    ReconstructionAccuracy,
}

/// Anything the GA can score. Higher is better.
pub trait Fitness: Sync {
    fn gene_count(&self) -> usize;
    fn fitness(&self, chrom: &Chromosome) -> f64;
}

/// Scores a chromosome by forecasting the training annual factors through the
/// validation window and comparing the rebuilt tensor with validation data.
#[derive(Debug, Clone)]
pub struct FitnessContext {
    factor_a: Array2<f64>,
    factor_b: Array2<f64>,
    factor_c: Array2<f64>,
    validation: Array3<f64>,
    kind: FitnessKind,
}

impl FitnessContext {
    /// `model` is the training factorization; `validation` the year slab that
    /// immediately follows the training window.
    pub fn new(model: &CpModel, validation: &DemandTensor, kind: FitnessKind) -> Result<Self> {
        let (i, j, _) = model.dims();
        let (vi, vj, vk) = validation.dims();
        if (i, j) != (vi, vj) {
            return Err(Error::DimensionMismatch {
                expected: (i, j, vk),
                found: (vi, vj, vk),
            });
        }
        Ok(Self {
            factor_a: model.factor_a().clone(),
            factor_b: model.factor_b().clone(),
            factor_c: model.factor_c().clone(),
            validation: validation.values().clone(),
            kind,
        })
    }

    pub fn kind(&self) -> FitnessKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.validation.dim().2
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

    pub fn validation(&self) -> &Array3<f64> {
        &self.validation
    }

    fn try_fitness(&self, chrom: &Chromosome) -> Result<f64> {
        if chrom.len() != self.factor_c.ncols() {
            return Err(Error::InvalidConfig(format!(
                "chromosome has {} genes, model rank is {}",
                chrom.len(),
                self.factor_c.ncols()
            )));
        }
        let c_hat = forecast_factor_columns(self.factor_c.view(), chrom, self.horizon())?;
        let x_hat = reconstruct_values(&self.factor_a, &self.factor_b, &c_hat);
        Ok(match self.kind {
            FitnessKind::NegTotalMse => {
                let pred = totals_of_values(x_hat.view());
                let truth = totals_of_values(self.validation.view());
                -mean_squared_error(&pred, &truth)
            }
            FitnessKind::NegElementMse => {
                let pred: Vec<f64> = x_hat.iter().copied().collect();
                let truth: Vec<f64> = self.validation.iter().copied().collect();
                -mean_squared_error(&pred, &truth)
            }
            FitnessKind::ReconstructionAccuracy => accuracy_of_values(self.validation.view(), x_hat.view())?,
        })
    }
}

impl Fitness for FitnessContext {
    fn gene_count(&self) -> usize {
        self.factor_c.ncols()
    }

    fn fitness(&self, chrom: &Chromosome) -> f64 {
        evaluate_fitness(chrom, self)
    }
}

pub(crate) fn mean_squared_error(pred: &[f64], truth: &[f64]) -> f64 {
    let n = pred.len().max(1) as f64;
    pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

/// Fits `chrom.genes[r]` to column `r` of `factor_c` and forecasts `horizon`
/// steps; the result is `horizon × R`.
pub fn forecast_factor_columns(
    factor_c: ArrayView2<'_, f64>,
    chrom: &Chromosome,
    horizon: usize,
) -> Result<Array2<f64>> {
    let rank = factor_c.ncols();
    if chrom.len() != rank {
        return Err(Error::InvalidConfig(format!(
            "chromosome has {} genes, expected {rank}",
            chrom.len()
        )));
    }
    let mut out = Array2::zeros((horizon, rank));
    for (r, spec) in chrom.genes.iter().enumerate() {
        let column = factor_c.column(r).to_vec();
        let model = arima::fit(&column, *spec)?;
        let forecasts = arima::forecast(&model, horizon);
        if forecasts.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("factor forecast"));
        }
        for (h, v) in forecasts.into_iter().enumerate() {
            out[[h, r]] = v;
        }
    }
    Ok(out)
}

/// Fitness of `chrom` under `ctx`; any failure maps to [`WORST_FITNESS`].
pub fn evaluate_fitness(chrom: &Chromosome, ctx: &FitnessContext) -> f64 {
    match ctx.try_fitness(chrom) {
        Ok(v) if v.is_finite() => v,
        _ => WORST_FITNESS,
    }
}

fn tournament_index<R: Rng>(fitnesses: &[f64], k: usize, rng: &mut R) -> Result<usize> {
    let n = fitnesses.len();
    if n == 0 {
        return Err(Error::InvalidConfig("tournament on an empty population".into()));
    }
    if k < 2 || k > n {
        return Err(Error::InvalidConfig(format!("tournament size {k} outside 2..={n}")));
    }
    let drawn = index::sample(rng, n, k);
    let winner = drawn
        .iter()
        .reduce(|best, cand| {
            let (fb, fc) = (fitnesses[best], fitnesses[cand]);
            if fc > fb || (fc == fb && cand < best) {
                cand
            } else {
                best
            }
        })
        .expect("k >= 2");
    Ok(winner)
}

/// Draws `k` distinct individuals uniformly and returns the fittest, ties
/// going to the lowest index.
pub fn tournament_select<'a, R: Rng>(
    population: &'a [Chromosome],
    fitnesses: &[f64],
    k: usize,
    rng: &mut R,
) -> Result<&'a Chromosome> {
    if population.len() != fitnesses.len() {
        return Err(Error::InvalidConfig("population and fitness lengths differ".into()));
    }
    tournament_index(fitnesses, k, rng).map(|i| &population[i])
}

/// One-point crossover at a gene boundary. With a single gene there is no cut
/// point and the parents are returned unchanged.
pub fn crossover<R: Rng>(
    parent_a: &Chromosome,
    parent_b: &Chromosome,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome)> {
    if parent_a.len() != parent_b.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot cross chromosomes of lengths {} and {}",
            parent_a.len(),
            parent_b.len()
        )));
    }
    let rank = parent_a.len();
    if rank < 2 {
        return Ok((parent_a.clone(), parent_b.clone()));
    }
    let cut = rng.random_range(1..rank);
    Ok(crossover_at(parent_a, parent_b, cut))
}

fn crossover_at(a: &Chromosome, b: &Chromosome, cut: usize) -> (Chromosome, Chromosome) {
    let mut child_a = a.genes[..cut].to_vec();
    child_a.extend_from_slice(&b.genes[cut..]);
    let mut child_b = b.genes[..cut].to_vec();
    child_b.extend_from_slice(&a.genes[cut..]);
    (Chromosome::new(child_a), Chromosome::new(child_b))
}

/// Returns the mutated chromosome and the number of genes picked for mutation.
fn mutate_counted<R: Rng>(
    chrom: &Chromosome,
    prob_per_gene: f64,
    bounds: &OrderBounds,
    rng: &mut R,
) -> (Chromosome, usize) {
    let mut out = chrom.clone();
    let mut touched = 0;
    for gene in out.genes.iter_mut() {
        if rng.random::<f64>() >= prob_per_gene {
            continue;
        }
        touched += 1;
        match rng.random_range(0..3) {
            0 => gene.p = rng.random_range(0..=bounds.p_max),
            1 => gene.d = rng.random_range(0..=bounds.d_max),
            _ => gene.q = rng.random_range(0..=bounds.q_max),
        }
    }
    (out, touched)
}

/// With probability `prob_per_gene` per gene, resamples one of its three
/// orders (chosen uniformly) uniformly within `bounds`.
pub fn mutate<R: Rng>(chrom: &Chromosome, prob_per_gene: f64, bounds: &OrderBounds, rng: &mut R) -> Chromosome {
    mutate_counted(chrom, prob_per_gene, bounds, rng).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    /// Mean over individuals with finite fitness; `-inf` if there are none.
    pub mean: f64,
    pub best_ever: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub best: Chromosome,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
}

fn score_population<F: Fitness + ?Sized>(
    population: &[Chromosome],
    fitness: &F,
    cache: &mut HashMap<Chromosome, f64>,
) -> Vec<f64> {
    let mut pending: Vec<&Chromosome> = Vec::new();
    for chrom in population {
        if !cache.contains_key(chrom) && !pending.contains(&chrom) {
            pending.push(chrom);
        }
    }
    let scored: Vec<(Chromosome, f64)> = pending
        .par_iter()
        .map(|c| {
            let f = fitness.fitness(c);
            ((*c).clone(), if f.is_nan() { WORST_FITNESS } else { f })
        })
        .collect();
    cache.extend(scored);
    population.iter().map(|c| cache[c]).collect()
}

/// Runs the GA and returns the best individual seen in any generation.
pub fn evolve<F: Fitness + ?Sized>(config: &GaConfig, fitness: &F) -> Result<EvolutionResult> {
    config.validate()?;
    let rank = fitness.gene_count();
    if rank == 0 {
        return Err(Error::InvalidConfig("fitness has zero genes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cache = HashMap::new();
    let mut population: Vec<Chromosome> = (0..config.population_size)
        .map(|_| Chromosome::random(rank, &config.bounds, &mut rng))
        .collect();

    let mut best: Option<(Chromosome, f64)> = None;
    let mut history = Vec::with_capacity(config.generations);

    for generation in 0..config.generations {
        let scores = score_population(&population, fitness, &mut cache);

        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(x.cmp(&y)));
        let top = order[0];
        if best.as_ref().is_none_or(|(_, f)| scores[top] > *f) {
            best = Some((population[top].clone(), scores[top]));
        }
        let finite: Vec<f64> = scores.iter().copied().filter(|v| v.is_finite()).collect();
        let mean = if finite.is_empty() {
            WORST_FITNESS
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        history.push(GenerationStats {
            generation,
            best: scores[top],
            mean,
            best_ever: best.as_ref().map(|(_, f)| *f).unwrap_or(WORST_FITNESS),
        });

        if generation + 1 == config.generations {
            break;
        }

        let mut next: Vec<Chromosome> = order[..config.elitism_count]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < config.population_size {
            let pa = tournament_index(&scores, config.tournament_size, &mut rng)?;
            let pb = tournament_index(&scores, config.tournament_size, &mut rng)?;
            let (ca, cb) = if rng.random::<f64>() < config.crossover_prob {
                crossover(&population[pa], &population[pb], &mut rng)?
            } else {
                (population[pa].clone(), population[pb].clone())
            };
            next.push(mutate(&ca, config.mutation_prob_per_gene, &config.bounds, &mut rng));
            if next.len() < config.population_size {
                next.push(mutate(&cb, config.mutation_prob_per_gene, &config.bounds, &mut rng));
            }
        }
        population = next;
    }

    let (best, best_fitness) = best.expect("at least one generation");
    Ok(EvolutionResult {
        best,
        best_fitness,
        history,
    })
}

#[cfg(test)]
// Oracles spell out index loops on purpose.
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::tensor::CpModel;
    use ndarray::s;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn g(p: usize, d: usize, q: usize) -> ArimaSpec {
        ArimaSpec::new(p, d, q)
    }

    /// Smooth synthetic landscape peaked at a known chromosome.
    struct Peak {
        target: Chromosome,
    }

    impl Fitness for Peak {
        fn gene_count(&self) -> usize {
            self.target.len()
        }
        fn fitness(&self, chrom: &Chromosome) -> f64 {
            -chrom
                .to_flat()
                .iter()
                .zip(self.target.to_flat())
                .map(|(&a, b)| (a as f64 - b as f64).powi(2))
                .sum::<f64>()
        }
    }

    fn trending_context(kind: FitnessKind) -> (FitnessContext, Array2<f64>) {
        // Two annual factors over 20 training + 4 validation years.
        let k_total = 24;
        let c_full = Array2::from_shape_fn((k_total, 2), |(k, r)| {
            let t = k as f64;
            if r == 0 {
                5.0 + 0.5 * t
            } else {
                3.0 + (0.8f64).powi(k as i32) * 2.0
            }
        });
        let a = Array2::from_shape_fn((3, 2), |(i, r)| 1.0 + (i + r) as f64 * 0.5);
        let b = Array2::from_shape_fn((2, 2), |(j, r)| 0.5 + (j * 2 + r) as f64 * 0.25);
        let c_train = c_full.slice(s![..20, ..]).to_owned();
        let c_val = c_full.slice(s![20.., ..]).to_owned();
        let model = CpModel::new(a.clone(), b.clone(), c_train).unwrap();
        let validation = DemandTensor::from_values(reconstruct_values(&a, &b, &c_val), 2020).unwrap();
        (FitnessContext::new(&model, &validation, kind).unwrap(), c_val)
    }

    #[test]
    fn perfect_forecast_hits_fitness_bounds() {
        // Column 0 is linear (exact under (0,2,0)), column 1 is constant (exact under (0,1,0)).
        let c_full = Array2::from_shape_fn((24, 2), |(k, r)| if r == 0 { 2.0 + k as f64 } else { 4.0 });
        let a = Array2::from_elem((2, 2), 1.5);
        let b = Array2::from_shape_fn((3, 2), |(j, r)| 1.0 + (j + r) as f64);
        let model = CpModel::new(a.clone(), b.clone(), c_full.slice(s![..20, ..]).to_owned()).unwrap();
        let val = reconstruct_values(&a, &b, &c_full.slice(s![20.., ..]).to_owned());
        let validation = DemandTensor::from_values(val, 2020).unwrap();
        let chrom = Chromosome::new(vec![g(0, 2, 0), g(0, 1, 0)]);

        let ctx_a = FitnessContext::new(&model, &validation, FitnessKind::NegTotalMse).unwrap();
        assert!(evaluate_fitness(&chrom, &ctx_a).abs() < 1e-12);
        let ctx_b = FitnessContext::new(&model, &validation, FitnessKind::ReconstructionAccuracy).unwrap();
        assert!((evaluate_fitness(&chrom, &ctx_b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minimum_data_violation_is_worst() {
        let (ctx, _) = trending_context(FitnessKind::NegTotalMse);
        // (9,2,0) needs 21 observations; the training window has 20.
        let chrom = Chromosome::new(vec![g(9, 2, 0), g(0, 1, 0)]);
        assert_eq!(evaluate_fitness(&chrom, &ctx), WORST_FITNESS);
        let wrong_len = Chromosome::uniform(g(0, 1, 0), 3);
        assert_eq!(evaluate_fitness(&wrong_len, &ctx), WORST_FITNESS);
    }

    #[test]
    fn fitness_matches_step_by_step_evaluation() {
        for kind in [
            FitnessKind::NegTotalMse,
            FitnessKind::NegElementMse,
            FitnessKind::ReconstructionAccuracy,
        ] {
            let (ctx, _) = trending_context(kind);
            let chrom = Chromosome::new(vec![g(1, 1, 0), g(1, 0, 1)]);

            // Independent path: per-column fit/forecast, explicit triple sums.
            let horizon = ctx.horizon();
            let mut c_hat = vec![vec![0.0; 2]; horizon];
            for r in 0..2 {
                let col: Vec<f64> = ctx.factor_c().column(r).to_vec();
                let m = arima::fit(&col, chrom.genes[r]).unwrap();
                for (h, v) in arima::forecast(&m, horizon).into_iter().enumerate() {
                    c_hat[h][r] = v;
                }
            }
            let (a, b, val) = (ctx.factor_a(), ctx.factor_b(), ctx.validation());
            let mut sq_tot = 0.0;
            let mut sq_el = 0.0;
            let mut norm = 0.0;
            for k in 0..horizon {
                let (mut pt, mut tt) = (0.0, 0.0);
                for i in 0..a.nrows() {
                    for j in 0..b.nrows() {
                        let x: f64 = (0..2).map(|r| a[[i, r]] * b[[j, r]] * c_hat[k][r]).sum();
                        pt += x;
                        tt += val[[i, j, k]];
                        sq_el += (x - val[[i, j, k]]).powi(2);
                        norm += val[[i, j, k]].powi(2);
                    }
                }
                sq_tot += (pt - tt).powi(2);
            }
            let n_el = (a.nrows() * b.nrows() * horizon) as f64;
            let want = match kind {
                FitnessKind::NegTotalMse => -sq_tot / horizon as f64,
                FitnessKind::NegElementMse => -sq_el / n_el,
                FitnessKind::ReconstructionAccuracy => 1.0 - sq_el.sqrt() / norm.sqrt(),
            };
            let got = evaluate_fitness(&chrom, &ctx);
            assert!(
                (got - want).abs() <= 1e-10 * (1.0 + want.abs()),
                "{kind:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn tournament_of_whole_population_returns_best() {
        let pop: Vec<Chromosome> = (0..5).map(|p| Chromosome::new(vec![g(p, 0, 0)])).collect();
        let fit = [0.1, 3.0, -1.0, 3.0, 2.0];
        let mut r = rng(1);
        for _ in 0..20 {
            assert_eq!(tournament_select(&pop, &fit, 5, &mut r).unwrap(), &pop[1]);
        }
        assert!(tournament_select(&pop, &fit, 6, &mut r).is_err());
        assert!(tournament_select(&pop, &fit, 1, &mut r).is_err());
    }

    #[test]
    fn tournament_on_identical_population() {
        let pop = vec![Chromosome::new(vec![g(1, 1, 1)]); 4];
        let fit = [0.5; 4];
        let mut r = rng(2);
        for k in 2..=4 {
            assert_eq!(tournament_select(&pop, &fit, k, &mut r).unwrap(), &pop[0]);
        }
    }

    #[test]
    fn tournament_frequencies_follow_closed_form() {
        // k = 2 of 4 distinct: P(rank m wins) = (m - 1) / C(4, 2) for m = 1..4.
        let fit = [1.0, 2.0, 3.0, 4.0];
        let expected = [0.0, 1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        let mut counts = [0usize; 4];
        let mut r = rng(3);
        let trials = 10_000;
        for _ in 0..trials {
            counts[tournament_index(&fit, 2, &mut r).unwrap()] += 1;
        }
        for w in counts.windows(2) {
            assert!(w[0] < w[1]);
        }
        for (c, e) in counts.iter().zip(expected) {
            let freq = *c as f64 / trials as f64;
            // 4.5 standard errors of a binomial proportion at n = 10_000.
            assert!(
                (freq - e).abs() < 4.5 * (0.25f64 / trials as f64).sqrt(),
                "{freq} vs {e}"
            );
        }
    }

    #[test]
    fn crossover_behaviour() {
        let pa = Chromosome::new(vec![g(1, 0, 1), g(2, 1, 2)]);
        let pb = Chromosome::new(vec![g(3, 2, 3), g(4, 0, 4)]);
        let (ca, cb) = crossover_at(&pa, &pb, 1);
        assert_eq!(ca, Chromosome::new(vec![g(1, 0, 1), g(4, 0, 4)]));
        assert_eq!(cb, Chromosome::new(vec![g(3, 2, 3), g(2, 1, 2)]));

        let mut r = rng(4);
        let (x, y) = crossover(&pa, &pa, &mut r).unwrap();
        assert_eq!((x, y), (pa.clone(), pa.clone()));

        let single = Chromosome::new(vec![g(1, 1, 1)]);
        let other = Chromosome::new(vec![g(0, 0, 0)]);
        assert_eq!(
            crossover(&single, &other, &mut r).unwrap(),
            (single.clone(), other.clone())
        );
        assert!(crossover(&single, &pa, &mut r).is_err());
    }

    #[test]
    fn crossover_conserves_genes() {
        let bounds = OrderBounds::default();
        let mut r = rng(5);
        for _ in 0..200 {
            let pa = Chromosome::random(6, &bounds, &mut r);
            let pb = Chromosome::random(6, &bounds, &mut r);
            let (ca, cb) = crossover(&pa, &pb, &mut r).unwrap();
            let mut before: Vec<_> = pa.genes.iter().chain(&pb.genes).copied().collect();
            let mut after: Vec<_> = ca.genes.iter().chain(&cb.genes).copied().collect();
            before.sort();
            after.sort();
            assert_eq!(before, after);
            assert!(ca.within(&bounds) && cb.within(&bounds));
        }
    }

    #[test]
    fn mutation_behaviour() {
        let bounds = OrderBounds::default();
        let mut r = rng(6);
        let c = Chromosome::random(8, &bounds, &mut r);
        assert_eq!(mutate(&c, 0.0, &bounds, &mut r), c);

        let single = Chromosome::new(vec![g(2, 1, 3)]);
        for _ in 0..500 {
            let m = mutate(&single, 1.0, &bounds, &mut r);
            assert!(m.within(&bounds));
            let changed = [m.genes[0].p != 2, m.genes[0].d != 1, m.genes[0].q != 3];
            assert!(changed.iter().filter(|&&x| x).count() <= 1);
        }
    }

    #[test]
    fn mutation_rate_is_binomial() {
        let bounds = OrderBounds::default();
        let mut r = rng(7);
        let c = Chromosome::uniform(g(1, 1, 1), 1);
        let trials = 10_000;
        let touched: usize = (0..trials).map(|_| mutate_counted(&c, 0.5, &bounds, &mut r).1).sum();
        let frac = touched as f64 / trials as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn evolve_finds_synthetic_peak() {
        let target = Chromosome::new(vec![g(3, 1, 2), g(0, 2, 5), g(4, 0, 1)]);
        let fitness = Peak { target: target.clone() };
        let res = evolve(&GaConfig::default(), &fitness).unwrap();
        assert_eq!(res.best, target);
        assert_eq!(res.best_fitness, 0.0);
        assert_eq!(res.history.len(), 60);
        for w in res.history.windows(2) {
            assert!(w[1].best_ever >= w[0].best_ever);
            assert!(w[1].best >= w[0].best);
        }
    }

    #[test]
    fn evolve_is_deterministic() {
        let (ctx, _) = trending_context(FitnessKind::NegTotalMse);
        let config = GaConfig {
            population_size: 12,
            generations: 6,
            bounds: OrderBounds {
                p_max: 2,
                d_max: 1,
                q_max: 2,
            },
            ..GaConfig::default()
        };
        let r1 = evolve(&config, &ctx).unwrap();
        let r2 = evolve(&config, &ctx).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.best.within(&config.bounds));
    }

    #[test]
    fn config_validation() {
        let ok = GaConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            GaConfig {
                tournament_size: 1,
                ..ok
            },
            GaConfig {
                tournament_size: 41,
                ..ok
            },
            GaConfig {
                elitism_count: 40,
                ..ok
            },
            GaConfig {
                crossover_prob: 1.5,
                ..ok
            },
            GaConfig {
                mutation_prob_per_gene: -0.1,
                ..ok
            },
            GaConfig { generations: 0, ..ok },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn flat_encoding() {
        let c = Chromosome::new(vec![g(1, 2, 3), g(4, 0, 5)]);
        assert_eq!(c.to_flat(), vec![1, 2, 3, 4, 0, 5]);
        assert_eq!(c.to_string(), "[(1,2,3) (4,0,5)]");
    }
}
