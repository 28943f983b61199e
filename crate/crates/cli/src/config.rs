//! TOML run configuration.
//!
//! Every section is optional at parse time; each subcommand asks for the
//! sections it needs and gets a precise error when one is missing. Relative
//! paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use ntfcast_core::pipeline::{baseline_spec_for, GA_SEED_OFFSET};
use ntfcast_core::{ArimaSpec, FitnessKind, ForecastMode, GaConfig, NtfConfig, OrderBounds, PatternConfig, SplitSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<DataSection>,
    pub split: Option<SplitSection>,
    pub ntf: Option<NtfSection>,
    pub ga: Option<GaSection>,
    pub pattern: Option<PatternSection>,
    pub baseline: Option<BaselineSection>,
    pub seeds: Option<SeedsSection>,
    pub rank_sweep: Option<RankSweepSection>,
    pub output: OutputSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train: [i32; 2],
    pub validation: [i32; 2],
    pub test: [i32; 2],
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NtfSection {
    pub rank: usize,
    pub iterations: usize,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    ntfcast_core::ntf::DEFAULT_EPSILON
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub p_max: usize,
    pub d_max: usize,
    pub q_max: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaSection {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob_per_gene: f64,
    pub elitism_count: usize,
    pub bounds: BoundsSection,
    /// Defaults to the NTF seed plus `GA_SEED_OFFSET`.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSection {
    pub label: String,
    /// Required unless `label` names a published pattern.
    pub fitness: Option<FitnessKind>,
    #[serde(default)]
    pub forecast_mode: ForecastMode,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsSection {
    #[serde(default = "default_seed_list")]
    pub list: Vec<u64>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_seed_list() -> Vec<u64> {
    ntfcast_core::pipeline::DEFAULT_SEEDS.to_vec()
}

fn default_top_k() -> usize {
    ntfcast_core::pipeline::DEFAULT_TOP_K
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankSweepSection {
    pub ranks: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Bounds that can be checked without knowing the subcommand.
    fn check(&self) -> Result<()> {
        if self.output.formats.is_empty() {
            bail!("output.formats must name at least one of \"json\", \"csv\"");
        }
        if self.split.is_some() {
            self.split_spec()?.validate()?;
        }
        if self.ntf.is_some() {
            self.ntf_config()?.validate()?;
        }
        if self.ga.is_some() {
            self.ga_config()?.validate()?;
        }
        if let Some(p) = &self.pattern {
            if p.label.trim().is_empty() {
                bail!("pattern.label must not be empty");
            }
            self.pattern_config()?;
        }
        if let Some(s) = &self.seeds {
            if s.list.is_empty() {
                bail!("seeds.list must not be empty");
            }
            if s.top_k == 0 || s.top_k > s.list.len() {
                bail!("seeds.top_k must lie in 1..={}, got {}", s.list.len(), s.top_k);
            }
        }
        if let Some(r) = &self.rank_sweep {
            if r.ranks.is_empty() || r.ranks.contains(&0) {
                bail!("rank_sweep.ranks must be a non-empty list of positive ranks");
            }
            if r.iterations == 0 {
                bail!("rank_sweep.iterations must be at least 1");
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_path(&self) -> Result<PathBuf> {
        let data = self.data.as_ref().ok_or_else(|| missing("data"))?;
        Ok(self.resolve(&data.path))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }

    pub fn ntf_config(&self) -> Result<NtfConfig> {
        let n = self.ntf.ok_or_else(|| missing("ntf"))?;
        Ok(NtfConfig {
            rank: n.rank,
            iterations: n.iterations,
            seed: n.seed,
            epsilon: n.epsilon,
        })
    }

    pub fn ga_config(&self) -> Result<GaConfig> {
        let g = self.ga.ok_or_else(|| missing("ga"))?;
        let seed = match (g.seed, self.ntf) {
            (Some(s), _) => s,
            (None, Some(n)) => n.seed.wrapping_add(GA_SEED_OFFSET),
            (None, None) => bail!("ga.seed is required when there is no [ntf] section to derive it from"),
        };
        Ok(GaConfig {
            population_size: g.population_size,
            generations: g.generations,
            tournament_size: g.tournament_size,
            crossover_prob: g.crossover_prob,
            mutation_prob_per_gene: g.mutation_prob_per_gene,
            bounds: OrderBounds {
                p_max: g.bounds.p_max,
                d_max: g.bounds.d_max,
                q_max: g.bounds.q_max,
            },
            seed,
            elitism_count: g.elitism_count,
        })
    }

    /// The explicit split, or the published one when the pattern label is a
    /// preset.
    pub fn split_spec(&self) -> Result<SplitSpec> {
        if let Some(s) = self.split {
            return Ok(SplitSpec {
                train: (s.train[0], s.train[1]),
                validation: (s.validation[0], s.validation[1]),
                test: (s.test[0], s.test[1]),
            });
        }
        self.pattern
            .as_ref()
            .and_then(|p| PatternConfig::preset(&p.label))
            .map(|p| p.split)
            .ok_or_else(|| missing("split"))
    }

    pub fn pattern_config(&self) -> Result<PatternConfig> {
        let p = self.pattern.as_ref().ok_or_else(|| missing("pattern"))?;
        let preset = PatternConfig::preset(&p.label);
        let fitness_kind = match (p.fitness, &preset) {
            (Some(f), _) => f,
            (None, Some(pre)) => pre.fitness_kind,
            (None, None) => bail!("pattern.fitness is required for custom label {:?}", p.label),
        };
        Ok(PatternConfig {
            label: p.label.clone(),
            split: self.split_spec()?,
            fitness_kind,
            forecast_mode: p.forecast_mode,
        })
    }

    /// The explicit baseline orders, or the published ones for a preset label.
    pub fn baseline_spec(&self) -> Result<ArimaSpec> {
        if let Some(b) = self.baseline {
            return Ok(ArimaSpec::new(b.p, b.d, b.q));
        }
        self.pattern
            .as_ref()
            .and_then(|p| baseline_spec_for(&p.label))
            .ok_or_else(|| missing("baseline"))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds
            .as_ref()
            .map(|s| s.list.clone())
            .unwrap_or_else(default_seed_list)
    }

    pub fn top_k(&self) -> usize {
        self.seeds.as_ref().map(|s| s.top_k).unwrap_or_else(default_top_k)
    }

    pub fn rank_sweep(&self) -> Result<RankSweepSection> {
        if let Some(r) = &self.rank_sweep {
            return Ok(r.clone());
        }
        let n = self
            .ntf
            .ok_or_else(|| anyhow!("section [rank_sweep] or [ntf] is required"))?;
        Ok(RankSweepSection {
            ranks: (1..=12).collect(),
            iterations: n.iterations,
        })
    }
}

fn missing(section: &str) -> anyhow::Error {
    anyhow!("section [{section}] is required by this subcommand")
}
