//! Long-term demand forecasting from a utility × industry × year consumption
//! tensor.
//!
//! The pipeline factorizes the training slab with non-negative CP updates,
//! forecasts each annual factor column with its own ARIMA model, and picks the
//! per-factor ARIMA orders with a genetic algorithm scored on a validation
//! window. Baselines that drop either stage, seed-sensitivity sweeps and
//! top-k ensembling live in [`pipeline`].

pub mod arima;
pub mod dataset;
pub mod error;
pub mod ga;
pub mod ntf;
pub mod pipeline;
pub mod synthetic;
pub mod tensor;

pub use arima::{ArimaModel, ArimaSpec, OrderBounds};
pub use error::{Error, Result};
pub use ga::{Chromosome, FitnessContext, FitnessKind, GaConfig};
pub use ntf::{NtfConfig, NtfResult};
pub use pipeline::{EvaluationReport, ForecastMode, Method, PatternConfig, SplitSpec};
pub use tensor::{CpModel, DemandTensor};
