//! Differentially private release of per-slot category distributions over
//! an unbounded stream.
//!
//! Every slot publishes a probability vector picked from a synopsis pool that
//! was generated without looking at the data. Boosting steers the choice
//! toward synopses that answer the query pool well, and every step's
//! learning rate is paid for from a converging budget series, so the total
//! privacy cost stays below a fixed `ε` no matter how long the stream runs.
//!
//! The `examples/` directory has one runnable program per building block:
//!
//! | example | shows |
//! |---|---|
//! | `sensitivity` | probability vectors, distances, the constant sensitivity |
//! | `synopsis_pool` | pool generation, coverage and entropy |
//! | `budget_series` | dilogarithm, optimal learning rates, the bounded total |
//! | `random_allocation` | drawing per-slot budgets without replacement |
//! | `ledger` | charging slots and the closed-form bounds |
//! | `boosting` | single boosting steps on a toy pool |
//! | `anomalies` | outlier scoring on a released distribution |
//! | `pipeline` | a full synthetic run with exported files |
//!
//! ```
//! use dpi_stream::{gen_synthetic, run_pipeline, RunConfig, DEFAULT_VARIANCES};
//!
//! let stream = gen_synthetic(20, 10, 50.0, &DEFAULT_VARIANCES, 1).unwrap();
//! let cfg = RunConfig { pool_trials: 500, horizon: 10_000, ..RunConfig::default() };
//! let report = run_pipeline(&cfg, &stream).unwrap();
//! assert_eq!(report.slots.len(), 20);
//! assert!(report.consumed <= cfg.epsilon);
//! ```

pub mod accountant;
pub mod apps;
pub mod boosting;
pub mod budget;
pub mod config;
pub mod error;
pub mod pdf;
pub mod pipeline;
pub mod query;
pub mod report;
pub mod rng;
pub mod stream;
pub mod synopsis;

pub use accountant::{theoretical_bounds, utility_loss_bound, PrivacyLedger, SeriesBounds};
pub use apps::{hbos_detect, moving_average, precision_recall, AnomalyReport};
pub use boosting::{dpi_step, score, BoostConfig, DpiState, ReleaseRule, UpdateRule};
pub use budget::{
    eta_from_slot_budget, li2, li2_inv, optimal_eta, rba_range_sample, rba_sample, slot_cost, BudgetState,
    DecaySeriesConfig, EtaPair, OptimalSchedule, RangeQueues,
};
pub use config::{Allocation, RunConfig};
pub use error::{Error, Result};
pub use pdf::{kl_divergence, l1_distance, mse, normalize, quantize, CountVector, ProbabilityVector, SensitivityBound};
pub use pipeline::{run_pipeline, RunReport, SlotRecord};
pub use query::{eval_query, Query, QueryKind};
pub use stream::{gen_synthetic, parse_stream, read_stream, write_stream, StreamSlot, DEFAULT_VARIANCES};
pub use synopsis::{
    empirical_pool_entropy, entropy_approximation, generate_pool, sample_synopses, PoolWeights, Synopsis, SynopsisPool,
};
