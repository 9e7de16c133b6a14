//! Nonparametric estimation and inference for the dynamic marginal policy
//! effect in sharp dynamic thresholding designs.
//!
//! Units are observed over periods `t = 0..=T`; at every period a running
//! variable `Z` is compared to a cutoff `c` and treatment `A = 1{Z >= c}` is
//! applied. The target is the ratio of the cutoff-derivative of discounted
//! welfare to the cutoff-derivative of discounted treatment frequency. It is
//! estimated by a local linear regression that pools every `(unit, period)`
//! row, weights each row by both a kernel in `Z` and the time discount
//! `gamma^t`, and uses discounted forward sums as responses.
//!
//! Module map:
//!
//! * [`panel`]: longitudinal data model and CSV ingestion.
//! * [`kernels`]: kernel functions and their moment constants.
//! * [`discount`]: discounted forward sums, full and truncated.
//! * [`locallinear`]: the pooled kernel-weighted least-squares engine.
//! * [`estimators`]: the dynamic estimator and the two baselines.
//! * [`inference`]: sandwich variance and confidence intervals.
//! * [`bandwidth`]: Imbens–Kalyanaraman bandwidth selection.
//! * [`simulator`]: autoregressive thresholding DGP and finite-difference oracle.
//! * [`harness`]: Monte Carlo coverage experiments.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the default
//! `parallel` feature they run on rayon, otherwise sequentially. Both paths
//! reduce in a fixed order and give bit-identical results.

pub mod bandwidth;
pub mod discount;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod harness;
pub mod inference;
pub mod kernels;
mod linalg;
pub mod locallinear;
pub mod panel;
pub mod rng;
pub mod simulator;

pub use bandwidth::{select_ik, BandwidthReport, BandwidthSample};
pub use discount::{full_sums, truncated_sums, DiscountedSums, Grid, Window};
pub use error::{Error, Result};
pub use estimators::{
    estimate, estimate_baseline_naive, estimate_baseline_standard, estimate_finite,
    estimate_infinite, EstimatorSpec, FitResult, Mode, Truncation,
};
pub use exec::Execution;
pub use inference::{
    confidence_interval, normal_quantile, sandwich, ConfidenceInterval, VarianceComponents,
};
pub use kernels::{KernelKind, KernelMoments};
pub use locallinear::{RegressorSpec, Regressors, WlsFit};
pub use panel::{load_panel, write_panel, ColumnMap, Observation, TrajectoryPanel};
pub use simulator::{oracle_tau_rd, simulate, OracleConfig, OracleEstimate, SimConfig};
