//! The dynamic RD estimator (finite and infinite horizon) and two baselines:
//! the pooled standard local linear regression of `Y` on `Z`, and the naive
//! long-run regression of `G[.,0]` and `H[.,0]` on `Z[.,0]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discount::{full_sums, truncated_sums, Grid};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::KernelKind;
use crate::locallinear::{LocalDesign, RegressorSpec, Regressors, WlsFit};
use crate::panel::TrajectoryPanel;

/// Absolute floor on `|tau_h|` below which the ratio is not identified.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FiniteHorizon,
    InfiniteHorizon,
    BaselineStandard,
    BaselineNaive,
}

impl Mode {
    pub fn cli_name(self) -> &'static str {
        match self {
            Mode::FiniteHorizon => "dynrd",
            Mode::InfiniteHorizon => "dynrd-inf",
            Mode::BaselineStandard => "standard",
            Mode::BaselineNaive => "naive",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dynrd" => Ok(Mode::FiniteHorizon),
            "dynrd-inf" => Ok(Mode::InfiniteHorizon),
            "standard" => Ok(Mode::BaselineStandard),
            "naive" => Ok(Mode::BaselineNaive),
            _ => Err(format!(
                "unknown mode `{s}` (expected dynrd, dynrd-inf, standard or naive)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Smallest `l` with `gamma^l <= h^3`, at least 1.
    #[default]
    Auto,
    Fixed(usize),
}

impl FromStr for Truncation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Truncation::Auto);
        }
        s.parse()
            .map(Truncation::Fixed)
            .map_err(|_| format!("truncation must be `auto` or a positive integer, got `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kernel: KernelKind,
    pub gamma: f64,
    pub bandwidth: f64,
    pub cutoff: f64,
    /// Only read in infinite-horizon mode.
    pub truncation: Truncation,
    pub regressors: Regressors,
}

impl EstimatorSpec {
    pub fn new(gamma: f64, bandwidth: f64, cutoff: f64) -> Self {
        Self {
            kernel: KernelKind::Uniform,
            gamma,
            bandwidth,
            cutoff,
            truncation: Truncation::Auto,
            regressors: Regressors::Base,
        }
    }

    pub fn with_kernel(mut self, kernel: KernelKind) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_regressors(mut self, regressors: Regressors) -> Self {
        self.regressors = regressors;
        self
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "bandwidth must be positive and finite, got {}",
                self.bandwidth
            )));
        }
        if !self.cutoff.is_finite() {
            return Err(Error::InvalidSpec("cutoff must be finite".into()));
        }
        if mode == Mode::InfiniteHorizon {
            if self.gamma >= 1.0 {
                return Err(Error::InvalidSpec(
                    "infinite-horizon mode requires gamma < 1".into(),
                ));
            }
            if self.truncation == Truncation::Fixed(0) {
                return Err(Error::InvalidSpec(
                    "truncation window must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `max(1, ceil(3 ln(1/h) / ln(1/gamma)))`: the smallest window with
/// `gamma^l <= h^3`.
pub fn default_truncation(bandwidth: f64, gamma: f64) -> usize {
    let l = (3.0 * (1.0 / bandwidth).ln() / (1.0 / gamma).ln()).ceil();
    if l.is_finite() && l >= 1.0 {
        l as usize
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub tau_g: f64,
    /// Fixed at 1 for the standard baseline.
    pub tau_h: f64,
    pub tau_rd: f64,
    pub g_fit: WlsFit,
    pub h_fit: Option<WlsFit>,
    pub spec: EstimatorSpec,
    pub mode: Mode,
    /// Resolved truncation window (infinite-horizon mode only).
    pub truncation: Option<usize>,
    /// Last pooled period.
    pub t_max: usize,
    pub n: usize,
}

/// Responses, time discount and pooling range implied by a mode.
pub(crate) struct Plan {
    pub time_gamma: f64,
    pub t_max: usize,
    pub g: Grid,
    pub h: Option<Grid>,
    pub truncation: Option<usize>,
}

pub(crate) fn plan(panel: &TrajectoryPanel, spec: &EstimatorSpec, mode: Mode) -> Result<Plan> {
    spec.validate(mode)?;
    let horizon = panel.horizon();
    Ok(match mode {
        Mode::FiniteHorizon | Mode::BaselineNaive => {
            let sums = full_sums(panel, spec.gamma);
            let (time_gamma, t_max) = if mode == Mode::FiniteHorizon {
                (spec.gamma, horizon)
            } else {
                (1.0, 0)
            };
            Plan {
                time_gamma,
                t_max,
                g: sums.g,
                h: Some(sums.h),
                truncation: None,
            }
        }
        Mode::InfiniteHorizon => {
            let window = match spec.truncation {
                Truncation::Fixed(l) => l,
                Truncation::Auto => {
                    let l = default_truncation(spec.bandwidth, spec.gamma);
                    if horizon < 2 * l {
                        return Err(Error::WindowTooLarge { window: l, horizon });
                    }
                    l
                }
            };
            if window > horizon {
                return Err(Error::WindowTooLarge { window, horizon });
            }
            let sums = truncated_sums(panel, spec.gamma, window)?;
            Plan {
                time_gamma: spec.gamma,
                t_max: horizon - window,
                g: sums.g,
                h: Some(sums.h),
                truncation: Some(window),
            }
        }
        Mode::BaselineStandard => Plan {
            time_gamma: 1.0,
            t_max: horizon,
            g: Grid::outcomes(panel),
            h: None,
            truncation: None,
        },
    })
}

pub(crate) fn design(
    panel: &TrajectoryPanel,
    spec: &EstimatorSpec,
    plan: &Plan,
    exec: Execution,
) -> Result<LocalDesign> {
    let regressors = RegressorSpec::new(spec.regressors, spec.cutoff, plan.t_max);
    LocalDesign::build(
        panel,
        &regressors,
        spec.kernel,
        plan.time_gamma,
        spec.bandwidth,
        plan.t_max,
        exec,
    )
}

pub(crate) fn estimate_parts(
    panel: &TrajectoryPanel,
    spec: &EstimatorSpec,
    mode: Mode,
    exec: Execution,
) -> Result<(FitResult, LocalDesign, Plan)> {
    let plan = plan(panel, spec, mode)?;
    panel.check_policy(spec.cutoff)?;
    let design = design(panel, spec, &plan, exec)?;
    let g_fit = design.fit(&plan.g)?;
    let tau_g = g_fit.jump();
    let (h_fit, tau_h) = match &plan.h {
        Some(h) => {
            let fit = design.fit(h)?;
            let tau_h = fit.jump();
            if tau_h.is_nan() || tau_h.abs() < DENOMINATOR_FLOOR {
                return Err(Error::DegenerateDenominator(format!(
                    "exposure jump {tau_h:e} below {DENOMINATOR_FLOOR:e}"
                )));
            }
            (Some(fit), tau_h)
        }
        None => (None, 1.0),
    };
    let result = FitResult {
        tau_g,
        tau_h,
        tau_rd: tau_g / tau_h,
        g_fit,
        h_fit,
        spec: *spec,
        mode,
        truncation: plan.truncation,
        t_max: plan.t_max,
        n: panel.n(),
    };
    Ok((result, design, plan))
}

pub fn estimate_with(
    panel: &TrajectoryPanel,
    spec: &EstimatorSpec,
    mode: Mode,
    exec: Execution,
) -> Result<FitResult> {
    estimate_parts(panel, spec, mode, exec).map(|(r, _, _)| r)
}

pub fn estimate(panel: &TrajectoryPanel, spec: &EstimatorSpec, mode: Mode) -> Result<FitResult> {
    estimate_with(panel, spec, mode, Execution::default())
}

/// Twice-discounted local linear regression on full discounted sums.
pub fn estimate_finite(panel: &TrajectoryPanel, spec: &EstimatorSpec) -> Result<FitResult> {
    estimate(panel, spec, Mode::FiniteHorizon)
}

/// Same pipeline on `l`-step truncated sums, pooling periods `0..=T-l`.
pub fn estimate_infinite(panel: &TrajectoryPanel, spec: &EstimatorSpec) -> Result<FitResult> {
    estimate(panel, spec, Mode::InfiniteHorizon)
}

/// Pooled, undiscounted regression of `Y[i,t]` on `r(Z[i,t])`.
pub fn estimate_baseline_standard(
    panel: &TrajectoryPanel,
    spec: &EstimatorSpec,
) -> Result<FitResult> {
    estimate(panel, spec, Mode::BaselineStandard)
}

/// Cross-sectional regressions of `G[i,0]` and `H[i,0]` on `Z[i,0]`.
pub fn estimate_baseline_naive(panel: &TrajectoryPanel, spec: &EstimatorSpec) -> Result<FitResult> {
    estimate(panel, spec, Mode::BaselineNaive)
}
