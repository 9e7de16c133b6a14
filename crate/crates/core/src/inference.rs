//! Sandwich variance and normal confidence intervals.
//!
//! For each side `a` of the cutoff the bread is
//! `B_a = (1/n) sum_{i,t} gamma^t K_h side_a [1, x] [1, x]'` and each unit
//! contributes the score
//! `M_{i,a} = sqrt(h) sum_t gamma^t K_h side_a [1, x] (response - fit)`.
//! Only the intercept of `B_a^{-1} M_{i,a}` enters, so every unit reduces to
//! one scalar per side and response, `s = e1' B_a^{-1} M_{i,a}`, and
//! `V_G = sum_a (1/n) sum_i s_G^2` (likewise `V_H`, `V_GH`).

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::discount::Grid;
use crate::error::{Error, Result};
use crate::estimators::{self, FitResult, Plan};
use crate::exec::Execution;
use crate::linalg::{rcond_sym2, solve_sym2, RCOND_FLOOR};
use crate::locallinear::{LocalDesign, WlsFit};
use crate::panel::TrajectoryPanel;

/// Variances below `-NEGATIVE_TOLERANCE` are reported as errors; values in
/// between are clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceComponents {
    pub v_g: f64,
    pub v_h: f64,
    pub v_gh: f64,
    pub v_rd: f64,
    pub n: usize,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub se: f64,
    pub alpha: f64,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, target: f64) -> bool {
        self.lower <= target && target <= self.upper
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Sandwich variance of a fit, recomputing the design from `panel`.
pub fn sandwich(panel: &TrajectoryPanel, result: &FitResult) -> Result<VarianceComponents> {
    let plan = estimators::plan(panel, &result.spec, result.mode)?;
    let design = estimators::design(panel, &result.spec, &plan, Execution::default())?;
    sandwich_on(&design, &plan, result)
}

pub(crate) fn sandwich_on(
    design: &LocalDesign,
    plan: &Plan,
    result: &FitResult,
) -> Result<VarianceComponents> {
    let n = design.n_units();
    let nf = n as f64;
    let h = result.spec.bandwidth;

    // u_a = B_a^{-1} e1
    let moments = design.side_moments();
    let mut u = [[0.0; 2]; 2];
    for (side, name) in [(0, "control"), (1, "treated")] {
        let [s0, s1, s2] = moments[side].map(|m| m / nf);
        if rcond_sym2(s0, s1, s2) < RCOND_FLOOR {
            return Err(Error::SingularSide { side: name });
        }
        u[side] = solve_sym2(s0, s1, s2, [1.0, 0.0]);
    }

    let h_pair = match (&plan.h, &result.h_fit) {
        (Some(grid), Some(fit)) => Some((grid, fit)),
        _ => None,
    };
    let g_pair = (&plan.g, &result.g_fit);
    let responses: [(&Grid, &WlsFit); 2] = [g_pair, h_pair.unwrap_or(g_pair)];
    let has_h = h_pair.is_some();

    let root_h = h.sqrt();
    // [v_g, v_h, v_gh]
    let totals = design
        .exec()
        .block_reduce(
            n,
            |units| {
                let mut acc = [0.0; 3];
                for i in units {
                    let mut score = [[[0.0; 2]; 2]; 2]; // [response][side][1, x]
                    for r in design.unit_rows(i) {
                        let side = usize::from(r.treated);
                        for (k, (grid, fit)) in responses.iter().enumerate() {
                            let e = grid.get(i, r.period) - fit.predict(r.x, r.period);
                            score[k][side][0] += r.w * e;
                            score[k][side][1] += r.w * r.x * e;
                        }
                    }
                    for side in 0..2 {
                        let s = |k: usize| {
                            root_h
                                * (u[side][0] * score[k][side][0] + u[side][1] * score[k][side][1])
                        };
                        let (sg, sh) = (s(0), s(1));
                        acc[0] += sg * sg;
                        acc[1] += sh * sh;
                        acc[2] += sg * sh;
                    }
                }
                acc
            },
            |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]],
        )
        .unwrap_or([0.0; 3]);

    let v_g = totals[0] / nf;
    let (v_h, v_gh) = if has_h {
        (totals[1] / nf, totals[2] / nf)
    } else {
        (0.0, 0.0)
    };
    let tau = result.tau_rd;
    let v_rd = (v_g + tau * tau * v_h - 2.0 * tau * v_gh) / (result.tau_h * result.tau_h);
    Ok(VarianceComponents {
        v_g,
        v_h,
        v_gh,
        v_rd,
        n,
        bandwidth: h,
    })
}

/// `tau_rd -/+ z_{1-alpha/2} sqrt(V_RD / (n h))`.
pub fn confidence_interval(
    result: &FitResult,
    variance: &VarianceComponents,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let v = variance.v_rd;
    if v.is_nan() || v < -NEGATIVE_TOLERANCE {
        return Err(Error::NegativeVariance(v));
    }
    let se = (v.max(0.0) / (variance.n as f64 * variance.bandwidth)).sqrt();
    let half = normal_quantile(1.0 - alpha / 2.0) * se;
    Ok(ConfidenceInterval {
        estimate: result.tau_rd,
        lower: result.tau_rd - half,
        upper: result.tau_rd + half,
        se,
        alpha,
    })
}

/// Estimate, variance and interval in one pass over a single design.
pub fn estimate_with_interval(
    panel: &TrajectoryPanel,
    spec: &estimators::EstimatorSpec,
    mode: estimators::Mode,
    alpha: f64,
    exec: Execution,
) -> Result<(FitResult, VarianceComponents, ConfidenceInterval)> {
    let (result, design, plan) = estimators::estimate_parts(panel, spec, mode, exec)?;
    let variance = sandwich_on(&design, &plan, &result)?;
    let ci = confidence_interval(&result, &variance, alpha)?;
    Ok((result, variance, ci))
}
