//! Imbens–Kalyanaraman plug-in bandwidth for local linear RD.
//!
//! Steps, with `N-`/`N+` counting observations below/at-or-above `c`:
//!
//! 1. Pilot `h1 = 1.84 S_Z N^{-1/5}`; density `f = (N1- + N1+) / (2 N h1)`
//!    and side variances of `y` within `h1` of the cutoff.
//! 2. Global cubic with a jump on `[median(z < c), median(z >= c)]`; its third
//!    derivative `m3` gives side pilots
//!    `h2± = 3.56 (sigma²± / (f m3²))^{1/7} N±^{-1/7}`.
//! 3. Quadratic on each side within `h2±`; curvature `m2± = 2 lambda2±` and
//!    regularization `r± = 720 sigma²± / (N2± h2±^4)`.
//! 4. `h = C_K ((sigma²- + sigma²+) / (f ((m2+ - m2-)² + r+ + r-)))^{1/5} N^{-1/5}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::linalg::SymSolver;
use crate::panel::TrajectoryPanel;

/// Minimum observations required on each side of the cutoff.
pub const MIN_SIDE: usize = 10;

/// Which panel rows feed the selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthSample {
    /// Every `(unit, period)` row with an observed running variable.
    #[default]
    Pooled,
    /// Period 0 only.
    FirstPeriod,
}

/// The data-dependent inputs of the final formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkInputs {
    pub sigma2_minus: f64,
    pub sigma2_plus: f64,
    pub f_hat: f64,
    pub m2_minus: f64,
    pub m2_plus: f64,
    pub r_minus: f64,
    pub r_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub h: f64,
    pub pilot_h: f64,
    pub m3: f64,
    pub h2_minus: f64,
    pub h2_plus: f64,
    pub inputs: IkInputs,
    pub kernel: KernelKind,
    pub kernel_constant: f64,
    pub n: usize,
    pub n_minus: usize,
    pub n_plus: usize,
}

/// Final plug-in formula for given inputs and sample size.
pub fn ik_formula(inputs: &IkInputs, n: usize, kernel: KernelKind) -> f64 {
    let IkInputs {
        sigma2_minus,
        sigma2_plus,
        f_hat,
        m2_minus,
        m2_plus,
        r_minus,
        r_plus,
    } = *inputs;
    let curvature = (m2_plus - m2_minus).powi(2) + r_plus + r_minus;
    kernel.ik_constant()
        * ((sigma2_minus + sigma2_plus) / (f_hat * curvature)).powf(0.2)
        * (n as f64).powf(-0.2)
}

/// IK bandwidth from paired samples `(z, y)`.
pub fn select_ik(z: &[f64], y: &[f64], cutoff: f64, kernel: KernelKind) -> Result<BandwidthReport> {
    if z.len() != y.len() {
        return Err(Error::InvalidSpec(format!(
            "running variable has {} values but outcome has {}",
            z.len(),
            y.len()
        )));
    }
    if !cutoff.is_finite() || z.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("bandwidth inputs must be finite".into()));
    }
    let n = z.len();
    if n < 2 || sample_variance(z.iter().copied()) <= 0.0 {
        return Err(Error::DegenerateSpread);
    }
    let n_minus = z.iter().filter(|&&v| v < cutoff).count();
    let n_plus = n - n_minus;
    if n_minus < MIN_SIDE || n_plus < MIN_SIDE {
        return Err(Error::InsufficientSupport(format!(
            "{n_minus} observations below and {n_plus} at or above the cutoff, need {MIN_SIDE} each"
        )));
    }
    let nf = n as f64;
    let pairs = || z.iter().copied().zip(y.iter().copied());

    // Step 1
    let sd = sample_variance(z.iter().copied()).sqrt();
    let h1 = 1.84 * sd * nf.powf(-0.2);
    let near_minus: Vec<f64> = pairs()
        .filter(|&(v, _)| v >= cutoff - h1 && v < cutoff)
        .map(|p| p.1)
        .collect();
    let near_plus: Vec<f64> = pairs()
        .filter(|&(v, _)| v >= cutoff && v <= cutoff + h1)
        .map(|p| p.1)
        .collect();
    if near_minus.len() < 2 || near_plus.len() < 2 {
        return Err(Error::InsufficientSupport(format!(
            "pilot window holds {} and {} observations, need 2 each",
            near_minus.len(),
            near_plus.len()
        )));
    }
    let f_hat = (near_minus.len() + near_plus.len()) as f64 / (2.0 * nf * h1);
    let sigma2_minus = sample_variance(near_minus.iter().copied());
    let sigma2_plus = sample_variance(near_plus.iter().copied());

    // Step 2
    let lo = median(z.iter().copied().filter(|&v| v < cutoff).collect());
    let hi = median(z.iter().copied().filter(|&v| v >= cutoff).collect());
    let cubic: Vec<(f64, f64)> = pairs().filter(|&(v, _)| v >= lo && v <= hi).collect();
    let coef = polyfit(&cubic, cutoff, 3, true)
        .ok_or_else(|| Error::InsufficientSupport("cubic pilot fit is singular".into()))?;
    let m3 = 6.0 * coef[4];
    let side_pilot = |sigma2: f64, count: usize| {
        3.56 * (sigma2 / (f_hat * m3 * m3)).powf(1.0 / 7.0) * (count as f64).powf(-1.0 / 7.0)
    };
    let h2_minus = side_pilot(sigma2_minus, n_minus);
    let h2_plus = side_pilot(sigma2_plus, n_plus);

    // Step 3
    let side_fit = |h2: f64, below: bool| -> Result<(f64, f64)> {
        let pts: Vec<(f64, f64)> = pairs()
            .filter(|&(v, _)| {
                if below {
                    v < cutoff && v >= cutoff - h2
                } else {
                    v >= cutoff && v <= cutoff + h2
                }
            })
            .collect();
        let coef = polyfit(&pts, cutoff, 2, false).ok_or_else(|| {
            Error::InsufficientSupport(format!(
                "quadratic pilot on the {} side has {} observations",
                if below { "lower" } else { "upper" },
                pts.len()
            ))
        })?;
        Ok((2.0 * coef[2], pts.len() as f64))
    };
    let (m2_minus, n2_minus) = side_fit(h2_minus, true)?;
    let (m2_plus, n2_plus) = side_fit(h2_plus, false)?;
    let reg = |sigma2: f64, count: f64, h2: f64| {
        if h2.is_finite() {
            720.0 * sigma2 / (count * h2.powi(4))
        } else {
            0.0
        }
    };
    let inputs = IkInputs {
        sigma2_minus,
        sigma2_plus,
        f_hat,
        m2_minus,
        m2_plus,
        r_minus: reg(sigma2_minus, n2_minus, h2_minus),
        r_plus: reg(sigma2_plus, n2_plus, h2_plus),
    };

    // Step 4
    let h = ik_formula(&inputs, n, kernel);
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::DegenerateSpread);
    }
    Ok(BandwidthReport {
        h,
        pilot_h: h1,
        m3,
        h2_minus,
        h2_plus,
        inputs,
        kernel,
        kernel_constant: kernel.ik_constant(),
        n,
        n_minus,
        n_plus,
    })
}

/// IK bandwidth on the panel's `(Z, Y)` rows.
pub fn select_ik_panel(
    panel: &TrajectoryPanel,
    cutoff: f64,
    kernel: KernelKind,
    sample: BandwidthSample,
) -> Result<BandwidthReport> {
    let last = match sample {
        BandwidthSample::Pooled => panel.horizon(),
        BandwidthSample::FirstPeriod => 0,
    };
    let (mut z, mut y) = (Vec::new(), Vec::new());
    for unit in panel.units() {
        for obs in &unit[..=last] {
            if let Some(v) = obs.z {
                z.push(v);
                y.push(obs.y);
            }
        }
    }
    select_ik(&z, &y, cutoff, kernel)
}

fn sample_variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (count, sum) = xs.clone().fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
    if count < 2 {
        return 0.0;
    }
    let mean = sum / count as f64;
    xs.map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Least squares of `y` on `(1, [D,] x, .., x^degree)` with `x = z - c`.
fn polyfit(pts: &[(f64, f64)], cutoff: f64, degree: usize, jump: bool) -> Option<Vec<f64>> {
    let p = degree + 1 + usize::from(jump);
    if pts.len() < p {
        return None;
    }
    let row = |z: f64| {
        let x = z - cutoff;
        let mut r = vec![1.0];
        if jump {
            r.push(if z >= cutoff { 1.0 } else { 0.0 });
        }
        r.extend((1..=degree).map(|k| x.powi(k as i32)));
        r
    };
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for &(z, y) in pts {
        let r = row(z);
        for a in 0..p {
            xty[a] += r[a] * y;
            for b in 0..p {
                xtx[(a, b)] += r[a] * r[b];
            }
        }
    }
    let solver = SymSolver::new(&xtx);
    if solver.is_singular() {
        return None;
    }
    Some(solver.solve(&xty).iter().copied().collect())
}
