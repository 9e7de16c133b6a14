//! Autoregressive thresholding DGP and a finite-difference oracle for the
//! dynamic marginal policy effect.
//!
//! ```text
//! Z[t+1] = delta + Z[t] - (1 - rho)(Z[t] - mu0) - tau A[t] (Z[t] - mu0)+ + s eps[t]
//! A[t]   = 1{Z[t] >= c}
//! Y[t]   = -Z[t+1],   t = 0..T-1
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::panel::{Observation, TrajectoryPanel};
use crate::rng::{stream, ORACLE_REPLICATION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub cutoff: f64,
    pub baseline_mean: f64,
    pub autocorr: f64,
    pub treat_intensity: f64,
    pub drift: f64,
    pub noise_scale: f64,
    /// Number of transitions `T`; the emitted panel has periods `0..T`.
    pub horizon: usize,
    pub n: usize,
    pub init_mean: f64,
    pub init_sd: f64,
    pub seed: u64,
    /// Replace every normal draw by zero.
    pub zero_noise: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::setting1()
    }
}

impl SimConfig {
    /// No drift.
    pub fn setting1() -> Self {
        let autocorr = 0.9;
        Self {
            cutoff: 110.0,
            baseline_mean: 100.0,
            autocorr,
            treat_intensity: 0.1,
            drift: 0.0,
            noise_scale: 4.0,
            horizon: 12,
            n: 2000,
            init_mean: 100.0,
            init_sd: 4.0 / (1.0 - autocorr * autocorr).sqrt(),
            seed: 0,
            zero_noise: false,
        }
    }

    /// Unit upward drift.
    pub fn setting2() -> Self {
        Self {
            drift: 1.0,
            ..Self::setting1()
        }
    }

    /// Effect of treatment on the next running variable at the cutoff,
    /// `tau (c - mu0)`, which is the target of the pooled standard regression.
    pub fn partial_effect(&self) -> f64 {
        self.treat_intensity * (self.cutoff - self.baseline_mean).max(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.cutoff,
            self.baseline_mean,
            self.autocorr,
            self.treat_intensity,
            self.drift,
            self.noise_scale,
            self.init_mean,
            self.init_sd,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(
                "simulation parameters must be finite".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        if self.noise_scale < 0.0 || self.init_sd < 0.0 {
            return Err(Error::InvalidSpec(
                "noise_scale and init_sd must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// One transition from `z` under threshold `c`; returns `(A, Z')`.
    #[inline]
    pub fn step(&self, z: f64, c: f64, eps: f64) -> (bool, f64) {
        let a = z >= c;
        let dev = z - self.baseline_mean;
        let push = if a {
            self.treat_intensity * dev.max(0.0)
        } else {
            0.0
        };
        let next = self.drift + z - (1.0 - self.autocorr) * dev - push + self.noise_scale * eps;
        (a, next)
    }

    fn draws<R: Rng>(&self, rng: &mut R) -> (f64, Vec<f64>) {
        let mut normal = || -> f64 {
            if self.zero_noise {
                0.0
            } else {
                rng.sample(StandardNormal)
            }
        };
        let z0 = self.init_mean + self.init_sd * normal();
        let eps = (0..self.horizon).map(|_| normal()).collect();
        (z0, eps)
    }
}

/// One unit's observations under threshold `c`.
fn trajectory(cfg: &SimConfig, c: f64, z0: f64, eps: &[f64]) -> Vec<Observation> {
    let mut z = z0;
    eps.iter()
        .map(|&e| {
            let (a, next) = cfg.step(z, c, e);
            let obs = Observation::new(Some(z), a, -next);
            z = next;
            obs
        })
        .collect()
}

pub fn simulate(config: &SimConfig) -> Result<TrajectoryPanel> {
    simulate_replication(config, 0, Execution::default())
}

/// Panel for replication `replication`; unit `i` draws from stream
/// `(seed, replication, i)`.
pub fn simulate_replication(
    config: &SimConfig,
    replication: u64,
    exec: Execution,
) -> Result<TrajectoryPanel> {
    config.validate()?;
    let units = exec.map(config.n, |i| {
        let mut rng = stream(config.seed, replication, i as u64);
        let (z0, eps) = config.draws(&mut rng);
        trajectory(config, config.cutoff, z0, &eps)
    });
    let data = units.into_iter().flatten().collect();
    TrajectoryPanel::new(config.n, config.horizon - 1, data, Some(config.cutoff))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub delta_c: f64,
    pub replications: usize,
    pub gamma: f64,
    pub sim: SimConfig,
}

impl OracleConfig {
    pub fn new(sim: SimConfig, gamma: f64) -> Self {
        Self {
            delta_c: 0.5,
            replications: 200_000,
            gamma,
            sim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub tau_rd: f64,
    pub se: f64,
    pub gamma: f64,
    pub delta_c: f64,
    pub replications: usize,
    /// Same estimate at `delta_c / 2`.
    pub tau_rd_half_delta: f64,
    /// `(4 tau(delta/2) - tau(delta)) / 3`; the gap to `tau_rd` bounds the
    /// discretization bias.
    pub richardson: f64,
}

pub fn oracle_tau_rd(config: &OracleConfig) -> Result<OracleEstimate> {
    oracle_many(
        &config.sim,
        &[config.gamma],
        config.delta_c,
        config.replications,
        Execution::default(),
    )
    .map(|mut v| v.remove(0))
}

/// `[sum dV, sum dA, sum dV^2, sum dA^2, sum dV dA]` at one step size.
type Moments = [f64; 5];

/// Oracle estimates for several discount factors from one set of
/// common-random-number trajectories.
pub fn oracle_many(
    sim: &SimConfig,
    gammas: &[f64],
    delta_c: f64,
    replications: usize,
    exec: Execution,
) -> Result<Vec<OracleEstimate>> {
    sim.validate()?;
    if !(delta_c > 0.0 && delta_c.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "delta_c must be positive, got {delta_c}"
        )));
    }
    if replications < 2 {
        return Err(Error::InvalidSpec(
            "oracle needs at least 2 replications".into(),
        ));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
        return Err(Error::InvalidSpec(format!(
            "gamma must lie in (0, 1], got {g}"
        )));
    }
    let c = sim.cutoff;
    let thresholds = [
        c - delta_c,
        c + delta_c,
        c - delta_c / 2.0,
        c + delta_c / 2.0,
    ];
    let k = gammas.len();

    // Per gamma: moments at delta, then at delta / 2.
    let sums = exec
        .block_reduce(
            replications,
            |range| {
                let mut acc = vec![[[0.0; 5]; 2]; k];
                let mut v = [[0.0; 2]; 4];
                for r in range {
                    let mut rng = stream(sim.seed, ORACLE_REPLICATION, r as u64);
                    let (z0, eps) = sim.draws(&mut rng);
                    for (j, &gamma) in gammas.iter().enumerate() {
                        for (slot, &thr) in thresholds.iter().enumerate() {
                            v[slot] = discounted_values(sim, thr, gamma, z0, &eps);
                        }
                        for (level, (lo, hi)) in [(0, 1), (2, 3)].into_iter().enumerate() {
                            let dv = v[lo][0] - v[hi][0];
                            let da = v[lo][1] - v[hi][1];
                            let m: &mut Moments = &mut acc[j][level];
                            m[0] += dv;
                            m[1] += da;
                            m[2] += dv * dv;
                            m[3] += da * da;
                            m[4] += dv * da;
                        }
                    }
                }
                acc
            },
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    for level in 0..2 {
                        for q in 0..5 {
                            x[level][q] += y[level][q];
                        }
                    }
                }
                a
            },
        )
        .expect("at least one replication");

    gammas
        .iter()
        .zip(&sums)
        .map(|(&gamma, [full, half])| {
            let (tau, se) = ratio(full, replications)?;
            let (tau_half, _) = ratio(half, replications)?;
            Ok(OracleEstimate {
                tau_rd: tau,
                se,
                gamma,
                delta_c,
                replications,
                tau_rd_half_delta: tau_half,
                richardson: (4.0 * tau_half - tau) / 3.0,
            })
        })
        .collect()
}

/// `(sum gamma^t Y[t], sum gamma^t A[t])` of one trajectory under threshold `c`.
fn discounted_values(sim: &SimConfig, c: f64, gamma: f64, z0: f64, eps: &[f64]) -> [f64; 2] {
    let (mut z, mut weight) = (z0, 1.0);
    let (mut v, mut va) = (0.0, 0.0);
    for &e in eps {
        let (a, next) = sim.step(z, c, e);
        v -= weight * next;
        if a {
            va += weight;
        }
        weight *= gamma;
        z = next;
    }
    [v, va]
}

/// Ratio of means and its delta-method standard error.
fn ratio(m: &Moments, replications: usize) -> Result<(f64, f64)> {
    let r = replications as f64;
    let (mean_v, mean_a) = (m[0] / r, m[1] / r);
    let var_a = ((m[3] - r * mean_a * mean_a) / (r - 1.0)).max(0.0);
    let se_a = (var_a / r).sqrt();
    if mean_a.is_nan() || mean_a.abs() < 10.0 * se_a || mean_a == 0.0 {
        return Err(Error::DegenerateDenominator(format!(
            "treatment-frequency difference {mean_a:e} is within 10 standard errors ({se_a:e}) of zero"
        )));
    }
    let tau = mean_v / mean_a;
    // residual dV - tau dA has mean zero by construction
    let ss = m[2] - 2.0 * tau * m[4] + tau * tau * m[3];
    let se = ((ss / (r - 1.0)).max(0.0) / r).sqrt() / mean_a.abs();
    Ok((tau, se))
}
