//! Monte Carlo coverage experiments.
//!
//! Each `(n, replication)` pair simulates one panel and selects one IK
//! bandwidth on it; every method and discount factor is then evaluated on
//! that same panel, so method comparisons within a cell are paired.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandwidth::{select_ik_panel, BandwidthSample};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorSpec, Mode};
use crate::exec::Execution;
use crate::inference::{estimate_with_interval, ConfidenceInterval};
use crate::kernels::KernelKind;
use crate::locallinear::Regressors;
use crate::simulator::{oracle_many, simulate_replication, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dynrd,
    StandardVsPartial,
    StandardVsTaurd,
    Naive,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Dynrd,
        Method::StandardVsPartial,
        Method::StandardVsTaurd,
        Method::Naive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dynrd => "dynrd",
            Method::StandardVsPartial => "standard-vs-partial",
            Method::StandardVsTaurd => "standard-vs-taurd",
            Method::Naive => "naive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BandwidthPolicy {
    /// IK on each simulated panel.
    Ik {
        sample: BandwidthSample,
    },
    /// `h = scale * n^(-1/5)`.
    Rate {
        scale: f64,
    },
    Fixed {
        h: f64,
    },
}

impl Default for BandwidthPolicy {
    fn default() -> Self {
        BandwidthPolicy::Ik {
            sample: BandwidthSample::Pooled,
        }
    }
}

impl BandwidthPolicy {
    fn fixed_for(&self, n: usize) -> Option<f64> {
        match *self {
            BandwidthPolicy::Ik { .. } => None,
            BandwidthPolicy::Rate { scale } => Some(scale * (n as f64).powf(-0.2)),
            BandwidthPolicy::Fixed { h } => Some(h),
        }
    }
}

/// Oracle value supplied in the plan instead of computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub gamma: f64,
    pub tau_rd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub sim: SimConfig,
    pub gammas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub seed: u64,
    pub kernel: KernelKind,
    pub regressors: Regressors,
    pub bandwidth: BandwidthPolicy,
    /// Leave empty to compute targets with the oracle.
    pub targets: Vec<Target>,
    pub oracle_replications: usize,
    pub oracle_delta: f64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentPlan {
    /// Laptop-sized: R = 500, n up to 8000.
    pub fn desk() -> Self {
        Self {
            sim: SimConfig::setting1(),
            gammas: vec![0.5, 0.8, 1.0],
            sample_sizes: vec![1000, 2000, 4000, 8000],
            replications: 500,
            methods: Method::ALL.to_vec(),
            alpha: 0.05,
            seed: 2024,
            kernel: KernelKind::Uniform,
            regressors: Regressors::TimeFe,
            bandwidth: BandwidthPolicy::default(),
            targets: Vec::new(),
            oracle_replications: 200_000,
            oracle_delta: 0.5,
        }
    }

    /// Full tables: R = 2000, n from 1000 to 128000.
    pub fn paper() -> Self {
        Self {
            sample_sizes: (0..8).map(|k| 1000 << k).collect(),
            replications: 2000,
            oracle_replications: 5_000_000,
            ..Self::desk()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            _ => Err(Error::InvalidSpec(format!(
                "unknown profile `{name}` (expected desk or paper)"
            ))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSpec(format!("plan: {}", e.message())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidSpec("replications must be at least 1".into()));
        }
        if self.gammas.is_empty() || self.sample_sizes.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidSpec(
                "gammas, sample_sizes and methods must be non-empty".into(),
            ));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(Error::InvalidSpec(format!(
                "gamma must lie in (0, 1], got {g}"
            )));
        }
        if self.sample_sizes.contains(&0) {
            return Err(Error::InvalidSpec("sample sizes must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub gamma: f64,
    pub tau_rd: f64,
    /// Zero for supplied targets.
    pub se: f64,
    pub computed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub method: Method,
    pub gamma: f64,
    pub n: usize,
    pub target: f64,
    pub replications: usize,
    pub failures: usize,
    /// Error names of failed replications with their counts.
    pub failure_kinds: Vec<(String, usize)>,
    pub coverage: f64,
    pub mc_se_coverage: f64,
    pub mean_width: f64,
    pub bias: f64,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    pub mean_bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub plan: ExperimentPlan,
    pub targets: Vec<TargetReport>,
    pub tau_partial: f64,
    pub cells: Vec<CellReport>,
}

impl McReport {
    pub fn cell(&self, method: Method, gamma: f64, n: usize) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.gamma == gamma && c.n == n)
    }
}

type Outcome = std::result::Result<ConfidenceInterval, &'static str>;

/// One replication: bandwidth and, per gamma, one outcome per method.
struct Replication {
    bandwidth: Option<f64>,
    outcomes: Vec<Vec<Outcome>>,
}

fn resolve_targets(plan: &ExperimentPlan, exec: Execution) -> Result<Vec<TargetReport>> {
    let missing: Vec<f64> = plan
        .gammas
        .iter()
        .copied()
        .filter(|g| !plan.targets.iter().any(|t| t.gamma == *g))
        .collect();
    let needs_oracle = plan.methods.iter().any(|m| *m != Method::StandardVsPartial);
    let computed = if missing.is_empty() || !needs_oracle {
        Vec::new()
    } else {
        oracle_many(
            &plan.sim,
            &missing,
            plan.oracle_delta,
            plan.oracle_replications,
            exec,
        )?
    };
    Ok(plan
        .gammas
        .iter()
        .map(|&gamma| {
            if let Some(t) = plan.targets.iter().find(|t| t.gamma == gamma) {
                TargetReport {
                    gamma,
                    tau_rd: t.tau_rd,
                    se: 0.0,
                    computed: false,
                }
            } else if let Some(o) = computed.iter().find(|o| o.gamma == gamma) {
                TargetReport {
                    gamma,
                    tau_rd: o.tau_rd,
                    se: o.se,
                    computed: true,
                }
            } else {
                TargetReport {
                    gamma,
                    tau_rd: f64::NAN,
                    se: f64::NAN,
                    computed: false,
                }
            }
        })
        .collect())
}

fn run_replication(plan: &ExperimentPlan, n: usize, rep: usize) -> Replication {
    let sim = SimConfig {
        n,
        seed: plan.seed,
        ..plan.sim
    };
    let replication = ((n as u64) << 32) | rep as u64;
    let fail_all = |kind: &'static str| Replication {
        bandwidth: None,
        outcomes: vec![vec![Err(kind); plan.methods.len()]; plan.gammas.len()],
    };
    let panel = match simulate_replication(&sim, replication, Execution::Sequential) {
        Ok(p) => p,
        Err(e) => return fail_all(e.name()),
    };
    let h = match plan.bandwidth {
        BandwidthPolicy::Ik { sample } => {
            match select_ik_panel(&panel, sim.cutoff, plan.kernel, sample) {
                Ok(r) => r.h,
                Err(e) => return fail_all(e.name()),
            }
        }
        ref other => other
            .fixed_for(n)
            .expect("non-IK policy has a fixed bandwidth"),
    };
    let run = |gamma: f64, mode: Mode| -> Outcome {
        let spec = EstimatorSpec {
            kernel: plan.kernel,
            gamma,
            bandwidth: h,
            cutoff: sim.cutoff,
            truncation: Default::default(),
            regressors: plan.regressors,
        };
        estimate_with_interval(&panel, &spec, mode, plan.alpha, Execution::Sequential)
            .map(|(_, _, ci)| ci)
            .map_err(|e| e.name())
    };
    // The standard regression does not depend on gamma.
    let wants_standard = plan
        .methods
        .iter()
        .any(|m| matches!(m, Method::StandardVsPartial | Method::StandardVsTaurd));
    let standard = wants_standard.then(|| run(1.0, Mode::BaselineStandard));
    let outcomes = plan
        .gammas
        .iter()
        .map(|&gamma| {
            plan.methods
                .iter()
                .map(|m| match m {
                    Method::Dynrd => run(gamma, Mode::FiniteHorizon),
                    Method::Naive => run(gamma, Mode::BaselineNaive),
                    Method::StandardVsPartial | Method::StandardVsTaurd => {
                        standard.expect("computed above")
                    }
                })
                .collect()
        })
        .collect();
    Replication {
        bandwidth: Some(h),
        outcomes,
    }
}

fn summarize(
    method: Method,
    gamma: f64,
    n: usize,
    target: f64,
    results: impl Iterator<Item = (Option<f64>, Outcome)>,
) -> CellReport {
    let (mut hits, mut ok, mut width, mut sum, mut sumsq) = (0usize, 0usize, 0.0, 0.0, 0.0);
    let (mut h_sum, mut h_count) = (0.0, 0usize);
    let mut kinds: Vec<(String, usize)> = Vec::new();
    let mut total = 0;
    for (h, outcome) in results {
        total += 1;
        if let Some(h) = h {
            h_sum += h;
            h_count += 1;
        }
        match outcome {
            Ok(ci) => {
                ok += 1;
                hits += usize::from(ci.covers(target));
                width += ci.width();
                sum += ci.estimate;
                sumsq += ci.estimate * ci.estimate;
            }
            Err(kind) => match kinds.iter_mut().find(|(k, _)| k == kind) {
                Some((_, c)) => *c += 1,
                None => kinds.push((kind.to_string(), 1)),
            },
        }
    }
    let okf = ok as f64;
    let coverage = if ok > 0 { hits as f64 / okf } else { f64::NAN };
    let mean = sum / okf;
    let var = if ok > 1 {
        ((sumsq - okf * mean * mean) / (okf - 1.0)).max(0.0)
    } else {
        0.0
    };
    CellReport {
        method,
        gamma,
        n,
        target,
        replications: total,
        failures: total - ok,
        failure_kinds: kinds,
        coverage,
        mc_se_coverage: (coverage * (1.0 - coverage) / okf).sqrt(),
        mean_width: width / okf,
        bias: mean - target,
        mean_estimate: mean,
        sd_estimate: var.sqrt(),
        mean_bandwidth: h_sum / h_count as f64,
    }
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<McReport> {
    run_experiment_with(plan, Execution::default())
}

pub fn run_experiment_with(plan: &ExperimentPlan, exec: Execution) -> Result<McReport> {
    plan.validate()?;
    let targets = resolve_targets(plan, exec)?;
    let tau_partial = plan.sim.partial_effect();
    let mut cells = Vec::new();
    for &n in &plan.sample_sizes {
        let reps = exec.map(plan.replications, |r| run_replication(plan, n, r));
        for (g, target) in targets.iter().enumerate() {
            for (m, &method) in plan.methods.iter().enumerate() {
                let goal = if method == Method::StandardVsPartial {
                    tau_partial
                } else {
                    target.tau_rd
                };
                let results = reps.iter().map(|rep| (rep.bandwidth, rep.outcomes[g][m]));
                cells.push(summarize(method, target.gamma, n, goal, results));
            }
        }
        log::info!("finished n = {n}");
    }
    Ok(McReport {
        plan: plan.clone(),
        targets,
        tau_partial,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(format!(
                "unknown table format `{s}` (expected csv or markdown)"
            )),
        }
    }
}

/// One row per `(gamma, n)`, a coverage/width column pair per method.
pub fn render_tables(report: &McReport, format: TableFormat) -> String {
    let mut methods: Vec<Method> = Vec::new();
    let mut rows: Vec<(f64, usize)> = Vec::new();
    for c in &report.cells {
        if !methods.contains(&c.method) {
            methods.push(c.method);
        }
        if !rows.contains(&(c.gamma, c.n)) {
            rows.push((c.gamma, c.n));
        }
    }
    let mut header = vec!["gamma".to_string(), "n".to_string()];
    for m in &methods {
        header.push(format!("{}_coverage", m.name()));
        header.push(format!("{}_width", m.name()));
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|&(gamma, n)| {
            let mut row = vec![gamma.to_string(), n.to_string()];
            for &m in &methods {
                match report.cell(m, gamma, n) {
                    Some(c) => {
                        row.push(format!("{:.4}", c.coverage));
                        row.push(format!("{:.4}", c.mean_width));
                    }
                    None => row.extend(["".to_string(), "".to_string()]),
                }
            }
            row
        })
        .collect();

    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            for line in std::iter::once(&header).chain(&body) {
                writeln!(out, "{}", line.join(",")).unwrap();
            }
        }
        TableFormat::Markdown => {
            writeln!(out, "| {} |", header.join(" | ")).unwrap();
            writeln!(out, "|{}", "---|".repeat(header.len())).unwrap();
            for line in &body {
                writeln!(out, "| {} |", line.join(" | ")).unwrap();
            }
        }
    }
    out
}
