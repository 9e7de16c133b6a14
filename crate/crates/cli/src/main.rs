use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use dynrd::bandwidth::{select_ik_panel, BandwidthSample};
use dynrd::harness::{render_tables, run_experiment, ExperimentPlan, TableFormat};
use dynrd::inference::estimate_with_interval;
use dynrd::panel::{read_panel, write_panel_to};
use dynrd::simulator::oracle_many;
use dynrd::{
    ColumnMap, Error, EstimatorSpec, Execution, KernelKind, Mode, OracleConfig, Regressors,
    SimConfig, TrajectoryPanel, Truncation,
};

mod output;

#[derive(Parser, Debug)]
#[command(
    name = "dynrd",
    version,
    about = "Dynamic regression discontinuity estimation"
)]
struct Cli {
    /// Random seed for simulate, oracle and montecarlo.
    #[arg(long, env = "DYNRD_SEED", global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    /// Write the primary output here instead of stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a panel from the autoregressive thresholding process.
    Simulate(SimArgs),
    /// Estimate the dynamic policy effect on a panel CSV.
    Estimate(EstimateArgs),
    /// Imbens-Kalyanaraman bandwidth for a panel CSV.
    Bandwidth(BandwidthArgs),
    /// Finite-difference oracle for the estimand.
    Oracle(OracleArgs),
    /// Monte Carlo coverage experiment.
    Montecarlo(McArgs),
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// Preset: 1 (no drift) or 2 (unit drift).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    setting: u8,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    baseline_mean: Option<f64>,
    #[arg(long)]
    autocorr: Option<f64>,
    #[arg(long)]
    treat_intensity: Option<f64>,
    #[arg(long)]
    drift: Option<f64>,
    #[arg(long)]
    noise_scale: Option<f64>,
    /// Number of transitions; the panel has this many periods.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    init_mean: Option<f64>,
    #[arg(long)]
    init_sd: Option<f64>,
    #[arg(long)]
    zero_noise: bool,
}

impl SimArgs {
    fn resolve(&self, seed: Option<u64>) -> SimConfig {
        let mut c = if self.setting == 2 {
            SimConfig::setting2()
        } else {
            SimConfig::setting1()
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(
            cutoff,
            baseline_mean,
            autocorr,
            treat_intensity,
            drift,
            noise_scale,
            horizon,
            n,
            init_mean,
            init_sd
        );
        c.zero_noise |= self.zero_noise;
        if let Some(s) = seed {
            c.seed = s;
        }
        c
    }
}

#[derive(Args, Debug, Clone)]
struct PanelArgs {
    /// Panel CSV; read from stdin when omitted.
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 110.0)]
    cutoff: f64,
    #[arg(long, default_value = "unit")]
    unit_col: String,
    #[arg(long, default_value = "time")]
    time_col: String,
    #[arg(long, default_value = "z")]
    z_col: String,
    #[arg(long, default_value = "a")]
    a_col: String,
    #[arg(long, default_value = "y")]
    y_col: String,
}

impl PanelArgs {
    fn columns(&self) -> ColumnMap {
        ColumnMap {
            unit: self.unit_col.clone(),
            time: self.time_col.clone(),
            z: self.z_col.clone(),
            a: self.a_col.clone(),
            y: self.y_col.clone(),
        }
    }

    fn load(&self) -> Result<TrajectoryPanel, Error> {
        let reader: Box<dyn Read> = match &self.input {
            Some(path) => Box::new(BufReader::new(File::open(path)?)),
            None => Box::new(io::stdin().lock()),
        };
        read_panel(reader, &self.columns(), Some(self.cutoff))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BandwidthChoice {
    Ik,
    Value(f64),
}

fn parse_bandwidth(s: &str) -> Result<BandwidthChoice, String> {
    if s == "ik" {
        return Ok(BandwidthChoice::Ik);
    }
    match s.parse::<f64>() {
        Ok(h) if h > 0.0 && h.is_finite() => Ok(BandwidthChoice::Value(h)),
        _ => Err(format!(
            "bandwidth must be `ik` or a positive number, got `{s}`"
        )),
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Toggle {
    On,
    Off,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Sample {
    Pooled,
    FirstPeriod,
}

impl From<Sample> for BandwidthSample {
    fn from(s: Sample) -> Self {
        match s {
            Sample::Pooled => BandwidthSample::Pooled,
            Sample::FirstPeriod => BandwidthSample::FirstPeriod,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct EstimateArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// dynrd, dynrd-inf, standard or naive.
    #[arg(long, default_value = "dynrd")]
    mode: Mode,
    #[arg(long, default_value_t = 0.8)]
    gamma: f64,
    /// `ik` or a positive number.
    #[arg(long, default_value = "ik", value_parser = parse_bandwidth)]
    bandwidth: BandwidthChoice,
    /// Rows used by the IK selector.
    #[arg(long, value_enum, default_value = "pooled")]
    bandwidth_sample: Sample,
    #[arg(long, default_value = "uniform")]
    kernel: KernelKind,
    /// Time fixed effects.
    #[arg(long, value_enum, default_value = "on")]
    fe: Toggle,
    /// `auto` or a positive integer (dynrd-inf only).
    #[arg(long, default_value = "auto")]
    truncation: Truncation,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args, Debug, Clone)]
struct BandwidthArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, default_value = "uniform")]
    kernel: KernelKind,
    #[arg(long, value_enum, default_value = "pooled")]
    sample: Sample,
}

#[derive(Args, Debug, Clone)]
struct OracleArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// One or more discount factors, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.8")]
    gamma: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    delta_c: f64,
    #[arg(long, default_value_t = 200_000)]
    replications: usize,
}

#[derive(Args, Debug, Clone)]
struct McArgs {
    /// TOML plan; fields left out take the profile's values.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, default_value = "desk", value_parser = ["desk", "paper"])]
    profile: String,
    #[arg(long, default_value = "csv")]
    format: TableFormat,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sample_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Also write the full report as JSON.
    #[arg(long)]
    report_json: Option<PathBuf>,
}

enum Failure {
    Data(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("{}", json!({ "error": e.name(), "message": e.to_string() }));
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!(
                "{}",
                json!({ "error": "IoFailure", "message": e.to_string() })
            );
            ExitCode::from(2)
        }
    }
}

fn sink(cli: &Cli) -> io::Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => Box::new(io::BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(cli: &Cli, value: &impl Serialize) -> Result<(), Failure> {
    let mut w = sink(cli)?;
    output::write_json(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Simulate(args) => {
            let config = args.resolve(cli.seed);
            log::info!("config: {}", output::to_string(&config));
            let panel = dynrd::simulate(&config)?;
            let mut w = sink(cli)?;
            write_panel_to(&panel, &mut w)?;
            w.flush()?;
        }
        Command::Estimate(args) => {
            let panel = args.panel.load()?;
            let (bandwidth, source) = match args.bandwidth {
                BandwidthChoice::Value(h) => (h, "user"),
                BandwidthChoice::Ik => {
                    let r = select_ik_panel(
                        &panel,
                        args.panel.cutoff,
                        args.kernel,
                        args.bandwidth_sample.into(),
                    )?;
                    (r.h, "ik")
                }
            };
            let spec = EstimatorSpec {
                kernel: args.kernel,
                gamma: args.gamma,
                bandwidth,
                cutoff: args.panel.cutoff,
                truncation: args.truncation,
                regressors: match args.fe {
                    Toggle::On => Regressors::TimeFe,
                    Toggle::Off => Regressors::Base,
                },
            };
            let (fit, variance, ci) =
                estimate_with_interval(&panel, &spec, args.mode, args.alpha, Execution::default())?;
            let value = json!({
                "config": {
                    "mode": args.mode.cli_name(),
                    "spec": spec,
                    "bandwidth_source": source,
                    "alpha": args.alpha,
                    "input": args.panel.input,
                    "threads": cli.threads,
                },
                "n": fit.n,
                "horizon": panel.horizon(),
                "t_max": fit.t_max,
                "truncation": fit.truncation,
                "bandwidth": bandwidth,
                "tau_rd": fit.tau_rd,
                "tau_g": fit.tau_g,
                "tau_h": fit.tau_h,
                "se": ci.se,
                "ci_lower": ci.lower,
                "ci_upper": ci.upper,
                "alpha": ci.alpha,
                "variance": variance,
            });
            emit_json(cli, &value)?;
        }
        Command::Bandwidth(args) => {
            let panel = args.panel.load()?;
            let report =
                select_ik_panel(&panel, args.panel.cutoff, args.kernel, args.sample.into())?;
            let mut value = serde_json::to_value(report).expect("report serializes");
            value["config"] = json!({
                "cutoff": args.panel.cutoff,
                "kernel": args.kernel,
                "sample": BandwidthSample::from(args.sample),
                "input": args.panel.input,
            });
            emit_json(cli, &value)?;
        }
        Command::Oracle(args) => {
            let sim = args.sim.resolve(cli.seed);
            let estimates = oracle_many(
                &sim,
                &args.gamma,
                args.delta_c,
                args.replications,
                Execution::default(),
            )?;
            let config = |gamma| OracleConfig {
                delta_c: args.delta_c,
                replications: args.replications,
                gamma,
                sim,
            };
            let records: Vec<Value> = estimates
                .iter()
                .map(|e| {
                    let mut v = serde_json::to_value(e).expect("estimate serializes");
                    v["config"] = serde_json::to_value(config(e.gamma)).expect("config serializes");
                    v
                })
                .collect();
            if records.len() == 1 {
                emit_json(cli, &records[0])?;
            } else {
                emit_json(cli, &records)?;
            }
        }
        Command::Montecarlo(args) => {
            let mut plan = match &args.plan {
                Some(path) => {
                    let base = ExperimentPlan::profile(&args.profile)?;
                    let text = std::fs::read_to_string(path)?;
                    merge_plan(base, &text)?
                }
                None => ExperimentPlan::profile(&args.profile)?,
            };
            if let Some(r) = args.replications {
                plan.replications = r;
            }
            if let Some(n) = &args.sample_sizes {
                plan.sample_sizes = n.clone();
            }
            if let Some(g) = &args.gammas {
                plan.gammas = g.clone();
            }
            if let Some(s) = cli.seed {
                plan.seed = s;
            }
            eprintln!("{}", output::to_string(&json!({ "config": plan })));
            let report = run_experiment(&plan)?;
            if let Some(path) = &args.report_json {
                let mut w = io::BufWriter::new(File::create(path)?);
                output::write_json(&mut w, &report)?;
                w.flush()?;
            }
            let mut w = sink(cli)?;
            w.write_all(render_tables(&report, args.format).as_bytes())?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Overlays the keys present in `text` on top of `base`.
fn merge_plan(base: ExperimentPlan, text: &str) -> Result<ExperimentPlan, Error> {
    let overlay: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::InvalidSpec(format!("plan: {}", e.message())))?;
    let mut merged: toml::Table = base.to_toml().parse().expect("plan serializes to TOML");
    merge_tables(&mut merged, overlay);
    ExperimentPlan::from_toml(&merged.to_string())
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
