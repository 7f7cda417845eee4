//! `corrlink` command-line front end.

mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use corrlink::linalg::{EquationStore, FieldSpec};
use corrlink::protocol::{
    mean_over_completed, run_batch, simulate_detailed, trial_seed, Mode, Phase1Length, SimConfig, SimReport,
};
use corrlink::region::{export_boundary, max_symmetric_sum_rate, region};
use corrlink::verifier::{
    compare_to_region, estimate_rank_ratio, estimate_rank_ratio_random, linspace, sweep, RankRatioEstimate,
    RegionComparison, SweepAxis, SweepSim,
};
use corrlink::{build_joint_pmf, CorrelationParams};

use output::{csv_bytes, deliver, json_bytes, RunManifest};

const SEED_VAR: &str = "CORRLINK_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "corrlink",
    version,
    about = "Capacity regions and protocol simulation for two-user interference channels with correlated shadowing",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
struct Channel {
    /// Marginal link-on probability
    #[arg(long)]
    p: f64,
    /// Correlation between the two links of a transmitter
    #[arg(long = "rho-tx", allow_negative_numbers = true)]
    rho_tx: f64,
    /// Correlation between the two links of a receiver
    #[arg(long = "rho-rx", allow_negative_numbers = true)]
    rho_rx: f64,
}

impl Channel {
    fn params(&self) -> Result<CorrelationParams> {
        Ok(CorrelationParams::new(self.p, self.rho_tx, self.rho_rx)?)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Ledger,
    Algebraic,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Phase1Arg {
    Drain,
    Fixed,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AxisArg {
    P,
    RhoTx,
    RhoRx,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form capacity region
    Region {
        #[command(flatten)]
        channel: Channel,
        /// Also write the boundary polyline as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum-entropy joint distribution of the 16 link states
    Dist {
        #[command(flatten)]
        channel: Channel,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the retransmission protocol
    Simulate(SimulateArgs),
    /// Monte-Carlo checks
    Verify {
        #[command(subcommand)]
        check: VerifyCommand,
    },
    /// Maximum symmetric sum-rate along one parameter axis, as CSV
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    channel: Channel,
    /// Packets per transmitter
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Ledger)]
    mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Defaults to $CORRLINK_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    /// Prime modulus of the coding field (algebraic mode)
    #[arg(long, default_value_t = FieldSpec::default().modulus())]
    field_modulus: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the first trial's receiver equations as JSON (algebraic mode)
    #[arg(long)]
    dump_equations: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Exit with status 2 when the fraction of halted trials exceeds this
    #[arg(long, default_value_t = 0.1)]
    halt_tolerance: f64,
    #[arg(long, value_enum, default_value_t = Phase1Arg::Drain)]
    phase1: Phase1Arg,
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    /// Rank of Tx1's precoder seen through the cross link versus the direct link
    RankRatio(RankRatioArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct RankRatioArgs {
    #[command(flatten)]
    channel: Channel,
    #[arg(long, default_value_t = 200)]
    m: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = FieldSpec::default().modulus())]
    field_modulus: u64,
    /// Use this many slots of uniformly random precoders instead of the protocol's
    #[arg(long)]
    random_slots: Option<usize>,
    #[arg(long, default_value_t = 0.02)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: AxisArg,
    #[arg(long, allow_negative_numbers = true)]
    from: f64,
    #[arg(long, allow_negative_numbers = true)]
    to: f64,
    #[arg(long, default_value_t = 21)]
    points: usize,
    /// Fixed values for the axes not swept
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long = "rho-tx", allow_negative_numbers = true, default_value_t = 0.0)]
    rho_tx: f64,
    #[arg(long = "rho-rx", allow_negative_numbers = true, default_value_t = 0.0)]
    rho_rx: f64,
    /// Add a ledger-mode simulated column
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 10_000)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_seed(seed: Option<u64>) -> Result<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_VAR}={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

fn field(modulus: u64) -> Result<FieldSpec> {
    Ok(FieldSpec::new(modulus)?)
}

fn outputs(paths: &[&Option<PathBuf>]) -> Vec<PathBuf> {
    paths.iter().filter_map(|p| (*p).clone()).collect()
}

#[derive(Serialize)]
struct RegionOut {
    p: f64,
    rho_tx: f64,
    rho_rx: f64,
    beta: f64,
    p_rx_00: f64,
    vertices: Vec<[f64; 2]>,
    max_symmetric_sum_rate: f64,
}

#[derive(Serialize)]
struct Point {
    r1: f64,
    r2: f64,
}

fn cmd_region(channel: &Channel, csv: &Option<PathBuf>, resolution: usize, out: &Option<PathBuf>) -> Result<()> {
    let params = channel.params()?;
    let r = region(&params);
    let body = RegionOut {
        p: r.p,
        rho_tx: r.rho_tx,
        rho_rx: r.rho_rx,
        beta: r.beta,
        p_rx_00: r.p_rx_00,
        vertices: r.vertices.iter().map(|&(a, b)| [a, b]).collect(),
        max_symmetric_sum_rate: max_symmetric_sum_rate(&params),
    };
    let all = outputs(&[out, csv]);
    let mut manifest = RunManifest::new(
        "region",
        serde_json::json!({ "channel": channel, "resolution": resolution }),
        None,
    );
    deliver(out.as_deref(), &json_bytes(&body)?, &mut manifest, &all)?;
    if let Some(path) = csv {
        let pts: Vec<Point> = export_boundary(&r, resolution)
            .into_iter()
            .map(|(r1, r2)| Point { r1, r2 })
            .collect();
        deliver(Some(path), &csv_bytes(&["r1", "r2"], &pts)?, &mut manifest, &all)?;
    }
    Ok(())
}

fn cmd_dist(channel: &Channel, out: &Option<PathBuf>) -> Result<()> {
    let pmf = build_joint_pmf(&channel.params()?)?;
    let mut manifest = RunManifest::new("dist", serde_json::json!({ "channel": channel }), None);
    deliver(out.as_deref(), &json_bytes(&pmf.to_map())?, &mut manifest, &outputs(&[out]))
}

#[derive(Serialize)]
struct Summary {
    completed: usize,
    halted: usize,
    halt_rate: f64,
    mean_r1: Option<f64>,
    mean_r2: Option<f64>,
    mean_total_slots: Option<f64>,
    max_symmetric_sum_rate: f64,
    region: RegionComparison,
}

#[derive(Serialize)]
struct SimulateOut<'a> {
    params: CorrelationParams,
    m: usize,
    mode: ModeArg,
    field_modulus: u64,
    seed: u64,
    trials: usize,
    pmf: BTreeMap<String, f64>,
    reports: &'a [SimReport],
    summary: Summary,
}

#[derive(Serialize)]
struct EquationDump<'a> {
    seed: u64,
    field_modulus: u64,
    receivers: &'a [EquationStore; 2],
    payloads: &'a [Vec<u64>; 2],
}

/// Returns the halt rate.
fn cmd_simulate(a: &SimulateArgs) -> Result<f64> {
    let params = a.channel.params()?;
    let seed = resolve_seed(a.seed)?;
    let f = field(a.field_modulus)?;
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let mode = match a.mode {
        ModeArg::Ledger => Mode::Ledger,
        ModeArg::Algebraic => Mode::Algebraic,
    };
    if a.dump_equations.is_some() && mode != Mode::Algebraic {
        bail!("--dump-equations requires --mode algebraic");
    }
    let mut cfg = SimConfig::new(params, a.m, mode).with_field(f).with_seed(seed);
    cfg.phase1_length = match a.phase1 {
        Phase1Arg::Drain => Phase1Length::Drain,
        Phase1Arg::Fixed => Phase1Length::Fixed,
    };
    cfg.validate()?;
    let pmf = Arc::new(build_joint_pmf(&params)?);
    let reports = run_batch(&cfg, a.trials, a.jobs.max(1))?;

    let halted = reports.iter().filter(|r| r.halted.is_halted()).count();
    let halt_rate = halted as f64 / reports.len() as f64;
    let summary = Summary {
        completed: reports.len() - halted,
        halted,
        halt_rate,
        mean_r1: mean_over_completed(&reports, |r| r.r1),
        mean_r2: mean_over_completed(&reports, |r| r.r2),
        mean_total_slots: mean_over_completed(&reports, |r| r.total_slots() as f64),
        max_symmetric_sum_rate: max_symmetric_sum_rate(&params),
        region: compare_to_region(&reports, &region(&params), 0.02),
    };
    let body = SimulateOut {
        params,
        m: a.m,
        mode: a.mode,
        field_modulus: f.modulus(),
        seed,
        trials: a.trials,
        pmf: pmf.to_map(),
        reports: &reports,
        summary,
    };
    let all = outputs(&[&a.out, &a.dump_equations]);
    let mut manifest = RunManifest::new("simulate", serde_json::to_value(a)?, Some(seed));
    deliver(a.out.as_deref(), &json_bytes(&body)?, &mut manifest, &all)?;

    if let Some(path) = &a.dump_equations {
        let s = trial_seed(seed, 0);
        let out = simulate_detailed(&cfg.with_seed(s), pmf)?;
        let (Some(stores), Some(payloads)) = (out.stores.as_ref(), out.payloads.as_ref()) else {
            bail!("no equations recorded");
        };
        let dump = EquationDump {
            seed: s,
            field_modulus: f.modulus(),
            receivers: stores,
            payloads,
        };
        deliver(Some(path), &json_bytes(&dump)?, &mut manifest, &all)?;
    }
    Ok(halt_rate)
}

#[derive(Serialize)]
struct RankRatioOut {
    params: CorrelationParams,
    precoders: &'static str,
    m: usize,
    seed: u64,
    field_modulus: u64,
    estimate: RankRatioEstimate,
    ratio: f64,
    inverse_beta: f64,
    tolerance: f64,
    holds: bool,
}

fn cmd_rank_ratio(a: &RankRatioArgs) -> Result<()> {
    let params = a.channel.params()?;
    let seed = resolve_seed(a.seed)?;
    let f = field(a.field_modulus)?;
    if a.trials == 0 || a.m == 0 {
        bail!("--m and --trials must be at least 1");
    }
    let (estimate, precoders) = match a.random_slots {
        Some(slots) => (estimate_rank_ratio_random(&params, a.m, slots, a.trials, seed, f)?, "random"),
        None => (estimate_rank_ratio(&params, a.m, a.trials, seed, f)?, "protocol"),
    };
    let body = RankRatioOut {
        params,
        precoders,
        m: a.m,
        seed,
        field_modulus: f.modulus(),
        ratio: estimate.ratio(),
        inverse_beta: 1.0 / estimate.beta_ref,
        tolerance: a.tolerance,
        holds: estimate.holds(a.tolerance),
        estimate,
    };
    let mut manifest = RunManifest::new("verify rank-ratio", serde_json::to_value(a)?, Some(seed));
    deliver(a.out.as_deref(), &json_bytes(&body)?, &mut manifest, &outputs(&[&a.out]))
}

#[derive(Serialize)]
struct SweepCsvRow {
    param: f64,
    analytic: String,
    simulated: Option<f64>,
    trials: usize,
    stderr: Option<f64>,
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    if a.points == 0 {
        bail!("--points must be at least 1");
    }
    let axis = match a.axis {
        AxisArg::P => SweepAxis::P,
        AxisArg::RhoTx => SweepAxis::RhoTx,
        AxisArg::RhoRx => SweepAxis::RhoRx,
    };
    let seed = resolve_seed(a.seed)?;
    let sim = a.simulate.then_some(SweepSim {
        m: a.m,
        trials: a.trials,
        seed,
        jobs: a.jobs.max(1),
    });
    let rows = sweep(axis, &linspace(a.from, a.to, a.points), (a.p, a.rho_tx, a.rho_rx), sim);
    let mut csv_rows = Vec::with_capacity(rows.len());
    for r in rows {
        if let Some(why) = &r.skipped {
            eprintln!("skipped {} = {}: {why}", axis_name(a.axis), r.param);
        }
        csv_rows.push(SweepCsvRow {
            param: r.param,
            analytic: r.analytic.map_or_else(|| "skipped".to_string(), |v| format!("{v:?}")),
            simulated: r.simulated,
            trials: r.trials,
            stderr: r.stderr,
        });
    }
    let bytes = csv_bytes(&["param", "analytic", "simulated", "trials", "stderr"], &csv_rows)?;
    let mut manifest = RunManifest::new("sweep", serde_json::to_value(a)?, a.simulate.then_some(seed));
    deliver(a.out.as_deref(), &bytes, &mut manifest, &outputs(&[&a.out]))
}

fn axis_name(a: AxisArg) -> &'static str {
    match a {
        AxisArg::P => "p",
        AxisArg::RhoTx => "rho_tx",
        AxisArg::RhoRx => "rho_rx",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    ExitCode::from(1)
                }
                _ => {
                    let msg = e.to_string();
                    eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
                    ExitCode::from(1)
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Region {
            channel,
            csv,
            resolution,
            out,
        } => cmd_region(channel, csv, *resolution, out).map(|_| ExitCode::SUCCESS),
        Command::Dist { channel, out } => cmd_dist(channel, out).map(|_| ExitCode::SUCCESS),
        Command::Simulate(a) => cmd_simulate(a).map(|rate| {
            if rate > a.halt_tolerance {
                eprintln!("halt rate {rate} exceeds tolerance {}", a.halt_tolerance);
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }),
        Command::Verify {
            check: VerifyCommand::RankRatio(a),
        } => cmd_rank_ratio(a).map(|_| ExitCode::SUCCESS),
        Command::Sweep(a) => cmd_sweep(a).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
