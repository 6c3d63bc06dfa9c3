//! Batch command-line interface for the cross-impact toolkit.
//!
//! One binary, one subcommand per pipeline; every run writes its artifacts
//! plus a manifest (parameter echo, library version, input hashes) into the
//! output directory. Exit codes: 0 success, 1 validation error, 2 numerical
//! failure.

mod output;
mod report;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use crossimpact::arbitrage::{check_spec, slippage_ratio};
use crossimpact::cost::cost;
use crossimpact::error::Error as CoreError;
use crossimpact::estimator::{
    estimate_propagator, impact_curve, response, symmetry_test, Aggregation, CTildeConvention,
    EstimMode, PropagatorConfig, SymmetryTest,
};
use crossimpact::ingest::{export_csv, ingest_csv_paths, IngestConfig};
use crossimpact::sim::{simulate, SimConfig};
use crossimpact::spec::KernelSpec;
use crossimpact::strategy::Strategy;
use crossimpact::tape::{MarketTape, TimeUnit};
use output::OutputDir;

#[derive(Parser)]
#[command(name = "crossimpact", version, about = "Multi-asset transient impact toolkit")]
struct Cli {
    /// Output directory for artifacts and the run manifest.
    #[arg(short, long, global = true, env = "CROSSIMPACT_OUT", default_value = "crossimpact-out")]
    output_dir: PathBuf,

    /// Worker threads for parallel sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Events,
    Value,
}

impl From<ModeArg> for EstimMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Events => EstimMode::Events,
            ModeArg::Value => EstimMode::Value,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Weekly,
    Biweekly,
    Monthly,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeUnitArg {
    Steps,
    Seconds,
}

impl From<TimeUnitArg> for TimeUnit {
    fn from(u: TimeUnitArg) -> Self {
        match u {
            TimeUnitArg::Steps => TimeUnit::Steps,
            TimeUnitArg::Seconds => TimeUnit::Seconds,
        }
    }
}

#[derive(Args)]
struct TapeArgs {
    /// Canonical tape CSV.
    #[arg(long)]
    tape: PathBuf,
    /// Time unit of the tape (steps for synthetic, seconds for ingested).
    #[arg(long, value_enum, default_value_t = TimeUnitArg::Steps)]
    time_unit: TimeUnitArg,
}

#[derive(Subcommand)]
enum Command {
    /// Expected cost of a strategy under a kernel spec.
    Cost {
        /// Kernel spec config (TOML or JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Strategy CSV: phase_start, phase_end, rate_0..rate_{N-1}.
        #[arg(long)]
        strategy: PathBuf,
    },
    /// Decide whether a spec admits price manipulation.
    Check {
        #[arg(long)]
        spec: PathBuf,
        /// Spectral grid size.
        #[arg(long, default_value_t = 64)]
        grid_size: usize,
        /// Spectral grid spacing (derived from the kernel decay when absent).
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Generate a synthetic tape from a simulation config.
    Simulate {
        /// Simulation config (TOML or JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write raw trades/quotes CSVs in the ingestion schema.
        #[arg(long)]
        raw: bool,
    },
    /// Build a tape from raw trade and quote CSVs.
    Ingest {
        #[arg(long)]
        trades: PathBuf,
        #[arg(long)]
        quotes: PathBuf,
        /// Session start, HH:MM (trades before are dropped).
        #[arg(long, default_value = "10:00")]
        session_start: String,
        /// Session end, HH:MM (trades from here on are dropped).
        #[arg(long, default_value = "17:00")]
        session_end: String,
    },
    /// Self- and cross-response functions.
    Response {
        #[command(flatten)]
        tape: TapeArgs,
        #[arg(long, default_value_t = 20)]
        max_lag: i64,
        /// Include negative lags down to -max_lag.
        #[arg(long)]
        negative_lags: bool,
    },
    /// Volume-binned instantaneous impact curves.
    ImpactCurve {
        #[command(flatten)]
        tape: TapeArgs,
        /// Horizon in the tape's time unit.
        #[arg(long, default_value_t = 2.0)]
        horizon: f64,
        /// Isolation window before the trade (same unit); both bounds must be
        /// given to enable isolation.
        #[arg(long)]
        isolation_before: Option<f64>,
        #[arg(long)]
        isolation_after: Option<f64>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Propagator (decay kernel) estimation.
    Propagator {
        #[command(flatten)]
        tape: TapeArgs,
        #[arg(long, default_value_t = 128)]
        p: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Events)]
        mode: ModeArg,
        /// Equal day weights instead of triggering-asset trade counts.
        #[arg(long)]
        unweighted: bool,
        /// Solve through the block Levinson fast path.
        #[arg(long)]
        levinson: bool,
        /// Assemble the sign-correlation matrix symmetrized by construction.
        #[arg(long)]
        symmetrized: bool,
    },
    /// Windowed symmetry t-tests on the estimated kernels.
    Symmetry {
        #[command(flatten)]
        tape: TapeArgs,
        #[arg(long, default_value_t = 16)]
        p: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Events)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = AggregationArg::Weekly)]
        aggregation: AggregationArg,
        /// Run both regression modes (overrides --mode).
        #[arg(long)]
        both_modes: bool,
    },
    /// Profitability of the asymmetry strategy against bid-ask slippage.
    Slippage {
        #[arg(long)]
        delta_eta: f64,
        #[arg(long)]
        spread_a_bp: f64,
        #[arg(long)]
        spread_b_bp: f64,
        #[arg(long)]
        value_a: f64,
        #[arg(long)]
        value_b: f64,
        #[arg(long, default_value_t = 3.0)]
        t_units: f64,
    },
    /// Aggregate prior artifacts into plot-ready tables.
    Report {
        /// Directories holding artifacts from earlier runs.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<CoreError>() {
                Some(e) if !e.is_validation() => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}

fn parse_hhmm(s: &str) -> Result<i64> {
    let (h, m) = s
        .split_once(':')
        .with_context(|| format!("expected HH:MM, got {s}"))?;
    let h: i64 = h.parse().with_context(|| format!("bad hour in {s}"))?;
    let m: i64 = m.parse().with_context(|| format!("bad minute in {s}"))?;
    if !(0..24).contains(&h) || !(0..60).contains(&m) {
        bail!("time of day out of range: {s}");
    }
    Ok((h * 60 + m) * 60_000)
}

fn load_tape(args: &TapeArgs) -> Result<MarketTape> {
    MarketTape::read_csv_path(&args.tape, args.time_unit.into())
        .with_context(|| format!("cannot read tape {}", args.tape.display()))
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = cli.output_dir.clone();
    match cli.command {
        Command::Cost { spec, strategy } => {
            let params = serde_json::json!({
                "spec": spec.display().to_string(),
                "strategy": strategy.display().to_string(),
            });
            let mut out = OutputDir::create(&out_dir, "cost", params)?;
            out.record_input(&spec)?;
            out.record_input(&strategy)?;
            let spec = KernelSpec::read_path(&spec)?;
            let strat = Strategy::read_csv_path(&strategy)?;
            let breakdown = cost(&spec, &strat)?;
            out.write_json("cost.json", &breakdown)?;
            out.finish()?;
            println!("total cost: {}", breakdown.total);
            Ok(())
        }

        Command::Check { spec, grid_size, dt } => {
            let params = serde_json::json!({
                "spec": spec.display().to_string(),
                "grid_size": grid_size,
                "dt": dt,
            });
            let mut out = OutputDir::create(&out_dir, "check", params)?;
            out.record_input(&spec)?;
            let spec = KernelSpec::read_path(&spec)?;
            let report = check_spec(&spec, grid_size, dt)?;
            if let Some(cert) = &report.certificate {
                let mut buf = Vec::new();
                cert.write_csv(&mut buf)?;
                out.write_bytes("certificate.csv", &buf)?;
            }
            out.write_json("check.json", &report)?;
            out.finish()?;
            println!(
                "admits manipulation: {} ({:?})",
                report.admits_manipulation, report.binding_condition
            );
            Ok(())
        }

        Command::Simulate { config, seed, raw } => {
            let params = serde_json::json!({
                "config": config.display().to_string(),
                "seed_override": seed,
            });
            let mut out = OutputDir::create(&out_dir, "simulate", params)?;
            out.record_input(&config)?;
            let mut cfg = SimConfig::read_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let tape = simulate(&cfg)?;
            let mut buf = Vec::new();
            tape.write_csv(&mut buf)?;
            out.write_bytes("tape.csv", &buf)?;
            if raw {
                let mut tbuf = Vec::new();
                let mut qbuf = Vec::new();
                export_csv(&tape, &mut tbuf, &mut qbuf)?;
                out.write_bytes("trades.csv", &tbuf)?;
                out.write_bytes("quotes.csv", &qbuf)?;
            }
            out.write_json(
                "simulate_summary.json",
                &serde_json::json!({
                    "n_steps": tape.n_steps(),
                    "n_days": tape.day_starts.len(),
                    "trade_counts": tape.trade_counts(),
                    "seed": cfg.seed,
                    "time_unit": "steps",
                }),
            )?;
            out.finish()?;
            println!("simulated {} steps over {} day(s)", tape.n_steps(), tape.day_starts.len());
            Ok(())
        }

        Command::Ingest { trades, quotes, session_start, session_end } => {
            let params = serde_json::json!({
                "trades": trades.display().to_string(),
                "quotes": quotes.display().to_string(),
                "session_start": session_start,
                "session_end": session_end,
            });
            let mut out = OutputDir::create(&out_dir, "ingest", params)?;
            out.record_input(&trades)?;
            out.record_input(&quotes)?;
            let cfg = IngestConfig {
                session_start_ms: parse_hhmm(&session_start)?,
                session_end_ms: parse_hhmm(&session_end)?,
                ..Default::default()
            };
            let (tape, report) = ingest_csv_paths(&trades, &quotes, &cfg)?;
            let mut buf = Vec::new();
            tape.write_csv(&mut buf)?;
            out.write_bytes("tape.csv", &buf)?;
            out.write_json("ingest_report.json", &report)?;
            out.finish()?;
            println!(
                "ingested {} steps across {} asset(s); dropped {} unclassified",
                tape.n_steps(),
                tape.n_assets,
                report.dropped_unclassified
            );
            Ok(())
        }

        Command::Response { tape, max_lag, negative_lags } => {
            let params = serde_json::json!({
                "tape": tape.tape.display().to_string(),
                "max_lag": max_lag,
                "negative_lags": negative_lags,
            });
            let mut out = OutputDir::create(&out_dir, "response", params)?;
            out.record_input(&tape.tape)?;
            let t = load_tape(&tape)?;
            let lags: Vec<i64> = if negative_lags {
                (-max_lag..=max_lag).collect()
            } else {
                (0..=max_lag).collect()
            };
            let r = response(&t, &lags)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["lag", "i", "j", "value", "stderr", "count"])?;
            for (l, &lag) in r.lags.iter().enumerate() {
                for i in 0..t.n_assets {
                    for j in 0..t.n_assets {
                        w.write_record([
                            lag.to_string(),
                            i.to_string(),
                            j.to_string(),
                            r.values[l][(i, j)].to_string(),
                            r.std_errors[l][(i, j)].to_string(),
                            r.counts[j].to_string(),
                        ])?;
                    }
                }
            }
            out.write_bytes("response.csv", &w.into_inner()?)?;
            out.write_json(
                "response_summary.json",
                &serde_json::json!({ "lags": r.lags, "counts": r.counts }),
            )?;
            out.finish()?;
            println!("response over {} lag(s) written", r.lags.len());
            Ok(())
        }

        Command::ImpactCurve { tape, horizon, isolation_before, isolation_after, bins } => {
            let params = serde_json::json!({
                "tape": tape.tape.display().to_string(),
                "horizon": horizon,
                "isolation_before": isolation_before,
                "isolation_after": isolation_after,
                "bins": bins,
            });
            let mut out = OutputDir::create(&out_dir, "impact-curve", params)?;
            out.record_input(&tape.tape)?;
            let t = load_tape(&tape)?;
            let isolation = match (isolation_before, isolation_after) {
                (Some(b), Some(a)) => Some((b, a)),
                (None, None) => None,
                _ => bail!("isolation needs both --isolation-before and --isolation-after"),
            };
            let curve = impact_curve(&t, horizon, isolation, bins)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "i", "j", "bin", "volume_lo", "volume_hi", "volume_mean", "impact", "stderr",
                "count",
            ])?;
            for pair in &curve.pairs {
                for (b, bin) in pair.bins.iter().enumerate() {
                    w.write_record([
                        pair.asset_i.to_string(),
                        pair.asset_j.to_string(),
                        b.to_string(),
                        bin.volume_lo.to_string(),
                        bin.volume_hi.to_string(),
                        bin.volume_mean.to_string(),
                        bin.mean_impact.to_string(),
                        bin.std_error.to_string(),
                        bin.count.to_string(),
                    ])?;
                }
            }
            out.write_bytes("impact_curve.csv", &w.into_inner()?)?;
            out.write_json("impact_curve_summary.json", &curve)?;
            out.finish()?;
            println!("impact curves for {} pair(s) written", curve.pairs.len());
            Ok(())
        }

        Command::Propagator { tape, p, mode, unweighted, levinson, symmetrized } => {
            let params = serde_json::json!({
                "tape": tape.tape.display().to_string(),
                "p": p,
                "mode": match mode { ModeArg::Events => "events", ModeArg::Value => "value" },
                "unweighted": unweighted,
                "levinson": levinson,
                "symmetrized": symmetrized,
            });
            let mut out = OutputDir::create(&out_dir, "propagator", params)?;
            out.record_input(&tape.tape)?;
            let t = load_tape(&tape)?;
            let cfg = PropagatorConfig {
                p,
                mode: mode.into(),
                weighted_days: !unweighted,
                convention: if symmetrized {
                    CTildeConvention::Symmetrized
                } else {
                    CTildeConvention::TwoSided
                },
                use_levinson: levinson,
                ..Default::default()
            };
            let est = estimate_propagator(&t, &cfg)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["lag", "i", "j", "kernel", "increment", "stderr", "count"])?;
            for l in 1..=p {
                for i in 0..t.n_assets {
                    for j in 0..t.n_assets {
                        let se = est
                            .kernel_std_error
                            .as_ref()
                            .map(|se| se[l][(i, j)].to_string())
                            .unwrap_or_default();
                        w.write_record([
                            l.to_string(),
                            i.to_string(),
                            j.to_string(),
                            est.kernel[l][(i, j)].to_string(),
                            est.increments[l - 1][(i, j)].to_string(),
                            se,
                            est.trigger_counts[j].to_string(),
                        ])?;
                    }
                }
            }
            out.write_bytes("propagator.csv", &w.into_inner()?)?;
            let eta = est.eta_tilde();
            out.write_json(
                "propagator_summary.json",
                &serde_json::json!({
                    "p": est.p,
                    "rcond": est.rcond,
                    "regularized": est.regularized,
                    "warnings": est.warnings,
                    "trigger_counts": est.trigger_counts,
                    "n_replicates": est.replicates.len(),
                    "eta_tilde": (0..t.n_assets)
                        .map(|i| (0..t.n_assets).map(|j| eta[(i, j)]).collect::<Vec<_>>())
                        .collect::<Vec<_>>(),
                }),
            )?;
            out.finish()?;
            println!("propagator estimated to lag {p} (rcond {:.3e})", est.rcond);
            Ok(())
        }

        Command::Symmetry { tape, p, mode, aggregation, both_modes } => {
            let params = serde_json::json!({
                "tape": tape.tape.display().to_string(),
                "p": p,
                "both_modes": both_modes,
            });
            let mut out = OutputDir::create(&out_dir, "symmetry", params)?;
            out.record_input(&tape.tape)?;
            let t = load_tape(&tape)?;
            let modes: Vec<EstimMode> = if both_modes {
                vec![EstimMode::Events, EstimMode::Value]
            } else {
                vec![mode.into()]
            };
            let aggs: Vec<Aggregation> = match aggregation {
                AggregationArg::Weekly => vec![Aggregation::Weekly],
                AggregationArg::Biweekly => vec![Aggregation::Biweekly],
                AggregationArg::Monthly => vec![Aggregation::Monthly],
                AggregationArg::All => {
                    vec![Aggregation::Weekly, Aggregation::Biweekly, Aggregation::Monthly]
                }
            };
            let mut tests: Vec<SymmetryTest> = Vec::new();
            for &m in &modes {
                for &a in &aggs {
                    let cfg = PropagatorConfig { p, mode: m, ..Default::default() };
                    tests.push(symmetry_test(&t, &cfg, a)?);
                }
            }

            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "mode",
                "aggregation",
                "i",
                "j",
                "n_windows",
                "delta_mean",
                "t_stat",
                "p_value",
            ])?;
            for test in &tests {
                let mode_label = match test.mode {
                    EstimMode::Events => "trade events",
                    EstimMode::Value => "trade value",
                };
                for pair in &test.pairs {
                    w.write_record([
                        mode_label.to_string(),
                        test.aggregation.label().to_string(),
                        pair.asset_i.to_string(),
                        pair.asset_j.to_string(),
                        test.n_windows.to_string(),
                        pair.mean.to_string(),
                        pair.t_stat.map(|v| v.to_string()).unwrap_or_default(),
                        pair.p_value.map(|v| v.to_string()).unwrap_or_default(),
                    ])?;
                }
            }
            out.write_bytes("symmetry.csv", &w.into_inner()?)?;

            // rejection-percentage table: one row per mode x aggregation
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["regression_on", "aggregation", "pct_1", "pct_5", "pct_10"])?;
            for test in &tests {
                let row = test.rejection_row();
                let fmt =
                    |x: Option<f64>| x.map(|r| format!("{:.1}", r * 100.0)).unwrap_or_default();
                w.write_record([
                    match test.mode {
                        EstimMode::Events => "trade events".to_string(),
                        EstimMode::Value => "trade value".to_string(),
                    },
                    test.aggregation.label().to_string(),
                    fmt(row[0]),
                    fmt(row[1]),
                    fmt(row[2]),
                ])?;
            }
            out.write_bytes("rejection_table.csv", &w.into_inner()?)?;
            out.write_json("symmetry_summary.json", &tests)?;
            out.finish()?;
            println!("symmetry tests over {} scenario(s) written", tests.len());
            Ok(())
        }

        Command::Slippage { delta_eta, spread_a_bp, spread_b_bp, value_a, value_b, t_units } => {
            let params = serde_json::json!({
                "delta_eta": delta_eta,
                "spread_a_bp": spread_a_bp,
                "spread_b_bp": spread_b_bp,
                "value_a": value_a,
                "value_b": value_b,
                "t_units": t_units,
            });
            let mut out = OutputDir::create(&out_dir, "slippage", params)?;
            let assessment =
                slippage_ratio(delta_eta, spread_a_bp, spread_b_bp, value_a, value_b, t_units)?;
            out.write_json("slippage.json", &assessment)?;
            out.finish()?;
            println!(
                "cross-impact / slippage ratio: {:.4e} ({})",
                assessment.ratio,
                if assessment.profitable { "profitable" } else { "unprofitable" }
            );
            Ok(())
        }

        Command::Report { input } => {
            let params = serde_json::json!({
                "input": input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            });
            let mut out = OutputDir::create(&out_dir, "report", params)?;
            let written = report::build_report(&input, &mut out)?;
            if written == 0 {
                bail!("no response, propagator or impact-curve artifacts found under the given inputs");
            }
            out.finish()?;
            println!("{written} report table(s) written");
            Ok(())
        }
    }
}
