//! Command-line match simulator.
//!
//! ```text
//! sim run --script-b fake-proof --seed 7 --report json
//! sim sweep --script-b unresponsive:3 --seeds 0..50
//! sim replay report.json
//! sim cost
//! sim explore --move-window 2
//! sim audit board.txt
//! ```
//!
//! Layout files are one line per row, `.` for water and the ship size
//! otherwise. A 2x2 file is audited against the miniature fleet.

use std::ops::Range;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use battleship_core::sim::{explore_miniature, sweep, verify_replay};
use battleship_core::{
    audit_revealed_board, measure_round_cost, run_match, AdversaryScript, ArbiterConfig, AuditVerdict,
    BoardGeometry, BoardLayout, FleetSpec, MatchReport, SimConfig,
};

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "Runs scripted Battleships matches against the arbiter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one match.
    Run {
        #[command(flatten)]
        setup: Setup,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Summary)]
        report: ReportFormat,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play one match per seed and print one line each.
    Sweep {
        #[command(flatten)]
        setup: Setup,
        /// Half-open range such as `0..50`.
        #[arg(long, value_parser = parse_range, default_value = "0..50")]
        seeds: Range<u64>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Summary)]
        report: ReportFormat,
    },
    /// Re-run a saved report and check the result is byte-identical.
    Replay { report: PathBuf },
    /// Measure the per-round communication and hashing cost.
    Cost {
        #[arg(long)]
        miniature: bool,
    },
    /// Check a layout file against the fleet rules.
    Audit { layout: PathBuf },
    /// Explore every reachable state of the 2x2 game.
    Explore {
        #[arg(long, default_value_t = 2)]
        move_window: u64,
    },
}

#[derive(Args)]
struct Setup {
    #[arg(long, default_value = "honest")]
    script_a: AdversaryScript,
    #[arg(long, default_value = "honest")]
    script_b: AdversaryScript,
    /// Ticks a player has to move before the opponent may claim.
    #[arg(long)]
    timeout_ticks: Option<u64>,
    #[arg(long)]
    deposit: Option<u64>,
    /// Play on the 2x2 board with a single two-cell ship.
    #[arg(long)]
    miniature: bool,
}

impl Setup {
    fn config(&self) -> SimConfig {
        let mut config = SimConfig::default();
        if self.miniature {
            config.arbiter = ArbiterConfig::miniature(config.arbiter.move_window);
        }
        if let Some(t) = self.timeout_ticks {
            config.arbiter.move_window = t;
        }
        if let Some(d) = self.deposit {
            config.deposit = d;
        }
        config
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Summary,
    Json,
}

fn parse_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected START..END")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if b < a {
        return Err("END must not be below START".into());
    }
    Ok(a..b)
}

fn summary(r: &MatchReport) -> String {
    let reason = r.verdict.reason.map(|c| format!(" ({c:?})")).unwrap_or_default();
    let paid: Vec<String> = r
        .ledger
        .iter()
        .map(|t| format!("{}<-{}", t.to.0, t.amount))
        .collect();
    format!(
        "seed={} a={} b={} verdict={:?}{reason} winner={} turns={} moves={} clock={} hashes={} paid=[{}]",
        r.seed,
        r.script_a,
        r.script_b,
        r.verdict.kind,
        r.verdict.winner.0,
        r.turns,
        r.moves,
        r.final_clock,
        r.hash_invocations,
        paid.join(",")
    )
}

fn print_report(r: &MatchReport, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Summary => println!("{}", summary(r)),
        ReportFormat::Json => println!("{}", serde_json::to_string(r)?),
    }
    Ok(())
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            setup,
            seed,
            report,
            out,
        } => {
            let r = run_match(setup.script_a, setup.script_b, seed, &setup.config())?;
            print_report(&r, report)?;
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&r)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Sweep { setup, seeds, report } => {
            let config = setup.config();
            let mut failures = 0;
            for (seed, result) in seeds
                .clone()
                .zip(sweep(setup.script_a, setup.script_b, seeds, &config))
            {
                match result {
                    Ok(r) => print_report(&r, report)?,
                    Err(e) => {
                        failures += 1;
                        eprintln!("seed={seed} error: {e}");
                    }
                }
            }
            if failures > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Replay { report } => {
            let text =
                std::fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let saved: MatchReport = serde_json::from_str(&text).context("parsing report")?;
            let again = verify_replay(&saved)?;
            println!("identical: {}", summary(&again));
        }
        Command::Cost { miniature } => {
            let mut config = SimConfig::default();
            if miniature {
                config.arbiter = ArbiterConfig::miniature(config.arbiter.move_window);
            }
            println!("{}", serde_json::to_string_pretty(&measure_round_cost(&config)?)?);
        }
        Command::Audit { layout } => {
            let text =
                std::fs::read_to_string(&layout).with_context(|| format!("reading {}", layout.display()))?;
            let board: BoardLayout = text.parse().context("parsing layout")?;
            let g = board.geometry();
            let spec = if g == BoardGeometry::MINIATURE {
                FleetSpec::miniature()
            } else {
                FleetSpec::standard()
            };
            match audit_revealed_board(g, board.cells(), &spec) {
                AuditVerdict::Valid => println!("valid"),
                AuditVerdict::Invalid { reason } => {
                    println!("invalid: {reason:?}");
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::Explore { move_window } => {
            let r = explore_miniature(move_window)?;
            println!(
                "states={} transitions={} finished={} legitimate={} penalty={} forfeit={}",
                r.states, r.transitions, r.finished_states, r.verdicts[0], r.verdicts[1], r.verdicts[2]
            );
            if !r.is_sound() {
                for v in &r.violations {
                    eprintln!("violation: {v}");
                }
                bail!("{} violations", r.violations.len());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
