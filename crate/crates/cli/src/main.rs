//! `btcpm`: run scenarios, compare mechanisms and replay the worked
//! examples. Exit codes: 0 success, 1 runtime failure, 2 config error.
//! Log verbosity comes from `BTCPM_LOG` (e.g. `BTCPM_LOG=info`).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use btcpm_core::reference::{render, run_checks};
use btcpm_core::scenario::config::{preset, PRESETS};
use btcpm_core::scenario::{run_mechanisms, ComparisonReport, Mechanism, ScenarioConfig, ScenarioError};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

#[derive(Parser)]
#[command(name = "btcpm", version, about = "Liquidity bootstrapping simulator for BTC-denominated prediction markets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file (TOML) or the name of a bundled preset.
    #[arg(long)]
    config: String,
    /// Replace the config's seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Write only this report format (default: both).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every enabled mechanism and write report.csv, report.json and events.ndjson.
    Run {
        #[command(flatten)]
        args: RunArgs,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a subset of mechanisms side by side and print the comparison.
    Compare {
        #[command(flatten)]
        args: RunArgs,
        /// Comma-separated: crossmm, amm, redirect.
        #[arg(long, value_delimiter = ',', required = true)]
        mechanisms: Vec<Mechanism>,
        /// Also write the report files here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every worked example; non-zero exit on any mismatch.
    PaperExamples {
        /// Nudge one reference value to exercise the failure path.
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
    /// Parse and validate a scenario without running it.
    Validate {
        #[arg(long)]
        config: String,
    },
    /// List the bundled presets.
    ListPresets,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load_config(spec: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(spec);
    let text = if path.is_file() {
        fs::read_to_string(path).map_err(|e| Failure::Config(format!("{spec}: {e}")))?
    } else if let Some(p) = preset(spec) {
        info!("using bundled preset {spec}");
        p.toml.to_string()
    } else {
        return Err(Failure::Config(format!("{spec}: no such file or preset (see `btcpm list-presets`)")));
    };
    ScenarioConfig::load(&text).map_err(|e| Failure::Config(format!("{spec}:\n{e}")))
}

fn prepared(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed_override {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_outputs(report: &ComparisonReport, out: &Path, format: Option<Format>) -> Result<(), Failure> {
    let io = |p: &Path, e: std::io::Error| Failure::Runtime(format!("{}: {e}", p.display()));
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mut files = Vec::new();
    if format != Some(Format::Json) {
        files.push(("report.csv", report.to_csv()));
    }
    if format != Some(Format::Csv) {
        files.push(("report.json", report.to_json()));
    }
    files.push(("events.ndjson", report.events_ndjson()));
    for (name, body) in files {
        let p = out.join(name);
        fs::write(&p, body).map_err(|e| io(&p, e))?;
        info!("wrote {}", p.display());
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::Runtime(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn summary(report: &ComparisonReport) -> String {
    let mut s = format!(
        "scenario {} (seed {}, {} ticks, winner {}, settled at {})\n",
        report.scenario, report.seed, report.ticks, report.winner, report.settlement_rate
    );
    s.push_str(&format!(
        "{:<10} {:>14} {:>14} {:>6} {:>10} {:>4} {:>14} {:>10}\n",
        "mechanism", "user_btc_pnl", "maker_pnl_usd", "liqs", "cap_eff", "fx", "principal_loss", "residual"
    ));
    for r in &report.rows {
        s.push_str(&format!(
            "{:<10} {:>14} {:>14} {:>6} {:>10} {:>4} {:>14} {:>10}\n",
            r.mechanism.name(),
            r.user_btc_pnl.plain(),
            r.maker_pnl_usd.map(|v| v.plain()).unwrap_or_else(|| "-".into()),
            r.liquidation_count,
            r.capital_efficiency.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            if r.fx_exposure { "yes" } else { "no" },
            r.user_principal_loss_btc.plain(),
            format!("{:.2e}", r.accounting_residual),
        ));
    }
    s
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { args, out } => {
            let cfg = prepared(&args)?;
            let report = run_mechanisms(&cfg, &[])?;
            write_outputs(&report, &out, args.format)?;
            emit(&summary(&report))?;
        }
        Command::Compare { args, mechanisms, out } => {
            let cfg = prepared(&args)?;
            let report = run_mechanisms(&cfg, &mechanisms)?;
            if let Some(out) = out {
                write_outputs(&report, &out, args.format)?;
            }
            emit(&summary(&report))?;
        }
        Command::PaperExamples { corrupt } => {
            let start = Instant::now();
            let checks = run_checks(corrupt.as_deref());
            let failed = checks.iter().filter(|c| !c.pass).count();
            emit(&format!(
                "{}{} of {} checks passed in {:.0?}\n",
                render(&checks),
                checks.len() - failed,
                checks.len(),
                start.elapsed()
            ))?;
            if failed > 0 {
                return Err(Failure::Runtime(format!("{failed} check(s) failed")));
            }
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let mechs: Vec<&str> = cfg.enabled().iter().map(|m| m.name()).collect();
            emit(&format!("ok: {} ({} ticks; mechanisms: {})\n", cfg.name, cfg.ticks, mechs.join(", ")))?;
        }
        Command::ListPresets => {
            let list: String = PRESETS.iter().map(|p| format!("{:<22} {}\n", p.name, p.summary)).collect();
            emit(&list)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BTCPM_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
