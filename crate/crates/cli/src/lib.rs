//! `ttsim`: turnaround budgets, power traces, noise-floor analysis and
//! MAC compliance from the command line.
//!
//! Exit codes: 0 success, 1 runtime or data error, 2 usage or
//! configuration error, 3 compliance failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod config;
mod report;

use config::{Format, RunConfig, DEFAULT_CONFIG};
use tdd_turnaround::ensm::{sweep_budgets, turnaround_budget, Direction, EnsmMode};
use tdd_turnaround::mac::{compliance_matrix, mode_passes_all, ProtocolDeadline};
use tdd_turnaround::rf::capture::{read_capture, write_capture};
use tdd_turnaround::rf::{analyze_capture, synthesize_capture, Band, RfError, TxPowerLevels};
use tdd_turnaround::sim::{
    expand_schedule, measure_turnaround, measurement_plan, parse_schedule, sample_trace,
    SimConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NONCOMPLIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ttsim", version, about = "Zero-IF transceiver turnaround-time toolkit")]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Configuration file applied on top of the built-in defaults
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output format (overrides output.format)
    #[arg(short, long, global = true, value_enum)]
    format: Option<Format>,

    /// Write the primary output here instead of stdout (overrides output.path)
    #[arg(short, long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Commands {
    /// Itemized turnaround budgets per mode and direction
    Turnaround {
        /// Mode to itemize; omit for the full sweep
        #[arg(long)]
        mode: Option<EnsmMode>,
        /// Restrict to one direction (rx-tx or tx-rx)
        #[arg(long = "dir")]
        direction: Option<Direction>,
        /// Totals for every mode and direction
        #[arg(long, conflicts_with = "mode")]
        all: bool,
    },
    /// Simulate a command schedule and emit the sampled Tx power trace
    Trace {
        /// Band for the Tx power levels (2g4 or 5g)
        #[arg(long)]
        band: Option<Band>,
        /// Schedule, e.g. "lo-on@0,packet-start@1500" (overrides schedule.commands)
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Receiver noise floor from a synthetic or recorded capture
    Noise {
        /// Transceiver mode that sets the synthetic noise floor
        #[arg(long, required_unless_present = "capture")]
        mode: Option<EnsmMode>,
        /// Band (2g4 or 5g)
        #[arg(long, required_unless_present = "capture")]
        band: Option<Band>,
        /// Number of synthetic samples
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// Seed for the synthetic capture generator
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Analyze this capture file instead of synthesizing one
        #[arg(long, conflicts_with_all = ["mode", "band"])]
        capture: Option<PathBuf>,
        /// Save the synthetic capture (and its .meta sidecar) here
        #[arg(long, conflicts_with = "capture")]
        write_capture: Option<PathBuf>,
    },
    /// Compliance of every mode against the configured deadlines
    Comply {
        /// Exit 3 unless this mode meets every deadline
        #[arg(long)]
        require: Option<EnsmMode>,
        /// Deadline names to check (overrides deadlines.use)
        #[arg(long = "deadline")]
        deadlines: Vec<String>,
    },
    /// Configuration utilities
    Config {
        /// Print the built-in default configuration
        #[arg(long)]
        dump: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    Noncompliant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Noncompliant(_) => EXIT_NONCOMPLIANT,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) | CliError::Noncompliant(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

/// Primary output plus an optional summary for the other stream.
struct Output {
    body: String,
    /// Shown on stdout when the body goes to a file, else on stderr.
    summary: Option<String>,
    failure: Option<CliError>,
}

impl Output {
    fn body(body: String) -> Self {
        Output {
            body,
            summary: None,
            failure: None,
        }
    }
}

/// Run the CLI with explicit streams; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut config = match &global.config {
        None => RunConfig::from_default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            RunConfig::load(Some((&text, &path.display().to_string()))).map_err(usage)?
        }
    };
    if let Some(f) = global.format {
        config.format = f;
    }
    if let Some(p) = &global.output {
        config.output = Some(p.clone());
    }
    Ok(config)
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    if let Commands::Config { dump } = cli.command {
        if !dump {
            return Err(usage("config: nothing to do (try --dump)"));
        }
        stdout.write_all(DEFAULT_CONFIG.as_bytes()).map_err(runtime)?;
        return Ok(());
    }

    let config = load_config(&cli.global)?;
    let out = match cli.command {
        Commands::Turnaround {
            mode,
            direction,
            all,
        } => cmd_turnaround(&config, if all { None } else { mode }, direction)?,
        Commands::Trace { band, schedule } => cmd_trace(&config, band, schedule.as_deref())?,
        Commands::Noise {
            mode,
            band,
            n,
            seed,
            capture,
            write_capture,
        } => {
            let source = match capture {
                Some(path) => NoiseSource::File(path),
                None => NoiseSource::Synthetic {
                    mode: mode.ok_or_else(|| usage("--mode is required"))?,
                    band: band.ok_or_else(|| usage("--band is required"))?,
                    n,
                    seed,
                    save: write_capture,
                },
            };
            cmd_noise(&config, source)?
        }
        Commands::Comply {
            require,
            deadlines,
        } => cmd_comply(&config, require, &deadlines)?,
        Commands::Config { .. } => unreachable!(),
    };

    match &config.output {
        Some(path) => {
            fs::write(path, &out.body)
                .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
            if let Some(s) = &out.summary {
                stdout.write_all(s.as_bytes()).map_err(runtime)?;
            }
        }
        None => {
            stdout.write_all(out.body.as_bytes()).map_err(runtime)?;
            if let Some(s) = &out.summary {
                stderr.write_all(s.as_bytes()).map_err(runtime)?;
            }
        }
    }
    match out.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_turnaround(
    config: &RunConfig,
    mode: Option<EnsmMode>,
    direction: Option<Direction>,
) -> Result<Output, CliError> {
    let directions: Vec<Direction> = match direction {
        Some(d) => vec![d],
        None => Direction::BOTH.to_vec(),
    };
    match mode {
        Some(mode) => {
            let budgets = directions
                .iter()
                .map(|&d| turnaround_budget(mode, d, &config.clocks, &config.profile))
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage)?;
            Ok(Output::body(report::budgets(&budgets, config.format)))
        }
        None => {
            let rows = sweep_budgets(&EnsmMode::ALL, &config.clocks, &config.profile)
                .map_err(usage)?
                .into_iter()
                .filter(|r| directions.contains(&r.direction))
                .collect::<Vec<_>>();
            Ok(Output::body(report::sweep(&rows, config.format)))
        }
    }
}

fn cmd_trace(
    config: &RunConfig,
    band: Option<Band>,
    schedule: Option<&str>,
) -> Result<Output, CliError> {
    let band = band.unwrap_or(config.trace.band);
    let schedule = match schedule {
        Some(s) => parse_schedule(s).map_err(usage)?,
        None => config.schedule.clone(),
    };
    let sim = SimConfig {
        clocks: config.clocks,
        profile: config.profile,
        levels: TxPowerLevels::for_band(band, &config.rf),
        initial_lo: config.trace.initial_lo,
    };
    let timeline = expand_schedule(&schedule, &sim).map_err(runtime)?;
    let trace = sample_trace(&timeline, &config.trace.window).map_err(runtime)?;

    let mut failure = None;
    let measurement = match measurement_plan(&schedule) {
        None => None,
        Some((trigger, direction)) => match measure_turnaround(&trace, trigger, direction) {
            Ok(tt) => Some((trigger, direction, tt)),
            Err(e) => {
                failure = Some(runtime(e));
                None
            }
        },
    };
    let summary = report::trace_summary(
        band,
        measurement,
        timeline.warnings().count(),
        config.format,
    );
    Ok(Output {
        body: trace.to_csv(),
        summary: Some(summary),
        failure,
    })
}

enum NoiseSource {
    Synthetic {
        mode: EnsmMode,
        band: Band,
        n: usize,
        seed: u64,
        save: Option<PathBuf>,
    },
    File(PathBuf),
}

fn cmd_noise(config: &RunConfig, source: NoiseSource) -> Result<Output, CliError> {
    let (capture, label) = match source {
        NoiseSource::Synthetic {
            mode,
            band,
            n,
            seed,
            save,
        } => {
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            let capture = synthesize_capture(mode, band, &config.rf, n, seed);
            if let Some(path) = save {
                write_capture(&path, &capture).map_err(runtime)?;
            }
            (capture, format!("synthetic seed {seed}"))
        }
        NoiseSource::File(path) => {
            let capture = read_capture(&path).map_err(|e| match e {
                RfError::EmptyCapture => runtime(format!("{}: capture is empty", path.display())),
                other => runtime(other),
            })?;
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            (capture, format!("file {name}"))
        }
    };
    let report = analyze_capture(&capture, &config.noise).map_err(|e| match e {
        RfError::TooNoisy { .. } => runtime(format!(
            "{e}; the capture is dominated by packets, so no noise floor can be estimated"
        )),
        other => runtime(other),
    })?;
    Ok(Output::body(report::noise(
        &label,
        &capture,
        &report,
        config.format,
    )))
}

fn cmd_comply(
    config: &RunConfig,
    require: Option<EnsmMode>,
    names: &[String],
) -> Result<Output, CliError> {
    let deadlines: Vec<ProtocolDeadline> = if names.is_empty() {
        config.deadlines.clone()
    } else {
        names
            .iter()
            .map(|n| {
                config
                    .deadlines
                    .iter()
                    .find(|d| &d.name == n)
                    .cloned()
                    .map_or_else(|| ProtocolDeadline::builtin(n), Ok)
            })
            .collect::<Result<_, _>>()
            .map_err(usage)?
    };
    let matrix = compliance_matrix(&config.clocks, &config.profile, &deadlines).map_err(usage)?;
    let body = report::matrix(&matrix, config.format);
    let failure = require.and_then(|mode| {
        (!mode_passes_all(&matrix, mode)).then(|| {
            CliError::Noncompliant(format!("{mode} misses at least one deadline"))
        })
    });
    Ok(Output {
        body,
        summary: None,
        failure,
    })
}
