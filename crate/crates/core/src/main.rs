use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use winddaq::benchtest::{self, Profile};
use winddaq::campaign::{Campaign, Pacing};
use winddaq::config::{load_config, render_config, Config, ConfigError};
use winddaq::model::Timestamp;
use winddaq::pipeline::{self, analyze_logs, package_fair, PackageError, PackageInputs, Provenance};
use winddaq::sim::{FaultSchedule, ScheduleError};
use winddaq::pipeline::ingest::segment_files;
use winddaq::storage::DirMedium;
use winddaq::telemetry::Broker;
use winddaq::FIRMWARE_VERSION;

const EXIT_VALIDATION: u8 = 2;
const EXIT_ASSERTION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "winddaq", version, about = "Wind-turbine logger simulator and analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded campaign and write its logs.
    Run {
        /// Configuration file; the reference desk setup if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fault schedule file, `nominal` or `none`.
        #[arg(long, default_value = "none")]
        faults: String,
        /// Logical seconds to run.
        #[arg(long)]
        duration: f64,
        /// Logical seconds per wall second, or `max`.
        #[arg(long, default_value = "max")]
        accel: Accel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quality report, power curve and dataset package from a run.
    Analyze {
        /// Run directory or log directory.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fail when completeness is below `--min-completeness`.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 0.9)]
        min_completeness: f64,
        /// Tip-speed-ratio bin width; the configured value if omitted.
        #[arg(long)]
        bin_width: Option<f64>,
        /// Configuration file; `config.txt` of the run directory if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Named verification profile.
    Benchtest {
        /// endurance72h, powercycle50 or shakedown
        profile: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Test hook: skip the commit marker on every flush.
        #[arg(long, hide = true)]
        no_commit_marker: bool,
    },
}

#[derive(Debug, Clone, Copy)]
struct Accel(Pacing);

impl FromStr for Accel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "max" {
            return Ok(Accel(Pacing::Max));
        }
        match s.parse::<f64>() {
            Ok(r) if r >= 1.0 && r.is_finite() => Ok(Accel(Pacing::Ratio(r))),
            _ => Err(format!("expected a ratio >= 1 or `max`, got {s}")),
        }
    }
}

/// Input that fails validation.
#[derive(Debug)]
struct Invalid(String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// A checked criterion that did not hold.
#[derive(Debug)]
struct Assertion(String);

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Assertion {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Assertion>() {
            return EXIT_ASSERTION;
        }
        if cause.is::<Invalid>() || cause.is::<ConfigError>() || cause.is::<ScheduleError>() {
            return EXIT_VALIDATION;
        }
        if let Some(PackageError::MissingKey(_)) = cause.downcast_ref::<PackageError>() {
            return EXIT_VALIDATION;
        }
    }
    EXIT_IO
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            faults,
            duration,
            accel,
            seed,
            out,
        } => cmd_run(config.as_deref(), &faults, duration, accel.0, seed, &out),
        Command::Analyze {
            input,
            out,
            strict,
            min_completeness,
            bin_width,
            config,
        } => cmd_analyze(&input, &out, strict, min_completeness, bin_width, config.as_deref()),
        Command::Benchtest {
            profile,
            seed,
            config,
            no_commit_marker,
        } => cmd_benchtest(&profile, seed, config.as_deref(), no_commit_marker),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<Config> {
    match path {
        None => Ok(Config::reference()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            load_config(&text).with_context(|| format!("invalid configuration {}", p.display()))
        }
    }
}

fn read_schedule(arg: &str, duration: f64) -> Result<FaultSchedule> {
    match arg {
        "none" => Ok(FaultSchedule::new()),
        "nominal" => Ok(FaultSchedule::nominal(duration, benchtest::BATTERY_S)),
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            FaultSchedule::parse(&text).with_context(|| format!("invalid fault schedule {path}"))
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn print_lines(lines: &[String]) {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
}

fn cmd_run(
    config_path: Option<&Path>,
    faults: &str,
    duration: f64,
    pacing: Pacing,
    seed: u64,
    out: &Path,
) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Invalid(format!("duration must be > 0, got {duration}")).into());
    }
    let config = read_config(config_path)?;
    let schedule = read_schedule(faults, duration)?;

    let log_dir = out.join("log");
    if log_dir.is_dir() && !segment_files(&log_dir)?.is_empty() {
        return Err(Invalid(format!("{} already holds log segments", log_dir.display())).into());
    }
    let diag_dir = out.join("diagnostics");
    fs::create_dir_all(&diag_dir).with_context(|| format!("creating {}", diag_dir.display()))?;
    fs::write(out.join("config.txt"), render_config(&config))?;
    fs::write(out.join("faults.txt"), schedule.render())?;

    let medium = DirMedium::open(&log_dir).with_context(|| format!("opening {}", log_dir.display()))?;
    let broker = if config.telemetry.transcript {
        Broker::with_transcript(Box::new(create(&diag_dir.join("telemetry.log"))?))
    } else {
        Broker::new()
    };
    let mut campaign = Campaign::new(&config, schedule, seed, medium)
        .with_diagnostics(Box::new(create(&diag_dir.join("transitions.log"))?))
        .with_broker(broker);
    let stats = campaign.run(duration, pacing).clone();
    drop(campaign);

    let analysis = analyze_logs(&log_dir, &config, Some(duration), config.bin_width_lambda, config.min_bin_count)
        .with_context(|| format!("reading back {}", log_dir.display()))?;
    let start = config.clock.campaign_start;
    let manifest = [
        format!("seed={seed}"),
        format!("duration_s={duration}"),
        format!("sample_rate_hz={}", config.sample_rate_hz),
        format!("faults={faults}"),
        format!("deployment_start={}", Timestamp::new(start, 0).iso8601()),
        format!("deployment_end={}", Timestamp::new(start + duration.ceil() as i64, 0).iso8601()),
        format!("firmware_version={FIRMWARE_VERSION}"),
    ];
    fs::write(out.join("manifest.txt"), manifest.join("\n") + "\n")?;

    let mut lines = stats.summary_lines();
    lines.push(format!("completeness={:.6}", analysis.quality.completeness));
    lines.push(format!("validity={:.6}", analysis.quality.validity));
    print_lines(&lines);
    Ok(())
}

fn read_manifest(dir: &Path) -> Vec<(String, String)> {
    fs::read_to_string(dir.join("manifest.txt"))
        .map(|t| {
            t.lines()
                .filter_map(|l| l.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        })
        .unwrap_or_default()
}

fn cmd_analyze(
    input: &Path,
    out: &Path,
    strict: bool,
    min_completeness: f64,
    bin_width: Option<f64>,
    config_path: Option<&Path>,
) -> Result<()> {
    if !input.is_dir() {
        return Err(anyhow::Error::new(io::Error::new(
            io::ErrorKind::NotFound,
            format!("{} is not a directory", input.display()),
        )));
    }
    let log_dir = if input.join("log").is_dir() {
        input.join("log")
    } else {
        input.to_path_buf()
    };
    let run_config = input.join("config.txt");
    let config = match config_path {
        Some(p) => read_config(Some(p))?,
        None if run_config.is_file() => read_config(Some(&run_config))?,
        None => Config::reference(),
    };
    let width = bin_width.unwrap_or(config.bin_width_lambda);
    if !(width > 0.0 && width.is_finite()) {
        return Err(Invalid(format!("bin width must be > 0, got {width}")).into());
    }

    let manifest = read_manifest(input);
    let get = |k: &str| manifest.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
    let span = get("duration_s").and_then(|v| v.parse::<f64>().ok());
    let analysis = analyze_logs(&log_dir, &config, span, width, config.min_bin_count)
        .with_context(|| format!("reading {}", log_dir.display()))?;

    let (first, last) = stamp_range(&log_dir)?;
    let provenance = Provenance {
        deployment_start: get("deployment_start").or(first).unwrap_or_default(),
        deployment_end: get("deployment_end").or(last).unwrap_or_default(),
        firmware_version: get("firmware_version").unwrap_or_else(|| FIRMWARE_VERSION.to_string()),
        extra: manifest
            .iter()
            .filter(|(k, _)| k == "seed" || k == "faults")
            .map(|(k, v)| (format!("campaign_{k}"), v.clone()))
            .collect(),
    };
    package_fair(
        &PackageInputs {
            log_dir: &log_dir,
            quality: &analysis.quality,
            curve: &analysis.curve,
            config: &config,
            provenance: &provenance,
        },
        out,
    )?;
    for e in &analysis.ingest.errors {
        eprintln!("warning: {e}");
    }
    print_lines(&analysis.summary_lines());

    if strict && analysis.quality.completeness < min_completeness {
        return Err(Assertion(format!(
            "completeness {:.6} below {min_completeness}",
            analysis.quality.completeness
        ))
        .into());
    }
    Ok(())
}

/// First and last stamps of a log directory, for data without a manifest.
fn stamp_range(log_dir: &Path) -> Result<(Option<String>, Option<String>)> {
    let mut lo: Option<Timestamp> = None;
    let mut hi: Option<Timestamp> = None;
    pipeline::for_each_record(log_dir, |r| {
        lo = Some(lo.map_or(r.timestamp, |t| t.min(r.timestamp)));
        hi = Some(hi.map_or(r.timestamp, |t| t.max(r.timestamp)));
    })?;
    Ok((lo.map(|t| t.iso8601()), hi.map(|t| t.iso8601())))
}

fn cmd_benchtest(name: &str, seed: u64, config_path: Option<&Path>, no_commit_marker: bool) -> Result<()> {
    let profile = Profile::from_name(name)
        .ok_or_else(|| Invalid(format!("unknown profile {name}; expected endurance72h, powercycle50 or shakedown")))?;
    let config = read_config(config_path)?;
    let report = match profile {
        Profile::Powercycle50 => benchtest::powercycle50(&config, seed, !no_commit_marker),
        p => benchtest::run_profile(p, &config, seed),
    };
    println!("{report}");
    match report.first_failure() {
        None => Ok(()),
        Some(c) => Err(Assertion(format!("{} {} failed: {}", profile.name(), c.name, c.detail)).into()),
    }
}
