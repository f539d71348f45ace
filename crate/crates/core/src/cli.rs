//! Command-line experiment runner.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error,
//! 3 simulation abort (deadlock or engine invariant).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{Mode, SimConfig, SthldMode};
use crate::engine::simulate;
use crate::error::SimError;
use crate::metrics::{self, config_preamble, MetricsReport, SUMMARY_HEADER};
use crate::profiler::{
    annotations_to_csv, exact_reuse_distances, majority_annotate, profile_and_annotate,
    DistanceHistogram, DEFAULT_PROFILE_FRACTION, DEFAULT_RTHLD,
};
use crate::trace::{gen_synthetic, load_trace, save_trace, to_text, KernelTrace, SyntheticKind};

#[derive(Debug, Parser)]
#[command(name = "rfcache", version, about = "GPU register-file caching collector simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reuse-distance profile: annotation table and distance histogram.
    Profile {
        trace: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RTHLD)]
        rthld: u32,
        #[arg(long, default_value_t = DEFAULT_PROFILE_FRACTION)]
        fraction: f64,
        #[arg(long, short = 'o', default_value = ".")]
        out_dir: PathBuf,
    },
    /// Write a copy of the trace with near/far bits on every operand.
    Annotate {
        trace: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RTHLD)]
        rthld: u32,
        #[arg(long, default_value_t = DEFAULT_PROFILE_FRACTION)]
        fraction: f64,
        #[arg(long, short = 'o')]
        output: PathBuf,
    },
    /// Generate a synthetic trace.
    Gen {
        /// near-reuse, far-reuse, gemm-like or random
        #[arg(long)]
        kind: SyntheticKind,
        #[arg(long, default_value_t = 8)]
        warps: usize,
        #[arg(long, default_value_t = 1000)]
        instrs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// One simulation: report.json, summary.csv and intervals.csv.
    Run {
        trace: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short = 'o', default_value = ".")]
        out_dir: PathBuf,
    },
    /// One simulation per value of a config key: sweep.csv.
    Sweep {
        trace: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short = 'o', default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run several modes and normalize to baseline_ocu: compare.csv/json.
    Compare {
        trace: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "baseline_ocu,malekeh,naive_gto_lru")]
        modes: Vec<Mode>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short = 'o', default_value = ".")]
        out_dir: PathBuf,
    },
}

/// Config sources, applied as: defaults, then `--config`, then flags.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Any config key, e.g. `--set energy.e_bank_read=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sthld: Option<u32>,
    /// `static` or `dynamic`.
    #[arg(long)]
    pub sthld_mode: Option<String>,
    #[arg(long)]
    pub rthld: Option<u32>,
    #[arg(long)]
    pub interval: Option<u64>,
    #[arg(long)]
    pub mem_latency: Option<u32>,
    #[arg(long)]
    pub num_sms: Option<usize>,
    #[arg(long)]
    pub window_size: Option<usize>,
    #[arg(long)]
    pub active_set_size: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Sim(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Sim(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Sim(m) => m,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Deadlock { .. } | SimError::Invariant { .. } => CliError::Sim(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<SimConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p).map_err(data)?,
            None => SimConfig::default(),
        };
        let mut pairs: Vec<(String, String)> = Vec::new();
        let flags: [(&str, Option<String>); 10] = [
            ("mode", self.mode.map(|m| m.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("sthld", self.sthld.map(|v| v.to_string())),
            ("sthld_mode", self.sthld_mode.clone()),
            ("rthld", self.rthld.map(|v| v.to_string())),
            ("interval", self.interval.map(|v| v.to_string())),
            ("mem_latency", self.mem_latency.map(|v| v.to_string())),
            ("num_sms", self.num_sms.map(|v| v.to_string())),
            ("window_size", self.window_size.map(|v| v.to_string())),
            ("active_set_size", self.active_set_size.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        for (k, v) in pairs {
            cfg.set(&k, &v).map_err(data)?;
        }
        Ok(cfg)
    }
}

/// Parse arguments, run, print errors; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn load(path: &Path) -> Result<KernelTrace, CliError> {
    load_trace(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Annotate with the config's profiling parameters when the mode needs it
/// and the trace has no annotations, or always when `force` is set.
fn prepare(trace: &KernelTrace, cfg: &SimConfig, force: bool) -> KernelTrace {
    if force || (cfg.mode.requires_annotations() && !trace.is_annotated()) {
        profile_and_annotate(trace, cfg.profile_fraction, cfg.rthld)
    } else {
        trace.clone()
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Profile {
            trace,
            rthld,
            fraction,
            out_dir: dir,
        } => {
            check_profile_args(rthld, fraction)?;
            let t = load(&trace)?;
            let hist = DistanceHistogram::from_records(&exact_reuse_distances(&t));
            let table = majority_annotate(&t, fraction, rthld);
            out_dir(&dir)?;
            write(&dir.join("annotations.csv"), &annotations_to_csv(&table))?;
            write(&dir.join("histogram.csv"), &hist.to_csv())?;
            print!("{}", hist.to_csv());
            Ok(())
        }
        Command::Annotate {
            trace,
            rthld,
            fraction,
            output,
        } => {
            check_profile_args(rthld, fraction)?;
            let t = load(&trace)?;
            save_trace(&profile_and_annotate(&t, fraction, rthld), &output).map_err(data)
        }
        Command::Gen {
            kind,
            warps,
            instrs,
            seed,
            output,
        } => {
            let t = gen_synthetic(kind, warps, instrs, seed).map_err(data)?;
            match output {
                Some(p) => save_trace(&t, &p).map_err(data),
                None => {
                    print!("{}", to_text(&t));
                    Ok(())
                }
            }
        }
        Command::Run {
            trace,
            config,
            out_dir: dir,
        } => {
            let cfg = config.resolve()?;
            let t = load(&trace)?;
            let report = simulate(&t, &cfg)?;
            out_dir(&dir)?;
            write(&dir.join("report.json"), &report.to_json())?;
            write(&dir.join("summary.csv"), &report.summary_csv())?;
            write(&dir.join("intervals.csv"), &report.intervals_csv())?;
            println!("{SUMMARY_HEADER}\n{}", report.summary_row());
            Ok(())
        }
        Command::Sweep {
            trace,
            param,
            values,
            config,
            out_dir: dir,
        } => {
            if values.is_empty() {
                return Err(CliError::Usage("sweep needs at least one value".into()));
            }
            let base = config.resolve()?;
            let t = load(&trace)?;
            let csv = sweep(&t, &base, &param, &values)?;
            out_dir(&dir)?;
            write(&dir.join("sweep.csv"), &csv)?;
            print!("{csv}");
            Ok(())
        }
        Command::Compare {
            trace,
            modes,
            config,
            out_dir: dir,
        } => {
            if modes.is_empty() {
                return Err(CliError::Usage("compare needs at least one mode".into()));
            }
            let base = config.resolve()?;
            let t = load(&trace)?;
            let (table, reports) = compare_modes(&t, &base, &modes)?;
            out_dir(&dir)?;
            let csv = format!("{}{}", config_preamble(&base), table.to_csv());
            write(&dir.join("compare.csv"), &csv)?;
            let json = serde_json::json!({ "config": base, "table": table, "reports": reports });
            write(
                &dir.join("compare.json"),
                &serde_json::to_string_pretty(&json).expect("serializable"),
            )?;
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}

fn check_profile_args(rthld: u32, fraction: f64) -> Result<(), CliError> {
    if rthld == 0 {
        return Err(CliError::Usage("--rthld must be >= 1".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CliError::Usage("--fraction must be in (0, 1]".into()));
    }
    Ok(())
}

/// Run one simulation per value of `param`; returns the combined CSV.
pub fn sweep(
    trace: &KernelTrace,
    base: &SimConfig,
    param: &str,
    values: &[String],
) -> Result<String, CliError> {
    let configs: Vec<SimConfig> = values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            if param == "sthld" {
                cfg.sthld_mode = SthldMode::Static;
            }
            cfg.set(param, v).map_err(data)?;
            Ok(cfg)
        })
        .collect::<Result<_, CliError>>()?;
    let reports: Vec<MetricsReport> = configs
        .par_iter()
        .map(|cfg| simulate(&prepare(trace, cfg, param == "rthld"), cfg))
        .collect::<Result<_, SimError>>()?;
    let mut out = config_preamble(base);
    let _ = writeln!(out, "# sweep={param}");
    let _ = writeln!(out, "{param},{SUMMARY_HEADER}");
    for (v, r) in values.iter().zip(&reports) {
        let _ = writeln!(out, "{v},{}", r.summary_row());
    }
    Ok(out)
}

/// Run `modes` plus the baseline on one trace and normalize.
pub fn compare_modes(
    trace: &KernelTrace,
    base: &SimConfig,
    modes: &[Mode],
) -> Result<(metrics::NormalizedTable, Vec<MetricsReport>), CliError> {
    let mut all: Vec<Mode> = vec![Mode::BaselineOcu];
    all.extend(modes.iter().copied().filter(|&m| m != Mode::BaselineOcu));
    let needs_annotation = all.iter().any(|m| m.requires_annotations()) && !trace.is_annotated();
    let trace = if needs_annotation {
        profile_and_annotate(trace, base.profile_fraction, base.rthld)
    } else {
        trace.clone()
    };
    let reports: Vec<MetricsReport> = all
        .par_iter()
        .map(|&m| {
            simulate(&trace, &base.clone().with_mode(m))
                .map_err(|e| CliError::from(e).with_context(m))
        })
        .collect::<Result<_, CliError>>()?;
    let baseline = reports[0].clone();
    let selected: Vec<MetricsReport> = reports
        .into_iter()
        .filter(|r| modes.contains(&r.mode))
        .collect();
    let table = metrics::compare(&selected, &baseline).map_err(data)?;
    Ok((table, selected))
}

impl CliError {
    fn with_context(self, mode: Mode) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{mode}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{mode}: {m}")),
            CliError::Sim(m) => CliError::Sim(format!("{mode}: {m}")),
        }
    }
}
