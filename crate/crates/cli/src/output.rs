//! Output plumbing: run directory resolution, the per-run manifest, and the
//! CSV/JSON writers shared by the subcommands.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::ValueEnum;
use serde::Serialize;

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "LRGA_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable/invalid input — exit 2.
    Usage(String),
    /// A checked property failed — exit 1.
    Violation(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn report(&self) -> ExitCode {
        match self {
            CliError::Usage(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            CliError::Violation(msg) => {
                eprintln!("violation: {msg}");
                ExitCode::from(1)
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Everything a subcommand needs to emit its artifacts.
pub struct RunContext {
    pub seed: u64,
    out_dir: PathBuf,
    format: Option<ReportFormat>,
    started: Instant,
}

impl RunContext {
    pub fn new(
        seed: u64,
        out: Option<PathBuf>,
        format: Option<ReportFormat>,
    ) -> Result<Self, CliError> {
        let out_dir = out
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out_dir).map_err(|e| {
            CliError::usage(format!("cannot create output directory {}: {e}", out_dir.display()))
        })?;
        Ok(RunContext {
            seed,
            out_dir,
            format,
            started: Instant::now(),
        })
    }

    /// The format to use, given the subcommand's natural default.
    pub fn format_or(&self, default: ReportFormat) -> ReportFormat {
        self.format.unwrap_or(default)
    }

    pub fn data_path(&self, command: &str, format: ReportFormat) -> PathBuf {
        let ext = match format {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        };
        self.out_dir.join(format!("{command}.{ext}"))
    }

    pub fn sibling_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes `<command>.manifest.json`. Call exactly once per run, after the
    /// data files exist.
    pub fn write_manifest(
        &self,
        command: &str,
        parameters: serde_json::Value,
        outputs: &[&Path],
    ) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct RunManifest<'a> {
            command: &'a str,
            parameters: serde_json::Value,
            seed: u64,
            rng_algorithm: &'a str,
            build_version: &'a str,
            timing_ms: f64,
            outputs: Vec<String>,
        }
        let manifest = RunManifest {
            command,
            parameters,
            seed: self.seed,
            rng_algorithm: lrga_core::rgnn::RNG_ALGORITHM,
            build_version: env!("CARGO_PKG_VERSION"),
            timing_ms: self.started.elapsed().as_secs_f64() * 1e3,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        let path = self.sibling_path(&format!("{command}.manifest.json"));
        write_json(&path, &manifest)
    }
}

/// 17 significant digits — enough to reproduce any f64 exactly, so reports
/// diff cleanly across runs.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::usage(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

/// Writes a CSV with one header row; fields are assumed not to need quoting
/// (numbers and bare tokens only).
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}
