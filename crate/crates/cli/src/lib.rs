//! Experiment driver: configuration, Monte Carlo orchestration and file
//! outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub mod config;
pub mod experiments;
pub mod svg;

pub use config::{ExperimentConfig, Kind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] shs6v_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Output format selection. CSV files are always written; `Svg` adds a
/// chart beside every plottable CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Svg,
}

/// Which columns of a CSV to chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: usize,
    pub ys: Vec<usize>,
    pub log_x: bool,
    pub log_y: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
    pub plot: Option<PlotSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: Kind,
    pub files: Vec<OutputFile>,
    pub checks: Vec<Check>,
    pub seeds: Vec<u64>,
}

impl Report {
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            files: Vec::new(),
            checks: Vec::new(),
            seeds: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn file(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs one experiment.
pub fn run(kind: Kind, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    if let Some(k) = cfg.kind {
        if k != kind {
            return Err(CliError::Config(format!(
                "config is for {} but {} was requested",
                k.name(),
                kind.name()
            )));
        }
    }
    cfg.validate()?;
    match kind {
        Kind::IdentityCheck => experiments::run_identity_check(cfg),
        Kind::WeightsDump => experiments::run_weights_dump(cfg),
        Kind::FourPointScan => experiments::run_four_point_scan(cfg),
        Kind::Riemann => experiments::run_riemann(cfg),
        Kind::Sample => experiments::run_sample(cfg),
        Kind::Lln => experiments::run_lln(cfg),
        Kind::Clt => experiments::run_clt(cfg),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    kind: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    seeds: &'a [u64],
    files: Vec<&'a str>,
    checks: &'a [Check],
}

/// Writes the report files and `<stem>.manifest.json` into `dir`.
pub fn write_report(report: &Report, cfg: &ExperimentConfig, dir: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for f in &report.files {
        put(&f.name, &f.contents)?;
        if let (Format::Svg, Some(spec)) = (format, &f.plot) {
            let svg = svg::chart_from_csv(&f.name, &f.contents, spec).map_err(CliError::Config)?;
            put(&f.name.replace(".csv", ".svg"), &svg)?;
        }
    }
    let manifest = Manifest {
        kind: report.kind.name(),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        seeds: &report.seeds,
        files: report.files.iter().map(|f| f.name.as_str()).collect(),
        checks: &report.checks,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
    put(&format!("{}.manifest.json", cfg.stem(report.kind)), &(text + "\n"))?;
    Ok(written)
}

/// Shortest representation that parses back to the same binary64 value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Builds CSV text from a header and rows of already formatted cells.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
