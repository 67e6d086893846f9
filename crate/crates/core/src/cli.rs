//! Command-line front end.
//!
//! Every table is written as CSV preceded by `#` metadata lines. Cells that
//! are not evaluable are left empty. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | all outputs written |
//! | 1 | other failure |
//! | 2 | bad configuration or arguments |
//! | 3 | output path not writable |
//! | 4 | input shot file unreadable or corrupt |
//! | 5 | order without a closed form and no `--oracle` |

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{format_orders, parse_orders, ConfigError, SweepConfig};
use crate::criteria::{evaluate_analysis, evaluate_moments, normally_ordered_excess, schwarz_raw, Criterion};
use crate::detection::{DetectionSpec, MAX_ORDER};
use crate::error::Error;
use crate::estimators::{BootstrapConfig, Measured, SeriesAnalysis};
use crate::io::{read_series, write_series, AxisTag, ReadError, ShotFile};
use crate::oracle::{exact_g, exact_joint_moments, MAX_ORACLE_ORDER};
use crate::sampler::sample_series;
use crate::states::{SourceKind, SourceSpec};
use crate::sweep::{detection_factor, SweepPoint};
use crate::theory::{coherent_g, is_supported, thermal_g, twb_g, TheoryPoint};

pub const THREADS_ENV: &str = "PHOTONCORR_THREADS";

const DEFAULT_ORDERS: &str = "1:1,2:1,2:2,3:1";

#[derive(Debug, Parser)]
#[command(name = "photoncorr", version, about = "Photon-number correlations of twin-beam and classical states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one shot-record file per sweep point.
    Simulate(SimulateArgs),
    /// Correlations, criteria and parameters of shot-record files.
    Analyze(AnalyzeArgs),
    /// Closed-form (or exact) correlations over a sweep.
    Theory(TheoryArgs),
    /// Nonclassicality tests on exact moments or on shot-record files.
    Criteria(CriteriaArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shots: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = DEFAULT_ORDERS)]
    pub orders: String,
    #[command(flatten)]
    pub boot: BootstrapArgs,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's orders.
    #[arg(long)]
    pub orders: Option<String>,
    #[arg(long)]
    pub tail: Option<f64>,
    /// Use the exact enumeration where no closed form applies.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct CriteriaArgs {
    /// Evaluate exact moments over the config's sweep.
    #[arg(long, conflicts_with = "files", required_unless_present = "files")]
    pub config: Option<PathBuf>,
    /// Evaluate shot-record files.
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub tail: Option<f64>,
    #[command(flatten)]
    pub boot: BootstrapArgs,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Write { path: PathBuf, message: String },
    Input { file: String, message: String },
    Unsupported(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Write { .. } => 3,
            CliError::Input { .. } => 4,
            CliError::Unsupported(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Write { path, message } => write!(f, "cannot write {}: {message}", path.display()),
            CliError::Input { file, message } => write!(f, "{file}: {message}"),
            CliError::Unsupported(m) | CliError::Other(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnsupportedOrder(_) => CliError::Unsupported(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match configure_threads().and_then(|()| run(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("photoncorr: error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    // a pool already exists when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Theory(a) => theory(a),
        Command::Criteria(a) => criteria(a),
    }
}

fn load_config(path: &Path) -> CliResult<SweepConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    SweepConfig::from_toml_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn config_points(cfg: &SweepConfig) -> CliResult<Vec<SweepPoint>> {
    cfg.points().map_err(|e| CliError::Config(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn basename(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn parse_order_flag(s: &str) -> CliResult<Vec<(u32, u32)>> {
    parse_orders(s).map_err(|e| CliError::Config(format!("--orders: {e}")))
}

fn boot_config(a: &BootstrapArgs) -> CliResult<BootstrapConfig> {
    BootstrapConfig::new(a.bootstrap, a.seed).map_err(|e| CliError::Config(format!("--bootstrap: {e}")))
}

fn check_tail(tail: f64) -> CliResult<f64> {
    if tail > 0.0 && tail < 1.0 {
        Ok(tail)
    } else {
        Err(CliError::Config(format!("--tail must lie in (0, 1), got {tail}")))
    }
}

fn g_column(j: u32, k: u32) -> String {
    if j < 10 && k < 10 {
        format!("g{j}{k}")
    } else {
        format!("g{j}_{k}")
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// CSV text with `#` metadata lines.
struct Table {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(command: &str) -> Self {
        Table {
            meta: vec![
                ("command".into(), command.into()),
                ("version".into(), env!("CARGO_PKG_VERSION").into()),
            ],
            header: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn meta(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.meta.push((key.into(), value.to_string()));
    }

    fn render(&self) -> CliResult<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in &self.meta {
            out.extend_from_slice(format!("# {k} = {v}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(&mut out);
        let fail = |e: csv::Error| CliError::Other(format!("csv: {e}"));
        w.write_record(&self.header).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::Other(format!("csv: {e}")))?;
        drop(w);
        Ok(out)
    }

    fn write(&self, path: &Path) -> CliResult<()> {
        write_file(path, &self.render()?)
    }
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = a.shots {
        cfg.shots = shots;
    }
    cfg.check_overridable()?;
    let points = config_points(&cfg)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::Write {
        path: a.out.clone(),
        message: e.to_string(),
    })?;
    for p in &points {
        let series = sample_series(&p.source, &p.detection, cfg.shots, p.seed)?;
        let mut bytes = Vec::new();
        let tag = AxisTag {
            axis: p.axis,
            value: p.axis_value,
        };
        write_series(&mut bytes, &series, Some(tag)).map_err(|e| CliError::Other(e.to_string()))?;
        let path = a.out.join(p.file_name());
        write_file(&path, &bytes)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn load_shots(path: &Path) -> CliResult<ShotFile> {
    let name = path.display().to_string();
    let f = fs::File::open(path).map_err(|e| CliError::Input {
        file: name.clone(),
        message: e.to_string(),
    })?;
    read_series(BufReader::new(f)).map_err(|e| CliError::Input {
        file: name,
        message: match e {
            ReadError::Corrupt { offset, message } => format!("corrupt at byte offset {offset}: {message}"),
            ReadError::Io(e) => e.to_string(),
        },
    })
}

fn measured_cells(m: Option<Measured>) -> [String; 2] {
    match m {
        Some(m) => [num(m.value), num(m.stderr)],
        None => [String::new(), String::new()],
    }
}

fn analyze(a: &AnalyzeArgs) -> CliResult<()> {
    let orders = parse_order_flag(&a.orders)?;
    if let Some((j, k)) = orders.iter().find(|(j, k)| *j > MAX_ORDER || *k > MAX_ORDER) {
        return Err(CliError::Unsupported(format!(
            "order {j}:{k} exceeds the maximum per-arm order {MAX_ORDER}"
        )));
    }
    let boot = boot_config(&a.boot)?;
    let max_j = orders.iter().map(|o| o.0).max().unwrap_or(0).max(3);
    let max_k = orders.iter().map(|o| o.1).max().unwrap_or(0).max(3);

    let mut table = Table::new("analyze");
    table.meta("orders", format_orders(&orders));
    table.meta("bootstrap.resamples", boot.resamples);
    table.meta("bootstrap.seed", boot.seed);
    for f in &a.files {
        table.meta("input", basename(f));
    }
    let mut header: Vec<String> = ["file", "axis", "axis_value", "n_shots", "mean1", "mean1_se", "mean2", "mean2_se", "mean_avg", "mean_avg_se"]
        .map(String::from)
        .to_vec();
    for &(j, k) in &orders {
        header.push(g_column(j, k));
        header.push(format!("{}_se", g_column(j, k)));
    }
    for name in ["nrf", "schwarz", "high_order", "modes_hat", "eta_hat"] {
        header.push(name.into());
        header.push(format!("{name}_se"));
    }
    table.header = header;

    for path in &a.files {
        let file = load_shots(path)?;
        let analysis = SeriesAnalysis::new(&file.series, max_j, max_k, &boot)?;
        let params = analysis.parameters().ok();
        let mut row = vec![
            basename(path),
            file.axis.map(|t| t.axis.to_string()).unwrap_or_default(),
            opt(file.axis.map(|t| t.value)),
            analysis.n_shots().to_string(),
        ];
        for m in [
            params.as_ref().map(|p| p.mean1),
            params.as_ref().map(|p| p.mean2),
            params.as_ref().map(|p| p.mean_avg),
        ] {
            row.extend(measured_cells(m));
        }
        for &(j, k) in &orders {
            let g = analysis.g(j, k).ok().map(|e| Measured {
                value: e.value,
                stderr: e.stderr,
            });
            row.extend(measured_cells(g));
        }
        let report = evaluate_analysis(&analysis);
        for c in [Criterion::NoiseReduction, Criterion::Schwarz, Criterion::HighOrder] {
            let m = report.get(c).map(|o| Measured {
                value: o.lhs,
                stderr: o.stderr.unwrap_or(f64::NAN),
            });
            row.extend(measured_cells(m));
        }
        row.extend(measured_cells(params.as_ref().and_then(|p| p.modes_hat)));
        row.extend(measured_cells(params.as_ref().and_then(|p| p.eta_hat)));
        table.rows.push(row);
    }
    table.write(&a.out)
}

/// The three source kinds at the detected mean of `p`, sharing its modes,
/// transmittance and detectors.
fn theory_sources(p: &SweepPoint) -> CliResult<[SourceSpec; 3]> {
    let m = p.mean_detected();
    let tau = p.source.transmittance;
    let make = |kind: SourceKind, modes: f64| -> CliResult<SourceSpec> {
        let probe = SourceSpec::new(kind, 0.0, modes, tau)?;
        let f = detection_factor(&probe, &p.detection);
        Ok(SourceSpec::new(kind, if f > 0.0 { m / f } else { 0.0 }, modes, tau)?)
    };
    Ok([
        make(SourceKind::TwinBeam, p.source.modes)?,
        make(SourceKind::MultimodeThermal, p.source.modes)?,
        make(SourceKind::Coherent, 1.0)?,
    ])
}

/// Both arms see the same mean, which the closed forms assume.
fn equal_arm_means(source: &SourceSpec, det: &DetectionSpec) -> bool {
    match source.kind {
        SourceKind::TwinBeam => det.is_balanced(),
        _ => {
            let a = source.transmittance * det.eta1;
            let b = (1.0 - source.transmittance) * det.eta2;
            (a - b).abs() <= 1e-12 * a.max(b)
        }
    }
}

fn theory(a: &TheoryArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(o) = &a.orders {
        cfg.orders = parse_order_flag(o)?;
    }
    if let Some(t) = a.tail {
        cfg.tail = check_tail(t)?;
    }
    let points = config_points(&cfg)?;
    let tail = cfg.tail;

    let mut table = Table::new("theory");
    for (k, v) in cfg.provenance() {
        table.meta(k, v);
    }
    table.meta("oracle_fallback", a.oracle);
    let mut header: Vec<String> = ["axis_value", "mean_detected", "modes", "eta"].map(String::from).to_vec();
    for &(j, k) in &cfg.orders {
        for prefix in ["twb", "thermal", "coherent"] {
            header.push(format!("{prefix}_{}", g_column(j, k)));
        }
    }
    table.header = header;

    let mut used_oracle = vec![false; cfg.orders.len()];
    for p in &points {
        let m = p.mean_detected();
        let sources = theory_sources(p)?;
        let mut row = vec![num(p.axis_value), num(m), num(p.source.modes), num(p.eta())];
        for (oi, &(j, k)) in cfg.orders.iter().enumerate() {
            for src in &sources {
                let closed = is_supported(j, k) && equal_arm_means(src, &p.detection);
                let value = if closed {
                    match src.kind {
                        SourceKind::TwinBeam => twb_g(j, k, &TheoryPoint::new(m, src.modes, p.detection.eta1)?),
                        SourceKind::MultimodeThermal => thermal_g(j, k, m, src.modes),
                        SourceKind::Coherent => coherent_g(j, k, m),
                    }
                } else if !a.oracle {
                    return Err(CliError::Unsupported(format!(
                        "order {j}:{k} has no closed form for {} at this point; rerun with --oracle",
                        src.kind
                    )));
                } else if j.max(k) > MAX_ORACLE_ORDER {
                    return Err(CliError::Unsupported(format!(
                        "order {j}:{k} exceeds the exact-enumeration limit {MAX_ORACLE_ORDER}"
                    )));
                } else {
                    used_oracle[oi] = true;
                    exact_g(src, &p.detection, j, k, tail)
                };
                row.push(opt(value.ok()));
            }
        }
        table.rows.push(row);
    }
    for (oi, &(j, k)) in cfg.orders.iter().enumerate() {
        let method = if used_oracle[oi] { "oracle" } else { "closed_form" };
        table.meta(format!("method.{}", g_column(j, k)), method);
    }
    table.write(&a.out)
}

fn criteria(a: &CriteriaArgs) -> CliResult<()> {
    match &a.config {
        Some(path) => exact_criteria(a, path),
        None => series_criteria(a),
    }
}

fn exact_criteria(a: &CriteriaArgs, path: &Path) -> CliResult<()> {
    let mut cfg = load_config(path)?;
    if let Some(t) = a.tail {
        cfg.tail = check_tail(t)?;
    }
    let points = config_points(&cfg)?;
    let mut table = Table::new("criteria");
    for (k, v) in cfg.provenance() {
        table.meta(k, v);
    }
    table.meta("moments", "exact");
    table.header = [
        "axis_value",
        "mean_detected",
        "schwarz",
        "schwarz_pass",
        "schwarz_raw",
        "nrf",
        "nrf_pass",
        "high_order",
        "high_order_pass",
        "normally_ordered_excess",
    ]
    .map(String::from)
    .to_vec();
    for p in &points {
        let t = exact_joint_moments(&p.source, &p.detection, 3, 3, cfg.tail)?;
        let report = evaluate_moments(&t);
        let mut row = vec![num(p.axis_value), num(p.mean_detected())];
        for c in Criterion::ALL {
            let o = report.get(c);
            row.push(opt(o.map(|o| o.lhs)));
            row.push(o.map(|o| o.pass.to_string()).unwrap_or_default());
            if c == Criterion::Schwarz {
                row.push(opt(schwarz_raw(&t).ok()));
            }
        }
        row.push(opt(normally_ordered_excess(&t).ok()));
        table.rows.push(row);
    }
    table.write(&a.out)
}

fn series_criteria(a: &CriteriaArgs) -> CliResult<()> {
    let boot = boot_config(&a.boot)?;
    let mut table = Table::new("criteria");
    table.meta("moments", "empirical");
    table.meta("bootstrap.resamples", boot.resamples);
    table.meta("bootstrap.seed", boot.seed);
    for f in &a.files {
        table.meta("input", basename(f));
    }
    let mut header: Vec<String> = ["file", "axis_value", "mean_avg"].map(String::from).to_vec();
    for c in Criterion::ALL {
        for suffix in ["", "_se", "_z", "_pass"] {
            header.push(format!("{}{suffix}", c.name()));
        }
    }
    table.header = header;
    for path in &a.files {
        let file = load_shots(path)?;
        let analysis = SeriesAnalysis::new(&file.series, 3, 3, &boot)?;
        let report = evaluate_analysis(&analysis);
        let t = analysis.point();
        let mut row = vec![
            basename(path),
            opt(file.axis.map(|t| t.value)),
            num(0.5 * (t.mean1() + t.mean2())),
        ];
        for c in Criterion::ALL {
            let o = report.get(c);
            row.push(opt(o.map(|o| o.lhs)));
            row.push(opt(o.and_then(|o| o.stderr)));
            row.push(opt(o.and_then(|o| o.z_score)));
            row.push(o.map(|o| o.pass.to_string()).unwrap_or_default());
        }
        table.rows.push(row);
    }
    table.write(&a.out)
}
