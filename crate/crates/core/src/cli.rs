//! Command-line front end: configuration resolution, CSV rendering, and run
//! manifests.
//!
//! Configuration comes from an optional `key = value` file whose keys match
//! [`ExperimentConfig`] fields, overridden by command-line flags. A manifest
//! written next to each output uses the same format, so
//! `--config <manifest>` replays the run.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::experiment::{sweep, AntsSummary, Experiment, ExperimentConfig, SweepAxis, SweepRow};
use crate::fusion::{system_pfa_approx, theory_curves, TheoryCurves};
use crate::ordering::{ants_bounds, AntsBounds};
use crate::sensor_field::{RoiConfig, SignalModel};
use crate::stat_math::Probability;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SUMMARY_COLUMNS: [&str; 16] = [
    "n_sensors",
    "p0",
    "alpha",
    "n_exp",
    "local_pfa",
    "system_pfa",
    "likelihood_r",
    "n_trials",
    "master_seed",
    "ants_mean",
    "ants_stderr",
    "empirical_pd",
    "empirical_pfa",
    "upper_count",
    "lower_count",
    "exhausted_count",
];

pub const THEORY_COLUMNS: [&str; 18] = [
    "n_sensors",
    "p0",
    "alpha",
    "n_exp",
    "roi_b",
    "local_pfa",
    "system_pfa",
    "likelihood_r",
    "tau",
    "threshold_t",
    "gamma",
    "pd_bar",
    "sigma_bar_sq",
    "theory_pfa",
    "theory_pd",
    "ants_upper_case_bound",
    "ants_lower_case_bound",
    "ants_bound",
];

/// Written for missing values, e.g. detection rate with no H1 trials.
pub const MISSING: &str = "NA";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file, or parameter values. Exit code 2.
    Usage(String),
    /// Failure while running or writing output. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Domain(_) | Error::Unsupported(_) => CliError::Usage(e.to_string()),
            Error::Convergence { .. } | Error::Trial { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "ordfusion", version, about = "Ordered-transmission counting rule: theory, simulation, sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Print thresholds, theoretical Pfa/Pd, and savings bounds.
    Theory,
    /// Monte Carlo run of one configuration.
    Simulate,
    /// Monte Carlo runs along one parameter axis.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Theory => "theory",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n_sensors: Option<usize>,
    #[arg(long, global = true)]
    pub p0: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub decay_exp: Option<f64>,
    #[arg(long, global = true)]
    pub roi_b: Option<f64>,
    #[arg(long, global = true)]
    pub local_pfa: Option<f64>,
    #[arg(long, global = true)]
    pub system_pfa: Option<f64>,
    #[arg(long, global = true)]
    pub likelihood_r: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sweep axis: n_sensors, p0, local_pfa, or likelihood_r.
    #[arg(long, global = true)]
    pub axis: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long, global = true, value_name = "CSV-LIST")]
    pub values: Option<String>,
    /// CSV output path; the manifest goes to `<PATH>.manifest`.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

/// Unresolved settings; `None` means "not given here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub n_sensors: Option<usize>,
    pub p0: Option<f64>,
    pub alpha: Option<f64>,
    pub n_exp: Option<f64>,
    pub roi_b: Option<f64>,
    pub target_x: Option<f64>,
    pub target_y: Option<f64>,
    pub local_pfa: Option<f64>,
    pub system_pfa: Option<f64>,
    pub likelihood_r: Option<f64>,
    pub n_trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub axis: Option<String>,
    pub values: Option<String>,
}

pub const DEFAULT_ALPHA: f64 = 0.02;
pub const DEFAULT_N_EXP: f64 = 2.0;
pub const DEFAULT_ROI_B: f64 = 100.0;
pub const DEFAULT_PFA: f64 = 1e-3;
pub const DEFAULT_LIKELIHOOD_R: f64 = 0.5;
pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;

fn parse_value<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Usage(format!("config line {line}: cannot parse `{v}` for `{key}`")))
}

impl RawConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = RawConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {line_no}: expected `key = value`")))?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "n_sensors" => c.n_sensors = Some(parse_value(key, v, line_no)?),
                "p0" => c.p0 = Some(parse_value(key, v, line_no)?),
                "alpha" => c.alpha = Some(parse_value(key, v, line_no)?),
                "n_exp" => c.n_exp = Some(parse_value(key, v, line_no)?),
                "roi_b" => c.roi_b = Some(parse_value(key, v, line_no)?),
                "target_x" => c.target_x = Some(parse_value(key, v, line_no)?),
                "target_y" => c.target_y = Some(parse_value(key, v, line_no)?),
                "local_pfa" => c.local_pfa = Some(parse_value(key, v, line_no)?),
                "system_pfa" => c.system_pfa = Some(parse_value(key, v, line_no)?),
                "likelihood_r" => c.likelihood_r = Some(parse_value(key, v, line_no)?),
                "n_trials" => c.n_trials = Some(parse_value(key, v, line_no)?),
                "master_seed" => c.master_seed = Some(parse_value(key, v, line_no)?),
                "axis" => c.axis = Some(v.to_string()),
                "values" => c.values = Some(v.to_string()),
                other => return Err(CliError::Usage(format!("config line {line_no}: unknown key `{other}`"))),
            }
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: RawConfig) -> RawConfig {
        RawConfig {
            n_sensors: over.n_sensors.or(self.n_sensors),
            p0: over.p0.or(self.p0),
            alpha: over.alpha.or(self.alpha),
            n_exp: over.n_exp.or(self.n_exp),
            roi_b: over.roi_b.or(self.roi_b),
            target_x: over.target_x.or(self.target_x),
            target_y: over.target_y.or(self.target_y),
            local_pfa: over.local_pfa.or(self.local_pfa),
            system_pfa: over.system_pfa.or(self.system_pfa),
            likelihood_r: over.likelihood_r.or(self.likelihood_r),
            n_trials: over.n_trials.or(self.n_trials),
            master_seed: over.master_seed.or(self.master_seed),
            axis: over.axis.or(self.axis),
            values: over.values.or(self.values),
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let n_sensors = self
            .n_sensors
            .ok_or_else(|| CliError::Usage("n_sensors is required (--n-sensors or config key)".into()))?;
        let p0 = self
            .p0
            .ok_or_else(|| CliError::Usage("p0 is required (--p0 or config key)".into()))?;
        let prob = |field: &'static str, v: f64| {
            Probability::new(v).map_err(|e| CliError::from(Error::config(field, e.to_string())))
        };
        let config = ExperimentConfig {
            n_sensors,
            roi: RoiConfig::new(
                self.roi_b.unwrap_or(DEFAULT_ROI_B),
                self.target_x.unwrap_or(0.0),
                self.target_y.unwrap_or(0.0),
            )?,
            model: SignalModel::new(p0, self.alpha.unwrap_or(DEFAULT_ALPHA), self.n_exp.unwrap_or(DEFAULT_N_EXP))?,
            local_pfa: prob("local_pfa", self.local_pfa.unwrap_or(DEFAULT_PFA))?,
            system_pfa: prob("system_pfa", self.system_pfa.unwrap_or(DEFAULT_PFA))?,
            likelihood_r: prob("likelihood_r", self.likelihood_r.unwrap_or(DEFAULT_LIKELIHOOD_R))?,
            n_trials: self.n_trials.unwrap_or(DEFAULT_TRIALS),
            master_seed: self.master_seed.unwrap_or(DEFAULT_SEED),
        };
        config.validate()?;
        Ok(config)
    }
}

impl From<&Opts> for RawConfig {
    fn from(o: &Opts) -> Self {
        RawConfig {
            n_sensors: o.n_sensors,
            p0: o.p0,
            alpha: o.alpha,
            n_exp: o.decay_exp,
            roi_b: o.roi_b,
            target_x: None,
            target_y: None,
            local_pfa: o.local_pfa,
            system_pfa: o.system_pfa,
            likelihood_r: o.likelihood_r,
            n_trials: o.trials,
            master_seed: o.seed,
            axis: o.axis.clone(),
            values: o.values.clone(),
        }
    }
}

/// `%.9g`-style rendering: nine significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-5, 1e9)`. NaN renders as [`MISSING`].
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return MISSING.to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa.to_string()), exp.abs())
    }
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn format_prob(p: Option<Probability>) -> String {
    p.map_or_else(|| MISSING.to_string(), |p| format_real(p.value()))
}

fn summary_fields(c: &ExperimentConfig, s: &AntsSummary) -> Vec<String> {
    vec![
        c.n_sensors.to_string(),
        format_real(c.model.p0()),
        format_real(c.model.alpha()),
        format_real(c.model.n_exp()),
        format_real(c.local_pfa.value()),
        format_real(c.system_pfa.value()),
        format_real(c.likelihood_r.value()),
        c.n_trials.to_string(),
        c.master_seed.to_string(),
        format_real(s.ants_mean),
        format_real(s.ants_stderr),
        format_prob(s.empirical_pd),
        format_prob(s.empirical_pfa),
        s.upper_count.to_string(),
        s.lower_count.to_string(),
        s.exhausted_count.to_string(),
    ]
}

pub fn simulate_csv(config: &ExperimentConfig, summary: &AntsSummary) -> String {
    let mut out = SUMMARY_COLUMNS.join(",");
    out.push('\n');
    out.push_str(&summary_fields(config, summary).join(","));
    out.push('\n');
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis_value,");
    out.push_str(&SUMMARY_COLUMNS.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&format_real(r.axis_value));
        out.push(',');
        out.push_str(&summary_fields(&r.config, &r.summary).join(","));
        out.push('\n');
    }
    out
}

/// Theoretical operating point of a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryReport {
    pub config: ExperimentConfig,
    pub tau: f64,
    pub threshold_t: f64,
    pub curves: TheoryCurves,
    pub theory_pfa: Probability,
    /// `None` when the threshold is not below the sensor count.
    pub bounds: Option<AntsBounds>,
}

pub fn theory_report(config: &ExperimentConfig) -> Result<TheoryReport, CliError> {
    let exp = Experiment::new(*config)?;
    let det = exp.detector();
    let t = exp.threshold();
    let curves = theory_curves(det, &config.model, &config.roi, config.n_sensors, t)?;
    let theory_pfa = system_pfa_approx(config.n_sensors, config.local_pfa, t)?;
    let bounds = ants_bounds(config.n_sensors, t, config.likelihood_r).ok();
    Ok(TheoryReport {
        config: *config,
        tau: det.tau(),
        threshold_t: t,
        curves,
        theory_pfa,
        bounds,
    })
}

impl TheoryReport {
    fn fields(&self) -> Vec<String> {
        let c = &self.config;
        let bound = |f: fn(&AntsBounds) -> f64| self.bounds.as_ref().map_or(MISSING.to_string(), |b| format_real(f(b)));
        vec![
            c.n_sensors.to_string(),
            format_real(c.model.p0()),
            format_real(c.model.alpha()),
            format_real(c.model.n_exp()),
            format_real(c.roi.side_b()),
            format_real(c.local_pfa.value()),
            format_real(c.system_pfa.value()),
            format_real(c.likelihood_r.value()),
            format_real(self.tau),
            format_real(self.threshold_t),
            format_real(self.curves.gamma.value()),
            format_real(self.curves.pd_bar.value()),
            format_real(self.curves.sigma_bar_sq),
            format_real(self.theory_pfa.value()),
            format_real(self.curves.system_pd.value()),
            bound(|b| b.upper_case_bound),
            bound(|b| b.lower_case_bound),
            bound(|b| b.combined),
        ]
    }

    pub fn csv(&self) -> String {
        format!("{}\n{}\n", THEORY_COLUMNS.join(","), self.fields().join(","))
    }

    /// Aligned two-column table for terminals.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for (k, v) in THEORY_COLUMNS.iter().zip(self.fields()) {
            let _ = writeln!(s, "{k:<22} {v}");
        }
        s
    }
}

/// Plain-text record of a run; parses back as a config file.
pub fn manifest(command: Command, config: &ExperimentConfig, sweep_spec: Option<(SweepAxis, &str)>, output: Option<&Path>) -> String {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut s = String::new();
    let _ = writeln!(s, "# ordfusion {VERSION}");
    let _ = writeln!(s, "# command: {}", command.name());
    let _ = writeln!(s, "# timestamp_unix: {timestamp}");
    match output {
        Some(p) => {
            let _ = writeln!(s, "# output: {}", p.display());
        }
        None => {
            let _ = writeln!(s, "# output: <stdout>");
        }
    }
    let (tx, ty) = config.roi.target();
    let _ = writeln!(s, "n_sensors = {}", config.n_sensors);
    let _ = writeln!(s, "p0 = {}", config.model.p0());
    let _ = writeln!(s, "alpha = {}", config.model.alpha());
    let _ = writeln!(s, "n_exp = {}", config.model.n_exp());
    let _ = writeln!(s, "roi_b = {}", config.roi.side_b());
    let _ = writeln!(s, "target_x = {tx}");
    let _ = writeln!(s, "target_y = {ty}");
    let _ = writeln!(s, "local_pfa = {}", config.local_pfa.value());
    let _ = writeln!(s, "system_pfa = {}", config.system_pfa.value());
    let _ = writeln!(s, "likelihood_r = {}", config.likelihood_r.value());
    let _ = writeln!(s, "n_trials = {}", config.n_trials);
    let _ = writeln!(s, "master_seed = {}", config.master_seed);
    if let Some((axis, values)) = sweep_spec {
        let _ = writeln!(s, "axis = {axis}");
        let _ = writeln!(s, "values = {values}");
    }
    s
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

pub fn parse_values(list: &str) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("cannot parse sweep value `{s}`"))))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Usage("--values needs at least one value".into()));
    }
    Ok(values)
}

fn emit(out: Option<&Path>, body: &str, manifest_text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, body).map_err(|e| io_error(path, e))?;
            let mpath = manifest_path(path);
            fs::write(&mpath, manifest_text).map_err(|e| io_error(&mpath, e))?;
        }
        None => {
            io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| CliError::Runtime(format!("stdout: {e}")))?;
            io::stderr()
                .write_all(manifest_text.as_bytes())
                .map_err(|e| CliError::Runtime(format!("stderr: {e}")))?;
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.opts.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let raw = file.overlay(RawConfig::from(&cli.opts));
    let config = raw.resolve()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = cli.opts.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        pool = pool.num_threads(threads);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;

    let out = cli.opts.out.as_deref();
    match cli.command {
        Command::Theory => {
            let report = theory_report(&config)?;
            print!("{}", report.table());
            if let Some(path) = out {
                emit(Some(path), &report.csv(), &manifest(cli.command, &config, None, Some(path)))?;
            }
        }
        Command::Simulate => {
            let summary = pool.install(|| Experiment::new(config)?.monte_carlo())?;
            emit(out, &simulate_csv(&config, &summary), &manifest(cli.command, &config, None, out))?;
        }
        Command::Sweep => {
            let axis_name = raw
                .axis
                .as_deref()
                .ok_or_else(|| CliError::Usage("sweep requires --axis".into()))?;
            let axis: SweepAxis = axis_name.parse()?;
            let list = raw
                .values
                .as_deref()
                .ok_or_else(|| CliError::Usage("sweep requires --values".into()))?;
            let values = parse_values(list)?;
            let rows = pool.install(|| sweep(&config, axis, &values))?;
            let canonical: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            let m = manifest(cli.command, &config, Some((axis, &canonical.join(","))), out);
            emit(out, &sweep_csv(&rows), &m)?;
        }
    }
    Ok(())
}
