//! Batch front end: configuration parsing, subcommand dispatch, CSV/JSON
//! emission and the validation runner.
//!
//! A run is described by a JSON configuration with nested groups
//! (`geometry`, `truncation`, `band`, `momenta`, `parities`, `tolerances`,
//! `output`, plus the subcommand groups `enhance`, `kappa` and `validate`).
//! Every scalar can be overridden on the command line by a flag of the same
//! name. Exit status: `0` on success, `1` when `validate` reports a failure,
//! `2` on configuration errors.

use annulus::enhancement::{enhancement_scan, scan_csv, DriveSelector, Excitation, ScanRow};
use annulus::kernel::{gram_from_csv, kappa_limit, singlelayer_gram, SingleLayerGram};
use annulus::modes::{roots_up_to_order, Eigenfunction, Family, Geometry, Parity};
use annulus::resonance::{
    asymptotic_resonances_variant, refine_all, resonances_csv, AsymptoticVariant, Classification, ResonanceResult,
};
use annulus::system::Assembler;
use annulus::validation::{run_suite, Outcome, SuiteConfig};
use annulus::csv_number;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable selecting the number of worker threads.
pub const THREADS_ENV: &str = "ANNULUS_THREADS";

/// Errors of the front end.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or inconsistent configuration (exit status 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// A computation failed.
    #[error("computation failed: {0}")]
    Compute(String),
    /// Output could not be written.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Geometry group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Inner radius.
    #[serde(default = "one")]
    pub a: f64,
    /// Relative gap width.
    pub h: Option<f64>,
    /// Slab thickness.
    pub l: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { a: 1.0, h: None, l: None }
    }
}

/// Truncation and quadrature group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    /// Truncation order `N`.
    #[serde(rename = "N", default = "default_order")]
    pub n: usize,
    /// Radial quadrature order.
    #[serde(default = "default_quad_radial")]
    pub quad_radial: usize,
    /// Angular quadrature order.
    #[serde(default = "default_quad_angular")]
    pub quad_angular: usize,
}

fn default_order() -> usize {
    8
}
fn default_quad_radial() -> usize {
    annulus::kernel::DEFAULT_QUAD_RADIAL
}
fn default_quad_angular() -> usize {
    annulus::kernel::DEFAULT_QUAD_ANGULAR
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig { n: default_order(), quad_radial: default_quad_radial(), quad_angular: default_quad_angular() }
    }
}

/// Frequency band group.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    /// Upper bound of the leading-order frequencies searched
    /// (default `3π/l + 3`, in units of the inverse inner radius).
    pub k_max: Option<f64>,
}

/// Tolerance group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Largest admitted relative bracket width of a Bessel root.
    #[serde(default = "default_root_tol")]
    pub root_tol: f64,
    /// Residual `|Λ|` at which Newton refinement stops.
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
}

fn default_root_tol() -> f64 {
    1e-9
}
fn default_newton_tol() -> f64 {
    1e-10
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig { root_tol: default_root_tol(), newton_tol: default_newton_tol() }
    }
}

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Comma-separated values, 17 significant digits.
    #[default]
    Csv,
    /// JSON array of row objects.
    Json,
}

/// Output group.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output format.
    #[serde(default)]
    pub format: Format,
    /// Output file (standard output when absent).
    pub path: Option<PathBuf>,
}

/// Parity names in configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ParityName {
    /// Even parity.
    Even,
    /// Odd parity.
    Odd,
}

impl From<ParityName> for Parity {
    fn from(p: ParityName) -> Self {
        match p {
            ParityName::Even => Parity::Even,
            ParityName::Odd => Parity::Odd,
        }
    }
}

/// Excitation in configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExcitationConfig {
    /// Normal plane wave.
    NormalPlane,
    /// Oblique plane wave at `angle` (radians) from the normal.
    ObliquePlane {
        /// Incidence angle.
        angle: f64,
    },
    /// Vertical dipole at height `y3`.
    Dipole {
        /// Height above the upper face.
        y3: f64,
    },
}

impl ExcitationConfig {
    fn build(&self) -> Excitation {
        match *self {
            ExcitationConfig::NormalPlane => Excitation::NormalPlane,
            ExcitationConfig::ObliquePlane { angle } => Excitation::oblique(angle),
            ExcitationConfig::Dipole { y3 } => Excitation::Dipole { y3 },
        }
    }
}

/// Drive selection in configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveConfig {
    /// Real part of a refined TE Fabry–Pérot resonance.
    TeFabryPerot {
        /// Angular momentum.
        m: i32,
        /// Formula index `m′`.
        mprime: u32,
        /// Parity.
        parity: ParityName,
    },
    /// Real part of the refined near-`|m|` resonance.
    TeNearM {
        /// Angular momentum.
        m: i32,
    },
    /// Real part of a refined TEM resonance.
    Tem {
        /// Formula index `m′`.
        mprime: u32,
        /// Parity.
        parity: ParityName,
    },
    /// Fixed physical wavenumber.
    Fixed {
        /// Wavenumber.
        k: f64,
    },
}

impl DriveConfig {
    fn build(&self) -> DriveSelector {
        match *self {
            DriveConfig::TeFabryPerot { m, mprime, parity } => {
                DriveSelector::Resonance { class: Classification::TeFabryPerot { m, mprime }, parity: parity.into() }
            }
            DriveConfig::TeNearM { m } => DriveSelector::Resonance { class: Classification::TeNearM { m }, parity: Parity::Even },
            DriveConfig::Tem { mprime, parity } => DriveSelector::Resonance { class: Classification::Tem { mprime }, parity: parity.into() },
            DriveConfig::Fixed { k } => DriveSelector::Fixed(k),
        }
    }
}

/// `enhance` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnhanceConfig {
    /// Excitation.
    pub excitation: ExcitationConfig,
    /// Drive frequency selection.
    pub drive: DriveConfig,
    /// Relative gap widths, strictly descending (at least three).
    pub h_list: Vec<f64>,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig {
            excitation: ExcitationConfig::NormalPlane,
            drive: DriveConfig::TeFabryPerot { m: 1, mprime: 1, parity: ParityName::Even },
            h_list: vec![0.02, 0.01, 0.005],
        }
    }
}

/// `kappa` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaConfig {
    /// Gram orders.
    pub orders: Vec<usize>,
}

impl Default for KappaConfig {
    fn default() -> Self {
        KappaConfig { orders: vec![8, 16, 32, 64] }
    }
}

/// `validate` group.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// Gram fixture (CSV `n',n,value`) used instead of recomputing the data.
    pub gram_fixture: Option<PathBuf>,
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Geometry.
    #[serde(default)]
    pub geometry: GeometryConfig,
    /// Truncation.
    #[serde(default)]
    pub truncation: TruncationConfig,
    /// Band.
    #[serde(default)]
    pub band: BandConfig,
    /// Angular momenta.
    #[serde(default = "default_momenta")]
    pub momenta: Vec<i32>,
    /// Parities.
    #[serde(default = "default_parities")]
    pub parities: Vec<ParityName>,
    /// Tolerances.
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    /// Output.
    #[serde(default)]
    pub output: OutputConfig,
    /// Enhancement scan.
    #[serde(default)]
    pub enhance: EnhanceConfig,
    /// `κ` convergence table.
    #[serde(default)]
    pub kappa: KappaConfig,
    /// Validation suite.
    #[serde(default)]
    pub validate: ValidateConfig,
}

fn default_momenta() -> Vec<i32> {
    vec![0, 1]
}
fn default_parities() -> Vec<ParityName> {
    vec![ParityName::Even, ParityName::Odd]
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty configuration parses")
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Checks that all numeric fields are positive.
    pub fn validate(&self) -> Result<(), CliError> {
        positive("a", self.geometry.a)?;
        if let Some(h) = self.geometry.h {
            positive("h", h)?;
        }
        if let Some(l) = self.geometry.l {
            positive("l", l)?;
        }
        for (name, v) in [("N", self.truncation.n), ("quad_radial", self.truncation.quad_radial), ("quad_angular", self.truncation.quad_angular)] {
            if v == 0 {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        if let Some(k) = self.band.k_max {
            positive("k_max", k)?;
        }
        positive("root_tol", self.tolerances.root_tol)?;
        positive("newton_tol", self.tolerances.newton_tol)?;
        if self.momenta.is_empty() || self.parities.is_empty() {
            return Err(CliError::Config("momenta and parities must be non-empty".into()));
        }
        if self.kappa.orders.iter().any(|&n| n == 0 || n > 256) {
            return Err(CliError::Config("kappa orders must lie in 1..=256".into()));
        }
        Ok(())
    }

    /// Geometry, requiring `h` and `l`.
    pub fn geometry(&self) -> Result<Geometry, CliError> {
        let h = self.geometry.h.ok_or_else(|| CliError::Config("geometry.h is required".into()))?;
        let l = self.geometry.l.ok_or_else(|| CliError::Config("geometry.l is required".into()))?;
        let g = Geometry { a: self.geometry.a, h, l };
        g.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(g)
    }

    /// Band limit, defaulting to `3π/l + 3` in units of the inner radius.
    pub fn k_max(&self, geom: &Geometry) -> f64 {
        self.band.k_max.unwrap_or_else(|| (3.0 * PI / (geom.l / geom.a) + 3.0) / geom.a)
    }
}

/// Command-line interface.
#[derive(Debug, Parser)]
#[command(name = "annulus", about = "Resonances and field enhancement of an annular aperture in a conducting slab")]
pub struct Cli {
    /// Subcommand.
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Inner radius.
    #[arg(long, global = true)]
    pub a: Option<f64>,
    /// Relative gap width.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Slab thickness.
    #[arg(long, global = true)]
    pub l: Option<f64>,
    /// Truncation order.
    #[arg(long = "N", global = true)]
    pub n: Option<usize>,
    /// Radial quadrature order.
    #[arg(long = "quad_radial", global = true)]
    pub quad_radial: Option<usize>,
    /// Angular quadrature order.
    #[arg(long = "quad_angular", global = true)]
    pub quad_angular: Option<usize>,
    /// Band limit.
    #[arg(long = "k_max", global = true)]
    pub k_max: Option<f64>,
    /// Angular momenta (comma separated).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub momenta: Option<Vec<i32>>,
    /// Parities (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub parities: Option<Vec<ParityName>>,
    /// Bessel-root bracket tolerance.
    #[arg(long = "root_tol", global = true)]
    pub root_tol: Option<f64>,
    /// Newton residual tolerance.
    #[arg(long = "newton_tol", global = true)]
    pub newton_tol: Option<f64>,
    /// Output format.
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Output file.
    #[arg(long, global = true)]
    pub path: Option<PathBuf>,
    /// Gram fixture for `validate`.
    #[arg(long = "gram_fixture", global = true)]
    pub gram_fixture: Option<PathBuf>,
}

/// Subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Eigenvalue and eigenfunction tables.
    Modes,
    /// Asymptotic and refined resonance tables.
    Resonances,
    /// Field-enhancement scan.
    Enhance,
    /// Convergence of the constant κ.
    Kappa,
    /// Acceptance suite.
    Validate,
}

/// Loads the configuration file (if any) and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = cli.a {
        cfg.geometry.a = v;
    }
    if cli.h.is_some() {
        cfg.geometry.h = cli.h;
    }
    if cli.l.is_some() {
        cfg.geometry.l = cli.l;
    }
    if let Some(v) = cli.n {
        cfg.truncation.n = v;
    }
    if let Some(v) = cli.quad_radial {
        cfg.truncation.quad_radial = v;
    }
    if let Some(v) = cli.quad_angular {
        cfg.truncation.quad_angular = v;
    }
    if cli.k_max.is_some() {
        cfg.band.k_max = cli.k_max;
    }
    if let Some(v) = &cli.momenta {
        cfg.momenta = v.clone();
    }
    if let Some(v) = &cli.parities {
        cfg.parities = v.clone();
    }
    if let Some(v) = cli.root_tol {
        cfg.tolerances.root_tol = v;
    }
    if let Some(v) = cli.newton_tol {
        cfg.tolerances.newton_tol = v;
    }
    if let Some(v) = cli.format {
        cfg.output.format = v;
    }
    if cli.path.is_some() {
        cfg.output.path = cli.path.clone();
    }
    if cli.gram_fixture.is_some() {
        cfg.validate.gram_fixture = cli.gram_fixture.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A rendered table: CSV text plus JSON rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// CSV text with header.
    pub csv: String,
    /// Rows as JSON values.
    pub json: serde_json::Value,
}

impl Table {
    /// Builds JSON rows from the CSV text (numbers stay 17-digit strings
    /// converted to JSON numbers where they parse).
    fn from_csv(csv: String) -> Self {
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
        let rows: Vec<serde_json::Value> = lines
            .map(|line| {
                let obj: serde_json::Map<String, serde_json::Value> = header
                    .iter()
                    .zip(line.split(','))
                    .map(|(k, v)| {
                        let value = match v.parse::<f64>() {
                            Ok(x) if x.is_finite() && !v.is_empty() => serde_json::json!(x),
                            _ => match v {
                                "true" => serde_json::Value::Bool(true),
                                "false" => serde_json::Value::Bool(false),
                                _ => serde_json::Value::String(v.to_string()),
                            },
                        };
                        (k.to_string(), value)
                    })
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        Table { csv, json: serde_json::Value::Array(rows) }
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv.clone(),
            Format::Json => serde_json::to_string_pretty(&self.json).expect("JSON rows serialize") + "\n",
        }
    }
}

/// Writes `text` atomically to `path` (temporary file then rename).
fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Emits tables: the first goes to the output path (or standard output),
/// further tables to `<stem>.<suffix>.<ext>` next to it.
fn emit(cfg: &RunConfig, tables: &[(&str, Table)], stdout: &mut String) -> Result<(), CliError> {
    for (i, (suffix, table)) in tables.iter().enumerate() {
        let text = table.render(cfg.output.format);
        match &cfg.output.path {
            Some(path) if i == 0 => write_atomic(path, &text)?,
            Some(path) => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
                let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
                write_atomic(&path.with_file_name(format!("{stem}.{suffix}.{ext}")), &text)?;
            }
            None => {
                if i > 0 {
                    stdout.push('\n');
                }
                stdout.push_str(&text);
            }
        }
    }
    Ok(())
}

fn threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn family_label(f: Family) -> &'static str {
    match f {
        Family::D => "TM_dirichlet",
        Family::N => "TE_neumann",
    }
}

/// Eigenvalue table (`family,m,n,beta,lambda,bracket_lo,bracket_hi`) and
/// eigenfunction samples (`family,m,n,r,value,derivative`) for the configured
/// momenta up to order `N`, in units of the inner radius.
pub fn modes_tables(cfg: &RunConfig) -> Result<Vec<(&'static str, Table)>, CliError> {
    let geom = cfg.geometry()?.normalized();
    let order = cfg.truncation.n as u32;
    let mut values = String::from("family,m,n,beta,lambda,bracket_lo,bracket_hi\n");
    let mut funcs = String::from("family,m,n,r,value,derivative\n");
    for &m in &cfg.momenta {
        for family in [Family::N, Family::D] {
            let roots = roots_up_to_order(family, m.unsigned_abs(), geom.h, order).map_err(|e| CliError::Compute(e.to_string()))?;
            for root in &roots {
                let width = (root.bracket.1 - root.bracket.0) / root.beta;
                if width > cfg.tolerances.root_tol {
                    return Err(CliError::Compute(format!("root ({m}, {}) bracket {width:e} exceeds root_tol", root.n)));
                }
                let _ = writeln!(
                    values,
                    "{},{},{},{},{},{},{}",
                    family_label(family),
                    m,
                    root.n,
                    csv_number(root.beta),
                    csv_number(root.lambda),
                    csv_number(root.bracket.0),
                    csv_number(root.bracket.1)
                );
                let e = Eigenfunction::from_root(root, m, geom.h).map_err(|e| CliError::Compute(e.to_string()))?;
                for j in 0..=8 {
                    let r = 1.0 + geom.h * j as f64 / 8.0;
                    let (v, d) = e.value_and_derivative(r);
                    let _ = writeln!(funcs, "{},{},{},{},{},{}", family_label(family), m, root.n, csv_number(r), csv_number(v), csv_number(d));
                }
            }
        }
    }
    Ok(vec![("eigenvalues", Table::from_csv(values)), ("eigenfunctions", Table::from_csv(funcs))])
}

/// Asymptotic (both variants, with `|Λ|` evaluated) and refined resonances.
pub fn resonance_rows(cfg: &RunConfig, gram: &SingleLayerGram) -> Result<Vec<ResonanceResult>, CliError> {
    let geom = cfg.geometry()?;
    let k_max = cfg.k_max(&geom);
    let mut rows = Vec::new();
    for &m in &cfg.momenta {
        let asm = Assembler::new(m, &geom, cfg.truncation.n, cfg.truncation.quad_radial, cfg.truncation.quad_angular)
            .map_err(|e| CliError::Compute(e.to_string()))?;
        for &p in &cfg.parities {
            let parity: Parity = p.into();
            let mut stated = asymptotic_resonances_variant(m, parity, &geom, k_max, gram, AsymptoticVariant::AsStated);
            let mut consistent = asymptotic_resonances_variant(m, parity, &geom, k_max, gram, AsymptoticVariant::Consistent);
            for r in stated.iter_mut().chain(consistent.iter_mut()) {
                r.residual = asm.lambda(r.k, parity).map(|v| v.norm()).unwrap_or(f64::NAN);
            }
            let refined = refine_all(&asm, &consistent, cfg.tolerances.newton_tol, threads());
            rows.extend(stated);
            rows.extend(consistent);
            for r in refined {
                rows.push(r.map_err(|e| CliError::Compute(e.to_string()))?);
            }
        }
    }
    Ok(rows)
}

/// Enhancement scan rows for the configured excitation and drive.
pub fn enhance_rows(cfg: &RunConfig, gram: &SingleLayerGram) -> Result<Vec<ScanRow>, CliError> {
    let template = Geometry { a: cfg.geometry.a, h: cfg.enhance.h_list.first().copied().unwrap_or(0.01), l: cfg.geometry.l.ok_or_else(|| CliError::Config("geometry.l is required".into()))? };
    let exc = cfg.enhance.excitation.build();
    exc.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let h_ok = cfg.enhance.h_list.len() >= 3 && cfg.enhance.h_list.windows(2).all(|w| w[1] < w[0]) && cfg.enhance.h_list.iter().all(|&h| h > 0.0);
    if !h_ok {
        return Err(CliError::Config("enhance.h_list must be positive, strictly descending, with at least three values".into()));
    }
    enhancement_scan(&exc, &cfg.enhance.drive.build(), &cfg.enhance.h_list, &template, cfg.truncation.n, gram)
        .map_err(|e| CliError::Compute(e.to_string()))
}

/// `κ(N)` table (`N,kappa,abs_error`) followed by a final `target` row
/// holding `1/(2π²) − log(π/2)/π²` and the error of the largest order.
pub fn kappa_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let target = kappa_limit();
    let mut csv = String::from("N,kappa,abs_error\n");
    let mut last = f64::NAN;
    for &n in &cfg.kappa.orders {
        let g = singlelayer_gram(n).map_err(|e| CliError::Compute(e.to_string()))?;
        last = (g.kappa - target).abs();
        let _ = writeln!(csv, "{},{},{}", n, csv_number(g.kappa), csv_number(last));
    }
    let _ = writeln!(csv, "target,{},{}", csv_number(target), csv_number(last));
    Ok(Table::from_csv(csv))
}

/// Suite configuration, using the Gram fixture when one is configured.
fn suite_config(cfg: &RunConfig) -> Result<Result<SuiteConfig, String>, CliError> {
    let mut suite = SuiteConfig::standard().map_err(CliError::Compute)?;
    suite.order = cfg.truncation.n;
    suite.quad_radial = cfg.truncation.quad_radial;
    suite.quad_angular = cfg.truncation.quad_angular;
    if let Some(path) = &cfg.validate.gram_fixture {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        match gram_from_csv(&text) {
            Ok(g) => suite.gram = g,
            Err(e) => return Ok(Err(format!("Gram fixture {} rejected: {e}", path.display()))),
        }
    }
    Ok(Ok(suite))
}

/// Runs one subcommand; returns the exit status and the text for standard output.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<(i32, String), CliError> {
    let mut out = String::new();
    match command {
        Command::Modes => {
            let tables = modes_tables(cfg)?;
            emit(cfg, &tables, &mut out)?;
        }
        Command::Resonances => {
            let gram = singlelayer_gram(64).map_err(|e| CliError::Compute(e.to_string()))?;
            let rows = resonance_rows(cfg, &gram)?;
            emit(cfg, &[("resonances", Table::from_csv(resonances_csv(&rows)))], &mut out)?;
        }
        Command::Enhance => {
            let gram = singlelayer_gram(64).map_err(|e| CliError::Compute(e.to_string()))?;
            let rows = enhance_rows(cfg, &gram)?;
            emit(cfg, &[("scan", Table::from_csv(scan_csv(&rows)))], &mut out)?;
        }
        Command::Kappa => {
            emit(cfg, &[("kappa", kappa_table(cfg)?)], &mut out)?;
        }
        Command::Validate => {
            let outcomes: Vec<Outcome> = match suite_config(cfg)? {
                Ok(suite) => run_suite(&suite),
                Err(msg) => {
                    let _ = writeln!(out, "FAIL criterion 1 kappa constant: {msg}");
                    return Ok((1, out));
                }
            };
            for o in &outcomes {
                let _ = writeln!(out, "{o}");
            }
            let failed = outcomes.iter().filter(|o| !o.pass).count();
            let _ = writeln!(out, "{} of {} lines passed", outcomes.len() - failed, outcomes.len());
            return Ok((if failed == 0 { 0 } else { 1 }, out));
        }
    }
    Ok((0, out))
}

/// Parses arguments, runs the subcommand and returns `(exit status, stdout, stderr)`.
pub fn run<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            return (code, if code == 0 { e.to_string() } else { String::new() }, if code == 0 { String::new() } else { e.to_string() });
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => return (2, String::new(), format!("{e}\n")),
    };
    match execute(cli.command, &cfg) {
        Ok((code, out)) => (code, out, String::new()),
        Err(CliError::Config(msg)) => (2, String::new(), format!("configuration error: {msg}\n")),
        Err(e) => (1, String::new(), format!("{e}\n")),
    }
}
