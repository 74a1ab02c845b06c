//! Batch command-line front end.
//!
//! Settings come from three layers, later ones winning: top-level keys of
//! the `--config` TOML file, the file's table named after the subcommand,
//! then command-line flags. Keys in the file are the flag names without the
//! leading dashes, e.g. `snr-db = [0, 10]`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::channel::{draw_wavenumber_channel, transform_matrix, ArrayGeometry};
use crate::coupling::{coupling_spectrum, CouplingSpectrum, DEFAULT_TOL};
use crate::emcc::{estimate_coupling, EmccConfig, LsMethod};
use crate::error::{Error, Result};
use crate::grid::{build_grid, Aperture};
use crate::metrics::{
    db_to_linear, edof_deterministic_factored, edof_statistical, CapacityEnsemble,
    DeterministicEdof, DeterministicMethod, EdofResult, DEFAULT_GAMMA,
};
use crate::pattern::{PatternSource, RadiationPattern};
use crate::report::{write_metrics, write_spectrum, Format, MetricsReport, Provenance, SpectrumExtras};

#[derive(Debug, Parser)]
#[command(name = "wavenumber-dof", version, about = "Wavenumber-domain coupling coefficients, EDoF and ergodic capacity of planar arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coupling spectrum of one aperture for each pattern, by quadrature.
    Coupling(Flags),
    /// Coupling spectrum estimated from simulated multipath channels,
    /// compared against quadrature.
    Emcc(Flags),
    /// Statistical and deterministic effective degrees of freedom.
    Edof(Flags),
    /// Ergodic capacity for each SNR, full and EDoF-truncated.
    Capacity(Flags),
    /// EDoF and capacity over element spacings and SNRs (long-format rows).
    Sweep(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Coupling(_) => "coupling",
            Command::Emcc(_) => "emcc",
            Command::Edof(_) => "edof",
            Command::Capacity(_) => "capacity",
            Command::Sweep(_) => "sweep",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Coupling(f)
            | Command::Emcc(f)
            | Command::Edof(f)
            | Command::Capacity(f)
            | Command::Sweep(f) => f,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Flags {
    /// Aperture in wavelengths, AxB (transmit side when --rx-aperture is set).
    #[arg(long)]
    #[serde(default, deserialize_with = "de::opt_from_str")]
    pub aperture: Option<Aperture>,
    /// Receive aperture; defaults to --aperture.
    #[arg(long)]
    #[serde(default, deserialize_with = "de::opt_from_str")]
    pub rx_aperture: Option<Aperture>,
    /// Element spacing(s) in wavelengths, 0 < d <= 0.5.
    #[arg(long, value_delimiter = ',')]
    pub spacing: Option<Vec<f64>>,
    /// cos:M, hypothetical or file:PATH; one per spacing in a sweep.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "de::opt_list_from_str")]
    pub pattern: Option<Vec<PatternSource>>,
    /// Receive pattern; defaults to the first --pattern.
    #[arg(long)]
    #[serde(default, deserialize_with = "de::opt_from_str")]
    pub rx_pattern: Option<PatternSource>,
    /// Energy threshold for EDoF, in (0, 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr_db: Option<Vec<f64>>,
    /// Plane waves per simulated channel.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Channel realizations (EMCC estimate, or deterministic EDoF; 0 skips the latter).
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Monte-Carlo trials for capacity.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Absolute quadrature tolerance per cell.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub ls_method: Option<LsMethod>,
    #[arg(long)]
    pub regularization: Option<f64>,
    /// Divisor applied to the fitted EMCC variance.
    #[arg(long)]
    pub variance_scale: Option<f64>,
    #[arg(long, value_enum)]
    pub det_method: Option<DeterministicMethod>,
    /// Output file (or directory for several coupling spectra); stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// TOML settings file.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

mod de {
    use std::str::FromStr;

    use serde::{Deserialize, Deserializer};

    pub fn opt_from_str<'de, D, T>(d: D) -> Result<Option<T>, D::Error>
    where
        D: Deserializer<'de>,
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }

    pub fn opt_list_from_str<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
    where
        D: Deserializer<'de>,
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let list = match Option::<OneOrMany>::deserialize(d)? {
            None => return Ok(None),
            Some(OneOrMany::One(s)) => vec![s],
            Some(OneOrMany::Many(v)) => v,
        };
        list.iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect::<Result<_, _>>()
            .map(Some)
    }
}

impl Flags {
    /// Fields set in `self` win over those in `base`.
    fn or(self, base: Flags) -> Flags {
        Flags {
            aperture: self.aperture.or(base.aperture),
            rx_aperture: self.rx_aperture.or(base.rx_aperture),
            spacing: self.spacing.or(base.spacing),
            pattern: self.pattern.or(base.pattern),
            rx_pattern: self.rx_pattern.or(base.rx_pattern),
            gamma: self.gamma.or(base.gamma),
            snr_db: self.snr_db.or(base.snr_db),
            paths: self.paths.or(base.paths),
            realizations: self.realizations.or(base.realizations),
            trials: self.trials.or(base.trials),
            seed: self.seed.or(base.seed),
            tol: self.tol.or(base.tol),
            ls_method: self.ls_method.or(base.ls_method),
            regularization: self.regularization.or(base.regularization),
            variance_scale: self.variance_scale.or(base.variance_scale),
            det_method: self.det_method.or(base.det_method),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            workers: self.workers.or(base.workers),
            config: self.config.or(base.config),
        }
    }
}

const COMMANDS: [&str; 5] = ["coupling", "emcc", "edof", "capacity", "sweep"];

/// Reads a settings file and returns its top-level and per-command layers
/// merged for `command`.
pub fn load_config(path: &Path, command: &str) -> Result<Flags> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |e: &dyn std::fmt::Display| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    };
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_err(&e))?;
    let mut sections = BTreeMap::new();
    for name in COMMANDS {
        if let Some(v) = table.remove(name) {
            sections.insert(name, v);
        }
    }
    let base: Flags = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| parse_err(&e))?;
    let section: Flags = match sections.remove(command) {
        Some(v) => v.try_into().map_err(|e: toml::de::Error| parse_err(&e))?,
        None => Flags::default(),
    };
    Ok(section.or(base))
}

/// Fully resolved and validated settings of one run.
#[derive(Debug, Clone)]
struct Settings {
    aperture: Aperture,
    rx_aperture: Aperture,
    spacing: Vec<f64>,
    pattern: Vec<PatternSource>,
    rx_pattern: PatternSource,
    gamma: f64,
    snr_db: Vec<f64>,
    paths: usize,
    realizations: usize,
    trials: usize,
    seed: u64,
    tol: f64,
    ls_method: LsMethod,
    regularization: f64,
    variance_scale: f64,
    det_method: DeterministicMethod,
    out: Option<PathBuf>,
    format: Format,
    workers: Option<usize>,
}

fn resolve(command: &str, f: Flags) -> Result<Settings> {
    let aperture = f
        .aperture
        .ok_or_else(|| Error::validation("aperture", "--aperture AxB is required"))?;
    let pattern = f
        .pattern
        .ok_or_else(|| Error::validation("pattern", "--pattern is required"))?;
    if pattern.is_empty() {
        return Err(Error::validation("pattern", "empty list"));
    }
    let emcc = EmccConfig::default();
    let s = Settings {
        aperture,
        rx_aperture: f.rx_aperture.unwrap_or(aperture),
        spacing: f.spacing.unwrap_or_else(|| vec![0.5]),
        rx_pattern: f.rx_pattern.unwrap_or_else(|| pattern[0].clone()),
        pattern,
        gamma: f.gamma.unwrap_or(DEFAULT_GAMMA),
        snr_db: f.snr_db.unwrap_or_else(|| vec![10.0]),
        paths: f.paths.unwrap_or(emcc.paths),
        realizations: f.realizations.unwrap_or(if command == "emcc" { emcc.realizations } else { 200 }),
        trials: f.trials.unwrap_or(500),
        seed: f.seed.unwrap_or(0),
        tol: f.tol.unwrap_or(DEFAULT_TOL),
        ls_method: f.ls_method.unwrap_or_default(),
        regularization: f.regularization.unwrap_or(0.0),
        variance_scale: f.variance_scale.unwrap_or(emcc.variance_scale),
        det_method: f.det_method.unwrap_or_default(),
        out: f.out,
        format: f.format.unwrap_or_default(),
        workers: f.workers,
    };
    validate(command, &s)?;
    Ok(s)
}

fn validate(command: &str, s: &Settings) -> Result<()> {
    if s.spacing.is_empty() {
        return Err(Error::validation("spacing", "empty list"));
    }
    for &d in &s.spacing {
        ArrayGeometry::new(s.aperture, d)?;
    }
    if !(s.gamma > 0.0 && s.gamma < 1.0) {
        return Err(Error::validation("gamma", format!("must lie in (0, 1), got {}", s.gamma)));
    }
    if s.snr_db.is_empty() || s.snr_db.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("snr-db", "need one or more finite values"));
    }
    if s.trials < 1 {
        return Err(Error::validation("trials", "must be >= 1"));
    }
    if !(s.tol.is_finite() && s.tol > 0.0) {
        return Err(Error::validation("tol", format!("must be > 0, got {}", s.tol)));
    }
    if s.workers == Some(0) {
        return Err(Error::validation("workers", "must be >= 1"));
    }
    match command {
        "emcc" => {
            if s.spacing.len() != 1 || s.pattern.len() != 1 {
                return Err(Error::validation("emcc", "takes one spacing and one pattern"));
            }
            emcc_config(s).validate()?;
        }
        "capacity" | "edof" => {
            if s.spacing.len() != 1 {
                return Err(Error::validation("spacing", format!("{command} takes one spacing")));
            }
            if s.pattern.len() != 1 {
                return Err(Error::validation("pattern", format!("{command} takes one transmit pattern")));
            }
            ArrayGeometry::new(s.rx_aperture, s.spacing[0])?;
        }
        "sweep" => {
            if s.pattern.len() != 1 && s.pattern.len() != s.spacing.len() {
                return Err(Error::validation(
                    "pattern",
                    format!(
                        "give one pattern or one per spacing ({} patterns for {} spacings)",
                        s.pattern.len(),
                        s.spacing.len()
                    ),
                ));
            }
        }
        _ => {}
    }
    Ok(())
}

fn emcc_config(s: &Settings) -> EmccConfig {
    EmccConfig {
        paths: s.paths,
        realizations: s.realizations,
        seed: s.seed,
        ls_regularization: s.regularization,
        method: s.ls_method,
        variance_scale: s.variance_scale,
    }
}

/// Settings that determine a command's results; also hashed.
fn settings_json(command: &str, s: &Settings) -> Value {
    let patterns: Vec<String> = s.pattern.iter().map(ToString::to_string).collect();
    match command {
        "coupling" => json!({
            "aperture": s.aperture.to_string(),
            "pattern": patterns,
            "tol": s.tol,
        }),
        "emcc" => json!({
            "aperture": s.aperture.to_string(),
            "spacing": s.spacing[0],
            "pattern": patterns[0],
            "paths": s.paths,
            "realizations": s.realizations,
            "seed": s.seed,
            "ls_method": s.ls_method,
            "regularization": s.regularization,
            "variance_scale": s.variance_scale,
            "tol": s.tol,
        }),
        "edof" => json!({
            "aperture": s.aperture.to_string(),
            "rx_aperture": s.rx_aperture.to_string(),
            "spacing": s.spacing[0],
            "pattern": patterns[0],
            "rx_pattern": s.rx_pattern.to_string(),
            "gamma": s.gamma,
            "realizations": s.realizations,
            "det_method": s.det_method,
            "seed": s.seed,
            "tol": s.tol,
        }),
        "capacity" => json!({
            "aperture": s.aperture.to_string(),
            "rx_aperture": s.rx_aperture.to_string(),
            "spacing": s.spacing[0],
            "pattern": patterns[0],
            "rx_pattern": s.rx_pattern.to_string(),
            "gamma": s.gamma,
            "snr_db": s.snr_db,
            "trials": s.trials,
            "seed": s.seed,
            "tol": s.tol,
        }),
        _ => json!({
            "aperture": s.aperture.to_string(),
            "spacing": s.spacing,
            "pattern": patterns,
            "gamma": s.gamma,
            "snr_db": s.snr_db,
            "realizations": s.realizations,
            "det_method": s.det_method,
            "trials": s.trials,
            "seed": s.seed,
            "tol": s.tol,
        }),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            if code != 0 {
                report_error("validation", code, &e.kind().to_string());
            }
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let kind = e.kind();
            report_error(kind.as_str(), kind.exit_code(), &e.to_string());
            kind.exit_code()
        }
    }
}

fn report_error(kind: &str, code: i32, message: &str) {
    let doc = json!({"error": {"kind": kind, "exit_code": code, "message": message}});
    eprintln!("{doc}");
}

pub fn execute(command: &Command) -> Result<()> {
    let name = command.name();
    let mut flags = command.flags().clone();
    if let Some(path) = &flags.config {
        flags = flags.clone().or(load_config(path, name)?);
    }
    let s = resolve(name, flags)?;
    let provenance = Provenance::new(name, &settings_json(name, &s))?;

    let job = || match command {
        Command::Coupling(_) => cmd_coupling(&s, &provenance),
        Command::Emcc(_) => cmd_emcc(&s, &provenance),
        Command::Edof(_) => cmd_edof(&s, &provenance),
        Command::Capacity(_) => cmd_capacity(&s, &provenance),
        Command::Sweep(_) => cmd_sweep(&s, &provenance),
    };
    match s.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Numeric(e.to_string()))?
            .install(job),
        None => job(),
    }
}

fn emit(out: Option<&Path>, body: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// File-name-safe label for a pattern, e.g. `cos_1`, `hypothetical`, `patch`.
fn pattern_slug(p: &PatternSource) -> String {
    let raw = match p {
        PatternSource::File(path) => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".into()),
        other => other.to_string(),
    };
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn load_patterns(sources: &[PatternSource]) -> Result<Vec<RadiationPattern>> {
    sources.iter().map(PatternSource::load).collect()
}

fn cmd_coupling(s: &Settings, provenance: &Provenance) -> Result<()> {
    let patterns = load_patterns(&s.pattern)?;
    let grid = build_grid(s.aperture);
    let spectra = patterns
        .iter()
        .map(|p| coupling_spectrum(&grid, p, s.tol))
        .collect::<Result<Vec<_>>>()?;
    if spectra.len() == 1 {
        let mut buf = Vec::new();
        write_spectrum(&mut buf, s.format, &spectra[0], SpectrumExtras::default(), provenance)?;
        return emit(s.out.as_deref(), &buf);
    }
    let dir = s.out.as_deref().ok_or_else(|| {
        Error::validation("out", "several patterns need --out DIR for one file per pattern")
    })?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (source, spectrum) in s.pattern.iter().zip(&spectra) {
        let path = dir.join(format!("coupling_{}_{}.{}", s.aperture, pattern_slug(source), extension(s.format)));
        let mut buf = Vec::new();
        write_spectrum(&mut buf, s.format, spectrum, SpectrumExtras::default(), provenance)?;
        emit(Some(&path), &buf)?;
    }
    Ok(())
}

fn cmd_emcc(s: &Settings, provenance: &Provenance) -> Result<()> {
    let pattern = s.pattern[0].load()?;
    let geom = ArrayGeometry::new(s.aperture, s.spacing[0])?;
    let grid = build_grid(s.aperture);
    let estimate = estimate_coupling(&geom, &grid, &pattern, &emcc_config(s))?;
    let reference = coupling_spectrum(&grid, &pattern, s.tol)?;
    let worst = grid
        .interior()
        .filter(|&p| reference.values()[p] > 0.0)
        .map(|p| (estimate.spectrum.values()[p] / reference.values()[p] - 1.0).abs())
        .fold(0.0, f64::max);
    eprintln!(
        "emcc: {} coefficients, basis rank {}, max interior relative error {:.4}",
        grid.len(),
        estimate.rank,
        worst
    );
    let mut buf = Vec::new();
    let extras = SpectrumExtras {
        ci_half_width: Some(&estimate.ci_half_width),
        reference: Some(&reference),
    };
    write_spectrum(&mut buf, s.format, &estimate.spectrum, extras, provenance)?;
    emit(s.out.as_deref(), &buf)
}

struct Link {
    sig_t: CouplingSpectrum,
    sig_r: CouplingSpectrum,
    edof: EdofResult,
}

fn link(s: &Settings, tx: &RadiationPattern) -> Result<Link> {
    let rx = s.rx_pattern.load()?;
    let sig_t = coupling_spectrum(&build_grid(s.aperture), tx, s.tol)?;
    let sig_r = coupling_spectrum(&build_grid(s.rx_aperture), &rx, s.tol)?;
    let edof = edof_statistical(&sig_t, &sig_r, s.gamma)?;
    Ok(Link { sig_t, sig_r, edof })
}

fn deterministic(s: &Settings, link: &Link, spacing: f64) -> Result<Option<DeterministicEdof>> {
    if s.realizations == 0 {
        return Ok(None);
    }
    let geom_t = ArrayGeometry::new(s.aperture, spacing)?;
    let geom_r = ArrayGeometry::new(s.rx_aperture, spacing)?;
    let phi_t = transform_matrix(&geom_t, link.sig_t.grid())?;
    let phi_r = transform_matrix(&geom_r, link.sig_r.grid())?;
    let ens = draw_wavenumber_channel(&link.sig_t, &link.sig_r, s.seed, s.realizations);
    edof_deterministic_factored(&ens.realizations, &phi_t, &phi_r, s.gamma, s.det_method).map(Some)
}

fn base_row(s: &Settings, provenance: &Provenance, pattern: &PatternSource, spacing: Option<f64>, edof: &EdofResult) -> MetricsReport {
    MetricsReport {
        spacing,
        pattern: pattern.to_string(),
        elements_t: None,
        elements_r: None,
        gamma: s.gamma,
        eta_u: edof.eta_u,
        eta_e_tx: edof.eta_e_tx,
        eta_e_rx: edof.eta_e_rx,
        eta_e: edof.eta_e,
        eta_det_tx: None,
        eta_det_rx: None,
        eta_det: None,
        snr_db: None,
        capacity_bits: None,
        ci: None,
        truncated_capacity_bits: None,
        truncated_ci: None,
        trials: None,
        seed: s.seed,
        settings_hash: provenance.settings_hash.clone(),
    }
}

fn with_deterministic(mut row: MetricsReport, det: Option<DeterministicEdof>) -> MetricsReport {
    if let Some(d) = det {
        row.eta_det_tx = Some(d.eta_tx);
        row.eta_det_rx = Some(d.eta_rx);
        row.eta_det = Some(d.eta);
    }
    row
}

/// One row per SNR from a shared eigenvalue ensemble.
fn capacity_rows(
    s: &Settings,
    template: &MetricsReport,
    ens: &CapacityEnsemble,
    elements: (usize, usize),
    eta_e: usize,
) -> Result<Vec<MetricsReport>> {
    s.snr_db
        .iter()
        .map(|&db| {
            let snr = db_to_linear(db);
            let full = ens.full_capacity(elements.0, elements.1, snr)?;
            let trunc = ens.capacity(elements.0, elements.1, snr, eta_e.min(ens.available()))?;
            Ok(MetricsReport {
                elements_t: Some(elements.0),
                elements_r: Some(elements.1),
                snr_db: Some(db),
                capacity_bits: Some(full.mean_bits),
                ci: Some(full.ci_half_width),
                truncated_capacity_bits: Some(trunc.mean_bits),
                truncated_ci: Some(trunc.ci_half_width),
                trials: Some(full.trials),
                ..template.clone()
            })
        })
        .collect()
}

fn cmd_edof(s: &Settings, provenance: &Provenance) -> Result<()> {
    let tx = s.pattern[0].load()?;
    let l = link(s, &tx)?;
    let det = deterministic(s, &l, s.spacing[0])?;
    let row = with_deterministic(base_row(s, provenance, &s.pattern[0], Some(s.spacing[0]), &l.edof), det);
    let mut buf = Vec::new();
    write_metrics(&mut buf, s.format, &[row], provenance)?;
    emit(s.out.as_deref(), &buf)
}

fn cmd_capacity(s: &Settings, provenance: &Provenance) -> Result<()> {
    let tx = s.pattern[0].load()?;
    let l = link(s, &tx)?;
    let d = s.spacing[0];
    let elements = (
        ArrayGeometry::new(s.aperture, d)?.len(),
        ArrayGeometry::new(s.rx_aperture, d)?.len(),
    );
    let ens = CapacityEnsemble::draw(&l.sig_t, &l.sig_r, s.trials, s.seed)?;
    let template = base_row(s, provenance, &s.pattern[0], Some(d), &l.edof);
    let rows = capacity_rows(s, &template, &ens, elements, l.edof.eta_e)?;
    let mut buf = Vec::new();
    write_metrics(&mut buf, s.format, &rows, provenance)?;
    emit(s.out.as_deref(), &buf)
}

fn cmd_sweep(s: &Settings, provenance: &Provenance) -> Result<()> {
    let per_spacing: Vec<PatternSource> = if s.pattern.len() == 1 {
        vec![s.pattern[0].clone(); s.spacing.len()]
    } else {
        s.pattern.clone()
    };
    // Spectra, statistical EDoF and capacity eigenvalues depend only on the
    // pattern, so they are shared by every spacing that reuses it.
    let mut unique: Vec<PatternSource> = Vec::new();
    for p in &per_spacing {
        if !unique.contains(p) {
            unique.push(p.clone());
        }
    }
    let shared = unique
        .par_iter()
        .map(|source| -> Result<(Link, CapacityEnsemble)> {
            let pattern = source.load()?;
            let sig = coupling_spectrum(&build_grid(s.aperture), &pattern, s.tol)?;
            let edof = edof_statistical(&sig, &sig, s.gamma)?;
            let ens = CapacityEnsemble::draw(&sig, &sig, s.trials, s.seed)?;
            Ok((
                Link {
                    sig_t: sig.clone(),
                    sig_r: sig,
                    edof,
                },
                ens,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let points = s
        .spacing
        .par_iter()
        .zip(per_spacing.par_iter())
        .map(|(&d, source)| -> Result<Vec<MetricsReport>> {
            let k = unique.iter().position(|u| u == source).expect("collected above");
            let (l, ens) = &shared[k];
            let det = deterministic(s, l, d)?;
            let n = ArrayGeometry::new(s.aperture, d)?.len();
            let template = with_deterministic(base_row(s, provenance, source, Some(d), &l.edof), det);
            capacity_rows(s, &template, ens, (n, n), l.edof.eta_e)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<MetricsReport> = points.into_iter().flatten().collect();
    let mut buf = Vec::new();
    write_metrics(&mut buf, s.format, &rows, provenance)?;
    emit(s.out.as_deref(), &buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        Cli::try_parse_from(std::iter::once("wavenumber-dof").chain(args.iter().copied()))
            .unwrap()
            .command
    }

    #[test]
    fn flags_parse_lists_and_patterns() {
        let c = parse(&[
            "sweep",
            "--aperture",
            "10x10",
            "--spacing",
            "0.125,0.25,0.5",
            "--pattern",
            "hypothetical",
            "--snr-db",
            "-5,10",
        ]);
        let f = c.flags();
        assert_eq!(f.spacing.as_deref(), Some(&[0.125, 0.25, 0.5][..]));
        assert_eq!(f.snr_db.as_deref(), Some(&[-5.0, 10.0][..]));
        assert_eq!(f.pattern.as_ref().unwrap()[0], PatternSource::Hypothetical);
        assert!(Cli::try_parse_from(["x", "coupling", "--aperture", "0x10"]).is_err());
    }

    #[test]
    fn config_layers_merge() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "aperture = \"4x4\"\npattern = \"cos:1\"\nseed = 3\n\n[sweep]\nseed = 9\nspacing = [0.25, 0.5]\n",
        )
        .unwrap();
        let sweep = load_config(&path, "sweep").unwrap();
        assert_eq!(sweep.seed, Some(9));
        assert_eq!(sweep.spacing, Some(vec![0.25, 0.5]));
        assert_eq!(sweep.aperture, Some(Aperture::square(4.0).unwrap()));
        let edof = load_config(&path, "edof").unwrap();
        assert_eq!(edof.seed, Some(3));
        let cli = Flags {
            seed: Some(1),
            ..Flags::default()
        };
        assert_eq!(cli.or(sweep).seed, Some(1));

        fs::write(&path, "apertur = \"4x4\"\n").unwrap();
        assert!(matches!(load_config(&path, "edof"), Err(Error::Parse { .. })));
    }

    #[test]
    fn resolve_validates_before_running() {
        let base = Flags {
            aperture: Some(Aperture::square(4.0).unwrap()),
            pattern: Some(vec![PatternSource::Hypothetical]),
            ..Flags::default()
        };
        assert!(resolve("sweep", base.clone()).is_ok());
        for bad in [
            Flags { spacing: Some(vec![0.25, 0.6]), ..base.clone() },
            Flags { gamma: Some(1.0), ..base.clone() },
            Flags { trials: Some(0), ..base.clone() },
            Flags { workers: Some(0), ..base.clone() },
            Flags { pattern: Some(vec![PatternSource::Hypothetical; 2]), spacing: Some(vec![0.1, 0.2, 0.3]), ..base.clone() },
        ] {
            assert!(matches!(resolve("sweep", bad), Err(Error::Validation { .. })));
        }
        let one = Flags { realizations: Some(1), ..base.clone() };
        assert!(resolve("emcc", one.clone()).is_err());
        assert!(resolve("edof", one).is_ok());
        assert!(resolve("edof", Flags { aperture: None, ..base }).is_err());
    }

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(pattern_slug(&"cos:1.5".parse().unwrap()), "cos_1_5");
        assert_eq!(pattern_slug(&"file:/tmp/x/patch-2.csv".parse().unwrap()), "patch-2");
    }
}
