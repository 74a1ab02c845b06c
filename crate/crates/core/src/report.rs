//! CSV and JSON writers for spectra and metrics.
//!
//! Every file embeds the resolved settings and their SHA-256, so identical
//! settings give byte-identical files. CSV files carry them as leading `#`
//! comment lines; JSON files as top-level fields.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::coupling::CouplingSpectrum;
use crate::error::{Error, Result};
use crate::grid::eta_upper_bound;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// What produced a file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub settings: Value,
    pub settings_hash: String,
}

impl Provenance {
    pub fn new(command: &str, settings: &impl Serialize) -> Result<Self> {
        let settings = serde_json::to_value(settings).map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            settings_hash: settings_hash(&settings),
            settings,
        })
    }

    fn write_comments(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "# {} {}", self.tool, self.version)?;
        writeln!(out, "# command: {}", self.command)?;
        writeln!(out, "# settings: {}", self.settings)?;
        writeln!(out, "# settings_hash: {}", self.settings_hash)
    }
}

/// SHA-256 of the compact JSON encoding, hex.
pub fn settings_hash(settings: &Value) -> String {
    let digest = Sha256::digest(settings.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Optional per-index columns written next to a spectrum.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpectrumExtras<'a> {
    pub ci_half_width: Option<&'a [f64]>,
    /// Quadrature reference; adds `sigma_sq_ref` and `rel_error` columns.
    pub reference: Option<&'a CouplingSpectrum>,
}

#[derive(Serialize)]
struct SpectrumRow {
    m_x: i64,
    m_y: i64,
    sigma_sq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_sq_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_error: Option<f64>,
    clipped: bool,
}

fn spectrum_rows(s: &CouplingSpectrum, extras: SpectrumExtras<'_>) -> Result<Vec<SpectrumRow>> {
    if let Some(ci) = extras.ci_half_width {
        if ci.len() != s.len() {
            return Err(Error::validation("ci_half_width", "length differs from spectrum"));
        }
    }
    if let Some(r) = extras.reference {
        if r.grid() != s.grid() {
            return Err(Error::validation("reference spectrum", "grids differ"));
        }
    }
    let grid = s.grid();
    Ok((0..s.len())
        .map(|p| {
            let (m_x, m_y) = grid.indices()[p];
            let v = s.values()[p];
            let reference = extras.reference.map(|r| r.values()[p]);
            SpectrumRow {
                m_x,
                m_y,
                sigma_sq: v,
                ci_half_width: extras.ci_half_width.map(|c| c[p]),
                sigma_sq_ref: reference,
                rel_error: reference.map(|r| if r > 0.0 { (v / r - 1.0).abs() } else { f64::NAN }),
                clipped: grid.cells()[p].clipped,
            }
        })
        .collect())
}

pub fn write_spectrum(
    out: &mut impl Write,
    format: Format,
    spectrum: &CouplingSpectrum,
    extras: SpectrumExtras<'_>,
    provenance: &Provenance,
) -> Result<()> {
    let rows = spectrum_rows(spectrum, extras)?;
    match format {
        Format::Csv => {
            provenance.write_comments(out).map_err(io_err)?;
            write_csv_rows(out, &rows)
        }
        Format::Json => {
            let a = spectrum.grid().aperture();
            let doc = json!({
                "tool": provenance.tool,
                "version": provenance.version,
                "command": provenance.command,
                "settings": provenance.settings,
                "settings_hash": provenance.settings_hash,
                "grid": {
                    "len_x": a.len_x(),
                    "len_y": a.len_y(),
                    "count": spectrum.len(),
                    "cell_order": "lexicographic (m_x, m_y)",
                    "cell": "[m_x/len_x, (m_x+1)/len_x] x [m_y/len_y, (m_y+1)/len_y] clipped to the unit disk",
                    "eta_u_self": eta_upper_bound(a, a),
                },
                "pattern": spectrum.meta().pattern,
                "method": spectrum.meta().method,
                "tol": spectrum.meta().tol,
                "total": spectrum.total(),
                "entries": rows,
            });
            write_json(out, &doc)
        }
    }
}

/// One row of EDoF and capacity results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub spacing: Option<f64>,
    pub pattern: String,
    pub elements_t: Option<usize>,
    pub elements_r: Option<usize>,
    pub gamma: f64,
    pub eta_u: usize,
    pub eta_e_tx: usize,
    pub eta_e_rx: usize,
    pub eta_e: usize,
    pub eta_det_tx: Option<usize>,
    pub eta_det_rx: Option<usize>,
    pub eta_det: Option<usize>,
    pub snr_db: Option<f64>,
    pub capacity_bits: Option<f64>,
    pub ci: Option<f64>,
    pub truncated_capacity_bits: Option<f64>,
    pub truncated_ci: Option<f64>,
    pub trials: Option<usize>,
    pub seed: u64,
    pub settings_hash: String,
}

pub fn write_metrics(
    out: &mut impl Write,
    format: Format,
    rows: &[MetricsReport],
    provenance: &Provenance,
) -> Result<()> {
    match format {
        Format::Csv => {
            provenance.write_comments(out).map_err(io_err)?;
            write_csv_rows(out, rows)
        }
        Format::Json => {
            let doc = json!({
                "tool": provenance.tool,
                "version": provenance.version,
                "command": provenance.command,
                "settings": provenance.settings,
                "settings_hash": provenance.settings_hash,
                "results": rows,
            });
            write_json(out, &doc)
        }
    }
}

fn write_csv_rows<T: Serialize>(out: &mut impl Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

fn write_json(out: &mut impl Write, doc: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, doc).map_err(|e| Error::Numeric(e.to_string()))?;
    writeln!(out).map_err(io_err)
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => io_err(e),
        other => Error::Numeric(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::coupling_cos_power;
    use crate::grid::{build_grid, Aperture};

    fn provenance() -> Provenance {
        Provenance::new("coupling", &json!({"aperture": "2x2", "pattern": "cos:1"})).unwrap()
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = settings_hash(&json!({"a": 1, "b": [0.5, 0.25]}));
        assert_eq!(a, settings_hash(&json!({"a": 1, "b": [0.5, 0.25]})));
        assert_ne!(a, settings_hash(&json!({"a": 1, "b": [0.5, 0.125]})));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn spectrum_csv_layout() {
        let grid = build_grid(Aperture::square(2.0).unwrap());
        let s = coupling_cos_power(&grid, 1.0, 1e-10).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, Format::Csv, &s, SpectrumExtras::default(), &provenance()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), concat!("# wavenumber-dof ", env!("CARGO_PKG_VERSION")));
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], "m_x,m_y,sigma_sq,clipped");
        assert_eq!(body.len(), 1 + grid.len());
        assert!(!text.contains("ci_half_width"));
    }

    #[test]
    fn spectrum_json_carries_grid_metadata() {
        let grid = build_grid(Aperture::square(2.0).unwrap());
        let s = coupling_cos_power(&grid, 1.0, 1e-10).unwrap();
        let ci = vec![0.01; s.len()];
        let mut buf = Vec::new();
        let extras = SpectrumExtras {
            ci_half_width: Some(&ci),
            reference: Some(&s),
        };
        write_spectrum(&mut buf, Format::Json, &s, extras, &provenance()).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["grid"]["count"], 13);
        assert_eq!(v["entries"].as_array().unwrap().len(), 13);
        assert_eq!(v["entries"][0]["rel_error"], 0.0);
        assert_eq!(v["entries"][0]["ci_half_width"], 0.01);
        assert_eq!(v["settings_hash"], provenance().settings_hash);
    }
}
