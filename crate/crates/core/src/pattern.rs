//! Element power radiation patterns over the upper hemisphere.
//!
//! Gains are linear power ratios. Angles follow the usual spherical
//! convention: `theta` is measured from broadside (the array normal), `phi`
//! is the azimuth from the x axis. A direction maps to the normalized
//! wavenumber `(sin(theta) cos(phi), sin(theta) sin(phi))`.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Slack allowed when a query sits numerically on the hemisphere edge.
const EDGE_EPS: f64 = 1e-9;

/// Relative slack used when checking that tabulated angles are equispaced.
const STEP_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum RadiationPattern {
    /// `G = cos^m(theta)` on the upper hemisphere.
    CosPower { m: f64 },
    /// `G = 1` on the upper hemisphere.
    Hypothetical,
    Tabulated(TabulatedPattern),
}

impl RadiationPattern {
    pub fn cos_power(m: f64) -> Result<Self> {
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::validation(
                "directivity coefficient",
                format!("m must be finite and >= 0, got {m}"),
            ));
        }
        Ok(RadiationPattern::CosPower { m })
    }

    /// Gain towards `(theta, phi)`, radians.
    ///
    /// Analytic patterns vanish below the horizon. Tabulated patterns are
    /// interpolated bilinearly with periodic `phi`; `theta` is clamped onto
    /// the hemisphere edge when it overshoots by rounding only.
    pub fn gain_angular(&self, theta: f64, phi: f64) -> Result<f64> {
        if theta.is_nan() || phi.is_nan() || theta < -EDGE_EPS {
            return Err(Error::Interpolation {
                theta_deg: theta.to_degrees(),
                phi_deg: phi.to_degrees(),
            });
        }
        match self {
            RadiationPattern::CosPower { m } => {
                if theta > FRAC_PI_2 + EDGE_EPS {
                    Ok(0.0)
                } else {
                    Ok(theta.clamp(0.0, FRAC_PI_2).cos().max(0.0).powf(*m))
                }
            }
            RadiationPattern::Hypothetical => Ok(if theta > FRAC_PI_2 + EDGE_EPS {
                0.0
            } else {
                1.0
            }),
            RadiationPattern::Tabulated(t) => t.interpolate(theta, phi),
        }
    }

    /// Gain at a normalized wavenumber inside the unit disk.
    pub fn gain_wavenumber(&self, kx: f64, ky: f64) -> Result<f64> {
        let r2 = kx * kx + ky * ky;
        if !(r2 <= 1.0 + EDGE_EPS) {
            return Err(Error::Domain { kx, ky });
        }
        match self {
            RadiationPattern::CosPower { m } => Ok((1.0 - r2).max(0.0).powf(m / 2.0)),
            _ => {
                let theta = r2.sqrt().min(1.0).asin();
                self.gain_angular(theta, ky.atan2(kx))
            }
        }
    }

    /// Gain as a function of `u = cos(theta)` and `phi`.
    ///
    /// This is the natural coordinate for coupling integrals, where the
    /// hemispherical density becomes uniform in `(u, phi)`.
    pub fn gain_cos_theta(&self, u: f64, phi: f64) -> Result<f64> {
        match self {
            RadiationPattern::CosPower { m } => Ok(u.clamp(0.0, 1.0).powf(*m)),
            RadiationPattern::Hypothetical => Ok(1.0),
            RadiationPattern::Tabulated(t) => t.interpolate(u.clamp(0.0, 1.0).acos(), phi),
        }
    }

    /// Whether the gain depends on `phi`.
    pub fn is_azimuth_symmetric(&self) -> bool {
        !matches!(self, RadiationPattern::Tabulated(_))
    }

    /// Tabulation nodes in `theta` (radians); the gain is only piecewise
    /// smooth across them.
    pub fn theta_breaks(&self) -> &[f64] {
        match self {
            RadiationPattern::Tabulated(t) => &t.theta,
            _ => &[],
        }
    }

    /// Tabulation nodes in `phi` (radians, in `[0, 2pi)`).
    pub fn phi_breaks(&self) -> &[f64] {
        match self {
            RadiationPattern::Tabulated(t) => &t.phi,
            _ => &[],
        }
    }
}

impl fmt::Display for RadiationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiationPattern::CosPower { m } => write!(f, "cos:{m}"),
            RadiationPattern::Hypothetical => write!(f, "hypothetical"),
            RadiationPattern::Tabulated(t) => match &t.source {
                Some(p) => write!(f, "file:{}", p.display()),
                None => write!(f, "tabulated"),
            },
        }
    }
}

/// Textual pattern selector: `cos:M`, `hypothetical` or `file:PATH`.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternSource {
    CosPower(f64),
    Hypothetical,
    File(PathBuf),
}

impl PatternSource {
    pub fn load(&self) -> Result<RadiationPattern> {
        match self {
            PatternSource::CosPower(m) => RadiationPattern::cos_power(*m),
            PatternSource::Hypothetical => Ok(RadiationPattern::Hypothetical),
            PatternSource::File(path) => load_pattern(path),
        }
    }
}

impl std::str::FromStr for PatternSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "hypothetical" {
            return Ok(PatternSource::Hypothetical);
        }
        if let Some(m) = s.strip_prefix("cos:") {
            let m: f64 = m
                .trim()
                .parse()
                .map_err(|_| Error::validation("pattern", format!("bad exponent in {s:?}")))?;
            RadiationPattern::cos_power(m)?;
            return Ok(PatternSource::CosPower(m));
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(Error::validation("pattern", "empty file path"));
            }
            return Ok(PatternSource::File(PathBuf::from(path)));
        }
        Err(Error::validation(
            "pattern",
            format!("expected cos:M, hypothetical or file:PATH, got {s:?}"),
        ))
    }
}

impl fmt::Display for PatternSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternSource::CosPower(m) => write!(f, "cos:{m}"),
            PatternSource::Hypothetical => write!(f, "hypothetical"),
            PatternSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Isotropic multipath density over the upper hemisphere,
/// `p(theta, phi) = sin(theta) / (2 pi)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AngleDensity;

impl AngleDensity {
    pub fn density(&self, theta: f64, _phi: f64) -> f64 {
        if (0.0..=FRAC_PI_2).contains(&theta) {
            theta.sin() / TAU
        } else {
            0.0
        }
    }

    /// Inverse CDF of the polar marginal: `theta = arccos(1 - u)`.
    pub fn theta_from_uniform(&self, u: f64) -> f64 {
        (1.0 - u).clamp(0.0, 1.0).acos()
    }

    pub fn phi_from_uniform(&self, u: f64) -> f64 {
        TAU * u
    }
}

/// Gain samples on a regular `(theta, phi)` grid covering the hemisphere.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPattern {
    /// Ascending polar nodes from 0 to pi/2, radians.
    theta: Vec<f64>,
    /// Ascending azimuth nodes from 0, excluding 2 pi, radians.
    phi: Vec<f64>,
    /// Row-major `[theta][phi]` linear gains.
    gain: Vec<f64>,
    source: Option<PathBuf>,
}

impl TabulatedPattern {
    /// Samples `f(theta, phi)` (radians) on a grid with the given steps in
    /// degrees. Steps must divide 90 and 360 respectively.
    pub fn from_fn(
        theta_step_deg: f64,
        phi_step_deg: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let n_theta = steps_in(90.0, theta_step_deg)?;
        let n_phi = steps_in(360.0, phi_step_deg)?;
        let theta: Vec<f64> = (0..=n_theta)
            .map(|i| (i as f64 * theta_step_deg).to_radians())
            .collect();
        let phi: Vec<f64> = (0..n_phi)
            .map(|j| (j as f64 * phi_step_deg).to_radians())
            .collect();
        let mut gain = Vec::with_capacity(theta.len() * phi.len());
        for &t in &theta {
            for &p in &phi {
                gain.push(f(t, p));
            }
        }
        let tab = Self {
            theta,
            phi,
            gain,
            source: None,
        };
        tab.check_gains()?;
        Ok(tab)
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi_nodes(&self) -> &[f64] {
        &self.phi
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.gain[i * self.phi.len() + j]
    }

    fn check_gains(&self) -> Result<()> {
        if let Some(g) = self.gain.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::validation(
                "pattern",
                format!("gains must be finite and >= 0, found {g}"),
            ));
        }
        Ok(())
    }

    fn interpolate(&self, theta: f64, phi: f64) -> Result<f64> {
        let t_max = *self.theta.last().expect("non-empty theta grid");
        if theta > t_max + EDGE_EPS || theta < -EDGE_EPS {
            return Err(Error::Interpolation {
                theta_deg: theta.to_degrees(),
                phi_deg: phi.to_degrees(),
            });
        }
        let theta = theta.clamp(0.0, t_max);
        let d_theta = self.theta[1] - self.theta[0];
        let (i, s) = split_index(theta / d_theta, self.theta.len() - 1);

        let n_phi = self.phi.len();
        let d_phi = TAU / n_phi as f64;
        let (j, t) = split_index(phi.rem_euclid(TAU) / d_phi, n_phi);
        let j1 = (j + 1) % n_phi;

        let lo = self.at(i, j) * (1.0 - t) + self.at(i, j1) * t;
        let hi = self.at(i + 1, j) * (1.0 - t) + self.at(i + 1, j1) * t;
        Ok(lo * (1.0 - s) + hi * s)
    }

    /// Writes the pattern in the linear-gain CSV layout, including the
    /// redundant `phi = 360` column.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "theta_deg,phi_deg,gain")?;
            for (i, t) in self.theta.iter().enumerate() {
                for j in 0..=self.phi.len() {
                    let phi_deg = if j == self.phi.len() {
                        360.0
                    } else {
                        self.phi[j].to_degrees()
                    };
                    let g = self.at(i, j % self.phi.len());
                    writeln!(out, "{},{},{:e}", round_deg(t.to_degrees()), round_deg(phi_deg), g)?;
                }
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Cell index in `0..cells` and fractional offset of a continuous grid
/// coordinate. Coordinates within rounding distance of a node snap onto it,
/// so queries at the nodes reproduce the samples exactly.
fn split_index(f: f64, cells: usize) -> (usize, f64) {
    let nearest = f.round();
    if (f - nearest).abs() < 1e-9 {
        let k = (nearest.max(0.0) as usize).min(cells);
        return if k == cells { (cells - 1, 1.0) } else { (k, 0.0) };
    }
    let i = (f.floor().max(0.0) as usize).min(cells - 1);
    (i, (f - i as f64).clamp(0.0, 1.0))
}

fn round_deg(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn steps_in(span: f64, step: f64) -> Result<usize> {
    let n = span / step;
    if !(step > 0.0 && n.is_finite() && (n - n.round()).abs() < STEP_EPS && n.round() >= 1.0) {
        return Err(Error::validation(
            "pattern grid",
            format!("step {step} deg does not divide {span} deg"),
        ));
    }
    Ok(n.round() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GainScale {
    Linear,
    Decibel,
}

/// Loads a tabulated pattern from a CSV export.
///
/// Header must be `theta_deg,phi_deg,gain` (linear power gain) or
/// `theta_deg,phi_deg,gain_db`. Rows must form a complete regular grid with
/// `theta` spanning 0..=90 and `phi` spanning 0..360; a `phi = 360` row is
/// accepted as an alias of `phi = 0`. Rows with `theta > 90` are ignored.
/// Lines starting with `#` are comments.
pub fn load_pattern(path: impl AsRef<Path>) -> Result<RadiationPattern> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    let scale = match cols.as_slice() {
        ["theta_deg", "phi_deg", "gain"] => GainScale::Linear,
        ["theta_deg", "phi_deg", "gain_db"] => GainScale::Decibel,
        _ => {
            return Err(parse_err(
                1,
                format!("expected header theta_deg,phi_deg,gain or theta_deg,phi_deg,gain_db, got {}", cols.join(",")),
            ))
        }
    };

    // (theta_deg, phi_deg, gain, line)
    let mut rows: Vec<(f64, f64, f64, usize)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, got {}", record.len())));
        }
        let field = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("not a number: {:?}", &record[k])))
        };
        let (theta, phi, raw) = (field(0)?, field(1)?, field(2)?);
        if !theta.is_finite() || !phi.is_finite() || !raw.is_finite() {
            return Err(parse_err(line, "non-finite value".into()));
        }
        let gain = match scale {
            GainScale::Linear => raw,
            GainScale::Decibel => 10f64.powf(raw / 10.0),
        };
        if gain < 0.0 {
            return Err(parse_err(line, format!("negative gain {raw}")));
        }
        if theta < 0.0 || !(0.0..=360.0).contains(&phi) {
            return Err(parse_err(line, format!("angle out of range: theta={theta}, phi={phi}")));
        }
        if theta > 90.0 + STEP_EPS {
            continue;
        }
        rows.push((theta, phi, gain, line));
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }

    let theta_deg = regular_axis(rows.iter().map(|r| r.0), "theta").map_err(|r| parse_err(0, r))?;
    let phi_all = regular_axis(rows.iter().map(|r| r.1), "phi").map_err(|r| parse_err(0, r))?;

    let t_last = *theta_deg.last().unwrap();
    if theta_deg[0].abs() > STEP_EPS || (t_last - 90.0).abs() > STEP_EPS || theta_deg.len() < 2 {
        return Err(parse_err(
            0,
            format!("theta must cover 0..=90 deg, got {}..={}", theta_deg[0], t_last),
        ));
    }
    // Drop the 360 alias, then require the remaining azimuths to close the circle.
    let mut phi_deg = phi_all.clone();
    if phi_deg.len() > 1 && (phi_deg.last().unwrap() - 360.0).abs() < STEP_EPS {
        phi_deg.pop();
    }
    let d_phi = if phi_deg.len() > 1 {
        phi_deg[1] - phi_deg[0]
    } else {
        f64::NAN
    };
    let closes = phi_deg[0].abs() < STEP_EPS
        && phi_deg.len() > 1
        && ((phi_deg.last().unwrap() + d_phi) - 360.0).abs() < STEP_EPS * 360.0;
    if !closes {
        return Err(parse_err(
            0,
            format!(
                "phi must cover 0..360 deg with a regular step, got {}..={}",
                phi_all[0],
                phi_all.last().unwrap()
            ),
        ));
    }

    let n_phi = phi_deg.len();
    let d_theta = theta_deg[1] - theta_deg[0];
    let mut gain = vec![f64::NAN; theta_deg.len() * n_phi];
    for &(t, p, g, line) in &rows {
        let i = (t / d_theta).round() as usize;
        let j = ((p / d_phi).round() as usize) % n_phi;
        let is_alias = (p - 360.0).abs() < STEP_EPS;
        let slot = &mut gain[i * n_phi + j];
        if is_alias {
            continue;
        }
        if !slot.is_nan() {
            return Err(parse_err(line, format!("duplicate sample theta={t}, phi={p}")));
        }
        *slot = g;
    }
    if let Some(k) = gain.iter().position(|g| g.is_nan()) {
        return Err(parse_err(
            0,
            format!(
                "missing sample theta={}, phi={}",
                theta_deg[k / n_phi],
                phi_deg[k % n_phi]
            ),
        ));
    }

    let mut tab = TabulatedPattern {
        theta: theta_deg.iter().map(|d| d.to_radians()).collect(),
        phi: phi_deg.iter().map(|d| d.to_radians()).collect(),
        gain,
        source: Some(path.to_path_buf()),
    };
    // Keep the pi/2 endpoint exact so hemisphere-edge queries never miss.
    *tab.theta.last_mut().unwrap() = FRAC_PI_2;
    Ok(RadiationPattern::Tabulated(tab))
}

/// Sorted distinct values of one axis, checked for a constant step.
fn regular_axis(values: impl Iterator<Item = f64>, name: &str) -> std::result::Result<Vec<f64>, String> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < STEP_EPS);
    if v.len() >= 2 {
        let step = v[1] - v[0];
        for w in v.windows(2) {
            if ((w[1] - w[0]) - step).abs() > STEP_EPS * step.max(1.0) {
                return Err(format!(
                    "irregular {name} grid: step {} between {} and {} differs from {step}",
                    w[1] - w[0],
                    w[0],
                    w[1]
                ));
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pattern_sources_round_trip() {
        for s in ["cos:1", "cos:2.5", "hypothetical", "file:data/patch.csv"] {
            assert_eq!(s.parse::<PatternSource>().unwrap().to_string(), s);
        }
        for bad in ["cos:", "cos:-1", "file:", "sinc", ""] {
            assert!(bad.parse::<PatternSource>().is_err(), "{bad}");
        }
        assert_eq!(
            "cos:3".parse::<PatternSource>().unwrap().load().unwrap(),
            RadiationPattern::CosPower { m: 3.0 }
        );
        let missing = "file:/nonexistent/p.csv".parse::<PatternSource>().unwrap().load();
        assert!(matches!(missing, Err(Error::Io { .. })));
    }

    fn hemisphere_mass() -> f64 {
        crate::quadrature::integrate(
            |phi| {
                crate::quadrature::integrate(|t| AngleDensity.density(t, phi), 0.0, FRAC_PI_2, 1e-12)
                    .map(|q| q.value)
                    .unwrap_or(f64::NAN)
            },
            0.0,
            TAU,
            1e-11,
        )
        .unwrap()
        .value
    }

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn analytic_gains() {
        let p2 = RadiationPattern::cos_power(2.0).unwrap();
        let p1 = RadiationPattern::cos_power(1.0).unwrap();
        assert_eq!(p2.gain_angular(0.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(p1.gain_angular(std::f64::consts::PI / 3.0, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        for (t, p) in [(0.0, 0.0), (0.7, 2.0), (FRAC_PI_2, 5.0)] {
            assert_eq!(RadiationPattern::Hypothetical.gain_angular(t, p).unwrap(), 1.0);
        }
        assert_eq!(p1.gain_angular(2.0, 0.0).unwrap(), 0.0);
        assert!(RadiationPattern::cos_power(-1.0).is_err());
    }

    #[test]
    fn wavenumber_gains() {
        for m in [0.0, 0.5, 1.0, 3.0] {
            let p = RadiationPattern::cos_power(m).unwrap();
            assert_eq!(p.gain_wavenumber(0.0, 0.0).unwrap(), 1.0);
        }
        let p2 = RadiationPattern::cos_power(2.0).unwrap();
        assert_abs_diff_eq!(p2.gain_wavenumber(0.6, 0.0).unwrap(), 0.64, epsilon = 1e-15);
        assert_eq!(RadiationPattern::Hypothetical.gain_wavenumber(0.3, 0.4).unwrap(), 1.0);
        assert!(matches!(
            p2.gain_wavenumber(0.9, 0.9),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn wavenumber_and_angular_forms_agree() {
        for m in [0.0, 0.7, 1.0, 2.5, 4.0] {
            let p = RadiationPattern::cos_power(m).unwrap();
            for k in 0..50 {
                let kx = -0.95 + 0.037 * k as f64;
                let ky = 0.3 * (k as f64 * 0.7).sin();
                let r = (kx * kx + ky * ky).sqrt();
                if r > 1.0 {
                    continue;
                }
                let a = p.gain_wavenumber(kx, ky).unwrap();
                let b = p.gain_angular(r.asin(), ky.atan2(kx)).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn angle_density_integrates_to_one() {
        assert_abs_diff_eq!(hemisphere_mass(), 1.0, epsilon = 1e-9);
        assert_eq!(AngleDensity.theta_from_uniform(0.0), 0.0);
        assert_abs_diff_eq!(AngleDensity.theta_from_uniform(1.0), FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn tabulated_round_trip_matches_cosine() {
        let dir = tempfile::tempdir().unwrap();
        let tab = TabulatedPattern::from_fn(1.0, 1.0, |t, _| t.cos()).unwrap();
        let path = dir.path().join("cos1.csv");
        tab.write_csv(&path).unwrap();
        let loaded = load_pattern(&path).unwrap();
        let RadiationPattern::Tabulated(t) = &loaded else {
            panic!("expected tabulated pattern")
        };
        assert_eq!(t.theta_nodes().len(), 91);
        assert_eq!(t.phi_nodes().len(), 360);
        for k in 0..400 {
            let theta = (k as f64 * 0.2237).rem_euclid(FRAC_PI_2);
            let phi = k as f64 * 0.61;
            let g = loaded.gain_angular(theta, phi).unwrap();
            assert!((g - theta.cos()).abs() < 1e-3, "theta={theta}: {g}");
        }
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_wraps() {
        let tab = TabulatedPattern::from_fn(15.0, 30.0, |t, p| 1.0 + t * 0.3 + (p * 2.0).sin().abs()).unwrap();
        let pat = RadiationPattern::Tabulated(tab.clone());
        for (i, &t) in tab.theta_nodes().iter().enumerate() {
            for (j, &p) in tab.phi_nodes().iter().enumerate() {
                assert_eq!(pat.gain_angular(t, p).unwrap(), tab.at(i, j));
                // phi = 2 pi wraps onto phi = 0
                if j == 0 {
                    assert_abs_diff_eq!(pat.gain_angular(t, TAU).unwrap(), tab.at(i, 0), epsilon = 1e-12);
                }
            }
        }
        // Halfway between the last azimuth node and 2 pi interpolates against phi = 0.
        let last = *tab.phi_nodes().last().unwrap();
        let mid = pat.gain_angular(0.0, 0.5 * (last + TAU)).unwrap();
        assert_abs_diff_eq!(mid, 0.5 * (tab.at(0, 11) + tab.at(0, 0)), epsilon = 1e-12);
        assert!(pat.gain_angular(FRAC_PI_2 + 1e-3, 0.0).is_err());
        assert!(pat.gain_angular(FRAC_PI_2 + 1e-12, 0.0).is_ok());
    }

    #[test]
    fn db_header_is_converted() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("theta_deg,phi_deg,gain_db\r\n");
        for t in [0, 45, 90] {
            for p in [0, 90, 180, 270, 360] {
                body += &format!("{t},{p},3.0\r\n");
            }
        }
        let p = write_file(&dir, "db.csv", &body);
        let pat = load_pattern(&p).unwrap();
        assert_abs_diff_eq!(pat.gain_angular(0.3, 1.0).unwrap(), 10f64.powf(0.3), epsilon = 1e-12);
    }

    #[test]
    fn negative_gain_is_rejected_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let body = "theta_deg,phi_deg,gain\n0,0,1\n0,180,1\n90,0,-0.5\n90,180,1\n";
        let p = write_file(&dir, "neg.csv", body);
        match load_pattern(&p) {
            Err(Error::Parse { line, reason, .. }) => {
                assert_eq!(line, 4);
                assert!(reason.contains("negative"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn partial_hemisphere_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("theta_deg,phi_deg,gain\n");
        for t in (0..=60).step_by(10) {
            for p in (0..360).step_by(90) {
                body += &format!("{t},{p},1\n");
            }
        }
        let p = write_file(&dir, "short.csv", &body);
        let err = load_pattern(&p).unwrap_err();
        assert!(err.to_string().contains("0..=90"), "{err}");
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("hdr.csv", "theta,phi,gain\n0,0,1\n"),
            ("nan.csv", "theta_deg,phi_deg,gain\n0,0,abc\n"),
            ("irregular.csv", "theta_deg,phi_deg,gain\n0,0,1\n0,180,1\n30,0,1\n30,180,1\n90,0,1\n90,180,1\n"),
            ("missing.csv", "theta_deg,phi_deg,gain\n0,0,1\n0,180,1\n90,0,1\n"),
            ("dup.csv", "theta_deg,phi_deg,gain\n0,0,1\n0,180,1\n90,0,1\n90,180,1\n90,180,2\n"),
        ];
        for (name, body) in cases {
            let p = write_file(&dir, name, body);
            let err = load_pattern(&p).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{name}: {err}");
        }
        let err = load_pattern(dir.path().join("absent.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
