//! Directivity-aware wavenumber-domain coupling coefficients.
//!
//! For an element pattern `G` under isotropic hemispherical scattering, the
//! coupling coefficient of lattice index `(m_x, m_y)` is
//!
//! ```text
//! sigma^2 = (1 / 2pi) ∬_cell G(kx, ky) (1 - kx^2 - ky^2)^(-1/2) dkx dky
//! ```
//!
//! which for `G = cos^m(theta)` reduces to the integrand
//! `(1 - kx^2 - ky^2)^((m - 1) / 2)`. Both routes integrate in polar
//! coordinates with `u = sqrt(1 - r^2) = cos(theta)`; there the measure is
//! `(1 / 2pi) G du dphi` and the rim singularity disappears. The radial range
//! of each ray through the cell is exact, so clipping by the unit circle is
//! resolved analytically rather than by sampling.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, WavenumberGrid};
use crate::pattern::RadiationPattern;
use crate::quadrature::{integrate_with_breaks, NotConverged};

/// Default absolute accuracy per cell.
pub const DEFAULT_TOL: f64 = 1e-9;

/// How a spectrum was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    /// Pattern descriptor, e.g. `cos:1`, `hypothetical`, `file:patch.csv`.
    pub pattern: String,
    /// `quadrature-closed-form`, `quadrature` or `emcc`.
    pub method: String,
    pub tol: Option<f64>,
}

/// Per-index coupling variances aligned with a wavenumber grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpectrum {
    grid: WavenumberGrid,
    values: Vec<f64>,
    meta: SpectrumMeta,
}

impl CouplingSpectrum {
    pub fn new(grid: WavenumberGrid, values: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(
                "coupling spectrum",
                format!("{} values for {} grid indices", values.len(), grid.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::validation(
                "coupling spectrum",
                format!("values must be finite and >= 0, found {v}"),
            ));
        }
        Ok(Self { grid, values, meta })
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> &SpectrumMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn get(&self, mx: i64, my: i64) -> Option<f64> {
        self.grid.position(mx, my).map(|p| self.values[p])
    }

    /// Positive square roots of the variances, the diagonal of `diag(sigma)`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.sqrt()).collect()
    }
}

/// Closed-form-inner route for `G = cos^m(theta)`.
pub fn coupling_cos_power(grid: &WavenumberGrid, m: f64, tol: f64) -> Result<CouplingSpectrum> {
    check_tol(tol)?;
    if !(m.is_finite() && m >= 0.0) {
        return Err(Error::validation("directivity coefficient", format!("m = {m}")));
    }
    let values = per_cell(grid, tol, |cell, tol| cell_cos_power(cell, m, tol))?;
    CouplingSpectrum::new(
        grid.clone(),
        values,
        SpectrumMeta {
            pattern: format!("cos:{m}"),
            method: "quadrature-closed-form".into(),
            tol: Some(tol),
        },
    )
}

/// Route for an arbitrary pattern: both the radial (`u`) and the azimuthal
/// integrals are adaptive, split at the pattern's tabulation nodes.
pub fn coupling_general(
    grid: &WavenumberGrid,
    pattern: &RadiationPattern,
    tol: f64,
) -> Result<CouplingSpectrum> {
    check_tol(tol)?;
    let values = per_cell(grid, tol, |cell, tol| cell_general(cell, pattern, tol))?;
    CouplingSpectrum::new(
        grid.clone(),
        values,
        SpectrumMeta {
            pattern: pattern.to_string(),
            method: "quadrature".into(),
            tol: Some(tol),
        },
    )
}

/// Dispatches to the closed-form route for `cos^m` patterns and to the
/// general route otherwise.
pub fn coupling_spectrum(
    grid: &WavenumberGrid,
    pattern: &RadiationPattern,
    tol: f64,
) -> Result<CouplingSpectrum> {
    match pattern {
        RadiationPattern::CosPower { m } => coupling_cos_power(grid, *m, tol),
        _ => coupling_general(grid, pattern, tol),
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::validation("tolerance", format!("must be > 0, got {tol}")));
    }
    Ok(())
}

type CellResult = std::result::Result<f64, CellFailure>;

enum CellFailure {
    Quadrature(NotConverged),
    Pattern(Error),
}

/// Evaluates cells in parallel. Each cell is computed independently and
/// collected in canonical order, so the output does not depend on the worker
/// count.
fn per_cell<F>(grid: &WavenumberGrid, tol: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Cell, f64) -> CellResult + Sync,
{
    grid.cells()
        .par_iter()
        .zip(grid.indices().par_iter())
        .map(|(cell, &(mx, my))| {
            f(cell, tol).map_err(|e| match e {
                CellFailure::Quadrature(nc) => Error::Quadrature {
                    mx,
                    my,
                    estimate: nc.error / TAU,
                    tol,
                },
                CellFailure::Pattern(e) => e,
            })
        })
        .collect()
}

/// Azimuthal extent of a cell and the angles where the radial limits change
/// formula (corners and edge/circle crossings).
fn azimuth_breaks(cell: &Cell) -> Vec<f64> {
    let corners = [
        (cell.x0, cell.y0),
        (cell.x1, cell.y0),
        (cell.x0, cell.y1),
        (cell.x1, cell.y1),
    ];
    let center = (0.5 * (cell.x0 + cell.x1), 0.5 * (cell.y0 + cell.y1));
    let ref_angle = center.1.atan2(center.0);
    let rel = |x: f64, y: f64| wrap_pi(y.atan2(x) - ref_angle);

    let mut angles: Vec<f64> = corners
        .iter()
        .filter(|(x, y)| *x != 0.0 || *y != 0.0)
        .map(|&(x, y)| rel(x, y))
        .collect();
    let lo = angles.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // Edge/circle intersections.
    for x in [cell.x0, cell.x1] {
        if x.abs() <= 1.0 {
            let h = (1.0 - x * x).sqrt();
            for y in [-h, h] {
                if y >= cell.y0 && y <= cell.y1 {
                    angles.push(rel(x, y));
                }
            }
        }
    }
    for y in [cell.y0, cell.y1] {
        if y.abs() <= 1.0 {
            let h = (1.0 - y * y).sqrt();
            for x in [-h, h] {
                if x >= cell.x0 && x <= cell.x1 {
                    angles.push(rel(x, y));
                }
            }
        }
    }
    let mut out: Vec<f64> = angles
        .into_iter()
        .filter(|a| *a >= lo && *a <= hi)
        .map(|a| a + ref_angle)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    out
}

fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Radial interval `[r_in, r_out]` of the ray at angle `phi` inside the cell,
/// with `r_out` clipped to the unit circle. `None` when the ray misses.
fn radial_span(cell: &Cell, phi: f64) -> Option<(f64, f64)> {
    let (dy, dx) = phi.sin_cos();
    let slab = |lo: f64, hi: f64, d: f64| -> (f64, f64) {
        if d.abs() < 1e-300 {
            if lo <= 0.0 && 0.0 <= hi {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (f64::INFINITY, f64::NEG_INFINITY)
            }
        } else {
            let (a, b) = (lo / d, hi / d);
            (a.min(b), a.max(b))
        }
    };
    let (tx0, tx1) = slab(cell.x0, cell.x1, dx);
    let (ty0, ty1) = slab(cell.y0, cell.y1, dy);
    let r_in = tx0.max(ty0).max(0.0);
    let r_out = tx1.min(ty1).min(1.0);
    (r_out > r_in).then_some((r_in, r_out))
}

/// `(1/2pi) ∫ dphi [u^(m+1) / (m+1)]_{u(r_out)}^{u(r_in)}`.
fn cell_cos_power(cell: &Cell, m: f64, tol: f64) -> CellResult {
    let breaks = azimuth_breaks(cell);
    if breaks.len() < 2 {
        return Ok(0.0);
    }
    let p = m + 1.0;
    let q = integrate_with_breaks(
        |phi| match radial_span(cell, phi) {
            Some((r_in, r_out)) => {
                let u_hi = (1.0 - r_in * r_in).max(0.0).sqrt();
                let u_lo = (1.0 - r_out * r_out).max(0.0).sqrt();
                (u_hi.powf(p) - u_lo.powf(p)) / p
            }
            None => 0.0,
        },
        &breaks,
        tol * TAU,
    )
    .map_err(CellFailure::Quadrature)?;
    Ok(q.value.max(0.0) / TAU)
}

fn cell_general(cell: &Cell, pattern: &RadiationPattern, tol: f64) -> CellResult {
    let mut breaks = azimuth_breaks(cell);
    if breaks.len() < 2 {
        return Ok(0.0);
    }
    // Azimuthal tabulation nodes, mapped into the cell's angular window.
    let (lo, hi) = (breaks[0], *breaks.last().unwrap());
    for &node in pattern.phi_breaks() {
        for shift in [-TAU, 0.0, TAU] {
            let a = node + shift;
            if a > lo && a < hi {
                breaks.push(a);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let u_nodes: Vec<f64> = pattern.theta_breaks().iter().map(|t| t.cos()).rev().collect();
    let inner_tol = tol * 1e-2;
    let mut failure: Option<CellFailure> = None;

    let q = integrate_with_breaks(
        |phi| {
            if failure.is_some() {
                return 0.0;
            }
            let Some((r_in, r_out)) = radial_span(cell, phi) else {
                return 0.0;
            };
            let u_hi = (1.0 - r_in * r_in).max(0.0).sqrt();
            let u_lo = (1.0 - r_out * r_out).max(0.0).sqrt();
            let mut ub = vec![u_lo];
            ub.extend(u_nodes.iter().copied().filter(|u| *u > u_lo && *u < u_hi));
            ub.push(u_hi);
            let inner = integrate_with_breaks(
                |u| match pattern.gain_cos_theta(u, phi) {
                    Ok(g) => g,
                    Err(e) => {
                        failure.get_or_insert(CellFailure::Pattern(e));
                        0.0
                    }
                },
                &ub,
                inner_tol,
            );
            match inner {
                Ok(q) => q.value,
                Err(nc) => {
                    failure.get_or_insert(CellFailure::Quadrature(nc));
                    0.0
                }
            }
        },
        &breaks,
        tol * TAU,
    );
    if let Some(f) = failure {
        return Err(f);
    }
    let q = q.map_err(CellFailure::Quadrature)?;
    Ok(q.value.max(0.0) / TAU)
}
