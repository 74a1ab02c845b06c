//! Wavenumber-domain sampling lattice for a rectangular aperture.
//!
//! All lengths are expressed in wavelengths. A lattice index `(m_x, m_y)`
//! corresponds to the normalized wavenumber `(m_x / len_x, m_y / len_y)`, and
//! its integration cell is the rectangle that has this point as its lower-left
//! corner, intersected with the closed unit disk.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aperture size of a planar array, in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aperture {
    len_x: f64,
    len_y: f64,
}

impl Aperture {
    pub fn new(len_x: f64, len_y: f64) -> Result<Self> {
        for (axis, len) in [("x", len_x), ("y", len_y)] {
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::validation(
                    "aperture",
                    format!("length along {axis} must be positive and finite, got {len}"),
                ));
            }
        }
        Ok(Self { len_x, len_y })
    }

    pub fn square(len: f64) -> Result<Self> {
        Self::new(len, len)
    }

    pub fn len_x(&self) -> f64 {
        self.len_x
    }

    pub fn len_y(&self) -> f64 {
        self.len_y
    }

    /// Aperture area in squared wavelengths.
    pub fn area(&self) -> f64 {
        self.len_x * self.len_y
    }

    /// `(m_x / len_x)^2 + (m_y / len_y)^2 <= 1`, evaluated as
    /// `(m_x len_y)^2 + (m_y len_x)^2 <= (len_x len_y)^2` so that integer
    /// apertures are tested exactly.
    fn contains_scaled(&self, mx: f64, my: f64) -> bool {
        let a = mx * self.len_y;
        let b = my * self.len_x;
        let r = self.len_x * self.len_y;
        a * a + b * b <= r * r
    }
}

impl fmt::Display for Aperture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.len_x, self.len_y)
    }
}

impl FromStr for Aperture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::validation("aperture", format!("expected AxB, got {s:?}")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation("aperture", format!("not a number: {t:?}")))
        };
        Aperture::new(parse(a)?, parse(b)?)
    }
}

/// Integration cell of one lattice index in normalized wavenumber coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    /// True when part of the rectangle lies outside the unit disk.
    pub clipped: bool,
}

impl Cell {
    /// Whether `(kx, ky)` lies in the rectangle and in the closed unit disk.
    pub fn contains(&self, kx: f64, ky: f64) -> bool {
        kx >= self.x0
            && kx <= self.x1
            && ky >= self.y0
            && ky <= self.y1
            && kx * kx + ky * ky <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberGrid {
    aperture: Aperture,
    indices: Vec<(i64, i64)>,
    cells: Vec<Cell>,
}

/// Enumerates all lattice points inside the unit disk, in lexicographic
/// `(m_x, m_y)` order, together with their integration cells.
pub fn build_grid(aperture: Aperture) -> WavenumberGrid {
    let (lx, ly) = (aperture.len_x, aperture.len_y);
    let mx_max = lx.floor() as i64;
    let my_max = ly.floor() as i64;

    let mut indices = Vec::new();
    let mut cells = Vec::new();
    for mx in -mx_max..=mx_max {
        for my in -my_max..=my_max {
            if !aperture.contains_scaled(mx as f64, my as f64) {
                continue;
            }
            let far_x = (mx.abs()).max((mx + 1).abs()) as f64;
            let far_y = (my.abs()).max((my + 1).abs()) as f64;
            indices.push((mx, my));
            cells.push(Cell {
                x0: mx as f64 / lx,
                x1: (mx + 1) as f64 / lx,
                y0: my as f64 / ly,
                y1: (my + 1) as f64 / ly,
                clipped: !aperture.contains_scaled(far_x, far_y),
            });
        }
    }
    WavenumberGrid {
        aperture,
        indices,
        cells,
    }
}

impl WavenumberGrid {
    pub fn new(aperture: Aperture) -> Self {
        build_grid(aperture)
    }

    pub fn aperture(&self) -> Aperture {
        self.aperture
    }

    pub fn indices(&self) -> &[(i64, i64)] {
        &self.indices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Number of lattice points (`n_T` or `n_R`).
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Position of `(m_x, m_y)` in canonical order.
    pub fn position(&self, mx: i64, my: i64) -> Option<usize> {
        self.indices.binary_search(&(mx, my)).ok()
    }

    /// Normalized wavenumber of the lattice point at `pos` (the cell anchor).
    pub fn anchor(&self, pos: usize) -> (f64, f64) {
        let (mx, my) = self.indices[pos];
        (
            mx as f64 / self.aperture.len_x,
            my as f64 / self.aperture.len_y,
        )
    }

    /// Iterator over the positions of cells lying entirely inside the disk.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.clipped)
            .map(|(i, _)| i)
    }
}

/// `min(floor(pi * area_tx), floor(pi * area_rx))` with areas in squared
/// wavelengths.
pub fn eta_upper_bound(tx: Aperture, rx: Aperture) -> usize {
    let bound = |a: Aperture| (PI * a.area()).floor() as usize;
    bound(tx).min(bound(rx))
}
