//! Coupling-coefficient estimation from simulated spatial channels.
//!
//! Each realization of a multipath channel is least-squares projected onto
//! the wavenumber Fourier basis; the per-index variance of the projected
//! coefficients is the coupling estimate.

use std::f64::consts::TAU;

use nalgebra::{Cholesky, ColPivQR, QR};
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::channel::{multipath_realization, ArrayGeometry, CMatrix, CVector};
use crate::coupling::{CouplingSpectrum, SpectrumMeta};
use crate::error::{Error, Result};
use crate::grid::WavenumberGrid;
use crate::pattern::RadiationPattern;

/// Realizations accumulated sequentially per parallel task. Fixed so that
/// the floating-point summation order never depends on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LsMethod {
    /// Minimum-norm solution through a complete orthogonal decomposition
    /// of `E` (column-pivoted QR).
    #[default]
    Orthogonal,
    /// `(E^H E + lambda I)^{-1} E^H h` through a Cholesky factorization.
    NormalEquations,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmccConfig {
    /// Plane waves per realization (`S`).
    pub paths: usize,
    /// Channel realizations (`I`).
    pub realizations: usize,
    pub seed: u64,
    pub ls_regularization: f64,
    pub method: LsMethod,
    /// Divisor applied to the fitted complex variance.
    pub variance_scale: f64,
}

impl Default for EmccConfig {
    fn default() -> Self {
        Self {
            paths: 200,
            realizations: 5000,
            seed: 0,
            ls_regularization: 0.0,
            method: LsMethod::Orthogonal,
            variance_scale: 1.0,
        }
    }
}

impl EmccConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 1 {
            return Err(Error::validation("paths", "S must be >= 1"));
        }
        if self.realizations < 2 {
            return Err(Error::validation(
                "realizations",
                format!("I must be >= 2 to estimate a variance, got {}", self.realizations),
            ));
        }
        if !(self.ls_regularization.is_finite() && self.ls_regularization >= 0.0) {
            return Err(Error::validation(
                "ls_regularization",
                format!("must be finite and >= 0, got {}", self.ls_regularization),
            ));
        }
        if !(self.variance_scale.is_finite() && self.variance_scale > 0.0) {
            return Err(Error::validation(
                "variance_scale",
                format!("must be finite and > 0, got {}", self.variance_scale),
            ));
        }
        Ok(())
    }
}

/// `E(i; m) = exp(j 2pi (x_i m_x / L_x + y_i m_y / L_y))`, shape `N x n`.
pub fn basis_matrix(geom: &ArrayGeometry, grid: &WavenumberGrid) -> Result<CMatrix> {
    if geom.aperture() != grid.aperture() {
        return Err(Error::validation(
            "geometry",
            format!(
                "array aperture {} does not match grid aperture {}",
                geom.aperture(),
                grid.aperture()
            ),
        ));
    }
    let (n, len) = (geom.len(), grid.len());
    if n <= len {
        return Err(underdetermined(n, len));
    }
    let (lx, ly) = (grid.aperture().len_x(), grid.aperture().len_y());
    let positions: Vec<(f64, f64)> = geom.positions().collect();
    let idx = grid.indices();
    Ok(CMatrix::from_fn(n, len, |i, k| {
        let (x, y) = positions[i];
        let (mx, my) = idx[k];
        Complex64::from_polar(1.0, TAU * (x * mx as f64 / lx + y * my as f64 / ly))
    }))
}

fn underdetermined(rows: usize, cols: usize) -> Error {
    Error::validation(
        "configuration",
        format!(
            "{rows} elements for {cols} wavenumber coefficients; least squares needs N > n \
             (use a smaller element spacing)"
        ),
    )
}

/// Minimum-norm least-squares solve matrix of `a` through a complete
/// orthogonal decomposition: `A P = Q R` with column pivoting, then
/// `R_1^H = Z T` for the leading `rank` rows of `R`. The solution of
/// `min ||A c - h||` with least `||c||` is `c = P Z T^{-H} Q_1^H h`.
fn min_norm_solver(a: &CMatrix) -> Result<(CMatrix, usize)> {
    let (rows, cols) = a.shape();
    let qr = ColPivQR::new(a.clone());
    let r = qr.r();
    let cutoff = rows.max(cols) as f64 * f64::EPSILON * r[(0, 0)].norm();
    let rank = (0..cols).take_while(|&i| r[(i, i)].norm() > cutoff).count();
    if rank == 0 {
        return Err(Error::Numeric("basis matrix is numerically zero".into()));
    }
    let q1 = qr.q().columns(0, rank).into_owned();
    let r1_h = r.rows(0, rank).adjoint();
    let inner = QR::new(r1_h);
    let z = inner.q();
    let t_h = inner.r().adjoint();
    let y = t_h
        .solve_lower_triangular(&q1.adjoint())
        .ok_or_else(|| Error::Numeric("triangular factor is singular".into()))?;
    let mut solve = z * y;
    qr.p().inv_permute_rows(&mut solve);
    Ok((solve, rank))
}

/// Result of one projection.
#[derive(Debug, Clone, PartialEq)]
pub struct LsSolution {
    pub coeffs: CVector,
    /// `||E c - h||_2`.
    pub residual: f64,
}

/// A least-squares solver for a fixed basis, factored once and reused.
#[derive(Debug, Clone)]
pub struct LsProjector {
    basis: CMatrix,
    /// `n x N` matrix mapping a channel vector to its coefficients.
    solve: CMatrix,
    rank: usize,
    method: LsMethod,
}

impl LsProjector {
    pub fn new(basis: CMatrix, method: LsMethod, regularization: f64) -> Result<Self> {
        let (rows, cols) = basis.shape();
        if rows <= cols {
            return Err(underdetermined(rows, cols));
        }
        if !(regularization.is_finite() && regularization >= 0.0) {
            return Err(Error::validation(
                "ls_regularization",
                format!("must be finite and >= 0, got {regularization}"),
            ));
        }
        let qr = ColPivQR::new(basis.clone());
        let r = qr.r();
        let r00 = r[(0, 0)].norm();
        let cutoff = rows.max(cols) as f64 * f64::EPSILON * r00;
        let rank = (0..cols).take_while(|&i| r[(i, i)].norm() > cutoff).count();

        let solve = match method {
            LsMethod::Orthogonal => {
                if regularization > 0.0 {
                    // Ridge solution as the plain LS solution of [E; sqrt(lambda) I].
                    let mut stacked = CMatrix::zeros(rows + cols, cols);
                    stacked.rows_mut(0, rows).copy_from(&basis);
                    stacked
                        .rows_mut(rows, cols)
                        .fill_diagonal(Complex64::new(regularization.sqrt(), 0.0));
                    min_norm_solver(&stacked)?.0.columns(0, rows).into_owned()
                } else {
                    min_norm_solver(&basis)?.0
                }
            }
            LsMethod::NormalEquations => {
                if rank < cols && regularization == 0.0 {
                    return Err(Error::Numeric(format!(
                        "basis has rank {rank} < {cols}; E^H E is singular. Use a smaller grid, \
                         more elements, ls_regularization > 0 or the orthogonal solver"
                    )));
                }
                let mut gram = basis.adjoint() * &basis;
                for i in 0..cols {
                    gram[(i, i)] += Complex64::new(regularization, 0.0);
                }
                let chol = Cholesky::new(gram).ok_or_else(|| {
                    Error::Numeric("Cholesky factorization of E^H E failed".into())
                })?;
                chol.solve(&basis.adjoint())
            }
        };
        Ok(Self {
            basis,
            solve,
            rank,
            method,
        })
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Numerical rank of the basis.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn method(&self) -> LsMethod {
        self.method
    }

    /// Coefficients only, without the residual.
    pub fn coefficients(&self, h: &CVector) -> Result<CVector> {
        if h.len() != self.basis.nrows() {
            return Err(Error::validation(
                "channel vector",
                format!("length {} does not match {} basis rows", h.len(), self.basis.nrows()),
            ));
        }
        Ok(&self.solve * h)
    }

    pub fn project(&self, h: &CVector) -> Result<LsSolution> {
        let coeffs = self.coefficients(h)?;
        let residual = (&self.basis * &coeffs - h).norm();
        Ok(LsSolution { coeffs, residual })
    }
}

/// One-shot projection with the default solver.
pub fn ls_project(basis: &CMatrix, h: &CVector) -> Result<LsSolution> {
    LsProjector::new(basis.clone(), LsMethod::Orthogonal, 0.0)?.project(h)
}

/// Estimated spectrum together with 95% confidence half-widths.
#[derive(Debug, Clone)]
pub struct EmccEstimate {
    pub spectrum: CouplingSpectrum,
    pub ci_half_width: Vec<f64>,
    pub rank: usize,
    pub config: EmccConfig,
}

/// Two-sided 95% interval for a complex variance estimated from `samples`
/// draws: `2 I v_hat / v ~ chi^2(2 I)`. Returns the factors by which `v_hat`
/// is multiplied to get the lower and upper bounds.
pub fn variance_ci_factors(samples: usize) -> Result<(f64, f64)> {
    let dof = 2.0 * samples as f64;
    let chi = ChiSquared::new(dof).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok((dof / chi.inverse_cdf(0.975), dof / chi.inverse_cdf(0.025)))
}

pub fn estimate_coupling(
    geom: &ArrayGeometry,
    grid: &WavenumberGrid,
    pattern: &RadiationPattern,
    cfg: &EmccConfig,
) -> Result<EmccEstimate> {
    cfg.validate()?;
    let basis = basis_matrix(geom, grid)?;
    let projector = LsProjector::new(basis, cfg.method, cfg.ls_regularization)?;
    let n = grid.len();

    let chunks: Vec<Vec<f64>> = (0..cfg.realizations.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; n];
            let end = ((c + 1) * CHUNK).min(cfg.realizations);
            for k in c * CHUNK..end {
                let h = multipath_realization(geom, pattern, cfg.paths, cfg.seed, k as u64)?;
                let coeffs = projector.coefficients(&h)?;
                for (a, z) in acc.iter_mut().zip(coeffs.iter()) {
                    *a += z.norm_sqr();
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut power = vec![0.0; n];
    for chunk in &chunks {
        for (p, a) in power.iter_mut().zip(chunk) {
            *p += a;
        }
    }
    let scale = 1.0 / (cfg.realizations as f64 * cfg.variance_scale);
    let values: Vec<f64> = power.iter().map(|p| p * scale).collect();
    let (lo, hi) = variance_ci_factors(cfg.realizations)?;
    let ci_half_width = values.iter().map(|v| 0.5 * (hi - lo) * v).collect();

    let method = match cfg.method {
        LsMethod::Orthogonal => "emcc-orthogonal",
        LsMethod::NormalEquations => "emcc-normal-equations",
    };
    let spectrum = CouplingSpectrum::new(
        grid.clone(),
        values,
        SpectrumMeta {
            pattern: pattern.to_string(),
            method: method.into(),
            tol: None,
        },
    )?;
    Ok(EmccEstimate {
        spectrum,
        ci_half_width,
        rank: projector.rank(),
        config: cfg.clone(),
    })
}

/// Relative deviation `|estimate / reference - 1|` per index; `None` where
/// the reference is zero.
pub fn relative_errors(estimate: &CouplingSpectrum, reference: &CouplingSpectrum) -> Result<Vec<Option<f64>>> {
    if estimate.grid() != reference.grid() {
        return Err(Error::validation("reference spectrum", "grids differ"));
    }
    Ok(estimate
        .values()
        .iter()
        .zip(reference.values())
        .map(|(e, r)| (*r > 0.0).then(|| (e / r - 1.0).abs()))
        .collect())
}
