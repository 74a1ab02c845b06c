//! Random channel synthesis: array geometry, wavenumber transform matrices,
//! separable wavenumber-domain realizations and multipath spatial channels.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::coupling::CouplingSpectrum;
use crate::error::{Error, Result};
use crate::grid::{Aperture, WavenumberGrid};
use crate::pattern::{AngleDensity, RadiationPattern};
use crate::rng::{complex_gaussian, stream_rng, Domain};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Uniform rectangular element lattice centered on the aperture center.
///
/// Elements are ordered with `x` as the slow index: element `ix * n_y + iy`
/// sits at `(x_ix, y_iy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    aperture: Aperture,
    spacing: f64,
    n_x: usize,
    n_y: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl ArrayGeometry {
    /// `spacing` in wavelengths, `0 < d <= 0.5`.
    pub fn new(aperture: Aperture, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0 && spacing <= 0.5) {
            return Err(Error::validation(
                "element spacing",
                format!("must satisfy 0 < d <= 0.5 wavelengths, got {spacing}"),
            ));
        }
        let axis = |len: f64| -> (usize, Vec<f64>) {
            let n = (len / spacing + 1e-9).floor() as usize + 1;
            let half = 0.5 * (n - 1) as f64;
            (n, (0..n).map(|i| (i as f64 - half) * spacing).collect())
        };
        let (n_x, xs) = axis(aperture.len_x());
        let (n_y, ys) = axis(aperture.len_y());
        Ok(Self {
            aperture,
            spacing,
            n_x,
            n_y,
            xs,
            ys,
        })
    }

    pub fn aperture(&self) -> Aperture {
        self.aperture
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_x, self.n_y)
    }

    /// Element count `N = N_x N_y`.
    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_coords(&self) -> &[f64] {
        &self.xs
    }

    pub fn y_coords(&self) -> &[f64] {
        &self.ys
    }

    pub fn positions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs
            .iter()
            .flat_map(move |&x| self.ys.iter().map(move |&y| (x, y)))
    }
}

fn check_same_aperture(geom: &ArrayGeometry, grid: &WavenumberGrid) -> Result<()> {
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
    Ok(())
}

/// `Phi(i; m) = N^{-1/2} exp(-j 2pi (kx x_i + ky y_i))` with `(kx, ky)` the
/// lattice anchor. Elements lie in the local `z = 0` plane, so the `kz` term
/// drops out.
pub fn transform_matrix(geom: &ArrayGeometry, grid: &WavenumberGrid) -> Result<CMatrix> {
    check_same_aperture(geom, grid)?;
    let scale = 1.0 / (geom.len() as f64).sqrt();
    let anchors: Vec<(f64, f64)> = (0..grid.len()).map(|p| grid.anchor(p)).collect();
    let positions: Vec<(f64, f64)> = geom.positions().collect();
    Ok(CMatrix::from_fn(positions.len(), anchors.len(), |i, k| {
        let (x, y) = positions[i];
        let (kx, ky) = anchors[k];
        Complex64::from_polar(scale, -TAU * (kx * x + ky * y))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Producer {
    /// `H_a = diag(sigma_R) H_w diag(sigma_T)`.
    Wavenumber,
    /// `H = sqrt(N_T N_R) Phi_R H_a Phi_T^H`.
    Spatial,
    /// i.i.d. `CN(0, 1)` entries.
    White,
}

/// Channel realizations sharing one shape, with the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEnsemble {
    pub realizations: Vec<CMatrix>,
    pub seed: u64,
    pub producer: Producer,
}

impl ChannelEnsemble {
    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    /// Maps every wavenumber-domain realization to the spatial domain.
    pub fn to_spatial(&self, phi_t: &CMatrix, phi_r: &CMatrix) -> Result<ChannelEnsemble> {
        let realizations = self
            .realizations
            .par_iter()
            .map(|ha| assemble_spatial_channel(ha, phi_t, phi_r))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelEnsemble {
            realizations,
            seed: self.seed,
            producer: Producer::Spatial,
        })
    }

    /// Dumps the ensemble as a NumPy `.npy` array of shape
    /// `(realizations, rows, cols)`, little-endian `complex128`, C order.
    pub fn write_npy(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (rows, cols) = self
            .realizations
            .first()
            .map_or((0, 0), |m| (m.nrows(), m.ncols()));
        let dict = format!(
            "{{'descr': '<c16', 'fortran_order': False, 'shape': ({}, {}, {}), }}",
            self.len(),
            rows,
            cols
        );
        // magic (6) + version (2) + header length (2) + dict, padded with
        // spaces and a trailing newline to a multiple of 64 bytes.
        let unpadded = 10 + dict.len() + 1;
        let pad = (64 - unpadded % 64) % 64;
        let header = format!("{dict}{}\n", " ".repeat(pad));

        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            out.write_all(b"\x93NUMPY\x01\x00")?;
            out.write_all(&(header.len() as u16).to_le_bytes())?;
            out.write_all(header.as_bytes())?;
            for m in &self.realizations {
                for r in 0..rows {
                    for c in 0..cols {
                        let z = m[(r, c)];
                        out.write_all(&z.re.to_le_bytes())?;
                        out.write_all(&z.im.to_le_bytes())?;
                    }
                }
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// `n_r x n_t` matrix of i.i.d. `CN(0, 1)` entries, filled row by row from
/// the stream of realization `index`.
pub fn white_matrix(n_r: usize, n_t: usize, seed: u64, domain: Domain, index: u64) -> CMatrix {
    let mut rng = stream_rng(seed, domain, index);
    let mut data = Vec::with_capacity(n_r * n_t);
    for _ in 0..n_r * n_t {
        data.push(complex_gaussian(&mut rng));
    }
    CMatrix::from_row_slice(n_r, n_t, &data)
}

/// Draws `count` realizations of `H_a = diag(sigma_R) H_w diag(sigma_T)`.
pub fn draw_wavenumber_channel(
    sig_t: &CouplingSpectrum,
    sig_r: &CouplingSpectrum,
    seed: u64,
    count: usize,
) -> ChannelEnsemble {
    let amp_t = sig_t.amplitudes();
    let amp_r = sig_r.amplitudes();
    let realizations = (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let mut h = white_matrix(amp_r.len(), amp_t.len(), seed, Domain::WavenumberChannel, k);
            for (mut col, &a_t) in h.column_iter_mut().zip(&amp_t) {
                for (z, &a_r) in col.iter_mut().zip(&amp_r) {
                    *z *= a_r * a_t;
                }
            }
            h
        })
        .collect();
    ChannelEnsemble {
        realizations,
        seed,
        producer: Producer::Wavenumber,
    }
}

/// `H = sqrt(N_T N_R) Phi_R H_a Phi_T^H`.
pub fn assemble_spatial_channel(ha: &CMatrix, phi_t: &CMatrix, phi_r: &CMatrix) -> Result<CMatrix> {
    if ha.nrows() != phi_r.ncols() || ha.ncols() != phi_t.ncols() {
        return Err(Error::validation(
            "channel dimensions",
            format!(
                "H_a is {}x{}, Phi_R is {}x{}, Phi_T is {}x{}",
                ha.nrows(),
                ha.ncols(),
                phi_r.nrows(),
                phi_r.ncols(),
                phi_t.nrows(),
                phi_t.ncols()
            ),
        ));
    }
    let scale = ((phi_t.nrows() * phi_r.nrows()) as f64).sqrt();
    let left = phi_r * ha;
    Ok(left * phi_t.adjoint() * Complex64::new(scale, 0.0))
}

/// Propagation direction of one path, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

/// One plane wave of a multipath channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub direction: Direction,
    /// Carrier phase offset, radians.
    pub phase: f64,
}

/// Draws directions from the hemispherical density:
/// `theta = arccos(1 - u1)`, `phi = 2 pi u2`.
pub fn sample_directions<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<Direction> {
    (0..count)
        .map(|_| {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            Direction {
                theta: AngleDensity.theta_from_uniform(u1),
                phi: AngleDensity.phi_from_uniform(u2),
            }
        })
        .collect()
}

pub fn sample_multipath(count: usize, seed: u64) -> Result<Vec<Direction>> {
    if count == 0 {
        return Err(Error::validation("multipath count", "S must be >= 1"));
    }
    Ok(sample_directions(&mut stream_rng(seed, Domain::Multipath, 0), count))
}

/// Directions plus i.i.d. uniform phases, as used by one channel realization.
pub fn sample_plane_waves<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<PlaneWave> {
    (0..count)
        .map(|_| {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let u3: f64 = rng.random();
            PlaneWave {
                direction: Direction {
                    theta: AngleDensity.theta_from_uniform(u1),
                    phi: AngleDensity.phi_from_uniform(u2),
                },
                phase: TAU * u3,
            }
        })
        .collect()
}

/// `h(x, y) = S^{-1/2} sum_s sqrt(G_s) e^{j psi_s} e^{j 2pi (kx_s x + ky_s y)}`
/// for an explicit set of plane waves.
pub fn spatial_channel_from_waves(
    geom: &ArrayGeometry,
    pattern: &RadiationPattern,
    waves: &[PlaneWave],
) -> Result<CVector> {
    if waves.is_empty() {
        return Err(Error::validation("multipath count", "S must be >= 1"));
    }
    let norm = 1.0 / (waves.len() as f64).sqrt();
    let (n_x, n_y) = geom.shape();
    // Separable phases: e^{j2pi kx x} e^{j2pi ky y}.
    let mut ex = CMatrix::zeros(waves.len(), n_x);
    let mut ey = CMatrix::zeros(waves.len(), n_y);
    for (s, w) in waves.iter().enumerate() {
        let Direction { theta, phi } = w.direction;
        let gain = pattern.gain_angular(theta, phi)?;
        let amp = Complex64::from_polar(gain.sqrt() * norm, w.phase);
        let (kx, ky) = (theta.sin() * phi.cos(), theta.sin() * phi.sin());
        for (ix, &x) in geom.x_coords().iter().enumerate() {
            ex[(s, ix)] = amp * Complex64::from_polar(1.0, TAU * kx * x);
        }
        for (iy, &y) in geom.y_coords().iter().enumerate() {
            ey[(s, iy)] = Complex64::from_polar(1.0, TAU * ky * y);
        }
    }
    // h[ix, iy] = sum_s ex[s, ix] ey[s, iy]
    let h2 = ex.transpose() * ey;
    Ok(CVector::from_iterator(
        n_x * n_y,
        (0..n_x).flat_map(|ix| (0..n_y).map(move |iy| (ix, iy))).map(|(ix, iy)| h2[(ix, iy)]),
    ))
}

/// One multipath realization (`index` selects the random stream).
pub fn multipath_realization(
    geom: &ArrayGeometry,
    pattern: &RadiationPattern,
    paths: usize,
    seed: u64,
    index: u64,
) -> Result<CVector> {
    if paths == 0 {
        return Err(Error::validation("multipath count", "S must be >= 1"));
    }
    let mut rng = stream_rng(seed, Domain::Multipath, index);
    let waves = sample_plane_waves(&mut rng, paths);
    spatial_channel_from_waves(geom, pattern, &waves)
}

pub fn multipath_spatial_channel(
    geom: &ArrayGeometry,
    pattern: &RadiationPattern,
    paths: usize,
    seed: u64,
) -> Result<CVector> {
    multipath_realization(geom, pattern, paths, seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{coupling_cos_power, SpectrumMeta};
    use crate::grid::build_grid;
    use approx::assert_abs_diff_eq;

    fn geom(l: f64, d: f64) -> ArrayGeometry {
        ArrayGeometry::new(Aperture::square(l).unwrap(), d).unwrap()
    }

    fn flat_spectrum(l: f64, value: f64) -> CouplingSpectrum {
        let g = build_grid(Aperture::square(l).unwrap());
        let n = g.len();
        CouplingSpectrum::new(
            g,
            vec![value; n],
            SpectrumMeta {
                pattern: "test".into(),
                method: "test".into(),
                tol: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn lattice_shape_and_centering() {
        let g = geom(10.0, 0.5);
        assert_eq!(g.shape(), (21, 21));
        assert_eq!(g.len(), 441);
        assert_eq!(g.x_coords()[0], -5.0);
        assert_eq!(g.x_coords()[20], 5.0);
        assert_eq!(geom(10.0, 0.125).shape(), (81, 81));
        assert_eq!(geom(4.0, 0.3).shape(), (14, 14));
        for (x, y) in geom(4.0, 0.3).positions() {
            assert!(x.abs() <= 2.0 && y.abs() <= 2.0);
        }
        assert!(ArrayGeometry::new(Aperture::square(4.0).unwrap(), 0.6).is_err());
        assert!(ArrayGeometry::new(Aperture::square(4.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn element_count_exceeds_grid_cardinality() {
        for l in [1.0, 2.5, 4.0, 10.0] {
            let n = build_grid(Aperture::square(l).unwrap()).len();
            for d in [0.5, 0.4, 0.25] {
                assert!(geom(l, d).len() > n, "L={l} d={d}");
            }
        }
    }

    #[test]
    fn transform_matrix_shape_and_norms() {
        let g = geom(10.0, 0.5);
        let grid = build_grid(g.aperture());
        let phi = transform_matrix(&g, &grid).unwrap();
        assert_eq!(phi.shape(), (441, 317));
        for col in phi.column_iter() {
            assert_abs_diff_eq!(col.norm(), 1.0, epsilon = 1e-12);
        }
        // Element 220 is the array center (0, 0).
        let center = 10 * 21 + 10;
        assert_eq!(g.positions().nth(center).unwrap(), (0.0, 0.0));
        for z in phi.row(center).iter() {
            assert_abs_diff_eq!(z.re, 1.0 / 21.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
        let other = build_grid(Aperture::square(4.0).unwrap());
        assert!(transform_matrix(&g, &other).is_err());
    }

    #[test]
    fn zero_spectrum_gives_zero_channel() {
        let zero = flat_spectrum(3.0, 0.0);
        let ens = draw_wavenumber_channel(&zero, &flat_spectrum(2.0, 0.1), 5, 3);
        assert!(ens.realizations.iter().all(|h| h.iter().all(|z| *z == Complex64::new(0.0, 0.0))));
        let g = geom(3.0, 0.5);
        let phi = transform_matrix(&g, &build_grid(g.aperture())).unwrap();
        let h = assemble_spatial_channel(&CMatrix::zeros(phi.ncols(), phi.ncols()), &phi, &phi).unwrap();
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn wavenumber_entries_have_product_variance() {
        let g = build_grid(Aperture::square(2.0).unwrap());
        let s_t = coupling_cos_power(&g, 2.0, 1e-10).unwrap();
        let s_r = coupling_cos_power(&g, 0.0, 1e-10).unwrap();
        let draws = 10_000;
        let ens = draw_wavenumber_channel(&s_t, &s_r, 11, draws);
        let n = g.len();
        let mut var = CMatrix::zeros(n, n).map(|z: Complex64| z.re);
        for h in &ens.realizations {
            var += h.map(|z| z.norm_sqr());
        }
        var /= draws as f64;
        for l in 0..n {
            for m in 0..n {
                let expected = s_r.values()[l] * s_t.values()[m];
                if expected > 0.0 {
                    assert!((var[(l, m)] / expected - 1.0).abs() < 0.05, "({l},{m})");
                }
            }
        }
    }

    #[test]
    fn ensembles_are_reproducible() {
        let s = flat_spectrum(2.0, 0.05);
        let a = draw_wavenumber_channel(&s, &s, 99, 4);
        let b = draw_wavenumber_channel(&s, &s, 99, 4);
        assert_eq!(a, b);
        let c = draw_wavenumber_channel(&s, &s, 100, 4);
        assert_ne!(a.realizations[0], c.realizations[0]);
        // Realization k does not depend on how many were requested.
        let d = draw_wavenumber_channel(&s, &s, 99, 2);
        assert_eq!(d.realizations[1], a.realizations[1]);
    }

    #[test]
    fn wavenumber_entries_are_uncorrelated() {
        let s = flat_spectrum(1.0, 1.0);
        let draws = 10_000;
        let ens = draw_wavenumber_channel(&s, &s, 3, draws);
        let n = s.len();
        let entries: Vec<(usize, usize)> = (0..n).flat_map(|l| (0..n).map(move |m| (l, m))).collect();
        for (a, &ea) in entries.iter().enumerate() {
            for &eb in &entries[a + 1..] {
                let mut c = Complex64::new(0.0, 0.0);
                for h in &ens.realizations {
                    c += h[ea] * h[eb].conj();
                }
                assert!((c / draws as f64).norm() < 0.05);
            }
        }
    }

    #[test]
    fn spatial_channel_energy() {
        let g = geom(2.0, 0.5);
        let grid = build_grid(g.aperture());
        let phi = transform_matrix(&g, &grid).unwrap();
        let s_t = coupling_cos_power(&grid, 1.0, 1e-10).unwrap();
        let s_r = coupling_cos_power(&grid, 3.0, 1e-10).unwrap();
        let draws = 1000;
        let ens = draw_wavenumber_channel(&s_t, &s_r, 17, draws).to_spatial(&phi, &phi).unwrap();
        let mean: f64 = ens.realizations.iter().map(|h| h.norm_squared()).sum::<f64>() / draws as f64;
        // E||H||_F^2 = N_T N_R sum_{l,m} sigma_R^2(l) sigma_T^2(m) |phi_r_l|^2 |phi_t_m|^2 with unit columns.
        let nn = (g.len() * g.len()) as f64;
        let expected = nn * s_r.total() * s_t.total();
        assert!((mean / expected - 1.0).abs() < 0.05, "{mean} vs {expected}");
    }

    #[test]
    fn degenerate_grid_gives_rank_one_channel() {
        let g = geom(0.5, 0.25);
        let grid = build_grid(g.aperture());
        assert_eq!(grid.len(), 1);
        let phi = transform_matrix(&g, &grid).unwrap();
        let s = flat_spectrum(0.5, 1.0);
        let ha = &draw_wavenumber_channel(&s, &s, 1, 1).realizations[0];
        let h = assemble_spatial_channel(ha, &phi, &phi).unwrap();
        let sv = h.singular_values();
        assert!(sv.iter().filter(|v| **v > 1e-9 * sv.max()).count() <= 1);
        assert!(assemble_spatial_channel(ha, &phi, &CMatrix::zeros(9, 2)).is_err());
    }

    #[test]
    fn multipath_sampling_statistics() {
        let dirs = sample_multipath(100_000, 5).unwrap();
        let mean_cos = dirs.iter().map(|d| d.theta.cos()).sum::<f64>() / dirs.len() as f64;
        assert!((mean_cos - 0.5).abs() < 0.01, "{mean_cos}");
        assert!(dirs.iter().all(|d| (0.0..=std::f64::consts::FRAC_PI_2).contains(&d.theta)));
        assert!(dirs.iter().all(|d| (0.0..TAU).contains(&d.phi)));
        // Kolmogorov-Smirnov against U(0, 2pi): D_n critical value at
        // alpha = 0.01 is 1.628 / sqrt(n).
        let mut u: Vec<f64> = dirs.iter().map(|d| d.phi / TAU).collect();
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        let d = u
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
        assert!(sample_multipath(0, 1).is_err());
    }

    #[test]
    fn broadside_wave_has_flat_magnitude() {
        let g = geom(3.0, 0.5);
        let pat = RadiationPattern::cos_power(2.0).unwrap();
        let wave = PlaneWave {
            direction: Direction { theta: 0.0, phi: 1.3 },
            phase: 0.4,
        };
        let h = spatial_channel_from_waves(&g, &pat, &[wave]).unwrap();
        for z in h.iter() {
            assert_abs_diff_eq!(z.norm(), 1.0, epsilon = 1e-12);
        }
    }

    fn mean_power(pat: &RadiationPattern, realizations: u64) -> f64 {
        let g = geom(1.0, 0.5);
        let mut acc = 0.0;
        for k in 0..realizations {
            let h = multipath_realization(&g, pat, 50, 21, k).unwrap();
            acc += h.norm_squared() / h.len() as f64;
        }
        acc / realizations as f64
    }

    #[test]
    fn multipath_power_equals_mean_gain() {
        let p = mean_power(&RadiationPattern::Hypothetical, 10_000);
        assert!((p - 1.0).abs() < 0.02, "{p}");
        let p = mean_power(&RadiationPattern::cos_power(1.0).unwrap(), 10_000);
        assert!((p - 0.5).abs() < 0.02 * 0.5, "{p}");
    }

    #[test]
    fn multipath_channel_is_stationary() {
        // Correlation E[h(p) h*(q)] should depend only on p - q.
        let g = geom(2.0, 0.5);
        let (_, n_y) = g.shape();
        let pat = RadiationPattern::Hypothetical;
        let realizations = 10_000;
        let pairs = [
            // displacement (0.5, 0)
            [((0, 0), (1, 0)), ((2, 2), (3, 2)), ((3, 4), (4, 4))],
            // displacement (0, 1)
            [((0, 0), (0, 2)), ((1, 1), (1, 3)), ((4, 2), (4, 4))],
            // displacement (1, 1)
            [((0, 0), (2, 2)), ((1, 2), (3, 4)), ((2, 0), (4, 2))],
        ];
        let idx = |(ix, iy): (usize, usize)| ix * n_y + iy;
        let mut acc = vec![[Complex64::new(0.0, 0.0); 3]; 3];
        for k in 0..realizations {
            let h = multipath_realization(&g, &pat, 50, 8, k).unwrap();
            for (c, class) in pairs.iter().enumerate() {
                for (j, &(p, q)) in class.iter().enumerate() {
                    acc[c][j] += h[idx(p)] * h[idx(q)].conj();
                }
            }
        }
        for class in &acc {
            let m: Vec<Complex64> = class.iter().map(|z| z / realizations as f64).collect();
            for z in &m[1..] {
                assert!((z - m[0]).norm() < 0.05, "{m:?}");
            }
        }
    }

    #[test]
    fn npy_dump_has_valid_header() {
        let s = flat_spectrum(1.0, 1.0);
        let ens = draw_wavenumber_channel(&s, &s, 2, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.npy");
        ens.write_npy(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"\x93NUMPY\x01\x00");
        let hlen = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + hlen) % 64, 0);
        let header = std::str::from_utf8(&bytes[10..10 + hlen]).unwrap();
        assert!(header.contains("'shape': (3, 5, 5)"));
        assert_eq!(bytes.len(), 10 + hlen + 3 * 25 * 16);
        let first = f64::from_le_bytes(bytes[10 + hlen..18 + hlen].try_into().unwrap());
        assert_eq!(first, ens.realizations[0][(0, 0)].re);
    }
}
