//! Degrees-of-freedom and capacity metrics.

use nalgebra::QR;
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::channel::{white_matrix, CMatrix};
use crate::coupling::CouplingSpectrum;
use crate::error::{Error, Result};
use crate::grid::eta_upper_bound;
use crate::rng::Domain;

pub const DEFAULT_GAMMA: f64 = 0.95;

/// Trials per parallel task; fixes the summation order.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EdofResult {
    pub eta_e_tx: usize,
    pub eta_e_rx: usize,
    pub eta_e: usize,
    pub gamma: f64,
    pub eta_u: usize,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation("gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

/// Smallest number of the largest values whose sum reaches `gamma` of the
/// total.
pub fn side_edof(values: &[f64], gamma: f64) -> Result<usize> {
    check_gamma(gamma)?;
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::validation("spectrum", "values must be finite and non-negative"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Err(Error::validation("spectrum", "all values are zero"));
    }
    // The relative slack absorbs summation rounding, so that e.g. 90 of 100
    // equal values count as reaching 0.9.
    let target = gamma * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        acc += v;
        if acc >= target {
            return Ok(k + 1);
        }
    }
    Ok(sorted.len())
}

pub fn edof_statistical(
    sig_t: &CouplingSpectrum,
    sig_r: &CouplingSpectrum,
    gamma: f64,
) -> Result<EdofResult> {
    let eta_e_tx = side_edof(sig_t.values(), gamma)?;
    let eta_e_rx = side_edof(sig_r.values(), gamma)?;
    Ok(EdofResult {
        eta_e_tx,
        eta_e_rx,
        eta_e: eta_e_tx.min(eta_e_rx),
        gamma,
        eta_u: eta_upper_bound(sig_t.grid().aperture(), sig_r.grid().aperture()),
    })
}

/// How dominant singular values are counted across an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DeterministicMethod {
    /// Eigenvalues of the sample correlation matrices `E[H^H H]` (transmit)
    /// and `E[H H^H]` (receive), counted per side.
    #[default]
    Correlation,
    /// Squared singular values sorted per realization, then averaged.
    AveragedSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct DeterministicEdof {
    pub eta_tx: usize,
    pub eta_rx: usize,
    pub eta: usize,
}

/// Deterministic EDoF from channel realizations.
pub fn edof_deterministic(
    ensemble: &[CMatrix],
    gamma: f64,
    method: DeterministicMethod,
) -> Result<DeterministicEdof> {
    check_gamma(gamma)?;
    let first = ensemble
        .first()
        .ok_or_else(|| Error::validation("ensemble", "no realizations"))?;
    if ensemble.iter().any(|h| h.shape() != first.shape()) {
        return Err(Error::validation("ensemble", "realizations differ in shape"));
    }
    match method {
        DeterministicMethod::AveragedSpectrum => {
            let spectra = chunked_sum(ensemble.len(), |k| {
                let mut s = squared_singular_values(&ensemble[k]);
                s.sort_by(|a, b| b.total_cmp(a));
                Ok(s)
            })?;
            let eta = side_edof(&spectra, gamma)?;
            Ok(DeterministicEdof {
                eta_tx: eta,
                eta_rx: eta,
                eta,
            })
        }
        DeterministicMethod::Correlation => {
            let (rows, cols) = first.shape();
            let mut packed = chunked_sum(ensemble.len(), |k| {
                let h = &ensemble[k];
                Ok(pack(&(h.adjoint() * h), &(h * h.adjoint())))
            })?;
            let scale = 1.0 / ensemble.len() as f64;
            packed.iter_mut().for_each(|v| *v *= scale);
            let (r_t, r_r) = unpack(&packed, cols, rows);
            let eta_tx = side_edof(&hermitian_eigenvalues(r_t), gamma)?;
            let eta_rx = side_edof(&hermitian_eigenvalues(r_r), gamma)?;
            Ok(DeterministicEdof {
                eta_tx,
                eta_rx,
                eta: eta_tx.min(eta_rx),
            })
        }
    }
}

/// Deterministic EDoF of `H = sqrt(N_T N_R) Phi_R H_a Phi_T^H` computed
/// from the wavenumber-domain realizations `H_a` without forming `H`.
///
/// With thin factorizations `Phi = Q R`, the nonzero singular values of `H`
/// equal those of `sqrt(N_T N_R) R_R H_a R_T^H`, and the nonzero correlation
/// eigenvalues map likewise, so both methods give the same counts as the
/// spatial route.
pub fn edof_deterministic_factored(
    wavenumber: &[CMatrix],
    phi_t: &CMatrix,
    phi_r: &CMatrix,
    gamma: f64,
    method: DeterministicMethod,
) -> Result<DeterministicEdof> {
    let r_t = QR::new(phi_t.clone()).r();
    let r_r = QR::new(phi_r.clone()).r();
    if let Some(h) = wavenumber.iter().find(|h| h.shape() != (r_r.ncols(), r_t.ncols())) {
        return Err(Error::validation(
            "channel dimensions",
            format!(
                "H_a is {}x{}, expected {}x{}",
                h.nrows(),
                h.ncols(),
                r_r.ncols(),
                r_t.ncols()
            ),
        ));
    }
    let scale = Complex64::new(((phi_t.nrows() * phi_r.nrows()) as f64).sqrt(), 0.0);
    let r_t_h = r_t.adjoint() * scale;
    let cores: Vec<CMatrix> = wavenumber.par_iter().map(|ha| &r_r * ha * &r_t_h).collect();
    edof_deterministic(&cores, gamma, method)
}

/// Sums per-realization vectors in fixed-size chunks, in realization order.
fn chunked_sum<F>(count: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let parts: Vec<Vec<f64>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc: Vec<f64> = Vec::new();
            for k in c * CHUNK..((c + 1) * CHUNK).min(count) {
                let v = f(k)?;
                if acc.is_empty() {
                    acc = v;
                } else {
                    acc.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = parts[0].clone();
    for p in &parts[1..] {
        total.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    Ok(total)
}

fn pack(a: &CMatrix, b: &CMatrix) -> Vec<f64> {
    a.iter()
        .chain(b.iter())
        .flat_map(|z| [z.re, z.im])
        .collect()
}

fn unpack(v: &[f64], n_a: usize, n_b: usize) -> (CMatrix, CMatrix) {
    let z: Vec<Complex64> = v
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    let (za, zb) = z.split_at(n_a * n_a);
    (
        CMatrix::from_column_slice(n_a, n_a, za),
        CMatrix::from_column_slice(n_b, n_b, zb),
    )
}

/// Squared singular values from the smaller Gram matrix. nalgebra's complex
/// SVD loses accuracy on rank-deficient inputs, which spatial channels with
/// `N > n` always are.
fn squared_singular_values(h: &CMatrix) -> Vec<f64> {
    if h.nrows() <= h.ncols() {
        hermitian_eigenvalues(h * h.adjoint())
    } else {
        hermitian_eigenvalues(h.adjoint() * h)
    }
}

/// Eigenvalues of a Hermitian positive semidefinite matrix, clamped at 0.
fn hermitian_eigenvalues(m: CMatrix) -> Vec<f64> {
    m.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CapacityResult {
    /// Ergodic capacity, bits/s/Hz.
    pub mean_bits: f64,
    /// 95% confidence half-width of the mean; NaN for a single trial.
    pub ci_half_width: f64,
    pub trials: usize,
    /// Linear `1 / mu^2`.
    pub snr: f64,
}

/// Per-trial eigenvalues `tau_i` of `A A^H` with `A = D_R^{1/2} H_w D_T^{1/2}`,
/// sorted descending. They depend only on the two spectra and the seed, so
/// one ensemble serves every SNR and element count.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEnsemble {
    eigenvalues: Vec<Vec<f64>>,
    n_t: usize,
    eta_u: usize,
    pub seed: u64,
}

impl CapacityEnsemble {
    pub fn draw(
        sig_t: &CouplingSpectrum,
        sig_r: &CouplingSpectrum,
        trials: usize,
        seed: u64,
    ) -> Result<Self> {
        if trials < 1 {
            return Err(Error::validation("trials", "must be >= 1"));
        }
        let amp_t = sig_t.amplitudes();
        let amp_r = sig_r.amplitudes();
        let eigenvalues = (0..trials as u64)
            .into_par_iter()
            .map(|k| {
                let mut a = white_matrix(amp_r.len(), amp_t.len(), seed, Domain::Capacity, k);
                for (mut col, &s_t) in a.column_iter_mut().zip(&amp_t) {
                    for (z, &s_r) in col.iter_mut().zip(&amp_r) {
                        *z *= s_r * s_t;
                    }
                }
                let mut tau = squared_singular_values(&a);
                if tau.iter().any(|t| !t.is_finite()) {
                    return Err(Error::Numeric(format!("eigendecomposition failed in trial {k}")));
                }
                tau.sort_by(|a, b| b.total_cmp(a));
                Ok(tau)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            eigenvalues,
            n_t: amp_t.len(),
            eta_u: eta_upper_bound(sig_t.grid().aperture(), sig_r.grid().aperture()),
            seed,
        })
    }

    pub fn trials(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues available per trial, `min(n_T, n_R)`.
    pub fn available(&self) -> usize {
        self.eigenvalues.first().map_or(0, Vec::len)
    }

    pub fn eta_u(&self) -> usize {
        self.eta_u
    }

    pub fn eigenvalues(&self) -> &[Vec<f64>] {
        &self.eigenvalues
    }

    /// `E sum_{i <= terms} log2(1 + N_T N_R snr / n_T * tau_i)`.
    pub fn capacity(&self, elements_t: usize, elements_r: usize, snr: f64, terms: usize) -> Result<CapacityResult> {
        if !(snr.is_finite() && snr > 0.0) {
            return Err(Error::validation("snr", format!("must be finite and > 0, got {snr}")));
        }
        if terms > self.available() {
            return Err(Error::validation(
                "eta_e",
                format!("{terms} exceeds the {} available eigenvalues", self.available()),
            ));
        }
        let gain = (elements_t as f64) * (elements_r as f64) * snr / self.n_t as f64;
        let per_trial: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|tau| tau[..terms].iter().map(|t| (gain * t).ln_1p()).sum::<f64>() / std::f64::consts::LN_2)
            .collect();
        let n = per_trial.len() as f64;
        let mean = per_trial.iter().sum::<f64>() / n;
        let ci_half_width = if per_trial.len() < 2 {
            f64::NAN
        } else {
            let var = per_trial.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let t = StudentsT::new(0.0, 1.0, n - 1.0)
                .map_err(|e| Error::Numeric(e.to_string()))?
                .inverse_cdf(0.975);
            t * (var / n).sqrt()
        };
        Ok(CapacityResult {
            mean_bits: mean,
            ci_half_width,
            trials: per_trial.len(),
            snr,
        })
    }

    /// Capacity summed over the `eta_u` largest terms (fewer if not
    /// available).
    pub fn full_capacity(&self, elements_t: usize, elements_r: usize, snr: f64) -> Result<CapacityResult> {
        self.capacity(elements_t, elements_r, snr, self.eta_u.min(self.available()))
    }
}

pub fn ergodic_capacity(
    sig_t: &CouplingSpectrum,
    sig_r: &CouplingSpectrum,
    elements_t: usize,
    elements_r: usize,
    snr: f64,
    trials: usize,
    seed: u64,
) -> Result<CapacityResult> {
    CapacityEnsemble::draw(sig_t, sig_r, trials, seed)?.full_capacity(elements_t, elements_r, snr)
}

#[allow(clippy::too_many_arguments)]
pub fn capacity_with_edof_truncation(
    sig_t: &CouplingSpectrum,
    sig_r: &CouplingSpectrum,
    elements_t: usize,
    elements_r: usize,
    snr: f64,
    trials: usize,
    seed: u64,
    eta_e: usize,
) -> Result<CapacityResult> {
    if eta_e == 0 {
        return Err(Error::validation("eta_e", "must be >= 1"));
    }
    CapacityEnsemble::draw(sig_t, sig_r, trials, seed)?.capacity(elements_t, elements_r, snr, eta_e)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
