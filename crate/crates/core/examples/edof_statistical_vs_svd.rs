//! Statistical EDoF from the coupling spectrum against the count read off
//! simulated channel realizations.

use wavenumber_dof::channel::{draw_wavenumber_channel, transform_matrix, ArrayGeometry};
use wavenumber_dof::coupling::{coupling_spectrum, DEFAULT_TOL};
use wavenumber_dof::grid::{build_grid, Aperture};
use wavenumber_dof::metrics::{edof_deterministic_factored, edof_statistical, DeterministicMethod};
use wavenumber_dof::pattern::RadiationPattern;

fn main() -> wavenumber_dof::Result<()> {
    let aperture = Aperture::square(6.0)?;
    let grid = build_grid(aperture);
    let phi = transform_matrix(&ArrayGeometry::new(aperture, 0.5)?, &grid)?;

    for pattern in [RadiationPattern::Hypothetical, RadiationPattern::cos_power(2.0)?] {
        let s = coupling_spectrum(&grid, &pattern, DEFAULT_TOL)?;
        let stat = edof_statistical(&s, &s, 0.95)?;
        let ens = draw_wavenumber_channel(&s, &s, 1, 100);
        let det = edof_deterministic_factored(&ens.realizations, &phi, &phi, 0.95, DeterministicMethod::Correlation)?;
        let avg = edof_deterministic_factored(&ens.realizations, &phi, &phi, 0.95, DeterministicMethod::AveragedSpectrum)?;
        println!(
            "{:<13} eta_u {:>3}  statistical {:>3}  correlation {:>3}  averaged spectrum {:>3}",
            s.meta().pattern,
            stat.eta_u,
            stat.eta_e,
            det.eta,
            avg.eta
        );
    }
    Ok(())
}
