//! Monte Carlo coupling estimate from simulated multipath array snapshots,
//! checked against quadrature.

use wavenumber_dof::channel::ArrayGeometry;
use wavenumber_dof::coupling::{coupling_cos_power, DEFAULT_TOL};
use wavenumber_dof::emcc::{estimate_coupling, relative_errors, EmccConfig};
use wavenumber_dof::grid::{build_grid, Aperture};
use wavenumber_dof::pattern::RadiationPattern;

fn main() -> wavenumber_dof::Result<()> {
    let aperture = Aperture::square(3.0)?;
    let grid = build_grid(aperture);
    let pattern = RadiationPattern::cos_power(1.0)?;
    let reference = coupling_cos_power(&grid, 1.0, DEFAULT_TOL)?;

    for spacing in [0.5, 0.4] {
        let geom = ArrayGeometry::new(aperture, spacing)?;
        let cfg = EmccConfig {
            realizations: 2000,
            ..EmccConfig::default()
        };
        let est = estimate_coupling(&geom, &grid, &pattern, &cfg)?;
        let errors = relative_errors(&est.spectrum, &reference)?;
        let interior: Vec<f64> = grid.interior().filter_map(|p| errors[p]).collect();
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        println!(
            "d = {spacing}: {} elements, basis rank {}/{}, total {:.4} (ref {:.4}), mean interior rel. error {mean:.3}",
            geom.len(),
            est.rank,
            grid.len(),
            est.spectrum.total(),
            reference.total()
        );
    }
    Ok(())
}
