//! Coupling spectra of cos^m patterns on a 10x10 aperture.
//!
//! ```text
//! cargo run --release --example coupling_spectrum
//! ```

use wavenumber_dof::coupling::{coupling_cos_power, DEFAULT_TOL};
use wavenumber_dof::grid::{build_grid, eta_upper_bound, Aperture};

fn main() -> wavenumber_dof::Result<()> {
    let aperture = Aperture::square(10.0)?;
    let grid = build_grid(aperture);
    println!(
        "{aperture}: {} wavenumber cells, {} unclipped, eta_u = {}",
        grid.len(),
        grid.interior().count(),
        eta_upper_bound(aperture, aperture)
    );

    println!("{:>3} {:>10} {:>12} {:>12}", "m", "total", "center", "edge (9,0)");
    for m in [0.0, 1.0, 2.0, 3.0] {
        let s = coupling_cos_power(&grid, m, DEFAULT_TOL)?;
        println!(
            "{m:>3} {:>10.5} {:>12.4e} {:>12.4e}",
            s.total(),
            s.get(0, 0).unwrap(),
            s.get(9, 0).unwrap()
        );
    }
    Ok(())
}
