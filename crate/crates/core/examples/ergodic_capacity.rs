//! Ergodic capacity against SNR, with and without EDoF truncation.

use wavenumber_dof::channel::ArrayGeometry;
use wavenumber_dof::coupling::{coupling_cos_power, DEFAULT_TOL};
use wavenumber_dof::grid::{build_grid, Aperture};
use wavenumber_dof::metrics::{db_to_linear, edof_statistical, CapacityEnsemble};

fn main() -> wavenumber_dof::Result<()> {
    let aperture = Aperture::square(5.0)?;
    let s = coupling_cos_power(&build_grid(aperture), 1.0, DEFAULT_TOL)?;
    let n = ArrayGeometry::new(aperture, 0.5)?.len();
    let eta_e = edof_statistical(&s, &s, 0.99)?.eta_e;
    let ens = CapacityEnsemble::draw(&s, &s, 300, 0)?;

    println!("{n} elements per side, eta_u = {}, eta_e(0.99) = {eta_e}", ens.eta_u());
    println!("{:>7} {:>18} {:>18}", "snr_db", "full [bit/s/Hz]", "truncated");
    for snr_db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
        let snr = db_to_linear(snr_db);
        let full = ens.full_capacity(n, n, snr)?;
        let cut = ens.capacity(n, n, snr, eta_e)?;
        println!(
            "{snr_db:>7} {:>10.2} +- {:<5.2} {:>10.2} +- {:<5.2}",
            full.mean_bits, full.ci_half_width, cut.mean_bits, cut.ci_half_width
        );
    }
    Ok(())
}
