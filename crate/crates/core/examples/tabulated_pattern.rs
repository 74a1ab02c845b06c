//! Writes a sampled patch-like pattern to CSV, loads it back and compares
//! the resulting spectrum with the closed-form cos^2 one.

use wavenumber_dof::coupling::{coupling_cos_power, coupling_spectrum, DEFAULT_TOL};
use wavenumber_dof::grid::{build_grid, Aperture};
use wavenumber_dof::pattern::{load_pattern, TabulatedPattern};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("cos2.csv");
    TabulatedPattern::from_fn(1.0, 5.0, |theta, _| theta.cos().powi(2))?.write_csv(&path)?;
    let pattern = load_pattern(&path)?;

    let grid = build_grid(Aperture::square(4.0)?);
    let tabulated = coupling_spectrum(&grid, &pattern, 1e-7)?;
    let exact = coupling_cos_power(&grid, 2.0, DEFAULT_TOL)?;

    let worst = tabulated
        .values()
        .iter()
        .zip(exact.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("{} cells from {}", grid.len(), path.display());
    println!("total: tabulated {:.6}, closed form {:.6}", tabulated.total(), exact.total());
    println!("max abs difference {worst:.2e}");
    Ok(())
}
