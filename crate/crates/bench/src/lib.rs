//! Shared fixtures for the kernel benchmarks.

use pdhs_core::experiment::data::random_bandlimited;
use pdhs_core::{SpectralField, SpectralGrid};

pub fn cube(n: usize) -> SpectralGrid {
    SpectralGrid::cube(n, n as f64).expect("power-of-two grid")
}

/// Two independent band-limited fields on `grid`.
pub fn field_pair(grid: SpectralGrid, seed: u64) -> (SpectralField, SpectralField) {
    let band = (grid.n() / 6) as i64;
    (random_bandlimited(grid, 1.0, band, seed), random_bandlimited(grid, 1.0, band, seed + 1))
}
