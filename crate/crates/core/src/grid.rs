//! Periodic-box discretization: mode lattice, wavenumber map, dealiasing
//! and the spectral/physical field containers.
//!
//! Spectral coefficients are Fourier-series coefficients, `f(x) = Σ_k c_k e^{ik·x}`,
//! so `c_k = f̂(k) / L^d` in terms of the continuum transform. With this
//! normalization a lattice convolution `Σ_η c(ξ-η) d(η)` is exactly the
//! `(2π/L)^d`-weighted Riemann sum of `(2π)^{-d} ∫ f̂(ξ-η) ĝ(η) dη`.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{self, Direction};

pub type Wavevector = Vector3<f64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl SpectralGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("grid dimension must be 2 or 3, got {dim}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!("grid size must be a power of two >= 4, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("box length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn cube(n: usize, length: f64) -> Result<Self> {
        Self::new(3, n, length)
    }

    pub fn square(n: usize, length: f64) -> Result<Self> {
        Self::new(2, n, length)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn shape(&self) -> [usize; 3] {
        if self.dim == 3 {
            [self.n, self.n, self.n]
        } else {
            [self.n, self.n, 1]
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice spacing in wavenumber space, 2π/L.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Largest |ξ| on the lattice (the Nyquist corner).
    pub fn max_wavenumber(&self) -> f64 {
        (self.dim as f64).sqrt() * (self.n / 2) as f64 * self.dk()
    }

    /// Largest per-axis |mode| kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    fn signed(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    fn unsigned(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    /// Integer mode (per-axis in `[-n/2, n/2)`) of a flat index.
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let [_, s1, s2] = self.shape();
        let i2 = idx % s2;
        let i1 = (idx / s2) % s1;
        let i0 = idx / (s1 * s2);
        [self.signed(i0), self.signed(i1), if self.dim == 3 { self.signed(i2) } else { 0 }]
    }

    /// Flat index of an integer mode, wrapping periodically.
    pub fn index(&self, mode: [i64; 3]) -> usize {
        let [_, s1, s2] = self.shape();
        let i0 = self.unsigned(mode[0]);
        let i1 = self.unsigned(mode[1]);
        let i2 = if self.dim == 3 { self.unsigned(mode[2]) } else { 0 };
        (i0 * s1 + i1) * s2 + i2
    }

    pub fn wavevector(&self, idx: usize) -> Wavevector {
        let m = self.mode(idx);
        let dk = self.dk();
        Vector3::new(m[0] as f64 * dk, m[1] as f64 * dk, m[2] as f64 * dk)
    }

    pub fn wavenumber(&self, idx: usize) -> f64 {
        self.wavevector(idx).norm()
    }

    pub fn in_dealias_band(&self, idx: usize) -> bool {
        let c = self.dealias_cutoff();
        self.mode(idx).iter().all(|m| m.abs() <= c)
    }

    /// Sample position `j·Δx` of a grid point (the FFT phase origin is the corner).
    pub fn position(&self, idx: usize) -> Wavevector {
        self.coordinate(idx) + Vector3::new(1.0, 1.0, if self.dim == 3 { 1.0 } else { 0.0 }) * (self.length / 2.0)
    }

    /// Displacement of a grid point from the box center. Physical weights
    /// such as `|x|²` use this coordinate.
    pub fn coordinate(&self, idx: usize) -> Wavevector {
        let [_, s1, s2] = self.shape();
        let i2 = idx % s2;
        let i1 = (idx / s2) % s1;
        let i0 = idx / (s1 * s2);
        let dx = self.dx();
        let half = self.length / 2.0;
        let z = if self.dim == 3 { i2 as f64 * dx - half } else { 0.0 };
        Vector3::new(i0 as f64 * dx - half, i1 as f64 * dx - half, z)
    }

    /// Flat index of the mode difference `a - b`, wrapped.
    pub fn index_diff(&self, a: usize, b: usize) -> usize {
        let ma = self.mode(a);
        let mb = self.mode(b);
        self.index([ma[0] - mb[0], ma[1] - mb[1], ma[2] - mb[2]])
    }

    /// Same grid with `n` replaced (box unchanged).
    pub fn refined(&self, n: usize) -> Result<Self> {
        Self::new(self.dim, n, self.length)
    }
}

/// Scalar field in Fourier-series coefficient form.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: SpectralGrid,
    coeffs: Vec<Complex64>,
}

/// Scalar field sampled on the physical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    grid: SpectralGrid,
    values: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: SpectralGrid) -> Self {
        Self { grid, coeffs: vec![ZERO; grid.len()] }
    }

    pub fn from_coeffs(grid: SpectralGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, coeffs })
    }

    pub fn from_fn(grid: SpectralGrid, f: impl Fn(usize, Wavevector) -> Complex64 + Sync) -> Self {
        let coeffs = (0..grid.len()).into_par_iter().map(|i| f(i, grid.wavevector(i))).collect();
        Self { grid, coeffs }
    }

    pub fn single_mode(grid: SpectralGrid, mode: [i64; 3], amplitude: Complex64) -> Self {
        let mut field = Self::zeros(grid);
        field.coeffs[grid.index(mode)] = amplitude;
        field
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn to_physical(&self) -> PhysicalField {
        let mut values = self.coeffs.clone();
        fft::transform(&mut values, self.grid.shape(), Direction::Inverse);
        PhysicalField { grid: self.grid, values }
    }

    /// Per-mode multiplication by `symbol(index, ξ)`.
    pub fn map_modes(&self, symbol: impl Fn(usize, Wavevector) -> Complex64 + Sync) -> Self {
        let grid = self.grid;
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(i, c)| if *c == ZERO { ZERO } else { c * symbol(i, grid.wavevector(i)) })
            .collect();
        Self { grid, coeffs }
    }

    /// Zero every mode outside the 2/3-rule band.
    pub fn dealias(&mut self) {
        let grid = self.grid;
        self.coeffs.par_iter_mut().enumerate().for_each(|(i, c)| {
            if !grid.in_dealias_band(i) {
                *c = ZERO;
            }
        });
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    pub fn is_dealiased(&self) -> bool {
        self.coeffs.iter().enumerate().all(|(i, c)| *c == ZERO || self.grid.in_dealias_band(i))
    }

    /// `Σ_k w(|k|) |c_k|² · L^d`, summed deterministically.
    pub fn weighted_energy(&self, weight: impl Fn(Wavevector) -> f64 + Sync) -> f64 {
        let grid = self.grid;
        let parts: Vec<f64> = self
            .coeffs
            .par_chunks(4096)
            .enumerate()
            .map(|(chunk, cs)| {
                cs.iter()
                    .enumerate()
                    .filter(|(_, c)| **c != ZERO)
                    .map(|(j, c)| weight(grid.wavevector(chunk * 4096 + j)) * c.norm_sqr())
                    .sum::<f64>()
            })
            .collect();
        parts.iter().sum::<f64>() * grid.volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.weighted_energy(|_| 1.0).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.coeffs.par_iter_mut().for_each(|c| *c *= factor);
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: Complex64, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        self.coeffs.par_iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += factor * b);
        Ok(())
    }

    /// Re-express on a grid with the same box and a different resolution,
    /// keeping the common modes. Modes that do not fit are dropped.
    pub fn resampled(&self, target: SpectralGrid) -> Result<Self> {
        if target.dim() != self.grid.dim() || target.length() != self.grid.length() {
            return Err(Error::GridMismatch);
        }
        let mut out = Self::zeros(target);
        let half = (target.n() / 2) as i64;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            let m = self.grid.mode(i);
            if m.iter().all(|x| *x > -half && *x < half) {
                out.coeffs[target.index(m)] = *c;
            }
        }
        Ok(out)
    }
}

impl Index<usize> for SpectralField {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.coeffs[i]
    }
}

impl IndexMut<usize> for SpectralField {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.coeffs[i]
    }
}

impl PhysicalField {
    pub fn zeros(grid: SpectralGrid) -> Self {
        Self { grid, values: vec![ZERO; grid.len()] }
    }

    pub fn from_fn(grid: SpectralGrid, f: impl Fn(Wavevector) -> Complex64 + Sync) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|i| f(grid.coordinate(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn to_spectral(&self) -> SpectralField {
        let mut coeffs = self.values.clone();
        fft::transform(&mut coeffs, self.grid.shape(), Direction::Forward);
        let scale = 1.0 / self.grid.len() as f64;
        coeffs.par_iter_mut().for_each(|c| *c *= scale);
        SpectralField { grid: self.grid, coeffs }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.par_iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Pointwise multiplication by a real weight of the coordinate.
    pub fn weighted(&self, weight: impl Fn(Wavevector) -> f64 + Sync) -> Self {
        let grid = self.grid;
        let values = self.values.par_iter().enumerate().map(|(i, v)| v * weight(grid.coordinate(i))).collect();
        Self { grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// `(Σ |f|^p Δx^d)^{1/p}` by the periodic trapezoid rule; `p = ∞` is the max.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let parts: Vec<f64> =
            self.values.par_chunks(4096).map(|vs| vs.iter().map(|v| v.norm().powf(p)).sum::<f64>()).collect();
        (parts.iter().sum::<f64>() * self.grid.cell_volume()).powf(1.0 / p)
    }
}

impl Index<usize> for PhysicalField {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.values[i]
    }
}
