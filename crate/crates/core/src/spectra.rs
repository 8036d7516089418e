//! Linear symbol `E(iξ) = -i|ξ|A + B` of the model systems, its
//! eigenstructure, the Green function `exp(E(iξ)t)` and the
//! Shizuta–Kawashima checker.
//!
//! The models couple a 2×2 dissipative block `(u, v)` and, for the
//! three-component model, a decoupled transported variable `w`. The block
//! structure is what makes the closed-form eigensystem below exact.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, SVD};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{SpectralGrid, Wavevector};

pub type C64 = Complex64;

/// Half-width of the band around `|ξ| = 1/2` where the two dissipative
/// eigenvalues coalesce and the spectral form is replaced by a direct
/// matrix exponential.
pub const DEGENERATE_BAND: f64 = 1e-3;

/// Low-frequency cutoff `a` for the diffusive/damped/wave decomposition.
pub const LOW_FREQUENCY_CUTOFF: f64 = 0.25;

#[cfg(test)]
const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Convection matrix `A` and linearized source `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrices {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl ModelMatrices {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !(n == 2 || n == 3) || a.shape() != (n, n) || b.shape() != (n, n) {
            return Err(Error::UnsupportedStructure(format!(
                "model matrices must be 2x2 or 3x3, got A {:?}, B {:?}",
                a.shape(),
                b.shape()
            )));
        }
        if (&a - a.transpose()).amax() > 1e-14 || (&b - b.transpose()).amax() > 1e-14 {
            return Err(Error::UnsupportedStructure("A and B must be symmetric".into()));
        }
        let eig = SymmetricEigen::new(b.clone());
        if eig.eigenvalues.iter().any(|l| *l > 1e-12) {
            return Err(Error::UnsupportedStructure("B must be negative semidefinite".into()));
        }
        Ok(Self { a, b })
    }

    /// The three-component model: dissipative `(u, v)` plus an undamped
    /// transported `w`.
    pub fn partially_dissipative() -> Self {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0, 0.0]));
        Self { a, b }
    }

    /// The 2×2 dissipative `(u, v)` block alone.
    pub fn sk_pair() -> Self {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0]));
        Self { a, b }
    }

    pub fn dim_state(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
}

/// `E(iξ) = -i|ξ|A + B`.
pub fn build_linear_symbol(model: &ModelMatrices, xi: &Wavevector) -> DMatrix<C64> {
    let kappa = xi.norm();
    DMatrix::from_fn(model.dim_state(), model.dim_state(), |r, c| C64::new(model.b[(r, c)], -kappa * model.a[(r, c)]))
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// `(λ₁, λ₂[, λ₃])`, ordered by their limits at `ξ → 0`.
    pub eigvals: Vec<C64>,
    pub eigvecs: Vec<DVector<C64>>,
    pub projectors: Vec<DMatrix<C64>>,
}

/// Closed-form eigenpairs of the dissipative 2×2 block.
#[derive(Debug, Clone, Copy)]
struct BlockEigen {
    lambda1: C64,
    lambda2: C64,
    p1: Matrix2<C64>,
    p2: Matrix2<C64>,
}

/// Squared eigenvalue gap below which the block is treated as degenerate;
/// for the model symbol this is exactly `| |ξ| - 1/2 | < DEGENERATE_BAND`.
fn degenerate_gap_sq() -> f64 {
    4.0 * DEGENERATE_BAND * (1.0 - DEGENERATE_BAND)
}

fn block_eigen(m: &Matrix2<C64>) -> Option<BlockEigen> {
    let (p, q, r, s) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let tr = p + s;
    let det = p * s - q * r;
    let disc = (p - s) * (p - s) + 4.0 * q * r;
    // principal branch: for the model, sqrt(1 - 4|ξ|²) continued to i·sqrt(4|ξ|² - 1)
    let root = disc.sqrt();
    if root.norm_sqr() < degenerate_gap_sq() * tr.norm_sqr().max(1e-300) {
        return None;
    }
    let lambda2 = 0.5 * (tr - root);
    // product of the roots avoids cancellation in λ₁ ≈ -|ξ|²
    let lambda1 = if lambda2.norm() > 1e-300 { det / lambda2 } else { 0.5 * (tr + root) };
    let gap = lambda1 - lambda2;
    let id = Matrix2::identity();
    let p1 = (m - id * lambda2) / gap;
    let p2 = (m - id * lambda1) / (-gap);
    Some(BlockEigen { lambda1, lambda2, p1, p2 })
}

fn block_eigvec(m: &Matrix2<C64>, lambda: C64) -> DVector<C64> {
    let (p, q, r, s) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let from_row0 = [q, lambda - p];
    let from_row1 = [lambda - s, r];
    let n0 = from_row0[0].norm_sqr() + from_row0[1].norm_sqr();
    let n1 = from_row1[0].norm_sqr() + from_row1[1].norm_sqr();
    let v = if n0 >= n1 { from_row0 } else { from_row1 };
    let scale = if v[0].norm() > 1e-12 * (n0.max(n1)).sqrt() { v[0] } else { v[1] };
    DVector::from_vec(vec![v[0] / scale, v[1] / scale])
}

fn check_block_structure(e: &DMatrix<C64>) -> Result<()> {
    match e.shape() {
        (2, 2) => Ok(()),
        (3, 3) => {
            let off = [e[(0, 2)], e[(1, 2)], e[(2, 0)], e[(2, 1)]];
            if off.iter().all(|z| *z == ZERO) {
                Ok(())
            } else {
                Err(Error::UnsupportedStructure("third component must decouple from the dissipative block".into()))
            }
        }
        shape => Err(Error::UnsupportedStructure(format!("expected a 2x2 or 3x3 symbol, got {shape:?}"))),
    }
}

fn upper_block(e: &DMatrix<C64>) -> Matrix2<C64> {
    Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)])
}

/// Eigenvalues, eigenvectors and spectral projectors of a model symbol.
pub fn eigen_decompose(e: &DMatrix<C64>) -> Result<EigenDecomposition> {
    check_block_structure(e)?;
    let n = e.nrows();
    let m = upper_block(e);
    let Some(be) = block_eigen(&m) else {
        let kappa = (e[(0, 1)] * e[(1, 0)]).norm().sqrt();
        let root = ((m[(0, 0)] - m[(1, 1)]).powi(2) + 4.0 * m[(0, 1)] * m[(1, 0)]).sqrt();
        return Err(Error::DegenerateSpectrum { kappa, gap: root.norm() });
    };
    let embed = |p: &Matrix2<C64>| {
        let mut out = DMatrix::zeros(n, n);
        for r in 0..2 {
            for c in 0..2 {
                out[(r, c)] = p[(r, c)];
            }
        }
        out
    };
    let pad = |v: DVector<C64>| {
        if n == 3 {
            DVector::from_vec(vec![v[0], v[1], ZERO])
        } else {
            v
        }
    };
    let mut eigvals = vec![be.lambda1, be.lambda2];
    let mut eigvecs = vec![pad(block_eigvec(&m, be.lambda1)), pad(block_eigvec(&m, be.lambda2))];
    let mut projectors = vec![embed(&be.p1), embed(&be.p2)];
    if n == 3 {
        eigvals.push(e[(2, 2)]);
        eigvecs.push(DVector::from_vec(vec![ZERO, ZERO, ONE]));
        let mut p3 = DMatrix::zeros(3, 3);
        p3[(2, 2)] = ONE;
        projectors.push(p3);
    }
    Ok(EigenDecomposition { eigvals, eigvecs, projectors })
}

/// Scaling-and-squaring matrix exponential with a diagonal Padé(6,6) core.
///
/// The matrix is scaled until its 1-norm is at most 1/2, where the Padé
/// truncation error is below 1e-16.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let norm1 = (0..n).map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / C64::new(2f64.powi(squarings), 0.0);
    // Padé(6,6) coefficients c_k = (12-k)! 6! / (12! k! (6-k)!)
    const C: [f64; 7] = [1.0, 0.5, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0];
    let id = DMatrix::<C64>::identity(n, n);
    let mut power = id.clone();
    let mut num = id.clone() * C64::new(C[0], 0.0);
    let mut den = id.clone() * C64::new(C[0], 0.0);
    for (k, ck) in C.iter().enumerate().skip(1) {
        power = &power * &scaled;
        let term = &power * C64::new(*ck, 0.0);
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut result = den.lu().solve(&num).expect("Padé denominator is nonsingular for ||A|| <= 1/2");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn expm2(m: &Matrix2<C64>) -> Matrix2<C64> {
    let d = expm(&DMatrix::from_fn(2, 2, |r, c| m[(r, c)]));
    Matrix2::new(d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)])
}

/// `exp(E(iξ)t)` at a single wavevector, as a dense matrix.
pub fn green_function_at(model: &ModelMatrices, xi: &Wavevector, t: f64) -> Result<DMatrix<C64>> {
    let e = build_linear_symbol(model, xi);
    check_block_structure(&e)?;
    match eigen_decompose(&e) {
        Ok(dec) if !in_degenerate_band(xi.norm()) => Ok(dec
            .eigvals
            .iter()
            .zip(&dec.projectors)
            .fold(DMatrix::zeros(e.nrows(), e.ncols()), |acc, (l, p)| acc + p * (l * t).exp())),
        _ => Ok(expm(&(e * C64::new(t, 0.0)))),
    }
}

pub fn in_degenerate_band(kappa: f64) -> bool {
    (kappa - 0.5).abs() < DEGENERATE_BAND
}

/// Per-mode propagator of the block-structured symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub uv: Matrix2<C64>,
    pub w: C64,
}

impl Propagator {
    pub fn identity() -> Self {
        Self { uv: Matrix2::identity(), w: ONE }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self { uv: self.uv * other.uv, w: self.w * other.w }
    }

    pub fn to_dense(&self, dim_state: usize) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(dim_state, dim_state);
        for r in 0..2 {
            for c in 0..2 {
                out[(r, c)] = self.uv[(r, c)];
            }
        }
        if dim_state == 3 {
            out[(2, 2)] = self.w;
        }
        out
    }

    #[inline]
    pub fn apply(&self, u: C64, v: C64, w: C64) -> (C64, C64, C64) {
        (self.uv[(0, 0)] * u + self.uv[(0, 1)] * v, self.uv[(1, 0)] * u + self.uv[(1, 1)] * v, self.w * w)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModeSpectrum {
    pub kappa: f64,
    pub degenerate: bool,
    /// `(λ₁, λ₂, λ₃)`; `λ₃ = -i|ξ|` is meaningful only for three-component models.
    pub eigvals: [C64; 3],
    pub p1: Matrix2<C64>,
    pub p2: Matrix2<C64>,
    block: Matrix2<C64>,
}

impl ModeSpectrum {
    fn new(model: &ModelMatrices, kappa: f64) -> Self {
        let e = build_linear_symbol(model, &Wavevector::new(kappa, 0.0, 0.0));
        let block = upper_block(&e);
        let lambda3 = if model.dim_state() == 3 { e[(2, 2)] } else { ZERO };
        let degenerate = in_degenerate_band(kappa);
        match block_eigen(&block).filter(|_| !degenerate) {
            Some(be) => Self {
                kappa,
                degenerate: false,
                eigvals: [be.lambda1, be.lambda2, lambda3],
                p1: be.p1,
                p2: be.p2,
                block,
            },
            None => Self {
                kappa,
                degenerate: true,
                eigvals: [ZERO, ZERO, lambda3],
                p1: Matrix2::zeros(),
                p2: Matrix2::zeros(),
                block,
            },
        }
    }

    pub fn propagator(&self, t: f64) -> Propagator {
        let uv = if self.degenerate {
            expm2(&(self.block * C64::new(t, 0.0)))
        } else {
            self.p1 * (self.eigvals[0] * t).exp() + self.p2 * (self.eigvals[1] * t).exp()
        };
        Propagator { uv, w: (self.eigvals[2] * t).exp() }
    }
}

/// Diffusive, exponentially damped and wave parts of the Green function at one mode.
#[derive(Debug, Clone, Copy)]
pub struct GreenParts {
    pub diffusive: Propagator,
    pub damped: Propagator,
    pub wave: Propagator,
}

/// Per-mode symbols, eigenvalues and projectors over a grid.
///
/// The model symbol depends on `ξ` only through `|ξ|`, so spectra are
/// computed once per distinct lattice shell and shared by index.
#[derive(Debug, Clone)]
pub struct LinearSymbolCache {
    grid: SpectralGrid,
    model: ModelMatrices,
    shells: Vec<ModeSpectrum>,
    shell_of: Vec<u32>,
}

impl LinearSymbolCache {
    pub fn new(model: &ModelMatrices, grid: SpectralGrid) -> Result<Self> {
        check_block_structure(&build_linear_symbol(model, &Wavevector::new(1.0, 0.0, 0.0)))?;
        let mut keys: Vec<(i64, usize)> = (0..grid.len())
            .map(|i| {
                let m = grid.mode(i);
                (m.iter().map(|x| x * x).sum::<i64>(), i)
            })
            .collect();
        keys.sort_unstable();
        let mut shell_norms: Vec<i64> = keys.iter().map(|k| k.0).collect();
        shell_norms.dedup();
        let dk = grid.dk();
        let shells: Vec<ModeSpectrum> =
            shell_norms.par_iter().map(|m2| ModeSpectrum::new(model, (*m2 as f64).sqrt() * dk)).collect();
        let mut shell_of = vec![0u32; grid.len()];
        let mut s = 0usize;
        for (m2, idx) in keys {
            while shell_norms[s] != m2 {
                s += 1;
            }
            shell_of[idx] = s as u32;
        }
        Ok(Self { grid, model: model.clone(), shells, shell_of })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn model(&self) -> &ModelMatrices {
        &self.model
    }

    pub fn mode(&self, idx: usize) -> &ModeSpectrum {
        &self.shells[self.shell_of[idx] as usize]
    }

    pub fn degenerate_mask(&self) -> Vec<bool> {
        (0..self.grid.len()).map(|i| self.mode(i).degenerate).collect()
    }

    /// Symbol matrix at a mode.
    pub fn symbol(&self, idx: usize) -> DMatrix<C64> {
        build_linear_symbol(&self.model, &self.grid.wavevector(idx))
    }

    /// `exp(E(iξ)t)` for every mode of the grid.
    pub fn green_function(&self, t: f64) -> Vec<Propagator> {
        let per_shell: Vec<Propagator> = self.shells.par_iter().map(|s| s.propagator(t)).collect();
        self.shell_of.iter().map(|s| per_shell[*s as usize]).collect()
    }

    pub fn green_at(&self, idx: usize, t: f64) -> Propagator {
        self.mode(idx).propagator(t)
    }

    /// `K̂ = e^{λ₁t}P₁`, `𝒦̂ = e^{λ₂t}P₂`, `Ŵ = e^{-i|ξ|t}P₃` for `|ξ| <= a`.
    pub fn decompose_green(&self, idx: usize, t: f64) -> Result<GreenParts> {
        decompose_mode(self.mode(idx), t)
    }
}

pub fn decompose_mode(mode: &ModeSpectrum, t: f64) -> Result<GreenParts> {
    if mode.kappa > LOW_FREQUENCY_CUTOFF {
        return Err(Error::OutOfBand { kappa: mode.kappa, cutoff: LOW_FREQUENCY_CUTOFF });
    }
    let [l1, l2, l3] = mode.eigvals;
    Ok(GreenParts {
        diffusive: Propagator { uv: mode.p1 * (l1 * t).exp(), w: ZERO },
        damped: Propagator { uv: mode.p2 * (l2 * t).exp(), w: ZERO },
        wave: Propagator { uv: Matrix2::zeros(), w: (l3 * t).exp() },
    })
}

/// Decomposition of a single wavevector, without a grid.
pub fn decompose_green_at(model: &ModelMatrices, xi: &Wavevector, t: f64) -> Result<GreenParts> {
    decompose_mode(&ModeSpectrum::new(model, xi.norm()), t)
}

/// Spectrum at a single wavevector, without a grid.
pub fn mode_spectrum(model: &ModelMatrices, kappa: f64) -> ModeSpectrum {
    ModeSpectrum::new(model, kappa)
}

/// `λ₁(|ξ|)` on the continued principal branch.
pub fn lambda1(kappa: f64) -> C64 {
    let root = C64::new(1.0 - 4.0 * kappa * kappa, 0.0).sqrt();
    -2.0 * kappa * kappa / (1.0 + root)
}

/// `λ₂(|ξ|)` on the continued principal branch.
pub fn lambda2(kappa: f64) -> C64 {
    let root = C64::new(1.0 - 4.0 * kappa * kappa, 0.0).sqrt();
    -0.5 * (1.0 + root)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkWitness {
    /// Kernel vector of `B` that is an eigenvector of the convection symbol.
    pub kernel_vector: DVector<f64>,
    pub xi: Wavevector,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkReport {
    pub satisfies_sk: bool,
    pub violating_directions: Vec<SkWitness>,
}

/// Searches for vectors `z ∈ ker B` that are eigenvectors of `|ξ|A` for
/// the sampled directions. For isotropic convection the answer does not
/// depend on the direction, but every sample is tested and recorded.
pub fn check_sk(model: &ModelMatrices, directions: &[Wavevector]) -> Result<SkReport> {
    if directions.is_empty() {
        return Err(Error::Config("check_sk needs at least one direction".into()));
    }
    const RANK_TOL: f64 = 1e-10;
    let n = model.dim_state();
    let eig = SymmetricEigen::new(model.a.clone());
    let mut mus: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mus.dedup_by(|a, b| (*a - *b).abs() < RANK_TOL);

    let mut witnesses = Vec::new();
    for xi in directions {
        let kappa = xi.norm();
        if kappa == 0.0 {
            continue;
        }
        for mu in &mus {
            // z ∈ ker B ∩ ker(A - μI)
            let stacked = DMatrix::from_fn(2 * n, n, |r, c| {
                if r < n {
                    model.b[(r, c)]
                } else {
                    model.a[(r - n, c)] - if r - n == c { *mu } else { 0.0 }
                }
            });
            let svd = SVD::new(stacked, false, true);
            let v_t = svd.v_t.expect("requested right singular vectors");
            for (k, sigma) in svd.singular_values.iter().enumerate() {
                if *sigma <= RANK_TOL {
                    let z = v_t.row(k).transpose();
                    witnesses.push(SkWitness { kernel_vector: z, xi: *xi, eigenvalue: kappa * mu });
                }
            }
        }
    }
    Ok(SkReport { satisfies_sk: witnesses.is_empty(), violating_directions: witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn symbol_at_zero_is_source() {
        let model = ModelMatrices::partially_dissipative();
        let e = build_linear_symbol(&model, &Wavevector::zeros());
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(e[(r, c)], C64::new(model.b()[(r, c)], 0.0));
            }
        }
    }

    #[test]
    fn symbol_at_unit_xi() {
        let e = build_linear_symbol(&ModelMatrices::partially_dissipative(), &Wavevector::new(1.0, 0.0, 0.0));
        let expect = [[ZERO, -I, ZERO], [-I, C64::new(-1.0, 0.0), ZERO], [ZERO, ZERO, -I]];
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(e[(r, c)], expect[r][c], "entry ({r},{c})");
            }
        }
    }

    #[test]
    fn symbol_scales_with_norm() {
        let e = build_linear_symbol(&ModelMatrices::partially_dissipative(), &Wavevector::new(0.3, 0.4, 0.0));
        assert!(close(e[(0, 1)], -0.5 * I, 1e-15));
        assert!(close(e[(1, 0)], -0.5 * I, 1e-15));
        assert!(close(e[(2, 2)], -0.5 * I, 1e-15));
        assert!(close(e[(1, 1)], C64::new(-1.0, 0.0), 0.0));
        assert_eq!(e[(0, 0)], ZERO);
    }

    #[test]
    fn eigenvalues_at_zero() {
        let e = build_linear_symbol(&ModelMatrices::partially_dissipative(), &Wavevector::zeros());
        let dec = eigen_decompose(&e).unwrap();
        assert!(close(dec.eigvals[0], ZERO, 1e-15));
        assert!(close(dec.eigvals[1], C64::new(-1.0, 0.0), 1e-15));
        assert!(close(dec.eigvals[2], ZERO, 1e-15));
    }

    #[test]
    fn eigenvalues_at_three_tenths() {
        let e = build_linear_symbol(&ModelMatrices::partially_dissipative(), &Wavevector::new(0.3, 0.0, 0.0));
        let dec = eigen_decompose(&e).unwrap();
        assert!(close(dec.eigvals[0], C64::new(-0.1, 0.0), 1e-14));
        assert!(close(dec.eigvals[1], C64::new(-0.9, 0.0), 1e-14));
        assert!(close(dec.eigvals[2], C64::new(0.0, -0.3), 1e-15));
    }

    #[test]
    fn eigenvectors_match_closed_form() {
        let kappa: f64 = 0.2;
        let e = build_linear_symbol(&ModelMatrices::partially_dissipative(), &Wavevector::new(0.0, kappa, 0.0));
        let dec = eigen_decompose(&e).unwrap();
        let root = (1.0 - 4.0 * kappa * kappa).sqrt();
        let v1 = [ONE, -I * ((1.0 - root) / (2.0 * kappa)), ZERO];
        let v2 = [ONE, -I * ((1.0 + root) / (2.0 * kappa)), ZERO];
        for k in 0..3 {
            assert!(close(dec.eigvecs[0][k], v1[k], 1e-13));
            assert!(close(dec.eigvecs[1][k], v2[k], 1e-13));
        }
        assert_eq!(dec.eigvecs[2][2], ONE);
    }

    #[test]
    fn degenerate_band_is_refused() {
        let e = build_linear_symbol(&ModelMatrices::partially_dissipative(), &Wavevector::new(0.5005, 0.0, 0.0));
        assert!(matches!(eigen_decompose(&e), Err(Error::DegenerateSpectrum { .. })));
        let e = build_linear_symbol(&ModelMatrices::partially_dissipative(), &Wavevector::new(0.502, 0.0, 0.0));
        assert!(eigen_decompose(&e).is_ok());
    }

    #[test]
    fn high_frequency_branch_has_half_damping() {
        let l1 = lambda1(2.0);
        let l2 = lambda2(2.0);
        assert!((l1.re + 0.5).abs() < 1e-14 && (l2.re + 0.5).abs() < 1e-14);
        assert!((l1.im - 15f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((l2.im + 15f64.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_coupled_third_component() {
        let mut e = build_linear_symbol(&ModelMatrices::partially_dissipative(), &Wavevector::new(0.1, 0.0, 0.0));
        e[(0, 2)] = ONE;
        assert!(matches!(eigen_decompose(&e), Err(Error::UnsupportedStructure(_))));
    }

    #[test]
    fn green_at_time_zero_is_identity() {
        let model = ModelMatrices::partially_dissipative();
        for kappa in [0.0, 0.1, 0.4999, 0.7, 3.0] {
            let g = green_function_at(&model, &Wavevector::new(kappa, 0.0, 0.0), 0.0).unwrap();
            assert!((g - DMatrix::identity(3, 3)).camax() < 1e-14);
        }
    }

    #[test]
    fn green_at_zero_frequency() {
        let g = green_function_at(&ModelMatrices::partially_dissipative(), &Wavevector::zeros(), 2.0).unwrap();
        assert!(close(g[(0, 0)], ONE, 1e-15));
        assert!(close(g[(1, 1)], C64::new((-2f64).exp(), 0.0), 1e-15));
        assert!(close(g[(2, 2)], ONE, 1e-15));
        assert!(g[(0, 1)].norm() < 1e-15 && g[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn green_matches_dense_exponential() {
        let model = ModelMatrices::partially_dissipative();
        let xi = Wavevector::new(0.3, 0.0, 0.0);
        let g = green_function_at(&model, &xi, 5.0).unwrap();
        let oracle = (build_linear_symbol(&model, &xi) * C64::new(5.0, 0.0)).exp();
        assert!((g - oracle).camax() < 1e-10);
    }

    #[test]
    fn own_expm_matches_nalgebra() {
        let model = ModelMatrices::partially_dissipative();
        for (kappa, t) in [(0.5, 3.0), (0.4995, 10.0), (2.0, 7.5), (0.01, 40.0)] {
            let e = build_linear_symbol(&model, &Wavevector::new(kappa, 0.0, 0.0)) * C64::new(t, 0.0);
            assert!((expm(&e) - e.clone().exp()).camax() < 1e-12, "kappa {kappa}");
        }
    }

    #[test]
    fn band_edges_agree_with_direct_exponential() {
        let model = ModelMatrices::partially_dissipative();
        for kappa in [0.5 - DEGENERATE_BAND * 1.0001, 0.5 + DEGENERATE_BAND * 1.0001] {
            let spectral = mode_spectrum(&model, kappa);
            assert!(!spectral.degenerate);
            let e = build_linear_symbol(&model, &Wavevector::new(kappa, 0.0, 0.0)) * C64::new(4.0, 0.0);
            let direct = expm(&e);
            let g = spectral.propagator(4.0).to_dense(3);
            assert!((g - direct).camax() < 1e-8, "kappa {kappa}");
        }
    }

    #[test]
    fn decomposition_sums_to_identity_at_zero_time() {
        let model = ModelMatrices::partially_dissipative();
        for kappa in [0.0, 0.05, 0.2, 0.25] {
            let parts = decompose_green_at(&model, &Wavevector::new(kappa, 0.0, 0.0), 0.0).unwrap();
            let sum = parts.diffusive.to_dense(3) + parts.damped.to_dense(3) + parts.wave.to_dense(3);
            assert!((sum - DMatrix::identity(3, 3)).camax() < 1e-13);
        }
    }

    #[test]
    fn wave_part_is_unit_modulus_corner() {
        let parts =
            decompose_green_at(&ModelMatrices::partially_dissipative(), &Wavevector::new(0.2, 0.0, 0.0), 3.7).unwrap();
        let w = parts.wave.to_dense(3);
        for r in 0..3 {
            for c in 0..3 {
                if (r, c) == (2, 2) {
                    assert!((w[(r, c)].norm() - 1.0).abs() < 1e-15);
                } else {
                    assert_eq!(w[(r, c)], ZERO);
                }
            }
        }
    }

    #[test]
    fn diffusive_part_decays_like_heat() {
        let parts =
            decompose_green_at(&ModelMatrices::partially_dissipative(), &Wavevector::new(0.1, 0.0, 0.0), 10.0).unwrap();
        let k = parts.diffusive.to_dense(3);
        let norm = k.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let target = (-0.1f64).exp();
        assert!(norm > target / 2.0 && norm < target * 2.0, "{norm}");
        let exact = (lambda1(0.1) * 10.0).exp().re;
        assert!(
            (parts.diffusive.uv[(0, 0)].norm()
                / mode_spectrum(&ModelMatrices::partially_dissipative(), 0.1).p1[(0, 0)].norm()
                - exact)
                .abs()
                < 1e-14
        );
    }

    #[test]
    fn decomposition_refuses_high_frequency() {
        let r = decompose_green_at(&ModelMatrices::partially_dissipative(), &Wavevector::new(0.3, 0.0, 0.0), 1.0);
        assert!(matches!(r, Err(Error::OutOfBand { .. })));
    }

    #[test]
    fn decomposition_sums_to_green_function() {
        let model = ModelMatrices::partially_dissipative();
        let xi = Wavevector::new(0.12, 0.1, 0.05);
        let parts = decompose_green_at(&model, &xi, 6.0).unwrap();
        let sum = parts.diffusive.to_dense(3) + parts.damped.to_dense(3) + parts.wave.to_dense(3);
        assert!((sum - green_function_at(&model, &xi, 6.0).unwrap()).camax() < 1e-10);
    }

    #[test]
    fn sk_checker_on_model_systems() {
        let dirs = vec![Wavevector::new(1.0, 0.0, 0.0), Wavevector::new(0.0, 0.6, 0.8)];
        let report = check_sk(&ModelMatrices::partially_dissipative(), &dirs).unwrap();
        assert!(!report.satisfies_sk);
        assert_eq!(report.violating_directions.len(), 2);
        let z = &report.violating_directions[0].kernel_vector;
        assert!(z[0].abs() < 1e-12 && z[1].abs() < 1e-12 && (z[2].abs() - 1.0).abs() < 1e-12);

        let report = check_sk(&ModelMatrices::sk_pair(), &dirs).unwrap();
        assert!(report.satisfies_sk && report.violating_directions.is_empty());

        let full =
            ModelMatrices::new(ModelMatrices::partially_dissipative().a().clone(), -DMatrix::identity(3, 3)).unwrap();
        assert!(check_sk(&full, &dirs).unwrap().satisfies_sk);
    }

    #[test]
    fn model_validation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(ModelMatrices::new(a, DMatrix::zeros(2, 2)).is_err());
        let b = DMatrix::identity(2, 2);
        assert!(ModelMatrices::new(ModelMatrices::sk_pair().a().clone(), b).is_err());
    }

    #[test]
    fn cache_matches_pointwise_green() {
        let grid = SpectralGrid::cube(8, 10.0).unwrap();
        let model = ModelMatrices::partially_dissipative();
        let cache = LinearSymbolCache::new(&model, grid).unwrap();
        let all = cache.green_function(2.5);
        for idx in [0, 1, 9, 100, 511] {
            let dense = green_function_at(&model, &grid.wavevector(idx), 2.5).unwrap();
            assert!((all[idx].to_dense(3) - dense).camax() < 1e-12);
        }
    }
}
