//! Bilinear pseudoproducts `T_m(f, g)^(ξ) = Σ_η m(ξ, η) f̂(ξ - η) ĝ(η)`.
//!
//! Coefficients are Fourier-series coefficients, so the plain lattice sum
//! is the Riemann sum of the continuum integral and `m ≡ 1` reproduces the
//! pointwise product. The sum is periodic: `ξ - η` wraps on the lattice.
//! Both strategies wrap identically, and with dealiasing enabled no wrapped
//! interaction survives.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhysicalField, SpectralField, SpectralGrid, Wavevector};
use crate::symbols::{BilinearSymbol, Multiplier, SeparableTerm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Direct sums above this many symbol evaluations are refused.
pub const DIRECT_COST_CAP: u128 = 2_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    DirectSum,
    SeparableFft,
}

#[derive(Debug, Clone)]
pub struct PseudoproductPlan {
    grid: SpectralGrid,
    symbol: BilinearSymbol,
    strategy: Strategy,
    dealias: bool,
    cost_cap: u128,
}

impl PseudoproductPlan {
    pub fn new(grid: SpectralGrid, symbol: BilinearSymbol, strategy: Strategy, dealias: bool) -> Result<Self> {
        if strategy == Strategy::SeparableFft && !symbol.is_separable() {
            return Err(Error::StrategyUnavailable);
        }
        let symbol = symbol.with_singular_tolerance(1e-6 * grid.max_wavenumber());
        Ok(Self { grid, symbol, strategy, dealias, cost_cap: DIRECT_COST_CAP })
    }

    /// Separable when possible, direct otherwise.
    pub fn auto(grid: SpectralGrid, symbol: BilinearSymbol, dealias: bool) -> Result<Self> {
        let strategy = if symbol.is_separable() { Strategy::SeparableFft } else { Strategy::DirectSum };
        Self::new(grid, symbol, strategy, dealias)
    }

    pub fn with_cost_cap(mut self, cap: u128) -> Self {
        self.cost_cap = cap;
        self
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn symbol(&self) -> &BilinearSymbol {
        &self.symbol
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    pub fn apply(&self, f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
        if *f.grid() != self.grid || *g.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let (f, g) = if self.dealias { (f.clone().dealiased(), g.clone().dealiased()) } else { (f.clone(), g.clone()) };
        let mut out = match self.strategy {
            Strategy::DirectSum => self.direct(&f, &g)?,
            Strategy::SeparableFft => self.separable(&f, &g),
        };
        if self.dealias {
            out.dealias();
        }
        Ok(out)
    }

    /// Number of symbol evaluations a direct sum would need.
    pub fn direct_cost(&self, g: &SpectralField) -> u128 {
        let outputs = if self.dealias {
            let c = self.grid.dealias_cutoff() as u128;
            (2 * c + 1).pow(self.grid.dim() as u32)
        } else {
            self.grid.len() as u128
        };
        let inputs = g
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(i, c)| **c != ZERO && (!self.dealias || self.grid.in_dealias_band(*i)))
            .count() as u128;
        outputs * inputs
    }

    fn direct(&self, f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
        let cost = self.direct_cost(g);
        if cost > self.cost_cap {
            return Err(Error::CostCap { terms: cost, cap: self.cost_cap });
        }
        let grid = self.grid;
        let masked = self.symbol.is_masked();
        let sources: Vec<([i64; 3], Wavevector, Complex64)> = g
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(i, c)| **c != ZERO && !(masked && grid.mode(*i) == [0, 0, 0]))
            .map(|(i, c)| (grid.mode(i), grid.wavevector(i), *c))
            .collect();
        let fc = f.coeffs();
        let dk = grid.dk();
        let coeffs: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .map(|out| {
                let m_out = grid.mode(out);
                if (self.dealias && !grid.in_dealias_band(out)) || (masked && m_out == [0, 0, 0]) {
                    return ZERO;
                }
                let xi = grid.wavevector(out);
                let mut acc = ZERO;
                for (m_eta, eta, gv) in &sources {
                    let zeta_idx = grid.index([m_out[0] - m_eta[0], m_out[1] - m_eta[1], m_out[2] - m_eta[2]]);
                    let fv = fc[zeta_idx];
                    if fv == ZERO {
                        continue;
                    }
                    let m_zeta = grid.mode(zeta_idx);
                    if masked && m_zeta == [0, 0, 0] {
                        continue;
                    }
                    let zeta = Wavevector::new(m_zeta[0] as f64 * dk, m_zeta[1] as f64 * dk, m_zeta[2] as f64 * dk);
                    acc += self.symbol.eval_with_zeta(&xi, &zeta, eta) * fv * gv;
                }
                acc
            })
            .collect();
        Ok(SpectralField::from_coeffs(grid, coeffs).expect("length matches grid"))
    }

    fn separable(&self, f: &SpectralField, g: &SpectralField) -> SpectralField {
        let terms = self.symbol.separable_terms().expect("checked at plan construction");
        let grid = self.grid;

        let mut beta_fields: HashMap<String, PhysicalField> = HashMap::new();
        let mut gamma_fields: HashMap<String, PhysicalField> = HashMap::new();
        let mut by_alpha: Vec<(Multiplier, PhysicalField)> = Vec::new();
        for term in &terms {
            let fb =
                beta_fields.entry(key(&term.beta)).or_insert_with(|| apply_multiplier(f, &term.beta).to_physical());
            let gg =
                gamma_fields.entry(key(&term.gamma)).or_insert_with(|| apply_multiplier(g, &term.gamma).to_physical());
            let slot = match by_alpha.iter().position(|(a, _)| *a == term.alpha) {
                Some(p) => p,
                None => {
                    by_alpha.push((term.alpha.clone(), PhysicalField::zeros(grid)));
                    by_alpha.len() - 1
                }
            };
            let acc = by_alpha[slot].1.values_mut();
            acc.par_iter_mut()
                .zip(fb.values().par_iter().zip(gg.values().par_iter()))
                .for_each(|(a, (x, y))| *a += term.coeff * x * y);
        }

        let mut out = SpectralField::zeros(grid);
        for (alpha, prod) in by_alpha {
            let spec = apply_multiplier(&prod.to_spectral(), &alpha);
            out.axpy(Complex64::new(1.0, 0.0), &spec).expect("same grid");
        }
        if self.symbol.is_masked() {
            remove_singular_lines(&mut out, f, g, &terms);
        }
        out
    }
}

fn key(m: &Multiplier) -> String {
    format!("{:?}", m)
}

fn apply_multiplier(f: &SpectralField, m: &Multiplier) -> SpectralField {
    if m.is_one() {
        return f.clone();
    }
    f.map_modes(|_, k| Complex64::new(m.eval(&k), 0.0))
}

/// Subtracts the `η = 0` and `ξ - η = 0` lattice contributions and clears
/// `ξ = 0`, matching the direct sum's treatment of singular modes.
fn remove_singular_lines(out: &mut SpectralField, f: &SpectralField, g: &SpectralField, terms: &[SeparableTerm]) {
    let grid = *out.grid();
    let origin = grid.index([0, 0, 0]);
    let (f0, g0) = (f[origin], g[origin]);
    let zero = Wavevector::zeros();
    let sep = |xi: &Wavevector, zeta: &Wavevector, eta: &Wavevector| -> Complex64 {
        terms.iter().map(|t| t.eval(xi, zeta, eta)).sum()
    };
    let fc = f.coeffs();
    let gc = g.coeffs();
    out.coeffs_mut().par_iter_mut().enumerate().for_each(|(i, o)| {
        if i == origin {
            *o = ZERO;
            return;
        }
        let xi = grid.wavevector(i);
        if g0 != ZERO && fc[i] != ZERO {
            *o -= sep(&xi, &xi, &zero) * fc[i] * g0;
        }
        if f0 != ZERO && gc[i] != ZERO {
            *o -= sep(&xi, &zero, &xi) * f0 * gc[i];
        }
    });
}

/// `‖⟨∇⟩^σ f‖_{L^p}`.
pub fn bessel_norm(f: &SpectralField, sigma: f64, p: f64) -> f64 {
    if sigma == 0.0 {
        return f.to_physical().lp_norm(p);
    }
    f.map_modes(|_, k| Complex64::new((1.0 + k.norm_squared()).powf(sigma / 2.0), 0.0)).to_physical().lp_norm(p)
}

/// `Λ^k f` with `Λ = |∇|`.
pub fn lambda_power(f: &SpectralField, k: f64) -> SpectralField {
    if k == 0.0 {
        return f.clone();
    }
    f.map_modes(|_, xi| {
        let n = xi.norm();
        if n == 0.0 {
            ZERO
        } else {
            Complex64::new(n.powf(k), 0.0)
        }
    })
}

fn harmonic(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// `‖Λ^k T_m(f,g)‖_{L^r} / (‖f‖_{W^{s+k,p}}‖g‖_{L^q} + ‖f‖_{L^p}‖g‖_{W^{s+k,q}})`.
#[allow(clippy::too_many_arguments)]
pub fn holder_bound_ratio(
    plan: &PseudoproductPlan,
    f: &SpectralField,
    g: &SpectralField,
    s: f64,
    k: f64,
    p: f64,
    q: f64,
    r: f64,
) -> Result<f64> {
    if (harmonic(r) - harmonic(p) - harmonic(q)).abs() > 1e-12 {
        return Err(Error::ExponentMismatch(format!("1/r = 1/p + 1/q fails for p={p}, q={q}, r={r}")));
    }
    if (plan.symbol().degree() - s).abs() > 1e-12 {
        return Err(Error::ExponentMismatch(format!(
            "symbol `{}` has degree {}, bound requested for s = {s}",
            plan.symbol().name(),
            plan.symbol().degree()
        )));
    }
    if f.max_abs() == 0.0 || g.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let lhs = lambda_power(&plan.apply(f, g)?, k).to_physical().lp_norm(r);
    let rhs = bessel_norm(f, s + k, p) * bessel_norm(g, 0.0, q) + bessel_norm(f, 0.0, p) * bessel_norm(g, s + k, q);
    Ok(lhs / rhs)
}

/// Empirical constants of an inequality, one entry per trial.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct BoundLedger {
    pub label: String,
    pub ratios: Vec<f64>,
}

impl BoundLedger {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), ratios: Vec::new() }
    }

    pub fn record(&mut self, ratio: f64) {
        self.ratios.push(ratio);
    }

    pub fn max(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.ratios.iter().all(|r| r.is_finite())
    }

    /// `|max_other / max_self - 1|`.
    pub fn relative_change(&self, other: &Self) -> f64 {
        (other.max() / self.max() - 1.0).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::symbol_preset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: SpectralGrid, band: i64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpectralField::zeros(grid);
        for i in 0..grid.len() {
            if grid.mode(i).iter().all(|m| m.abs() <= band) {
                f[i] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        f
    }

    fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
        a.max_abs_diff(b) / b.max_abs().max(1e-300)
    }

    #[test]
    fn identity_symbol_is_pointwise_product() {
        let grid = SpectralGrid::cube(16, 9.0).unwrap();
        let (f, g) = (random_field(grid, 2, 1), random_field(grid, 2, 2));
        let oracle = f.to_physical().mul(&g.to_physical()).unwrap().to_spectral();
        for strategy in [Strategy::DirectSum, Strategy::SeparableFft] {
            for dealias in [false, true] {
                let plan = PseudoproductPlan::new(grid, BilinearSymbol::one(), strategy, dealias).unwrap();
                assert!(rel(&plan.apply(&f, &g).unwrap(), &oracle) <= 1e-12, "{strategy:?} {dealias}");
            }
        }
    }

    #[test]
    fn laplacian_symbol_matches_multiplier_then_product() {
        let grid = SpectralGrid::cube(16, 12.0).unwrap();
        let f = random_field(grid, 2, 3);
        let g = PhysicalField::from_fn(grid, |x| Complex64::new((-x.norm_squared() / 2.0).exp(), 0.0)).to_spectral();
        let lap_g = g.map_modes(|_, k| Complex64::new(k.norm_squared(), 0.0));
        let oracle = f.to_physical().mul(&lap_g.to_physical()).unwrap().to_spectral();
        for strategy in [Strategy::DirectSum, Strategy::SeparableFft] {
            let plan = PseudoproductPlan::new(grid, BilinearSymbol::eta_squared(), strategy, false).unwrap();
            assert!(rel(&plan.apply(&f, &g).unwrap(), &oracle) <= 1e-12, "{strategy:?}");
        }
    }

    #[test]
    fn single_modes_give_single_output() {
        let grid = SpectralGrid::cube(16, 7.0).unwrap();
        let (k1, k2) = ([1, -2, 0], [2, 1, 3]);
        let f = SpectralField::single_mode(grid, k1, Complex64::new(1.0, 0.0));
        let g = SpectralField::single_mode(grid, k2, Complex64::new(1.0, 0.0));
        for name in ["one", "null_b", "aphi", "mixed", "mu0"] {
            let sym = symbol_preset(name).unwrap();
            let plan = PseudoproductPlan::new(grid, sym.clone(), Strategy::DirectSum, false).unwrap();
            let out = plan.apply(&f, &g).unwrap();
            let target = grid.index([3, -1, 3]);
            let expect = sym.eval(&grid.wavevector(target), &grid.wavevector(grid.index(k2)));
            for i in 0..grid.len() {
                if i == target {
                    assert_eq!(out[i], expect, "{name}");
                } else {
                    assert_eq!(out[i], ZERO, "{name}");
                }
            }
        }
    }

    #[test]
    fn strategies_agree_on_presets() {
        for grid in [SpectralGrid::cube(16, 10.0).unwrap(), SpectralGrid::square(64, 10.0).unwrap()] {
            let (f, g) = (random_field(grid, 5, 4), random_field(grid, 5, 5));
            for name in ["one", "null_b", "aphi", "mixed"] {
                for dealias in [false, true] {
                    let sym = symbol_preset(name).unwrap();
                    let direct = PseudoproductPlan::new(grid, sym.clone(), Strategy::DirectSum, dealias).unwrap();
                    let fast = PseudoproductPlan::new(grid, sym, Strategy::SeparableFft, dealias).unwrap();
                    let (a, b) = (direct.apply(&f, &g).unwrap(), fast.apply(&f, &g).unwrap());
                    assert!(rel(&b, &a) <= 1e-10, "{name} dim {} dealias {dealias}: {}", grid.dim(), rel(&b, &a));
                }
            }
        }
    }

    #[test]
    fn output_support_is_sum_of_bands() {
        let grid = SpectralGrid::cube(16, 10.0).unwrap();
        let (f, g) = (random_field(grid, 2, 6), random_field(grid, 3, 7));
        let plan =
            PseudoproductPlan::new(grid, symbol_preset("mixed").unwrap(), Strategy::SeparableFft, false).unwrap();
        let out = plan.apply(&f, &g).unwrap();
        for i in 0..grid.len() {
            if grid.mode(i).iter().any(|m| m.abs() > 5) {
                assert!(out[i].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn strategy_and_grid_errors() {
        let grid = SpectralGrid::cube(8, 10.0).unwrap();
        let mu0 = symbol_preset("mu0").unwrap();
        assert!(matches!(
            PseudoproductPlan::new(grid, mu0.clone(), Strategy::SeparableFft, true),
            Err(Error::StrategyUnavailable)
        ));
        let plan = PseudoproductPlan::new(grid, mu0, Strategy::DirectSum, false).unwrap();
        let other = SpectralField::zeros(SpectralGrid::cube(8, 11.0).unwrap());
        let f = random_field(grid, 3, 1);
        assert!(matches!(plan.apply(&f, &other), Err(Error::GridMismatch)));
        let capped = plan.with_cost_cap(1000);
        assert!(matches!(capped.apply(&f, &f), Err(Error::CostCap { .. })));
    }

    #[test]
    fn holder_ratio_for_products() {
        let grid = SpectralGrid::cube(16, 10.0).unwrap();
        let plan = PseudoproductPlan::new(grid, BilinearSymbol::one(), Strategy::SeparableFft, true).unwrap();
        let (f, g) = (random_field(grid, 2, 8), random_field(grid, 2, 9));
        let ratio = holder_bound_ratio(&plan, &f, &g, 0.0, 0.0, 4.0, 4.0, 2.0).unwrap();
        assert!(ratio > 0.0 && ratio <= 1.0);
        let zero = SpectralField::zeros(grid);
        assert_eq!(holder_bound_ratio(&plan, &zero, &zero, 0.0, 0.0, 4.0, 4.0, 2.0).unwrap(), 0.0);
        assert!(matches!(holder_bound_ratio(&plan, &f, &g, 0.0, 0.0, 4.0, 4.0, 3.0), Err(Error::ExponentMismatch(_))));
        assert!(matches!(holder_bound_ratio(&plan, &f, &g, 1.0, 0.0, 4.0, 4.0, 2.0), Err(Error::ExponentMismatch(_))));
    }

    #[test]
    fn ledger_statistics() {
        let mut a = BoundLedger::new("a");
        let mut b = BoundLedger::new("b");
        for r in [0.2, 0.5, 0.4] {
            a.record(r);
            b.record(r * 1.1);
        }
        assert_eq!(a.max(), 0.5);
        assert!((a.relative_change(&b) - 0.1).abs() < 1e-12);
        assert!(a.all_finite());
    }
}
