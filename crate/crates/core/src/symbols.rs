//! Phases, resonant sets and bilinear symbols `m(ξ, η)`.
//!
//! Symbols are evaluated at `(ξ, η)` with `ζ = ξ - η` the frequency of the
//! first argument of the pseudoproduct. A symbol is a sum of parts, each
//! homogeneous of its own degree; a part may also carry a separable form
//! `Σ_k c_k α_k(ξ) β_k(ζ) γ_k(η)` used by the FFT path.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Wavevector;
use crate::spectra::lambda1;

pub type C64 = Complex64;

pub const TOL_TIME: f64 = 1e-9;
pub const TOL_SPACE: f64 = 1e-9;
/// Relative singular-set radius; grids scale it by their largest `|ξ|`.
pub const SINGULAR_RELATIVE_TOL: f64 = 1e-6;

fn unit(k: &Wavevector) -> Wavevector {
    let n = k.norm();
    if n == 0.0 {
        Wavevector::zeros()
    } else {
        k / n
    }
}

/// `φ_w(ξ, η) = |ξ| - |ξ - η| - |η|`.
pub fn wave_phase(xi: &Wavevector, eta: &Wavevector) -> f64 {
    xi.norm() - (xi - eta).norm() - eta.norm()
}

/// `∇_η φ_w = (ξ-η)/|ξ-η| - η/|η|`.
pub fn wave_phase_grad_eta(xi: &Wavevector, eta: &Wavevector) -> Wavevector {
    unit(&(xi - eta)) - unit(eta)
}

/// `∇_ξ φ = ξ/|ξ| - (ξ-η)/|ξ-η|`, shared by both phases.
pub fn phase_grad_xi(xi: &Wavevector, eta: &Wavevector) -> Wavevector {
    unit(xi) - unit(&(xi - eta))
}

/// `φ(ξ, η) = |ξ| - |ξ - η| - iλ₁(|η|)`; for `|η| <= 1/2` the last term is
/// `2i|η|²/(1 + sqrt(1 - 4|η|²))`, above it the continued branch with
/// imaginary part `1/2`.
pub fn dissipative_phase(xi: &Wavevector, eta: &Wavevector) -> C64 {
    C64::new(xi.norm() - (xi - eta).norm(), 0.0) - C64::i() * lambda1(eta.norm())
}

pub fn dissipative_phase_grad_eta(xi: &Wavevector, eta: &Wavevector) -> [C64; 3] {
    let kappa = eta.norm();
    let zeta_hat = unit(&(xi - eta));
    // dλ₁/dκ = -2κ / sqrt(1 - 4κ²)
    let slope = if kappa == 0.0 { C64::new(0.0, 0.0) } else { -2.0 / C64::new(1.0 - 4.0 * kappa * kappa, 0.0).sqrt() };
    std::array::from_fn(|j| C64::new(zeta_hat[j], 0.0) - C64::i() * slope * eta[j])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Wave,
    Dissipative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub kind: PhaseKind,
}

impl Phase {
    pub fn wave() -> Self {
        Self { kind: PhaseKind::Wave }
    }

    pub fn dissipative() -> Self {
        Self { kind: PhaseKind::Dissipative }
    }

    pub fn eval(&self, xi: &Wavevector, eta: &Wavevector) -> C64 {
        match self.kind {
            PhaseKind::Wave => C64::new(wave_phase(xi, eta), 0.0),
            PhaseKind::Dissipative => dissipative_phase(xi, eta),
        }
    }

    pub fn gradient_eta(&self, xi: &Wavevector, eta: &Wavevector) -> [C64; 3] {
        match self.kind {
            PhaseKind::Wave => {
                let g = wave_phase_grad_eta(xi, eta);
                std::array::from_fn(|j| C64::new(g[j], 0.0))
            }
            PhaseKind::Dissipative => dissipative_phase_grad_eta(xi, eta),
        }
    }

    pub fn gradient_xi(&self, xi: &Wavevector, eta: &Wavevector) -> [C64; 3] {
        let g = phase_grad_xi(xi, eta);
        std::array::from_fn(|j| C64::new(g[j], 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceSample {
    pub xi: Wavevector,
    pub eta: Wavevector,
    pub phase_value: C64,
    pub eta_gradient_norm: f64,
    pub time_resonant: bool,
    pub space_resonant: bool,
}

fn check_singular(xi: &Wavevector, eta: &Wavevector, tol: f64) -> Result<()> {
    for (which, k) in [("|xi|", *xi), ("|xi - eta|", xi - eta), ("|eta|", *eta)] {
        let norm = k.norm();
        if norm < tol {
            return Err(Error::SingularPoint { which, norm, tol });
        }
    }
    Ok(())
}

pub fn classify_resonance(
    phase: &Phase,
    xi: &Wavevector,
    eta: &Wavevector,
    tol_t: f64,
    tol_s: f64,
    singular_tol: f64,
) -> Result<ResonanceSample> {
    check_singular(xi, eta, singular_tol)?;
    let phase_value = phase.eval(xi, eta);
    let eta_gradient_norm = phase.gradient_eta(xi, eta).iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
    Ok(ResonanceSample {
        xi: *xi,
        eta: *eta,
        phase_value,
        eta_gradient_norm,
        time_resonant: phase_value.norm() <= tol_t,
        space_resonant: eta_gradient_norm <= tol_s,
    })
}

/// `|k|^power · Π_j k_{units[j]}/|k|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    pub power: f64,
    pub units: Vec<usize>,
}

impl Multiplier {
    pub fn one() -> Self {
        Self { power: 0.0, units: Vec::new() }
    }

    pub fn norm_power(power: f64) -> Self {
        Self { power, units: Vec::new() }
    }

    pub fn unit_component(j: usize) -> Self {
        Self { power: 0.0, units: vec![j] }
    }

    pub fn is_one(&self) -> bool {
        self.power == 0.0 && self.units.is_empty()
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut units = self.units.clone();
        units.extend_from_slice(&other.units);
        units.sort_unstable();
        Self { power: self.power + other.power, units }
    }

    /// Value at `k`; at `k = 0` constants give 1 and everything else 0.
    #[inline]
    pub fn eval(&self, k: &Wavevector) -> f64 {
        if self.is_one() {
            return 1.0;
        }
        let n = k.norm();
        if n == 0.0 {
            return 0.0;
        }
        let radial = if self.power == 0.0 {
            1.0
        } else if self.power == 1.0 {
            n
        } else if self.power == 2.0 {
            n * n
        } else {
            n.powf(self.power)
        };
        self.units.iter().fold(radial, |acc, j| acc * k[*j] / n)
    }
}

/// `c · α(ξ) β(ξ - η) γ(η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTerm {
    pub coeff: C64,
    pub alpha: Multiplier,
    pub beta: Multiplier,
    pub gamma: Multiplier,
}

impl SeparableTerm {
    pub fn new(coeff: f64, alpha: Multiplier, beta: Multiplier, gamma: Multiplier) -> Self {
        Self { coeff: C64::new(coeff, 0.0), alpha, beta, gamma }
    }

    pub fn eval(&self, xi: &Wavevector, zeta: &Wavevector, eta: &Wavevector) -> C64 {
        self.coeff * (self.alpha.eval(xi) * self.beta.eval(zeta) * self.gamma.eval(eta))
    }

    fn product(&self, other: &Self) -> Self {
        Self {
            coeff: self.coeff * other.coeff,
            alpha: self.alpha.product(&other.alpha),
            beta: self.beta.product(&other.beta),
            gamma: self.gamma.product(&other.gamma),
        }
    }
}

type Evaluator = Arc<dyn Fn(&Wavevector, &Wavevector, &Wavevector) -> C64 + Send + Sync>;

#[derive(Clone)]
pub struct SymbolPart {
    pub degree: f64,
    evaluator: Evaluator,
    terms: Option<Vec<SeparableTerm>>,
}

impl SymbolPart {
    pub fn eval(&self, xi: &Wavevector, eta: &Wavevector) -> C64 {
        (self.evaluator)(xi, &(xi - eta), eta)
    }

    pub fn terms(&self) -> Option<&[SeparableTerm]> {
        self.terms.as_deref()
    }
}

#[derive(Clone)]
pub struct BilinearSymbol {
    name: String,
    parts: Vec<SymbolPart>,
    masked: bool,
    singular_set_tolerance: f64,
}

impl fmt::Debug for BilinearSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BilinearSymbol")
            .field("name", &self.name)
            .field("degrees", &self.degrees())
            .field("separable", &self.is_separable())
            .field("masked", &self.masked)
            .finish()
    }
}

impl BilinearSymbol {
    /// Symbol given by a closed-form evaluator of `(ξ, ζ, η)`.
    ///
    /// `masked` symbols are treated as undefined on the singular rays, so
    /// lattice points with `ξ`, `ζ` or `η` equal to zero contribute nothing.
    pub fn from_fn<F>(name: impl Into<String>, degree: f64, masked: bool, f: F) -> Self
    where
        F: Fn(&Wavevector, &Wavevector, &Wavevector) -> C64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            parts: vec![SymbolPart { degree, evaluator: Arc::new(f), terms: None }],
            masked,
            singular_set_tolerance: SINGULAR_RELATIVE_TOL,
        }
    }

    /// Adds a separable form to a single-part symbol.
    pub fn with_terms(mut self, terms: Vec<SeparableTerm>) -> Self {
        assert_eq!(self.parts.len(), 1, "with_terms applies to single-part symbols");
        self.parts[0].terms = Some(terms);
        self
    }

    pub fn with_singular_tolerance(mut self, tol: f64) -> Self {
        self.singular_set_tolerance = tol;
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// `m ≡ c`, degree 0 and regular everywhere.
    pub fn constant(c: f64) -> Self {
        let value = C64::new(c, 0.0);
        Self::from_fn(format!("const({c})"), 0.0, false, move |_, _, _| value).with_terms(vec![SeparableTerm::new(
            c,
            Multiplier::one(),
            Multiplier::one(),
            Multiplier::one(),
        )])
    }

    pub fn one() -> Self {
        Self::constant(1.0).renamed("one")
    }

    pub fn zero() -> Self {
        Self::constant(0.0).renamed("zero")
    }

    /// `|η|²`, regular.
    pub fn eta_squared() -> Self {
        Self::from_fn("eta_squared", 2.0, false, |_, _, eta| C64::new(eta.norm_squared(), 0.0)).with_terms(vec![
            SeparableTerm::new(1.0, Multiplier::one(), Multiplier::one(), Multiplier::norm_power(2.0)),
        ])
    }

    /// `c·|ξ|^p_ξ |ζ|^p_ζ |η|^p_η`.
    pub fn monomial(c: f64, p_xi: f64, p_zeta: f64, p_eta: f64) -> Self {
        let term = SeparableTerm::new(
            c,
            Multiplier::norm_power(p_xi),
            Multiplier::norm_power(p_zeta),
            Multiplier::norm_power(p_eta),
        );
        let t = term.clone();
        let masked = [p_xi, p_zeta, p_eta].iter().any(|p| *p < 0.0);
        Self::from_fn(
            format!("monomial({c},{p_xi},{p_zeta},{p_eta})"),
            p_xi + p_zeta + p_eta,
            masked,
            move |x, z, e| t.eval(x, z, e),
        )
        .with_terms(vec![term])
    }

    /// `ξ_j/|ξ|`, degree 0.
    pub fn xi_unit(j: usize) -> Self {
        Self::from_fn(format!("xi_unit({j})"), 0.0, true, move |x, _, _| C64::new(unit(x)[j], 0.0)).with_terms(vec![
            SeparableTerm::new(1.0, Multiplier::unit_component(j), Multiplier::one(), Multiplier::one()),
        ])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parts(&self) -> &[SymbolPart] {
        &self.parts
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.parts.iter().map(|p| p.degree).collect()
    }

    /// Dominant declared degree.
    pub fn degree(&self) -> f64 {
        self.parts.iter().map(|p| p.degree).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_masked(&self) -> bool {
        self.masked
    }

    pub fn singular_set_tolerance(&self) -> f64 {
        self.singular_set_tolerance
    }

    pub fn is_separable(&self) -> bool {
        self.parts.iter().all(|p| p.terms.is_some())
    }

    pub fn separable_terms(&self) -> Option<Vec<SeparableTerm>> {
        let mut all = Vec::new();
        for p in &self.parts {
            all.extend(p.terms.as_ref()?.iter().cloned());
        }
        Some(all)
    }

    #[inline]
    pub fn eval_with_zeta(&self, xi: &Wavevector, zeta: &Wavevector, eta: &Wavevector) -> C64 {
        self.parts.iter().map(|p| (p.evaluator)(xi, zeta, eta)).sum()
    }

    pub fn eval(&self, xi: &Wavevector, eta: &Wavevector) -> C64 {
        self.eval_with_zeta(xi, &(xi - eta), eta)
    }

    /// Evaluation that refuses points within the singular-set radius.
    pub fn eval_checked(&self, xi: &Wavevector, eta: &Wavevector) -> Result<C64> {
        if self.masked {
            check_singular(xi, eta, self.singular_set_tolerance)?;
        }
        Ok(self.eval(xi, eta))
    }

    /// Sum of the separable terms at a point.
    pub fn eval_separable(&self, xi: &Wavevector, eta: &Wavevector) -> Option<C64> {
        let zeta = xi - eta;
        let terms = self.separable_terms()?;
        Some(terms.iter().map(|t| t.eval(xi, &zeta, eta)).sum())
    }

    /// Part-wise homogeneity check at the standard dilations.
    pub fn check_homogeneity(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for part in &self.parts {
            for _ in 0..samples {
                let (xi, eta) = (random_vector(&mut rng, 0.2, 2.0), random_vector(&mut rng, 0.2, 2.0));
                if (xi - eta).norm() < 0.05 {
                    continue;
                }
                let base = part.eval(&xi, &eta).norm();
                for lambda in [0.5, 2.0, 7.0] {
                    let scaled = part.eval(&(xi * lambda), &(eta * lambda)).norm();
                    let expect = lambda.powf(part.degree) * base;
                    if (scaled - expect).abs() > 1e-8 * expect.max(1e-300) && (scaled - expect).abs() > 1e-14 {
                        return Err(Error::DegreeMismatch(format!(
                            "`{}` part declared degree {} but |m(λξ,λη)| = {scaled:.6e} vs λ^s|m| = {expect:.6e} at λ = {lambda}",
                            self.name, part.degree
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn random_vector(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Wavevector {
    loop {
        let v = Wavevector::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n * rng.random_range(lo..hi);
        }
    }
}

/// Separable terms of `φ_w`.
fn wave_phase_terms() -> Vec<SeparableTerm> {
    let one = Multiplier::one;
    vec![
        SeparableTerm::new(1.0, Multiplier::norm_power(1.0), one(), one()),
        SeparableTerm::new(-1.0, one(), Multiplier::norm_power(1.0), one()),
        SeparableTerm::new(-1.0, one(), one(), Multiplier::norm_power(1.0)),
    ]
}

/// Separable terms of `(∇_η φ_w)_j`.
fn wave_gradient_terms(j: usize) -> Vec<SeparableTerm> {
    let one = Multiplier::one;
    vec![
        SeparableTerm::new(1.0, one(), Multiplier::unit_component(j), one()),
        SeparableTerm::new(-1.0, one(), one(), Multiplier::unit_component(j)),
    ]
}

fn products(a: &[SeparableTerm], b: &[SeparableTerm]) -> Vec<SeparableTerm> {
    a.iter().flat_map(|x| b.iter().map(move |y| x.product(y))).filter(|t| t.coeff != C64::new(0.0, 0.0)).collect()
}

/// `m = a φ_w + b · ∇_η φ_w` with `a ∈ ℬ₁` and `b ∈ (ℬ₀)³`.
///
/// `a = None` or `b` empty drops the corresponding part.
pub fn make_nonresonant_symbol(a: Option<&BilinearSymbol>, b: &[BilinearSymbol]) -> Result<BilinearSymbol> {
    if let Some(a) = a {
        if a.parts.iter().any(|p| p.degree != 1.0) {
            return Err(Error::DegreeMismatch(format!("a = `{}` must be homogeneous of degree 1", a.name)));
        }
        a.check_homogeneity(64, 0xa11ce)?;
    }
    if !(b.is_empty() || b.len() == 3) {
        return Err(Error::DegreeMismatch(format!("b must have 3 components, got {}", b.len())));
    }
    for bj in b {
        if bj.parts.iter().any(|p| p.degree != 0.0) {
            return Err(Error::DegreeMismatch(format!("b component `{}` must be homogeneous of degree 0", bj.name)));
        }
        bj.check_homogeneity(64, 0xb0b)?;
    }

    let mut parts = Vec::new();
    let mut names = Vec::new();
    if let Some(a) = a {
        let inner = a.clone();
        let terms = a.separable_terms().map(|t| products(&t, &wave_phase_terms()));
        parts.push(SymbolPart {
            degree: 2.0,
            evaluator: Arc::new(move |x, z, e| inner.eval_with_zeta(x, z, e) * (x.norm() - z.norm() - e.norm())),
            terms,
        });
        names.push(format!("({})·phi", a.name));
    }
    let b_nonzero: Vec<(usize, BilinearSymbol)> =
        b.iter().enumerate().filter(|(_, bj)| bj.name != "zero").map(|(j, bj)| (j, bj.clone())).collect();
    if !b_nonzero.is_empty() {
        let mut terms = Some(Vec::new());
        for (j, bj) in &b_nonzero {
            match (terms.as_mut(), bj.separable_terms()) {
                (Some(acc), Some(t)) => acc.extend(products(&t, &wave_gradient_terms(*j))),
                _ => terms = None,
            }
        }
        let comps = b_nonzero.clone();
        parts.push(SymbolPart {
            degree: 0.0,
            evaluator: Arc::new(move |x, z, e| {
                let g = unit(z) - unit(e);
                comps.iter().map(|(j, bj)| bj.eval_with_zeta(x, z, e) * g[*j]).sum()
            }),
            terms,
        });
        names.push(format!(
            "b·grad_phi[{}]",
            b_nonzero.iter().map(|(_, bj)| bj.name.clone()).collect::<Vec<_>>().join(",")
        ));
    }
    if parts.is_empty() {
        return Ok(BilinearSymbol::zero());
    }
    Ok(BilinearSymbol { name: names.join(" + "), parts, masked: true, singular_set_tolerance: SINGULAR_RELATIVE_TOL })
}

/// `μ₀(ξ, η) = (∂_{ξ₁} φ) |ξ - η| / (iφ + 1/s)` with the dissipative phase.
///
/// The vector-valued quotient is reduced to its first component.
pub fn mu0_symbol(s: f64) -> Result<BilinearSymbol> {
    if s.is_nan() || s < 1.0 {
        return Err(Error::Config(format!("mu0 needs s >= 1, got {s}")));
    }
    let inv_s = 1.0 / s;
    Ok(BilinearSymbol::from_fn("mu0", 0.0, true, move |x, z, e| {
        let numerator = (unit(x)[0] - unit(z)[0]) * z.norm();
        let phi = C64::new(x.norm() - z.norm(), 0.0) - C64::i() * lambda1(e.norm());
        numerator / (C64::i() * phi + inv_s)
    }))
}

pub const SYMBOL_PRESETS: [&str; 5] = ["one", "null_b", "aphi", "mixed", "mu0"];

/// Named symbol presets.
pub fn symbol_preset(name: &str) -> Result<BilinearSymbol> {
    let unit_b = || [BilinearSymbol::one(), BilinearSymbol::zero(), BilinearSymbol::zero()];
    let sym = match name {
        "one" => BilinearSymbol::one(),
        "null_b" => make_nonresonant_symbol(None, &unit_b())?,
        "aphi" => make_nonresonant_symbol(Some(&BilinearSymbol::monomial(1.0, 1.0, 0.0, 0.0)), &[])?,
        "mixed" => {
            let a = BilinearSymbol::monomial(0.5, 0.0, 0.0, 1.0);
            let b = [BilinearSymbol::xi_unit(0), BilinearSymbol::xi_unit(1), BilinearSymbol::xi_unit(2)];
            make_nonresonant_symbol(Some(&a), &b)?
        }
        "mu0" => mu0_symbol(1.0)?,
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(sym.renamed(name))
}

/// Random points of the space-time resonant set `η = sξ`, `s ∈ (0, 1)`.
pub fn sample_space_time_resonant(count: usize, seed: u64) -> Vec<(Wavevector, Wavevector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let xi = random_vector(&mut rng, 0.1, 3.0);
            let s = rng.random_range(0.02..0.98);
            (xi, xi * s)
        })
        .collect()
}

/// `max |m| / scale` over sampled points of `ℛ`, with scale `max_part |ξ|^deg`.
pub fn max_on_resonant_set(symbol: &BilinearSymbol, count: usize, seed: u64) -> f64 {
    sample_space_time_resonant(count, seed)
        .iter()
        .map(|(xi, eta)| {
            let scale = symbol.parts.iter().map(|p| xi.norm().powf(p.degree)).fold(0.0, f64::max);
            symbol.eval(xi, eta).norm() / scale
        })
        .fold(0.0, f64::max)
}

/// `min over samples of |φ| - |η|²/2` for the dissipative phase on
/// `|η| ∈ [lo, hi]`; positive means no time resonances there.
pub fn dissipative_margin(count: usize, lo: f64, hi: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let eta = random_vector(&mut rng, lo, hi);
            // half the samples on the collinear set where the real part vanishes
            let xi = if k % 2 == 0 { eta * rng.random_range(1.05..4.0) } else { random_vector(&mut rng, 0.01, 3.0) };
            dissipative_phase(&xi, &eta).norm() - 0.5 * eta.norm_squared()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `sup |m|` in the regime `|ξ| ≪ 1`, `|ξ - η|, |η| ≈ 1`.
pub fn low_output_bound(symbol: &BilinearSymbol, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let xi = random_vector(&mut rng, 1e-3, 0.05);
            let eta = random_vector(&mut rng, 0.8, 1.2);
            symbol.eval(&xi, &eta).norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Wavevector {
        Wavevector::new(x, y, z)
    }

    #[test]
    fn wave_phase_examples() {
        let xi = v(1.0, 0.0, 0.0);
        assert_eq!(wave_phase(&xi, &(xi / 2.0)), 0.0);
        assert!((wave_phase(&xi, &v(0.0, 1.0, 0.0)) + 2f64.sqrt()).abs() < 1e-15);
        let (a, b) = (v(0.3, -1.2, 0.7), v(-0.4, 0.1, 0.9));
        assert!((wave_phase(&(a * 2.0), &(b * 2.0)) - 2.0 * wave_phase(&a, &b)).abs() < 1e-14);
    }

    #[test]
    fn dissipative_phase_examples() {
        assert_eq!(dissipative_phase(&v(0.4, 0.1, 0.0), &Wavevector::zeros()), C64::new(0.0, 0.0));
        let eta = v(0.1, 0.0, 0.0);
        let phi = dissipative_phase(&eta, &eta);
        assert!((phi.im - 0.02 / (1.0 + 0.96f64.sqrt())).abs() < 1e-15);
        assert!((phi.im - 0.010102).abs() < 1e-6);
        let near = dissipative_phase(&v(1.0, 0.0, 0.0), &v(0.5 - 1e-12, 0.0, 0.0));
        assert!((near.im - 0.5).abs() < 1e-5);
        let above = dissipative_phase(&v(1.0, 0.0, 0.0), &v(0.9, 0.0, 0.0));
        assert!((above.im - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dissipative_phase_is_quadratic_at_low_frequency() {
        for kappa in [0.01, 0.05, 0.1, 0.2] {
            let eta = v(0.0, kappa, 0.0);
            let im = dissipative_phase(&v(1.0, 0.3, 0.0), &eta).im;
            assert!((im - kappa * kappa).abs() / (kappa * kappa) <= 4.0 * kappa * kappa);
        }
    }

    #[test]
    fn classification_examples() {
        let xi = v(1.0, 0.0, 0.0);
        let wave = Phase::wave();
        let s = classify_resonance(&wave, &xi, &v(0.3, 0.0, 0.0), TOL_TIME, TOL_SPACE, 1e-6).unwrap();
        assert!(s.time_resonant && s.space_resonant);
        let s = classify_resonance(&wave, &xi, &v(0.0, 1.0, 0.0), TOL_TIME, TOL_SPACE, 1e-6).unwrap();
        assert!(!s.time_resonant && !s.space_resonant);
        let eta = v(0.1, 0.0, 0.0);
        let s = classify_resonance(&Phase::dissipative(), &(eta * 3.0), &eta, TOL_TIME, TOL_SPACE, 1e-6).unwrap();
        assert!(!s.time_resonant);
        assert!(s.phase_value.norm() >= 0.01);
        let err = classify_resonance(&wave, &xi, &Wavevector::zeros(), TOL_TIME, TOL_SPACE, 1e-6);
        assert!(matches!(err, Err(Error::SingularPoint { which: "|eta|", .. })));
        assert!(classify_resonance(&wave, &xi, &xi, TOL_TIME, TOL_SPACE, 1e-6).is_err());
    }

    fn fd_gradient(f: impl Fn(&Wavevector) -> C64, at: &Wavevector) -> [C64; 3] {
        let h = 1e-5;
        std::array::from_fn(|j| {
            let mut e = Wavevector::zeros();
            e[j] = h;
            (f(&(at + e)) - f(&(at - e))) / (2.0 * h)
        })
    }

    #[test]
    fn gradients_match_finite_differences() {
        let pts = [(v(1.0, 0.2, -0.3), v(0.1, 0.3, 0.05)), (v(-0.4, 0.8, 0.1), v(0.2, -0.1, 0.25))];
        for phase in [Phase::wave(), Phase::dissipative()] {
            for (xi, eta) in &pts {
                let ge = phase.gradient_eta(xi, eta);
                let fd = fd_gradient(|e| phase.eval(xi, e), eta);
                let gx = phase.gradient_xi(xi, eta);
                let fdx = fd_gradient(|x| phase.eval(x, eta), xi);
                for j in 0..3 {
                    assert!((ge[j] - fd[j]).norm() <= 1e-6 * ge[j].norm().max(1.0), "{phase:?} eta {j}");
                    assert!((gx[j] - fdx[j]).norm() <= 1e-6 * gx[j].norm().max(1.0), "{phase:?} xi {j}");
                }
            }
        }
    }

    #[test]
    fn nonresonant_examples() {
        let null = symbol_preset("null_b").unwrap();
        let xi = v(0.7, 0.2, -0.4);
        assert!(null.eval(&xi, &(xi / 2.0)).norm() < 1e-15);
        let eta = v(0.1, 0.9, 0.3);
        let expect = wave_phase_grad_eta(&xi, &eta)[0];
        assert!((null.eval(&xi, &eta).re - expect).abs() < 1e-15);

        let bad = make_nonresonant_symbol(Some(&BilinearSymbol::one()), &[]);
        assert!(matches!(bad, Err(Error::DegreeMismatch(_))));
        let lying = BilinearSymbol::from_fn("lying", 1.0, false, |_, _, _| C64::new(1.0, 0.0));
        assert!(matches!(make_nonresonant_symbol(Some(&lying), &[]), Err(Error::DegreeMismatch(_))));

        let aphi = symbol_preset("aphi").unwrap();
        for s in [0.1, 0.5, 0.9] {
            assert!(aphi.eval(&xi, &(xi * s)).norm() < 1e-15);
        }
        assert!((aphi.eval(&xi, &eta).re - xi.norm() * wave_phase(&xi, &eta)).abs() < 1e-14);
    }

    #[test]
    fn presets_vanish_on_resonant_set() {
        for name in ["null_b", "aphi", "mixed"] {
            let m = symbol_preset(name).unwrap();
            assert!(max_on_resonant_set(&m, 1000, 7) <= 1e-12, "{name}");
        }
    }

    #[test]
    fn presets_are_homogeneous() {
        for name in SYMBOL_PRESETS.iter().filter(|n| **n != "mu0") {
            symbol_preset(name).unwrap().check_homogeneity(200, 3).unwrap();
        }
    }

    #[test]
    fn separable_forms_match_evaluators() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in ["one", "null_b", "aphi", "mixed"] {
            let m = symbol_preset(name).unwrap();
            assert!(m.is_separable());
            for _ in 0..1000 {
                let (xi, eta) = (random_vector(&mut rng, 0.05, 3.0), random_vector(&mut rng, 0.05, 3.0));
                let direct = m.eval(&xi, &eta);
                let sep = m.eval_separable(&xi, &eta).unwrap();
                assert!((direct - sep).norm() <= 1e-10 * direct.norm().max(1e-3), "{name}");
            }
        }
        assert!(!symbol_preset("mu0").unwrap().is_separable());
    }

    #[test]
    fn mu0_examples() {
        let m = mu0_symbol(1.0).unwrap();
        let xi = v(0.05, 0.0, 0.0);
        assert!(m.eval(&xi, &v(-0.25, 0.0, 0.0)).norm() < 1e-15);
        let far = mu0_symbol(1e12).unwrap();
        let (xi, eta) = (v(0.02, 0.01, 0.0), v(0.0, 0.3, 0.0));
        let denom = C64::i() * dissipative_phase(&xi, &eta);
        assert!(denom.re.abs() >= 0.1 - 1e-12);
        assert!(far.eval(&xi, &eta).norm().is_finite());
        let base = m.eval(&xi, &eta);
        for lambda in [0.999, 1.001] {
            assert!((m.eval(&(xi * lambda), &(eta * lambda)) - base).norm() < 1e-2);
        }
        let bound = low_output_bound(&m, 2000, 5);
        assert!(bound.is_finite() && bound < 10.0, "{bound}");
        assert!(mu0_symbol(0.5).is_err());
    }

    #[test]
    fn dissipative_phase_has_no_time_resonance() {
        assert!(dissipative_margin(1000, 0.05, 0.45, 9) > 0.0);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(symbol_preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn multiplier_zero_convention() {
        assert_eq!(Multiplier::one().eval(&Wavevector::zeros()), 1.0);
        assert_eq!(Multiplier::unit_component(1).eval(&Wavevector::zeros()), 0.0);
        assert_eq!(Multiplier::norm_power(2.0).eval(&v(0.0, 3.0, 4.0)), 25.0);
    }
}
