//! Scalar Fourier multipliers: `Λ^s`, Riesz transforms, the heat semigroup
//! and the half-wave group, plus the empirical dispersive and fractional
//! integration ratios.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SpectralField, Wavevector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveSign {
    /// `e^{-i|ξ|t}`.
    Plus,
    /// `e^{+i|ξ|t}`.
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MultiplierKind {
    LambdaPower(f64),
    Riesz(usize),
    Heat(f64),
    HalfWave(WaveSign, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroModeRule {
    Zero,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSpec {
    pub kind: MultiplierKind,
    pub zero_mode_rule: ZeroModeRule,
}

impl MultiplierSpec {
    /// Negative powers and Riesz transforms always zero the mean.
    pub fn new(kind: MultiplierKind, zero_mode_rule: ZeroModeRule) -> Self {
        let forced = match kind {
            MultiplierKind::LambdaPower(s) => s < 0.0,
            MultiplierKind::Riesz(_) => true,
            _ => false,
        };
        Self { kind, zero_mode_rule: if forced { ZeroModeRule::Zero } else { zero_mode_rule } }
    }

    pub fn lambda_power(s: f64) -> Self {
        Self::new(MultiplierKind::LambdaPower(s), ZeroModeRule::Keep)
    }

    pub fn riesz(j: usize) -> Self {
        Self::new(MultiplierKind::Riesz(j), ZeroModeRule::Zero)
    }

    pub fn heat(t: f64) -> Self {
        Self::new(MultiplierKind::Heat(t), ZeroModeRule::Keep)
    }

    pub fn half_wave(sign: WaveSign, t: f64) -> Self {
        Self::new(MultiplierKind::HalfWave(sign, t), ZeroModeRule::Keep)
    }

    pub fn symbol(&self, xi: &Wavevector) -> Complex64 {
        let kappa = xi.norm();
        if kappa == 0.0 && self.zero_mode_rule == ZeroModeRule::Zero {
            return ZERO;
        }
        match self.kind {
            MultiplierKind::LambdaPower(s) => {
                if s == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else if kappa == 0.0 {
                    ZERO
                } else {
                    Complex64::new(kappa.powf(s), 0.0)
                }
            }
            MultiplierKind::Riesz(j) => Complex64::new(0.0, -xi[j] / kappa),
            MultiplierKind::Heat(t) => Complex64::new((-kappa * kappa * t).exp(), 0.0),
            MultiplierKind::HalfWave(WaveSign::Plus, t) => Complex64::from_polar(1.0, -kappa * t),
            MultiplierKind::HalfWave(WaveSign::Minus, t) => Complex64::from_polar(1.0, kappa * t),
        }
    }
}

pub fn apply_multiplier(spec: &MultiplierSpec, f: &SpectralField) -> SpectralField {
    f.map_modes(|_, k| spec.symbol(&k))
}

/// `∂^α f` for a multi-index `α`.
pub fn derivative(f: &SpectralField, alpha: [u32; 3]) -> SpectralField {
    f.map_modes(|_, k| (0..3).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (Complex64::i() * k[j]).powu(alpha[j])))
}

fn multi_indices(order: u32, dim: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for a in 0..=order {
        for b in 0..=(order - a) {
            let c = order - a - b;
            if dim == 2 && c > 0 {
                continue;
            }
            out.push([a, b, c]);
        }
    }
    out
}

/// `‖f‖_{Ẇ^{k,1}} = Σ_{|α| = k} ‖∂^α f‖_{L¹}`.
pub fn homogeneous_w1_seminorm(f: &SpectralField, order: u32) -> f64 {
    multi_indices(order, f.grid().dim()).iter().map(|alpha| derivative(f, *alpha).to_physical().lp_norm(1.0)).sum()
}

/// `t |e^{iΛt} f|_{L^∞} / (‖f‖_{Ẇ^{2,1}} + ‖Λf‖_{Ẇ^{1,1}})`.
pub fn dispersive_ratio(t: f64, f: &SpectralField) -> f64 {
    if f.max_abs() == 0.0 {
        return 0.0;
    }
    let evolved = apply_multiplier(&MultiplierSpec::half_wave(WaveSign::Minus, t), f);
    let lambda_f = apply_multiplier(&MultiplierSpec::lambda_power(1.0), f);
    let rhs = homogeneous_w1_seminorm(f, 2) + homogeneous_w1_seminorm(&lambda_f, 1);
    t * evolved.to_physical().max_abs() / rhs
}

/// `‖Λ^{-α} f‖_{L^q} / ‖f‖_{L^p}` with `α = d/p - d/q`.
pub fn fractional_ratio(alpha: f64, p: f64, q: f64, f: &SpectralField) -> Result<f64> {
    let d = f.grid().dim() as f64;
    if !(p > 1.0 && p.is_finite() && q > 1.0 && q.is_finite()) {
        return Err(Error::ExponentMismatch(format!("need 1 < p, q < ∞, got p={p}, q={q}")));
    }
    if (alpha - (d / p - d / q)).abs() > 1e-12 {
        return Err(Error::ExponentMismatch(format!("α = {alpha} but d/p - d/q = {}", d / p - d / q)));
    }
    if !(0.0..d / p).contains(&alpha) {
        return Err(Error::ExponentMismatch(format!("need 0 <= α < d/p, got α={alpha}")));
    }
    let denom = f.to_physical().lp_norm(p);
    if denom == 0.0 {
        return Ok(0.0);
    }
    let g = apply_multiplier(&MultiplierSpec::lambda_power(-alpha), f);
    let g = if alpha == 0.0 { f.clone() } else { g };
    Ok(g.to_physical().lp_norm(q) / denom)
}
