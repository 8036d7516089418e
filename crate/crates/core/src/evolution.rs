//! Integrating-factor Runge–Kutta time stepping of the model systems.
//!
//! The linear part `E(iξ)` is propagated exactly per mode; the quadratic
//! sources are evaluated as dealiased physical-space products and
//! pseudoproducts. The operators `i|ξ|` do not preserve real-valued fields,
//! so the state is complex in physical space.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhysicalField, SpectralField, SpectralGrid};
use crate::pseudoproduct::{PseudoproductPlan, Strategy};
use crate::spectra::{LinearSymbolCache, ModelMatrices, Propagator};
use crate::symbols::BilinearSymbol;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Initial time of every run.
pub const INITIAL_TIME: f64 = 1.0;

/// Runs abort when `‖U‖_{H^N}` exceeds this multiple of its initial value.
pub const BLOW_UP_FACTOR: f64 = 1e3;

/// Sobolev index used by the blow-up guard.
pub const GUARD_SOBOLEV_INDEX: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PkSystem,
    KSystem,
    PkSystemW,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `d_v uw` in the `v` equation.
    Uw,
    /// `d_v vw` in the `v` equation.
    VwInV,
    /// `d_v vw` in the `u` equation.
    VwInU,
    /// `d_v vw` in the `w` equation.
    VwInW,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Coefficients {
    pub a_u: f64,
    pub b_u: f64,
    pub c_u: f64,
    pub a_v: f64,
    pub b_v: f64,
    pub c_v: f64,
    pub d_v: f64,
}

impl Coefficients {
    pub fn is_zero(&self) -> bool {
        [self.a_u, self.b_u, self.c_u, self.a_v, self.b_v, self.c_v, self.d_v].iter().all(|c| *c == 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub coefficients: Coefficients,
    pub coupling: Coupling,
    /// Symbol of the `T_m(w, w)` source; `None` drops it.
    pub w_symbol: Option<BilinearSymbol>,
    pub strategy: Option<Strategy>,
}

impl ModelSpec {
    pub fn pk_system(coefficients: Coefficients, coupling: Coupling, w_symbol: Option<BilinearSymbol>) -> Self {
        Self { kind: ModelKind::PkSystem, coefficients, coupling, w_symbol, strategy: None }
    }

    pub fn k_system(coefficients: Coefficients) -> Self {
        Self { kind: ModelKind::KSystem, coefficients, coupling: Coupling::Uw, w_symbol: None, strategy: None }
    }

    /// Sources fixed to `(v², v², vw + T_m(w, w))`.
    pub fn pk_system_w(w_symbol: Option<BilinearSymbol>) -> Self {
        Self {
            kind: ModelKind::PkSystemW,
            coefficients: Coefficients::default(),
            coupling: Coupling::VwInW,
            w_symbol,
            strategy: None,
        }
    }

    /// Same kind with every source switched off.
    pub fn linear(kind: ModelKind) -> Self {
        Self { kind, coefficients: Coefficients::default(), coupling: Coupling::Uw, w_symbol: None, strategy: None }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = Some(strategy);
        self
    }

    pub fn matrices(&self) -> ModelMatrices {
        match self.kind {
            ModelKind::KSystem => ModelMatrices::sk_pair(),
            _ => ModelMatrices::partially_dissipative(),
        }
    }

    pub fn has_w(&self) -> bool {
        self.kind != ModelKind::KSystem
    }

    pub fn is_linear(&self) -> bool {
        match self.kind {
            ModelKind::PkSystemW => false,
            ModelKind::KSystem => self.coefficients.is_zero(),
            ModelKind::PkSystem => self.coefficients.is_zero() && self.w_symbol.is_none(),
        }
    }
}

/// `(û, v̂, ŵ)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub u: SpectralField,
    pub v: SpectralField,
    pub w: SpectralField,
    pub t: f64,
}

impl StateField {
    pub fn zeros(grid: SpectralGrid, t: f64) -> Self {
        Self { u: SpectralField::zeros(grid), v: SpectralField::zeros(grid), w: SpectralField::zeros(grid), t }
    }

    pub fn new(u: SpectralField, v: SpectralField, w: SpectralField, t: f64) -> Result<Self> {
        if u.grid() != v.grid() || u.grid() != w.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { u, v, w, t })
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.u.grid()
    }

    pub fn components(&self) -> [&SpectralField; 3] {
        [&self.u, &self.v, &self.w]
    }

    fn components_mut(&mut self) -> [&mut SpectralField; 3] {
        [&mut self.u, &mut self.v, &mut self.w]
    }

    /// `(Σ_c ‖c‖²_{H^N})^{1/2}`.
    pub fn sobolev_norm(&self, n: i32) -> f64 {
        self.components().iter().map(|c| c.weighted_energy(|k| (1.0 + k.norm_squared()).powi(n))).sum::<f64>().sqrt()
    }

    pub fn axpy(&mut self, factor: Complex64, other: &Self) {
        for (a, b) in self.components_mut().into_iter().zip(other.components()) {
            a.axpy(factor, b).expect("states share a grid");
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { u: self.u.scaled(factor), v: self.v.scaled(factor), w: self.w.scaled(factor), t: self.t }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components().iter().zip(other.components()).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }

    /// Largest imaginary part of the physical-space fields.
    pub fn reality_residue(&self) -> f64 {
        self.components().iter().map(|c| c.to_physical().max_imag()).fold(0.0, f64::max)
    }

    pub fn is_dealiased(&self) -> bool {
        self.components().iter().all(|c| c.is_dealiased())
    }

    pub fn dealias(&mut self) {
        for c in self.components_mut() {
            c.dealias();
        }
    }
}

/// Applies per-mode propagators in place.
pub fn propagate(props: &[Propagator], state: &mut StateField) {
    let (u, v, w) = (state.u.coeffs_mut(), state.v.coeffs_mut(), state.w.coeffs_mut());
    u.par_iter_mut().zip(v.par_iter_mut()).zip(w.par_iter_mut()).zip(props.par_iter()).for_each(|(((a, b), c), p)| {
        let (x, y, z) = p.apply(*a, *b, *c);
        *a = x;
        *b = y;
        *c = z;
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Ifrk2,
    Ifrk4,
}

/// Owns the linear cache, the pseudoproduct plan and cached propagators.
pub struct Integrator {
    model: ModelSpec,
    cache: LinearSymbolCache,
    plan: Option<PseudoproductPlan>,
    scheme: Scheme,
    propagators: HashMap<u64, Arc<Vec<Propagator>>>,
}

impl Integrator {
    pub fn new(model: ModelSpec, grid: SpectralGrid, scheme: Scheme) -> Result<Self> {
        let cache = LinearSymbolCache::new(&model.matrices(), grid)?;
        let plan = match (&model.w_symbol, model.has_w()) {
            (Some(sym), true) => Some(match model.strategy {
                Some(s) => PseudoproductPlan::new(grid, sym.clone(), s, true)?,
                None => PseudoproductPlan::auto(grid, sym.clone(), true)?,
            }),
            _ => None,
        };
        Ok(Self { model, cache, plan, scheme, propagators: HashMap::new() })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn cache(&self) -> &LinearSymbolCache {
        &self.cache
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.cache.grid()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Default step `Δx / 2`.
    pub fn default_dt(grid: &SpectralGrid) -> f64 {
        0.5 * grid.dx()
    }

    fn propagator(&mut self, h: f64) -> Arc<Vec<Propagator>> {
        let cache = &self.cache;
        self.propagators.entry(h.to_bits()).or_insert_with(|| Arc::new(cache.green_function(h))).clone()
    }

    /// Source terms only; the linear part is handled by the integrating factor.
    pub fn rhs(&self, state: &StateField) -> Result<StateField> {
        let grid = *state.grid();
        let c = self.model.coefficients;
        let has_w = self.model.has_w();
        let phys = |f: &SpectralField| -> Option<PhysicalField> {
            if f.max_abs() == 0.0 {
                None
            } else {
                Some(f.clone().dealiased().to_physical())
            }
        };
        let (pu, pv) = (phys(&state.u), phys(&state.v));
        let pw = if has_w { phys(&state.w) } else { None };

        // products as (lhs index, rhs index, coefficient) over (u, v, w)
        let mut eq: [Vec<(usize, usize, f64)>; 3] = Default::default();
        match self.model.kind {
            ModelKind::PkSystemW => {
                eq[0].push((1, 1, 1.0));
                eq[1].push((1, 1, 1.0));
                eq[2].push((1, 2, 1.0));
            }
            kind => {
                eq[0].extend([(0, 0, c.a_u), (1, 1, c.b_u), (0, 1, c.c_u)]);
                eq[1].extend([(0, 0, c.a_v), (1, 1, c.b_v), (0, 1, c.c_v)]);
                if kind == ModelKind::PkSystem {
                    match self.model.coupling {
                        Coupling::Uw => eq[1].push((0, 2, c.d_v)),
                        Coupling::VwInV => eq[1].push((1, 2, c.d_v)),
                        Coupling::VwInU => eq[0].push((1, 2, c.d_v)),
                        Coupling::VwInW => eq[2].push((1, 2, c.d_v)),
                    }
                }
            }
        }

        let fields = [pu.as_ref(), pv.as_ref(), pw.as_ref()];
        let mut out = StateField::zeros(grid, state.t);
        for (slot, terms) in out.components_mut().into_iter().zip(&eq) {
            let live: Vec<(&PhysicalField, &PhysicalField, f64)> = terms
                .iter()
                .filter(|(_, _, k)| *k != 0.0)
                .filter_map(|(a, b, k)| Some((fields[*a]?, fields[*b]?, *k)))
                .collect();
            if live.is_empty() {
                continue;
            }
            let mut acc = PhysicalField::zeros(grid);
            acc.values_mut().par_iter_mut().enumerate().for_each(|(i, o)| {
                *o = live.iter().map(|(x, y, k)| x[i] * y[i] * *k).sum();
            });
            *slot = acc.to_spectral().dealiased();
        }
        if let (Some(plan), true) = (&self.plan, has_w) {
            if state.w.max_abs() != 0.0 {
                let t = plan.apply(&state.w, &state.w)?;
                out.w.axpy(ONE, &t)?;
            }
        }
        Ok(out)
    }

    /// One step of size `h`.
    pub fn step(&mut self, state: &StateField, h: f64) -> Result<StateField> {
        let full = self.propagator(h);
        let mut next = state.clone();
        next.t = state.t + h;
        if self.model.is_linear() {
            propagate(&full, &mut next);
            return Ok(next);
        }
        let hc = Complex64::new(h, 0.0);
        match self.scheme {
            Scheme::Ifrk2 => {
                let k1 = self.rhs(state)?;
                let mut pred = state.clone();
                pred.axpy(hc, &k1);
                propagate(&full, &mut pred);
                let k2 = self.rhs(&pred)?;
                next.axpy(hc * 0.5, &k1);
                propagate(&full, &mut next);
                next.axpy(hc * 0.5, &k2);
            }
            Scheme::Ifrk4 => {
                let half = self.propagator(h / 2.0);
                let k1 = self.rhs(state)?;
                let mut s2 = state.clone();
                s2.axpy(hc * 0.5, &k1);
                propagate(&half, &mut s2);
                let k2 = self.rhs(&s2)?;
                let mut s3 = state.clone();
                propagate(&half, &mut s3);
                s3.axpy(hc * 0.5, &k2);
                let k3 = self.rhs(&s3)?;
                let mut s4 = state.clone();
                propagate(&full, &mut s4);
                let mut k3h = k3.clone();
                propagate(&half, &mut k3h);
                s4.axpy(hc, &k3h);
                let k4 = self.rhs(&s4)?;

                next.axpy(hc / 6.0, &k1);
                propagate(&full, &mut next);
                let mut mid = k2;
                mid.axpy(ONE, &k3);
                propagate(&half, &mut mid);
                next.axpy(hc / 3.0, &mid);
                next.axpy(hc / 6.0, &k4);
            }
        }
        next.t = state.t + h;
        Ok(next)
    }

    /// Steps from `state.t` to `t_end` with step at most `h`, landing exactly on `t_end`.
    pub fn advance(&mut self, state: &StateField, t_end: f64, h: f64) -> Result<StateField> {
        let mut s = state.clone();
        let span = t_end - s.t;
        if span <= 0.0 {
            return Ok(s);
        }
        let steps = (span / h - 1e-9).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        let t0 = s.t;
        for k in 0..steps {
            s = self.step(&s, dt)?;
            s.t = t0 + (k + 1) as f64 * dt;
        }
        Ok(s)
    }

    /// Exact linear evolution by `Γ(Δt)`.
    pub fn propagate_linear(&mut self, state: &StateField, dt: f64) -> StateField {
        let props =
            if dt == 0.0 { Arc::new(vec![Propagator::identity(); state.grid().len()]) } else { self.propagator(dt) };
        let mut out = state.clone();
        propagate(&props, &mut out);
        out.t += dt;
        out
    }
}

/// Blow-up guard around an integrator.
pub struct BlowUpGuard {
    pub limit: f64,
}

impl BlowUpGuard {
    pub fn new(initial: &StateField) -> Self {
        Self { limit: BLOW_UP_FACTOR * initial.sobolev_norm(GUARD_SOBOLEV_INDEX) }
    }

    pub fn check(&self, state: &StateField) -> Result<()> {
        let norm = state.sobolev_norm(GUARD_SOBOLEV_INDEX);
        if !norm.is_finite() || norm > self.limit {
            return Err(Error::StepRejected { t: state.t, norm, guard: self.limit });
        }
        Ok(())
    }
}

/// `f̂ = exp(-E(iξ)t) Û`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub f_u: SpectralField,
    pub f_v: SpectralField,
    pub f_w: SpectralField,
    pub t: f64,
}

/// Amplification exponent above which profile extraction is flagged as imprecise.
pub const PROFILE_WARN_EXPONENT: f64 = 40.0;

pub fn extract_profile(cache: &LinearSymbolCache, state: &StateField) -> Profile {
    let t = state.t;
    let gap = (0..cache.grid().len())
        .map(|i| cache.mode(i))
        .filter(|m| !m.degenerate)
        .map(|m| -m.eigvals[1].re)
        .fold(0.0, f64::max)
        .max(0.5);
    if t * gap > PROFILE_WARN_EXPONENT {
        log::warn!("profile extraction at t = {t}: exp(-Et) amplifies damped directions by e^{:.1}", t * gap);
    }
    let mut s = state.clone();
    let back = cache.green_function(-t);
    propagate(&back, &mut s);
    Profile { f_u: s.u, f_v: s.v, f_w: s.w, t }
}

/// `f̂_w = e^{i|ξ|t} ŵ`.
pub fn wave_profile(w: &SpectralField, t: f64) -> SpectralField {
    w.map_modes(|_, k| Complex64::from_polar(1.0, k.norm() * t))
}

/// Sharp split at `|ξ| <= a`; the parts add up to the state exactly.
pub fn frequency_split(state: &StateField, a: f64) -> (StateField, StateField) {
    let grid = *state.grid();
    let split = |f: &SpectralField, keep_low: bool| {
        let coeffs = f
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| if (grid.wavenumber(i) <= a) == keep_low { *c } else { ZERO })
            .collect();
        SpectralField::from_coeffs(grid, coeffs).expect("same grid")
    };
    let low = StateField { u: split(&state.u, true), v: split(&state.v, true), w: split(&state.w, true), t: state.t };
    let high =
        StateField { u: split(&state.u, false), v: split(&state.v, false), w: split(&state.w, false), t: state.t };
    (low, high)
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PDHSCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Binary checkpoint; layout documented in the README.
pub fn write_checkpoint(path: &Path, state: &StateField) -> Result<()> {
    let grid = state.grid();
    let mut buf = Vec::with_capacity(48 + 48 * grid.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    buf.extend_from_slice(&3u32.to_le_bytes());
    buf.extend_from_slice(&grid.length().to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    for comp in state.components() {
        for c in comp.coeffs() {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<StateField> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if buf.len() < 40 || &buf[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing PDHSCKPT header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let (dim, n, comps) = (u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize);
    let (length, t) = (f64_at(24), f64_at(32));
    if comps != 3 {
        return Err(bad("expected three components"));
    }
    let grid = SpectralGrid::new(dim, n, length).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if buf.len() != 40 + comps * grid.len() * 16 {
        return Err(bad("payload length does not match the grid"));
    }
    let field = |k: usize| {
        let base = 40 + k * grid.len() * 16;
        let coeffs =
            (0..grid.len()).map(|i| Complex64::new(f64_at(base + 16 * i), f64_at(base + 16 * i + 8))).collect();
        SpectralField::from_coeffs(grid, coeffs).expect("length checked")
    };
    StateField::new(field(0), field(1), field(2), t)
}
