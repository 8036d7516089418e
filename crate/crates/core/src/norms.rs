//! Norms of states and wave profiles, the bootstrap functional `M₀`, the
//! initial-data size `E_N`, and decay-rate fits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{wave_profile, ModelKind, StateField};
use crate::grid::SpectralField;
use crate::propagators::{apply_multiplier, MultiplierSpec};

/// Sobolev index for `H^N` measurements.
pub const SOBOLEV_INDEX: i32 = 3;
pub const EPSILON: f64 = 0.01;
pub const GAMMA: f64 = 0.05;
pub const DELTA: f64 = 0.05;
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    Sobolev(i32),
    L2,
    Linf,
    L1,
    LinfRiesz,
    WeightedXL2,
    WeightedLambdaXH1,
    WeightedX2LambdaH1,
}

impl NormKind {
    fn is_weighted(&self) -> bool {
        matches!(self, NormKind::WeightedXL2 | NormKind::WeightedLambdaXH1 | NormKind::WeightedX2LambdaH1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    U,
    V,
    W,
    ProfileW,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormSpec {
    pub kind: NormKind,
    pub component: Component,
}

impl NormSpec {
    pub fn new(kind: NormKind, component: Component) -> Result<Self> {
        if kind.is_weighted() != (component == Component::ProfileW) {
            return Err(Error::Config(format!(
                "weighted norms apply exactly to profile_w (got {kind:?} of {component:?})"
            )));
        }
        Ok(Self { kind, component })
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let comp = match self.component {
            Component::U => "u",
            Component::V => "v",
            Component::W => "w",
            Component::ProfileW => "profile_w",
        };
        match self.kind {
            NormKind::Sobolev(n) => write!(f, "{comp}.h{n}"),
            NormKind::L2 => write!(f, "{comp}.l2"),
            NormKind::Linf => write!(f, "{comp}.linf"),
            NormKind::L1 => write!(f, "{comp}.l1"),
            NormKind::LinfRiesz => write!(f, "{comp}.linf_riesz"),
            NormKind::WeightedXL2 => write!(f, "{comp}.x_l2"),
            NormKind::WeightedLambdaXH1 => write!(f, "{comp}.lambda_x_h1"),
            NormKind::WeightedX2LambdaH1 => write!(f, "{comp}.x2_lambda_h1"),
        }
    }
}

impl FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown norm `{s}`"));
        let (comp, kind) = s.split_once('.').ok_or_else(bad)?;
        let component = match comp {
            "u" => Component::U,
            "v" => Component::V,
            "w" => Component::W,
            "profile_w" => Component::ProfileW,
            _ => return Err(bad()),
        };
        let kind = match kind {
            "l2" => NormKind::L2,
            "linf" => NormKind::Linf,
            "l1" => NormKind::L1,
            "linf_riesz" => NormKind::LinfRiesz,
            "x_l2" => NormKind::WeightedXL2,
            "lambda_x_h1" => NormKind::WeightedLambdaXH1,
            "x2_lambda_h1" => NormKind::WeightedX2LambdaH1,
            other => match other.strip_prefix('h').and_then(|n| n.parse::<i32>().ok()) {
                Some(n) if n >= 0 => NormKind::Sobolev(n),
                _ => return Err(bad()),
            },
        };
        NormSpec::new(kind, component)
    }
}

pub fn sobolev_norm(f: &SpectralField, n: i32) -> f64 {
    f.weighted_energy(|k| (1.0 + k.norm_squared()).powi(n)).sqrt()
}

/// `‖x_j f‖` components, `x` measured from the box center.
fn times_coordinate(f: &SpectralField, j: usize) -> SpectralField {
    f.to_physical().weighted(|x| x[j]).to_spectral()
}

fn times_radius_squared(f: &SpectralField) -> SpectralField {
    f.to_physical().weighted(|x| x.norm_squared()).to_spectral()
}

fn lambda(f: &SpectralField) -> SpectralField {
    apply_multiplier(&MultiplierSpec::lambda_power(1.0), f)
}

/// Norm of a scalar field; weighted kinds treat it as a profile.
pub fn scalar_norm(kind: NormKind, f: &SpectralField) -> f64 {
    let dim = f.grid().dim();
    match kind {
        NormKind::Sobolev(n) => sobolev_norm(f, n),
        NormKind::L2 => f.l2_norm(),
        NormKind::Linf => f.to_physical().max_abs(),
        NormKind::L1 => f.to_physical().lp_norm(1.0),
        NormKind::LinfRiesz => {
            (0..dim).map(|j| apply_multiplier(&MultiplierSpec::riesz(j), f).to_physical().max_abs()).fold(0.0, f64::max)
        }
        NormKind::WeightedXL2 => f.to_physical().weighted(|x| x.norm()).lp_norm(2.0),
        NormKind::WeightedLambdaXH1 => {
            (0..dim).map(|j| sobolev_norm(&lambda(&times_coordinate(f, j)), 1).powi(2)).sum::<f64>().sqrt()
        }
        NormKind::WeightedX2LambdaH1 => sobolev_norm(&times_radius_squared(&lambda(f)), 1),
    }
}

pub fn evaluate_norm(spec: &NormSpec, state: &StateField) -> f64 {
    // `abs` maps the -0.0 of an empty float sum to 0.0
    let value = match spec.component {
        Component::U => scalar_norm(spec.kind, &state.u),
        Component::V => scalar_norm(spec.kind, &state.v),
        Component::W => scalar_norm(spec.kind, &state.w),
        Component::ProfileW => scalar_norm(spec.kind, &wave_profile(&state.w, state.t)),
    };
    value.abs()
}

/// `E_N = max{‖U‖_{L¹}, ‖xU‖_{H²} + ‖Λ|x|²U‖_{H¹} + ‖U‖_{H^N}}`, summed over components.
/// The two-component system uses `max{‖U‖_{L¹}, ‖U‖_{H^N}}`.
pub fn initial_data_norm(kind: ModelKind, state: &StateField) -> f64 {
    let comps: Vec<&SpectralField> = match kind {
        ModelKind::KSystem => vec![&state.u, &state.v],
        _ => vec![&state.u, &state.v, &state.w],
    };
    let l1: f64 = comps.iter().map(|c| scalar_norm(NormKind::L1, c)).sum();
    let hn: f64 = comps.iter().map(|c| sobolev_norm(c, SOBOLEV_INDEX)).sum();
    if kind == ModelKind::KSystem {
        return l1.max(hn);
    }
    let dim = state.grid().dim();
    let weighted: f64 = comps
        .iter()
        .map(|c| {
            let x_h2 = (0..dim).map(|j| sobolev_norm(&times_coordinate(c, j), 2).powi(2)).sum::<f64>().sqrt();
            x_h2 + sobolev_norm(&lambda(&times_radius_squared(c)), 1)
        })
        .sum();
    l1.max(weighted + hn)
}

pub type Series = Vec<(f64, f64)>;

/// Named series sampled on a common time grid.
pub type SeriesSet = BTreeMap<String, Series>;

pub fn default_window(t_max: f64) -> (f64, f64) {
    (0.25 * t_max, 0.9 * t_max)
}

fn windowed(name: &str, series: &[(f64, f64)], window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let pts: Vec<(f64, f64)> =
        series.iter().copied().filter(|(t, _)| *t >= window.0 - 1e-12 && *t <= window.1 + 1e-12).collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples { need: MIN_FIT_SAMPLES, found: pts.len() });
    }
    if pts.iter().any(|(_, v)| v.is_nan() || *v <= 0.0) {
        return Err(Error::NonPositiveValues(name.to_string()));
    }
    Ok(pts)
}

/// Least-squares slope and RMS residual of `y` against `x`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}

/// Log–log slope of a series over `window`.
pub fn fit_decay(name: &str, series: &[(f64, f64)], window: (f64, f64)) -> Result<(f64, f64)> {
    let pts = windowed(name, series, window)?;
    let xs: Vec<f64> = pts.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    Ok(least_squares(&xs, &ys))
}

/// Rate `c` of a fit `value ≈ C e^{-ct}` over `window`.
pub fn fit_exponential_rate(name: &str, series: &[(f64, f64)], window: (f64, f64)) -> Result<(f64, f64)> {
    let pts = windowed(name, series, window)?;
    let xs: Vec<f64> = pts.iter().map(|(t, _)| *t).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let (slope, rms) = least_squares(&xs, &ys);
    Ok((-slope, rms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub norm: String,
    pub samples: Series,
    pub fit_window: (f64, f64),
    pub fitted_exponent: Option<f64>,
    pub fit_residual: Option<f64>,
}

impl DecaySeries {
    pub fn fitted(norm: &str, samples: Series, window: (f64, f64)) -> Self {
        let fit = fit_decay(norm, &samples, window).ok();
        Self {
            norm: norm.to_string(),
            samples,
            fit_window: window,
            fitted_exponent: fit.map(|f| f.0),
            fit_residual: fit.map(|f| f.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub m0_series: Series,
    pub e_n: f64,
    /// `sup M₀ / E_N`.
    pub constant: f64,
    pub bounded: bool,
}

pub type TimeWeight = Box<dyn Fn(f64) -> f64>;

/// Weighted terms `(series name, time weight)` of `M₀` for a model.
pub fn m0_weights(kind: ModelKind) -> Vec<(&'static str, TimeWeight)> {
    let e = EPSILON;
    let w_terms = |mut v: Vec<(&'static str, TimeWeight)>| {
        v.push(("w.h3", Box::new(move |t: f64| t.powf(-e))));
        v.push(("w.linf", Box::new(|t: f64| t)));
        v.push(("w.linf_riesz", Box::new(|t: f64| t)));
        v.push(("profile_w.x_l2", Box::new(|t: f64| t.powf(-GAMMA))));
        v.push(("profile_w.lambda_x_h1", Box::new(|_| 1.0)));
        v.push(("profile_w.x2_lambda_h1", Box::new(|t: f64| 1.0 / t)));
        v
    };
    match kind {
        ModelKind::PkSystem => w_terms(vec![
            ("u.h3", Box::new(|t: f64| t.powf(0.75))),
            ("v.h3", Box::new(move |t: f64| t.powf(0.75 - e))),
            ("u.linf", Box::new(move |t: f64| t.powf(1.5 - 2.0 * e))),
            ("v.linf", Box::new(move |t: f64| t.powf(0.75 - e))),
        ]),
        ModelKind::PkSystemW => w_terms(vec![
            ("u.h3", Box::new(|t: f64| t.powf(0.75))),
            ("v.h3", Box::new(|t: f64| t.powf(1.25))),
            ("u.linf", Box::new(|t: f64| t.powf(1.5))),
            ("v.linf", Box::new(|t: f64| t.powf(2.5))),
        ]),
        ModelKind::KSystem => {
            vec![("u.h3", Box::new(|t: f64| t.powf(0.75).max(1.0))), ("v.h3", Box::new(|t: f64| t.powf(1.25).max(1.0)))]
        }
    }
}

/// Series names `M₀` needs for a model.
pub fn m0_series_names(kind: ModelKind) -> Vec<&'static str> {
    m0_weights(kind).into_iter().map(|(n, _)| n).collect()
}

/// Running supremum of the weighted sum; `bounded` is `sup M₀ <= c_max · E_N`.
pub fn m0_functional(kind: ModelKind, series: &SeriesSet, e_n: f64, c_max: f64) -> Result<BootstrapReport> {
    let weights = m0_weights(kind);
    let mut columns = Vec::new();
    for (name, w) in &weights {
        let s = series.get(*name).ok_or_else(|| Error::MissingSeries(name.to_string()))?;
        columns.push((s, w));
    }
    let times: Vec<f64> = columns[0].0.iter().map(|(t, _)| *t).collect();
    if columns.iter().any(|(s, _)| s.len() != times.len() || s.iter().zip(&times).any(|((t, _), t0)| t != t0)) {
        return Err(Error::Config("M0 series must share one time grid".into()));
    }
    let mut running = 0.0f64;
    let m0_series: Series = times
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let value: f64 = columns.iter().map(|(s, w)| w(*t) * s[k].1).sum();
            running = running.max(value);
            (*t, running)
        })
        .collect();
    let sup = m0_series.last().map(|p| p.1).unwrap_or(0.0);
    let constant = if e_n > 0.0 { sup / e_n } else { 0.0 };
    Ok(BootstrapReport { m0_series, e_n, constant, bounded: sup <= c_max * e_n || sup == 0.0 })
}
