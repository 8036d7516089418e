//! Running a configured experiment and serializing its results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::data::initial_state;
use crate::error::{Error, Result};
use crate::evolution::{write_checkpoint, BlowUpGuard, Integrator, ModelKind, ModelSpec, StateField, INITIAL_TIME};
use crate::norms::{
    evaluate_norm, fit_decay, fit_exponential_rate, initial_data_norm, m0_functional, m0_series_names, BootstrapReport,
    NormSpec, SeriesSet,
};
use crate::spectra::LinearSymbolCache;
use crate::symbols::symbol_preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    PowerLaw,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: FitKind,
    /// Log–log slope, or the decay rate for exponential fits.
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M0Verdict {
    #[serde(flatten)]
    pub report: BootstrapReport,
    /// `sup M₀ / M₀(1)`.
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub status: RunStatus,
    pub t_final: f64,
    pub blow_up: Option<String>,
    pub e_n: f64,
    pub fit_window: (f64, f64),
    pub fits: BTreeMap<String, FitResult>,
    pub fit_errors: BTreeMap<String, String>,
    pub m0: Option<M0Verdict>,
    pub reality_residue: f64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub series: SeriesSet,
    pub final_state: StateField,
}

/// Model described by a config.
pub fn model_spec(cfg: &ExperimentConfig) -> Result<ModelSpec> {
    let symbol = match cfg.symbol.preset.as_str() {
        "none" => None,
        name => Some(symbol_preset(name)?),
    };
    let m = &cfg.model;
    let mut spec = if m.linear {
        ModelSpec::linear(m.kind)
    } else {
        match m.kind {
            ModelKind::PkSystem => ModelSpec::pk_system(m.coefficients, m.coupling, symbol),
            ModelKind::KSystem => ModelSpec::k_system(m.coefficients),
            ModelKind::PkSystemW => ModelSpec::pk_system_w(symbol),
        }
    };
    if let Some(s) = cfg.symbol.strategy {
        spec = spec.with_strategy(s);
    }
    Ok(spec)
}

/// Sample times `1, 1 + Δ, …`, ending exactly at `t_max`.
fn sample_times(t_max: f64, every: f64) -> Vec<f64> {
    let count = ((t_max - INITIAL_TIME) / every - 1e-9).ceil().max(0.0) as usize;
    let mut ts: Vec<f64> = (0..count).map(|k| INITIAL_TIME + k as f64 * every).collect();
    ts.push(t_max);
    ts
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let grid = cfg.grid()?;
    let model = model_spec(cfg)?;
    let linear = model.is_linear();
    let kind = model.kind;
    let mut integrator = Integrator::new(model, grid, cfg.time.scheme)?;
    let initial = initial_state(&cfg.initial_data, grid, Some(integrator.cache()))?;
    let e_n = initial_data_norm(kind, &initial);
    let guard = BlowUpGuard::new(&initial);
    let dt = cfg.time.dt.unwrap_or_else(|| Integrator::default_dt(&grid));

    let mut names: Vec<String> = Vec::new();
    for n in &cfg.norms.list {
        if !names.contains(n) {
            names.push(n.clone());
        }
    }
    let track_m0 = m0_series_names(kind).iter().all(|n| names.iter().any(|m| m == n));
    let specs: Vec<NormSpec> = names.iter().map(|n| n.parse()).collect::<Result<_>>()?;
    let mut series: SeriesSet = names.iter().map(|n| (n.clone(), Vec::new())).collect();
    let record = |state: &StateField, series: &mut SeriesSet| {
        for (name, spec) in names.iter().zip(&specs) {
            series.get_mut(name).expect("series").push((state.t, evaluate_norm(spec, state)));
        }
    };

    let mut state = initial.clone();
    let mut status = RunStatus::Completed;
    let mut blow_up = None;
    let mut residue = 0.0f64;
    for t in sample_times(cfg.time.t_max, cfg.time.sample_every) {
        if t > state.t {
            let next = if linear {
                Ok(integrator.propagate_linear(&initial, t - INITIAL_TIME))
            } else {
                advance_guarded(&mut integrator, &guard, &state, t, dt)
            };
            match next {
                Ok(s) => state = s,
                Err(e @ Error::StepRejected { .. }) => {
                    log::warn!("{e}");
                    status = RunStatus::BlowUp;
                    blow_up = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        residue = residue.max(state.reality_residue());
        record(&state, &mut series);
        log::debug!("t = {:.3}", state.t);
    }

    let window = cfg.fit_window();
    let mut fits = BTreeMap::new();
    let mut fit_errors = BTreeMap::new();
    for (name, s) in &series {
        let exponential = cfg.fit.exponential.iter().any(|n| n == name);
        let fit = if exponential {
            fit_exponential_rate(name, s, window).map(|(value, residual)| FitResult {
                kind: FitKind::Exponential,
                value,
                residual,
            })
        } else {
            fit_decay(name, s, window).map(|(value, residual)| FitResult { kind: FitKind::PowerLaw, value, residual })
        };
        match fit {
            Ok(f) => {
                fits.insert(name.clone(), f);
            }
            Err(e) => {
                fit_errors.insert(name.clone(), e.to_string());
            }
        }
    }

    let m0 = if track_m0 {
        let report = m0_functional(kind, &series, e_n, cfg.fit.c_max)?;
        let first = report.m0_series.first().map(|p| p.1).unwrap_or(0.0);
        let last = report.m0_series.last().map(|p| p.1).unwrap_or(0.0);
        let growth = if first > 0.0 { last / first } else { 1.0 };
        Some(M0Verdict { report, growth })
    } else {
        None
    };

    if let Some(path) = &cfg.output.checkpoint {
        ensure_parent(path)?;
        write_checkpoint(path, &state)?;
    }
    let report = RunReport {
        name: cfg.name.clone(),
        status,
        t_final: state.t,
        blow_up,
        e_n,
        fit_window: window,
        fits,
        fit_errors,
        m0,
        reality_residue: residue,
        config: cfg.clone(),
    };
    let outcome = RunOutcome { report, series, final_state: state };
    if let Some(path) = &cfg.output.csv {
        write_file(path, &outcome.csv())?;
    }
    if let Some(path) = &cfg.output.report {
        write_file(path, &outcome.report_json())?;
    }
    Ok(outcome)
}

fn advance_guarded(
    integrator: &mut Integrator,
    guard: &BlowUpGuard,
    state: &StateField,
    t_end: f64,
    dt: f64,
) -> Result<StateField> {
    let mut s = state.clone();
    while s.t < t_end - 1e-12 {
        let h = dt.min(t_end - s.t);
        s = integrator.step(&s, h)?;
        guard.check(&s)?;
    }
    Ok(s)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, contents)?;
    Ok(())
}

impl RunOutcome {
    /// `t,norm_name,value` rows in time order, norms alphabetical within a time.
    pub fn csv(&self) -> String {
        let mut out = String::from("t,norm_name,value\n");
        let len = self.series.values().map(Vec::len).max().unwrap_or(0);
        for k in 0..len {
            for (name, s) in &self.series {
                if let Some((t, v)) = s.get(k) {
                    writeln!(out, "{t},{name},{v:e}").expect("string write");
                }
            }
        }
        out
    }

    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serializes")
    }

    pub fn exponent(&self, name: &str) -> Option<f64> {
        self.report.fits.get(name).map(|f| f.value)
    }
}

/// Linear symbol cache for a config, for callers that extract profiles.
pub fn symbol_cache(cfg: &ExperimentConfig) -> Result<LinearSymbolCache> {
    LinearSymbolCache::new(&model_spec(cfg)?.matrices(), cfg.grid()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(preset_body: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(preset_body).unwrap()
    }

    const BASE: &str = r#"
name = "tiny"
[model]
kind = "pk_system"
[model.coefficients]
a_u = 1.0
b_v = 1.0
d_v = 1.0
[grid]
n = 8
length = 40.0
[initial_data]
preset = "gaussian_bump"
amplitude = 0.01
sigma = 3.0
[time]
t_max = 5.0
dt = 0.5
[symbol]
preset = "null_b"
[norms]
list = ["u.h3", "v.l2", "w.linf"]
"#;

    #[test]
    fn sample_grid_ends_on_t_max() {
        assert_eq!(sample_times(3.0, 1.0), vec![1.0, 2.0, 3.0]);
        assert_eq!(sample_times(3.5, 1.0), vec![1.0, 2.0, 3.0, 3.5]);
    }

    #[test]
    fn run_is_deterministic() {
        let cfg = small(BASE);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.report.status, RunStatus::Completed);
        assert_eq!(a.csv(), b.csv());
        assert_eq!(a.csv().lines().count(), 1 + 3 * 5);
        let parsed: serde_json::Value = serde_json::from_str(&a.report_json()).unwrap();
        assert_eq!(parsed["status"], "completed");
        assert_eq!(parsed["config"]["grid"]["n"], 8);
    }

    #[test]
    fn outputs_land_in_new_directories() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("a/b");
        let mut cfg = small(BASE);
        cfg.output.csv = Some(root.join("s.csv"));
        cfg.output.report = Some(root.join("r.json"));
        cfg.output.checkpoint = Some(root.join("c/final.ckpt"));
        let out = run(&cfg).unwrap();
        assert_eq!(std::fs::read_to_string(root.join("s.csv")).unwrap(), out.csv());
        let back = crate::evolution::read_checkpoint(&root.join("c/final.ckpt")).unwrap();
        assert_eq!(back, out.final_state);
    }

    #[test]
    fn zero_amplitude_stays_zero() {
        let cfg = ExperimentConfig::from_toml_with_overrides(BASE, &["initial_data.amplitude=0.0".into()]).unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.report.status, RunStatus::Completed);
        assert_eq!(out.report.e_n, 0.0);
        assert!(out.series.values().flatten().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn large_data_trips_the_guard() {
        let cfg = ExperimentConfig::from_toml_with_overrides(
            BASE,
            &["initial_data.amplitude=50.0".into(), "time.dt=0.25".into()],
        )
        .unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.report.status, RunStatus::BlowUp);
        assert!(out.report.t_final < 5.0);
    }
}
