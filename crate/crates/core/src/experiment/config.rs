//! Experiment configuration: a TOML document plus `key=value` overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Coefficients, Coupling, ModelKind, Scheme};
use crate::grid::SpectralGrid;
use crate::norms::NormSpec;
use crate::pseudoproduct::Strategy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial_data: InitialDataSection,
    pub time: TimeSection,
    #[serde(default)]
    pub symbol: SymbolSection,
    pub norms: NormsSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default = "default_coupling")]
    pub coupling: Coupling,
    #[serde(default)]
    pub coefficients: Coefficients,
    /// Drops every source term.
    #[serde(default)]
    pub linear: bool,
}

fn default_coupling() -> Coupling {
    Coupling::Uw
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

fn default_dim() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataPreset {
    GaussianBump,
    RandomBandlimited,
    SingleMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    None,
    /// Keep only the exponentially damped eigendirection at `|ξ| <= low_pass`.
    Damped,
    /// Keep only the diffusive eigendirection at `|ξ| <= low_pass`.
    Diffusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataSection {
    pub preset: DataPreset,
    pub amplitude: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Integer mode for `single_mode`.
    #[serde(default = "default_mode")]
    pub mode: [i64; 3],
    /// Per-axis band for `random_bandlimited`; defaults to `n / 6`.
    #[serde(default)]
    pub band: Option<i64>,
    #[serde(default = "default_components")]
    pub components: Vec<String>,
    #[serde(default = "default_projection")]
    pub projection: Projection,
    #[serde(default)]
    pub low_pass: Option<f64>,
}

fn default_seed() -> u64 {
    1
}

fn default_sigma() -> f64 {
    1.5
}

fn default_mode() -> [i64; 3] {
    [1, 0, 0]
}

fn default_components() -> Vec<String> {
    vec!["u".into(), "v".into(), "w".into()]
}

fn default_projection() -> Projection {
    Projection::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_max: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_sample_every")]
    pub sample_every: f64,
}

fn default_scheme() -> Scheme {
    Scheme::Ifrk4
}

fn default_sample_every() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSection {
    /// Symbol of the `T_m(w, w)` source; `none` drops it.
    #[serde(default = "default_symbol")]
    pub preset: String,
    #[serde(default)]
    pub strategy: Option<Strategy>,
}

fn default_symbol() -> String {
    "none".into()
}

impl Default for SymbolSection {
    fn default() -> Self {
        Self { preset: default_symbol(), strategy: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsSection {
    pub list: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Fit window; defaults to `[0.25, 0.9] · t_max`.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    /// Exponential-rate fits instead of power laws for these series.
    #[serde(default)]
    pub exponential: Vec<String>,
    /// Bound for the `M₀ <= C E_N` verdict.
    #[serde(default = "default_c_max")]
    pub c_max: f64,
}

fn default_c_max() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

/// 1-based line of the first `key =` assignment in `raw`, if any.
fn line_of(raw: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    raw.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(leaf).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `a.b.c=value` to a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{assignment}`: `{k}` is not a table")))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), parse_override_value(value.trim()));
    Ok(())
}

// Negated comparisons below also reject NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
impl ExperimentConfig {
    /// Parses a TOML document, applies overrides, and validates.
    pub fn from_toml_with_overrides(raw: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = raw.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate(raw)?;
        Ok(cfg)
    }

    pub fn from_toml(raw: &str) -> Result<Self> {
        Self::from_toml_with_overrides(raw, &[])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.grid.dim, self.grid.n, self.grid.length)
    }

    pub fn fit_window(&self) -> (f64, f64) {
        match self.fit.window {
            Some([lo, hi]) => (lo, hi),
            None => crate::norms::default_window(self.time.t_max),
        }
    }

    fn validate(&self, raw: &str) -> Result<()> {
        let at = |key: &str, msg: String| {
            let loc = line_of(raw, key).map(|l| format!("line {l}: ")).unwrap_or_default();
            Error::Config(format!("{loc}{key}: {msg}"))
        };
        self.grid().map_err(|e| at("grid.n", e.to_string()))?;
        if !(self.time.t_max > 1.0) {
            return Err(at("time.t_max", format!("must exceed the initial time 1, got {}", self.time.t_max)));
        }
        if self.time.t_max >= self.grid.length / 4.0 {
            return Err(at(
                "time.t_max",
                format!("{} violates the no-wrap bound t_max < L/4 = {}", self.time.t_max, self.grid.length / 4.0),
            ));
        }
        if let Some(dt) = self.time.dt {
            if !(dt > 0.0) {
                return Err(at("time.dt", format!("must be positive, got {dt}")));
            }
        }
        if !(self.time.sample_every > 0.0) {
            return Err(at("time.sample_every", "must be positive".into()));
        }
        if !(self.initial_data.amplitude >= 0.0) || !self.initial_data.amplitude.is_finite() {
            return Err(at("initial_data.amplitude", format!("must be >= 0, got {}", self.initial_data.amplitude)));
        }
        if !(self.initial_data.sigma > 0.0) {
            return Err(at("initial_data.sigma", "must be positive".into()));
        }
        for c in &self.initial_data.components {
            if !matches!(c.as_str(), "u" | "v" | "w") {
                return Err(at("initial_data.components", format!("unknown component `{c}`")));
            }
        }
        for n in &self.norms.list {
            n.parse::<NormSpec>().map_err(|e| at("norms.list", e.to_string()))?;
        }
        if self.symbol.preset != "none" {
            crate::symbols::symbol_preset(&self.symbol.preset).map_err(|e| at("symbol.preset", e.to_string()))?;
        }
        if let Some([lo, hi]) = self.fit.window {
            if !(lo < hi) {
                return Err(at("fit.window", format!("empty window [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "sample"

[model]
kind = "pk_system"
coupling = "vw_in_v"

[model.coefficients]
a_u = 1.0
d_v = 0.5

[grid]
n = 16
length = 64.0

[initial_data]
preset = "gaussian_bump"
amplitude = 0.001

[time]
t_max = 10.0

[symbol]
preset = "null_b"

[norms]
list = ["u.h3", "w.linf"]
"#;

    #[test]
    fn parses_and_defaults() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.model.coupling, Coupling::VwInV);
        assert_eq!(cfg.model.coefficients.d_v, 0.5);
        assert_eq!(cfg.grid.dim, 3);
        assert_eq!(cfg.time.scheme, Scheme::Ifrk4);
        assert_eq!(cfg.fit_window(), (2.5, 9.0));
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = ExperimentConfig::from_toml_with_overrides(
            SAMPLE,
            &[
                "grid.n=32".into(),
                "time.scheme=ifrk2".into(),
                "symbol.preset=aphi".into(),
                "fit.window=[2.0, 8.0]".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.grid.n, 32);
        assert_eq!(cfg.time.scheme, Scheme::Ifrk2);
        assert_eq!(cfg.symbol.preset, "aphi");
        assert_eq!(cfg.fit_window(), (2.0, 8.0));
    }

    #[test]
    fn errors_name_the_line() {
        let bad = SAMPLE.replace("t_max = 10.0", "t_max = 20.0");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("time.t_max") && err.contains("no-wrap"), "{err}");
        let line = bad.lines().position(|l| l.starts_with("t_max")).unwrap() + 1;
        assert!(err.contains(&format!("line {line}")), "{err}");

        let bad = SAMPLE.replace("n = 16", "n = 12");
        assert!(ExperimentConfig::from_toml(&bad).unwrap_err().to_string().contains("grid.n"));
        let bad = SAMPLE.replace("\"u.h3\"", "\"u.h3x\"");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let bad = SAMPLE.replace("amplitude = 0.001", "amplitude = -1.0");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        assert!(ExperimentConfig::from_toml("name = ").unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }
}
