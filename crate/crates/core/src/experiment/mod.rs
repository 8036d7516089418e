//! Configured experiments, scenario presets, and the acceptance checks.

pub mod config;
pub mod criteria;
pub mod data;
pub mod run;

pub use config::ExperimentConfig;
pub use criteria::{run_criterion, CriterionReport, CRITERIA};
pub use data::{initial_state, make_initial_data};
pub use run::{run, RunOutcome, RunReport, RunStatus};

use crate::error::{Error, Result};

/// Scenario presets shipped with the crate, as `(name, TOML)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("linear-sk-decay", include_str!("../../presets/linear-sk-decay.toml")),
    ("damped-branch", include_str!("../../presets/damped-branch.toml")),
    ("wave-invariants", include_str!("../../presets/wave-invariants.toml")),
    ("pk-small-data", include_str!("../../presets/pk-small-data.toml")),
    ("sk-small-data", include_str!("../../presets/sk-small-data.toml")),
    ("pksw-small-data", include_str!("../../presets/pksw-small-data.toml")),
    ("convergence", include_str!("../../presets/convergence.toml")),
];

pub fn preset_source(name: &str) -> Result<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).ok_or_else(|| Error::UnknownPreset(name.into()))
}

pub fn load_preset(name: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml_with_overrides(preset_source(name)?, overrides)
}
