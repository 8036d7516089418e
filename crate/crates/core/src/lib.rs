//! Pseudo-spectral simulation of partially dissipative hyperbolic systems.

pub mod error;
pub mod evolution;
pub mod experiment;
pub mod fft;
pub mod grid;
pub mod norms;
pub mod propagators;
pub mod pseudoproduct;
pub mod spectra;
pub mod symbols;

pub use error::{Error, Result};
pub use evolution::{Integrator, ModelKind, ModelSpec, Scheme, StateField};
pub use experiment::{ExperimentConfig, RunOutcome, RunReport, RunStatus};
pub use grid::{PhysicalField, SpectralField, SpectralGrid, Wavevector};
pub use norms::NormSpec;
pub use pseudoproduct::{PseudoproductPlan, Strategy};
pub use spectra::{LinearSymbolCache, ModelMatrices};
pub use symbols::BilinearSymbol;
