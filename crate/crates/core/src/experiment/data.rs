//! Real-valued, band-limited, dealiased initial data.

use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{DataPreset, InitialDataSection, Projection};
use crate::error::{Error, Result};
use crate::evolution::{StateField, INITIAL_TIME};
use crate::grid::{PhysicalField, SpectralField, SpectralGrid};
use crate::spectra::LinearSymbolCache;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl FromStr for DataPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_bump" => Ok(DataPreset::GaussianBump),
            "random_bandlimited" => Ok(DataPreset::RandomBandlimited),
            "single_mode" => Ok(DataPreset::SingleMode),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

/// `amplitude · exp(-|x|²/2σ²)` centered in the box.
pub fn gaussian_bump(grid: SpectralGrid, amplitude: f64, sigma: f64) -> SpectralField {
    let s2 = 2.0 * sigma * sigma;
    PhysicalField::from_fn(grid, |x| Complex64::new(amplitude * (-x.norm_squared() / s2).exp(), 0.0))
        .to_spectral()
        .dealiased()
}

/// `amplitude · cos(k·x)` for the integer mode `k`.
pub fn single_mode(grid: SpectralGrid, amplitude: f64, mode: [i64; 3]) -> Result<SpectralField> {
    let half = grid.n() as i64 / 2;
    let dim = grid.dim();
    if mode.iter().take(dim).any(|m| m.abs() >= half) || mode.iter().skip(dim).any(|m| *m != 0) {
        return Err(Error::Config(format!("mode {mode:?} does not fit the {}-point grid", grid.n())));
    }
    let neg = [-mode[0], -mode[1], -mode[2]];
    let mut f = SpectralField::zeros(grid);
    if mode == [0, 0, 0] {
        f.coeffs_mut()[0] = Complex64::new(amplitude, 0.0);
    } else {
        f.coeffs_mut()[grid.index(mode)] += Complex64::new(0.5 * amplitude, 0.0);
        f.coeffs_mut()[grid.index(neg)] += Complex64::new(0.5 * amplitude, 0.0);
    }
    Ok(f.dealiased())
}

/// Random Hermitian coefficients on `|m_j| <= band`, scaled to sup norm `amplitude`.
pub fn random_bandlimited(grid: SpectralGrid, amplitude: f64, band: i64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![ZERO; grid.len()];
    let dim = grid.dim();
    for idx in 0..grid.len() {
        let m = grid.mode(idx);
        if m.iter().take(dim).any(|c| c.abs() > band) {
            continue;
        }
        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let mirror = grid.index([-m[0], -m[1], -m[2]]);
        if mirror == idx {
            coeffs[idx] = Complex64::new(z.re, 0.0);
        } else if mirror > idx {
            coeffs[idx] = z;
            coeffs[mirror] = z.conj();
        }
    }
    let mut f = SpectralField::from_coeffs(grid, coeffs).expect("grid length").dealiased();
    let sup = f.to_physical().max_abs();
    if sup > 0.0 {
        f.scale(Complex64::new(amplitude / sup, 0.0));
    }
    f
}

/// One scalar field from a preset name.
pub fn make_field(preset: DataPreset, grid: SpectralGrid, amplitude: f64, seed: u64) -> Result<SpectralField> {
    match preset {
        DataPreset::GaussianBump => Ok(gaussian_bump(grid, amplitude, 1.5)),
        DataPreset::RandomBandlimited => Ok(random_bandlimited(grid, amplitude, (grid.n() / 6) as i64, seed)),
        DataPreset::SingleMode => single_mode(grid, amplitude, [1, 0, 0]),
    }
}

/// The same preset in all three components at the initial time.
pub fn make_initial_data(preset: &str, grid: SpectralGrid, amplitude: f64, seed: u64) -> Result<StateField> {
    let preset: DataPreset = preset.parse()?;
    let u = make_field(preset, grid, amplitude, seed)?;
    let v = make_field(preset, grid, amplitude, seed.wrapping_add(1))?;
    let w = make_field(preset, grid, amplitude, seed.wrapping_add(2))?;
    StateField::new(u, v, w, INITIAL_TIME)
}

/// Initial data described by a config section; `cache` is needed for projections.
pub fn initial_state(
    section: &InitialDataSection,
    grid: SpectralGrid,
    cache: Option<&LinearSymbolCache>,
) -> Result<StateField> {
    let band = section.band.unwrap_or((grid.n() / 6) as i64);
    let field = |offset: u64| -> Result<SpectralField> {
        let seed = section.seed.wrapping_add(offset);
        match section.preset {
            DataPreset::GaussianBump => Ok(gaussian_bump(grid, section.amplitude, section.sigma)),
            DataPreset::RandomBandlimited => Ok(random_bandlimited(grid, section.amplitude, band, seed)),
            DataPreset::SingleMode => single_mode(grid, section.amplitude, section.mode),
        }
    };
    let mut state = StateField::zeros(grid, INITIAL_TIME);
    for c in &section.components {
        match c.as_str() {
            "u" => state.u = field(0)?,
            "v" => state.v = field(1)?,
            "w" => state.w = field(2)?,
            other => return Err(Error::Config(format!("unknown component `{other}`"))),
        }
    }
    if section.projection != Projection::None {
        let cache = cache.ok_or_else(|| Error::Config("projection needs the linear symbol cache".into()))?;
        project(&mut state, cache, section.projection, section.low_pass.unwrap_or(f64::INFINITY))?;
    }
    Ok(state)
}

/// Replaces `(û, v̂)` by its component along one eigendirection on `|ξ| <= low_pass`
/// and zeroes it elsewhere. `ŵ` is left alone.
pub fn project(state: &mut StateField, cache: &LinearSymbolCache, which: Projection, low_pass: f64) -> Result<()> {
    let grid = *cache.grid();
    for idx in 0..grid.len() {
        let (u, v) = (state.u.coeffs()[idx], state.v.coeffs()[idx]);
        let (pu, pv) = if grid.wavenumber(idx) > low_pass {
            (ZERO, ZERO)
        } else {
            let mode = cache.mode(idx);
            if mode.degenerate {
                return Err(Error::DegenerateSpectrum { kappa: mode.kappa, gap: 0.0 });
            }
            // E(iξ) depends on |ξ| only, so the shell projectors apply as they are.
            let p = match which {
                Projection::Damped => mode.p2,
                Projection::Diffusive => mode.p1,
                Projection::None => unreachable!(),
            };
            (p[(0, 0)] * u + p[(0, 1)] * v, p[(1, 0)] * u + p[(1, 1)] * v)
        };
        state.u.coeffs_mut()[idx] = pu;
        state.v.coeffs_mut()[idx] = pv;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::ModelKind;
    use crate::norms::initial_data_norm;
    use crate::spectra::ModelMatrices;

    #[test]
    fn presets_are_real_and_dealiased() {
        let grid = SpectralGrid::cube(16, 16.0).unwrap();
        for name in ["gaussian_bump", "random_bandlimited", "single_mode"] {
            let s = make_initial_data(name, grid, 0.5, 3).unwrap();
            assert!(s.is_dealiased(), "{name}");
            assert!(s.reality_residue() < 1e-14, "{name}");
            for f in s.components() {
                let sup = f.to_physical().max_abs();
                assert!(sup <= 0.5 + 1e-12 && sup > 0.1, "{name}: {sup}");
            }
        }
        assert!(matches!(make_initial_data("box", grid, 1.0, 0), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn seeds_are_reproducible() {
        let grid = SpectralGrid::cube(16, 16.0).unwrap();
        let a = random_bandlimited(grid, 1.0, 2, 9);
        let b = random_bandlimited(grid, 1.0, 2, 9);
        let c = random_bandlimited(grid, 1.0, 2, 10);
        assert_eq!(a, b);
        assert!(a.max_abs_diff(&c) > 1e-3);
    }

    #[test]
    fn single_mode_norm_is_closed_form() {
        let grid = SpectralGrid::cube(16, 8.0).unwrap();
        let f = single_mode(grid, 2.0, [1, 2, 0]).unwrap();
        let k2 = grid.dk().powi(2) * 5.0;
        // ‖A cos(k·x)‖²_{H^N} = L^d A²/2 (1 + |k|²)^N
        let expected = (grid.volume() * 2.0 * (1.0 + k2).powi(3)).sqrt();
        let got = crate::norms::sobolev_norm(&f, 3);
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn initial_size_is_linear_in_amplitude() {
        let grid = SpectralGrid::cube(16, 32.0).unwrap();
        for kind in [ModelKind::PkSystem, ModelKind::KSystem, ModelKind::PkSystemW] {
            let a = initial_data_norm(kind, &make_initial_data("gaussian_bump", grid, 1e-3, 0).unwrap());
            let b = initial_data_norm(kind, &make_initial_data("gaussian_bump", grid, 2e-3, 0).unwrap());
            assert!((b / a - 2.0).abs() < 1e-12, "{kind:?}: {a} {b}");
        }
    }

    #[test]
    fn zero_amplitude_is_zero() {
        let grid = SpectralGrid::cube(8, 8.0).unwrap();
        let s = make_initial_data("random_bandlimited", grid, 0.0, 1).unwrap();
        assert_eq!(initial_data_norm(ModelKind::PkSystem, &s), 0.0);
    }

    #[test]
    fn projections_are_complementary() {
        let grid = SpectralGrid::cube(16, 64.0).unwrap();
        let cache = LinearSymbolCache::new(&ModelMatrices::partially_dissipative(), grid).unwrap();
        let s = make_initial_data("gaussian_bump", grid, 1.0, 0).unwrap();
        let (mut damped, mut diffusive) = (s.clone(), s.clone());
        project(&mut damped, &cache, Projection::Damped, 0.25).unwrap();
        project(&mut diffusive, &cache, Projection::Diffusive, 0.25).unwrap();
        let (low, _) = crate::evolution::frequency_split(&s, 0.25);
        let mut sum = damped.clone();
        sum.axpy(Complex64::new(1.0, 0.0), &diffusive);
        assert!(sum.u.max_abs_diff(&low.u) < 1e-12 && sum.v.max_abs_diff(&low.v) < 1e-12);
        let mut twice = damped.clone();
        project(&mut twice, &cache, Projection::Damped, 0.25).unwrap();
        assert!(twice.u.max_abs_diff(&damped.u) < 1e-12);
    }
}
