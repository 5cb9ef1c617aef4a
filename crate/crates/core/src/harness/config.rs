//! Run configuration: a TOML file with unit-suffixed quantities, resolved
//! into SI values and validated before any computation starts.
//!
//! ```toml
//! seed = 20240501
//!
//! [fiber]
//! length = "13.2 m"
//! beta2 = "-11.1 fs^2/mm"
//! beta3 = "83.8 fs^3/mm"
//!
//! [pulse]
//! wavelength = "1499.5 nm"
//! fwhm = "140 fs"
//!
//! [grid]
//! points = 4096
//! window = "10 ps"
//!
//! [sweep]
//! energies = ["35 pJ", "98.6 pJ", "178.8 pJ"]
//! ```
//!
//! Every table and key is optional; omitted values take the defaults of
//! the corresponding types.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::units::{Dimension, Quantity};
use crate::error::{Error, Result};
use crate::field::{EnsembleConfig, MIN_WINDOW_WIDTHS};
use crate::grid::TimeGrid;
use crate::physics::{nonlinear_coefficient, DetectionSpec, ExperimentSpec, FiberSpec, PulseShape, PulseSpec};
use crate::polarimetry::{GawbsFitOptions, DEFAULT_THETA_POINTS};
use crate::propagation::{PropagationModel, SplitScheme, StepperConfig, MAX_STEP_PHASE};
use crate::raman::RamanModel;

/// Endpoints of the default energy grid, joules.
pub const DEFAULT_ENERGY_RANGE: (f64, f64) = (3.5e-12, 178.8e-12);
pub const DEFAULT_ENERGY_POINTS: usize = 12;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    #[serde(default)]
    fiber: RawFiber,
    #[serde(default)]
    pulse: RawPulse,
    #[serde(default)]
    detection: RawDetection,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    raman: RawRaman,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    stepper: RawStepper,
    #[serde(default)]
    ensemble: RawEnsemble,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    analysis: RawAnalysis,
    #[serde(default)]
    fit: RawFit,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFiber {
    length: Option<Quantity>,
    beta2: Option<Quantity>,
    beta3: Option<Quantity>,
    n2: Option<Quantity>,
    core_diameter: Option<Quantity>,
    attenuation: Option<Quantity>,
    effective_area: Option<Quantity>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    wavelength: Option<Quantity>,
    fwhm: Option<Quantity>,
    shape: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    transmittance: Option<f64>,
    electronic_noise_floor: Option<Quantity>,
    gawbs_coefficient: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    gvd: Option<bool>,
    tod: Option<bool>,
    kerr: Option<bool>,
    loss: Option<bool>,
    input_noise: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRaman {
    enabled: Option<bool>,
    fraction: Option<f64>,
    tau1: Option<Quantity>,
    tau2: Option<Quantity>,
    temperature: Option<Quantity>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    points: Option<usize>,
    window: Option<Quantity>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStepper {
    steps: Option<usize>,
    scheme: Option<SplitScheme>,
    aliasing_guard: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    trajectories: Option<usize>,
    reference_trajectories: Option<usize>,
    noise: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    energies: Option<Vec<Quantity>>,
    min: Option<Quantity>,
    max: Option<Quantity>,
    points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    theta_points: Option<usize>,
    apply_loss: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    g_max: Option<f64>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    min_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    comparison_data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub theta_points: usize,
    /// Report detected values (after the lumped transmittance) rather than
    /// intrinsic ones.
    pub apply_loss: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            theta_points: DEFAULT_THETA_POINTS,
            apply_loss: true,
        }
    }
}

/// Fully resolved run configuration, all values in SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub spec: ExperimentSpec,
    pub model: PropagationModel,
    pub stepper: StepperConfig,
    pub grid: TimeGrid,
    pub ensemble: EnsembleConfig,
    pub reference_trajectories: usize,
    /// Total pulse energies, joules.
    pub energies: Vec<f64>,
    pub analysis: AnalysisOptions,
    pub fit: GawbsFitOptions,
    pub output_dir: Option<PathBuf>,
    pub comparison_data: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spec: ExperimentSpec::default(),
            model: PropagationModel::default(),
            stepper: StepperConfig::default(),
            grid: TimeGrid::new(4096, 10e-12).expect("default grid"),
            ensemble: EnsembleConfig::new(1000, 0),
            reference_trajectories: 10_000,
            energies: log_spaced(DEFAULT_ENERGY_RANGE.0, DEFAULT_ENERGY_RANGE.1, DEFAULT_ENERGY_POINTS),
            analysis: AnalysisOptions::default(),
            fit: GawbsFitOptions::default(),
            output_dir: None,
            comparison_data: None,
        }
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

fn q(v: &Option<Quantity>, key: &str, dim: Dimension, default: f64) -> Result<f64> {
    v.as_ref().map_or(Ok(default), |x| x.resolve(key, dim))
}

/// Whether the file named a seed; `sweep` insists on one from somewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub seed_given: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<LoadedConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = RunConfig::default();
        let df = FiberSpec::default();
        let dp = PulseSpec::default();
        let dd = DetectionSpec::default();
        let dr = RamanModel::default();

        let fiber = FiberSpec {
            length: q(&raw.fiber.length, "fiber.length", Dimension::Length, df.length)?,
            beta2: q(&raw.fiber.beta2, "fiber.beta2", Dimension::Gvd, df.beta2)?,
            beta3: q(&raw.fiber.beta3, "fiber.beta3", Dimension::Tod, df.beta3)?,
            n2: q(&raw.fiber.n2, "fiber.n2", Dimension::Nonlinearity, df.n2)?,
            core_diameter: q(&raw.fiber.core_diameter, "fiber.core_diameter", Dimension::Length, df.core_diameter)?,
            attenuation_db_per_km: q(&raw.fiber.attenuation, "fiber.attenuation", Dimension::Attenuation, df.attenuation_db_per_km)?,
            effective_area_override: raw
                .fiber
                .effective_area
                .as_ref()
                .map(|a| a.resolve("fiber.effective_area", Dimension::Area))
                .transpose()?,
        };
        let shape = match raw.pulse.shape.as_deref() {
            None | Some("sech") => PulseShape::Sech,
            Some(other) => return Err(Error::Config(format!("pulse.shape: unsupported shape `{other}` (only `sech`)"))),
        };
        let pulse = PulseSpec {
            center_wavelength: q(&raw.pulse.wavelength, "pulse.wavelength", Dimension::Length, dp.center_wavelength)?,
            fwhm_duration: q(&raw.pulse.fwhm, "pulse.fwhm", Dimension::Time, dp.fwhm_duration)?,
            total_energy: dp.total_energy,
            shape,
        };
        let detection = DetectionSpec {
            transmittance: raw.detection.transmittance.unwrap_or(dd.transmittance),
            electronic_noise_floor_dbm: match &raw.detection.electronic_noise_floor {
                Some(v) => Some(v.resolve("detection.electronic_noise_floor", Dimension::PowerLevel)?),
                None => dd.electronic_noise_floor_dbm,
            },
            gawbs_coefficient: raw.detection.gawbs_coefficient.unwrap_or(dd.gawbs_coefficient),
        };
        let raman = RamanModel {
            enabled: raw.raman.enabled.unwrap_or(dr.enabled),
            fraction: raw.raman.fraction.unwrap_or(dr.fraction),
            tau1: q(&raw.raman.tau1, "raman.tau1", Dimension::Time, dr.tau1)?,
            tau2: q(&raw.raman.tau2, "raman.tau2", Dimension::Time, dr.tau2)?,
            temperature: q(&raw.raman.temperature, "raman.temperature", Dimension::Temperature, dr.temperature)?,
        };
        let model = PropagationModel {
            gvd_enabled: raw.model.gvd.unwrap_or(d.model.gvd_enabled),
            tod_enabled: raw.model.tod.unwrap_or(d.model.tod_enabled),
            kerr_enabled: raw.model.kerr.unwrap_or(d.model.kerr_enabled),
            raman,
            loss_enabled: raw.model.loss.unwrap_or(d.model.loss_enabled),
            input_noise_enabled: raw.model.input_noise.unwrap_or(d.model.input_noise_enabled),
        };
        let grid = TimeGrid::new(
            raw.grid.points.unwrap_or(d.grid.n_points()),
            q(&raw.grid.window, "grid.window", Dimension::Time, d.grid.window())?,
        )?;
        let stepper = StepperConfig {
            n_steps: raw.stepper.steps.unwrap_or(d.stepper.n_steps),
            scheme: raw.stepper.scheme.unwrap_or(d.stepper.scheme),
            aliasing_guard: raw.stepper.aliasing_guard.unwrap_or(d.stepper.aliasing_guard),
        };
        let ensemble = EnsembleConfig {
            n_trajectories: raw.ensemble.trajectories.unwrap_or(d.ensemble.n_trajectories),
            master_seed: raw.seed.unwrap_or(0),
            noise_enabled: raw.ensemble.noise.unwrap_or(true),
        };
        let energies = match (&raw.sweep.energies, &raw.sweep.min, &raw.sweep.max) {
            (Some(list), None, None) => list
                .iter()
                .map(|e| e.resolve("sweep.energies", Dimension::Energy))
                .collect::<Result<Vec<_>>>()?,
            (None, lo, hi) => log_spaced(
                q(lo, "sweep.min", Dimension::Energy, DEFAULT_ENERGY_RANGE.0)?,
                q(hi, "sweep.max", Dimension::Energy, DEFAULT_ENERGY_RANGE.1)?,
                raw.sweep.points.unwrap_or(DEFAULT_ENERGY_POINTS),
            ),
            _ => return Err(Error::Config("sweep: give either `energies` or `min`/`max`/`points`, not both".into())),
        };
        let fit_default = GawbsFitOptions::default();
        let config = RunConfig {
            spec: ExperimentSpec { fiber, pulse, detection },
            model,
            stepper,
            grid,
            ensemble,
            reference_trajectories: raw.ensemble.reference_trajectories.unwrap_or(d.reference_trajectories),
            energies,
            analysis: AnalysisOptions {
                theta_points: raw.analysis.theta_points.unwrap_or(d.analysis.theta_points),
                apply_loss: raw.analysis.apply_loss.unwrap_or(d.analysis.apply_loss),
            },
            fit: GawbsFitOptions {
                g_max: raw.fit.g_max.unwrap_or(fit_default.g_max),
                tolerance: raw.fit.tolerance.unwrap_or(fit_default.tolerance),
                max_iterations: raw.fit.max_iterations.unwrap_or(fit_default.max_iterations),
                min_points: raw.fit.min_points.unwrap_or(fit_default.min_points),
            },
            output_dir: raw.output.dir,
            comparison_data: raw.output.comparison_data,
        };
        Ok(LoadedConfig {
            config,
            seed_given: raw.seed.is_some(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LoadedConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| crate::error::io_err(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Experiment parameters at one sweep energy.
    pub fn spec_at(&self, energy: f64) -> ExperimentSpec {
        self.spec.with_total_energy(energy)
    }

    /// Checks everything that can be checked without running: parameter
    /// ranges, grid size against the pulse, and the per-step nonlinear
    /// phase at the largest energy.
    pub fn validate(&self) -> Result<()> {
        self.spec.fiber.validate()?;
        self.spec.pulse.validate()?;
        self.spec.detection.validate()?;
        self.model.raman.validate()?;
        self.stepper.validate()?;
        self.ensemble.validate()?;
        if self.reference_trajectories < 2 {
            return Err(crate::error::param("ensemble.reference_trajectories", "must be at least 2"));
        }
        if self.analysis.theta_points < 8 {
            return Err(crate::error::param("analysis.theta_points", "must be at least 8"));
        }
        if self.energies.is_empty() {
            return Err(crate::error::param("sweep.energies", "must not be empty"));
        }
        if let Some(bad) = self.energies.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(crate::error::param("sweep.energies", format!("energies must be ≥ 0, got {bad}")));
        }
        let t0 = self.spec.pulse.sech_width();
        if self.grid.window() < MIN_WINDOW_WIDTHS * t0 {
            return Err(Error::Truncation(format!(
                "window {:.3e} s is below {MIN_WINDOW_WIDTHS}·T₀ = {:.3e} s",
                self.grid.window(),
                MIN_WINDOW_WIDTHS * t0
            )));
        }
        if self.model.kerr_enabled {
            let e_max = self.energies.iter().cloned().fold(0.0, f64::max);
            let spec = self.spec_at(e_max);
            let gamma = nonlinear_coefficient(&spec.fiber, spec.pulse.center_wavelength)?;
            // γ·P₀ per axis; P₀ = (E/2)/(2T₀)
            let phase = gamma * spec.pulse.energy_per_polarization() / (2.0 * t0) * spec.fiber.length
                / self.stepper.n_steps as f64;
            if phase >= MAX_STEP_PHASE {
                return Err(Error::Stepper(format!(
                    "nonlinear phase per step {phase:.4} rad at {:.1} pJ exceeds {MAX_STEP_PHASE} rad",
                    e_max * 1e12
                )));
            }
        }
        Ok(())
    }

    /// Resolved configuration as TOML, SI units throughout.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert!(!c.seed_given);
        assert_eq!(c.config.energies.len(), 12);
        assert!((c.config.energies[0] - 3.5e-12).abs() < 1e-24);
        assert!((c.config.energies[11] - 178.8e-12).abs() < 1e-22);
        c.config.validate().unwrap();
    }

    #[test]
    fn units_are_resolved() {
        let text = r#"
            seed = 7
            [fiber]
            length = "13.2 m"
            beta2 = "-11.1 fs^2/mm"
            beta3 = "83.8 fs^3/mm"
            core_diameter = "5.7 um"
            attenuation = "2.03 dB/km"
            [pulse]
            fwhm = "140 fs"
            [detection]
            electronic_noise_floor = "-85.1 dBm"
            [raman]
            temperature = "300 K"
            [grid]
            points = 1024
            window = "5 ps"
            [stepper]
            steps = 1000
            scheme = "strang"
            [sweep]
            energies = ["98.6 pJ", 1.788e-10]
        "#;
        let c = RunConfig::from_toml_str(text).unwrap();
        assert!(c.seed_given);
        let cfg = c.config;
        assert_eq!(cfg.ensemble.master_seed, 7);
        assert_eq!(cfg.spec.fiber, FiberSpec::default());
        assert_eq!(cfg.stepper.scheme, SplitScheme::Strang);
        assert_eq!(cfg.energies.len(), 2);
        assert!((cfg.energies[0] - 98.6e-12).abs() < 1e-24);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_toml_str("[grid]\npoints = 1000").is_err());
        assert!(RunConfig::from_toml_str("[fiber]\nlenght = 3.0").is_err());
        assert!(RunConfig::from_toml_str("[pulse]\nfwhm = \"140 parsecs\"").is_err());

        let short = RunConfig::from_toml_str("[grid]\npoints = 256\nwindow = \"1 ps\"").unwrap().config;
        assert!(matches!(short.validate(), Err(Error::Truncation(_))));

        let coarse = RunConfig::from_toml_str("[stepper]\nsteps = 100").unwrap().config;
        assert!(matches!(coarse.validate(), Err(Error::Stepper(_))));

        let lossy = RunConfig::from_toml_str("[detection]\ntransmittance = 1.5").unwrap().config;
        assert!(lossy.validate().is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
