//! Fiber, pulse and detection parameters, and the soliton scales derived
//! from them.
//!
//! Pulse energies always denote the total over both polarization axes; each
//! axis carries exactly half.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Physical constants, CODATA values to six significant digits.
pub mod constants {
    pub const PLANCK: f64 = 6.62607e-34;
    pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
    pub const SPEED_OF_LIGHT: f64 = 2.99792e8;
    pub const BOLTZMANN: f64 = 1.38065e-23;
}

/// FWHM of sech² divided by the sech width parameter, 2·ln(1+√2).
pub const SECH_FWHM_RATIO: f64 = 1.762_747_174_039_086;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    /// Fiber length in meters.
    pub length: f64,
    /// Group-velocity dispersion in s²/m.
    pub beta2: f64,
    /// Third-order dispersion in s³/m.
    pub beta3: f64,
    /// Nonlinear refractive index in m²/W.
    pub n2: f64,
    /// Core diameter in meters.
    pub core_diameter: f64,
    /// Attenuation in dB/km.
    pub attenuation_db_per_km: f64,
    /// Explicit mode area in m²; the geometric core area is used when absent.
    pub effective_area_override: Option<f64>,
}

impl Default for FiberSpec {
    /// 13.2 m of 3M FS-PM-7811 at 1499.5 nm.
    fn default() -> Self {
        Self {
            length: 13.2,
            beta2: -11.1e-27,
            beta3: 83.8e-42,
            n2: 2.9e-20,
            core_diameter: 5.7e-6,
            attenuation_db_per_km: 2.03,
            effective_area_override: None,
        }
    }
}

impl FiberSpec {
    pub fn effective_area(&self) -> Result<f64> {
        match self.effective_area_override {
            Some(a) if a > 0.0 && a.is_finite() => Ok(a),
            Some(a) => Err(param("effective_area", format!("must be positive, got {a}"))),
            None => effective_area(self.core_diameter),
        }
    }

    /// Power attenuation coefficient in 1/m.
    pub fn attenuation_per_meter(&self) -> f64 {
        self.attenuation_db_per_km * std::f64::consts::LN_10 / 10.0 / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(param("fiber.length", format!("must be positive, got {}", self.length)));
        }
        if !(self.attenuation_db_per_km >= 0.0) {
            return Err(param(
                "fiber.attenuation",
                format!("must be non-negative, got {}", self.attenuation_db_per_km),
            ));
        }
        if !(self.n2 >= 0.0) {
            return Err(param("fiber.n2", format!("must be non-negative, got {}", self.n2)));
        }
        if !self.beta2.is_finite() || !self.beta3.is_finite() {
            return Err(param("fiber.beta", "dispersion coefficients must be finite"));
        }
        self.effective_area().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    #[default]
    Sech,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Carrier wavelength in meters.
    pub center_wavelength: f64,
    /// Intensity FWHM in seconds.
    pub fwhm_duration: f64,
    /// Energy summed over both polarizations, in joules.
    pub total_energy: f64,
    pub shape: PulseShape,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            center_wavelength: 1499.5e-9,
            fwhm_duration: 140e-15,
            total_energy: 98.6e-12,
            shape: PulseShape::Sech,
        }
    }
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_wavelength > 0.0 && self.center_wavelength.is_finite()) {
            return Err(param("pulse.wavelength", "must be positive"));
        }
        if !(self.fwhm_duration > 0.0 && self.fwhm_duration.is_finite()) {
            return Err(param("pulse.fwhm", format!("must be positive, got {}", self.fwhm_duration)));
        }
        if !(self.total_energy >= 0.0 && self.total_energy.is_finite()) {
            return Err(param(
                "pulse.energy",
                format!("must be non-negative, got {}", self.total_energy),
            ));
        }
        Ok(())
    }

    /// Energy carried by one polarization axis.
    pub fn energy_per_polarization(&self) -> f64 {
        0.5 * self.total_energy
    }

    pub fn photon_energy(&self) -> f64 {
        constants::PLANCK * constants::SPEED_OF_LIGHT / self.center_wavelength
    }

    pub fn carrier_angular_frequency(&self) -> f64 {
        2.0 * PI * constants::SPEED_OF_LIGHT / self.center_wavelength
    }

    pub fn sech_width(&self) -> f64 {
        self.fwhm_duration / SECH_FWHM_RATIO
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSpec {
    /// Total detection transmittance η in (0, 1].
    pub transmittance: f64,
    /// Electronic noise floor of the measured traces, dBm.
    pub electronic_noise_floor_dbm: Option<f64>,
    /// Excess phase-noise strength in rad²/J of per-polarization energy.
    pub gawbs_coefficient: f64,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        Self {
            transmittance: 0.87,
            electronic_noise_floor_dbm: Some(-85.1),
            gawbs_coefficient: 0.0,
        }
    }
}

impl DetectionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.transmittance > 0.0 && self.transmittance <= 1.0) {
            return Err(param(
                "detection.transmittance",
                format!("must lie in (0, 1], got {}", self.transmittance),
            ));
        }
        if !(self.gawbs_coefficient >= 0.0 && self.gawbs_coefficient.is_finite()) {
            return Err(param("detection.gawbs_coefficient", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExperimentSpec {
    pub fiber: FiberSpec,
    pub pulse: PulseSpec,
    pub detection: DetectionSpec,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        self.pulse.validate()?;
        self.detection.validate()
    }

    pub fn with_total_energy(&self, energy: f64) -> Self {
        let mut spec = self.clone();
        spec.pulse.total_energy = energy;
        spec
    }

    pub fn scales(&self) -> Result<DerivedScales> {
        derive_scales(&self.fiber, &self.pulse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    /// Nonlinear coefficient γ in 1/(W·m).
    pub gamma: f64,
    /// Sech width parameter T₀ in seconds.
    pub t0: f64,
    /// Peak power of one polarization in watts.
    pub peak_power: f64,
    pub photon_energy: f64,
    /// Mean photon number of one polarization.
    pub photons_per_pulse: f64,
    /// Soliton quantities; `None` unless the dispersion is anomalous.
    pub soliton: Option<SolitonScales>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonScales {
    pub order: f64,
    pub dispersion_length: f64,
    /// Energy of the fundamental soliton in one polarization.
    pub energy_per_polarization: f64,
    pub photons_per_polarization: f64,
}

impl DerivedScales {
    pub fn soliton_order(&self) -> Option<f64> {
        self.soliton.as_ref().map(|s| s.order)
    }

    /// Total fundamental-soliton energy over both polarizations.
    pub fn soliton_energy_total(&self) -> Option<f64> {
        self.soliton.as_ref().map(|s| 2.0 * s.energy_per_polarization)
    }
}

/// Geometric core area π(d/2)².
pub fn effective_area(core_diameter: f64) -> Result<f64> {
    if !(core_diameter > 0.0 && core_diameter.is_finite()) {
        return Err(param(
            "core_diameter",
            format!("must be positive, got {core_diameter}"),
        ));
    }
    Ok(PI * (0.5 * core_diameter).powi(2))
}

/// γ = 2π n₂ / (λ A_eff).
pub fn nonlinear_coefficient(fiber: &FiberSpec, wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(param("wavelength", format!("must be positive, got {wavelength}")));
    }
    if !(fiber.n2 >= 0.0) {
        return Err(param("n2", format!("must be non-negative, got {}", fiber.n2)));
    }
    let area = fiber.effective_area()?;
    Ok(2.0 * PI * fiber.n2 / (wavelength * area))
}

pub fn derive_scales(fiber: &FiberSpec, pulse: &PulseSpec) -> Result<DerivedScales> {
    pulse.validate()?;
    let gamma = nonlinear_coefficient(fiber, pulse.center_wavelength)?;
    let t0 = pulse.sech_width();
    // ∫ sech²(t/T₀) dt = 2T₀
    let peak_power = pulse.energy_per_polarization() / (2.0 * t0);
    let photon_energy = pulse.photon_energy();
    let photons_per_pulse = pulse.energy_per_polarization() / photon_energy;

    let soliton = (fiber.beta2 < 0.0 && gamma > 0.0).then(|| {
        let ld = t0 * t0 / fiber.beta2.abs();
        let energy = 2.0 * fiber.beta2.abs() / (gamma * t0);
        SolitonScales {
            order: (gamma * peak_power * ld).sqrt(),
            dispersion_length: ld,
            energy_per_polarization: energy,
            photons_per_polarization: energy / photon_energy,
        }
    });

    Ok(DerivedScales {
        gamma,
        t0,
        peak_power,
        photon_energy,
        photons_per_pulse,
        soliton,
    })
}

/// Total pulse energy implied by a set of scales.
pub fn energy_from_scales(scales: &DerivedScales) -> f64 {
    2.0 * scales.peak_power * 2.0 * scales.t0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn geometric_area() {
        let a = effective_area(5.7e-6).unwrap();
        assert_relative_eq!(a, 2.551_758e-11, max_relative = 1e-6);
        assert_relative_eq!(effective_area(2.0).unwrap(), PI, max_relative = 1e-15);
        assert!(effective_area(0.0).is_err());
        assert!(effective_area(-1.0).is_err());
    }

    #[test]
    fn gamma_from_fiber_constants() {
        let fiber = FiberSpec::default();
        let g = nonlinear_coefficient(&fiber, 1499.5e-9).unwrap();
        assert_relative_eq!(g, 4.762e-3, max_relative = 1e-3);

        let linear = FiberSpec { n2: 0.0, ..FiberSpec::default() };
        assert_eq!(nonlinear_coefficient(&linear, 1499.5e-9).unwrap(), 0.0);

        let wide = FiberSpec {
            effective_area_override: Some(2.0 * fiber.effective_area().unwrap()),
            ..FiberSpec::default()
        };
        assert_relative_eq!(
            nonlinear_coefficient(&wide, 1499.5e-9).unwrap(),
            0.5 * g,
            max_relative = 1e-14
        );
    }

    #[test]
    fn soliton_scales_match_reported_values() {
        let spec = ExperimentSpec::default();
        let s = spec.scales().unwrap();
        let sol = s.soliton.clone().unwrap();
        assert_relative_eq!(sol.energy_per_polarization, 58.7e-12, max_relative = 5e-3);
        assert_relative_eq!(sol.photons_per_polarization, 4.43e8, max_relative = 5e-3);
    }

    #[test]
    fn zero_energy() {
        let spec = ExperimentSpec::default().with_total_energy(0.0);
        let s = spec.scales().unwrap();
        assert_eq!(s.photons_per_pulse, 0.0);
        assert_eq!(s.soliton_order(), Some(0.0));
    }

    #[test]
    fn normal_dispersion_has_no_soliton() {
        let spec = ExperimentSpec {
            fiber: FiberSpec { beta2: 5e-27, ..FiberSpec::default() },
            ..ExperimentSpec::default()
        };
        assert!(spec.scales().unwrap().soliton.is_none());
    }

    #[test]
    fn fundamental_soliton_has_unit_order() {
        let spec = ExperimentSpec::default();
        let e = spec.scales().unwrap().soliton_energy_total().unwrap();
        let n = spec.with_total_energy(e).scales().unwrap().soliton_order().unwrap();
        assert!((n - 1.0).abs() < 1e-12, "N = {n}");
    }

    #[test]
    fn detection_rejects_bad_eta() {
        for eta in [0.0, -0.1, 1.01, f64::NAN] {
            let d = DetectionSpec { transmittance: eta, ..DetectionSpec::default() };
            assert!(d.validate().is_err());
        }
    }

    proptest::proptest! {
        #[test]
        fn energy_round_trip(e in 0.0f64..1e-9, fwhm in 10e-15f64..1e-12) {
            let pulse = PulseSpec { total_energy: e, fwhm_duration: fwhm, ..PulseSpec::default() };
            let s = derive_scales(&FiberSpec::default(), &pulse).unwrap();
            let back = energy_from_scales(&s);
            proptest::prop_assert!((back - e).abs() <= 1e-12 * e.max(f64::MIN_POSITIVE));
        }
    }
}
