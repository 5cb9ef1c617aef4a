//! Delayed Raman response of silica and the thermal phonon noise it implies.
//!
//! The response is a single damped oscillator,
//! `h(t) = ((τ₁²+τ₂²)/(τ₁τ₂²))·e^{-t/τ₂}·sin(t/τ₁)` for `t ≥ 0`, sampled on
//! the time grid and renormalized so that `Σ h·dt = 1`.
//!
//! Sign convention: with `h̃(ω) = Σ h(t) e^{+iωt} dt` (the same sign as the
//! field spectrum, so ω is a detuning above the carrier), `Im h̃` is odd and
//! positive for ω > 0. A positive-frequency intensity beat is therefore
//! absorbed by the phonon bath, which pushes energy toward lower optical
//! frequencies.
//!
//! The phonon bath enters the envelope as a real phase-noise field. Over a
//! slice `dz` its increment has the symmetrized spectrum
//! `S(ω)·dz = γ_flux·f_R·coth(ħω/2k_BT)·Im h̃(ω)·dz
//!          = 2·γ_flux·f_R·(n_th(|ω|) + ½)·|Im h̃(ω)|·dz`,
//! the fluctuation-dissipation partner of the delayed response.

use std::io::Write;

use log::warn;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::{SpectralTransform, TimeGrid};
use crate::physics::constants::{BOLTZMANN, HBAR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanModel {
    /// Fraction f_R of the χ⁽³⁾ response carried by phonons.
    pub fraction: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// Phonon bath temperature in kelvin.
    pub temperature: f64,
    pub enabled: bool,
}

impl Default for RamanModel {
    fn default() -> Self {
        Self {
            fraction: 0.15,
            tau1: 12.2e-15,
            tau2: 32e-15,
            temperature: 300.0,
            enabled: true,
        }
    }
}

impl RamanModel {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.fraction) {
            return Err(param("raman.fraction", format!("must lie in [0, 1), got {}", self.fraction)));
        }
        if !(self.tau1 > 0.0 && self.tau2 > 0.0) {
            return Err(param("raman.tau", "tau1 and tau2 must be positive"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(param("raman.temperature", "must be non-negative"));
        }
        Ok(())
    }

    /// Fraction actually applied: zero when the model is switched off.
    pub fn active_fraction(&self) -> f64 {
        if self.enabled {
            self.fraction
        } else {
            0.0
        }
    }

    /// Closed-form oscillator response at `t`, before discrete renormalization.
    pub fn response_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let (t1, t2) = (self.tau1, self.tau2);
        (t1 * t1 + t2 * t2) / (t1 * t2 * t2) * (-t / t2).exp() * (t / t1).sin()
    }
}

/// Sampled causal response, stored in lag order: index `m` holds lag `m·dt`
/// for `m < N/2`; the upper half (negative lags) is zero.
#[derive(Debug, Clone)]
pub struct RamanKernel {
    pub grid: TimeGrid,
    pub lags: Vec<f64>,
}

impl RamanKernel {
    /// Value at time `t` on the centered grid; zero for `t < 0`.
    pub fn at_time(&self, j: usize) -> f64 {
        let n = self.grid.n_points();
        let m = j as isize - (n / 2) as isize;
        if m < 0 {
            0.0
        } else {
            self.lags[m as usize]
        }
    }

    pub fn integral(&self) -> f64 {
        self.lags.iter().sum::<f64>() * self.grid.dt()
    }

    /// `Im h̃(ω_k)` for every bin, with the field's e^{+iωt} sign.
    pub fn imag_spectrum(&self, transform: &mut SpectralTransform) -> Vec<f64> {
        let dt = self.grid.dt();
        let mut buf: Vec<Complex64> = self.lags.iter().map(|&h| Complex64::new(h * dt, 0.0)).collect();
        transform.forward_unscaled(&mut buf);
        buf.into_iter().map(|c| c.im).collect()
    }

    /// `Σ h(t)·t·dt`, the slope of `Im h̃` at zero frequency.
    pub fn first_moment(&self) -> f64 {
        let dt = self.grid.dt();
        self.lags
            .iter()
            .enumerate()
            .map(|(m, h)| h * m as f64 * dt)
            .sum::<f64>()
            * dt
    }

    /// Two-column CSV `t_s,h_per_s` on the centered grid.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_s", "h_per_s"])?;
        for j in 0..self.grid.n_points() {
            w.write_record([format!("{:e}", self.grid.time(j)), format!("{:e}", self.at_time(j))])?;
        }
        w.flush().map_err(|e| crate::error::io_err("<raman kernel csv>", e))?;
        Ok(())
    }
}

pub fn response_kernel(model: &RamanModel, grid: &TimeGrid) -> Result<RamanKernel> {
    model.validate()?;
    if grid.window() < 10.0 * model.tau2 {
        return Err(Error::Truncation(format!(
            "window {:.3e} s is shorter than 10·τ₂ = {:.3e} s",
            grid.window(),
            10.0 * model.tau2
        )));
    }
    let n = grid.n_points();
    let dt = grid.dt();
    let mut lags: Vec<f64> = (0..n)
        .map(|m| if m < n / 2 { model.response_at(m as f64 * dt) } else { 0.0 })
        .collect();
    let integral: f64 = lags.iter().sum::<f64>() * dt;
    lags.iter_mut().for_each(|h| *h /= integral);
    Ok(RamanKernel { grid: *grid, lags })
}

/// Bose–Einstein occupation of a phonon mode at angular frequency `omega`.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(param("omega", "occupation diverges at zero frequency"));
    }
    if temperature <= 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega.abs() / (BOLTZMANN * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Precomputed filter for drawing Raman phase-noise increments.
#[derive(Debug, Clone)]
pub struct RamanNoise {
    /// Symmetrized spectral density S(ω_k) per unit length, rad²·s/m.
    density: Vec<f64>,
    /// √(S(ω_k)/(N·dt)); scaled by √dz at sampling time.
    amplitude: Vec<f64>,
    grid: TimeGrid,
}

impl RamanNoise {
    /// `gamma_flux` is the nonlinear coefficient in photon-flux units,
    /// rad/m per photon/s.
    pub fn new(model: &RamanModel, kernel: &RamanKernel, gamma_flux: f64, transform: &mut SpectralTransform) -> Self {
        let grid = kernel.grid;
        let n = grid.n_points();
        let scale = gamma_flux * model.active_fraction();
        let imag = kernel.imag_spectrum(transform);
        let mut clipped = 0usize;
        let density: Vec<f64> = (0..n)
            .map(|k| {
                let w = grid.angular_frequency(k);
                let s = if w == 0.0 {
                    if model.temperature > 0.0 {
                        2.0 * BOLTZMANN * model.temperature / HBAR * kernel.first_moment()
                    } else {
                        0.0
                    }
                } else {
                    let nth = thermal_occupation(w, model.temperature).expect("nonzero frequency");
                    (2.0 * nth + 1.0) * w.signum() * imag[k]
                };
                let s = scale * s;
                if s < 0.0 {
                    clipped += 1;
                    0.0
                } else {
                    s
                }
            })
            .collect();
        if clipped > 0 {
            warn!("raman noise: clipped {clipped} bins with negative spectral density");
        }
        let norm = 1.0 / (n as f64 * grid.dt());
        let amplitude = density.iter().map(|s| (s * norm).sqrt()).collect();
        Self { density, amplitude, grid }
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Variance of a single-bin phase increment per unit length.
    pub fn variance_per_meter(&self) -> f64 {
        self.amplitude.iter().map(|a| a * a).sum()
    }

    /// Draws independent phase increments for both axes over a slice `dz`:
    /// the real part of the returned buffer is the x-axis increment, the
    /// imaginary part the y-axis increment.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        dz: f64,
        rng: &mut R,
        transform: &mut SpectralTransform,
        out: &mut [Complex64],
    ) {
        let root = dz.sqrt();
        for (o, a) in out.iter_mut().zip(&self.amplitude) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *o = Complex64::new(re, im) * (a * root);
        }
        transform.inverse_unscaled(out);
    }

    /// Two-column CSV `omega_rad_per_s,density` in DFT bin order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["omega_rad_per_s", "density_rad2_s_per_m"])?;
        for (k, s) in self.density.iter().enumerate() {
            w.write_record([format!("{:e}", self.grid.angular_frequency(k)), format!("{s:e}")])?;
        }
        w.flush().map_err(|e| crate::error::io_err("<raman noise csv>", e))?;
        Ok(())
    }
}

/// One Raman phase-noise increment for both axes; zero when the model is off.
pub fn raman_noise_sample<R: Rng + ?Sized>(
    model: &RamanModel,
    grid: &TimeGrid,
    gamma_flux: f64,
    dz: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::default(); grid.n_points()];
    if !model.enabled || model.fraction == 0.0 {
        return Ok(out);
    }
    let kernel = response_kernel(model, grid)?;
    let mut transform = SpectralTransform::new(grid.n_points());
    RamanNoise::new(model, &kernel, gamma_flux, &mut transform).sample_into(dz, rng, &mut transform, &mut out);
    Ok(out)
}
