//! Two-polarization envelope state in photon-flux units.
//!
//! `|u(t)|²` is a photon flux (photons per second), so `Σ|u|²·dt` counts
//! photons. Vacuum fluctuations follow the symmetrically ordered (Wigner)
//! prescription of half a photon per temporal mode.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::physics::ExperimentSpec;

/// Smallest window, in units of the sech width, that holds a pulse.
pub const MIN_WINDOW_WIDTHS: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: TimeGrid,
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl FieldState {
    pub fn zeros(grid: TimeGrid) -> Self {
        let n = grid.n_points();
        Self {
            grid,
            x: vec![Complex64::default(); n],
            y: vec![Complex64::default(); n],
        }
    }

    /// Builds a state from arbitrary envelopes, e.g. to study distorted inputs.
    pub fn from_envelopes(grid: TimeGrid, x: Vec<Complex64>, y: Vec<Complex64>) -> Result<Self> {
        if x.len() != grid.n_points() || y.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "envelopes of length {}/{} on a {}-point grid",
                x.len(),
                y.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, x, y })
    }

    pub fn pol(&self, p: Polarization) -> &[Complex64] {
        match p {
            Polarization::X => &self.x,
            Polarization::Y => &self.y,
        }
    }

    pub fn pol_mut(&mut self, p: Polarization) -> &mut [Complex64] {
        match p {
            Polarization::X => &mut self.x,
            Polarization::Y => &mut self.y,
        }
    }

    pub fn photon_number(&self, p: Polarization) -> f64 {
        self.pol(p).iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dt()
    }

    pub fn total_photon_number(&self) -> f64 {
        self.photon_number(Polarization::X) + self.photon_number(Polarization::Y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Writes `t, Re u_x, Im u_x, Re u_y, Im u_y` rows with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_s", "re_x", "im_x", "re_y", "im_y"])?;
        for (j, (x, y)) in self.x.iter().zip(&self.y).enumerate() {
            w.write_record([
                format!("{:e}", self.grid.time(j)),
                format!("{:e}", x.re),
                format!("{:e}", x.im),
                format!("{:e}", y.re),
                format!("{:e}", y.im),
            ])?;
        }
        w.flush().map_err(|e| crate::error::io_err("<field csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    pub master_seed: u64,
    /// Master switch for every stochastic term.
    pub noise_enabled: bool,
}

impl EnsembleConfig {
    pub fn new(n_trajectories: usize, master_seed: u64) -> Self {
        Self {
            n_trajectories,
            master_seed,
            noise_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(crate::error::param("ensemble.trajectories", "must be at least 1"));
        }
        Ok(())
    }
}

/// Coherent sech pulses of equal amplitude and phase on both axes, each
/// carrying half the total energy.
pub fn init_coherent_sech(spec: &ExperimentSpec, grid: TimeGrid) -> Result<FieldState> {
    spec.pulse.validate()?;
    let t0 = spec.pulse.sech_width();
    if grid.window() < MIN_WINDOW_WIDTHS * t0 {
        return Err(Error::Truncation(format!(
            "window {:.3e} s is below {MIN_WINDOW_WIDTHS}·T₀ = {:.3e} s",
            grid.window(),
            MIN_WINDOW_WIDTHS * t0
        )));
    }
    let photons = spec.pulse.energy_per_polarization() / spec.pulse.photon_energy();
    let peak_flux = photons / (2.0 * t0);
    let amp = peak_flux.sqrt();
    let x: Vec<Complex64> = (0..grid.n_points())
        .map(|j| Complex64::new(amp / (grid.time(j) / t0).cosh(), 0.0))
        .collect();
    Ok(FieldState {
        grid,
        y: x.clone(),
        x,
    })
}

/// Per-quadrature standard deviation of vacuum noise in flux units,
/// √(1/(4·dt)).
pub fn vacuum_amplitude(dt: f64) -> f64 {
    0.5 / dt.sqrt()
}

pub fn add_vacuum_noise<R: Rng + ?Sized>(state: &mut FieldState, rng: &mut R) {
    let sigma = vacuum_amplitude(state.grid.dt());
    add_complex_noise(&mut state.x, sigma, rng);
    add_complex_noise(&mut state.y, sigma, rng);
}

pub(crate) fn add_complex_noise<R: Rng + ?Sized>(u: &mut [Complex64], sigma: f64, rng: &mut R) {
    for c in u.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c.re += sigma * re;
        c.im += sigma * im;
    }
}
