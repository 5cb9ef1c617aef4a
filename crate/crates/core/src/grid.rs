//! Uniform time grid and the unitary spectral transform over it.
//!
//! The spectrum of an envelope `u(t)` is `ũ(ω) = Σ u(t) e^{+iωt} / √N`,
//! so a spectral component at angular frequency ω sits at optical frequency
//! ω₀ + ω. Bins are in standard DFT order: zero frequency at bin 0, positive
//! frequencies up to N/2 − 1, then negative frequencies.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

pub const MIN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    n_points: usize,
    window: f64,
}

impl TimeGrid {
    pub fn new(n_points: usize, window: f64) -> Result<Self> {
        if n_points < MIN_POINTS || !n_points.is_power_of_two() {
            return Err(param(
                "grid.points",
                format!("must be a power of two ≥ {MIN_POINTS}, got {n_points}"),
            ));
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(param("grid.window", format!("must be positive, got {window}")));
        }
        Ok(Self { n_points, window })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn dt(&self) -> f64 {
        self.window / self.n_points as f64
    }

    /// Sample time of bin `j`; the grid is centered so that bin N/2 is t = 0.
    pub fn time(&self, j: usize) -> f64 {
        (j as f64 - (self.n_points / 2) as f64) * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.time(j)).collect()
    }

    pub fn angular_frequency(&self, k: usize) -> f64 {
        let n = self.n_points as isize;
        let k = k as isize;
        let signed = if k < n / 2 { k } else { k - n };
        2.0 * PI * signed as f64 / self.window
    }

    pub fn angular_frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.angular_frequency(k)).collect()
    }

    /// Spacing of the angular-frequency axis.
    pub fn d_omega(&self) -> f64 {
        2.0 * PI / self.window
    }
}

/// Pair of FFT plans for one grid size. Cheap to clone; each clone owns its
/// scratch space, so give every worker thread its own.
#[derive(Clone)]
pub struct SpectralTransform {
    to_spectrum: Arc<dyn Fft<f64>>,
    from_spectrum: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    scale: f64,
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform")
            .field("len", &self.to_spectrum.len())
            .finish()
    }
}

impl SpectralTransform {
    pub fn new(n_points: usize) -> Self {
        let mut planner = FftPlanner::new();
        // rustfft's inverse plan carries e^{+iωt}, which is our forward sign.
        let to_spectrum = planner.plan_fft_inverse(n_points);
        let from_spectrum = planner.plan_fft_forward(n_points);
        let scratch_len = to_spectrum
            .get_inplace_scratch_len()
            .max(from_spectrum.get_inplace_scratch_len());
        Self {
            to_spectrum,
            from_spectrum,
            scratch: vec![Complex64::default(); scratch_len],
            scale: 1.0 / (n_points as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.to_spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unitary time → frequency transform, in place.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward_unscaled(data);
        data.iter_mut().for_each(|c| *c *= self.scale);
    }

    /// Unitary frequency → time transform, in place.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse_unscaled(data);
        data.iter_mut().for_each(|c| *c *= self.scale);
    }

    /// `Σ u e^{+iωt}` without normalization; pair with [`Self::inverse_unscaled`]
    /// and a 1/N factor folded into whatever multiplies the spectrum.
    pub fn forward_unscaled(&mut self, data: &mut [Complex64]) {
        self.to_spectrum
            .process_with_scratch(data, &mut self.scratch);
    }

    pub fn inverse_unscaled(&mut self, data: &mut [Complex64]) {
        self.from_spectrum
            .process_with_scratch(data, &mut self.scratch);
    }

    /// `Σ u e^{-iωt}` without normalization (rustfft's forward sign), used for
    /// real-kernel convolutions where the sign convention does not matter.
    pub(crate) fn conv_forward(&mut self, data: &mut [Complex64]) {
        self.inverse_unscaled(data);
    }

    pub(crate) fn conv_inverse(&mut self, data: &mut [Complex64]) {
        self.forward_unscaled(data);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn norm(v: &[Complex64]) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn grid_spacing() {
        let g = TimeGrid::new(4096, 10e-12).unwrap();
        assert!((g.dt() - 2.44140625e-15).abs() < 1e-27);
        assert_eq!(g.time(2048), 0.0);
        assert_eq!(g.angular_frequency(0), 0.0);
        assert!(g.angular_frequency(2047) > 0.0);
        assert!(g.angular_frequency(2048) < 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(100, 10e-12).is_err());
        assert!(TimeGrid::new(32, 10e-12).is_err());
        assert!(TimeGrid::new(128, 0.0).is_err());
    }

    #[test]
    fn unitary_round_trip_and_parseval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 4096;
        let u: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let mut t = SpectralTransform::new(n);
        let mut v = u.clone();
        t.forward(&mut v);
        let parseval = (norm(&v) - norm(&u)).abs() / norm(&u);
        assert!(parseval < 1e-10, "{parseval}");
        t.inverse(&mut v);
        let diff: Vec<Complex64> = v.iter().zip(&u).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) / norm(&u) < 1e-12);
    }

    #[test]
    fn forward_sign_matches_optical_detuning() {
        // e^{-iΔt} is a component at detuning +Δ.
        let g = TimeGrid::new(64, 1.0).unwrap();
        let k = 5;
        let w = g.angular_frequency(k);
        let mut u: Vec<Complex64> = (0..64)
            .map(|j| Complex64::from_polar(1.0, -w * j as f64 * g.dt()))
            .collect();
        SpectralTransform::new(64).forward(&mut u);
        let peak = u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, k);
    }
}
