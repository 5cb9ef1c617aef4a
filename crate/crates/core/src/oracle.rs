//! Exact single-mode Kerr reference and its truncated-Wigner counterpart.
//!
//! The exact side evolves a coherent state under `exp(i(κ/2)n̂(n̂−1))` in a
//! truncated number basis. The stochastic side runs a CW field through the
//! propagation engine: with dispersion and Raman off every time bin is an
//! independent Kerr mode, so one trajectory supplies `n_points` samples.
//!
//! The engine omits the symmetric-ordering correction to the Kerr phase
//! (`|α|² → |α|² − 1`). It is a deterministic global rotation, so it moves
//! the squeezing angle but not the minimized variance compared here.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::field::{EnsembleConfig, FieldState};
use crate::grid::TimeGrid;
use crate::polarimetry::to_db;
use crate::propagation::{run_ensemble, LinearCoefficients, Propagator, SplitScheme, StepperConfig};
use crate::raman::RamanModel;
use crate::rng::Stream;

/// Amplitudes below this are dropped from the number basis.
pub const FOCK_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrMoments {
    pub mean_a: Complex64,
    pub mean_a2: Complex64,
    pub mean_n: f64,
    /// Largest photon number kept.
    pub cutoff: usize,
}

impl KerrMoments {
    /// Minimum over θ of Var(a e^{−iθ} + a† e^{iθ}); 1 for vacuum.
    pub fn min_quadrature_variance(&self) -> f64 {
        let a = self.mean_a;
        1.0 + 2.0 * (self.mean_n - a.norm_sqr()) - 2.0 * (self.mean_a2 - a * a).norm()
    }
}

/// Moments of `exp(i(κ/2)n̂(n̂−1))|α⟩`.
pub fn fock_kerr_moments(alpha: Complex64, kappa: f64) -> Result<KerrMoments> {
    let nbar = alpha.norm_sqr();
    if !(nbar > 0.0 && nbar <= 400.0) {
        return Err(param("oracle.alpha", format!("|α|² must lie in (0, 400], got {nbar}")));
    }
    let ln_abs = alpha.norm().ln();
    let arg = alpha.arg();
    let mut c: Vec<Complex64> = Vec::new();
    let mut ln_fact = 0.0;
    let mut n = 0usize;
    loop {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        let ln_mag = -0.5 * nbar + n as f64 * ln_abs - 0.5 * ln_fact;
        let mag = ln_mag.exp();
        let nf = n as f64;
        let phase = n as f64 * arg + 0.5 * kappa * nf * (nf - 1.0);
        c.push(Complex64::from_polar(mag, phase));
        if nf > nbar && mag < FOCK_CUTOFF {
            break;
        }
        n += 1;
    }
    let mut mean_a = Complex64::default();
    let mut mean_a2 = Complex64::default();
    let mut mean_n = 0.0;
    for k in 0..c.len() {
        mean_n += k as f64 * c[k].norm_sqr();
        if k + 1 < c.len() {
            mean_a += c[k].conj() * c[k + 1] * ((k + 1) as f64).sqrt();
        }
        if k + 2 < c.len() {
            mean_a2 += c[k].conj() * c[k + 2] * (((k + 1) * (k + 2)) as f64).sqrt();
        }
    }
    Ok(KerrMoments {
        mean_a,
        mean_a2,
        mean_n,
        cutoff: c.len() - 1,
    })
}

/// Minimized quadrature variance from truncated-Wigner samples, with its
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerEstimate {
    pub variance: f64,
    pub standard_error: f64,
    pub samples: usize,
}

/// Runs `n_trajectories` CW fields of `alpha_sq` photons per bin through a
/// pure-Kerr propagator with total phase `κ|α|²`.
pub fn wigner_kerr_variance(
    alpha_sq: f64,
    kappa: f64,
    n_points: usize,
    n_trajectories: usize,
    seed: u64,
) -> Result<WignerEstimate> {
    if !(alpha_sq > 0.0) || !(kappa >= 0.0) {
        return Err(param("oracle.case", "need |α|² > 0 and κ ≥ 0"));
    }
    // Unit window and length: κ = γ_f·L/dt.
    let grid = TimeGrid::new(n_points, 1.0)?;
    let dt = grid.dt();
    // Kerr alone is exact at any step count; size steps for the per-step
    // phase bound at a generous vacuum-noise peak.
    let peak = (alpha_sq.sqrt() + 4.0).powi(2);
    let stepper = StepperConfig {
        n_steps: ((kappa * peak / 0.04).ceil() as usize).max(1),
        scheme: SplitScheme::Strang,
        aliasing_guard: f64::INFINITY,
    };
    let propagator = Propagator::with_coefficients(
        LinearCoefficients::default(),
        kappa * dt,
        &RamanModel::disabled(),
        1.0,
        &stepper,
        grid,
    )?;
    let amp = (alpha_sq / dt).sqrt();
    let cw = vec![Complex64::new(amp, 0.0); n_points];
    let initial = FieldState::from_envelopes(grid, cw.clone(), cw)?;
    let ensemble = EnsembleConfig::new(n_trajectories, seed);
    let sqrt_dt = dt.sqrt();
    let run = run_ensemble(&propagator, &initial, true, &ensemble, Stream::Propagation, |_, s| {
        s.x.iter().chain(&s.y).map(|u| u * sqrt_dt).collect::<Vec<_>>()
    })?;

    let samples: Vec<Complex64> = run.outputs.into_iter().flatten().collect();
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / m;
    let (mut srr, mut sii, mut sri) = (0.0, 0.0, 0.0);
    for a in &samples {
        let d = a - mean;
        srr += d.re * d.re;
        sii += d.im * d.im;
        sri += d.re * d.im;
    }
    let k = 1.0 / (m - 1.0);
    let (srr, sii, sri) = (srr * k, sii * k, sri * k);
    let lam = 0.5 * (srr + sii) - (0.25 * (srr - sii).powi(2) + sri * sri).sqrt();
    let variance = 4.0 * lam;

    // sampling error along the minimizing direction
    let theta = 0.5 * (2.0 * sri).atan2(srr - sii) + std::f64::consts::FRAC_PI_2;
    let rot = Complex64::from_polar(1.0, -theta);
    let z: Vec<f64> = samples
        .iter()
        .map(|a| {
            let x = 2.0 * (rot * (a - mean)).re;
            x * x
        })
        .collect();
    let zm = z.iter().sum::<f64>() / m;
    let zv = z.iter().map(|v| (v - zm) * (v - zm)).sum::<f64>() / (m - 1.0);
    Ok(WignerEstimate {
        variance,
        standard_error: (zv / m).sqrt(),
        samples: samples.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub alpha_sq: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub case: OracleCase,
    pub exact_db: f64,
    pub wigner_db: f64,
    pub wigner_error_db: f64,
    pub fock_cutoff: usize,
}

impl OracleComparison {
    pub fn difference_db(&self) -> f64 {
        self.wigner_db - self.exact_db
    }
}

/// Default suite: small nonlinear phases at a few photon numbers.
pub fn default_cases() -> Vec<OracleCase> {
    [(10.0, 0.1), (10.0, 0.05), (20.0, 0.1), (5.0, 0.1)]
        .iter()
        .map(|&(alpha_sq, phase)| OracleCase {
            alpha_sq,
            kappa: phase / alpha_sq,
        })
        .collect()
}

pub fn compare_case(case: OracleCase, n_points: usize, n_trajectories: usize, seed: u64) -> Result<OracleComparison> {
    let exact = fock_kerr_moments(Complex64::new(case.alpha_sq.sqrt(), 0.0), case.kappa)?;
    let w = wigner_kerr_variance(case.alpha_sq, case.kappa, n_points, n_trajectories, seed)?;
    Ok(OracleComparison {
        case,
        exact_db: to_db(exact.min_quadrature_variance()),
        wigner_db: to_db(w.variance),
        wigner_error_db: 10.0 / std::f64::consts::LN_10 * w.standard_error / w.variance,
        fock_cutoff: exact.cutoff,
    })
}
