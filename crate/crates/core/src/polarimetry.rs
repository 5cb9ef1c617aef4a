//! Virtual Stokes measurement and the detection-side arithmetic.
//!
//! The two propagated axes are combined with a relative phase φ (π/2 for
//! a circular mean state) and reduced to pulse-integrated Stokes numbers:
//!
//! ```text
//! s0 = ∫(|u_x|² + |u_y|²)dt      s1 = ∫(|u_x|² − |u_y|²)dt
//! s2 + i·s3 = 2∫u_x* u_y e^{iφ} dt
//! ```
//!
//! For the circular state the dark plane is (s1, s2). With the analyzer
//! angle θ, `s_θ = s1·cosθ + s2·sinθ`; θ = 0 measures the photon-number
//! difference, i.e. the amplitude quadrature of each beam. In this
//! convention Kerr squeezing puts the minimum at a small negative θ.
//!
//! All variances are reported relative to a shot-noise reference measured
//! through the same pipeline on a linear (γ = 0) ensemble.

use std::f64::consts::{FRAC_PI_2, LN_10, PI};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::field::{init_coherent_sech, EnsembleConfig, FieldState};
use crate::grid::TimeGrid;
use crate::physics::ExperimentSpec;
use crate::propagation::{run_ensemble, PropagationModel, Propagator, StepperConfig};
use crate::rng::{stream_rng, Stream};

/// Relative phase that turns two equal linear beams into a circular state.
pub const CIRCULAR_PHASE: f64 = FRAC_PI_2;
pub const DEFAULT_THETA_POINTS: usize = 720;
/// Below this many trajectories a result is flagged low-confidence.
pub const MIN_CONFIDENT_TRAJECTORIES: usize = 100;

const DB_PER_NEPER: f64 = 10.0 / LN_10;

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StokesSample {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesSample {
    pub fn dark(&self, theta: f64) -> f64 {
        self.s1 * theta.cos() + self.s2 * theta.sin()
    }
}

/// Stokes numbers (in photons) of one field.
pub fn stokes_of(state: &FieldState, relative_phase: f64) -> StokesSample {
    let dt = state.grid.dt();
    let mut nx = 0.0;
    let mut ny = 0.0;
    let mut c = Complex64::default();
    for (x, y) in state.x.iter().zip(&state.y) {
        nx += x.norm_sqr();
        ny += y.norm_sqr();
        c += x.conj() * y;
    }
    let c = 2.0 * c * Complex64::from_polar(1.0, relative_phase) * dt;
    StokesSample {
        s0: (nx + ny) * dt,
        s1: (nx - ny) * dt,
        s2: c.re,
        s3: c.im,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesSampleSet {
    pub samples: Vec<StokesSample>,
    pub relative_phase: f64,
}

/// Ensemble covariance of (s1, s2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkCovariance {
    pub c11: f64,
    pub c12: f64,
    pub c22: f64,
}

impl DarkCovariance {
    pub fn variance(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.c11 * c * c + 2.0 * self.c12 * c * s + self.c22 * s * s
    }

    /// θ-averaged variance.
    pub fn mean_variance(&self) -> f64 {
        0.5 * (self.c11 + self.c22)
    }

    /// Largest relative excursion of V(θ) from its θ average.
    pub fn anisotropy(&self) -> f64 {
        let half_diff = 0.5 * (self.c11 - self.c22);
        half_diff.hypot(self.c12) / self.mean_variance()
    }
}

impl StokesSampleSet {
    pub fn new(samples: Vec<StokesSample>, relative_phase: f64) -> Self {
        Self {
            samples,
            relative_phase,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn means(&self) -> StokesSample {
        let n = self.len() as f64;
        let mut m = StokesSample::default();
        for s in &self.samples {
            m.s0 += s.s0;
            m.s1 += s.s1;
            m.s2 += s.s2;
            m.s3 += s.s3;
        }
        StokesSample {
            s0: m.s0 / n,
            s1: m.s1 / n,
            s2: m.s2 / n,
            s3: m.s3 / n,
        }
    }

    /// Unbiased covariance of (s1, s2); `None` for fewer than two samples.
    pub fn dark_covariance(&self) -> Option<DarkCovariance> {
        if self.len() < 2 {
            return None;
        }
        let m = self.means();
        let (mut c11, mut c12, mut c22) = (0.0, 0.0, 0.0);
        for s in &self.samples {
            let a = s.s1 - m.s1;
            let b = s.s2 - m.s2;
            c11 += a * a;
            c12 += a * b;
            c22 += b * b;
        }
        let k = 1.0 / (self.len() - 1) as f64;
        Some(DarkCovariance {
            c11: c11 * k,
            c12: c12 * k,
            c22: c22 * k,
        })
    }

    /// Standard error of the sample variance of `s_θ`, from the spread of
    /// squared deviations.
    pub fn variance_standard_error(&self, theta: f64) -> f64 {
        let n = self.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let y: Vec<f64> = self.samples.iter().map(|s| s.dark(theta)).collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        let z: Vec<f64> = y.iter().map(|v| (v - mean) * (v - mean)).collect();
        let zm = z.iter().sum::<f64>() / n as f64;
        let zv = z.iter().map(|v| (v - zm) * (v - zm)).sum::<f64>() / (n - 1) as f64;
        (zv / n as f64).sqrt()
    }

    /// Jackknife standard error of the minimizing angle over (up to) 20
    /// contiguous blocks of trajectories.
    pub fn theta_jackknife_error_deg(&self) -> f64 {
        let n = self.len();
        if n < 4 {
            return f64::NAN;
        }
        let blocks = n.min(20);
        // per-block raw sums of a, b, a², ab, b²
        let mut sums = vec![[0.0f64; 6]; blocks];
        for (i, s) in self.samples.iter().enumerate() {
            let k = i * blocks / n;
            let t = &mut sums[k];
            t[0] += s.s1;
            t[1] += s.s2;
            t[2] += s.s1 * s.s1;
            t[3] += s.s1 * s.s2;
            t[4] += s.s2 * s.s2;
            t[5] += 1.0;
        }
        let total = sums.iter().fold([0.0; 6], |mut acc, t| {
            acc.iter_mut().zip(t).for_each(|(a, b)| *a += b);
            acc
        });
        let angle = |t: &[f64; 6]| {
            let m = t[5];
            let (ma, mb) = (t[0] / m, t[1] / m);
            let c11 = t[2] / m - ma * ma;
            let c12 = t[3] / m - ma * mb;
            let c22 = t[4] / m - mb * mb;
            0.5 * (2.0 * c12).atan2(c11 - c22) + FRAC_PI_2
        };
        let full = angle(&total);
        let leave_out: Vec<f64> = sums
            .iter()
            .map(|t| {
                let mut r = total;
                r.iter_mut().zip(t).for_each(|(a, b)| *a -= b);
                // wrap the difference into (−π/2, π/2]
                (angle(&r) - full + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
            })
            .collect();
        let mean = leave_out.iter().sum::<f64>() / blocks as f64;
        let ss: f64 = leave_out.iter().map(|d| (d - mean) * (d - mean)).sum();
        ((blocks - 1) as f64 / blocks as f64 * ss).sqrt().to_degrees()
    }

    /// Extra, classical phase jitter between the axes: for every trajectory
    /// `δφ_x, δφ_y ~ N(0, coefficient·E_pol)` drawn from the detection
    /// stream of `master_seed`. The relative phase δφ_y − δφ_x rotates
    /// (s2, s3); s0 and s1 are untouched.
    pub fn with_gawbs(&self, coefficient: f64, energy_per_polarization: f64, master_seed: u64) -> Result<Self> {
        check_gawbs(coefficient, energy_per_polarization)?;
        if coefficient == 0.0 {
            return Ok(self.clone());
        }
        let sigma = (coefficient * energy_per_polarization).sqrt();
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = stream_rng(master_seed, i as u64, Stream::Gawbs);
                let (dx, dy) = gawbs_pair(sigma, &mut rng);
                let (sn, cs) = (dy - dx).sin_cos();
                StokesSample {
                    s2: s.s2 * cs - s.s3 * sn,
                    s3: s.s2 * sn + s.s3 * cs,
                    ..*s
                }
            })
            .collect();
        Ok(Self::new(samples, self.relative_phase))
    }
}

fn check_gawbs(coefficient: f64, energy: f64) -> Result<()> {
    if !(coefficient >= 0.0 && coefficient.is_finite()) {
        return Err(param("detection.gawbs_coefficient", format!("must be ≥ 0, got {coefficient}")));
    }
    if !(energy >= 0.0) {
        return Err(param("pulse.energy", "must be ≥ 0"));
    }
    Ok(())
}

fn gawbs_pair<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> (f64, f64) {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    (sigma * a, sigma * b)
}

/// Field-level version of [`StokesSampleSet::with_gawbs`]: multiplies each
/// axis by its own random phase factor. Consumes the generator in the same
/// order, so both versions agree for the same stream.
pub fn apply_gawbs_field<R: Rng + ?Sized>(
    state: &mut FieldState,
    coefficient: f64,
    energy_per_polarization: f64,
    rng: &mut R,
) -> Result<()> {
    check_gawbs(coefficient, energy_per_polarization)?;
    if coefficient == 0.0 {
        return Ok(());
    }
    let (dx, dy) = gawbs_pair((coefficient * energy_per_polarization).sqrt(), rng);
    let (px, py) = (Complex64::from_polar(1.0, dx), Complex64::from_polar(1.0, dy));
    state.x.iter_mut().for_each(|u| *u *= px);
    state.y.iter_mut().for_each(|u| *u *= py);
    Ok(())
}

pub fn stokes_samples(states: &[FieldState], relative_phase: f64) -> Result<StokesSampleSet> {
    if let Some(first) = states.first() {
        if let Some(bad) = states.iter().position(|s| s.grid != first.grid) {
            return Err(Error::GridMismatch(format!("trajectory {bad} uses a different grid")));
        }
    }
    Ok(StokesSampleSet::new(
        states.iter().map(|s| stokes_of(s, relative_phase)).collect(),
        relative_phase,
    ))
}

/// Unbiased ensemble variance of the dark-plane component at angle θ.
pub fn dark_plane_variance(samples: &StokesSampleSet, theta: f64) -> Result<f64> {
    samples
        .dark_covariance()
        .map(|c| c.variance(theta))
        .ok_or_else(|| param("ensemble.trajectories", "need at least 2 trajectories for a variance"))
}

/// Shot-noise level measured on a linear ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseReference {
    /// θ-averaged dark-plane variance, photons².
    pub variance: f64,
    /// Relative standard error of `variance`.
    pub relative_error: f64,
    /// Largest relative deviation of V(θ) from `variance`.
    pub anisotropy: f64,
    pub n_trajectories: usize,
    pub mean_photons: f64,
}

impl ShotNoiseReference {
    /// Calibrates from reference samples. The tolerated anisotropy is 2%
    /// plus four standard deviations of its sampling noise (≈1/√M), so a
    /// finite but flawless reference is not rejected.
    pub fn from_samples(samples: &StokesSampleSet) -> Result<Self> {
        let cov = samples
            .dark_covariance()
            .ok_or_else(|| Error::Calibration("reference ensemble needs at least 2 trajectories".into()))?;
        let n = samples.len();
        let variance = cov.mean_variance();
        if !(variance > 0.0) {
            return Err(Error::Calibration(format!("reference variance {variance} is not positive")));
        }
        let anisotropy = cov.anisotropy();
        let limit = calibration_tolerance(n);
        if anisotropy > limit {
            return Err(Error::Calibration(format!(
                "reference variance varies by {:.2}% across θ (limit {:.2}% for {n} trajectories)",
                100.0 * anisotropy,
                100.0 * limit
            )));
        }
        // average of two nearly independent Gaussian variance estimates
        let relative_error = (1.0 / n as f64).sqrt();
        Ok(Self {
            variance,
            relative_error,
            anisotropy,
            n_trajectories: n,
            mean_photons: samples.means().s0,
        })
    }
}

pub fn calibration_tolerance(n_trajectories: usize) -> f64 {
    0.02 + 4.0 / (n_trajectories as f64).sqrt()
}

/// Runs the measurement pipeline on a γ = 0, Raman-free, lossless ensemble
/// with vacuum input noise at the pulse energy of `spec`.
pub fn shot_noise_reference(
    spec: &ExperimentSpec,
    grid: TimeGrid,
    model: &PropagationModel,
    stepper: &StepperConfig,
    ensemble: &EnsembleConfig,
) -> Result<ShotNoiseReference> {
    let samples = reference_samples(spec, grid, model, stepper, ensemble)?;
    ShotNoiseReference::from_samples(&samples)
}

pub fn reference_samples(
    spec: &ExperimentSpec,
    grid: TimeGrid,
    model: &PropagationModel,
    stepper: &StepperConfig,
    ensemble: &EnsembleConfig,
) -> Result<StokesSampleSet> {
    let linear = model.shot_noise_reference();
    let propagator = Propagator::new(spec, &linear, stepper, grid)?;
    let initial = init_coherent_sech(spec, grid)?;
    let ens = EnsembleConfig {
        noise_enabled: true,
        ..ensemble.clone()
    };
    let run = run_ensemble(&propagator, &initial, true, &ens, Stream::Reference, |_, s| {
        stokes_of(&s, CIRCULAR_PHASE)
    })?;
    Ok(StokesSampleSet::new(run.outputs, CIRCULAR_PHASE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingResult {
    /// Analyzer angles, radians, uniform over [0, π).
    pub theta_grid: Vec<f64>,
    /// V(θ)/SNL in dB on `theta_grid`.
    pub variance_db: Vec<f64>,
    pub squeezing_db: f64,
    pub antisqueezing_db: f64,
    /// Angle of minimum variance from the amplitude quadrature, degrees,
    /// folded into (−90°, 90°].
    pub theta_sq_deg: f64,
    pub theta_antisq_deg: f64,
    /// Jackknife error of `theta_sq_deg`; NaN below 4 trajectories.
    pub theta_error_deg: f64,
    /// One-sigma sampling error of `squeezing_db`.
    pub sampling_error_db: f64,
    pub antisqueezing_error_db: f64,
    /// Shot-noise variance, photons².
    pub shot_noise_reference: f64,
    pub n_trajectories: usize,
    pub low_confidence: bool,
}

impl SqueezingResult {
    pub fn v_min(&self) -> f64 {
        from_db(self.squeezing_db)
    }

    pub fn v_max(&self) -> f64 {
        from_db(self.antisqueezing_db)
    }

    /// Product of the extremal variances in SNL units.
    pub fn uncertainty_product(&self) -> f64 {
        self.v_min() * self.v_max()
    }

    /// Result after a lumped beam-splitter loss of transmittance `eta`.
    pub fn with_lumped_loss(&self, eta: f64) -> Result<Self> {
        let shrink = |db: f64, err: f64| -> Result<(f64, f64)> {
            let v = from_db(db);
            let out = apply_lumped_loss(v, eta)?;
            // dV' = η·dV, propagated through the logarithm
            Ok((to_db(out), err * eta * v / out))
        };
        let (sq, sq_err) = shrink(self.squeezing_db, self.sampling_error_db)?;
        let (asq, asq_err) = shrink(self.antisqueezing_db, self.antisqueezing_error_db)?;
        let variance_db = self
            .variance_db
            .iter()
            .map(|&d| apply_lumped_loss(from_db(d), eta).map(to_db))
            .collect::<Result<_>>()?;
        Ok(Self {
            variance_db,
            squeezing_db: sq,
            antisqueezing_db: asq,
            sampling_error_db: sq_err,
            antisqueezing_error_db: asq_err,
            ..self.clone()
        })
    }

    /// Writes `theta_deg,variance_db` rows.
    pub fn write_curve_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theta_deg", "variance_db"])?;
        for (t, v) in self.theta_grid.iter().zip(&self.variance_db) {
            w.write_record([format!("{:.4}", t.to_degrees()), format!("{v:.6}")])?;
        }
        w.flush().map_err(|e| crate::error::io_err("<curve csv>", e))?;
        Ok(())
    }
}

/// Folds an angle in radians into (−90°, 90°].
fn fold_degrees(theta: f64) -> f64 {
    let mut d = theta.to_degrees().rem_euclid(180.0);
    if d > 90.0 {
        d -= 180.0;
    }
    d
}

/// Vertex of the parabola through three equally spaced points, as an
/// offset in units of the spacing.
fn parabola_vertex(ym: f64, y0: f64, yp: f64) -> (f64, f64) {
    let curv = ym - 2.0 * y0 + yp;
    if curv == 0.0 {
        return (0.0, y0);
    }
    let off = 0.5 * (ym - yp) / curv;
    (off, y0 - 0.25 * (ym - yp) * off)
}

pub fn extract_squeezing(samples: &StokesSampleSet, reference: &ShotNoiseReference) -> Result<SqueezingResult> {
    extract_squeezing_with(samples, reference, DEFAULT_THETA_POINTS)
}

pub fn extract_squeezing_with(
    samples: &StokesSampleSet,
    reference: &ShotNoiseReference,
    theta_points: usize,
) -> Result<SqueezingResult> {
    if !(reference.variance > 0.0) {
        return Err(Error::Calibration("shot-noise reference must be positive".into()));
    }
    if theta_points < 8 {
        return Err(param("analysis.theta_points", "need at least 8 angles"));
    }
    let cov = samples
        .dark_covariance()
        .ok_or_else(|| param("ensemble.trajectories", "need at least 2 trajectories"))?;
    let snl = reference.variance;
    let step = PI / theta_points as f64;
    let theta_grid: Vec<f64> = (0..theta_points).map(|k| k as f64 * step).collect();
    let v: Vec<f64> = theta_grid.iter().map(|&t| cov.variance(t) / snl).collect();

    let refine = |k: usize| -> (f64, f64) {
        let n = v.len();
        let (off, val) = parabola_vertex(v[(k + n - 1) % n], v[k], v[(k + 1) % n]);
        (theta_grid[k] + off * step, val)
    };
    let kmin = (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    let kmax = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    let (theta_min, v_min) = refine(kmin);
    let (theta_max, v_max) = refine(kmax);
    if !(v_min > 0.0) {
        return Err(Error::Unphysical(format!("minimum variance {v_min} is not positive")));
    }

    let rel = |theta: f64, var: f64| samples.variance_standard_error(theta) / var;
    let ref_rel = reference.relative_error;
    let err_db = |r: f64| DB_PER_NEPER * (r * r + ref_rel * ref_rel).sqrt();

    Ok(SqueezingResult {
        variance_db: v.iter().map(|&x| to_db(x)).collect(),
        theta_grid,
        squeezing_db: to_db(v_min),
        antisqueezing_db: to_db(v_max),
        theta_sq_deg: fold_degrees(theta_min),
        theta_antisq_deg: fold_degrees(theta_max),
        theta_error_deg: samples.theta_jackknife_error_deg(),
        sampling_error_db: err_db(rel(theta_min, v_min * snl)),
        antisqueezing_error_db: err_db(rel(theta_max, v_max * snl)),
        shot_noise_reference: snl,
        n_trajectories: samples.len(),
        low_confidence: samples.len() < MIN_CONFIDENT_TRAJECTORIES,
    })
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(param("detection.transmittance", format!("must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

/// Beam-splitter loss on a variance in SNL units: `ηV + (1 − η)`.
pub fn apply_lumped_loss(v: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(eta * v + (1.0 - eta))
}

/// Undoes [`apply_lumped_loss`] on a value in dB.
pub fn infer_lossless(v_measured_db: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let v = from_db(v_measured_db);
    let floor = 1.0 - eta;
    if v <= floor {
        return Err(Error::Unphysical(format!(
            "measured variance {v:.4} (SNL units) is at or below the loss floor 1 − η = {floor:.4}"
        )));
    }
    Ok(to_db((v - floor) / eta))
}

/// Amplitude-normalized quadrature variance of one beam,
/// `X_θ = 2Re(e^{−iθ}∫ū*(u − ū)dt)/‖ū‖`, with vacuum at 1.
pub fn single_beam_quadrature_variance(states: &[FieldState], pol: crate::field::Polarization, theta: f64) -> Result<f64> {
    if states.len() < 2 {
        return Err(param("ensemble.trajectories", "need at least 2 trajectories"));
    }
    let n = states[0].grid.n_points();
    let dt = states[0].grid.dt();
    let m = states.len() as f64;
    let mut mean = vec![Complex64::default(); n];
    for s in states {
        mean.iter_mut().zip(s.pol(pol)).for_each(|(a, b)| *a += b);
    }
    mean.iter_mut().for_each(|a| *a /= m);
    let norm = (mean.iter().map(|c| c.norm_sqr()).sum::<f64>() * dt).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Unphysical("mean field vanishes; quadrature undefined".into()));
    }
    let rot = Complex64::from_polar(1.0, -theta);
    let x: Vec<f64> = states
        .iter()
        .map(|s| {
            let proj: Complex64 = mean.iter().zip(s.pol(pol)).map(|(a, u)| a.conj() * (u - a)).sum();
            2.0 * (rot * proj * dt).re / norm
        })
        .collect();
    let xm = x.iter().sum::<f64>() / m;
    Ok(x.iter().map(|v| (v - xm) * (v - xm)).sum::<f64>() / (m - 1.0))
}

/// One measured squeezing angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePoint {
    /// Total pulse energy, joules.
    pub energy: f64,
    pub theta_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GawbsFitOptions {
    /// Upper end of the search bracket, rad²/J.
    pub g_max: f64,
    /// Bracket width at which the search stops, rad²/J.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub min_points: usize,
}

impl Default for GawbsFitOptions {
    fn default() -> Self {
        Self {
            g_max: 1e3,
            tolerance: 1e-3,
            max_iterations: 100,
            min_points: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GawbsFit {
    pub coefficient: f64,
    /// Sum of squared angle residuals, deg².
    pub residual: f64,
    /// Simulated minus measured |θ| per point, degrees.
    pub point_residuals: Vec<f64>,
    pub iterations: usize,
}

/// Least-squares fit of the GAWBS coefficient by golden-section search.
///
/// `simulate(energy, g)` returns the squeezing angle in degrees. Angles are
/// compared by magnitude: the sign depends on the analyzer handedness,
/// which a measured angle does not fix.
pub fn fit_gawbs_coefficient<F>(measured: &[AnglePoint], options: &GawbsFitOptions, mut simulate: F) -> Result<GawbsFit>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    if measured.len() < options.min_points.max(1) {
        return Err(param(
            "fit.points",
            format!("need at least {} measured angles, got {}", options.min_points.max(1), measured.len()),
        ));
    }
    if !(options.g_max > 0.0) {
        return Err(param("fit.g_max", "must be positive"));
    }
    let mut cost = |g: f64| -> Result<(f64, Vec<f64>)> {
        let mut res = Vec::with_capacity(measured.len());
        for p in measured {
            res.push(simulate(p.energy, g)?.abs() - p.theta_deg.abs());
        }
        Ok((res.iter().map(|r| r * r).sum(), res))
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, options.g_max);
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = cost(a)?.0;
    let mut fb = cost(b)?.0;
    let mut iterations = 0;
    while hi - lo > options.tolerance {
        if iterations == options.max_iterations {
            return Err(Error::FitDiverged { iterations, lo, hi });
        }
        iterations += 1;
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = cost(a)?.0;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = cost(b)?.0;
        }
    }
    // the bracket ends are candidates too; g = 0 matters for clean data
    let mut best = (0.5 * (lo + hi), f64::INFINITY, Vec::new());
    for g in [lo, 0.5 * (lo + hi), hi] {
        let (c, r) = cost(g)?;
        if c < best.1 {
            best = (g, c, r);
        }
    }
    Ok(GawbsFit {
        coefficient: best.0,
        residual: best.1,
        point_residuals: best.2,
        iterations,
    })
}
