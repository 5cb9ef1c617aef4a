//! Split-step integration of the stochastic propagation equation
//!
//! ```text
//! ∂u/∂z = i(β₂/2)ω²ũ + i(β₃/6)ω³ũ − (α/2)u                  (spectral part)
//!       + iγ_f[(1−f_R)|u|² + f_R (h_R ⊛ |u|²)]u + iΓ_R u      (temporal part)
//! ```
//!
//! for each polarization axis independently, with `u` in photon-flux units
//! and `γ_f = γ·ħω₀` so that `γ_f|u|²` equals `γ·P`. `Γ_R` is the thermal
//! Raman phase noise from [`crate::raman`].
//!
//! Steps are symmetric compositions of exact linear (spectral) and exact
//! nonlinear (pure-phase) maps. Adjacent linear pieces are merged, so a
//! Strang step costs one spectral round trip per axis. The triple-jump
//! scheme composes three Strang steps with weights `w₁, w₀, w₁` into a
//! fourth-order symmetric step. Stochastic terms are drawn once per full
//! step and applied with the middle nonlinear substep, whose phases they
//! commute with.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{add_complex_noise, add_vacuum_noise, vacuum_amplitude, EnsembleConfig, FieldState};
use crate::grid::{SpectralTransform, TimeGrid};
use crate::physics::ExperimentSpec;
use crate::raman::{response_kernel, RamanModel, RamanNoise};
use crate::rng::{stream_rng, Stream, TrajectoryRng};

/// Bound on the nonlinear phase a single step may impose at peak flux.
pub const MAX_STEP_PHASE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationModel {
    /// Group-velocity dispersion (β₂).
    pub gvd_enabled: bool,
    /// Third-order dispersion (β₃).
    pub tod_enabled: bool,
    pub kerr_enabled: bool,
    pub raman: RamanModel,
    /// Distributed fiber attenuation. Off by default: the detection
    /// transmittance already accounts for it.
    pub loss_enabled: bool,
    pub input_noise_enabled: bool,
}

impl Default for PropagationModel {
    fn default() -> Self {
        Self {
            gvd_enabled: true,
            tod_enabled: true,
            kerr_enabled: true,
            raman: RamanModel::default(),
            loss_enabled: false,
            input_noise_enabled: true,
        }
    }
}

impl PropagationModel {
    /// Everything off: propagation is the identity.
    pub fn inert() -> Self {
        Self {
            gvd_enabled: false,
            tod_enabled: false,
            kerr_enabled: false,
            raman: RamanModel::disabled(),
            loss_enabled: false,
            input_noise_enabled: false,
        }
    }

    /// The linear, vacuum-noise-only model used for shot-noise calibration.
    pub fn shot_noise_reference(&self) -> Self {
        Self {
            kerr_enabled: false,
            raman: RamanModel::disabled(),
            loss_enabled: false,
            input_noise_enabled: true,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplitScheme {
    /// Second-order symmetric (Strang) splitting.
    Strang,
    /// Fourth-order symmetric composition of three Strang steps.
    #[default]
    TripleJump,
}

impl SplitScheme {
    /// Weights of the nonlinear substeps of one full step.
    pub fn weights(self) -> Vec<f64> {
        match self {
            SplitScheme::Strang => vec![1.0],
            SplitScheme::TripleJump => {
                let cbrt2 = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - cbrt2);
                let w0 = -cbrt2 * w1;
                vec![w1, w0, w1]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub n_steps: usize,
    pub scheme: SplitScheme,
    /// Largest tolerated fraction of (non-vacuum) photons in the outer
    /// quarter of the spectral window.
    pub aliasing_guard: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            n_steps: 4000,
            scheme: SplitScheme::TripleJump,
            aliasing_guard: 1e-4,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(crate::error::param("stepper.steps", "must be at least 1"));
        }
        if !(self.aliasing_guard > 0.0) {
            return Err(crate::error::param("stepper.aliasing_guard", "must be positive"));
        }
        Ok(())
    }
}

/// Per-thread buffers.
#[derive(Debug, Clone)]
pub struct Workspace {
    transform: SpectralTransform,
    intensity: Vec<Complex64>,
    noise: Vec<Complex64>,
}

impl Workspace {
    fn new(transform: &SpectralTransform) -> Self {
        let n = transform.len();
        Self {
            transform: transform.clone(),
            intensity: vec![Complex64::default(); n],
            noise: vec![Complex64::default(); n],
        }
    }
}

struct LinearSchedule {
    weights: Vec<f64>,
    /// Index into `factors` for the opening half step, the joints between
    /// substeps, the joint between steps, and the closing half step.
    first: usize,
    inner: Vec<usize>,
    boundary: usize,
    last: usize,
    factors: Vec<Vec<Complex64>>,
}

/// Precomputed operators for one fiber, model and grid; shared read-only
/// between trajectories.
pub struct Propagator {
    grid: TimeGrid,
    length: f64,
    n_steps: usize,
    dz: f64,
    gamma_flux: f64,
    raman_fraction: f64,
    /// `h̃_R·dt/N` in rustfft's forward sign, for the delayed response.
    raman_response: Option<Vec<Complex64>>,
    raman_noise: Option<RamanNoise>,
    loss_per_meter: f64,
    schedule: LinearSchedule,
    /// Linear map over the whole fiber, used when nothing is nonlinear.
    full_linear: Vec<Complex64>,
    aliasing_guard: f64,
    transform: SpectralTransform,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("n_points", &self.grid.n_points())
            .field("n_steps", &self.n_steps)
            .field("dz", &self.dz)
            .field("gamma_flux", &self.gamma_flux)
            .field("raman_fraction", &self.raman_fraction)
            .finish()
    }
}

impl Propagator {
    pub fn new(
        spec: &ExperimentSpec,
        model: &PropagationModel,
        stepper: &StepperConfig,
        grid: TimeGrid,
    ) -> Result<Self> {
        spec.fiber.validate()?;
        stepper.validate()?;
        model.raman.validate()?;
        let gamma = crate::physics::nonlinear_coefficient(&spec.fiber, spec.pulse.center_wavelength)?;
        let photon_energy = spec.pulse.photon_energy();
        let gamma_flux = if model.kerr_enabled { gamma * photon_energy } else { 0.0 };
        Self::with_coefficients(
            LinearCoefficients {
                beta2: if model.gvd_enabled { spec.fiber.beta2 } else { 0.0 },
                beta3: if model.tod_enabled { spec.fiber.beta3 } else { 0.0 },
                loss_per_meter: if model.loss_enabled {
                    spec.fiber.attenuation_per_meter()
                } else {
                    0.0
                },
            },
            gamma_flux,
            &model.raman,
            spec.fiber.length,
            stepper,
            grid,
        )
    }

    /// Builds a propagator from raw coefficients; `gamma_flux` in rad/m per
    /// photon/s. A zero `gamma_flux` makes the map linear.
    pub fn with_coefficients(
        linear: LinearCoefficients,
        gamma_flux: f64,
        raman: &RamanModel,
        length: f64,
        stepper: &StepperConfig,
        grid: TimeGrid,
    ) -> Result<Self> {
        stepper.validate()?;
        let n = grid.n_points();
        let dz = length / stepper.n_steps as f64;
        let mut transform = SpectralTransform::new(n);
        let omega = grid.angular_frequencies();
        let inv_n = 1.0 / n as f64;
        let factor = |h: f64| -> Vec<Complex64> {
            omega
                .iter()
                .map(|&w| {
                    let phase = (0.5 * linear.beta2 * w * w + linear.beta3 / 6.0 * w * w * w) * h;
                    Complex64::from_polar((-0.5 * linear.loss_per_meter * h).exp() * inv_n, phase)
                })
                .collect()
        };

        let weights = stepper.scheme.weights();
        let m = weights.len();
        let mut fractions: Vec<f64> = Vec::new();
        let mut index_of = |f: f64| -> usize {
            match fractions.iter().position(|&g| g == f) {
                Some(i) => i,
                None => {
                    fractions.push(f);
                    fractions.len() - 1
                }
            }
        };
        let first = index_of(0.5 * weights[0]);
        let inner: Vec<usize> = (0..m - 1).map(|i| index_of(0.5 * (weights[i] + weights[i + 1]))).collect();
        let boundary = index_of(0.5 * (weights[m - 1] + weights[0]));
        let last = index_of(0.5 * weights[m - 1]);
        let factors = fractions.iter().map(|&f| factor(f * dz)).collect();

        let raman_fraction = if gamma_flux > 0.0 { raman.active_fraction() } else { 0.0 };
        let (raman_response, raman_noise) = if raman_fraction > 0.0 {
            let kernel = response_kernel(raman, &grid)?;
            let dt = grid.dt();
            let mut h: Vec<Complex64> = kernel.lags.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            transform.conv_forward(&mut h);
            h.iter_mut().for_each(|c| *c *= dt * inv_n);
            let noise = RamanNoise::new(raman, &kernel, gamma_flux, &mut transform);
            (Some(h), Some(noise))
        } else {
            (None, None)
        };

        Ok(Self {
            grid,
            length,
            n_steps: stepper.n_steps,
            dz,
            gamma_flux,
            raman_fraction,
            raman_response,
            raman_noise,
            loss_per_meter: linear.loss_per_meter,
            schedule: LinearSchedule {
                weights,
                first,
                inner,
                boundary,
                last,
                factors,
            },
            full_linear: factor(length),
            aliasing_guard: stepper.aliasing_guard,
            transform,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn step_length(&self) -> f64 {
        self.dz
    }

    pub fn gamma_flux(&self) -> f64 {
        self.gamma_flux
    }

    pub fn is_linear(&self) -> bool {
        self.gamma_flux == 0.0
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(&self.transform)
    }

    /// Nonlinear phase of one full step at the given peak flux.
    pub fn step_phase(&self, peak_flux: f64) -> f64 {
        self.gamma_flux * peak_flux * self.dz
    }

    pub fn check_step_phase(&self, peak_flux: f64) -> Result<()> {
        let phase = self.step_phase(peak_flux);
        if phase >= MAX_STEP_PHASE {
            return Err(Error::Stepper(format!(
                "nonlinear phase per step {phase:.4} rad exceeds {MAX_STEP_PHASE} rad; \
                 use at least {} steps",
                (self.n_steps as f64 * phase / MAX_STEP_PHASE).ceil() as usize + 1
            )));
        }
        Ok(())
    }

    /// Noise-free propagation over the full fiber.
    pub fn propagate_deterministic(&self, state: &mut FieldState, ws: &mut Workspace) -> Result<()> {
        self.run::<TrajectoryRng, _>(state, None, ws, 0, |_, _, _| {})
    }

    /// Propagation with in-fiber noise (Raman phase noise and, with loss,
    /// vacuum replenishment) drawn from `rng`.
    pub fn propagate_stochastic<R: Rng + ?Sized>(
        &self,
        state: &mut FieldState,
        rng: &mut R,
        ws: &mut Workspace,
    ) -> Result<()> {
        self.run(state, Some(rng), ws, 0, |_, _, _| {})
    }

    /// Like the other entry points, calling `observer(step, z, state)` at
    /// z = 0 and after every `every`-th step.
    pub fn propagate_observed<R, F>(
        &self,
        state: &mut FieldState,
        rng: Option<&mut R>,
        ws: &mut Workspace,
        every: usize,
        observer: F,
    ) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, f64, &FieldState),
    {
        self.run(state, rng, ws, every.max(1), observer)
    }

    fn run<R, F>(
        &self,
        state: &mut FieldState,
        mut rng: Option<&mut R>,
        ws: &mut Workspace,
        every: usize,
        mut observer: F,
    ) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, f64, &FieldState),
    {
        if state.grid != self.grid {
            return Err(Error::GridMismatch("state and propagator grids differ".into()));
        }
        if every > 0 {
            observer(0, 0.0, state);
        }

        if self.is_linear() {
            self.apply_linear(state, &self.full_linear, ws);
            if let Some(rng) = rng.as_deref_mut() {
                self.replenish_vacuum(state, self.length, rng);
            }
            if every > 0 {
                observer(self.n_steps, self.length, state);
            }
            return self.check_output(state, rng.is_some(), ws);
        }

        let peak = state
            .x
            .iter()
            .chain(&state.y)
            .map(|c| c.norm_sqr())
            .fold(0.0, f64::max);
        self.check_step_phase(peak)?;

        let s = &self.schedule;
        let m = s.weights.len();
        let middle = m / 2;
        self.apply_linear(state, &s.factors[s.first], ws);
        for step in 0..self.n_steps {
            for (i, &w) in s.weights.iter().enumerate() {
                let stochastic = if i == middle { rng.as_deref_mut() } else { None };
                self.nonlinear(state, w * self.dz, stochastic, ws);
                if i + 1 < m {
                    self.apply_linear(state, &s.factors[s.inner[i]], ws);
                }
            }
            let is_last = step + 1 == self.n_steps;
            let observe = every > 0 && ((step + 1) % every == 0 || is_last);
            if is_last || observe {
                self.apply_linear(state, &s.factors[s.last], ws);
                if observe {
                    observer(step + 1, (step + 1) as f64 * self.dz, state);
                }
                if !is_last {
                    self.apply_linear(state, &s.factors[s.first], ws);
                }
            } else {
                self.apply_linear(state, &s.factors[s.boundary], ws);
            }
        }
        self.check_output(state, rng.is_some(), ws)
    }

    fn apply_linear(&self, state: &mut FieldState, factor: &[Complex64], ws: &mut Workspace) {
        for u in [&mut state.x, &mut state.y] {
            ws.transform.forward_unscaled(u);
            u.iter_mut().zip(factor).for_each(|(a, f)| *a *= f);
            ws.transform.inverse_unscaled(u);
        }
    }

    /// Exact pure-phase step of length `h`; with `rng`, also draws the
    /// per-step stochastic terms for a full step.
    fn nonlinear<R: Rng + ?Sized>(
        &self,
        state: &mut FieldState,
        h: f64,
        rng: Option<&mut R>,
        ws: &mut Workspace,
    ) {
        let coef = h * self.gamma_flux;
        let f = self.raman_fraction;

        if let Some(response) = &self.raman_response {
            // Both axes through one transform: the kernel is real.
            for ((b, x), y) in ws.intensity.iter_mut().zip(&state.x).zip(&state.y) {
                *b = Complex64::new(x.norm_sqr(), y.norm_sqr());
            }
            ws.transform.conv_forward(&mut ws.intensity);
            ws.intensity.iter_mut().zip(response).for_each(|(a, r)| *a *= r);
            ws.transform.conv_inverse(&mut ws.intensity);
        }

        let mut stochastic_phase = false;
        let mut rng = rng;
        if let (Some(noise), Some(rng)) = (&self.raman_noise, rng.as_deref_mut()) {
            noise.sample_into(self.dz, rng, &mut ws.transform, &mut ws.noise);
            stochastic_phase = true;
        }

        let delayed = self.raman_response.is_some();
        for j in 0..state.x.len() {
            let (ix, iy) = (state.x[j].norm_sqr(), state.y[j].norm_sqr());
            let (mut px, mut py) = if delayed {
                let c = ws.intensity[j];
                (
                    coef * ((1.0 - f) * ix + f * c.re),
                    coef * ((1.0 - f) * iy + f * c.im),
                )
            } else {
                (coef * ix, coef * iy)
            };
            if stochastic_phase {
                px += ws.noise[j].re;
                py += ws.noise[j].im;
            }
            let (sx, cx) = px.sin_cos();
            let (sy, cy) = py.sin_cos();
            state.x[j] *= Complex64::new(cx, sx);
            state.y[j] *= Complex64::new(cy, sy);
        }

        if let Some(rng) = rng {
            self.replenish_vacuum(state, self.dz, rng);
        }
    }

    /// Vacuum fluctuations admitted by distributed loss over `dz`.
    fn replenish_vacuum<R: Rng + ?Sized>(&self, state: &mut FieldState, dz: f64, rng: &mut R) {
        if self.loss_per_meter > 0.0 {
            let admitted = -(-self.loss_per_meter * dz).exp_m1();
            let sigma = vacuum_amplitude(self.grid.dt()) * admitted.sqrt();
            add_complex_noise(&mut state.x, sigma, rng);
            add_complex_noise(&mut state.y, sigma, rng);
        }
    }

    fn check_output(&self, state: &FieldState, noisy: bool, ws: &mut Workspace) -> Result<()> {
        if !state.is_finite() {
            return Err(Error::TrajectoryAborted {
                index: usize::MAX,
                reason: "non-finite field".into(),
            });
        }
        let n = self.grid.n_points();
        let edge_lo = 3 * n / 8;
        let edge_hi = n - 3 * n / 8;
        let dt = self.grid.dt();
        let mut edge = 0.0;
        let mut total = 0.0;
        for u in [&state.x, &state.y] {
            ws.intensity.copy_from_slice(u);
            ws.transform.forward(&mut ws.intensity);
            for (k, c) in ws.intensity.iter().enumerate() {
                let p = c.norm_sqr();
                total += p;
                if k >= edge_lo && k < edge_hi {
                    edge += p;
                }
            }
        }
        // |ũ_k|²·dt photons per bin; vacuum holds half a photon per bin.
        let (mut edge, total) = (edge * dt, total * dt);
        if noisy {
            edge -= 0.5 * 2.0 * (edge_hi - edge_lo) as f64;
        }
        if total > 0.0 && edge / total > self.aliasing_guard {
            return Err(Error::TrajectoryAborted {
                index: usize::MAX,
                reason: format!(
                    "aliasing guard: {:.3e} of photons in the outer spectral quarter (limit {:.1e})",
                    edge / total,
                    self.aliasing_guard
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearCoefficients {
    pub beta2: f64,
    pub beta3: f64,
    pub loss_per_meter: f64,
}

/// Propagates one state through the fiber. With `rng`, in-fiber noise terms
/// are drawn from it; input vacuum noise is the caller's business (see
/// [`crate::field::add_vacuum_noise`]).
pub fn propagate(
    spec: &ExperimentSpec,
    mut state: FieldState,
    model: &PropagationModel,
    stepper: &StepperConfig,
    rng: Option<&mut TrajectoryRng>,
) -> Result<FieldState> {
    let p = Propagator::new(spec, model, stepper, state.grid)?;
    let mut ws = p.workspace();
    match rng {
        Some(rng) => p.propagate_stochastic(&mut state, rng, &mut ws)?,
        None => p.propagate_deterministic(&mut state, &mut ws)?,
    }
    Ok(state)
}

/// Outcome of an ensemble: per-trajectory outputs in index order, with
/// aborted trajectories listed separately.
#[derive(Debug, Clone)]
pub struct EnsembleRun<T> {
    pub outputs: Vec<T>,
    pub aborted: Vec<(usize, String)>,
}

impl<T> EnsembleRun<T> {
    pub fn total(&self) -> usize {
        self.outputs.len() + self.aborted.len()
    }
}

/// Runs `ensemble.n_trajectories` trajectories from `initial`, mapping each
/// propagated state through `map`. Trajectory `i` draws all its randomness
/// from `stream_rng(seed, i, stream)`, so the result is independent of the
/// rayon pool it runs on.
pub fn run_ensemble<T, F>(
    propagator: &Propagator,
    initial: &FieldState,
    input_noise: bool,
    ensemble: &EnsembleConfig,
    stream: Stream,
    map: F,
) -> Result<EnsembleRun<T>>
where
    T: Send,
    F: Fn(usize, FieldState) -> T + Sync,
{
    ensemble.validate()?;
    let results: Vec<(usize, Result<T>)> = (0..ensemble.n_trajectories)
        .into_par_iter()
        .map_init(
            || propagator.workspace(),
            |ws, i| {
                let mut state = initial.clone();
                let outcome = if ensemble.noise_enabled {
                    let mut rng = stream_rng(ensemble.master_seed, i as u64, stream);
                    if input_noise {
                        add_vacuum_noise(&mut state, &mut rng);
                    }
                    propagator.propagate_stochastic(&mut state, &mut rng, ws)
                } else {
                    propagator.propagate_deterministic(&mut state, ws)
                };
                (i, outcome.map(|_| map(i, state)))
            },
        )
        .collect();

    let mut outputs = Vec::with_capacity(results.len());
    let mut aborted = Vec::new();
    for (i, r) in results {
        match r {
            Ok(v) => outputs.push(v),
            Err(Error::TrajectoryAborted { reason, .. }) => aborted.push((i, reason)),
            Err(e) => return Err(e),
        }
    }
    if aborted.len() * 100 > ensemble.n_trajectories {
        return Err(Error::EnsembleAborted {
            aborted: aborted.len(),
            total: ensemble.n_trajectories,
            first: aborted[0].1.clone(),
        });
    }
    Ok(EnsembleRun { outputs, aborted })
}

/// Propagated coherent-pulse ensemble for one experiment.
pub fn propagate_ensemble(
    spec: &ExperimentSpec,
    model: &PropagationModel,
    stepper: &StepperConfig,
    ensemble: &EnsembleConfig,
    grid: TimeGrid,
) -> Result<EnsembleRun<FieldState>> {
    let propagator = Propagator::new(spec, model, stepper, grid)?;
    let initial = crate::field::init_coherent_sech(spec, grid)?;
    run_ensemble(
        &propagator,
        &initial,
        model.input_noise_enabled,
        ensemble,
        Stream::Propagation,
        |_, s| s,
    )
}
