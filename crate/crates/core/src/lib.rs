//! Stochastic (truncated-Wigner) simulation of polarization squeezing of
//! ultrashort pulses in a birefringent Kerr fiber.
//!
//! Two equal coherent sech pulses travel on the principal axes, pick up
//! Kerr and Raman nonlinearity independently, and are detected as a Stokes
//! vector in the dark plane. The squeezing level is the minimum normalized
//! variance of the dark-plane Stokes component over the analyzer angle.

pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod oracle;
pub mod physics;
pub mod polarimetry;
pub mod propagation;
pub mod raman;
pub mod rng;

pub use error::{Error, Result};
pub use field::{add_vacuum_noise, init_coherent_sech, EnsembleConfig, FieldState, Polarization};
pub use grid::{SpectralTransform, TimeGrid};
pub use physics::{
    derive_scales, DerivedScales, DetectionSpec, ExperimentSpec, FiberSpec, PulseShape, PulseSpec,
};
pub use propagation::{
    propagate, propagate_ensemble, run_ensemble, EnsembleRun, PropagationModel, Propagator,
    SplitScheme, StepperConfig,
};
pub use raman::{response_kernel, RamanKernel, RamanModel, RamanNoise};
pub use rng::{stream_rng, trajectory_rng, Stream, TrajectoryRng};
pub use polarimetry::{
    apply_lumped_loss, extract_squeezing, fit_gawbs_coefficient, infer_lossless, shot_noise_reference,
    stokes_samples, AnglePoint, GawbsFit, GawbsFitOptions, ShotNoiseReference, SqueezingResult, StokesSample,
    StokesSampleSet,
};
pub use harness::{RunConfig, SweepRow, SweepTable};
