//! Fixtures shared by the benchmarks.

use polsqueeze::{init_coherent_sech, ExperimentSpec, FieldState, PropagationModel, Propagator, StepperConfig, TimeGrid};

/// Default experimental pulse at `energy` on an `n`-point, 5 ps grid, with a
/// propagator for the full model.
pub fn fixture(n: usize, energy: f64, stepper: &StepperConfig) -> (Propagator, FieldState) {
    let grid = TimeGrid::new(n, 5e-12).expect("grid");
    let spec = ExperimentSpec::default().with_total_energy(energy);
    let p = Propagator::new(&spec, &PropagationModel::default(), stepper, grid).expect("propagator");
    let s = init_coherent_sech(&spec, grid).expect("pulse");
    (p, s)
}
