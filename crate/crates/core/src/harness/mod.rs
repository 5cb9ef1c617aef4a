//! Configuration, energy sweeps, measured-data comparison and output files.

pub mod config;
pub mod measured;
pub mod output;
pub mod sweep;
pub mod units;

pub use config::{AnalysisOptions, LoadedConfig, RunConfig};
pub use measured::{
    angle_points, compare_to_measurement, correct_electronic_noise, load_measured, load_summary, ComparisonReport,
    MeasuredPoint, PointResidual,
};
pub use output::{emit_outputs, OutputWriter, RunManifest};
pub use sweep::{fit_gawbs, fit_with_runs, run_sweep, simulate_energy, EnergyRun, StageTiming, SummaryRow, SweepRow, SweepTable};
