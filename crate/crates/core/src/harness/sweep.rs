//! Pulse-energy sweep: one shot-noise reference and one propagated ensemble
//! per energy, reduced to Stokes samples and analyzed.
//!
//! Excess phase noise and the lumped loss act at detection, so an
//! [`EnergyRun`] can be re-analyzed for any GAWBS coefficient without
//! propagating again. That is what makes the angle fit cheap.

use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::field::init_coherent_sech;
use crate::polarimetry::{
    extract_squeezing_with, fit_gawbs_coefficient, reference_samples, stokes_of, AnglePoint, GawbsFit,
    ShotNoiseReference, SqueezingResult, StokesSampleSet, CIRCULAR_PHASE,
};
use crate::propagation::{run_ensemble, Propagator};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Raw outcome of one energy before detection-side processing.
#[derive(Debug, Clone)]
pub struct EnergyRun {
    /// Total pulse energy, joules.
    pub energy: f64,
    pub reference: ShotNoiseReference,
    pub samples: StokesSampleSet,
    pub aborted: usize,
    pub timings: Vec<StageTiming>,
}

pub fn simulate_energy(config: &RunConfig, energy: f64) -> Result<EnergyRun> {
    let spec = config.spec_at(energy);
    let label = format!("{:.1} pJ", energy * 1e12);

    let t = Instant::now();
    let mut ref_ensemble = config.ensemble.clone();
    ref_ensemble.n_trajectories = config.reference_trajectories;
    let ref_samples = reference_samples(&spec, config.grid, &config.model, &config.stepper, &ref_ensemble)?;
    let reference = ShotNoiseReference::from_samples(&ref_samples)?;
    let t_ref = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let propagator = Propagator::new(&spec, &config.model, &config.stepper, config.grid)?;
    let initial = init_coherent_sech(&spec, config.grid)?;
    let run = run_ensemble(
        &propagator,
        &initial,
        config.model.input_noise_enabled,
        &config.ensemble,
        Stream::Propagation,
        |_, s| stokes_of(&s, CIRCULAR_PHASE),
    )?;
    for (i, why) in &run.aborted {
        warn!("{label}: trajectory {i} aborted: {why}");
    }
    let t_prop = t.elapsed().as_secs_f64();
    info!("{label}: reference {t_ref:.1} s, ensemble {t_prop:.1} s");

    Ok(EnergyRun {
        energy,
        reference,
        aborted: run.aborted.len(),
        samples: StokesSampleSet::new(run.outputs, CIRCULAR_PHASE),
        timings: vec![
            StageTiming { stage: format!("{label} reference"), seconds: t_ref },
            StageTiming { stage: format!("{label} ensemble"), seconds: t_prop },
        ],
    })
}

impl EnergyRun {
    /// Squeezing after excess phase noise of strength `gawbs` (rad²/J):
    /// `(intrinsic, reported)`, where reported includes the lumped loss
    /// when the config asks for it.
    pub fn analyze(&self, config: &RunConfig, gawbs: f64) -> Result<(SqueezingResult, SqueezingResult)> {
        let samples = self
            .samples
            .with_gawbs(gawbs, 0.5 * self.energy, config.ensemble.master_seed)?;
        let intrinsic = extract_squeezing_with(&samples, &self.reference, config.analysis.theta_points)?;
        let reported = if config.analysis.apply_loss {
            intrinsic.with_lumped_loss(config.spec.detection.transmittance)?
        } else {
            intrinsic.clone()
        };
        Ok((intrinsic, reported))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Total pulse energy, joules.
    pub energy: f64,
    pub gawbs_coefficient: f64,
    /// Before the lumped detection loss.
    pub intrinsic: SqueezingResult,
    /// What the summary reports.
    pub reported: SqueezingResult,
    pub aborted: usize,
}

/// One line of the summary table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "energy_pJ")]
    pub energy_pj: f64,
    #[serde(rename = "squeezing_dB")]
    pub squeezing_db: f64,
    #[serde(rename = "antisqueezing_dB")]
    pub antisqueezing_db: f64,
    pub theta_sq_deg: f64,
    #[serde(rename = "sampling_err_dB")]
    pub sampling_err_db: f64,
}

impl From<&SweepRow> for SummaryRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            energy_pj: r.energy * 1e12,
            squeezing_db: r.reported.squeezing_db,
            antisqueezing_db: r.reported.antisqueezing_db,
            theta_sq_deg: r.reported.theta_sq_deg,
            sampling_err_db: r.reported.sampling_error_db,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Energies (joules) that failed, with the reason.
    pub failures: Vec<(f64, String)>,
    pub timings: Vec<StageTiming>,
}

impl SweepTable {
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.rows.iter().map(SummaryRow::from).collect()
    }

    pub fn aborted_trajectories(&self) -> usize {
        self.rows.iter().map(|r| r.aborted).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

fn is_fatal(e: &Error) -> bool {
    matches!(e, Error::Io { .. } | Error::Csv(_))
}

/// Runs every configured energy in order. `on_row` sees each finished row
/// immediately (the output writer flushes it to disk); an energy that fails
/// is recorded and the sweep moves on.
pub fn run_sweep<F>(config: &RunConfig, mut on_row: F) -> Result<SweepTable>
where
    F: FnMut(&SweepRow) -> Result<()>,
{
    config.validate()?;
    let mut table = SweepTable::default();
    for &energy in &config.energies {
        let outcome = simulate_energy(config, energy).and_then(|run| {
            let (intrinsic, reported) = run.analyze(config, config.spec.detection.gawbs_coefficient)?;
            Ok((run, intrinsic, reported))
        });
        match outcome {
            Ok((run, intrinsic, reported)) => {
                let row = SweepRow {
                    energy,
                    gawbs_coefficient: config.spec.detection.gawbs_coefficient,
                    intrinsic,
                    reported,
                    aborted: run.aborted,
                };
                on_row(&row)?;
                table.timings.extend(run.timings);
                table.rows.push(row);
            }
            Err(e) if is_fatal(&e) => return Err(e),
            Err(e) => {
                warn!("{:.1} pJ failed: {e}", energy * 1e12);
                table.failures.push((energy, e.to_string()));
            }
        }
    }
    Ok(table)
}

/// Fits the GAWBS coefficient to measured squeezing angles, propagating
/// each distinct measured energy once. Returns the fit and the runs, which
/// can be re-analyzed at the fitted coefficient.
pub fn fit_gawbs(config: &RunConfig, measured: &[AnglePoint]) -> Result<(GawbsFit, Vec<EnergyRun>)> {
    let mut runs: Vec<EnergyRun> = Vec::new();
    for p in measured {
        if !runs.iter().any(|r| r.energy == p.energy) {
            runs.push(simulate_energy(config, p.energy)?);
        }
    }
    let fit = fit_with_runs(config, &runs, measured)?;
    Ok((fit, runs))
}

/// Same as [`fit_gawbs`] with ensembles already propagated.
pub fn fit_with_runs(config: &RunConfig, runs: &[EnergyRun], measured: &[AnglePoint]) -> Result<GawbsFit> {
    fit_gawbs_coefficient(measured, &config.fit, |energy, g| {
        let run = runs
            .iter()
            .find(|r| r.energy == energy)
            .ok_or_else(|| Error::Config(format!("no simulated ensemble at {:.1} pJ", energy * 1e12)))?;
        Ok(run.analyze(config, g)?.0.theta_sq_deg)
    })
}
