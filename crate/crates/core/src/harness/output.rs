//! Output files of a sweep.
//!
//! * `summary.csv`: one row per energy at report precision (dB to three
//!   decimals, energy in pJ to one decimal).
//! * `summary_full.csv`: the same columns at full (round-trip) precision.
//! * `vtheta_<energy>pJ.csv`: V(θ) in dB for each energy.
//! * `fig_angle.csv`, `fig_squeezing.csv`, `fig_antisqueezing.csv`:
//!   plot-ready panels with error columns.
//! * `manifest.toml`: resolved config, seed, version, timings and aborts.
//!
//! Summary rows are flushed as each energy finishes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::sweep::{StageTiming, SweepRow, SweepTable};
use crate::error::{io_err, Error, Result};

pub const SUMMARY_HEADER: [&str; 5] = ["energy_pJ", "squeezing_dB", "antisqueezing_dB", "theta_sq_deg", "sampling_err_dB"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub master_seed: u64,
    pub threads: usize,
    pub aborted_trajectories: usize,
    pub failed_energies_pj: Vec<f64>,
    pub config: RunConfig,
    /// Wall-clock seconds per stage; the only part of the outputs that
    /// changes between identical runs.
    pub timing: Vec<StageTiming>,
}

impl RunManifest {
    pub fn new(config: &RunConfig, table: &SweepTable, threads: usize) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.ensemble.master_seed,
            threads,
            aborted_trajectories: table.aborted_trajectories(),
            failed_energies_pj: table.failures.iter().map(|(e, _)| e * 1e12).collect(),
            config: config.clone(),
            timing: table.timings.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

pub fn curve_file_name(energy: f64) -> String {
    format!("vtheta_{:.1}pJ.csv", energy * 1e12)
}

fn report_record(row: &SweepRow) -> [String; 5] {
    let r = &row.reported;
    [
        format!("{:.1}", row.energy * 1e12),
        format!("{:.3}", r.squeezing_db),
        format!("{:.3}", r.antisqueezing_db),
        format!("{:.3}", r.theta_sq_deg),
        format!("{:.3}", r.sampling_error_db),
    ]
}

fn full_record(row: &SweepRow) -> [String; 5] {
    let r = &row.reported;
    [
        (row.energy * 1e12).to_string(),
        r.squeezing_db.to_string(),
        r.antisqueezing_db.to_string(),
        r.theta_sq_deg.to_string(),
        r.sampling_error_db.to_string(),
    ]
}

/// Writes rows as they arrive. Creating it checks that the directory is
/// writable, so a bad path fails before any computation.
pub struct OutputWriter {
    dir: PathBuf,
    summary: csv::Writer<BufWriter<File>>,
    full: csv::Writer<BufWriter<File>>,
}

impl OutputWriter {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let mut summary = csv::Writer::from_writer(create(&dir.join("summary.csv"))?);
        let mut full = csv::Writer::from_writer(create(&dir.join("summary_full.csv"))?);
        summary.write_record(SUMMARY_HEADER)?;
        full.write_record(SUMMARY_HEADER)?;
        summary.flush().map_err(|e| io_err(&dir, e))?;
        full.flush().map_err(|e| io_err(&dir, e))?;
        Ok(Self { dir, summary, full })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_row(&mut self, row: &SweepRow) -> Result<()> {
        let curve = self.dir.join(curve_file_name(row.energy));
        row.reported.write_curve_csv(create(&curve)?)?;
        self.summary.write_record(report_record(row))?;
        self.full.write_record(full_record(row))?;
        self.summary.flush().map_err(|e| io_err(&self.dir, e))?;
        self.full.flush().map_err(|e| io_err(&self.dir, e))?;
        Ok(())
    }

    /// Writes the figure panels and the manifest.
    pub fn finish(self, table: &SweepTable, manifest: &RunManifest) -> Result<()> {
        let dir = self.dir;
        let panel = |name: &str, header: [&str; 4], f: &dyn Fn(&SweepRow) -> [f64; 3]| -> Result<()> {
            let mut w = csv::Writer::from_writer(create(&dir.join(name))?);
            w.write_record(header)?;
            for row in &table.rows {
                let [v, lo, hi] = f(row);
                w.write_record([
                    format!("{:.1}", row.energy * 1e12),
                    format!("{v:.3}"),
                    format!("{lo:.3}"),
                    format!("{hi:.3}"),
                ])?;
            }
            w.flush().map_err(|e| io_err(&dir, e))
        };
        panel("fig_angle.csv", ["energy_pJ", "theta_sq_deg", "lower_deg", "upper_deg"], &|r| {
            let (t, e) = (r.reported.theta_sq_deg, r.reported.theta_error_deg);
            [t, t - e, t + e]
        })?;
        panel("fig_squeezing.csv", ["energy_pJ", "squeezing_dB", "lower_dB", "upper_dB"], &|r| {
            let (v, e) = (r.reported.squeezing_db, r.reported.sampling_error_db);
            [v, v - e, v + e]
        })?;
        panel("fig_antisqueezing.csv", ["energy_pJ", "antisqueezing_dB", "lower_dB", "upper_dB"], &|r| {
            let (v, e) = (r.reported.antisqueezing_db, r.reported.antisqueezing_error_db);
            [v, v - e, v + e]
        })?;
        let path = dir.join("manifest.toml");
        let mut f = create(&path)?;
        f.write_all(manifest.to_toml()?.as_bytes()).map_err(|e| io_err(&path, e))?;
        f.flush().map_err(|e| io_err(&path, e))
    }
}

/// Writes every output for a finished (or partial) sweep at once.
pub fn emit_outputs(dir: impl AsRef<Path>, table: &SweepTable, manifest: &RunManifest) -> Result<()> {
    let mut w = OutputWriter::create(dir)?;
    for row in &table.rows {
        w.write_row(row)?;
    }
    w.finish(table, manifest)
}
