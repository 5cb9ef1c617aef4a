//! Measured squeezing data and comparison against a sweep.
//!
//! Input CSV columns (only `energy_pJ` is required):
//!
//! ```text
//! energy_pJ,squeezing_dB,antisqueezing_dB,theta_deg,
//! squeezing_err_dB,antisqueezing_err_dB,theta_err_deg,
//! raw_noise_dBm,shot_noise_dBm,electronic_floor_dBm
//! ```
//!
//! When a row carries raw spectrum-analyzer levels for both the squeezed
//! trace and the shot-noise trace, the squeezing is recomputed from them
//! after subtracting the electronic floor in linear power.

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::sweep::SummaryRow;
use crate::error::{io_err, param, Error, Result};
use crate::polarimetry::AnglePoint;

/// `10·log₁₀(10^(raw/10) − 10^(floor/10))`; a floor of −∞ leaves `raw`
/// unchanged.
pub fn correct_electronic_noise(raw_dbm: f64, floor_dbm: f64) -> Result<f64> {
    if floor_dbm == f64::NEG_INFINITY {
        return Ok(raw_dbm);
    }
    if !(raw_dbm > floor_dbm) {
        return Err(Error::Unphysical(format!(
            "trace at {raw_dbm} dBm is not above the electronic floor {floor_dbm} dBm"
        )));
    }
    let lin = 10f64.powf(raw_dbm / 10.0) - 10f64.powf(floor_dbm / 10.0);
    Ok(10.0 * lin.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasuredPoint {
    /// Total pulse energy, joules.
    pub energy: f64,
    pub squeezing_db: Option<f64>,
    pub antisqueezing_db: Option<f64>,
    pub theta_deg: Option<f64>,
    pub squeezing_err_db: Option<f64>,
    pub antisqueezing_err_db: Option<f64>,
    pub theta_err_deg: Option<f64>,
    pub raw_noise_dbm: Option<f64>,
    pub shot_noise_dbm: Option<f64>,
    pub electronic_floor_dbm: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct MeasuredRecord {
    #[serde(rename = "energy_pJ")]
    energy_pj: f64,
    #[serde(default, rename = "squeezing_dB")]
    squeezing_db: Option<f64>,
    #[serde(default, rename = "antisqueezing_dB")]
    antisqueezing_db: Option<f64>,
    #[serde(default)]
    theta_deg: Option<f64>,
    #[serde(default, rename = "squeezing_err_dB")]
    squeezing_err_db: Option<f64>,
    #[serde(default, rename = "antisqueezing_err_dB")]
    antisqueezing_err_db: Option<f64>,
    #[serde(default)]
    theta_err_deg: Option<f64>,
    #[serde(default, rename = "raw_noise_dBm")]
    raw_noise_dbm: Option<f64>,
    #[serde(default, rename = "shot_noise_dBm")]
    shot_noise_dbm: Option<f64>,
    #[serde(default, rename = "electronic_floor_dBm")]
    electronic_floor_dbm: Option<f64>,
}

impl MeasuredPoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy >= 0.0) {
            return Err(param("measured.energy_pJ", "must be ≥ 0"));
        }
        if let (Some(raw), Some(floor)) = (self.raw_noise_dbm, self.electronic_floor_dbm) {
            if raw <= floor {
                return Err(Error::Unphysical(format!(
                    "measured point at {:.1} pJ: raw noise {raw} dBm is not above the floor {floor} dBm",
                    self.energy * 1e12
                )));
            }
        }
        Ok(())
    }

    /// Squeezing in dB, from the corrected traces when both are present.
    pub fn corrected_squeezing_db(&self) -> Result<Option<f64>> {
        match (self.raw_noise_dbm, self.shot_noise_dbm) {
            (Some(raw), Some(shot)) => {
                let floor = self.electronic_floor_dbm.unwrap_or(f64::NEG_INFINITY);
                Ok(Some(correct_electronic_noise(raw, floor)? - correct_electronic_noise(shot, floor)?))
            }
            _ => Ok(self.squeezing_db),
        }
    }
}

pub fn read_measured<R: std::io::Read>(reader: R) -> Result<Vec<MeasuredPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut points = Vec::new();
    for rec in rdr.deserialize() {
        let r: MeasuredRecord = rec?;
        let p = MeasuredPoint {
            energy: r.energy_pj * 1e-12,
            squeezing_db: r.squeezing_db,
            antisqueezing_db: r.antisqueezing_db,
            theta_deg: r.theta_deg,
            squeezing_err_db: r.squeezing_err_db,
            antisqueezing_err_db: r.antisqueezing_err_db,
            theta_err_deg: r.theta_err_deg,
            raw_noise_dbm: r.raw_noise_dbm,
            shot_noise_dbm: r.shot_noise_dbm,
            electronic_floor_dbm: r.electronic_floor_dbm,
        };
        p.validate()?;
        points.push(p);
    }
    Ok(points)
}

pub fn load_measured(path: impl AsRef<Path>) -> Result<Vec<MeasuredPoint>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_measured(file)
}

/// The squeezing angles of the measured points that have one.
pub fn angle_points(measured: &[MeasuredPoint]) -> Vec<AnglePoint> {
    measured
        .iter()
        .filter_map(|p| p.theta_deg.map(|theta_deg| AnglePoint { energy: p.energy, theta_deg }))
        .collect()
}

pub fn read_summary<R: std::io::Read>(reader: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn load_summary(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_summary(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub energy: f64,
    /// Simulated minus measured, dB.
    pub squeezing_db: Option<f64>,
    pub antisqueezing_db: Option<f64>,
    /// |θ_sim| − |θ_meas|, degrees.
    pub theta_deg: Option<f64>,
    /// Some residual exceeds the measured error bar given for it.
    pub outside_error_bars: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub points: Vec<PointResidual>,
    /// Measured energies outside the simulated range, joules.
    pub skipped: Vec<f64>,
    pub rms_squeezing_db: Option<f64>,
    pub rms_antisqueezing_db: Option<f64>,
    pub rms_theta_deg: Option<f64>,
}

/// Linear interpolation of a summary column at `energy_pj`; `None`
/// outside the simulated range.
fn interpolate(rows: &[SummaryRow], energy_pj: f64, col: fn(&SummaryRow) -> f64) -> Option<f64> {
    let (first, last) = (rows.first()?, rows.last()?);
    if energy_pj < first.energy_pj || energy_pj > last.energy_pj {
        return None;
    }
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if energy_pj >= a.energy_pj && energy_pj <= b.energy_pj {
            if energy_pj == a.energy_pj {
                return Some(col(a));
            }
            if energy_pj == b.energy_pj {
                return Some(col(b));
            }
            let f = (energy_pj - a.energy_pj) / (b.energy_pj - a.energy_pj);
            return Some(col(a) + f * (col(b) - col(a)));
        }
    }
    // single-row table at exactly that energy
    (energy_pj == first.energy_pj).then(|| col(first))
}

fn rms(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt())
}

pub fn compare_to_measurement(rows: &[SummaryRow], measured: &[MeasuredPoint]) -> Result<ComparisonReport> {
    if measured.is_empty() {
        return Err(param("compare.data", "need at least one measured point"));
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.energy_pj.total_cmp(&b.energy_pj));

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for p in measured {
        let e = p.energy * 1e12;
        let Some(sim_sq) = interpolate(&sorted, e, |r| r.squeezing_db) else {
            warn!("measured point at {e:.1} pJ lies outside the simulated range; skipped");
            skipped.push(p.energy);
            continue;
        };
        let sim_asq = interpolate(&sorted, e, |r| r.antisqueezing_db).unwrap_or(f64::NAN);
        let sim_theta = interpolate(&sorted, e, |r| r.theta_sq_deg).unwrap_or(f64::NAN);

        let d_sq = p.corrected_squeezing_db()?.map(|m| sim_sq - m);
        let d_asq = p.antisqueezing_db.map(|m| sim_asq - m);
        let d_theta = p.theta_deg.map(|m| sim_theta.abs() - m.abs());
        let outside = |d: Option<f64>, err: Option<f64>| matches!((d, err), (Some(d), Some(e)) if d.abs() > e);
        points.push(PointResidual {
            energy: p.energy,
            squeezing_db: d_sq,
            antisqueezing_db: d_asq,
            theta_deg: d_theta,
            outside_error_bars: outside(d_sq, p.squeezing_err_db)
                || outside(d_asq, p.antisqueezing_err_db)
                || outside(d_theta, p.theta_err_deg),
        });
    }
    Ok(ComparisonReport {
        rms_squeezing_db: rms(points.iter().filter_map(|p| p.squeezing_db)),
        rms_antisqueezing_db: rms(points.iter().filter_map(|p| p.antisqueezing_db)),
        rms_theta_deg: rms(points.iter().filter_map(|p| p.theta_deg)),
        points,
        skipped,
    })
}
