use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use polsqueeze::harness::units::{parse_quantity, Dimension};
use polsqueeze::harness::{
    angle_points, compare_to_measurement, fit_with_runs, load_measured, load_summary, run_sweep, simulate_energy,
    ComparisonReport, OutputWriter, RunManifest, SweepRow, SweepTable,
};
use polsqueeze::oracle::{compare_case, default_cases};
use polsqueeze::{Error, RunConfig};

/// Exit status for a run that finished with some energies missing.
const EXIT_PARTIAL: u8 = 1;
/// Exit status for anything rejected before computation started.
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "polsqueeze", version, about = "Polarization squeezing of ultrashort pulses in Kerr fiber")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pulse-energy sweep and write summary, curves and manifest.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Master seed; required so every sweep is reproducible on purpose.
        #[arg(long)]
        seed: u64,
    },
    /// Simulate one energy and print its squeezing result.
    Single {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Pulse energy, e.g. "98.6 pJ".
        #[arg(long)]
        energy: String,
    },
    /// Fit the GAWBS coefficient to measured squeezing angles.
    FitGawbs {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Measured-data CSV (energy_pJ, theta_deg, ...).
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare a summary CSV against measured data.
    Compare {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Check the stochastic Kerr model against exact number-basis evolution.
    Oracle {
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long, default_value_t = 4000)]
        trajectories: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Largest accepted |difference| in dB.
        #[arg(long, default_value_t = 0.1)]
        tolerance: f64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// Options shared by the simulating subcommands; each overrides the
/// corresponding config-file key.
#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for trajectories (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    reference_trajectories: Option<usize>,
    /// Comma-separated energies, e.g. "35 pJ, 98.6 pJ".
    #[arg(long)]
    energies: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    /// GAWBS coefficient, rad²/J.
    #[arg(long)]
    gawbs: Option<f64>,
}

struct Failure {
    code: u8,
    message: String,
}

fn config_error(error: Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: error.to_string(),
    }
}

fn run_error(error: Error) -> Failure {
    let code = match error {
        Error::Config(_) | Error::Parameter { .. } | Error::Truncation(_) | Error::Stepper(_) => EXIT_CONFIG,
        _ => EXIT_PARTIAL,
    };
    Failure {
        code,
        message: error.to_string(),
    }
}

fn parse_energies(list: &str) -> Result<Vec<f64>, Error> {
    list.split(',')
        .map(|s| parse_quantity(s, Dimension::Energy).map_err(|e| Error::Config(format!("--energies: {e}"))))
        .collect()
}

impl RunArgs {
    fn resolve(&self, seed: Option<u64>) -> Result<RunConfig, Failure> {
        let loaded = match &self.config {
            Some(path) => RunConfig::load(path).map_err(config_error)?,
            None => RunConfig::from_toml_str("").map_err(config_error)?,
        };
        let mut c = loaded.config;
        if let Some(s) = seed {
            c.ensemble.master_seed = s;
        }
        if let Some(m) = self.trajectories {
            c.ensemble.n_trajectories = m;
        }
        if let Some(m) = self.reference_trajectories {
            c.reference_trajectories = m;
        }
        if let Some(list) = &self.energies {
            c.energies = parse_energies(list).map_err(config_error)?;
        }
        if let Some(n) = self.steps {
            c.stepper.n_steps = n;
        }
        if let Some(g) = self.gawbs {
            c.spec.detection.gawbs_coefficient = g;
        }
        if let Some(dir) = &self.out {
            c.output_dir = Some(dir.clone());
        }
        c.validate().map_err(config_error)?;
        Ok(c)
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(config_error(Error::Config("--threads must be at least 1".into())));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| config_error(Error::Config(e.to_string())))
}

fn print_row(row: &SweepRow) {
    let r = &row.reported;
    println!(
        "{:>8.1} pJ  sq {:>8.3} dB  antisq {:>7.3} dB  θ {:>7.3}°  ±{:.3} dB{}",
        row.energy * 1e12,
        r.squeezing_db,
        r.antisqueezing_db,
        r.theta_sq_deg,
        r.sampling_error_db,
        if r.low_confidence { "  (low confidence)" } else { "" }
    );
}

fn sweep(run: &RunArgs, seed: u64) -> Result<(), Failure> {
    let config = run.resolve(Some(seed))?;
    let pool = thread_pool(run.threads)?;
    let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    // opened up front so an unwritable directory fails before any work
    let mut writer = OutputWriter::create(&dir).map_err(config_error)?;
    let table = pool
        .install(|| {
            run_sweep(&config, |row| {
                print_row(row);
                writer.write_row(row)
            })
        })
        .map_err(run_error)?;
    finish(writer, &config, &table, pool.current_num_threads())
}

fn finish(writer: OutputWriter, config: &RunConfig, table: &SweepTable, threads: usize) -> Result<(), Failure> {
    let manifest = RunManifest::new(config, table, threads);
    let dir = writer.dir().to_path_buf();
    writer.finish(table, &manifest).map_err(run_error)?;
    info!("outputs written to {}", dir.display());
    if let Some(data) = &config.comparison_data {
        compare(&dir.join("summary_full.csv"), data)?;
    }
    if table.is_complete() {
        Ok(())
    } else {
        let failed: Vec<String> = table.failures.iter().map(|(e, _)| format!("{:.1} pJ", e * 1e12)).collect();
        Err(Failure {
            code: EXIT_PARTIAL,
            message: format!("{} of {} energies failed: {}", failed.len(), config.energies.len(), failed.join(", ")),
        })
    }
}

fn single(run: &RunArgs, seed: Option<u64>, energy: &str) -> Result<(), Failure> {
    let energy = parse_quantity(energy, Dimension::Energy)
        .map_err(|e| config_error(Error::Config(format!("--energy: {e}"))))?;
    let mut config = run.resolve(seed)?;
    config.energies = vec![energy];
    config.validate().map_err(config_error)?;
    let pool = thread_pool(run.threads)?;
    let writer = config.output_dir.as_ref().map(OutputWriter::create).transpose().map_err(config_error)?;
    let table = pool.install(|| run_sweep(&config, |_| Ok(()))).map_err(run_error)?;
    for row in &table.rows {
        print_row(row);
        let r = &row.intrinsic;
        println!(
            "           intrinsic sq {:.3} dB, antisq {:.3} dB, shot-noise variance {:.6e}",
            r.squeezing_db, r.antisqueezing_db, r.shot_noise_reference
        );
    }
    match writer {
        Some(mut w) => {
            for row in &table.rows {
                w.write_row(row).map_err(run_error)?;
            }
            finish(w, &config, &table, pool.current_num_threads())
        }
        None if table.is_complete() => Ok(()),
        None => Err(Failure {
            code: EXIT_PARTIAL,
            message: table.failures[0].1.clone(),
        }),
    }
}

fn fit_gawbs(run: &RunArgs, seed: Option<u64>, data: &Path) -> Result<(), Failure> {
    let mut config = run.resolve(seed)?;
    let measured = load_measured(data).map_err(config_error)?;
    let angles = angle_points(&measured);
    if angles.is_empty() {
        return Err(config_error(Error::Config(format!("{}: no theta_deg values", data.display()))));
    }
    config.energies = angles.iter().map(|p| p.energy).collect();
    config.energies.dedup();
    config.validate().map_err(config_error)?;
    let pool = thread_pool(run.threads)?;
    let writer = config.output_dir.as_ref().map(OutputWriter::create).transpose().map_err(config_error)?;

    let (fit, runs) = pool
        .install(|| -> polsqueeze::Result<_> {
            let mut runs = Vec::new();
            for &e in &config.energies {
                runs.push(simulate_energy(&config, e)?);
            }
            Ok((fit_with_runs(&config, &runs, &angles)?, runs))
        })
        .map_err(run_error)?;
    println!("gawbs_coefficient = {:.6e} rad²/J", fit.coefficient);
    println!("angle residual (rms) = {:.4}°  after {} iterations", fit.residual, fit.iterations);

    config.spec.detection.gawbs_coefficient = fit.coefficient;
    let mut table = SweepTable::default();
    for r in &runs {
        let (intrinsic, reported) = r.analyze(&config, fit.coefficient).map_err(run_error)?;
        let row = SweepRow {
            energy: r.energy,
            gawbs_coefficient: fit.coefficient,
            intrinsic,
            reported,
            aborted: r.aborted,
        };
        print_row(&row);
        table.timings.extend(r.timings.iter().cloned());
        table.rows.push(row);
    }
    match writer {
        Some(mut w) => {
            for row in &table.rows {
                w.write_row(row).map_err(run_error)?;
            }
            finish(w, &config, &table, pool.current_num_threads())
        }
        None => Ok(()),
    }
}

fn print_report(report: &ComparisonReport) {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:+.3}"));
    println!("energy_pJ  d_squeezing_dB  d_antisqueezing_dB  d_theta_deg");
    for p in &report.points {
        println!(
            "{:>9.1}  {:>14}  {:>18}  {:>11}{}",
            p.energy * 1e12,
            f(p.squeezing_db),
            f(p.antisqueezing_db),
            f(p.theta_deg),
            if p.outside_error_bars { "  *" } else { "" }
        );
    }
    println!(
        "rms: squeezing {} dB, antisqueezing {} dB, angle {}°",
        f(report.rms_squeezing_db),
        f(report.rms_antisqueezing_db),
        f(report.rms_theta_deg)
    );
    if report.points.iter().any(|p| p.outside_error_bars) {
        println!("* outside the measured error bars");
    }
    for e in &report.skipped {
        warn!("{:.1} pJ skipped: outside the simulated range", e * 1e12);
    }
}

fn compare(summary: &Path, data: &Path) -> Result<(), Failure> {
    let rows = load_summary(summary).map_err(config_error)?;
    let measured = load_measured(data).map_err(config_error)?;
    let report = compare_to_measurement(&rows, &measured).map_err(config_error)?;
    print_report(&report);
    Ok(())
}

fn oracle(points: usize, trajectories: usize, seed: u64, tolerance: f64, threads: Option<usize>) -> Result<(), Failure> {
    let pool = thread_pool(threads)?;
    let mut worst: f64 = 0.0;
    println!("|α|²    κ        exact_dB   wigner_dB   ±dB     diff_dB  cutoff");
    for (i, case) in default_cases().into_iter().enumerate() {
        let c = pool
            .install(|| compare_case(case, points, trajectories, seed.wrapping_add(i as u64)))
            .map_err(run_error)?;
        println!(
            "{:<6.1} {:<8.4} {:>9.4} {:>11.4} {:>7.4} {:>9.4} {:>7}",
            case.alpha_sq,
            case.kappa,
            c.exact_db,
            c.wigner_db,
            c.wigner_error_db,
            c.difference_db(),
            c.fock_cutoff
        );
        worst = worst.max(c.difference_db().abs());
    }
    if worst <= tolerance {
        println!("oracle: PASS (max |diff| {worst:.4} dB ≤ {tolerance} dB)");
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_PARTIAL,
            message: format!("oracle: max |diff| {worst:.4} dB exceeds {tolerance} dB"),
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Sweep { run, seed } => sweep(run, *seed),
        Command::Single { run, seed, energy } => single(run, *seed, energy),
        Command::FitGawbs { run, seed, data } => fit_gawbs(run, *seed, data),
        Command::Compare { summary, data } => compare(summary, data),
        Command::Oracle {
            points,
            trajectories,
            seed,
            tolerance,
            threads,
        } => oracle(*points, *trajectories, *seed, *tolerance, *threads),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
