//! `sideband`: simulate, fit, sweep and tabulate sideband-asymmetry thermometry.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;
use sideband_core::estimation::{FitError, LorentzianFit, OccupancyEstimate};
use sideband_core::experiment::{
    analyze_traces, point_truth, report, run_sweep_detailed, simulate_point, ConfigError,
    ExperimentError, PointStatus, PointTruth, Scenario, SweepRecord,
};
use sideband_core::io::{self, IoError};
use sideband_core::spectra::{default_displacement_grid, displacement_psd, SpectrumTrace};

const SEED_ENV: &str = "SIDEBAND_SEED";

#[derive(Parser)]
#[command(
    name = "sideband",
    version,
    about = "Sideband-asymmetry thermometry of a cooled mechanical mode"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the two read-out traces for one cooling power.
    Simulate(SimulateArgs),
    /// Fit one or two traces; with both detunings, estimate the occupancy.
    Fit(FitArgs),
    /// Run the cooling-power sweep.
    Sweep(SweepArgs),
    /// Build the sweep tables from a sweep output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML; the bundled default scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Noise seed. Overrides $SIDEBAND_SEED and the scenario file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Cooling intracavity photon number; defaults to the last sweep value.
    #[arg(long)]
    n_c: Option<f64>,
    /// Sweep index used to derive the point seed.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Trace CSV files: one, or one per detuning in either order.
    #[arg(long = "in", required = true, num_args = 1..=2)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// 95% relative uncertainty of the read-out power match.
    #[arg(long, default_value_t = 0.02)]
    power_mismatch_rel95: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding records.csv from `sideband sweep`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to the input directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes and their exit codes.
#[derive(Debug)]
enum CliError {
    Config(String),
    Io(String),
    Estimation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Estimation(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Estimation(m) => write!(f, "estimation failed: {m}"),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, CliError> {
    let mut scenario = match &args.config {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default_device(),
    };
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(v.trim().parse::<u64>().map_err(|e| {
            CliError::Config(format!(
                "{SEED_ENV}: expected an unsigned integer, got {v:?} ({e})"
            ))
        })?),
        Err(_) => None,
    };
    if let Some(seed) = args.seed.or(env_seed) {
        scenario.noise.seed = seed;
    }
    Ok(scenario)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

#[derive(Serialize)]
struct TruthFile {
    index: usize,
    n_c: f64,
    seed: u64,
    n_averages: Option<u32>,
    power_factor: f64,
    truth: PointTruth,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    let n_c = match args.n_c {
        Some(n) => n,
        None => *scenario.sweep.last().ok_or(ExperimentError::EmptySweep)?,
    };
    ensure_dir(&args.out)?;
    let sim = simulate_point(&scenario, args.index, n_c)?;
    io::write_trace(&args.out.join("plus.csv"), &sim.plus)?;
    io::write_trace(&args.out.join("minus.csv"), &sim.minus)?;

    let mech = scenario.mechanics_at(n_c);
    let gamma = std::f64::consts::TAU * sim.truth.gamma_bar_hz;
    let grid =
        default_displacement_grid(&mech, gamma).map_err(|e| CliError::Config(e.to_string()))?;
    let sxx = displacement_psd(&mech, sim.truth.n_cooled, gamma, &grid)
        .map_err(|e| CliError::Config(e.to_string()))?;
    io::write_trace(&args.out.join("sxx.csv"), &sxx)?;

    let truth = TruthFile {
        index: args.index,
        n_c,
        seed: scenario.noise.seed,
        n_averages: scenario.noise.enabled.then_some(scenario.noise.n_averages),
        power_factor: sim.power_factor,
        truth: sim.truth,
    };
    io::write_toml(&args.out.join("truth.toml"), &truth)?;
    println!(
        "n_c = {n_c}: <n>_c = {:.4}, C_r = {:.4}, eta' = {:.4} -> {}",
        sim.truth.n_cooled,
        sim.truth.c_r,
        sim.truth.eta_prime,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize, Default)]
struct FitFile {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    errors: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_plus: Option<LorentzianFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_minus: Option<LorentzianFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<EstimateFile>,
}

/// The estimate without the nested fits, which already appear above it.
#[derive(Serialize)]
struct EstimateFile {
    n_c_est: f64,
    ci95_n_c: f64,
    c_r_est: f64,
    ci95_c_r: f64,
    eta_prime: f64,
    ci95_eta_prime: f64,
    n_plus_est: f64,
    ci95_n_plus: f64,
    n_minus_est: f64,
    ci95_n_minus: f64,
    i_plus: f64,
    i_minus: f64,
    area_ratio: f64,
    gamma_plus_hz: f64,
    gamma_minus_hz: f64,
    power_mismatch_rel95: f64,
    cooperativity_negative: bool,
}

impl From<&OccupancyEstimate> for EstimateFile {
    fn from(e: &OccupancyEstimate) -> Self {
        Self {
            n_c_est: e.n_c_est,
            ci95_n_c: e.ci95.n_c,
            c_r_est: e.c_r_est,
            ci95_c_r: e.ci95.c_r,
            eta_prime: e.eta_prime,
            ci95_eta_prime: e.ci95.eta_prime,
            n_plus_est: e.n_plus_est,
            ci95_n_plus: e.ci95.n_plus,
            n_minus_est: e.n_minus_est,
            ci95_n_minus: e.ci95.n_minus,
            i_plus: e.i_plus,
            i_minus: e.i_minus,
            area_ratio: e.area_ratio,
            gamma_plus_hz: e.gamma_plus_hz,
            gamma_minus_hz: e.gamma_minus_hz,
            power_mismatch_rel95: e.power_mismatch_rel95,
            cooperativity_negative: e.cooperativity_negative,
        }
    }
}

/// Positive read-out detuning is the `plus` trace. Traces without a detuning
/// fall back to the side their frequency grid sits on.
fn is_plus(trace: &SpectrumTrace) -> bool {
    if trace.meta.detuning_hz != 0.0 {
        trace.meta.detuning_hz > 0.0
    } else {
        trace.grid.start + trace.grid.stop > 0.0
    }
}

/// Keeps the fit (or the partial fit of a non-converged run) and records the error.
fn keep_fit(
    side: &str,
    fit: &Result<LorentzianFit, FitError>,
    errors: &mut Vec<String>,
) -> Option<LorentzianFit> {
    match fit {
        Ok(f) => Some(f.clone()),
        Err(e) => {
            errors.push(format!("{side}: {e}"));
            match e {
                FitError::NotConverged { partial, .. } => Some((**partial).clone()),
                _ => None,
            }
        }
    }
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let traces = args
        .inputs
        .iter()
        .map(|p| io::read_trace(p))
        .collect::<Result<Vec<_>, _>>()?;
    if !(args.power_mismatch_rel95 >= 0.0 && args.power_mismatch_rel95.is_finite()) {
        return Err(CliError::Config(format!(
            "--power-mismatch-rel95: must be finite and >= 0, got {}",
            args.power_mismatch_rel95
        )));
    }
    ensure_dir(&args.out)?;
    let path = args.out.join("fit.toml");
    let mut file = FitFile::default();

    if let [single] = traces.as_slice() {
        let side = if is_plus(single) { "plus" } else { "minus" };
        let fit = sideband_core::estimation::fit_lorentzian(single, None);
        let kept = keep_fit(side, &fit, &mut file.errors);
        if side == "plus" {
            file.fit_plus = kept;
        } else {
            file.fit_minus = kept;
        }
        io::write_toml(&path, &file)?;
        let f = fit.map_err(|e| CliError::Estimation(format!("{side}: {e}")))?;
        println!(
            "{side}: center = {:.6e} Hz, fwhm = {:.4e} +/- {:.2e} Hz, area = {:.4e} +/- {:.2e}",
            f.center_hz, f.fwhm_hz, f.ci95.fwhm_hz, f.area, f.ci95.area
        );
        return Ok(());
    }

    let (plus, minus) = match (is_plus(&traces[0]), is_plus(&traces[1])) {
        (true, false) => (&traces[0], &traces[1]),
        (false, true) => (&traces[1], &traces[0]),
        _ => {
            return Err(CliError::Config(format!(
                "--in: need one trace at each read-out detuning, got {} and {}",
                args.inputs[0].display(),
                args.inputs[1].display()
            )))
        }
    };
    let analysis = analyze_traces(plus, minus, args.power_mismatch_rel95);
    file.fit_plus = keep_fit("plus", &analysis.fit_plus, &mut file.errors);
    file.fit_minus = keep_fit("minus", &analysis.fit_minus, &mut file.errors);
    let estimate = match &analysis.estimate {
        Some(Ok(e)) => Some(e),
        Some(Err(e)) => {
            file.errors.push(e.to_string());
            None
        }
        None => None,
    };
    file.estimate = estimate.map(EstimateFile::from);
    io::write_toml(&path, &file)?;
    match estimate {
        Some(e) => {
            println!(
                "<n>_c = {:.4} +/- {:.4}, C_r = {:.5} +/- {:.5}, eta' = {:.4} +/- {:.4}",
                e.n_c_est, e.ci95.n_c, e.c_r_est, e.ci95.c_r, e.eta_prime, e.ci95.eta_prime
            );
            Ok(())
        }
        None => Err(CliError::Estimation(file.errors.join("; "))),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let scenario = load_scenario(&args.scenario)?;
    if args.jobs == Some(0) {
        return Err(CliError::Config("--jobs: must be at least 1".into()));
    }
    // Check every point's model before any output is written.
    for &n_c in &scenario.sweep {
        point_truth(&scenario, n_c)?;
    }
    ensure_dir(&args.out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let outcomes = pool.install(|| run_sweep_detailed(&scenario))?;

    let traces = args.out.join("traces");
    for o in &outcomes {
        let i = o.record.index;
        io::write_trace(
            &traces.join(format!("point_{i:03}_plus.csv")),
            &o.simulation.plus,
        )?;
        io::write_trace(
            &traces.join(format!("point_{i:03}_minus.csv")),
            &o.simulation.minus,
        )?;
    }
    let records: Vec<SweepRecord> = outcomes.into_iter().map(|o| o.record).collect();
    io::write_csv(&args.out.join("records.csv"), &records)?;
    let tables = report(&records);
    io::atomic_write(&args.out.join("summary.toml"), tables.summary.as_bytes())?;

    let failed = records
        .iter()
        .filter(|r| r.status != PointStatus::Ok)
        .count();
    let last = records.last().expect("sweep is non-empty");
    println!(
        "{} points ({failed} failed); terminal <n>_c = {:.4} (estimate {})",
        records.len(),
        last.n_c_true,
        match (last.n_c_est, last.ci95_n_c) {
            (Some(n), Some(ci)) => format!("{n:.4} +/- {ci:.4}"),
            _ => "unavailable".into(),
        }
    );
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let path = args.input.join("records.csv");
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "--in: no records.csv in {}",
            args.input.display()
        )));
    }
    let records: Vec<SweepRecord> = io::read_csv(&path)?;
    if records.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no sweep records",
            path.display()
        )));
    }
    let out = args.out.as_deref().unwrap_or(&args.input);
    ensure_dir(out)?;
    report(&records).write(out)?;
    println!("{} rows -> {}", records.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sideband: {e}");
            ExitCode::from(e.code())
        }
    }
}
