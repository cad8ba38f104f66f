use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mdla::analytics;
use mdla::harness::{self, config, ExperimentSpec, InitSpec};
use mdla::model::{self, DEFAULT_PROFILE_WIDTH, DEFAULT_WINDOW_MARGIN};
use mdla::stefan::{self, StefanConfig, StefanState};
use mdla::{Error, ModelParams, Result, TimeMode};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "mdla", version, about = "One-dimensional multi-particle diffusion limited aggregation")]
struct Cli {
    /// Key-value config file (`key = value` per line); flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Discrete,
    Continuous,
}

impl From<Mode> for TimeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Discrete => TimeMode::Discrete,
            Mode::Continuous => TimeMode::Continuous,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Init {
    Uniform,
    Wave,
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Init as ValueEnum>::from_str(s, true).map_err(|_| Error::InvalidParams(format!("unknown init '{s}'")))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble and write trajectories plus a report.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        init: Option<Init>,
        #[arg(long)]
        profile_width: Option<usize>,
        #[arg(long)]
        window_margin: Option<f64>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the closed-form predictions as JSON.
    #[command(allow_negative_numbers = true)]
    Predict {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Solve the subcritical moving-boundary problem from the similarity slice.
    #[command(allow_negative_numbers = true)]
    Stefan {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        dxi: Option<f64>,
        #[arg(long)]
        ds: Option<f64>,
        #[arg(long)]
        s_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the growth exponent of a stored ensemble.
    Fit {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        t_min: Option<f64>,
    },
    /// Compare a stored ensemble with the predictions for `mu` and `mode`.
    #[command(allow_negative_numbers = true)]
    Report {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        mu: Option<f64>,
    },
}

/// Contents of `spec.json` next to the trajectories.
#[derive(Serialize, Deserialize)]
struct RunManifest {
    params: ModelParams,
    runs: u64,
    init: InitSpec,
}

#[derive(Serialize)]
struct FailureManifest<'a> {
    completed: &'a [u64],
    failures: &'a [(u64, String)],
}

#[derive(Serialize)]
struct StefanSummary {
    mu: f64,
    s: f64,
    r: f64,
    r_similarity: f64,
    profile_error: f64,
    conservation_residual: f64,
    residual_drift: f64,
    config: StefanConfig,
}

struct Settings(BTreeMap<String, String>);

impl Settings {
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => config::get(&self.0, key),
        }
    }

    fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.pick(flag, key)?
            .ok_or_else(|| Error::InvalidParams(format!("missing required setting --{key}")))
    }

    fn mode(&self, flag: Option<Mode>) -> Result<TimeMode> {
        match flag {
            Some(m) => Ok(m.into()),
            None => self.require::<TimeMode>(None, "mode"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = Settings(match &cli.config {
        Some(path) => config::load(path).map_err(|e| match e {
            Error::Io(io) => Error::InvalidParams(format!("cannot read config {}: {io}", path.display())),
            other => other,
        })?,
        None => BTreeMap::new(),
    });
    match cli.command {
        Command::Simulate { mu, mode, horizon, runs, seed, init, profile_width, window_margin, threads, out } => {
            let mu = settings.require(mu, "mu")?;
            let mode = settings.mode(mode)?;
            let horizon = settings.require(horizon, "horizon")?;
            let mut params = ModelParams::new(mu, mode, horizon, settings.pick(seed, "seed")?.unwrap_or(0));
            params.window_margin = settings.pick(window_margin, "window-margin")?.unwrap_or(DEFAULT_WINDOW_MARGIN);
            let init = settings.pick(init, "init")?.unwrap_or(Init::Uniform);
            let default_width = if init == Init::Wave { DEFAULT_PROFILE_WIDTH } else { 0 };
            params.profile_width = settings.pick(profile_width, "profile-width")?.unwrap_or(default_width);
            let mut spec = ExperimentSpec::new(params, settings.pick(runs, "runs")?.unwrap_or(1));
            spec.parallelism = settings.pick(threads, "threads")?.unwrap_or(0);
            if init == Init::Wave {
                spec.init = InitSpec::StationaryWave { epsilon: mu - 1.0 };
            }
            let out: PathBuf = settings.require(out, "out")?;
            simulate(&spec, &out)
        }
        Command::Predict { mu, mode } => {
            let p = analytics::predict(settings.require(mu, "mu")?, settings.mode(mode)?)?;
            println!("{}", serde_json::to_string_pretty(&p)?);
            Ok(())
        }
        Command::Stefan { mu, dxi, ds, s_end, out } => {
            let defaults = StefanConfig::default();
            let cfg = StefanConfig {
                dxi: settings.pick(dxi, "dxi")?.unwrap_or(defaults.dxi),
                ds: settings.pick(ds, "ds")?.unwrap_or(defaults.ds),
                xi_max: settings.pick(None, "xi-max")?.unwrap_or(defaults.xi_max),
                s0: settings.pick(None, "s0")?.unwrap_or(defaults.s0),
                early_fraction: defaults.early_fraction,
            };
            let mu = settings.require(mu, "mu")?;
            let s_end = settings.pick(s_end, "s-end")?.unwrap_or(1.0);
            let out: PathBuf = settings.require(out, "out")?;
            run_stefan(mu, s_end, &cfg, &out)
        }
        Command::Fit { input, t_min } => {
            let dir: PathBuf = settings.require(input, "in")?;
            let trajs = load_trajectories(&dir, None)?;
            let horizon = trajs.first().and_then(|t| t.last()).map(|r| r.t).unwrap_or(0.0);
            let t_min = settings.pick(t_min, "t-min")?.unwrap_or(horizon / 16.0);
            let fit = harness::fit_exponent(&trajs, t_min)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(())
        }
        Command::Report { input, mode, mu } => {
            let dir: PathBuf = settings.require(input, "in")?;
            let mu = settings.require(mu, "mu")?;
            let mode = settings.mode(mode)?;
            let trajs = load_trajectories(&dir, Some((mu, mode)))?;
            let report = harness::compare_report(&trajs, &analytics::predict(mu, mode)?)?;
            write_report(&report, &dir)?;
            print!("{}", report.to_table());
            Ok(())
        }
    }
}

fn simulate(spec: &ExperimentSpec, out: &Path) -> Result<()> {
    spec.validate()?;
    spec.params.window_x_max()?;
    fs::create_dir_all(out)?;
    let manifest = RunManifest { params: spec.params.clone(), runs: spec.runs, init: spec.init };
    serde_json::to_writer_pretty(File::create(out.join("spec.json"))?, &manifest)?;
    let trajs = match harness::run_ensemble(spec) {
        Ok(t) => t,
        Err(Error::Ensemble { completed, failures }) => {
            let m = FailureManifest { completed: &completed, failures: &failures };
            serde_json::to_writer_pretty(File::create(out.join("partial_manifest.json"))?, &m)?;
            return Err(Error::Ensemble { completed, failures });
        }
        Err(e) => return Err(e),
    };
    model::write_records_csv(&trajs, BufWriter::new(File::create(out.join("trajectories.csv"))?))?;
    if spec.params.profile_width > 0 {
        model::write_profiles_csv(&trajs, BufWriter::new(File::create(out.join("profiles.csv"))?))?;
    }
    let report = harness::compare_report(&trajs, &analytics::predict(spec.params.mu, spec.params.time_mode)?)?;
    write_report(&report, out)?;
    print!("{}", report.to_table());
    Ok(())
}

fn write_report(report: &harness::Report, dir: &Path) -> Result<()> {
    fs::write(dir.join("report.json"), report.to_json()?)?;
    fs::write(dir.join("report.txt"), report.to_table())?;
    Ok(())
}

fn load_trajectories(dir: &Path, fallback: Option<(f64, TimeMode)>) -> Result<Vec<mdla::Trajectory>> {
    let spec_path = dir.join("spec.json");
    let params = if spec_path.exists() {
        serde_json::from_reader::<_, RunManifest>(BufReader::new(File::open(spec_path)?))?.params
    } else {
        let (mu, mode) = fallback.unwrap_or((1.0, TimeMode::Discrete));
        ModelParams::new(mu, mode, 1.0, 0)
    };
    let records = File::open(dir.join("trajectories.csv"))
        .map_err(|e| Error::InvalidParams(format!("cannot open {}: {e}", dir.join("trajectories.csv").display())))?;
    let profiles = File::open(dir.join("profiles.csv")).ok().map(BufReader::new);
    let trajs = model::read_trajectories_csv(BufReader::new(records), profiles, &params)?;
    if trajs.is_empty() {
        return Err(Error::Insufficient(format!("no trajectories in {}", dir.display())));
    }
    Ok(trajs)
}

fn run_stefan(mu: f64, s_end: f64, cfg: &StefanConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    if !(s_end > cfg.s0) {
        return Err(Error::InvalidParams(format!("s-end = {s_end} must exceed s0 = {}", cfg.s0)));
    }
    let mut state = StefanState::similarity(mu, cfg.s0, cfg.dxi, cfg.xi_max)?;
    let initial_residual = stefan::conservation_residual(&state);
    fs::create_dir_all(out)?;
    let mut csv = BufWriter::new(File::create(out.join("profile.csv"))?);
    state.write_csv(&mut csv, true)?;
    // Dump at powers of two of s0 and at s_end.
    let mut target = cfg.s0;
    while target < s_end {
        target = (2.0 * target).min(s_end);
        stefan::integrate_to(&mut state, target, cfg, |_| {})?;
        state.write_csv(&mut csv, false)?;
    }
    csv.flush()?;
    let residual = stefan::conservation_residual(&state);
    let summary = StefanSummary {
        mu,
        s: state.s,
        r: state.r,
        r_similarity: analytics::solve_r_subcritical(mu)? * state.s.sqrt(),
        profile_error: stefan::profile_error(&state)?,
        conservation_residual: residual,
        residual_drift: residual - initial_residual,
        config: *cfg,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(out.join("stefan.json"), &json)?;
    println!("{json}");
    Ok(())
}
