use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use garde::error::ErrorClass;
use garde::io::{
    geometry_from_any_json, geometry_to_json, read_json, read_observations, result_to_json, write_crlb,
    write_experiment, write_observations,
};
use garde::{
    calibration_error, crlb_report, generate_scenario, run, run_montecarlo, synthesize_observations, GardeConfig,
    GardeError, MonteCarloConfig, NoiseModel, Scenario,
};

#[derive(Parser, Debug)]
#[command(name = "garde", version, about = "Geometry calibration of acoustic sensor networks from distance estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random layout and noisy distance observations for it.
    Simulate(SimulateArgs),
    /// Estimate node and source positions from an observation file.
    Calibrate(CalibrateArgs),
    /// Write Cramér-Rao bounds for every node and source of a geometry.
    Crlb(CrlbArgs),
    /// Run a Monte-Carlo experiment and write its tables into a directory.
    Montecarlo(MonteCarloArgs),
    /// Print the calibration error of an estimate against a reference geometry.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario JSON (room, node_count, source_count, margin, min_separation, rng_seed).
    #[arg(long)]
    config: PathBuf,
    /// Noise model JSON (kind, sigma_d, slope, outlier_rate, outlier_shift, oor_threshold).
    #[arg(long)]
    noise: PathBuf,
    /// Observation CSV to write.
    #[arg(long)]
    out_obs: PathBuf,
    /// Ground-truth geometry JSON to write.
    #[arg(long)]
    out_truth: PathBuf,
    /// Seed of the observation noise; the scenario seed when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides sigma_d of the noise model, meters.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Observation CSV (node_id,source_id,distance_m).
    #[arg(long)]
    obs: PathBuf,
    /// Calibration result JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Full engine configuration JSON; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Alternating passes per refinement [default: 30]
    #[arg(long)]
    iterations: Option<usize>,
    /// Annealing rounds [default: 30]
    #[arg(long)]
    annealing: Option<usize>,
    /// Seed of the annealing perturbations [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CrlbArgs {
    /// Geometry or calibration result JSON.
    #[arg(long)]
    geometry: PathBuf,
    /// Standard deviation of the distance errors, meters.
    #[arg(long, allow_negative_numbers = true)]
    sigma: f64,
    /// Bound CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Observation CSV; only its valid pairs enter the bounds.
    #[arg(long)]
    obs: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MonteCarloArgs {
    /// Experiment JSON (scenario, noise, garde, trials, variants, sweep_iterations, seed).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created when missing.
    #[arg(long)]
    out_dir: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the noise sigma_d, meters.
    #[arg(long)]
    sigma: Option<f64>,
    /// Overrides the alternating passes per refinement.
    #[arg(long)]
    iterations: Option<usize>,
    /// Overrides the annealing rounds.
    #[arg(long)]
    annealing: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Estimated geometry or calibration result JSON.
    #[arg(long)]
    est: PathBuf,
    /// Reference geometry JSON.
    #[arg(long)]
    truth: PathBuf,
    /// Restrict the alignment to proper rotations.
    #[arg(long)]
    no_reflection: bool,
    /// Point set to compare.
    #[arg(long, value_enum, default_value_t = PointSet::Nodes)]
    points: PointSet,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum PointSet {
    Nodes,
    Sources,
    All,
}

/// Failure reported on stderr as `error[<class>]: <message>`.
struct Failure {
    class: &'static str,
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            class: "usage",
            code: 2,
            message: message.into(),
        }
    }
}

impl From<GardeError> for Failure {
    fn from(e: GardeError) -> Self {
        let (class, code) = match e.class() {
            ErrorClass::Usage => ("usage", 2),
            ErrorClass::Data => ("data", 3),
            ErrorClass::Numerical => ("numerical", 4),
        };
        Failure {
            class,
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn io_context(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure {
        class: "data",
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(io_context(path))
}

fn load_observations(path: &Path) -> CliResult<garde::ObservationSet> {
    let file = File::open(path).map_err(io_context(path))?;
    read_observations(BufReader::new(file), None).map_err(|e| match e {
        GardeError::Parse(m) => GardeError::Parse(format!("{}: {m}", path.display())).into(),
        other => other.into(),
    })
}

fn load_geometry(path: &Path) -> CliResult<garde::Geometry> {
    let text = fs::read_to_string(path).map_err(io_context(path))?;
    geometry_from_any_json(&text).map_err(|e| match e {
        GardeError::Parse(m) => GardeError::Parse(format!("{}: {m}", path.display())).into(),
        other => other.into(),
    })
}

fn check_sigma(sigma: f64) -> CliResult {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("--sigma must be positive, got {sigma}")))
    }
}

fn simulate(args: SimulateArgs) -> CliResult {
    let scenario: Scenario = read_json(&args.config)?;
    let mut noise: NoiseModel = read_json(&args.noise)?;
    if let Some(s) = args.sigma {
        check_sigma(s)?;
        noise.sigma_d = s;
    }
    noise.validate()?;
    let truth = generate_scenario(&scenario)?;
    let obs = synthesize_observations(&truth, &noise, args.seed.unwrap_or(scenario.rng_seed))?;

    let file = File::create(&args.out_obs).map_err(io_context(&args.out_obs))?;
    let mut out = BufWriter::new(file);
    write_observations(&obs, &mut out)?;
    out.flush().map_err(io_context(&args.out_obs))?;
    write_text(&args.out_truth, &(geometry_to_json(&truth) + "\n"))
}

fn calibrate(args: CalibrateArgs) -> CliResult {
    let mut config: GardeConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => GardeConfig::default(),
    };
    if let Some(n) = args.iterations {
        config.num_iterations = n;
    }
    if let Some(n) = args.annealing {
        config.num_annealing = n;
    }
    if let Some(s) = args.seed {
        config.rng_seed = s;
    }
    config.validate()?;
    let obs = load_observations(&args.obs)?;
    obs.check_solvable()?;
    let result = run(&obs, &config)?;
    write_text(&args.out, &(result_to_json(&result) + "\n"))
}

fn crlb(args: CrlbArgs) -> CliResult {
    check_sigma(args.sigma)?;
    let geometry = load_geometry(&args.geometry)?;
    let obs = args.obs.as_deref().map(load_observations).transpose()?;
    let (sources, nodes) = crlb_report(&geometry, args.sigma, obs.as_ref())?;
    let file = File::create(&args.out).map_err(io_context(&args.out))?;
    let mut out = BufWriter::new(file);
    write_crlb(&[&nodes, &sources], &mut out)?;
    out.flush().map_err(io_context(&args.out))
}

fn montecarlo(args: MonteCarloArgs) -> CliResult {
    let mut config: MonteCarloConfig = read_json(&args.config)?;
    if let Some(s) = args.seed {
        config.seed = Some(s);
    }
    if let Some(s) = args.sigma {
        check_sigma(s)?;
        config.noise.sigma_d = s;
    }
    if let Some(n) = args.iterations {
        config.garde.num_iterations = n;
    }
    if let Some(n) = args.annealing {
        config.garde.num_annealing = n;
    }
    config.validate()?;

    let dir = &args.out_dir;
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_context(dir))?;
        if entries.next().is_some() && !args.force {
            return Err(Failure::usage(format!(
                "{} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    } else {
        fs::create_dir_all(dir).map_err(io_context(dir))?;
    }
    let table = run_montecarlo(&config)?;
    write_experiment(dir, &table)?;
    Ok(())
}

fn eval(args: EvalArgs) -> CliResult {
    let est = load_geometry(&args.est)?;
    let truth = load_geometry(&args.truth)?;
    let (a, b) = match args.points {
        PointSet::Nodes => (est.nodes, truth.nodes),
        PointSet::Sources => (est.sources, truth.sources),
        PointSet::All => (est.all_points(), truth.all_points()),
    };
    let err = calibration_error(&a, &b, !args.no_reflection)?;
    println!("{err:?}");
    Ok(())
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var("GARDE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("GARDE_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::usage(format!("GARDE_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let msg = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error[usage]: {}", single_line(msg));
            return ExitCode::from(2);
        }
    };

    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Crlb(a) => crlb(a),
        Command::Montecarlo(a) => montecarlo(a),
        Command::Eval(a) => eval(a),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.class, single_line(&f.message));
            ExitCode::from(f.code)
        }
    }
}
