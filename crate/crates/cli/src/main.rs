//! `superdir` — command line front end for superdirective array synthesis
//! and the excitation-prediction network.
//!
//! Subcommands cover the full pipeline: `grid` prints angular grids with
//! quadrature weights, `solve`/`gain` compute optimal excitations for a
//! geometry described in a small key=value config file, `pattern` exports the
//! resulting radiation pattern, `dataset gen` sweeps element spacings into a
//! training corpus, `train` runs the adversarial loop, `eval` scores a
//! checkpoint against the physics solver, and `params` audits model sizes.
//!
//! Exit codes: 0 on success, 1 for usage or input errors, 2 when a
//! computation fails numerically. Every artifact-producing subcommand is
//! deterministic: the same arguments and seeds reproduce output files byte
//! for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use superdir_core::beamforming::{
    loss_resistance, pattern, solve_max_directivity, solve_max_gain, write_pattern_csv,
    write_solution_csv, CNorm, DirectivityOptions, Solution, SolveMethod,
};
use superdir_core::dataset::{
    generate_dataset, read_dataset, write_dataset, CouplingSpec, DatasetConfig, GeometryTemplate,
};
use superdir_core::error::{Error, Result};
use superdir_core::field::{synth_field_matrix, FieldMatrix};
use superdir_core::geometry::ArrayGeometry;
use superdir_core::grid::{make_grid, Direction, Weighting};
use superdir_core::make_coupling;
use superdir_net::checkpoint::load_checkpoint;
use superdir_net::eval::evaluate;
use superdir_net::model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use superdir_net::train::{train, TrainConfig};

// ── argument grammar ─────────────────────────────────────────────────────

#[derive(Parser, Debug)]
#[command(
    name = "superdir",
    about = "Superdirective array synthesis and learned excitation prediction",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Print an angular grid with quadrature weights as CSV
    Grid(GridArgs),
    /// Solve for the maximum-directivity excitation toward a direction
    Solve(SolveArgs),
    /// Solve for the maximum-gain excitation under ohmic loss
    Gain(GainArgs),
    /// Export the radiation pattern of the optimal excitation
    Pattern(PatternArgs),
    /// Dataset operations
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train the generator/discriminator pair on a dataset
    Train(TrainArgs),
    /// Score a trained checkpoint on a dataset's held-out samples
    Eval(EvalArgs),
    /// Print the parameter counts of a model configuration
    Params(ParamsArgs),
}

#[derive(Subcommand, Debug)]
enum DatasetCmd {
    /// Sweep spacings, solve every grid direction, and write the corpus
    Gen(GenArgs),
}

/// Flags shared by every subcommand that synthesizes a field matrix.
#[derive(Args, Debug)]
struct SceneArgs {
    /// Geometry config file (key = value lines; kind, m or rows/cols, spacing_wl, ...)
    #[arg(long, value_name = "FILE")]
    geometry: PathBuf,
    /// Angular steps in degrees as "theta,phi"; both must divide their spans
    #[arg(long, default_value = "5,5", value_name = "T,P")]
    grid: String,
    /// Quadrature weighting: sin-theta or uniform
    #[arg(long, default_value = "sin-theta")]
    weighting: String,
    /// Mutual-coupling strength in [0, 1); omitted means an ideal array
    #[arg(long, value_name = "S")]
    coupling: Option<f64>,
    /// Seed for the coupling phase draw
    #[arg(long, default_value_t = 0, value_name = "N")]
    coupling_seed: u64,
}

/// Flags shared by the three solver-backed subcommands.
#[derive(Args, Debug)]
struct SolverArgs {
    /// Steering direction in degrees as "theta,phi" (must lie on the grid)
    #[arg(long, value_name = "T,P")]
    dir: String,
    /// Solver route: closed-form or eigen
    #[arg(long, default_value = "closed-form")]
    method: String,
    /// Ridge added to the Gram diagonal (default: 1e-10 x trace mean; 0 disables)
    #[arg(long, value_name = "EPS")]
    tikhonov_eps: Option<f64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Angular steps in degrees as "theta,phi"
    #[arg(long = "grid", default_value = "15,15", value_name = "T,P")]
    steps: String,
    /// Quadrature weighting: sin-theta or uniform
    #[arg(long, default_value = "sin-theta")]
    weighting: String,
    /// Write the CSV here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Radiation efficiency in (0, 1]; when set, maximize gain instead
    #[arg(long, value_name = "ETA")]
    efficiency: Option<f64>,
    /// Output CSV (elem_index,amplitude,phase_rad)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GainArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Radiation efficiency in (0, 1]
    #[arg(long, value_name = "ETA")]
    efficiency: f64,
    /// Output CSV (elem_index,amplitude,phase_rad)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PatternArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Radiation efficiency in (0, 1]; when set, the excitation maximizes gain
    #[arg(long, value_name = "ETA")]
    efficiency: Option<f64>,
    /// Output CSV (theta_deg,phi_deg,value_db)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Geometry config file; spacing_wl is ignored in favor of the sweep
    #[arg(long, value_name = "FILE")]
    geometry: PathBuf,
    /// Angular steps in degrees as "theta,phi"
    #[arg(long, default_value = "15,15", value_name = "T,P")]
    grid: String,
    /// Quadrature weighting: sin-theta or uniform
    #[arg(long, default_value = "sin-theta")]
    weighting: String,
    /// Number of spacings drawn uniformly from the range
    #[arg(long, default_value_t = 40, value_name = "N")]
    spacings: usize,
    /// Spacing range in wavelengths as "lo,hi"
    #[arg(long, default_value = "0.10,0.50", value_name = "LO,HI")]
    range: String,
    /// When set, targets are maximum-gain excitations at this efficiency
    #[arg(long, value_name = "ETA")]
    efficiency: Option<f64>,
    /// Mutual-coupling strength in [0, 1) applied during synthesis
    #[arg(long, value_name = "S")]
    coupling: Option<f64>,
    /// Seed for the coupling phase draw
    #[arg(long, default_value_t = 0, value_name = "N")]
    coupling_seed: u64,
    /// Ridge added to the Gram diagonal (default: 1e-10 x trace mean)
    #[arg(long, value_name = "EPS")]
    tikhonov_eps: Option<f64>,
    /// Seed for the spacing draw and the train/test shuffle
    #[arg(long, default_value_t = 0, value_name = "N")]
    seed: u64,
    /// Fraction of samples assigned to the training split
    #[arg(long, default_value_t = 0.7, value_name = "F")]
    train_fraction: f64,
    /// Output directory (train.jsonl, test.jsonl, manifest.json)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset directory produced by `dataset gen`
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    /// Model config JSON ({"generator": {...}, "discriminator": {...}})
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Training config JSON (epochs, batch_size, schedules, ...)
    #[arg(long = "train", value_name = "FILE")]
    train_config: PathBuf,
    /// Overrides the seed in the training config
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (checkpoint.json, traces.csv)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint JSON written by `train`
    #[arg(long, value_name = "FILE")]
    ckpt: PathBuf,
    /// Dataset directory; scoring runs on its test split
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    /// Where to write the evaluation report JSON
    #[arg(long, value_name = "FILE")]
    report: PathBuf,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    /// Model config JSON ({"generator": {...}, "discriminator": {...}})
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
}

/// On-disk model description: both halves of the adversarial pair. Either
/// section may be omitted to take the built-in defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ModelFile {
    generator: GeneratorConfig,
    discriminator: DiscriminatorConfig,
}

// ── shared helpers ───────────────────────────────────────────────────────

fn parse_pair(s: &str, flag: &str) -> Result<(f64, f64)> {
    let err = || Error::InvalidInput(format!("{flag} expects two comma-separated numbers, got '{s}'"));
    let (a, b) = s.split_once(',').ok_or_else(err)?;
    let a: f64 = a.trim().parse().map_err(|_| err())?;
    let b: f64 = b.trim().parse().map_err(|_| err())?;
    Ok((a, b))
}

fn parse_method(s: &str) -> Result<SolveMethod> {
    match s {
        "closed-form" => Ok(SolveMethod::ClosedForm),
        "eigen" => Ok(SolveMethod::Eigen),
        other => Err(Error::InvalidInput(format!(
            "unknown method '{other}', expected 'closed-form' or 'eigen'"
        ))),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// Build the field matrix a scene describes: geometry file, grid, coupling.
fn load_scene(scene: &SceneArgs) -> Result<FieldMatrix> {
    let geometry = ArrayGeometry::parse_config(&fs::read_to_string(&scene.geometry)?)?;
    let (ts, ps) = parse_pair(&scene.grid, "--grid")?;
    let grid = make_grid(ts, ps, Weighting::parse(&scene.weighting)?)?;
    let coupling = match scene.coupling {
        None => None,
        Some(s) => Some(make_coupling(geometry.len(), s, scene.coupling_seed)?),
    };
    synth_field_matrix(&geometry, &grid, coupling.as_ref())
}

fn run_solver(
    fm: &FieldMatrix,
    solver: &SolverArgs,
    efficiency: Option<f64>,
) -> Result<Solution> {
    let (t, p) = parse_pair(&solver.dir, "--dir")?;
    let dir = Direction::new(t, p)?;
    let opts = DirectivityOptions {
        c: CNorm::Auto,
        method: parse_method(&solver.method)?,
        tikhonov_eps: solver.tikhonov_eps,
    };
    match efficiency {
        None => solve_max_directivity(fm, &dir, &opts),
        Some(eta) => solve_max_gain(fm, &dir, eta, &opts),
    }
}

fn write_solution_file(path: &Path, sol: &Solution) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    write_solution_csv(&sol.excitation, &mut out)?;
    out.flush()?;
    Ok(())
}

fn print_achieved(label: &str, value: f64) {
    println!("{label}: {:.6} ({:.4} dB)", value, 10.0 * value.log10());
}

// ── subcommands ──────────────────────────────────────────────────────────

fn cmd_grid(args: &GridArgs) -> Result<()> {
    let (ts, ps) = parse_pair(&args.steps, "--grid")?;
    let grid = make_grid(ts, ps, Weighting::parse(&args.weighting)?)?;
    let mut csv = String::from("theta_deg,phi_deg,weight\n");
    for (dir, w) in grid.directions().iter().zip(grid.weights()) {
        csv.push_str(&format!("{},{},{}\n", dir.theta_deg(), dir.phi_deg(), w));
    }
    match &args.out {
        Some(path) => {
            fs::write(path, csv)?;
            println!(
                "grid: {} directions, weight sum {:.6}",
                grid.directions().len(),
                grid.weight_sum()
            );
            println!("csv: {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let fm = load_scene(&args.scene)?;
    let sol = run_solver(&fm, &args.solver, args.efficiency)?;
    let label = if args.efficiency.is_some() { "gain" } else { "directivity" };
    print_achieved(label, sol.achieved);
    write_solution_file(&args.out, &sol)?;
    println!("solution: {}", args.out.display());
    Ok(())
}

fn cmd_gain(args: &GainArgs) -> Result<()> {
    let fm = load_scene(&args.scene)?;
    let sol = run_solver(&fm, &args.solver, Some(args.efficiency))?;
    print_achieved("gain", sol.achieved);
    println!(
        "loss resistance: {:.6} (efficiency {})",
        loss_resistance(args.efficiency)?,
        args.efficiency
    );
    write_solution_file(&args.out, &sol)?;
    println!("solution: {}", args.out.display());
    Ok(())
}

fn cmd_pattern(args: &PatternArgs) -> Result<()> {
    let fm = load_scene(&args.scene)?;
    let sol = run_solver(&fm, &args.solver, args.efficiency)?;
    let values = pattern(&fm, &sol.excitation, CNorm::Auto)?;
    let (k, peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("a grid always has at least one direction");
    let at = fm.grid().directions()[k];
    println!(
        "peak: {:.6} ({:.4} dB) at theta {}, phi {}",
        peak,
        10.0 * peak.log10(),
        at.theta_deg(),
        at.phi_deg()
    );
    let mut out = std::io::BufWriter::new(fs::File::create(&args.out)?);
    write_pattern_csv(&fm, &values, &mut out)?;
    out.flush()?;
    println!("pattern: {}", args.out.display());
    Ok(())
}

fn cmd_dataset_gen(args: &GenArgs) -> Result<()> {
    let template = GeometryTemplate::parse_config(&fs::read_to_string(&args.geometry)?)?;
    let (ts, ps) = parse_pair(&args.grid, "--grid")?;
    let (lo, hi) = parse_pair(&args.range, "--range")?;
    let config = DatasetConfig {
        template,
        theta_step_deg: ts,
        phi_step_deg: ps,
        weighting: Weighting::parse(&args.weighting)?,
        spacing_count: args.spacings,
        spacing_range: (lo, hi),
        efficiency: args.efficiency,
        coupling: args
            .coupling
            .map(|strength| CouplingSpec { strength, seed: args.coupling_seed }),
        tikhonov_eps: args.tikhonov_eps,
        seed: args.seed,
        train_fraction: args.train_fraction,
    };
    let ds = generate_dataset(&config)?;
    write_dataset(&ds, &args.out)?;
    println!(
        "samples: {} ({} train, {} test)",
        ds.manifest.num_samples, ds.manifest.num_train, ds.manifest.num_test
    );
    println!("spacings: {}", ds.manifest.spacings_wl.len());
    println!("anomalies skipped: {}", ds.manifest.anomalies);
    println!("dataset: {}", args.out.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let ds = read_dataset(&args.dataset)?;
    let model: ModelFile = read_json(&args.model)?;
    let mut cfg: TrainConfig = read_json(&args.train_config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let m = ds.manifest.config.template.num_elements();
    if model.generator.m_antennas != m || model.discriminator.m_antennas != m {
        return Err(Error::InvalidInput(format!(
            "model is sized for {}/{} antennas (generator/discriminator) but the dataset has {m}",
            model.generator.m_antennas, model.discriminator.m_antennas
        )));
    }
    let out = train(
        &ds.train,
        &ds.manifest.norm_stats,
        &model.generator,
        &model.discriminator,
        &cfg,
        &args.out,
    )?;
    let last = out.traces.last().expect("training always records at least one step");
    println!("trained {} epochs on {} samples", cfg.epochs, ds.train.len());
    println!("final: d_loss {:.6}, g_loss {:.6}", last.d_loss, last.g_loss);
    println!("checkpoint: {}", out.checkpoint_path.display());
    println!("traces: {}", out.traces_path.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let (gen, _disc) = load_checkpoint(&args.ckpt)?;
    let ds = read_dataset(&args.dataset)?;
    let report = evaluate(&gen, &ds.test, &ds.manifest)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidInput(format!("report serialization failed: {e}")))?;
    fs::write(&args.report, text + "\n")?;
    println!("nmse: {:.4} dB", report.nmse_db);
    println!("accuracy: {:.2} %", report.acc_percent);
    println!("achieved ratio: {:.4}", report.achieved_ratio);
    println!(
        "samples: {} scored, {} skipped",
        report.num_samples, report.skipped_missing_spacing
    );
    println!("report: {}", args.report.display());
    Ok(())
}

fn cmd_params(args: &ParamsArgs) -> Result<()> {
    let model: ModelFile = read_json(&args.model)?;
    let gen = Generator::new(model.generator, 0)?;
    let disc = Discriminator::new(model.discriminator, 0)?;
    println!("generator parameters: {}", gen.count_params());
    println!("discriminator parameters: {}", disc.count_params());
    println!("total parameters: {}", gen.count_params() + disc.count_params());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Grid(args) => cmd_grid(args),
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Gain(args) => cmd_gain(args),
        Cmd::Pattern(args) => cmd_pattern(args),
        Cmd::Dataset(DatasetCmd::Gen(args)) => cmd_dataset_gen(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Params(args) => cmd_params(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version arrive as "errors" that print to stdout
            // and exit 0; real usage errors print to stderr and exit 1.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
