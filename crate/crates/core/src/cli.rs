//! Command-line front end: `generate | train | eval | sweep | phase`.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numeric failure.
//!
//! `--config FILE` reads `key = value` lines (`#` starts a comment). Keys are
//! long flag names; a flag given on the command line wins over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{Args, CommandFactory, Parser, Subcommand};
use thiserror::Error;

use crate::dynamics::{equilibrium, nullclines, DynamicsError, FhnParams};
use crate::exec::Exec;
use crate::integrate::{add_noise, IntegrateError, NoiseSpec, Trajectory};
use crate::learner::{
    default_initial_state, eval_mse, generate_truth, rollout, steps_for, train_with, uses_time_input,
    LearnError, TrainConfig,
};
use crate::neural::{Mlp, NeuralError};
use crate::numfmt::format_f64 as fmt;
use crate::sweep::{run_sweep, summarize, write_summary_csv, write_sweep_csv, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Learn(#[from] LearnError),
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Learn(e.into())
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        CliError::Learn(e.into())
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        CliError::Learn(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Learn(e) if e.is_numeric() => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "euler-sysid", version, about = "Learn ODE right-hand sides from trajectory data")]
pub struct Cli {
    /// Key-value file supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate FitzHugh-Nagumo reference data (clean and, with --noise, noisy).
    Generate(GenerateArgs),
    /// Fit a network to a trajectory with the forward-Euler residual loss.
    Train(TrainArgs),
    /// Roll out a trained model and score it against a reference trajectory.
    Eval(EvalArgs),
    /// Train and evaluate over a grid of widths, depths, steps and noise levels.
    Sweep(SweepArgs),
    /// Nullclines and rest point of the phase plane.
    Phase(PhaseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelParamArgs {
    #[arg(long, default_value_t = 0.8)]
    pub a: f64,
    #[arg(long, default_value_t = 0.7)]
    pub b: f64,
    #[arg(long, default_value_t = 3.0)]
    pub c: f64,
}

impl ModelParamArgs {
    fn params(&self) -> Result<FhnParams, CliError> {
        Ok(FhnParams::new(self.a, self.b, self.c)?)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: ModelParamArgs,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 20.0)]
    pub t_final: f64,
    /// Noise as a fraction of each component's standard deviation.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// RK4 steps per recorded sample.
    #[arg(long, default_value_t = crate::learner::TRUTH_SUBSTEPS)]
    pub substeps: usize,
    /// Initial u; defaults to -u_e.
    #[arg(long, allow_hyphen_values = true)]
    pub u0: Option<f64>,
    /// Initial v; defaults to -v_e.
    #[arg(long, allow_hyphen_values = true)]
    pub v0: Option<f64>,
    #[arg(long, default_value = "clean.csv")]
    pub out: PathBuf,
    /// Noisy output path; defaults to `<out stem>_noisy.csv`.
    #[arg(long)]
    pub noisy_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Trajectory CSV to fit.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    #[arg(long, default_value_t = 20_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Feed time as an extra network input.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub time_input: bool,
    /// Early-stop threshold on the training loss.
    #[arg(long, default_value_t = 1e-10)]
    pub loss_tol: f64,
    #[arg(long, default_value = "model.txt")]
    pub model_out: PathBuf,
    #[arg(long, default_value = "loss.csv")]
    pub log_out: PathBuf,
    /// Disable the thread pool.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Reference trajectory; the rollout starts from its first row.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value = "pred.csv")]
    pub pred_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelParamArgs,
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256")]
    pub widths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub depths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub dts: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub noise_levels: Vec<f64>,
    /// Replicates per cell.
    #[arg(long, default_value_t = 3)]
    pub seeds: usize,
    /// Replicate r uses seed base-seed + r.
    #[arg(long, default_value_t = 1)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 20_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 20.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub loss_tol: f64,
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub time_input: bool,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
    /// Per-cell medians.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[command(flatten)]
    pub model: ModelParamArgs,
    #[arg(long, default_value_t = -2.5, allow_hyphen_values = true)]
    pub u_min: f64,
    #[arg(long, default_value_t = 2.5, allow_hyphen_values = true)]
    pub u_max: f64,
    #[arg(long, default_value_t = 501)]
    pub points: usize,
    /// Explicit u values, replacing the uniform grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u_values: Vec<f64>,
    #[arg(long, default_value = "phase.csv")]
    pub out: PathBuf,
}

fn exec_for(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    match Trajectory::load(path) {
        Err(IntegrateError::Io(source)) => Err(CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        other => Ok(other?),
    }
}

fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<(), CliError> {
    match traj.save(path) {
        Err(IntegrateError::Io(source)) => Err(CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        other => Ok(other?),
    }
}

fn noisy_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    out.with_file_name(format!("{stem}_noisy.csv"))
}

pub fn cmd_generate(args: &GenerateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let params = args.model.params()?;
    let spec = NoiseSpec::new(args.noise, args.seed)?;
    let steps = steps_for(args.t_final, args.dt)?;
    let default = default_initial_state(&params)?;
    let s0 = [args.u0.unwrap_or(default[0]), args.v0.unwrap_or(default[1])];
    let clean = generate_truth(&params, &s0, args.dt, args.t_final, args.substeps)?;
    save_trajectory(&clean, &args.out)?;
    writeln!(stdout, "wrote {} samples to {}", steps + 1, args.out.display()).map_err(io_err(&args.out))?;
    if args.noise > 0.0 {
        let path = args.noisy_out.clone().unwrap_or_else(|| noisy_path(&args.out));
        save_trajectory(&add_noise(&clean, &spec), &path)?;
        writeln!(stdout, "wrote noisy samples (level {}) to {}", args.noise, path.display())
            .map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn cmd_train(args: &TrainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let data = load_trajectory(&args.data)?;
    let cfg = TrainConfig {
        dt: data.dt(),
        horizon: data.horizon(),
        width: args.width,
        depth: args.depth,
        epochs: args.epochs,
        lr: args.lr,
        noise: 0.0,
        seed: args.seed,
        time_input: args.time_input,
        loss_tol: args.loss_tol,
    };
    let report = train_with(&data, &cfg, exec_for(args.sequential))?;
    report
        .network
        .save(&args.model_out)
        .map_err(|e| match e {
            NeuralError::Io(source) => CliError::Io {
                path: args.model_out.clone(),
                source,
            },
            other => other.into(),
        })?;
    let mut log = create(&args.log_out)?;
    let write_log = |log: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(log, "epoch,loss")?;
        for (epoch, loss) in report.loss_history.iter().enumerate() {
            writeln!(log, "{epoch},{}", fmt(*loss))?;
        }
        log.flush()
    };
    write_log(&mut log).map_err(io_err(&args.log_out))?;
    writeln!(
        stdout,
        "epochs={} initial_loss={} final_loss={} seconds={:.3}",
        report.loss_history.len(),
        fmt(report.initial_loss()),
        fmt(report.final_loss),
        report.seconds
    )
    .map_err(io_err(&args.log_out))?;
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let net = Mlp::load(&args.model).map_err(|e| match e {
        NeuralError::Io(source) => CliError::Io {
            path: args.model.clone(),
            source,
        },
        other => other.into(),
    })?;
    let truth = load_trajectory(&args.truth)?;
    uses_time_input(&net, truth.dim())?;
    let first = truth.state(0).to_vec();
    let pred = rollout(&net, &first, truth.t0(), truth.dt(), truth.steps())?;
    let report = eval_mse(&pred, &truth)?;
    save_trajectory(&pred, &args.pred_out)?;
    writeln!(stdout, "mse_u={} mse_v={}", fmt(report.mse_u()), fmt(report.mse_v())).map_err(io_err(&args.pred_out))?;
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let params = args.model.params()?;
    let spec = SweepSpec {
        widths: args.widths.clone(),
        depths: args.depths.clone(),
        dts: args.dts.clone(),
        noise_levels: args.noise_levels.clone(),
        seeds_per_cell: args.seeds,
        base_seed: args.base_seed,
    };
    let template = TrainConfig {
        horizon: args.t_final,
        epochs: args.epochs,
        lr: args.lr,
        time_input: args.time_input,
        loss_tol: args.loss_tol,
        ..TrainConfig::default()
    };
    let rows = run_sweep(&spec, &template, &params, exec_for(args.sequential))?;
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "cell width={} depth={} dt={} noise={} seed={} failed: {}",
            r.width,
            r.depth,
            r.dt,
            r.noise,
            r.seed,
            r.error.as_deref().unwrap_or_default()
        );
    }
    let mut w = create(&args.out)?;
    write_sweep_csv(&rows, &mut w)
        .and_then(|_| w.flush())
        .map_err(io_err(&args.out))?;

    let cells = summarize(&rows);
    if let Some(path) = &args.summary_out {
        let mut w = create(path)?;
        write_summary_csv(&cells, &mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(path))?;
    }
    let print = |stdout: &mut dyn Write| -> std::io::Result<()> {
        writeln!(stdout, "width depth dt noise median_mse_u median_mse_v")?;
        for c in &cells {
            writeln!(
                stdout,
                "{} {} {} {} {:.3e} {:.3e}",
                c.width, c.depth, c.dt, c.noise, c.median_mse_u, c.median_mse_v
            )?;
        }
        Ok(())
    };
    print(stdout).map_err(io_err(&args.out))?;
    Ok(())
}

pub fn phase_grid(args: &PhaseArgs) -> Result<Vec<f64>, CliError> {
    if !args.u_values.is_empty() {
        if args.u_values.iter().any(|u| !u.is_finite()) {
            return Err(CliError::Usage("u values must be finite".into()));
        }
        return Ok(args.u_values.clone());
    }
    if args.points < 2 || !(args.u_max > args.u_min) {
        return Err(CliError::Usage(
            "phase grid needs at least 2 points and u-max > u-min".into(),
        ));
    }
    let span = args.u_max - args.u_min;
    let last = (args.points - 1) as f64;
    Ok((0..args.points)
        .map(|i| args.u_min + span * i as f64 / last)
        .collect())
}

pub fn cmd_phase(args: &PhaseArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let params = args.model.params()?;
    let grid = phase_grid(args)?;
    let e = equilibrium(&params)?;
    let lines = nullclines(&params, &grid);
    let mut w = create(&args.out)?;
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "# equilibrium u_e={} v_e={}", fmt(e.u_e), fmt(e.v_e))?;
        writeln!(w, "u,cubic_v,linear_v")?;
        for ((u, cubic), linear) in grid.iter().zip(&lines.cubic).zip(&lines.linear) {
            writeln!(w, "{},{},{}", fmt(*u), fmt(*cubic), fmt(*linear))?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(&args.out))?;
    writeln!(stdout, "equilibrium u_e={} v_e={}", fmt(e.u_e), fmt(e.v_e)).map_err(io_err(&args.out))?;
    Ok(())
}

/// Parses `key = value` lines into long-flag names.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected `key = value`", n + 1))
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

/// Appends `--key=value` for every config entry the user did not set on the
/// command line. Keys no subcommand knows are an error; keys belonging to
/// other subcommands are ignored.
fn merge_config(argv: &[OsString], matches: &clap::ArgMatches) -> Result<Vec<OsString>, CliError> {
    let Some(path) = matches.get_one::<PathBuf>("config") else {
        return Ok(argv.to_vec());
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    let entries = parse_config(&text)?;
    let root = Cli::command();
    let Some((name, sub_matches)) = matches.subcommand() else {
        return Ok(argv.to_vec());
    };
    let sub = root
        .find_subcommand(name)
        .expect("matched subcommand exists");
    let mut merged = argv.to_vec();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let known_anywhere = root
            .get_subcommands()
            .flat_map(|s| s.get_arguments())
            .any(|a| a.get_long() == Some(key.as_str()));
        if !known_anywhere {
            return Err(CliError::Usage(format!("unknown config key `{key}`")));
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            continue;
        };
        if sub_matches.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        merged.push(format!("--{key}={value}").into());
    }
    Ok(merged)
}

pub fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a, stdout),
        Command::Train(a) => cmd_train(a, stdout),
        Command::Eval(a) => cmd_eval(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, stdout),
        Command::Phase(a) => cmd_phase(a, stdout),
    }
}

fn clap_exit(e: clap::Error) -> i32 {
    let _ = e.print();
    if e.use_stderr() {
        EXIT_USAGE
    } else {
        EXIT_OK
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return clap_exit(e),
    };
    let argv = match merge_config(&argv, &matches) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => return clap_exit(e),
    };
    match dispatch(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
