use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mechlink::config::ExperimentConfig;
use mechlink::dynamics::{build_drift, check_stability, SqueezeConvention};
use mechlink::output::{fmt_f64, LogBase};
use mechlink::pipeline::{evaluate, prepare, PipelineOptions};
use mechlink::readout::{io_curve, linear_fit, parse_r_grid, write_io_csv, ReadoutOptions};
use mechlink::sweep::{fig1_spec, fig2_spec, provenance, run_sweep, write_sweep_csv, SweepSpec};
use mechlink::{derive, MechError, PhysicalParams};

#[derive(Parser)]
#[command(name = "mechlink", version, about = "Mirror-mirror entanglement driven by two-mode squeezed light")]
struct Cli {
    /// Squeezed-input phase convention; overrides the config file.
    #[arg(long, global = true)]
    convention: Option<SqueezeConvention>,
    /// Logarithm base used when printing entanglement and discord.
    #[arg(long, global = true, default_value = "e")]
    log_base: LogBase,
    /// Worker threads for sweeps and readout grids.
    #[arg(long, global = true, env = "MECHLINK_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a config and report the stability of the linearized dynamics.
    Validate { config: PathBuf },
    /// Solve the periodic steady state and write its stationary part as JSON.
    SteadyState {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a parameter grid.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Input/output entanglement of the optical readout over a squeezing grid.
    Readout {
        config: PathBuf,
        /// `start:stop:count`
        #[arg(long)]
        r_grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Data for the three reference figures.
    Fig {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Settings {
    convention: Option<SqueezeConvention>,
    log_base: LogBase,
    jobs: usize,
}

impl Settings {
    fn convention_for(&self, cfg: &ExperimentConfig) -> SqueezeConvention {
        self.convention.or(cfg.convention).unwrap_or_default()
    }
}

fn create(path: &Path) -> mechlink::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| MechError::Config(format!("cannot create {}: {e}", path.display())))
}

fn validate(cfg_path: &Path, s: &Settings) -> mechlink::Result<ExitCode> {
    let cfg = ExperimentConfig::load(cfg_path)?;
    let d = derive(&cfg.params)?;
    let report = check_stability(&build_drift(&d));
    println!("config: {}", cfg_path.display());
    println!("convention: {}", s.convention_for(&cfg));
    println!("omega_m = {:e} rad/s, kappa = {:e} rad/s, delta/omega_m = {}", d.omega_m, d.kappa, d.delta / d.omega_m);
    println!("g = {:e} rad/s, |c_s| = {:e}, G = 2g|c_s| = {:e} rad/s", d.g, d.c_s.norm(), 2.0 * d.g * d.c_s.norm());
    println!("nbar = {}, N = {}, |M| = {}", d.nbar, d.n_sq, d.m_sq.norm());
    println!("max Re(eigenvalue) = {:e}", report.max_real_part);
    if report.stable {
        println!("stable");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("unstable");
        Ok(ExitCode::from(3))
    }
}

fn steady_state(cfg_path: &Path, out: Option<&Path>, s: &Settings) -> mechlink::Result<ExitCode> {
    let cfg = ExperimentConfig::load(cfg_path)?;
    let convention = s.convention_for(&cfg);
    let prepared = prepare(&cfg.params, convention)?;
    let json = prepared.steady.v0.to_json()?;
    match out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{json}")?;
            w.flush()?;
        }
        None => println!("{json}"),
    }
    let res = evaluate(&cfg.params, &PipelineOptions { convention, discord: true, ..Default::default() })?;
    let show = |x: Option<f64>| x.map(|v| fmt_f64(s.log_base.convert(v))).unwrap_or_default();
    eprintln!("log-negativity mean/min/max: {} {} {}", show(res.e_mean), show(res.e_min), show(res.e_max));
    eprintln!("discord mean: {}", show(res.d_mean));
    eprintln!("residuals: lyapunov {:e}, harmonic {:e}", prepared.steady.lyapunov_residual, prepared.steady.harmonic_residual);
    Ok(ExitCode::SUCCESS)
}

fn sweep(spec: &SweepSpec, out: &Path, s: &Settings) -> mechlink::Result<ExitCode> {
    let result = run_sweep(spec, s.jobs)?;
    let mut w = create(out)?;
    write_sweep_csv(&result, s.log_base, &mut w)?;
    w.flush()?;
    let failed = result.rows.iter().filter(|r| r.outcome.is_err()).count();
    let unstable = result.rows.iter().filter(|r| matches!(&r.outcome, Ok(c) if !c.stable)).count();
    eprintln!("{} points written to {} ({unstable} unstable, {failed} failed)", result.rows.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn readout(params: &PhysicalParams, convention: SqueezeConvention, grid: &[f64], out: &Path, s: &Settings) -> mechlink::Result<ExitCode> {
    let opts = ReadoutOptions { convention, ..Default::default() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(s.jobs)
        .build()
        .map_err(|e| MechError::Config(format!("cannot start {} workers: {e}", s.jobs)))?;
    let points = pool.install(|| io_curve(params, grid, &opts))?;
    let mut w = create(out)?;
    let mut header = provenance(params, convention, s.log_base);
    header.push(format!("readout duration: {} / kappa, {} time samples", opts.duration, opts.n_samples));
    write_io_csv(&points, s.log_base, &header, &mut w)?;
    w.flush()?;
    let fit = linear_fit(&points)?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> mechlink::Result<ExitCode> {
    let jobs = match cli.jobs {
        Some(0) => return Err(MechError::Config("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let s = Settings { convention: cli.convention, log_base: cli.log_base, jobs };
    match &cli.command {
        Command::Validate { config } => validate(config, &s),
        Command::SteadyState { config, out } => steady_state(config, out.as_deref(), &s),
        Command::Sweep { config, spec, out } => {
            let cfg = ExperimentConfig::load(config)?;
            let spec = SweepSpec::load(cfg.params.clone(), spec, s.convention_for(&cfg))?;
            sweep(&spec, out, &s)
        }
        Command::Readout { config, r_grid, out } => {
            let cfg = ExperimentConfig::load(config)?;
            readout(&cfg.params, s.convention_for(&cfg), &parse_r_grid(r_grid)?, out, &s)
        }
        Command::Fig { which, out } => {
            let convention = s.convention.unwrap_or_default();
            match which {
                1 => sweep(&fig1_spec(convention), out, &s),
                2 => sweep(&fig2_spec(convention), out, &s),
                _ => {
                    let base = PhysicalParams::reference().with_detuning_ratio(1.0).with_temperature(2e-3);
                    readout(&base, convention, &parse_r_grid("0:2:21")?, out, &s)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
