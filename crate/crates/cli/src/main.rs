use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use wqed_core::io::{parse_config, verify_dir, ConfigFile, DirLock};
use wqed_core::model::Geometry;
use wqed_core::optimizer::{log_grid, Objective, SweepSpec, SweepVariable};
use wqed_core::scenario::ScenarioKind;
use wqed_core::Error;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "wqed", version, about = "Photon trapping in waveguide QED lattices")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "WQED_THREADS")]
    threads: Option<usize>,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Snapped lattice parameters and bound-state properties.
    BicInfo(BicInfoArgs),
    /// Run one scenario.
    Run(RunArgs),
    /// Sweep one parameter and locate the optimum.
    Sweep(SweepArgs),
    /// Iterated time-reversal design of the incoming photon pair.
    Engineer(EngineerArgs),
    /// Re-hash outputs and re-check recorded residuals.
    Verify {
        dir: PathBuf,
    },
}

#[derive(Args, Debug)]
struct BicInfoArgs {
    #[arg(long, conflicts_with_all = ["gamma_tau", "gamma_over_4j"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    gamma_tau: Option<f64>,
    #[arg(long = "gamma-over-4j", required_unless_present = "config")]
    gamma_over_4j: Option<f64>,
    /// `mirror` or `two-qubit`.
    #[arg(long, default_value = "mirror")]
    geometry: String,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario kind; must agree with the config file when it names one.
    kind: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated times (units of 1/Γ) at which to record field
    /// profiles.
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Vec<f64>,
    /// Also write full binary state vectors at the snapshot times.
    #[arg(long)]
    save_states: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// dk, gamma_tau, detuning, u or gamma_loss. Overrides the config.
    #[arg(long)]
    var: Option<String>,
    /// Comma-separated grid values, or `log:MIN:MAX[:PER_DECADE]`.
    #[arg(long)]
    grid: Option<String>,
    /// p_tr_inf or p_e_inf.
    #[arg(long)]
    objective: Option<String>,
}

#[derive(Args, Debug)]
struct EngineerArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iterations: Option<usize>,
    /// Width of the first probe, units of v/Γ.
    #[arg(long)]
    dx0: Option<f64>,
}

fn parse_grid(s: &str) -> Result<Vec<f64>, Error> {
    let bad = |d: String| Error::Config(vec![d]);
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(bad(format!("grid \"{s}\" must be log:MIN:MAX[:PER_DECADE]")));
        }
        let num = |p: &str| p.parse::<f64>().map_err(|e| bad(format!("grid value \"{p}\": {e}")));
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let per = match parts.get(2) {
            Some(p) => p.parse::<usize>().map_err(|e| bad(format!("points per decade \"{p}\": {e}")))?,
            None => 12,
        };
        if !(lo > 0.0 && hi > lo && per > 0) {
            return Err(bad(format!("grid \"{s}\" needs 0 < MIN < MAX")));
        }
        return Ok(log_grid(lo, hi, per));
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| bad(format!("grid value \"{p}\": {e}"))))
        .collect()
}

fn load(path: &Path) -> Result<ConfigFile, Error> {
    let cfg = parse_config(path)?;
    for k in &cfg.defaulted {
        log::info!("{k} defaulted");
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::BicInfo(a) => {
            let (gt, g4j, geometry) = match &a.config {
                Some(p) => {
                    let c = load(p)?;
                    (c.scenario.gamma_tau, c.scenario.gamma_over_4j, c.scenario.geometry())
                }
                None => {
                    let geometry = match a.geometry.as_str() {
                        "mirror" => Geometry::MirrorQubit,
                        "two-qubit" => Geometry::TwoQubit,
                        other => {
                            return Err(Error::Config(vec![format!(
                                "geometry \"{other}\" must be \"mirror\" or \"two-qubit\""
                            )]))
                        }
                    };
                    (a.gamma_tau.unwrap_or(f64::NAN), a.gamma_over_4j.unwrap_or(f64::NAN), geometry)
                }
            };
            commands::bic_info(gt, g4j, geometry, a.json)?;
            Ok(0)
        }
        Command::Run(a) => {
            let kind = ScenarioKind::parse(&a.kind).ok_or_else(|| {
                let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(vec![format!("unknown kind \"{}\" (expected one of {})", a.kind, names.join(", "))])
            })?;
            let mut cfg = load(&a.config)?;
            if cfg.scenario.kind != kind {
                return Err(Error::Config(vec![format!(
                    "command line asks for {} but the config describes {}",
                    kind.name(),
                    cfg.scenario.kind.name()
                )]));
            }
            if !a.snapshot_times.is_empty() {
                cfg.scenario.snapshot_times = a.snapshot_times.clone();
                cfg.scenario.validate()?;
            }
            let _lock = DirLock::acquire(&a.out)?;
            commands::run(&cfg, &a.out, a.save_states)
        }
        Command::Sweep(a) => {
            let cfg = load(&a.config)?;
            let mut spec = cfg.sweep.clone().unwrap_or(SweepSpec {
                variable: SweepVariable::Bandwidth,
                grid: wqed_core::optimizer::default_bandwidth_grid(),
                objective: Objective::PTrInf,
            });
            if let Some(v) = &a.var {
                spec.variable = SweepVariable::parse(v)
                    .ok_or_else(|| Error::Config(vec![format!("unknown sweep variable \"{v}\"")]))?;
            }
            if let Some(g) = &a.grid {
                spec.grid = parse_grid(g)?;
            }
            if let Some(o) = &a.objective {
                spec.objective = match o.as_str() {
                    "p_tr_inf" => Objective::PTrInf,
                    "p_e_inf" => Objective::PEInf,
                    _ => return Err(Error::Config(vec![format!("unknown objective \"{o}\"")])),
                };
            }
            spec.validate()?;
            let _lock = DirLock::acquire(&a.out)?;
            commands::sweep(&cfg, &spec, &a.out)
        }
        Command::Engineer(a) => {
            let cfg = load(&a.config)?;
            let mut spec = cfg.engineer.clone().unwrap_or_else(|| {
                wqed_core::optimizer::EngineerSpec::new(cfg.scenario.gamma_tau, cfg.scenario.gamma_over_4j)
            });
            if let Some(n) = a.iterations {
                spec.iterations = n;
            }
            if let Some(dx) = a.dx0 {
                spec.dx0 = dx;
            }
            spec.validate()?;
            let _lock = DirLock::acquire(&a.out)?;
            commands::engineer(&cfg, &spec, &a.out)
        }
        Command::Verify { dir } => {
            let report = verify_dir(&dir)?;
            println!("{} files re-hashed", report.files_checked);
            for p in &report.problems {
                println!("problem: {p}");
            }
            if report.ok() {
                println!("ok");
                Ok(0)
            } else {
                Ok(2)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let started = Instant::now();
    match dispatch(cli) {
        Ok(code) => {
            log::info!("finished in {:.1} s", started.elapsed().as_secs_f64());
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
