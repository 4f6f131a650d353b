//! Command-line entry point: batch scenario runs, the three-vehicle
//! demonstration, and the verification suite.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::barrier::EvadingManeuver;
use crate::counterexample;
use crate::dynamics::ControlBounds;
use crate::safety::SafetyKind;
use crate::scenario::{preset, FilterMode, ScenarioConfig, ScenarioError, PRESET_NAMES};
use crate::sim;
use crate::supervisor::AlphaFunction;
use crate::verify;

/// exit code: clean run
pub const EXIT_OK: i32 = 0;
/// exit code: configuration problem
pub const EXIT_CONFIG: i32 = 1;
/// exit code: safety or feasibility abort
pub const EXIT_SAFETY: i32 = 2;

#[derive(Parser)]
#[command(
    name = "maneuver-cbf",
    about = "Safety-filtered unicycle fleet simulation with maneuver-built barrier functions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a preset or a config file and write CSV logs.
    Run(RunArgs),
    /// Reproduce the three-vehicle joint-infeasibility demonstration.
    Counterexample,
    /// Run the oracle and invariant suite with one line per criterion.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Centralized,
    Decentralized,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario name (see --list-presets).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Key = value scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the preset names and exit.
    #[arg(long)]
    list_presets: bool,
    /// Override the filter arrangement.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output directory for trajectory.csv and pairs.csv.
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
    /// Override the integration step [s].
    #[arg(long)]
    dt: Option<f64>,
    /// Override the run duration [s].
    #[arg(long)]
    t_end: Option<f64>,
    /// Override the class-K gain [1/s].
    #[arg(long)]
    kappa: Option<f64>,
    /// Override the heading offset [degrees].
    #[arg(long)]
    psi_deg: Option<f64>,
    /// On an infeasible QP, fly the evading maneuver for that step and log
    /// it instead of aborting.
    #[arg(long)]
    fallback_maneuver: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run a single criterion (1-8) instead of the whole suite.
    #[arg(long)]
    criterion: Option<usize>,
}

/// Parse `std::env::args` and execute; returns the process exit code.
pub fn run_from_env() -> i32 {
    run_with_args(std::env::args())
}

/// Testable entry point over explicit arguments.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path as well.
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Counterexample => cmd_counterexample(),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn cmd_run(args: RunArgs) -> i32 {
    if args.list_presets {
        for name in PRESET_NAMES {
            println!("{name}");
        }
        return EXIT_OK;
    }
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), None) => match preset(name) {
            Some(cfg) => cfg,
            None => {
                eprintln!("unknown preset '{name}'; available presets:");
                for p in PRESET_NAMES {
                    eprintln!("  {p}");
                }
                return EXIT_CONFIG;
            }
        },
        (None, Some(path)) => match parse_config_file(path) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("{e}");
                return EXIT_CONFIG;
            }
        },
        _ => {
            eprintln!("exactly one of --preset or --config is required");
            return EXIT_CONFIG;
        }
    };

    if let Some(mode) = args.mode {
        cfg.mode = match mode {
            ModeArg::Centralized => FilterMode::Centralized,
            ModeArg::Decentralized => FilterMode::Decentralized,
        };
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(t_end) = args.t_end {
        cfg.t_end = t_end;
    }
    if let Some(kappa) = args.kappa {
        cfg.alpha = match AlphaFunction::linear(kappa) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("{e}");
                return EXIT_CONFIG;
            }
        };
    }
    if let Some(psi_deg) = args.psi_deg {
        cfg.psi = psi_deg.to_radians();
    }
    cfg.fallback_maneuver = args.fallback_maneuver;

    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return EXIT_CONFIG;
    }

    print_config(&cfg);
    let result = match sim::run(&cfg) {
        Ok(r) => r,
        Err(e @ ScenarioError::InvalidConfig(_)) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("{e}");
            return EXIT_SAFETY;
        }
    };

    if let Err(e) = std::fs::create_dir_all(&args.output) {
        eprintln!("cannot create output directory: {e}");
        return EXIT_CONFIG;
    }
    let cs = cfg.constraint_set().expect("validated above");
    let traj = args.output.join("trajectory.csv");
    let pairs = args.output.join("pairs.csv");
    if let Err(e) = sim::write_trajectory_csv(&traj, &result.records) {
        eprintln!("cannot write {}: {e}", traj.display());
        return EXIT_CONFIG;
    }
    if let Err(e) = sim::write_pairs_csv(&pairs, &cs, &result.records) {
        eprintln!("cannot write {}: {e}", pairs.display());
        return EXIT_CONFIG;
    }
    println!("wrote {}", traj.display());
    println!("wrote {}", pairs.display());
    print!("{}", result.summary);

    if result.summary.error.is_some() {
        EXIT_SAFETY
    } else {
        EXIT_OK
    }
}

fn print_config(cfg: &ScenarioConfig) {
    let AlphaFunction::Linear { kappa } = cfg.alpha;
    println!("k                        = {}", cfg.k);
    println!("radius [m]               = {}", cfg.radius);
    println!("psi [deg]                = {}", cfg.psi.to_degrees());
    println!(
        "bounds                   = v in [{}, {}] m/s, |omega| <= {:.6} deg/s",
        cfg.bounds.v_min,
        cfg.bounds.v_max,
        cfg.bounds.omega_max.to_degrees()
    );
    println!("d_s [m]                  = {}", cfg.d_s);
    println!("delta [m^2]              = {}", cfg.delta);
    println!("kappa [1/s]              = {kappa}");
    println!("safety                   = {:?}", cfg.safety);
    match &cfg.maneuver {
        EvadingManeuver::Turn {
            sigmas,
            omega,
            speed,
        } => {
            println!(
                "maneuver                 = turn (speed {speed} m/s, omega {:.6} deg/s, sigmas {sigmas:?})",
                omega.to_degrees()
            );
        }
        EvadingManeuver::Straight { speeds } => {
            println!("maneuver                 = straight (speeds {speeds:?})");
        }
    }
    println!("dt [s]                   = {}", cfg.dt);
    println!("t_end [s]                = {}", cfg.t_end);
    println!("mode                     = {}", cfg.mode);
    println!("fallback_maneuver        = {}", cfg.fallback_maneuver);
}

fn cmd_counterexample() -> i32 {
    let report = counterexample::run();
    print!("{report}");
    if report.all_facts_hold() {
        println!("all four facts verified");
        EXIT_OK
    } else {
        println!("demonstration FAILED");
        EXIT_CONFIG
    }
}

fn cmd_verify(args: VerifyArgs) -> i32 {
    let reports = match args.criterion {
        Some(n) => {
            let criteria: [fn() -> verify::CriterionReport; 8] = [
                verify::criterion_1,
                verify::criterion_2,
                verify::criterion_3,
                verify::criterion_4,
                verify::criterion_5,
                verify::criterion_6,
                verify::criterion_7,
                verify::criterion_8,
            ];
            if n == 0 || n > criteria.len() {
                eprintln!("criterion must be between 1 and {}", criteria.len());
                return EXIT_CONFIG;
            }
            let report = criteria[n - 1]();
            println!("{}", report.line());
            vec![report]
        }
        None => verify::run_all(|r| println!("{}", r.line())),
    };
    let all_passed = reports.iter().all(|r| r.passed);
    let budgets_ok = reports.iter().all(|r| r.within_budget());
    if !budgets_ok {
        println!("note: some criteria exceeded their runtime budgets");
    }
    if all_passed {
        EXIT_OK
    } else {
        EXIT_CONFIG
    }
}

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "config error at line {line}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err_at(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        message: message.into(),
    }
}

/// Parse a flat `key = value` scenario file. Unknown keys are rejected
/// with their line number; omitted keys fall back to the two-vehicle
/// circle defaults.
pub fn parse_config_file(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut k: Option<usize> = None;
    let mut radius = 200.0;
    let mut psi_deg = 0.0;
    let mut v_min = 15.0;
    let mut v_max = 25.0;
    let mut omega_max_deg = 13.0;
    let mut d_s = 5.0;
    let mut delta = 0.01;
    let mut kappa = 1.0;
    let mut dt = 0.02;
    let mut t_end = 40.0;
    let mut mode = FilterMode::Decentralized;
    let mut fallback = false;
    let mut maneuver_kind: Option<String> = None;
    let mut safety: Option<String> = None;
    let mut maneuver_speed: Option<f64> = None;
    let mut maneuver_omega_deg: Option<f64> = None;
    let mut maneuver_sigmas: Option<Vec<f64>> = None;
    let mut maneuver_speeds: Option<Vec<f64>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err_at(line_no, format!("expected 'key = value', got '{raw}'")))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |v: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>()
                .map_err(|_| err_at(line_no, format!("'{v}' is not a number (key '{key}')")))
        };
        let parse_list = |v: &str| -> Result<Vec<f64>, ConfigError> {
            v.split(',')
                .map(|piece| {
                    piece.trim().parse::<f64>().map_err(|_| {
                        err_at(line_no, format!("'{piece}' is not a number (key '{key}')"))
                    })
                })
                .collect()
        };
        match key {
            "k" => {
                k = Some(value.parse::<usize>().map_err(|_| {
                    err_at(line_no, format!("'{value}' is not a vehicle count"))
                })?)
            }
            "radius" => radius = parse_f64(value)?,
            "psi_deg" => psi_deg = parse_f64(value)?,
            "v_min" => v_min = parse_f64(value)?,
            "v_max" => v_max = parse_f64(value)?,
            "omega_max_deg" => omega_max_deg = parse_f64(value)?,
            "d_s" => d_s = parse_f64(value)?,
            "delta" => delta = parse_f64(value)?,
            "kappa" => kappa = parse_f64(value)?,
            "dt" => dt = parse_f64(value)?,
            "t_end" => t_end = parse_f64(value)?,
            "mode" => {
                mode = match value {
                    "centralized" => FilterMode::Centralized,
                    "decentralized" => FilterMode::Decentralized,
                    other => {
                        return Err(err_at(
                            line_no,
                            format!("mode must be centralized or decentralized, got '{other}'"),
                        ))
                    }
                }
            }
            "fallback_maneuver" => {
                fallback = match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(err_at(
                            line_no,
                            format!("fallback_maneuver must be true or false, got '{other}'"),
                        ))
                    }
                }
            }
            "maneuver" => maneuver_kind = Some(value.to_string()),
            "safety" => safety = Some(value.to_string()),
            "maneuver_speed" => maneuver_speed = Some(parse_f64(value)?),
            "maneuver_omega_deg" => maneuver_omega_deg = Some(parse_f64(value)?),
            "maneuver_sigmas" => maneuver_sigmas = Some(parse_list(value)?),
            "maneuver_speeds" => maneuver_speeds = Some(parse_list(value)?),
            other => return Err(err_at(line_no, format!("unknown key '{other}'"))),
        }
    }

    let k = k.ok_or_else(|| ConfigError {
        line: None,
        message: "missing required key 'k'".into(),
    })?;
    let kind = maneuver_kind.ok_or_else(|| ConfigError {
        line: None,
        message: "missing required key 'maneuver' (turn or straight)".into(),
    })?;

    let bounds = ControlBounds::new(v_min, v_max, omega_max_deg.to_radians()).map_err(|e| {
        ConfigError {
            line: None,
            message: e.to_string(),
        }
    })?;
    let base_speed = maneuver_speed.unwrap_or(0.9 * v_min + 0.1 * v_max);

    let (maneuver, default_safety) = match kind.as_str() {
        "turn" => {
            let omega = maneuver_omega_deg
                .map(|deg| deg.to_radians())
                .unwrap_or(0.9 * bounds.omega_max);
            let sigmas = match maneuver_sigmas {
                Some(list) if list.len() == 1 => vec![list[0]; k],
                Some(list) => list,
                None => vec![1.0; k],
            };
            (
                EvadingManeuver::Turn {
                    sigmas,
                    omega,
                    speed: base_speed,
                },
                SafetyKind::AdjustedSqrt,
            )
        }
        "straight" => {
            let speeds = maneuver_speeds.unwrap_or_else(|| {
                (1..=k).map(|i| (1.0 + 0.01 * i as f64) * base_speed).collect()
            });
            (
                EvadingManeuver::Straight { speeds },
                SafetyKind::PlainSqrt,
            )
        }
        other => {
            return Err(ConfigError {
                line: None,
                message: format!("maneuver must be turn or straight, got '{other}'"),
            })
        }
    };

    let safety = match safety.as_deref() {
        None => default_safety,
        Some("euclidean-sq") => SafetyKind::EuclideanSq,
        Some("adjusted-sq") => SafetyKind::AdjustedSq,
        Some("adjusted-sqrt") => SafetyKind::AdjustedSqrt,
        Some("plain-sqrt") => SafetyKind::PlainSqrt,
        Some(other) => {
            return Err(ConfigError {
                line: None,
                message: format!(
                    "safety must be one of euclidean-sq, adjusted-sq, adjusted-sqrt, plain-sqrt; got '{other}'"
                ),
            })
        }
    };

    let alpha = AlphaFunction::linear(kappa).map_err(|e| ConfigError {
        line: None,
        message: e.to_string(),
    })?;

    let cfg = ScenarioConfig {
        k,
        radius,
        psi: psi_deg.to_radians(),
        bounds,
        d_s,
        delta,
        alpha,
        maneuver,
        safety,
        dt,
        t_end,
        mode,
        fallback_maneuver: fallback,
    };
    cfg.validate().map_err(|e| ConfigError {
        line: None,
        message: e.to_string(),
    })?;
    Ok(cfg)
}
