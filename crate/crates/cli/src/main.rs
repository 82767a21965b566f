use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use husimi_core::aperture::load_grating_file;
use husimi_core::grid::{evaluate_grid, Evaluator, GridSpec, Method, DEFAULT_CELL_CAP};
use husimi_core::report::{self, ReportOptions};
use husimi_core::scenario::{check_frozen_regime, load_scenario_file, DEFAULT_MARGIN};
use husimi_core::{Error, PhaseSpacePoint, PhysicalScenario, TimeGrating};

const EXIT_INPUT: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "husimi", version, about = "Husimi distributions behind time-dependent absorbing barriers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate F on a phase-space grid and write it as CSV.
    Grid(GridArgs),
    /// Compare predicted double-slit fringes with extrema of F.
    Fringes(FringesArgs),
    /// Run the oracle-equivalence checks for a scenario and grating.
    Validate(ValidateArgs),
    /// Print the tail-integral error bound and measured tails over a sharpness sweep.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct Inputs {
    /// Scenario TOML (mass, sigma, x0, v0, t).
    #[arg(long)]
    scenario: PathBuf,
    /// Grating TOML (n, nu, opening times).
    #[arg(long)]
    grating: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value = "slit")]
    method: Method,
    #[arg(long, default_value_t = 200)]
    nx: usize,
    #[arg(long, default_value_t = 200)]
    nv: usize,
    /// Position range `min,max` in metres. Defaults to 0.6..1.4 of the classical point.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    x_range: Option<(f64, f64)>,
    /// Velocity range `min,max` in m/s.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    v_range: Option<(f64, f64)>,
    #[arg(long, default_value_t = DEFAULT_CELL_CAP)]
    cell_cap: usize,
    /// CSV destination; a `.meta.json` sidecar is written next to it. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FringesArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, default_value = "quadrature_exact")]
    method: Method,
    #[arg(long, default_value_t = -4, allow_hyphen_values = true)]
    k_min: i64,
    #[arg(long, default_value_t = 4, allow_hyphen_values = true)]
    k_max: i64,
    /// Samples along the fringe line before refinement.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    json: bool,
    /// Perturb the first partial-fraction coefficient by this relative amount.
    #[arg(long, hide = true, default_value_t = 0.0)]
    fault_coefficient: f64,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Phase-space position in metres. Defaults to the classical point.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    json: bool,
}

fn parse_range(text: &str) -> Result<(f64, f64), String> {
    let (a, b) = text.split_once(',').ok_or("expected `min,max`")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    Ok((lo, hi))
}

enum Failure {
    Input(String),
    Numeric(String),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn load(inputs: &Inputs) -> Result<(PhysicalScenario, TimeGrating), Failure> {
    let s = load_scenario_file(&inputs.scenario)
        .map_err(|e| Failure::Input(format!("{}: {e}", inputs.scenario.display())))?;
    let g = load_grating_file(&inputs.grating)
        .map_err(|e| Failure::Input(format!("{}: {e}", inputs.grating.display())))?;
    let regime = check_frozen_regime(&s, DEFAULT_MARGIN);
    if !regime.passed || !regime.ordering_ok {
        let mut failing: Vec<&str> = regime.failing();
        if !regime.ordering_ok {
            failing.push("ordering_ratio");
        }
        eprintln!("warning: outside the frozen-Gaussian regime ({})", failing.join(", "));
    }
    Ok((s, g))
}

fn print_report<T: serde::Serialize + std::fmt::Display>(report: &T, json: bool) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    if json {
        serde_json::to_writer_pretty(&mut out, report).map_err(|e| Failure::Numeric(e.to_string()))?;
        writeln!(out)?;
    } else {
        write!(out, "{report}")?;
    }
    Ok(())
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_stem().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    csv.with_file_name(name)
}

fn cmd_grid(args: &GridArgs) -> Result<(), Failure> {
    let (s, g) = load(&args.inputs)?;
    let default = GridSpec::around_classical_point(&s, args.nx, args.nv);
    let (x_min, x_max) = args.x_range.unwrap_or((default.x_min, default.x_max));
    let (v_min, v_max) = args.v_range.unwrap_or((default.v_min, default.v_max));
    let spec = GridSpec {
        x_min,
        x_max,
        v_min,
        v_max,
        nx: args.nx,
        nv: args.nv,
    };
    spec.validate(args.cell_cap)?;
    let ev = Evaluator::new(s, g, args.method)?;
    let grid = evaluate_grid(&ev, &spec, args.cell_cap)?;
    match &args.out {
        Some(path) => {
            grid.write_csv(BufWriter::new(File::create(path)?))?;
            let meta = serde_json::to_string_pretty(&grid.meta).map_err(|e| Failure::Numeric(e.to_string()))?;
            std::fs::write(sidecar_path(path), meta + "\n")?;
            eprintln!(
                "wrote {} cells to {} in {:.2} s",
                spec.cells(),
                path.display(),
                grid.meta.elapsed_s
            );
        }
        None => grid.write_csv(BufWriter::new(io::stdout().lock()))?,
    }
    Ok(())
}

fn cmd_fringes(args: &FringesArgs) -> Result<(), Failure> {
    let (s, g) = load(&args.inputs)?;
    if args.k_min > args.k_max {
        return Err(Failure::Input("k-min must not exceed k-max".into()));
    }
    let r = report::fringes(
        &s,
        &g,
        (args.k_min, args.k_max),
        args.method,
        args.samples,
        &ReportOptions::default(),
    )?;
    print_report(&r, args.json)?;
    if r.passed() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let (s, g) = load(&args.inputs)?;
    let mut opts = ReportOptions::default();
    opts.residue.coefficient_fault = args.fault_coefficient;
    let r = report::validate(&s, &g, &opts)?;
    print_report(&r, args.json)?;
    if r.passed() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), Failure> {
    let (s, g) = load(&args.inputs)?;
    let c = s.classical_point();
    let p = PhaseSpacePoint::new(args.x.unwrap_or(c.x), args.v.unwrap_or(c.v));
    let r = report::bounds(&s, &g, &p, &ReportOptions::default())?;
    print_report(&r, args.json)?;
    if r.passed() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Grid(a) => cmd_grid(a),
        Command::Fringes(a) => cmd_fringes(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Bounds(a) => cmd_bounds(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Err(Failure::Validation) => {
            eprintln!("validation failed");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
