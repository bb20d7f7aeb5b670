//! `tvsdp`: build instances, run the hierarchies, verify and sample solutions.
//!
//! Exit codes: 0 optimal (or inaccurate), 1 I/O, schema or usage error,
//! 2 infeasible, 3 unbounded or numerical failure, 4 verification failed.

use std::error::Error;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};
use tvsdp::applications::{example_by_name, EXAMPLES};
use tvsdp::conic::{to_sdpa_string, ClarabelBackend, SolveStatus, SolverSettings};
use tvsdp::hierarchy::{
    build_dual, build_primal, solution_from_json, solution_to_json, solve_dual, solve_primal,
    verify_solution, HierarchySolution, Mode, GENERATOR, VERIFY_GRID, VERIFY_TOL,
};
use tvsdp::model::{load_instance, TvSdp};

type CliResult<T> = Result<T, Box<dyn Error>>;

const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_FAILED: u8 = 3;
const EXIT_UNVERIFIED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "tvsdp",
    version,
    about = "Polynomial hierarchies for time-varying SDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance with the primal or dual hierarchy, or sweep over degrees
    Solve {
        /// Instance JSON
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = RunMode::Primal)]
        mode: RunMode,
        /// Trajectory degree (primal) or relaxation level (dual)
        #[arg(long)]
        degree: Option<usize>,
        /// Inclusive degree range for sweeps, e.g. `2..10`
        #[arg(long, value_parser = parse_range)]
        degrees: Option<RangeInclusive<usize>>,
        /// Fixed dual level for sweeps (default: the row's degree)
        #[arg(long)]
        dual_level: Option<usize>,
        #[command(flatten)]
        instance_args: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Solution JSON (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a bundled example instance
    Example {
        #[arg(value_parser = PossibleValuesParser::new(EXAMPLES))]
        name: String,
        /// Seed of the random capacities (maxflow)
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a solution against its instance
    Verify {
        instance: PathBuf,
        solution: PathBuf,
        #[arg(long, default_value_t = VERIFY_GRID)]
        grid: usize,
        #[arg(long, default_value_t = VERIFY_TOL)]
        tol: f64,
        #[command(flatten)]
        instance_args: InstanceArgs,
        /// Report JSON (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a solution trajectory on a uniform grid as CSV
    Sample {
        solution: PathBuf,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// CSV path (default: stdout)
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Export the conic program of one hierarchy level in SDPA sparse format
    ExportSdpa {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = RunMode::Primal)]
        mode: RunMode,
        #[arg(long)]
        degree: usize,
        #[command(flatten)]
        instance_args: InstanceArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Append the box |xᵢ(t)| ≤ GAMMA to the instance
    #[arg(long = "box", value_name = "GAMMA", allow_negative_numbers = true)]
    box_bound: Option<f64>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = SolverSettings::default().tol)]
    tol: f64,
    #[arg(long, default_value_t = SolverSettings::default().max_iter)]
    max_iter: u32,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum RunMode {
    Primal,
    Dual,
    Sweep,
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got '{s}'"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: usize = a
        .trim()
        .parse()
        .map_err(|e| format!("bad start '{a}': {e}"))?;
    let b: usize = b
        .trim()
        .parse()
        .map_err(|e| format!("bad end '{b}': {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..=b)
}

/// Clarabel is the only backend compiled in; anything else named by
/// `TVSDP_BACKEND` is rejected up front.
fn check_backend() -> CliResult<()> {
    match std::env::var("TVSDP_BACKEND") {
        Err(_) => Ok(()),
        Ok(v) if v.is_empty() || v.eq_ignore_ascii_case("clarabel") => Ok(()),
        Ok(v) => Err(format!("unknown backend '{v}' (compiled in: clarabel)").into()),
    }
}

fn load(path: &Path, args: &InstanceArgs) -> CliResult<TvSdp> {
    let inst = load_instance(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(match args.box_bound {
        Some(g) => inst.with_box(g)?,
        None => inst,
    })
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => {
            fs::write(p, format!("{text}\n")).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

fn exit_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::Unbounded | SolveStatus::Failed => EXIT_FAILED,
    }
}

fn run_level(
    inst: &TvSdp,
    mode: Mode,
    d: usize,
    settings: &SolverSettings,
) -> tvsdp::Result<HierarchySolution> {
    let backend = ClarabelBackend;
    match mode {
        Mode::Primal => solve_primal(inst, d, &backend, settings),
        Mode::Dual => solve_dual(inst, d, &backend, settings),
    }
}

fn describe(sol: &HierarchySolution) -> String {
    let value = sol
        .reported_objective()
        .map_or_else(String::new, |v| format!(", objective {v}"));
    format!(
        "{} degree {}: {}{value} ({})",
        sol.mode.as_str(),
        sol.degree,
        sol.status,
        sol.backend_status
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    path: &Path,
    mode: RunMode,
    degree: Option<usize>,
    degrees: Option<RangeInclusive<usize>>,
    dual_level: Option<usize>,
    instance_args: &InstanceArgs,
    settings: SolverSettings,
    out: Option<&Path>,
) -> CliResult<u8> {
    let inst = load(path, instance_args)?;
    let single = |m: Mode, d: Option<usize>| -> CliResult<u8> {
        let d = d.ok_or("--degree is required for primal and dual runs")?;
        let sol = match run_level(&inst, m, d, &settings) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("{} degree {d}: {e}", m.as_str());
                return Ok(EXIT_FAILED);
            }
        };
        eprintln!("{}", describe(&sol));
        emit(out, &solution_to_json(&sol)?)?;
        Ok(exit_code(sol.status))
    };
    match mode {
        RunMode::Primal => single(Mode::Primal, degree),
        RunMode::Dual => single(Mode::Dual, degree.or(dual_level)),
        RunMode::Sweep => {
            let range = degrees
                .or(degree.map(|d| d..=d))
                .ok_or("--degrees is required for sweeps")?;
            sweep(&inst, range.collect(), dual_level, settings, out)
        }
    }
}

fn solution_value(sol: &tvsdp::Result<HierarchySolution>) -> CliResult<Value> {
    Ok(match sol {
        Ok(s) => serde_json::from_str(&solution_to_json(s)?)?,
        Err(e) => json!({ "error": e.to_string() }),
    })
}

fn sweep(
    inst: &TvSdp,
    degrees: Vec<usize>,
    dual_level: Option<usize>,
    settings: SolverSettings,
    out: Option<&Path>,
) -> CliResult<u8> {
    let dual_levels: Vec<usize> = match dual_level {
        Some(l) => vec![l],
        None => degrees.clone(),
    };
    let jobs: Vec<(Mode, usize)> = degrees
        .iter()
        .map(|&d| (Mode::Primal, d))
        .chain(dual_levels.iter().map(|&l| (Mode::Dual, l)))
        .collect();
    let results: Vec<tvsdp::Result<HierarchySolution>> = jobs
        .par_iter()
        .map(|&(m, d)| run_level(inst, m, d, &settings))
        .collect();
    let (primal, dual) = results.split_at(degrees.len());
    let dual_for = |row: usize| {
        if dual_level.is_some() {
            &dual[0]
        } else {
            &dual[row]
        }
    };

    let mut code = 0;
    for r in &results {
        code = code.max(match r {
            Ok(s) => exit_code(s.status),
            Err(_) => EXIT_FAILED,
        });
    }

    let value =
        |r: &tvsdp::Result<HierarchySolution>| r.as_ref().ok().and_then(|s| s.reported_objective());
    let cell = |r: &tvsdp::Result<HierarchySolution>| match r {
        Ok(s) => s
            .reported_objective()
            .map_or_else(|| s.status.to_string(), |v| format!("{v:.8}")),
        Err(_) => "error".to_string(),
    };
    let mut records = Vec::new();
    let mut summary = Vec::new();
    let mut table = format!(
        "{:>6}  {:>14}  {:>14}  {:>12}\n",
        "degree", "primal", "dual", "gap"
    );
    for (row, &d) in degrees.iter().enumerate() {
        let (p, u) = (&primal[row], dual_for(row));
        let level = dual_level.unwrap_or(d);
        let gap = value(p).zip(value(u)).map(|(a, b)| (b - a).abs());
        records.push(json!({
            "degree": d,
            "primal": solution_value(p)?,
            "dual_level": level,
            "dual": solution_value(u)?,
        }));
        summary.push(json!({ "degree": d, "primal": value(p), "dual": value(u), "gap": gap }));
        let _ = writeln!(
            table,
            "{d:>6}  {:>14}  {:>14}  {:>12}",
            cell(p),
            cell(u),
            gap.map_or_else(|| "-".to_string(), |g| format!("{g:.3e}"))
        );
        for r in [p, u] {
            if let Err(e) = r {
                eprintln!("degree {d}: {e}");
            }
        }
    }
    eprint!("{table}");
    let doc = json!({
        "generator": GENERATOR,
        "mode": "sweep",
        "records": records,
        "summary": summary,
    });
    emit(out, &serde_json::to_string_pretty(&doc)?)?;
    Ok(code)
}

fn cmd_verify(
    instance: &Path,
    solution: &Path,
    grid: usize,
    tol: f64,
    instance_args: &InstanceArgs,
    out: Option<&Path>,
) -> CliResult<u8> {
    let inst = load(instance, instance_args)?;
    let sol = read_solution(solution)?;
    let rep = verify_solution(&inst, &sol, tol, grid)?;
    emit(out, &serde_json::to_string_pretty(&rep)?)?;
    eprintln!(
        "verification {} at tolerance {tol:e} on {grid} points",
        if rep.passed { "passed" } else { "FAILED" }
    );
    Ok(if rep.passed { 0 } else { EXIT_UNVERIFIED })
}

fn read_solution(path: &Path) -> CliResult<HierarchySolution> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(solution_from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn sample_csv(sol: &HierarchySolution, points: usize) -> CliResult<String> {
    if points < 2 {
        return Err("--points must be at least 2".into());
    }
    let x = sol
        .x
        .as_ref()
        .ok_or_else(|| format!("solution has no trajectory (status {})", sol.status))?;
    let mut csv = String::from("t");
    for i in 1..=x.len() {
        let _ = write!(csv, ",x_{i}");
    }
    csv.push('\n');
    for k in 0..points {
        let t = k as f64 / (points - 1) as f64;
        let _ = write!(csv, "{t:.16e}");
        for v in x.eval(t) {
            let _ = write!(csv, ",{v:.16e}");
        }
        csv.push('\n');
    }
    Ok(csv)
}

fn cmd_export(
    instance: &Path,
    mode: RunMode,
    degree: usize,
    instance_args: &InstanceArgs,
    out: Option<&Path>,
) -> CliResult<u8> {
    let inst = load(instance, instance_args)?;
    let prog = match mode {
        RunMode::Primal => build_primal(&inst, degree).0,
        RunMode::Dual => build_dual(&inst, degree).0,
        RunMode::Sweep => return Err("export-sdpa takes --mode primal or dual".into()),
    };
    let text = to_sdpa_string(&prog)?;
    emit(out, text.trim_end())?;
    Ok(0)
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Solve {
            instance,
            mode,
            degree,
            degrees,
            dual_level,
            instance_args,
            solver,
            out,
        } => {
            check_backend()?;
            let settings = SolverSettings {
                tol: solver.tol,
                max_iter: solver.max_iter,
                verbose: log::log_enabled!(log::Level::Debug),
            };
            cmd_solve(
                &instance,
                mode,
                degree,
                degrees,
                dual_level,
                &instance_args,
                settings,
                out.as_deref(),
            )
        }
        Command::Example { name, seed, out } => {
            let inst = example_by_name(&name, seed)?;
            emit(out.as_deref(), &inst.to_json_string()?)?;
            Ok(0)
        }
        Command::Verify {
            instance,
            solution,
            grid,
            tol,
            instance_args,
            out,
        } => cmd_verify(
            &instance,
            &solution,
            grid,
            tol,
            &instance_args,
            out.as_deref(),
        ),
        Command::Sample {
            solution,
            points,
            csv,
        } => {
            let sol = read_solution(&solution)?;
            let text = sample_csv(&sol, points)?;
            emit(csv.as_deref(), text.trim_end())?;
            Ok(0)
        }
        Command::ExportSdpa {
            instance,
            mode,
            degree,
            instance_args,
            out,
        } => cmd_export(&instance, mode, degree, &instance_args, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap's own usage errors would exit with 2, which means "infeasible" here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvsdp::polynomial::{Poly, PolyVec};

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..10").unwrap(), 2..=10);
        assert_eq!(parse_range("3..=3").unwrap(), 3..=3);
        assert!(parse_range("5..2").is_err());
        assert!(parse_range("5").is_err());
        assert!(parse_range("a..2").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(SolveStatus::Optimal), 0);
        assert_eq!(exit_code(SolveStatus::Inaccurate), 0);
        assert_eq!(exit_code(SolveStatus::Infeasible), 2);
        assert_eq!(exit_code(SolveStatus::Failed), 3);
    }

    #[test]
    fn csv_has_header_and_round_trip_digits() {
        let sol = HierarchySolution {
            mode: Mode::Primal,
            degree: 1,
            status: SolveStatus::Optimal,
            sense: Default::default(),
            x: Some(PolyVec(vec![
                Poly::new(vec![0.1, 1.0]),
                Poly::constant(-2.0),
            ])),
            objective: None,
            certificate: None,
            moments: None,
            iterations: 0,
            backend_status: String::new(),
        };
        let csv = sample_csv(&sol, 3).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2");
        assert_eq!(lines.len(), 4);
        let mid: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(mid, vec![0.5, 0.1 + 0.5, -2.0]);
        assert!(sample_csv(&sol, 1).is_err());
    }
}
