//! Command-line front end: `gen`, `eval`, `verify` and `slope`.
//!
//! Exit codes are 0 on success, 1 when a hard check fails and 2 for usage or
//! input errors. Logging goes to stderr and is controlled by `IHL_LOG`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{duality_refinement, summary_table, Harness, TheoremId, TheoremReport};
use crate::hopflax::Semigroup;
use crate::lipschitz::{RadiusSchedule, SlopeReport};
use crate::scenario_file::{self, Family, FamilyParams, ScenarioFile};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "ihl", version, about = "Intrinsic Hopf-Lax semigroup on sampled quotient maps")]
pub struct Cli {
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario file for a family, size and seed.
    Gen(GenArgs),
    /// Tabulate iQ_t f and iD± over the scenario's time grid as CSV.
    Eval(EvalArgs),
    /// Run the checks and write their reports as JSON.
    Verify(VerifyArgs),
    /// Intrinsic Lipschitz constants, as JSON or (for a `.csv` output) CSV.
    Slope(SlopeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// zero_graph, affine_graph, quadratic_graph, random_lipschitz_graph or finite_partition
    pub family: String,
    pub size: usize,
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub slope: f64,
    #[arg(long, default_value_t = 1.0)]
    pub coefficient: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lipschitz: f64,
    /// Mark the scenario so the named check must fail on it.
    #[arg(long)]
    pub fault: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated check ids, or `all`.
    #[arg(long, default_value = "all")]
    pub checks: String,
    /// Smallest time of the time-Lipschitz check; defaults to the smallest grid time.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Also run the duality check on 2x (and 4x) denser samples.
    #[arg(long, default_value_t = 1, value_parser = parse_refine)]
    pub refine: usize,
}

#[derive(Debug, Args)]
pub struct SlopeArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_refine(s: &str) -> std::result::Result<usize, String> {
    match s {
        "1" => Ok(1),
        "2" => Ok(2),
        "4" => Ok(4),
        _ => Err(format!("refine must be 1, 2 or 4, got `{s}`")),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("IHL_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    let outcome = match cli.threads {
        Some(0) => Err(Error::InvalidScenario("--threads must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Error::InvalidScenario(format!("cannot start thread pool: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(command: &Command) -> Result<u8> {
    match command {
        Command::Gen(a) => cmd_gen(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Slope(a) => cmd_slope(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidScenario(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::InvalidScenario(format!("cannot write to stdout: {e}")))
        }
    }
}

fn cmd_gen(a: &GenArgs) -> Result<u8> {
    let family: Family = a.family.parse()?;
    let params = FamilyParams { slope: a.slope, coefficient: a.coefficient, lipschitz: a.lipschitz };
    let mut file = scenario_file::generate(family, a.size, a.seed, params)?;
    if let Some(fault) = &a.fault {
        file.fault_injection = Some(fault.parse()?);
    }
    // building it validates everything a later command will read
    file.to_scenario()?;
    file.tgrid()?;
    emit(a.out.as_deref(), &file.to_json())?;
    log::info!("generated {}", file.scenario_id());
    Ok(EXIT_OK)
}

fn cmd_eval(a: &EvalArgs) -> Result<u8> {
    let file = ScenarioFile::read(&a.scenario)?;
    let grid = file.tgrid()?;
    let s = file.to_scenario()?;
    let table = Semigroup::new(&s).sweep(&grid, a.eps)?;
    emit(a.out.as_deref(), &table.to_csv())?;
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs) -> Result<u8> {
    let ids = TheoremId::parse_list(&a.checks)?;
    let file = ScenarioFile::read(&a.scenario)?;
    let grid = file.tgrid()?;
    let s = file.to_scenario()?;
    let harness = Harness::new(&s, &grid)?;
    let mut reports: Vec<TheoremReport> = Vec::with_capacity(ids.len() + 1);
    for &id in &ids {
        let report = match (id, a.delta) {
            (TheoremId::PTlip, Some(delta)) => {
                if !(delta.is_finite() && delta > 0.0) {
                    return Err(Error::InvalidTime(delta));
                }
                harness.check_time_lipschitz(delta)
            }
            _ => harness.check(id),
        };
        log::info!("{} {}: worst margin {}", s.id(), id, report.worst_margin);
        reports.push(report);
    }
    if a.refine > 1 && ids.contains(&TheoremId::TDuality) {
        let mut levels = vec![s.clone()];
        let mut factor = 2;
        while factor <= a.refine {
            levels.push(scenario_file::refine(&file, factor)?.to_scenario()?);
            factor *= 2;
        }
        let r = duality_refinement(&levels, &grid)?;
        let worst = r.min_margins.iter().copied().fold(f64::INFINITY, f64::min);
        reports.push(TheoremReport {
            theorem_id: TheoremId::TDuality,
            scenario_id: format!("{}/refine{}", s.id(), a.refine),
            passed: r.passed,
            hard: true,
            applicable: r.tested_points > 0,
            worst_margin: worst,
            tolerance: 0.0,
            cells_checked: r.tested_points * levels.len(),
            violations: usize::from(!r.passed),
            details: Vec::new(),
            extra: serde_json::to_value(&r).expect("refinement report serializes"),
        });
    }
    let mut json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    json.push('\n');
    emit(a.out.as_deref(), &json)?;
    let table = summary_table(&reports);
    if a.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    let failed = reports.iter().any(|r| r.hard && !r.passed);
    Ok(if failed { EXIT_VERIFY_FAILED } else { EXIT_OK })
}

fn cmd_slope(a: &SlopeArgs) -> Result<u8> {
    let file = ScenarioFile::read(&a.scenario)?;
    let s = file.to_scenario()?;
    let schedule = RadiusSchedule::default_for(s.quotient().sample().bounding_box());
    let report = SlopeReport::compute(&s, &schedule)?;
    let csv = a.out.as_deref().and_then(Path::extension).is_some_and(|e| e == "csv");
    let text = if csv {
        report.to_csv()
    } else {
        let mut json = serde_json::to_string_pretty(&report).expect("slope report serializes");
        json.push('\n');
        json
    };
    emit(a.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}
