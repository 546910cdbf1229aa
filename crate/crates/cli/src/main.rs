//! Command-line driver: single runs, convergence studies and case listing.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entro_ader::cases::{self, CASE_NAMES};
use entro_ader::convergence::convergence_study;
use entro_ader::io::RunConfig;
use entro_ader::solver::RelaxationMode;
use entro_ader::SolverError;

const CONFIG_HELP: &str = "\
Config file (TOML); every key except pde.case is optional:

  [pde]
  case = \"traveling_bump\"   # see list-cases
  final_time = 0.5           # default: the case's final time
  [mesh]
  nx = 32                    # default 32
  ny = 32                    # default: nx scaled by the domain aspect ratio
  # file = \"mesh.txt\"        # instead of nx/ny
  [scheme]
  degree = 2                 # 1, 2 or 3
  cfl = 0.4
  correction = true
  picard_tol = 1e-12
  # picard_max_iter = 4      # default: degree + 2
  max_retries = 8
  [relaxation]
  mode = \"conservative\"      # off | conservative | dissipative; default per case
  # newton_tol = 1e-13       # default: 1e-13 max(1, |entropy|)
  newton_max_iter = 50
  [output]
  dir = \"output\"
  vtk_every = 0              # 0: no periodic snapshots
  vtk_final = true
  # vtk_subdivisions = 2     # default: the degree
  reproducible = false

The ENTRO_ADER_THREADS variable sets the worker count.";

#[derive(Parser)]
#[command(name = "entro-ader", version, about = "Entropy-conserving ADER-DG solver", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write diag.csv, budget.csv, summary.txt and VTK files.
    Run(RunArgs),
    /// Run a mesh refinement study and print the error table.
    Convergence(ConvergenceArgs),
    /// List the built-in test cases.
    ListCases,
}

#[derive(Args)]
struct Common {
    /// Polynomial degree (1, 2 or 3).
    #[arg(long)]
    degree: Option<usize>,
    /// Final time.
    #[arg(long)]
    tf: Option<f64>,
    /// CFL number in (0, 1].
    #[arg(long)]
    cfl: Option<f64>,
    /// off, conservative or dissipative.
    #[arg(long)]
    relaxation: Option<String>,
    /// Disable the entropy correction.
    #[arg(long)]
    no_correction: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single worker thread.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; command-line options override its values.
    config: Option<PathBuf>,
    /// Test case, required without a config file.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    /// VTK snapshot every this many steps.
    #[arg(long)]
    vtk_every: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long)]
    case: String,
    /// Comma-separated nx values, coarse to fine.
    #[arg(long, value_delimiter = ',', required = true)]
    meshes: Vec<usize>,
    #[command(flatten)]
    common: Common,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn parse_mode(s: &str) -> Result<RelaxationMode, Failure> {
    match s {
        "off" => Ok(RelaxationMode::Off),
        "conservative" => Ok(RelaxationMode::Conservative),
        "dissipative" => Ok(RelaxationMode::Dissipative),
        other => Err(Failure::Config(format!(
            "--relaxation: expected off, conservative or dissipative, got '{other}'"
        ))),
    }
}

fn apply_common(cfg: &mut RunConfig, c: &Common) -> Result<(), Failure> {
    if let Some(d) = c.degree {
        cfg.scheme.degree = d;
    }
    if let Some(tf) = c.tf {
        cfg.pde.final_time = Some(tf);
    }
    if let Some(cfl) = c.cfl {
        cfg.scheme.cfl = cfl;
    }
    if let Some(m) = &c.relaxation {
        cfg.relaxation.mode = Some(parse_mode(m)?);
    }
    if c.no_correction {
        cfg.scheme.correction = false;
    }
    if let Some(out) = &c.out {
        cfg.output.dir = out.clone();
    }
    cfg.output.reproducible |= c.reproducible;
    Ok(())
}

fn configure_threads(reproducible: bool) -> Result<(), Failure> {
    let threads = if reproducible {
        Some(1)
    } else {
        match std::env::var("ENTRO_ADER_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| {
                Failure::Config(format!("ENTRO_ADER_THREADS: expected a positive integer, got '{v}'"))
            })?),
            Err(_) => None,
        }
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Run(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = match (&args.config, &args.case) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(case)) => RunConfig::for_case(case),
        (None, None) => return Err(Failure::Config("either a config file or --case is required".into())),
    };
    if let Some(case) = &args.case {
        cfg.pde.case = case.clone();
    }
    if args.nx.is_some() || args.ny.is_some() {
        cfg.mesh.file = None;
    }
    if let Some(nx) = args.nx {
        cfg.mesh.nx = Some(nx);
    }
    if let Some(ny) = args.ny {
        cfg.mesh.ny = Some(ny);
    }
    if let Some(k) = args.vtk_every {
        cfg.output.vtk_every = k;
    }
    apply_common(&mut cfg, &args.common)?;
    cfg.validate()?;
    configure_threads(cfg.output.reproducible)?;
    let report = entro_ader::run::execute(&cfg)?;
    print!("{}", report.summary());
    Ok(())
}

fn convergence(args: ConvergenceArgs) -> Result<(), Failure> {
    let mut cfg = RunConfig::for_case(&args.case);
    cfg.output.dir = PathBuf::from(".");
    apply_common(&mut cfg, &args.common)?;
    cfg.validate()?;
    if args.meshes.contains(&0) {
        return Err(Failure::Config("--meshes: values must be positive".into()));
    }
    configure_threads(cfg.output.reproducible)?;
    let case = cfg.case()?;
    let opts = cfg.scheme_options(cfg.relaxation_mode(&case))?;
    let table = convergence_study(&args.case, cfg.scheme.degree, &args.meshes, &opts, cfg.pde.final_time)?;
    print!("{}", table.to_text());
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("convergence_{}_p{}.csv", args.case, cfg.scheme.degree));
    std::fs::write(&path, table.to_csv()).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn list_cases() {
    println!("{:<24} {:<14} {:>10}  exact", "case", "system", "final_time");
    for name in CASE_NAMES {
        let c = cases::by_name(name, 1.0).expect("built-in case");
        let system = entro_ader::pde::PdeSystem::name(&c.pde);
        let exact = if c.exact.is_some() { "yes" } else { "no" };
        println!("{:<24} {:<14} {:>10}  {exact}", name, system, c.final_time);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Convergence(a) => convergence(a),
        Command::ListCases => {
            list_cases();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
