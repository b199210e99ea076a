use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use coirlq::bench::{self, ExperimentConfig};
use coirlq::model::{Problem, ProblemSpec};
use coirlq::oracle::brute_force_lq;
use coirlq::solver::{solve, SolverConfig};
use coirlq::theory::{self, TheoryInputs};
use coirlq::{io, DenseMatrix, DenseVector, Error};

#[derive(Parser, Debug)]
#[command(name = "coirlq", version, about = "Cosparse recovery by reweighted lq-analysis minimization")]
struct Cli {
    /// Seed for generated data (overrides a config's base_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a problem instance into the --out directory.
    Gen(GenArgs),
    /// Run the reweighted solver on matrix/vector files.
    Solve(SolveArgs),
    /// Exhaustive global minimizer for tiny problems.
    Oracle(OracleArgs),
    /// Recovery-condition calculators.
    Theory {
        #[command(subcommand)]
        which: TheoryCommand,
    },
    /// Success-rate grid from a JSON config.
    Phase(PhaseArgs),
    /// Run a named experiment preset.
    Preset(PresetArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 120)]
    d: usize,
    #[arg(long, default_value_t = 144)]
    p: usize,
    #[arg(long)]
    l: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Signal norm; defaults to sqrt(d).
    #[arg(long)]
    signal_norm: Option<f64>,
}

#[derive(Args, Debug)]
struct ProblemFiles {
    #[arg(long = "A")]
    a: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    omega: PathBuf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    files: ProblemFiles,
    #[arg(long, default_value_t = 0.7)]
    q: f64,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long)]
    l: usize,
    #[arg(long, default_value_t = 0.5)]
    shrink: f64,
    #[arg(long, default_value_t = 1e-8)]
    tau: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    eps0: f64,
    /// Per-iteration CSV with columns k,F,eps,diff_inf.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    files: ProblemFiles,
    #[arg(long, default_value_t = 0.7)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_bound: f64,
    #[arg(long, default_value_t = 1)]
    l_min: usize,
}

#[derive(Subcommand, Debug)]
enum TheoryCommand {
    /// Error-bound constants C1, C2.
    Constants {
        #[arg(long)]
        delta_rho_s: f64,
        #[arg(long)]
        delta_rho1_s: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 1)]
        s: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma_min: f64,
    },
    /// Bound on delta_{(rho+1)S} that suffices for recovery.
    Threshold {
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        rho: f64,
    },
    /// Sparsity level for q < 1 from the q = 1 level.
    Sq {
        #[arg(long)]
        s1: u64,
        #[arg(long)]
        rho1: f64,
        #[arg(long)]
        q: f64,
    },
    /// Distance bound between the solver output and the true signal.
    Bound {
        #[arg(long)]
        delta: f64,
        /// Starting objective F(x0, eps0).
        #[arg(long)]
        f0: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Smallest grid q whose threshold exceeds delta.
    FeasibleQ {
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
    },
}

#[derive(Args, Debug)]
struct PhaseArgs {
    /// JSON file with ExperimentConfig fields.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args, Debug)]
struct PresetArgs {
    name: String,
    #[arg(long)]
    trials: Option<usize>,
    /// Restrict the measurement sweep.
    #[arg(long, value_delimiter = ',')]
    m_values: Option<Vec<usize>>,
    /// Restrict the cosparsity sweep.
    #[arg(long, value_delimiter = ',')]
    l_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    q_values: Option<Vec<f64>>,
    /// Print the resolved config instead of running it.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Gen(args) => cmd_gen(&cli, args),
        Command::Solve(args) => cmd_solve(&cli, args),
        Command::Oracle(args) => cmd_oracle(&cli, args),
        Command::Theory { which } => cmd_theory(&cli, which),
        Command::Phase(args) => {
            let path = &args.config;
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut config: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            if let Some(t) = args.trials {
                config.trials = t;
            }
            run_experiment(&cli, config)
        }
        Command::Preset(args) => {
            let mut config = bench::preset(&args.name).map_err(|e| CliError::Usage(e.to_string()))?;
            if let Some(t) = args.trials {
                config.trials = t;
            }
            if let Some(v) = &args.m_values {
                config.m_values = v.clone();
            }
            if let Some(v) = &args.l_values {
                config.l_values = v.clone();
            }
            if let Some(v) = &args.q_values {
                config.q_values = v.clone();
            }
            if args.dump_config {
                return emit(&cli, &(serde_json::to_string_pretty(&config).map_err(Error::from)? + "\n"));
            }
            run_experiment(&cli, config)
        }
    }
}

/// Writes `text` to `--out` or stdout.
fn emit(cli: &Cli, text: &str) -> CliResult {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value).map_err(Error::from)? + "\n")
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> CliResult {
    let dir = cli
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("gen needs --out <dir>".into()))?;
    let spec = ProblemSpec {
        m: args.m,
        d: args.d,
        p: args.p,
        l: args.l,
        sigma: args.sigma,
        signal_norm: args.signal_norm.unwrap_or((args.d as f64).sqrt()),
    };
    let problem = Problem::generate(&spec, cli.seed.unwrap_or(0))?;
    problem.save(dir)?;
    log::info!("wrote problem to {}", dir.display());
    Ok(())
}

fn load_files(files: &ProblemFiles) -> CliResult<(DenseMatrix, DenseVector, DenseMatrix)> {
    Ok((
        io::read_matrix(&files.a)?,
        io::read_vector(&files.y)?,
        io::read_matrix(&files.omega)?,
    ))
}

fn write_trace(path: &Path, trace: &[coirlq::solver::TraceEntry]) -> CliResult {
    let mut text = String::from("k,F,eps,diff_inf\n");
    for t in trace {
        text.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            t.k, t.objective, t.eps, t.diff_inf
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn cmd_solve(cli: &Cli, args: &SolveArgs) -> CliResult {
    let (a, y, omega) = load_files(&args.files)?;
    let config = SolverConfig {
        q: args.q,
        lambda: args.lambda,
        l: args.l,
        shrink: args.shrink,
        tau: args.tau,
        max_iter: args.max_iter,
        eps0: args.eps0,
        ..SolverConfig::default()
    };
    let result = solve(&a, &y, &omega, &config)?;
    if let Some(path) = &args.trace {
        write_trace(path, &result.trace)?;
    }
    if !result.converged {
        log::warn!("stopped at max_iter = {} without convergence", config.max_iter);
    }
    if cli.json {
        let summary = json!({
            "x_hat": result.x_hat.as_slice(),
            "iterations": result.iterations,
            "converged": result.converged,
            "objective": result.final_objective(),
        });
        emit(cli, &to_json(&summary)?)
    } else {
        emit(cli, &io::format_vector(&result.x_hat))
    }
}

fn cmd_oracle(cli: &Cli, args: &OracleArgs) -> CliResult {
    let (a, y, omega) = load_files(&args.files)?;
    let r = brute_force_lq(&a, &y, &omega, args.q, args.noise_bound, args.l_min)?;
    let summary = json!({
        "x_star": r.x_star,
        "objective": if r.objective.is_finite() { json!(r.objective) } else { json!(null) },
        "cosupport": r.cosupport,
        "residual": if r.residual.is_finite() { json!(r.residual) } else { json!(null) },
        "feasible": r.feasible,
    });
    emit(cli, &to_json(&summary)?)
}

fn cmd_theory(cli: &Cli, which: &TheoryCommand) -> CliResult {
    let value = match *which {
        TheoryCommand::Constants {
            delta_rho_s,
            delta_rho1_s,
            kappa,
            rho,
            q,
            s,
            sigma_min,
        } => {
            let inputs = TheoryInputs {
                delta_rho_s,
                delta_rho1_s,
                kappa,
                block_ratio: rho,
                q,
                s,
                sigma_min,
            };
            let c = theory::theorem1_constants(&inputs)?;
            json!({ "c1": c.c1, "c2": c.c2, "condition_holds": theory::check_condition(&inputs)? })
        }
        TheoryCommand::Threshold { kappa, q, rho } => {
            json!({ "threshold": theory::strong_threshold(kappa, q, rho)? })
        }
        TheoryCommand::Sq { s1, rho1, q } => {
            let lvl = theory::sq_from_s1(s1, rho1, q)?;
            json!({
                "s_q": lvl.s_q,
                "rho_q": lvl.rho_q(),
                "rho_q_num": lvl.rho_num,
                "rho_q_den": lvl.rho_den,
                "block": lvl.block,
            })
        }
        TheoryCommand::Bound { delta, f0, noise } => {
            json!({ "bound": theory::theorem3_bound(delta, f0, noise)? })
        }
        TheoryCommand::FeasibleQ { delta, kappa } => {
            match theory::min_feasible_q(delta, kappa, &theory::default_q_grid(), &theory::default_rho_grid())? {
                Some(f) => json!({ "q": f.q, "rho": f.rho, "threshold": f.threshold }),
                None => json!({ "q": null, "rho": null, "threshold": null }),
            }
        }
    };
    emit(cli, &to_json(&value)?)
}

fn run_experiment(cli: &Cli, mut config: ExperimentConfig) -> CliResult {
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let runs = bench::phase_grid_detailed(&config)?;
    if cli.json {
        emit(cli, &to_json(&runs)?)
    } else {
        let cells: Vec<_> = runs.iter().map(|r| r.result).collect();
        for r in &runs {
            if config.lambda_grid.len() > 1 {
                eprintln!(
                    "q={} m={} l={}: lambda={:e}",
                    r.result.q, r.result.m, r.result.l, r.lambda
                );
            }
        }
        emit(cli, &bench::format_csv(&cells)?)
    }
}
