use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use stws::discretization::{kronecker_form, reference_convdiff, reference_diffusion, PdeSpec};
use stws::driver::{
    convergence_study, formulation_comparison, reduced_system, run, Formulation, RunOptions, SolveMode, StudyRecord,
    KRONECKER_CAP,
};
use stws::export::{to_file, write_matrix_market_file, write_solution, write_spectrum, write_study};
use stws::krylov::{spectrum, SPECTRUM_CAP};
use stws::DyadicGrid;

/// Spacetime wavelet solver for linear convection-diffusion problems.
#[derive(Parser)]
#[command(name = "stws", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one order pair over a range of levels.
    Run(RunArgs),
    /// Convergence rates over several order pairs.
    Study(StudyArgs),
    /// Sylvester against Kronecker solves from zero guesses.
    Compare(CompareArgs),
    /// Write the reduced A, B and K in Matrix Market format.
    ExportMatrices(MatrixArgs),
    /// Write the eigenvalues of the reduced A and B as CSV.
    Spectrum(MatrixArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Diffusion,
    Convdiff,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Recursive,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Sylvester,
    Kronecker,
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "diffusion")]
    problem: Problem,
    /// Override the viscosity of the reference problem.
    #[arg(long)]
    nu: Option<f64>,
}

impl ProblemArgs {
    fn pde(&self, default_nu: Option<f64>) -> PdeSpec {
        let pde = match self.problem {
            Problem::Diffusion => reference_diffusion(),
            Problem::Convdiff => reference_convdiff(),
        };
        match self.nu.or(default_nu) {
            Some(nu) => pde.with_viscosity(nu),
            None => pde,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Restart length is m-factor·(j + 1).
    #[arg(long, default_value_t = 30)]
    m_factor: usize,
    #[arg(long, default_value_t = 500)]
    max_restarts: usize,
    #[arg(long, value_enum, default_value = "recursive")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "sylvester")]
    formulation: FormulationArg,
    /// Largest n·s allowed for the Kronecker formulation.
    #[arg(long, default_value_t = KRONECKER_CAP)]
    kron_cap: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl SolverArgs {
    fn options(&self, j_start: usize) -> RunOptions {
        RunOptions {
            mode: match self.mode {
                ModeArg::Recursive => SolveMode::Recursive,
                ModeArg::Baseline => SolveMode::Baseline,
            },
            formulation: match self.formulation {
                FormulationArg::Sylvester => Formulation::Sylvester,
                FormulationArg::Kronecker => Formulation::Kronecker,
            },
            m_factor: self.m_factor,
            tol: self.tol,
            max_restarts: self.max_restarts,
            j_start,
            kron_cap: self.kron_cap,
            ..RunOptions::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    jmax: usize,
    /// First level solved (default 0 in recursive mode, jmax in baseline mode).
    #[arg(long)]
    jstart: Option<usize>,
    #[arg(long, default_value_t = 6)]
    px: usize,
    #[arg(long, default_value_t = 4)]
    pt: usize,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Order pairs such as "6,4;8,8".
    #[arg(long, default_value = "6,6;6,4;8,4;8,6;8,8")]
    orders: String,
    /// Levels such as "3,4,5".
    #[arg(long, default_value = "3,4,5")]
    levels: String,
    /// Coarsest level of the recursive chain.
    #[arg(long, default_value_t = 0)]
    jstart: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "6,4")]
    orders: String,
    #[arg(long, default_value = "1,2,3")]
    levels: String,
    /// Timed repetitions averaged per solve.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    j: usize,
    #[arg(long, default_value_t = 6)]
    px: usize,
    #[arg(long, default_value_t = 4)]
    pt: usize,
    #[arg(long, default_value_t = KRONECKER_CAP)]
    kron_cap: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad integer '{s}' in '{text}'")))
        .collect()
}

fn parse_orders(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| match parse_list(pair)?.as_slice() {
            [px, pt] => Ok((*px, *pt)),
            _ => bail!("order pair '{pair}' must look like 'px,pt'"),
        })
        .collect()
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |r| format!("{r:.2}"))
}

fn print_record(record: &StudyRecord) {
    println!(
        "{:>3} {:>3} {:>3} {:>9} {:>11} {:>11} {:>6} {:>8} {:>9} {:>10} {:>9}",
        "j", "px", "pt", "dof", "error_inf", "estimated", "rate", "iters", "restarts", "time[s]", "form"
    );
    for r in &record.rows {
        println!(
            "{:>3} {:>3} {:>3} {:>9} {:>11.3e} {:>11.3e} {:>6} {:>8} {:>9} {:>10.3} {:>9}",
            r.j,
            r.px,
            r.pt,
            r.dof,
            r.error_inf,
            r.estimated_error,
            fmt_opt(r.fitted_rate),
            r.inner_iterations,
            r.restarts,
            r.wall_time,
            r.formulation.to_string(),
        );
    }
}

fn finish(record: &StudyRecord, out: &Path) -> Result<ExitCode> {
    print_record(record);
    let path = out.join("study.csv");
    to_file(&path, |w| write_study(w, record))?;
    eprintln!("wrote {}", path.display());
    if record.all_converged() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("at least one solve did not converge");
        Ok(ExitCode::from(2))
    }
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let j_start = args.jstart.unwrap_or(match args.solver.mode {
        ModeArg::Recursive => 0,
        ModeArg::Baseline => args.jmax,
    });
    prepare(&args.solver.out)?;
    let pde = args.problem.pde(None);
    let grid = DyadicGrid::unit(j_start, args.px, args.pt)?;
    let (field, record) = run(&pde, &grid, args.jmax, &args.solver.options(j_start))?;
    let path = args.solver.out.join("solution.csv");
    to_file(&path, |w| write_solution(w, &grid.with_level(args.jmax), &field))?;
    eprintln!("wrote {}", path.display());
    finish(&record, &args.solver.out)
}

fn cmd_study(args: &StudyArgs) -> Result<ExitCode> {
    prepare(&args.solver.out)?;
    let orders = parse_orders(&args.orders)?;
    let levels = parse_list(&args.levels)?;
    let record = convergence_study(&args.problem.pde(None), &levels, &orders, &args.solver.options(args.jstart))?;
    for &(px, pt) in &orders {
        println!("rate ({px},{pt}): {:.2}", record.rate_for(px, pt)?);
    }
    finish(&record, &args.solver.out)
}

fn cmd_compare(args: &CompareArgs) -> Result<ExitCode> {
    prepare(&args.solver.out)?;
    let options = RunOptions {
        repeats: args.repeats,
        ..args.solver.options(0)
    };
    let record = formulation_comparison(
        &args.problem.pde(Some(0.1)),
        &parse_list(&args.levels)?,
        &parse_orders(&args.orders)?,
        &options,
    )?;
    finish(&record, &args.solver.out)
}

fn cmd_export(args: &MatrixArgs) -> Result<ExitCode> {
    prepare(&args.out)?;
    let grid = DyadicGrid::unit(args.j, args.px, args.pt)?;
    let red = reduced_system(&args.problem.pde(None), &grid)?;
    write_matrix_market_file(&args.out.join("A.mtx"), &red.a_hat)?;
    write_matrix_market_file(&args.out.join("B.mtx"), &red.b_hat)?;
    println!("A: {}x{} nnz {}", red.a_hat.nrows(), red.a_hat.ncols(), red.a_hat.nnz());
    println!("B: {}x{} nnz {}", red.b_hat.nrows(), red.b_hat.ncols(), red.b_hat.nnz());
    match kronecker_form(&red.a_hat, &red.b_hat, &red.c_hat, args.kron_cap) {
        Ok((k, _)) => {
            write_matrix_market_file(&args.out.join("K.mtx"), &k)?;
            println!("K: {}x{} nnz {}", k.nrows(), k.ncols(), k.nnz());
        }
        Err(e) => eprintln!("K not written: {e}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrum(args: &MatrixArgs) -> Result<ExitCode> {
    prepare(&args.out)?;
    let grid = DyadicGrid::unit(args.j, args.px, args.pt)?;
    let red = reduced_system(&args.problem.pde(None), &grid)?;
    for (name, m) in [("A", &red.a_hat), ("B", &red.b_hat)] {
        let eig = spectrum(m, SPECTRUM_CAP)?;
        let min_re = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let complex = eig.iter().filter(|z| z.im != 0.0).count();
        println!("{name}: {} eigenvalues, min real part {min_re:.4e}, {complex} complex", eig.len());
        let path = args.out.join(format!("spectrum_{name}.csv"));
        to_file(&path, |w| write_spectrum(w, &eig))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Study(a) => cmd_study(a),
        Command::Compare(a) => cmd_compare(a),
        Command::ExportMatrices(a) => cmd_export(a),
        Command::Spectrum(a) => cmd_spectrum(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
