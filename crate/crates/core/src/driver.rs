//! Level solves, the recursive multilevel solve and the convergence and
//! formulation studies built on them.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::boundary::{build_dirichlet_data, build_permutations, reduce, ReducedSystem};
use crate::derivative::{assemble_derivative, Direction};
use crate::discretization::{assemble, kronecker_form, kronecker_nnz, unvec_col, vec_col, PdeSpec};
use crate::error::{check_shape, Error, Result};
use crate::grid::DyadicGrid;
use crate::krylov::{gl_gmres, gmres_restarted, SolveReport, SolverConfig, DEFAULT_M_FACTOR, DEFAULT_MAX_RESTARTS, DEFAULT_TOL};
use crate::mra::{error_estimate, prolong};
use crate::FieldMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    /// Each level seeded with the prolonged solution of the level below.
    Recursive,
    /// Each level solved from a zero guess.
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Sylvester,
    Kronecker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Converged,
    NotConverged,
    /// Kronecker system above the size cap; no solve was attempted.
    Skipped,
}

macro_rules! text_enum {
    ($ty:ty, $($variant:ident => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::Config(format!("unknown {} '{other}'", stringify!($ty)))),
                }
            }
        }
    };
}

text_enum!(SolveMode, Recursive => "recursive", Baseline => "baseline");
text_enum!(Formulation, Sylvester => "sylvester", Kronecker => "kronecker");

/// Default cap on `n·s` for the vectorized formulation.
pub const KRONECKER_CAP: usize = 500_000;

/// One CSV row of a study. The leading columns are the study record proper;
/// the rest are diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub j: usize,
    pub px: usize,
    pub pt: usize,
    pub dof: usize,
    /// Max error against the exact solution on the level-`j` nodes.
    pub error_inf: f64,
    /// Max error of the prolonged solution on the level-`j + 1` nodes.
    pub estimated_error: f64,
    /// Least-squares rate of `estimated_error` over this row and the earlier
    /// rows of the same run.
    pub fitted_rate: Option<f64>,
    pub inner_iterations: usize,
    pub restarts: usize,
    pub wall_time: f64,
    pub mode: SolveMode,
    pub formulation: Formulation,
    pub status: RowStatus,
    pub final_residual: f64,
    pub cumulative_iterations: usize,
    pub cumulative_wall_time: f64,
    pub matvec_count: usize,
    pub flops: u64,
    pub nnz_a: usize,
    pub nnz_b: usize,
    pub nnz_k: usize,
    pub dx_error: f64,
    pub dxx_error: f64,
    pub dt_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StudyRecord {
    pub rows: Vec<StudyRow>,
}

impl StudyRecord {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.status != RowStatus::NotConverged)
    }

    pub fn last(&self) -> Option<&StudyRow> {
        self.rows.last()
    }

    /// Rate fitted over every row matching the order pair.
    pub fn rate_for(&self, px: usize, pt: usize) -> Result<f64> {
        let (errors, levels): (Vec<f64>, Vec<usize>) = self
            .rows
            .iter()
            .filter(|r| r.px == px && r.pt == pt)
            .map(|r| (r.estimated_error, r.j))
            .unzip();
        rate(&errors, &levels)
    }
}

/// Least-squares slope of `log2(error)` against `−j`.
pub fn rate(errors: &[f64], levels: &[usize]) -> Result<f64> {
    if errors.len() != levels.len() {
        return Err(Error::ShapeMismatch {
            context: "rate fit",
            expected: (levels.len(), 1),
            got: (errors.len(), 1),
        });
    }
    if let Some(&bad) = errors.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::NonPositiveError(bad));
    }
    let n = errors.len() as f64;
    let xs: Vec<f64> = levels.iter().map(|&j| -(j as f64)).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.log2()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if errors.len() < 2 || sxx == 0.0 {
        return Err(Error::TooFewLevels);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Outcome of one level solve.
#[derive(Debug, Clone)]
pub struct LevelSolve {
    pub grid: DyadicGrid,
    pub field: FieldMatrix,
    pub report: SolveReport,
    pub formulation: Formulation,
    pub nnz_a: usize,
    pub nnz_b: usize,
    pub nnz_k: usize,
}

/// Assembles and reduces the system for `pde` on `grid`.
pub fn reduced_system(pde: &PdeSpec, grid: &DyadicGrid) -> Result<ReducedSystem> {
    let system = assemble(pde, grid)?;
    let (px, pt) = build_permutations(grid)?;
    let xd = build_dirichlet_data(pde, grid);
    reduce(&system, &px, &pt, &xd)
}

/// Solves one level with either formulation. `x0` is a full-field guess
/// (zeros when absent); its boundary and initial entries are ignored.
pub fn solve_level_as(
    pde: &PdeSpec,
    grid: &DyadicGrid,
    x0: Option<ArrayView2<f64>>,
    config: &SolverConfig,
    formulation: Formulation,
    kron_cap: usize,
) -> Result<LevelSolve> {
    let red = reduced_system(pde, grid)?;
    let x_hat0 = match x0 {
        Some(x0) => {
            check_shape("initial guess", grid.shape(), x0.dim())?;
            red.restrict_field((&x0 - &red.xd).view())?
        }
        None => Array2::zeros((red.n(), red.s())),
    };
    let nnz_k = kronecker_nnz(&red.a_hat, &red.b_hat);
    let (x_hat, report) = match formulation {
        Formulation::Sylvester => gl_gmres(&red.a_hat, &red.b_hat, &red.c_hat, x_hat0, config)?,
        Formulation::Kronecker => {
            let (k, r) = kronecker_form(&red.a_hat, &red.b_hat, &red.c_hat, kron_cap)?;
            let (x, report) = gmres_restarted(&k, &r, vec_col(&x_hat0), config)?;
            (unvec_col(&x, red.n(), red.s()), report)
        }
    };
    Ok(LevelSolve {
        grid: *grid,
        field: red.reconstruct(x_hat.view())?,
        report,
        formulation,
        nnz_a: red.a_hat.nnz(),
        nnz_b: red.b_hat.nnz(),
        nnz_k,
    })
}

/// Sylvester-form level solve.
pub fn solve_level(
    pde: &PdeSpec,
    grid: &DyadicGrid,
    x0: Option<ArrayView2<f64>>,
    config: &SolverConfig,
) -> Result<(FieldMatrix, SolveReport)> {
    let out = solve_level_as(pde, grid, x0, config, Formulation::Sylvester, usize::MAX)?;
    Ok((out.field, out.report))
}

fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// Max-norm errors of `Γ_x¹F`, `Γ_x²F` and `F·Γ_tᵀ` against the exact
/// derivatives on the solve grid.
pub fn derivative_errors(pde: &PdeSpec, grid: &DyadicGrid, field: &FieldMatrix) -> Result<(f64, f64, f64)> {
    let s = pde.solution;
    let dx = assemble_derivative(grid, Direction::Space, 1)?.matrix.mul_dense(field.view())?;
    let dxx = assemble_derivative(grid, Direction::Space, 2)?.matrix.mul_dense(field.view())?;
    let dt = assemble_derivative(grid, Direction::Time, 1)?.matrix.transpose().dense_mul(field.view())?;
    Ok((
        max_diff(&dx, &grid.sample(|x, t| s.dx(x, t))),
        max_diff(&dxx, &grid.sample(|x, t| s.dxx(x, t))),
        max_diff(&dt, &grid.sample(|x, t| s.dt(x, t))),
    ))
}

fn study_row(pde: &PdeSpec, level: &LevelSolve, mode: SolveMode) -> Result<StudyRow> {
    let grid = &level.grid;
    let exact = grid.sample(|x, t| pde.exact(x, t));
    let (dx_error, dxx_error, dt_error) = derivative_errors(pde, grid, &level.field)?;
    let report = &level.report;
    Ok(StudyRow {
        j: grid.level(),
        px: grid.px(),
        pt: grid.pt(),
        dof: grid.dof(),
        error_inf: max_diff(&level.field, &exact),
        estimated_error: error_estimate(level.field.view(), |x, t| pde.exact(x, t), grid)?,
        fitted_rate: None,
        inner_iterations: report.inner_iterations,
        restarts: report.restarts,
        wall_time: report.wall_time,
        mode,
        formulation: level.formulation,
        status: if report.converged { RowStatus::Converged } else { RowStatus::NotConverged },
        final_residual: report.final_residual(),
        cumulative_iterations: report.inner_iterations,
        cumulative_wall_time: report.wall_time,
        matvec_count: report.matvec_count,
        flops: report.flops,
        nnz_a: level.nnz_a,
        nnz_b: level.nnz_b,
        nnz_k: level.nnz_k,
        dx_error,
        dxx_error,
        dt_error,
    })
}

/// Fills running rates and cumulative counters for rows of one run.
fn finish_run(rows: &mut [StudyRow]) {
    let (mut iterations, mut time) = (0, 0.0);
    for row in rows.iter_mut() {
        iterations += row.inner_iterations;
        time += row.wall_time;
        row.cumulative_iterations = iterations;
        row.cumulative_wall_time = time;
    }
    fill_rates(rows);
}

/// Settings shared by runs and studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub mode: SolveMode,
    pub formulation: Formulation,
    /// Restart length is `m_factor·(j + 1)`.
    pub m_factor: usize,
    pub tol: f64,
    pub max_restarts: usize,
    /// Coarsest level of a recursive chain.
    pub j_start: usize,
    pub kron_cap: usize,
    /// Timed repetitions averaged by the formulation comparison.
    pub repeats: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: SolveMode::Recursive,
            formulation: Formulation::Sylvester,
            m_factor: DEFAULT_M_FACTOR,
            tol: DEFAULT_TOL,
            max_restarts: DEFAULT_MAX_RESTARTS,
            j_start: 0,
            kron_cap: KRONECKER_CAP,
            repeats: 5,
        }
    }
}

impl RunOptions {
    pub fn config(&self, level: usize) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_restarts: self.max_restarts,
            ..SolverConfig::for_level(level, self.m_factor)
        }
    }
}

/// Solves `levels` in order. In recursive mode a level directly above the
/// previous one starts from the prolonged previous solution.
fn solve_chain(
    pde: &PdeSpec,
    base: &DyadicGrid,
    levels: &[usize],
    options: &RunOptions,
    config_fn: &dyn Fn(usize) -> SolverConfig,
) -> Result<(FieldMatrix, StudyRecord)> {
    let mut rows = Vec::with_capacity(levels.len());
    let mut previous: Option<(usize, FieldMatrix)> = None;
    for &j in levels {
        let grid = base.with_level(j);
        let guess = match (&previous, options.mode) {
            (Some((pj, field)), SolveMode::Recursive) if pj + 1 == j => Some(prolong(field.view(), &base.with_level(*pj))?),
            _ => None,
        };
        let solve = solve_level_as(pde, &grid, guess.as_ref().map(|g| g.view()), &config_fn(j), options.formulation, options.kron_cap)?;
        rows.push(study_row(pde, &solve, options.mode)?);
        previous = Some((j, solve.field));
    }
    finish_run(&mut rows);
    let field = previous.map(|(_, f)| f).ok_or(Error::TooFewLevels)?;
    Ok((field, StudyRecord { rows }))
}

/// Multilevel solve from `j_start` to `j_max`, each level seeded by the
/// prolonged solution of the level below.
pub fn solve_recursive(
    pde: &PdeSpec,
    grid: &DyadicGrid,
    j_start: usize,
    j_max: usize,
    config_fn: impl Fn(usize) -> SolverConfig,
) -> Result<(FieldMatrix, StudyRecord)> {
    if j_start > j_max {
        return Err(Error::LevelRange { start: j_start, end: j_max });
    }
    let levels: Vec<usize> = (j_start..=j_max).collect();
    let options = RunOptions { mode: SolveMode::Recursive, ..RunOptions::default() };
    solve_chain(pde, grid, &levels, &options, &config_fn)
}

/// Runs levels `options.j_start..=j_max` on the order pair of `grid`.
pub fn run(pde: &PdeSpec, grid: &DyadicGrid, j_max: usize, options: &RunOptions) -> Result<(FieldMatrix, StudyRecord)> {
    if options.j_start > j_max {
        return Err(Error::LevelRange { start: options.j_start, end: j_max });
    }
    let levels: Vec<usize> = (options.j_start..=j_max).collect();
    solve_chain(pde, grid, &levels, options, &|j| options.config(j))
}

fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::TooFewLevels);
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("levels must be strictly ascending, got {levels:?}")));
    }
    Ok(())
}

/// Convergence rates over `levels` for each order pair. Recursive runs start
/// at `min(options.j_start, levels[0])` and only the requested levels are
/// reported.
pub fn convergence_study(
    pde: &PdeSpec,
    levels: &[usize],
    orders: &[(usize, usize)],
    options: &RunOptions,
) -> Result<StudyRecord> {
    check_levels(levels)?;
    let mut record = StudyRecord::default();
    for &(px, pt) in orders {
        let base = DyadicGrid::unit(levels[0], px, pt)?;
        let chain: Vec<usize> = match options.mode {
            SolveMode::Recursive => (options.j_start.min(levels[0])..=levels[levels.len() - 1]).collect(),
            SolveMode::Baseline => levels.to_vec(),
        };
        let (_, run) = solve_chain(pde, &base, &chain, options, &|j| options.config(j))?;
        let mut rows: Vec<StudyRow> = run.rows.into_iter().filter(|r| levels.contains(&r.j)).collect();
        fill_rates(&mut rows);
        record.rows.extend(rows);
    }
    Ok(record)
}

fn fill_rates(rows: &mut [StudyRow]) {
    for i in 0..rows.len() {
        let errors: Vec<f64> = rows[..=i].iter().map(|r| r.estimated_error).collect();
        let levels: Vec<usize> = rows[..=i].iter().map(|r| r.j).collect();
        rows[i].fitted_rate = rate(&errors, &levels).ok();
    }
}

/// Sylvester against Kronecker solves from zero guesses with identical
/// settings. Wall times are averaged over `options.repeats` runs.
pub fn formulation_comparison(
    pde: &PdeSpec,
    levels: &[usize],
    orders: &[(usize, usize)],
    options: &RunOptions,
) -> Result<StudyRecord> {
    let mut record = StudyRecord::default();
    let repeats = options.repeats.max(1);
    for &(px, pt) in orders {
        for &j in levels {
            let grid = DyadicGrid::unit(j, px, pt)?;
            for formulation in [Formulation::Sylvester, Formulation::Kronecker] {
                if formulation == Formulation::Kronecker && grid.dof() > options.kron_cap {
                    record.rows.push(skipped_row(pde, &grid)?);
                    continue;
                }
                let mut solve = solve_level_as(pde, &grid, None, &options.config(j), formulation, options.kron_cap)?;
                let mut total = solve.report.wall_time;
                for _ in 1..repeats {
                    total += solve_level_as(pde, &grid, None, &options.config(j), formulation, options.kron_cap)?.report.wall_time;
                }
                solve.report.wall_time = total / repeats as f64;
                record.rows.push(study_row(pde, &solve, SolveMode::Baseline)?);
            }
        }
    }
    Ok(record)
}

fn skipped_row(pde: &PdeSpec, grid: &DyadicGrid) -> Result<StudyRow> {
    let red = reduced_system(pde, grid)?;
    Ok(StudyRow {
        j: grid.level(),
        px: grid.px(),
        pt: grid.pt(),
        dof: grid.dof(),
        error_inf: f64::NAN,
        estimated_error: f64::NAN,
        fitted_rate: None,
        inner_iterations: 0,
        restarts: 0,
        wall_time: 0.0,
        mode: SolveMode::Baseline,
        formulation: Formulation::Kronecker,
        status: RowStatus::Skipped,
        final_residual: f64::NAN,
        cumulative_iterations: 0,
        cumulative_wall_time: 0.0,
        matvec_count: 0,
        flops: 0,
        nnz_a: red.a_hat.nnz(),
        nnz_b: red.b_hat.nnz(),
        nnz_k: kronecker_nnz(&red.a_hat, &red.b_hat),
        dx_error: f64::NAN,
        dxx_error: f64::NAN,
        dt_error: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{reference_convdiff, reference_diffusion};

    #[test]
    fn rate_examples() {
        let errors = [1.0, 1.0 / 16.0, 1.0 / 256.0];
        assert!((rate(&errors, &[1, 2, 3]).unwrap() - 4.0).abs() < 1e-12);
        assert!((rate(&[0.5, 0.5 / 8.0], &[3, 4]).unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(rate(&[1.0, 0.0], &[1, 2]), Err(Error::NonPositiveError(_))));
        assert!(matches!(rate(&[1.0], &[1]), Err(Error::TooFewLevels)));
        assert!(rate(&[1.0, 2.0], &[1]).is_err());
    }

    #[test]
    fn text_enums_roundtrip() {
        for mode in [SolveMode::Recursive, SolveMode::Baseline] {
            assert_eq!(mode.to_string().parse::<SolveMode>().unwrap(), mode);
        }
        assert_eq!("kronecker".parse::<Formulation>().unwrap(), Formulation::Kronecker);
        assert!("dense".parse::<Formulation>().is_err());
    }

    #[test]
    fn exact_guess_takes_no_cycles() {
        let grid = DyadicGrid::unit(1, 6, 4).unwrap();
        let pde = reference_convdiff();
        let red = reduced_system(&pde, &grid).unwrap();
        // the discrete solution itself, not the continuous one
        let (field, _) = solve_level(&pde, &grid, None, &SolverConfig::for_level(1, 30)).unwrap();
        let (_, report) = solve_level(&pde, &grid, Some(field.view()), &SolverConfig::for_level(1, 30)).unwrap();
        assert_eq!(report.restarts, 0);
        assert_eq!(field.dim(), (red.n() + 2, red.s() + 1));
    }

    #[test]
    fn single_level_recursion_is_baseline() {
        let grid = DyadicGrid::unit(1, 6, 4).unwrap();
        let pde = reference_diffusion();
        let cfg = |j| SolverConfig::for_level(j, 30);
        let (a, rec) = solve_recursive(&pde, &grid, 1, 1, cfg).unwrap();
        let (b, report) = solve_level(&pde, &grid, None, &cfg(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(rec.rows[0].inner_iterations, report.inner_iterations);
        assert!(solve_recursive(&pde, &grid, 2, 1, cfg).is_err());
    }

    #[test]
    fn guess_shape_checked() {
        let grid = DyadicGrid::unit(0, 6, 4).unwrap();
        let bad = Array2::zeros((3, 3));
        assert!(solve_level(&reference_diffusion(), &grid, Some(bad.view()), &SolverConfig::default()).is_err());
    }

    #[test]
    fn study_levels_validated() {
        let pde = reference_diffusion();
        let opts = RunOptions::default();
        assert!(convergence_study(&pde, &[2], &[(6, 4)], &opts).is_err());
        assert!(convergence_study(&pde, &[2, 1], &[(6, 4)], &opts).is_err());
    }

    #[test]
    fn skipped_kronecker_rows() {
        let pde = reference_diffusion().with_viscosity(0.1);
        let opts = RunOptions { kron_cap: 10, repeats: 1, ..RunOptions::default() };
        let rec = formulation_comparison(&pde, &[0], &[(6, 4)], &opts).unwrap();
        assert_eq!(rec.rows.len(), 2);
        assert_eq!(rec.rows[1].status, RowStatus::Skipped);
        assert!(rec.all_converged());
    }
}
