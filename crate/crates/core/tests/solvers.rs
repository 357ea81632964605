use ndarray::Array2;

use stws::discretization::{reference_convdiff, reference_diffusion};
use stws::driver::{convergence_study, reduced_system, solve_level, solve_level_as, Formulation, RunOptions, SolveMode};
use stws::krylov::{gl_gmres, SolverConfig};
use stws::DyadicGrid;

#[test]
fn formulations_agree_on_small_levels() {
    for pde in [reference_diffusion().with_viscosity(0.1), reference_convdiff()] {
        let grid = DyadicGrid::unit(1, 6, 4).unwrap();
        let cfg = SolverConfig::for_level(1, 30);
        let syl = solve_level_as(&pde, &grid, None, &cfg, Formulation::Sylvester, usize::MAX).unwrap();
        let kro = solve_level_as(&pde, &grid, None, &cfg, Formulation::Kronecker, usize::MAX).unwrap();
        assert!(syl.report.converged && kro.report.converged);
        let diff = (&syl.field - &kro.field).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-6, "{}: {diff:e}", pde.name());
        assert_eq!(syl.nnz_k, kro.nnz_k);
    }
}

#[test]
fn solves_are_deterministic() {
    let pde = reference_convdiff();
    let grid = DyadicGrid::unit(1, 6, 4).unwrap();
    let cfg = SolverConfig::for_level(1, 30);
    let (a, ra) = solve_level(&pde, &grid, None, &cfg).unwrap();
    let (b, rb) = solve_level(&pde, &grid, None, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.residual_history, rb.residual_history);
    assert_eq!(ra.inner_iterations, rb.inner_iterations);
}

#[test]
fn short_restarts_decrease_residual_monotonically() {
    let red = reduced_system(&reference_diffusion(), &DyadicGrid::unit(1, 6, 4).unwrap()).unwrap();
    let cfg = SolverConfig { restart: 5, max_restarts: 40, ..SolverConfig::default() };
    let (_, report) = gl_gmres(&red.a_hat, &red.b_hat, &red.c_hat, Array2::zeros(red.c_hat.dim()), &cfg).unwrap();
    assert_eq!(report.residual_history.len(), report.restarts + 1);
    for w in report.residual_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
    }
}

#[test]
fn boundary_values_are_copied_exactly() {
    let pde = reference_convdiff();
    let grid = DyadicGrid::unit(1, 8, 8).unwrap();
    let red = reduced_system(&pde, &grid).unwrap();
    let (field, _) = solve_level(&pde, &grid, None, &SolverConfig::for_level(1, 30)).unwrap();
    let (nx, nt) = grid.shape();
    for k in 0..nt {
        assert_eq!(field[[0, k]], red.xd[[0, k]]);
        assert_eq!(field[[nx - 1, k]], red.xd[[nx - 1, k]]);
    }
    for i in 0..nx {
        assert_eq!(field[[i, 0]], red.xd[[i, 0]]);
    }
}

#[test]
fn recursive_and_baseline_studies_agree() {
    let pde = reference_diffusion();
    let levels = [1, 2];
    let rec = convergence_study(&pde, &levels, &[(6, 4)], &RunOptions::default()).unwrap();
    let base = convergence_study(&pde, &levels, &[(6, 4)], &RunOptions { mode: SolveMode::Baseline, ..RunOptions::default() }).unwrap();
    assert_eq!(rec.rows.len(), 2);
    for (r, b) in rec.rows.iter().zip(&base.rows) {
        assert_eq!(r.j, b.j);
        assert!((r.error_inf - b.error_inf).abs() < 1e-7);
    }
    assert!(rec.rows[1].fitted_rate.is_some());
    assert!(rec.rows[1].cumulative_iterations > rec.rows[1].inner_iterations);
}
