//! Restarted Global GMRES for `A·X + X·B = C` and restarted vector GMRES for
//! `K·x = r`, plus small dense diagnostics.
//!
//! Both solvers share one implementation generic over the array dimension:
//! Global GMRES is GMRES in the space of matrices with the Frobenius inner
//! product, which is exactly vector GMRES applied to `vec(X)`.

use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::{Array, Array1, Array2, ArrayView2, Dimension, Zip};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_shape, Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Stop once the true residual Frobenius norm drops below this.
    pub tol: f64,
    /// Krylov basis size per cycle.
    pub restart: usize,
    /// Arnoldi breakdown threshold on the new subdiagonal entry.
    pub tol_h: f64,
    pub max_restarts: usize,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_M_FACTOR: usize = 30;
pub const DEFAULT_MAX_RESTARTS: usize = 500;

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            restart: DEFAULT_M_FACTOR,
            tol_h: DEFAULT_TOL,
            max_restarts: DEFAULT_MAX_RESTARTS,
        }
    }
}

impl SolverConfig {
    /// Default settings with `m = m_factor·(j + 1)`.
    pub fn for_level(level: usize, m_factor: usize) -> Self {
        Self {
            restart: m_factor * (level + 1),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.tol_h > 0.0) {
            return Err(Error::Config(format!(
                "tolerances must be positive (tol = {}, tol_h = {})",
                self.tol, self.tol_h
            )));
        }
        if self.restart == 0 {
            return Err(Error::Config("restart length must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    /// Total Arnoldi steps over all cycles.
    pub inner_iterations: usize,
    /// Number of Arnoldi cycles run; zero when the initial guess already meets
    /// the tolerance.
    pub restarts: usize,
    /// True residual norm before the first cycle and after each cycle.
    pub residual_history: Vec<f64>,
    pub matvec_count: usize,
    /// Floating-point operation estimate (operator applications plus
    /// orthogonalization).
    pub flops: u64,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }
}

fn dot<D: Dimension>(a: &Array<f64, D>, b: &Array<f64, D>) -> f64 {
    match (a.as_slice_memory_order(), b.as_slice_memory_order()) {
        (Some(a), Some(b)) => {
            // independent partial sums let the compiler vectorize
            let mut acc = [0.0; 4];
            let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
            let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
            for (x, y) in ca.zip(cb) {
                for k in 0..4 {
                    acc[k] += x[k] * y[k];
                }
            }
            acc.iter().sum::<f64>() + tail
        }
        _ => Zip::from(a).and(b).fold(0.0, |acc, x, y| acc + x * y),
    }
}

fn norm<D: Dimension>(a: &Array<f64, D>) -> f64 {
    dot(a, a).sqrt()
}

/// `R = C − A·X − X·B`.
pub fn sylvester_residual(a: &CsrMatrix, b: &CsrMatrix, c: &Array2<f64>, x: &Array2<f64>) -> Result<Array2<f64>> {
    check_shape("operator A", (c.nrows(), c.nrows()), a.shape())?;
    check_shape("operator B", (c.ncols(), c.ncols()), b.shape())?;
    check_shape("iterate", c.dim(), x.dim())?;
    let mut r = c.clone();
    let ax = apply_sylvester(a, b, x);
    r -= &ax;
    Ok(r)
}

fn apply_sylvester(a: &CsrMatrix, b: &CsrMatrix, x: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(x.dim());
    let x = x.as_standard_layout();
    a.left_mul_acc(x.view(), &mut out);
    b.right_mul_acc(x.view(), &mut out);
    out
}

fn sylvester_flops(a: &CsrMatrix, b: &CsrMatrix) -> u64 {
    2 * (a.nnz() * b.nrows() + b.nnz() * a.nrows()) as u64
}

/// Orthonormal Krylov basis produced by modified Gram-Schmidt.
#[derive(Debug, Clone)]
pub struct ArnoldiBasis<D: Dimension> {
    /// `V_1 … V_k`.
    pub basis: Vec<Array<f64, D>>,
    /// `V_{k+1}`, absent on breakdown.
    pub next: Option<Array<f64, D>>,
    /// Upper Hessenberg `(k + 1) × k`.
    pub h: Array2<f64>,
    pub breakdown: bool,
}

fn arnoldi_step<D: Dimension>(basis: &[Array<f64, D>], w: &mut Array<f64, D>, column: &mut [f64]) -> f64 {
    for (v, hij) in basis.iter().zip(column.iter_mut()) {
        *hij = dot(v, w);
        w.scaled_add(-*hij, v);
    }
    norm(w)
}

fn arnoldi<D: Dimension>(
    op: &mut impl FnMut(&Array<f64, D>) -> Array<f64, D>,
    r0: &Array<f64, D>,
    m: usize,
    tol_h: f64,
) -> Result<ArnoldiBasis<D>> {
    let beta = norm(r0);
    if beta == 0.0 {
        return Err(Error::ZeroResidual);
    }
    let mut basis = vec![r0 / beta];
    let mut h = Array2::zeros((m + 1, m));
    let mut column = vec![0.0; m + 1];
    for z in 0..m {
        let mut w = op(&basis[z]);
        let sub = arnoldi_step(&basis, &mut w, &mut column[..=z]);
        for i in 0..=z {
            h[[i, z]] = column[i];
        }
        h[[z + 1, z]] = sub;
        if sub < tol_h {
            let k = z + 1;
            let h = h.slice(ndarray::s![..=k, ..k]).to_owned();
            return Ok(ArnoldiBasis { basis, next: None, h, breakdown: true });
        }
        basis.push(w / sub);
    }
    let next = basis.pop();
    Ok(ArnoldiBasis { basis, next, h, breakdown: false })
}

/// Global Arnoldi on the Sylvester operator `V ↦ A·V + V·B` starting at `r0`.
pub fn global_arnoldi(
    a: &CsrMatrix,
    b: &CsrMatrix,
    r0: &Array2<f64>,
    m: usize,
    tol_h: f64,
) -> Result<ArnoldiBasis<ndarray::Ix2>> {
    check_shape("operator A", (r0.nrows(), r0.nrows()), a.shape())?;
    check_shape("operator B", (r0.ncols(), r0.ncols()), b.shape())?;
    arnoldi(&mut |v: &Array2<f64>| apply_sylvester(a, b, v), r0, m, tol_h)
}

/// Plane rotation zeroing `b` in `(a, b)`.
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0, a);
    }
    let r = a.hypot(b);
    (a / r, b / r, r)
}

/// Incrementally triangularized Hessenberg least-squares problem
/// `min ‖β·e₁ − H·y‖₂`.
#[derive(Debug, Clone)]
struct GivensLsq {
    r: Vec<Vec<f64>>,
    rotations: Vec<(f64, f64)>,
    g: Vec<f64>,
}

impl GivensLsq {
    fn new(beta: f64) -> Self {
        Self {
            r: Vec::new(),
            rotations: Vec::new(),
            g: vec![beta],
        }
    }

    /// Adds the next Hessenberg column (length `k + 2` for zero-based column
    /// `k`) and returns the updated residual norm.
    fn push(&mut self, column: &[f64]) -> f64 {
        let k = self.rotations.len();
        let mut col = column.to_vec();
        for (i, &(c, s)) in self.rotations.iter().enumerate() {
            let (x, y) = (col[i], col[i + 1]);
            col[i] = c * x + s * y;
            col[i + 1] = -s * x + c * y;
        }
        let (c, s, r) = givens(col[k], col[k + 1]);
        col[k] = r;
        col.truncate(k + 1);
        self.rotations.push((c, s));
        self.r.push(col);
        let gk = self.g[k];
        self.g[k] = c * gk;
        self.g.push(-s * gk);
        self.residual()
    }

    fn residual(&self) -> f64 {
        self.g.last().copied().unwrap_or(0.0).abs()
    }

    fn solve(&self) -> Result<Vec<f64>> {
        let k = self.r.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = self.g[i];
            for j in i + 1..k {
                acc -= self.r[j][i] * y[j];
            }
            let diag = self.r[i][i];
            if diag == 0.0 {
                return Err(Error::RankDeficient(i));
            }
            y[i] = acc / diag;
        }
        Ok(y)
    }
}

/// Solves `min ‖β·e₁ − H·y‖₂` for a `(k + 1) × k` upper Hessenberg `H` by plane
/// rotations. Returns `y` and the attained residual norm.
pub fn hessenberg_lsq(h: ArrayView2<f64>, beta: f64) -> Result<(Vec<f64>, f64)> {
    let (rows, k) = h.dim();
    if rows != k + 1 {
        return Err(Error::ShapeMismatch {
            context: "Hessenberg matrix",
            expected: (k + 1, k),
            got: (rows, k),
        });
    }
    let mut lsq = GivensLsq::new(beta);
    for j in 0..k {
        let column: Vec<f64> = (0..=j + 1).map(|i| h[[i, j]]).collect();
        lsq.push(&column);
    }
    Ok((lsq.solve()?, lsq.residual()))
}

fn restarted_gmres<D: Dimension>(
    mut op: impl FnMut(&Array<f64, D>) -> Array<f64, D>,
    rhs: &Array<f64, D>,
    x0: Array<f64, D>,
    op_flops: u64,
    config: &SolverConfig,
) -> Result<(Array<f64, D>, SolveReport)> {
    config.validate()?;
    let start = Instant::now();
    let size = rhs.len() as u64;
    let mut x = x0;
    let mut report = SolveReport {
        converged: false,
        inner_iterations: 0,
        restarts: 0,
        residual_history: Vec::new(),
        matvec_count: 0,
        flops: 0,
        wall_time: 0.0,
    };
    let mut r = rhs - &op(&x);
    report.matvec_count += 1;
    report.flops += op_flops + size;
    let mut beta = norm(&r);
    report.residual_history.push(beta);

    while beta >= config.tol && report.restarts < config.max_restarts {
        report.restarts += 1;
        let mut basis = vec![r / beta];
        let mut lsq = GivensLsq::new(beta);
        let mut column = vec![0.0; config.restart + 1];
        for z in 0..config.restart {
            let mut w = op(&basis[z]);
            report.matvec_count += 1;
            let sub = arnoldi_step(&basis, &mut w, &mut column[..=z]);
            report.flops += op_flops + 4 * size * (z as u64 + 1) + 2 * size;
            report.inner_iterations += 1;
            column[z + 1] = sub;
            let estimate = lsq.push(&column[..=z + 1]);
            if sub < config.tol_h || estimate < config.tol {
                break;
            }
            basis.push(w / sub);
        }
        let y = lsq.solve()?;
        for (yi, v) in y.iter().zip(&basis) {
            x.scaled_add(*yi, v);
        }
        report.flops += 2 * size * y.len() as u64;
        r = rhs - &op(&x);
        report.matvec_count += 1;
        report.flops += op_flops + size;
        beta = norm(&r);
        report.residual_history.push(beta);
    }
    report.converged = beta < config.tol;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Restarted Global GMRES for `A·X + X·B = C` from the guess `x0`.
///
/// Non-convergence within `max_restarts` cycles is reported through
/// `SolveReport::converged`, not as an error.
pub fn gl_gmres(
    a: &CsrMatrix,
    b: &CsrMatrix,
    c: &Array2<f64>,
    x0: Array2<f64>,
    config: &SolverConfig,
) -> Result<(Array2<f64>, SolveReport)> {
    check_shape("operator A", (c.nrows(), c.nrows()), a.shape())?;
    check_shape("operator B", (c.ncols(), c.ncols()), b.shape())?;
    check_shape("initial guess", c.dim(), x0.dim())?;
    let x0 = x0.as_standard_layout().into_owned();
    restarted_gmres(|v| apply_sylvester(a, b, v), c, x0, sylvester_flops(a, b), config)
}

/// Restarted GMRES for the vectorized system `K·x = r`.
pub fn gmres_restarted(
    k: &CsrMatrix,
    r: &Array1<f64>,
    x0: Array1<f64>,
    config: &SolverConfig,
) -> Result<(Array1<f64>, SolveReport)> {
    let n = r.len();
    check_shape("operator K", (n, n), k.shape())?;
    check_shape("initial guess", (n, 1), (x0.len(), 1))?;
    let op = |v: &Array1<f64>| {
        let mut out = Array1::zeros(n);
        k.mul_vec_into(v.view(), &mut out);
        out
    };
    restarted_gmres(op, r, x0, 2 * k.nnz() as u64, config)
}

pub const SPECTRUM_CAP: usize = 2000;

/// All eigenvalues of a small sparse matrix via a dense real Schur form.
pub fn spectrum(m: &CsrMatrix, cap: usize) -> Result<Vec<Complex64>> {
    let (rows, cols) = m.shape();
    check_shape("spectrum", (rows, rows), (rows, cols))?;
    if rows > cap {
        return Err(Error::SizeCap { size: rows, cap });
    }
    let mut dense = DMatrix::zeros(rows, cols);
    for (i, j, v) in m.triplets() {
        dense[(i, j)] = v;
    }
    let schur = nalgebra::linalg::Schur::try_new(dense, f64::EPSILON, 1000 * rows.max(10)).ok_or(Error::EigenvalueFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Dense LU solve of `K·x = r`; a reference for small systems.
pub fn direct_solve(k: &CsrMatrix, r: &Array1<f64>, cap: usize) -> Result<Array1<f64>> {
    let n = r.len();
    check_shape("operator K", (n, n), k.shape())?;
    if n > cap {
        return Err(Error::SizeCap { size: n, cap });
    }
    let mut dense = DMatrix::zeros(n, n);
    for (i, j, v) in k.triplets() {
        dense[(i, j)] = v;
    }
    let rhs = nalgebra::DVector::from_iterator(n, r.iter().copied());
    let x = dense.lu().solve(&rhs).ok_or(Error::RankDeficient(n))?;
    Ok(x.iter().copied().collect())
}
