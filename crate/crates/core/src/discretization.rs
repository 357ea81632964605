//! Spacetime collocation of linear convection-diffusion problems as a
//! Sylvester equation `A·F + F·B = C`.
//!
//! The first index of a field is space and the second is time. `A` holds the
//! spatial operator and left-multiplies; `B` is the transpose of the temporal
//! derivative so that it right-multiplies.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::derivative::{assemble_derivative, Direction};
use crate::error::{check_shape, Error, Result};
use crate::grid::DyadicGrid;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    Diffusion,
    ConvectionDiffusion,
}

/// Manufactured solutions with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Manufactured {
    /// Spreading Gaussian `sqrt(v²σ²/S)·exp(−(x − x0)²/(2S))`, `S = 2νt + σ²`.
    Gaussian { v: f64, nu: f64, sigma: f64, x0: f64 },
    /// `v·sin(a·x)·exp(−b·t)`.
    DampedSine { v: f64, a: f64, b: f64 },
}

impl Manufactured {
    pub fn value(&self, x: f64, t: f64) -> f64 {
        match *self {
            Self::Gaussian { v, nu, sigma, x0 } => {
                let spread = 2.0 * nu * t + sigma * sigma;
                (v * v * sigma * sigma / spread).sqrt() * (-(x - x0).powi(2) / (2.0 * spread)).exp()
            }
            Self::DampedSine { v, a, b } => v * (a * x).sin() * (-b * t).exp(),
        }
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        match *self {
            Self::Gaussian { nu, sigma, x0, .. } => {
                let spread = 2.0 * nu * t + sigma * sigma;
                self.value(x, t) * nu * ((x - x0).powi(2) / spread - 1.0) / spread
            }
            Self::DampedSine { b, .. } => -b * self.value(x, t),
        }
    }

    pub fn dx(&self, x: f64, t: f64) -> f64 {
        match *self {
            Self::Gaussian { nu, sigma, x0, .. } => {
                let spread = 2.0 * nu * t + sigma * sigma;
                -(x - x0) / spread * self.value(x, t)
            }
            Self::DampedSine { v, a, b } => v * a * (a * x).cos() * (-b * t).exp(),
        }
    }

    pub fn dxx(&self, x: f64, t: f64) -> f64 {
        match *self {
            Self::Gaussian { nu, sigma, x0, .. } => {
                let spread = 2.0 * nu * t + sigma * sigma;
                ((x - x0).powi(2) / (spread * spread) - 1.0 / spread) * self.value(x, t)
            }
            Self::DampedSine { a, .. } => -a * a * self.value(x, t),
        }
    }
}

/// `∂f/∂t + c ∂f/∂x − ν ∂²f/∂x² = g` with Dirichlet data from a manufactured solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeSpec {
    pub kind: PdeKind,
    pub nu: f64,
    pub c: f64,
    pub solution: Manufactured,
}

impl PdeSpec {
    pub fn exact(&self, x: f64, t: f64) -> f64 {
        self.solution.value(x, t)
    }

    pub fn forcing(&self, x: f64, t: f64) -> f64 {
        match (self.kind, self.solution) {
            (PdeKind::Diffusion, Manufactured::Gaussian { .. }) => 0.0,
            (_, Manufactured::DampedSine { v, a, b }) => {
                v * (a * self.c * (a * x).cos() + (a * a * self.nu - b) * (a * x).sin()) * (-b * t).exp()
            }
            _ => {
                let s = &self.solution;
                s.dt(x, t) + self.c * s.dx(x, t) - self.nu * s.dxx(x, t)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PdeKind::Diffusion => "diffusion",
            PdeKind::ConvectionDiffusion => "convdiff",
        }
    }

    pub fn with_viscosity(&self, nu: f64) -> Self {
        let solution = match self.solution {
            Manufactured::Gaussian { v, sigma, x0, .. } => Manufactured::Gaussian { v, nu, sigma, x0 },
            other => other,
        };
        Self { nu, solution, ..*self }
    }
}

pub fn mms_diffusion(v: f64, nu: f64, sigma: f64, x0: f64) -> Result<PdeSpec> {
    if !(sigma > 0.0) || !(nu >= 0.0) || !v.is_finite() || !x0.is_finite() {
        return Err(Error::Config(format!(
            "diffusion MMS needs sigma > 0 and nu >= 0 (sigma = {sigma}, nu = {nu})"
        )));
    }
    Ok(PdeSpec {
        kind: PdeKind::Diffusion,
        nu,
        c: 0.0,
        solution: Manufactured::Gaussian { v, nu, sigma, x0 },
    })
}

pub fn mms_convdiff(v: f64, a: f64, b: f64, c: f64, nu: f64) -> Result<PdeSpec> {
    if ![v, a, b, c, nu].iter().all(|p| p.is_finite()) {
        return Err(Error::Config("convection-diffusion parameters must be finite".into()));
    }
    Ok(PdeSpec {
        kind: PdeKind::ConvectionDiffusion,
        nu,
        c,
        solution: Manufactured::DampedSine { v, a, b },
    })
}

/// Diffusion test case: `v = 1, ν = 0.01, σ = 0.1, x0 = 0`.
pub fn reference_diffusion() -> PdeSpec {
    mms_diffusion(1.0, 0.01, 0.1, 0.0).expect("valid parameters")
}

/// Convection-diffusion test case: `v = 3, a = 5, b = 5, c = 1, ν = 0.01`.
pub fn reference_convdiff() -> PdeSpec {
    mms_convdiff(3.0, 5.0, 5.0, 1.0, 0.01).expect("valid parameters")
}

/// Full (pre-boundary-condition) Sylvester triplet on every grid node.
#[derive(Debug, Clone)]
pub struct SylvesterSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub c: Array2<f64>,
    pub grid: DyadicGrid,
}

pub fn assemble(pde: &PdeSpec, grid: &DyadicGrid) -> Result<SylvesterSystem> {
    let dxx = assemble_derivative(grid, Direction::Space, 2)?;
    let mut a = dxx.matrix.scaled(-pde.nu);
    if pde.c != 0.0 {
        let dx = assemble_derivative(grid, Direction::Space, 1)?;
        a = dx.matrix.linear_combination(pde.c, &dxx.matrix, -pde.nu)?;
    }
    let b = assemble_derivative(grid, Direction::Time, 1)?.matrix.transpose();
    let c = match pde.kind {
        PdeKind::Diffusion => Array2::zeros(grid.shape()),
        _ => grid.sample(|x, t| pde.forcing(x, t)),
    };
    Ok(SylvesterSystem { a, b, c, grid: *grid })
}

/// Applies the Sylvester operator: `A·X + X·B`.
pub fn sylvester_apply(a: &CsrMatrix, b: &CsrMatrix, x: &Array2<f64>) -> Result<Array2<f64>> {
    check_shape("Sylvester operator", (a.ncols(), b.nrows()), x.dim())?;
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    let x = x.as_standard_layout();
    a.left_mul_acc(x.view(), &mut out);
    b.right_mul_acc(x.view(), &mut out);
    Ok(out)
}

/// Column-stacking vectorization.
pub fn vec_col(x: &Array2<f64>) -> Array1<f64> {
    x.t().iter().copied().collect()
}

pub fn unvec_col(v: &Array1<f64>, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| v[j * rows + i])
}

/// Vectorized system `K·vec(X) = vec(C)`, `K = (I_s ⊗ A) + (Bᵀ ⊗ I_n)`.
pub fn kronecker_form(
    a: &CsrMatrix,
    b: &CsrMatrix,
    c: &Array2<f64>,
    cap: usize,
) -> Result<(CsrMatrix, Array1<f64>)> {
    let (n, s) = (a.nrows(), b.nrows());
    check_shape("Kronecker form", (n, s), c.dim())?;
    let size = n * s;
    if size > cap {
        return Err(Error::SizeCap { size, cap });
    }
    let left = CsrMatrix::identity(s).kron(a);
    let right = b.transpose().kron(&CsrMatrix::identity(n));
    let k = left.linear_combination(1.0, &right, 1.0)?;
    Ok((k, vec_col(c)))
}

/// Nonzero count of `(I_s ⊗ A) + (Bᵀ ⊗ I_n)` without forming it: the two
/// terms only collide on the diagonal.
pub fn kronecker_nnz(a: &CsrMatrix, b: &CsrMatrix) -> usize {
    b.nrows() * a.nnz() + a.nrows() * b.nnz() - a.diagonal_nnz() * b.diagonal_nnz()
}
