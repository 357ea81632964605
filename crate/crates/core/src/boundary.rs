//! Dirichlet and initial condition enforcement by selector reduction.
//!
//! The full field is split as `X = P_x·X̂·P_tᵀ + X_D`, where `X_D` carries the
//! known boundary and initial values and `X̂` the unknowns. Substituting into
//! `A·X + X·B = C` and projecting gives the reduced equation
//! `Â·X̂ + X̂·B̂ = Ĉ` with `Â = P_xᵀ·A·P_x`, `B̂ = P_tᵀ·B·P_t` and
//! `Ĉ = P_xᵀ·(C − A·X_D − X_D·B)·P_t`.

use std::ops::Range;

use ndarray::{s, Array2, ArrayView2};

use crate::discretization::{PdeSpec, SylvesterSystem};
use crate::error::{check_shape, Error, Result};
use crate::grid::DyadicGrid;
use crate::sparse::CsrMatrix;

/// Column selector `P` of shape `full × kept.len()`, mapping unknown `k` to
/// full index `kept.start + k`. Multiplying by `P` or `Pᵀ` is slicing, so it is
/// never formed as a matrix in the solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    full: usize,
    kept: Range<usize>,
}

impl Selector {
    pub fn new(full: usize, kept: Range<usize>) -> Result<Self> {
        if kept.start >= kept.end || kept.end > full {
            return Err(Error::Config(format!(
                "selector range {kept:?} invalid for dimension {full}"
            )));
        }
        Ok(Self { full, kept })
    }

    pub fn full(&self) -> usize {
        self.full
    }

    pub fn reduced(&self) -> usize {
        self.kept.len()
    }

    pub fn kept(&self) -> Range<usize> {
        self.kept.clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.full, self.reduced())
    }

    pub fn to_matrix(&self) -> CsrMatrix {
        let triplets: Vec<_> = self.kept.clone().enumerate().map(|(k, i)| (i, k, 1.0)).collect();
        CsrMatrix::from_triplets(self.full, self.reduced(), triplets)
    }
}

/// Spatial selector dropping both endpoints and temporal selector dropping the
/// initial time.
pub fn build_permutations(grid: &DyadicGrid) -> Result<(Selector, Selector)> {
    let (nx, nt) = grid.shape();
    if nx < 3 || nt < 2 {
        return Err(Error::Config(format!("grid {nx}×{nt} too small for reduction")));
    }
    Ok((Selector::new(nx, 1..nx - 1)?, Selector::new(nt, 1..nt)?))
}

/// Known-value matrix: exact solution on the first and last spatial rows and
/// the initial column, zero elsewhere.
pub fn build_dirichlet_data(pde: &PdeSpec, grid: &DyadicGrid) -> Array2<f64> {
    let (nx, nt) = grid.shape();
    let mut xd = Array2::zeros((nx, nt));
    for k in 0..nt {
        let t = grid.t(k);
        xd[[0, k]] = pde.exact(grid.x(0), t);
        xd[[nx - 1, k]] = pde.exact(grid.x(nx - 1), t);
    }
    for i in 1..nx - 1 {
        xd[[i, 0]] = pde.exact(grid.x(i), grid.t(0));
    }
    xd
}

#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a_hat: CsrMatrix,
    pub b_hat: CsrMatrix,
    pub c_hat: Array2<f64>,
    pub px: Selector,
    pub pt: Selector,
    pub xd: Array2<f64>,
}

/// `Pxᵀ·M·Pt` without forming the selectors.
pub fn restrict(m: ArrayView2<f64>, px: &Selector, pt: &Selector) -> Result<Array2<f64>> {
    check_shape("restriction", (px.full, pt.full), m.dim())?;
    Ok(m.slice(s![px.kept(), pt.kept()]).to_owned())
}

pub fn reduce(system: &SylvesterSystem, px: &Selector, pt: &Selector, xd: &Array2<f64>) -> Result<ReducedSystem> {
    check_shape("operator A", (px.full, px.full), system.a.shape())?;
    check_shape("operator B", (pt.full, pt.full), system.b.shape())?;
    check_shape("forcing", (px.full, pt.full), system.c.dim())?;
    check_shape("Dirichlet data", (px.full, pt.full), xd.dim())?;
    let mut lifted = system.c.clone();
    let mut applied = Array2::zeros(xd.dim());
    let xd_std = xd.as_standard_layout();
    system.a.left_mul_acc(xd_std.view(), &mut applied);
    system.b.right_mul_acc(xd_std.view(), &mut applied);
    lifted -= &applied;
    Ok(ReducedSystem {
        a_hat: system.a.submatrix(px.kept(), px.kept()),
        b_hat: system.b.submatrix(pt.kept(), pt.kept()),
        c_hat: restrict(lifted.view(), px, pt)?,
        px: px.clone(),
        pt: pt.clone(),
        xd: xd.clone(),
    })
}

/// `X = Px·X̂·Ptᵀ + X_D`. Known entries are copied from `X_D` verbatim.
pub fn reconstruct(x_hat: ArrayView2<f64>, px: &Selector, pt: &Selector, xd: &Array2<f64>) -> Result<Array2<f64>> {
    check_shape("reduced solution", (px.reduced(), pt.reduced()), x_hat.dim())?;
    check_shape("Dirichlet data", (px.full, pt.full), xd.dim())?;
    let mut x = xd.clone();
    x.slice_mut(s![px.kept(), pt.kept()]).assign(&x_hat);
    Ok(x)
}

impl ReducedSystem {
    pub fn n(&self) -> usize {
        self.px.reduced()
    }

    pub fn s(&self) -> usize {
        self.pt.reduced()
    }

    /// Reduced unknowns of a full field.
    pub fn restrict_field(&self, field: ArrayView2<f64>) -> Result<Array2<f64>> {
        restrict(field, &self.px, &self.pt)
    }

    pub fn reconstruct(&self, x_hat: ArrayView2<f64>) -> Result<Array2<f64>> {
        reconstruct(x_hat, &self.px, &self.pt, &self.xd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble, reference_convdiff, reference_diffusion, sylvester_apply};
    use ndarray::Array2;

    #[test]
    fn selector_layout() {
        let p = Selector::new(5, 1..4).unwrap();
        let m = p.to_matrix().to_dense();
        assert_eq!(m.dim(), (5, 3));
        for k in 0..3 {
            assert_eq!(m[[k + 1, k]], 1.0);
        }
        let gram = m.t().dot(&m);
        assert_eq!(gram, Array2::eye(3));
        assert!(Selector::new(5, 2..2).is_err());
        assert!(Selector::new(5, 1..6).is_err());
    }

    #[test]
    fn published_selector_shapes() {
        let grid = DyadicGrid::unit(2, 6, 4).unwrap();
        let (px, pt) = build_permutations(&grid).unwrap();
        assert_eq!(px.shape(), (49, 47));
        assert_eq!(pt.shape(), (33, 32));
    }

    #[test]
    fn dirichlet_data_layout() {
        let grid = DyadicGrid::unit(1, 6, 4).unwrap();
        let pde = reference_convdiff();
        let xd = build_dirichlet_data(&pde, &grid);
        let (nx, nt) = grid.shape();
        assert_eq!(xd[[0, 0]], pde.exact(-1.0, 0.0));
        assert_eq!(xd[[nx - 1, nt - 1]], pde.exact(1.0, 1.0));
        for i in 1..nx - 1 {
            assert_eq!(xd[[i, 0]], pde.exact(grid.x(i), 0.0));
            for k in 1..nt {
                assert_eq!(xd[[i, k]], 0.0);
            }
        }
    }

    #[test]
    fn zero_data_reduces_to_slices() {
        let grid = DyadicGrid::unit(0, 6, 4).unwrap();
        let sys = assemble(&reference_convdiff(), &grid).unwrap();
        let (px, pt) = build_permutations(&grid).unwrap();
        let zero = Array2::zeros(grid.shape());
        let red = reduce(&sys, &px, &pt, &zero).unwrap();
        let pxm = px.to_matrix().to_dense();
        let ptm = pt.to_matrix().to_dense();
        assert_eq!(red.c_hat, pxm.t().dot(&sys.c).dot(&ptm));
        assert_eq!(red.a_hat.to_dense(), pxm.t().dot(&sys.a.to_dense()).dot(&pxm));
        assert_eq!(red.b_hat.to_dense(), ptm.t().dot(&sys.b.to_dense()).dot(&ptm));
    }

    #[test]
    fn reconstruct_roundtrip() {
        let grid = DyadicGrid::unit(0, 6, 4).unwrap();
        let (px, pt) = build_permutations(&grid).unwrap();
        let xd = build_dirichlet_data(&reference_diffusion(), &grid);
        let x_hat = Array2::from_shape_fn((px.reduced(), pt.reduced()), |(i, k)| (i * 31 + k) as f64);
        let x = reconstruct(x_hat.view(), &px, &pt, &xd).unwrap();
        let back = restrict((&x - &xd).view(), &px, &pt).unwrap();
        assert_eq!(back, x_hat);
        assert_eq!(reconstruct(Array2::zeros(x_hat.dim()).view(), &px, &pt, &xd).unwrap(), xd);
        assert!(reconstruct(Array2::zeros((2, 2)).view(), &px, &pt, &xd).is_err());
    }

    #[test]
    fn reduced_residual_of_exact_field_matches_full() {
        let grid = DyadicGrid::unit(1, 6, 4).unwrap();
        let pde = reference_convdiff();
        let sys = assemble(&pde, &grid).unwrap();
        let (px, pt) = build_permutations(&grid).unwrap();
        let xd = build_dirichlet_data(&pde, &grid);
        let red = reduce(&sys, &px, &pt, &xd).unwrap();
        let exact = grid.sample(|x, t| pde.exact(x, t));
        let x_hat = red.restrict_field((&exact - &xd).view()).unwrap();
        let reduced = sylvester_apply(&red.a_hat, &red.b_hat, &x_hat).unwrap() - &red.c_hat;
        let full = sylvester_apply(&sys.a, &sys.b, &exact).unwrap() - &sys.c;
        let full_interior = restrict(full.view(), &px, &pt).unwrap();
        let diff = (&reduced - &full_interior).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-9, "{diff}");
    }
}
