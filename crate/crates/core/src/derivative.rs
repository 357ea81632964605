//! Wavelet differentiation matrices built from connection coefficients.
//!
//! For an interpolating scaling function `φ`, the derivative of a field
//! `Σ f_k φ((x − x_k)/h)` at node `x_i` is `h^−α Σ f_k φ^(α)(i − k)`. The values
//! `φ^(α)(l)` on integers are fixed by the two-scale relation
//! `φ^(α)(l) = 2^α Σ_m h_{2l−m} φ^(α)(m)`, i.e. they form an eigenvector of the
//! subdivision transition matrix for eigenvalue `2^−α`, normalized by the
//! polynomial moment conditions.
//!
//! Rows within `p − 2` nodes of an end use one-sided Lagrange stencils on the
//! nodes from the end through `max(i + p − 2, p − 1)`: the centered band
//! clipped at the boundary, widened to at least `p` nodes.
//!
//! That closure is unstable at the initial end of the time axis for `p ≥ 6`:
//! the first-derivative operator picks up eigenvalues with negative real part
//! of order `1/h`, and GMRES on the reduced system stagnates. [`Closure::Causal`]
//! starts the left windows at five (`p = 6`) or six nodes and widens them more
//! slowly, which keeps the reduced time operator in the right half plane.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::DyadicGrid;
use crate::mra::dd_filter;
use crate::sparse::CsrMatrix;
use crate::stencil::{factorial, lagrange_weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Space,
    Time,
}

/// Interior stencil: `weights[half_width + l]` multiplies the value at offset `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredStencil {
    pub half_width: usize,
    pub weights: Vec<f64>,
}

impl CenteredStencil {
    pub fn weight(&self, offset: isize) -> f64 {
        let idx = offset + self.half_width as isize;
        if idx < 0 || idx as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    pub fn offsets(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        let hw = self.half_width as isize;
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| (i as isize - hw, w))
    }
}

fn check_derivative(p: usize, alpha: usize) -> Result<()> {
    if p % 2 == 1 || !(4..=crate::grid::MAX_ORDER).contains(&p) || alpha == 0 || alpha + 2 > p {
        return Err(Error::DerivativeOrder { p, alpha });
    }
    Ok(())
}

/// Connection coefficients of the order-`p` Deslauriers-Dubuc scaling function
/// for the `alpha`-th derivative on a unit-spaced grid.
pub fn connection_coefficients(p: usize, alpha: usize) -> Result<CenteredStencil> {
    check_derivative(p, alpha)?;
    let filter = dd_filter(p)?;
    let mid = filter.midpoint_weights();

    // two-scale filter of φ: h_0 = 1, h_{2m+1} = weight of coarse node 0 when
    // predicting the midpoint between m and m + 1
    let half = (p / 2) as isize;
    let refinement = |k: isize| -> f64 {
        if k == 0 {
            1.0
        } else if k.rem_euclid(2) == 1 {
            let m = (k - 1) / 2;
            let idx = half - 1 - m;
            if (0..p as isize).contains(&idx) {
                mid[idx as usize]
            } else {
                0.0
            }
        } else {
            0.0
        }
    };

    let hw = p - 2;
    let size = 2 * hw + 1;
    let support = |i: usize| i as isize - hw as isize;
    let scale = (1u64 << alpha) as f64;
    let transition = DMatrix::from_fn(size, size, |r, c| {
        scale * refinement(2 * support(r) - support(c)) - if r == c { 1.0 } else { 0.0 }
    });

    // v_l = φ^(α)(l); the stencil weight at offset l is φ^(α)(−l), so
    // Σ_l l^m w_l = Σ_l (−l)^m v_l = α! δ_{mα}
    let moments = DMatrix::from_fn(p, size, |m, c| (-(support(c) as f64)).powi(m as i32));
    let target = factorial(alpha);
    let moment_scale = |v: &DVector<f64>, m: usize| -> f64 {
        moments.row(m).iter().zip(v.iter()).map(|(a, b)| (a * b).abs()).sum()
    };

    let eigvec = smallest_singular_vectors(&transition, 1, alpha)?;
    let v = eigvec.column(0).into_owned();
    let alpha_moment = moments.row(alpha).dot(&v.transpose());
    let (values, relation) = if alpha_moment.abs() > 1e-8 * moment_scale(&v, alpha) {
        (v * (target / alpha_moment), transition.clone())
    } else {
        // defective eigenvalue (φ is not C^α): the eigenvector is blind to the
        // α-th moment, so fit the moments over the generalized eigenspace,
        // two beyond the required ones to pin the remaining freedom
        let squared = &transition * &transition;
        let basis = smallest_singular_vectors(&squared, 2, alpha)?;
        let extended = DMatrix::from_fn(p + 2, size, |m, c| (-(support(c) as f64)).powi(m as i32));
        let mut rhs = DVector::zeros(p + 2);
        rhs[alpha] = target;
        let svd = (&extended * &basis).svd(true, true);
        let cutoff = 1e-10 * svd.singular_values.max();
        let coeffs = svd
            .solve(&rhs, cutoff)
            .map_err(|_| Error::Eigenproblem { alpha, residual: f64::NAN })?;
        (&basis * coeffs, squared)
    };

    let mut residual = (&relation * &values).norm() / (relation.norm() * values.norm());
    for m in 0..p {
        let want = if m == alpha { target } else { 0.0 };
        let got = moments.row(m).dot(&values.transpose());
        residual = residual.max((got - want).abs() / moment_scale(&values, m).max(target));
    }
    if !(residual < 1e-9) {
        return Err(Error::Eigenproblem { alpha, residual });
    }

    let raw: Vec<f64> = (0..size).map(|i| values[size - 1 - i]).collect();
    let sign = if alpha % 2 == 0 { 1.0 } else { -1.0 };
    let mut weights: Vec<f64> = (0..size)
        .map(|i| 0.5 * (raw[i] + sign * raw[size - 1 - i]))
        .collect();
    if alpha % 2 == 1 {
        weights[hw] = 0.0;
    }
    Ok(CenteredStencil {
        half_width: hw,
        weights,
    })
}

/// Right singular vectors for the `count` smallest singular values, which must
/// all be negligible.
fn smallest_singular_vectors(m: &DMatrix<f64>, count: usize, alpha: usize) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let smax = svd.singular_values.max().max(1.0);
    let worst = svd.singular_values[order[count - 1]];
    if worst > 1e-9 * smax {
        return Err(Error::Eigenproblem { alpha, residual: worst / smax });
    }
    let cols: Vec<DVector<f64>> = order[..count].iter().map(|&i| v_t.row(i).transpose()).collect();
    Ok(DMatrix::from_columns(&cols))
}

/// One-sided weights for the row `offset` nodes away from the left end, on the
/// nodes `0..=max(offset + p − 2, p − 1)` (unit spacing). Mirror for the right
/// end by reversing the weights and flipping the sign for odd `alpha`.
pub fn boundary_stencil(p: usize, alpha: usize, offset: usize) -> Result<Vec<f64>> {
    if p < 2 {
        return Err(Error::DerivativeOrder { p, alpha });
    }
    one_sided(p, alpha, offset, Closure::Symmetric.left_window(p, offset))
}

/// Treatment of the rows near the left end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Closure {
    Symmetric,
    Causal,
}

impl Closure {
    /// Last node index of the one-sided window for the row `offset` from the left end.
    pub fn left_window(self, p: usize, offset: usize) -> usize {
        match (self, p) {
            (Closure::Symmetric, _) | (Closure::Causal, 0..=4) => (offset + p.saturating_sub(2)).max(p - 1),
            (Closure::Causal, 6) => (offset + 1).max(4),
            (Closure::Causal, _) => (offset + 2).max(5),
        }
    }
}

fn one_sided(p: usize, alpha: usize, offset: usize, last: usize) -> Result<Vec<f64>> {
    if p % 2 == 1 || p < 2 || alpha == 0 || alpha >= p || last < alpha.max(offset) {
        return Err(Error::DerivativeOrder { p, alpha });
    }
    let nodes: Vec<f64> = (0..=last).map(|k| k as f64).collect();
    let w = lagrange_weights(&nodes, offset as f64, alpha);
    debug_assert!(w.iter().all(|v| v.is_finite()));
    Ok(w)
}

/// Sparse derivative operator along one axis of a grid.
#[derive(Debug, Clone)]
pub struct DerivOperator {
    pub direction: Direction,
    pub alpha: usize,
    pub p: usize,
    pub spacing: f64,
    pub matrix: CsrMatrix,
}

/// Derivative matrix on `points` uniformly spaced nodes with spacing `h`.
pub fn derivative_matrix(points: usize, p: usize, alpha: usize, h: f64) -> Result<CsrMatrix> {
    derivative_matrix_with(points, p, alpha, h, Closure::Symmetric)
}

pub fn derivative_matrix_with(points: usize, p: usize, alpha: usize, h: f64, closure: Closure) -> Result<CsrMatrix> {
    let interior = connection_coefficients(p, alpha)?;
    let hw = interior.half_width;
    if points < 2 * hw + 1 || points < p {
        return Err(Error::DerivativeOrder { p, alpha });
    }
    let scale = h.powi(-(alpha as i32));
    let mirror_sign = if alpha % 2 == 0 { 1.0 } else { -1.0 };
    let mut triplets = Vec::with_capacity(points * (2 * hw + 1));
    for i in 0..points {
        let from_right = points - 1 - i;
        if i >= hw && from_right >= hw {
            for (l, w) in interior.offsets() {
                triplets.push((i, (i as isize + l) as usize, w * scale));
            }
        } else if i < hw {
            for (k, w) in one_sided(p, alpha, i, closure.left_window(p, i))?.into_iter().enumerate() {
                triplets.push((i, k, w * scale));
            }
        } else {
            for (k, w) in boundary_stencil(p, alpha, from_right)?.into_iter().enumerate() {
                triplets.push((i, points - 1 - k, mirror_sign * w * scale));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(points, points, triplets))
}

pub fn assemble_derivative(grid: &DyadicGrid, direction: Direction, alpha: usize) -> Result<DerivOperator> {
    // the initial end of the time axis is where the reduced system lives
    let (points, p, spacing, closure) = match direction {
        Direction::Space => (grid.nx(), grid.px(), grid.dx(), Closure::Symmetric),
        Direction::Time => (grid.nt(), grid.pt(), grid.dt(), Closure::Causal),
    };
    Ok(DerivOperator {
        direction,
        alpha,
        p,
        spacing,
        matrix: derivative_matrix_with(points, p, alpha, spacing, closure)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn cubic_first_derivative_is_five_point_stencil() {
        let st = connection_coefficients(4, 1).unwrap();
        let expected = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (w, e) in st.weights.iter().zip(expected) {
            assert!((w - e).abs() < 1e-13, "{:?}", st.weights);
        }
    }

    #[test]
    fn sixth_order_first_derivative_matches_known_values() {
        // φ'(1) = −272/365 for the 6-point scheme, so the weight at +1 is 272/365
        let st = connection_coefficients(6, 1).unwrap();
        assert!((st.weight(1) - 272.0 / 365.0).abs() < 1e-13);
        assert!((st.weight(2) + 53.0 / 365.0).abs() < 1e-13);
        assert!((st.weight(3) - 16.0 / 1095.0).abs() < 1e-13);
        assert!((st.weight(4) - 1.0 / 2920.0).abs() < 1e-13);
    }

    #[test]
    fn symmetry_follows_derivative_parity() {
        for p in [4, 6, 8, 10] {
            for alpha in 1..=p - 2 {
                let Ok(st) = connection_coefficients(p, alpha) else {
                    continue;
                };
                let sign = if alpha % 2 == 0 { 1.0 } else { -1.0 };
                for l in 0..=st.half_width as isize {
                    assert_eq!(st.weight(l), sign * st.weight(-l), "p={p} alpha={alpha}");
                }
            }
        }
    }

    #[test]
    fn interior_stencils_differentiate_monomials() {
        for (p, alpha) in [(4, 1), (6, 1), (6, 2), (8, 1), (8, 2), (8, 3)] {
            let st = connection_coefficients(p, alpha).unwrap();
            for deg in 0..p as i32 {
                let x0 = 0.3_f64;
                let approx: f64 = st.offsets().map(|(l, w)| w * (x0 + l as f64).powi(deg)).sum();
                let exact = if deg as usize >= alpha {
                    let coef: f64 = (0..alpha).map(|k| (deg - k as i32) as f64).product();
                    coef * x0.powi(deg - alpha as i32)
                } else {
                    0.0
                };
                assert!(close(approx, exact, 1e-10), "p={p} alpha={alpha} deg={deg}");
            }
        }
    }

    #[test]
    fn sixth_order_second_derivative_on_quintic() {
        let st = connection_coefficients(6, 2).unwrap();
        let x0 = 0.7_f64;
        let d2 = |f: &dyn Fn(f64) -> f64| -> f64 { st.offsets().map(|(l, w)| w * f(x0 + l as f64)).sum() };
        assert!(close(d2(&|x| x * x), 2.0, 1e-10));
        assert!(close(d2(&|x| x.powi(5)), 20.0 * x0.powi(3), 1e-10));
    }

    #[test]
    fn rejects_excess_derivative_order() {
        assert!(connection_coefficients(4, 3).is_err());
        assert!(connection_coefficients(6, 0).is_err());
        assert!(connection_coefficients(5, 1).is_err());
    }

    #[test]
    fn boundary_rows() {
        assert_eq!(boundary_stencil(2, 1, 0).unwrap(), vec![-1.0, 1.0]);
        for (p, alpha) in [(4, 1), (6, 1), (6, 2), (8, 2)] {
            for offset in 0..p - 1 {
                let w = boundary_stencil(p, alpha, offset).unwrap();
                assert!(w.iter().sum::<f64>().abs() < 1e-9);
            }
        }
        // x^4 at the left end of [-1, ...] with spacing 0.1
        let (lo, h) = (-1.0_f64, 0.1);
        let w = boundary_stencil(6, 2, 0).unwrap();
        let approx: f64 = w
            .iter()
            .enumerate()
            .map(|(k, w)| w * (lo + k as f64 * h).powi(4))
            .sum::<f64>()
            / (h * h);
        assert!(close(approx, 12.0 * lo * lo, 1e-9));
    }

    #[test]
    fn operator_shape_and_band() {
        let grid = DyadicGrid::unit(2, 6, 4).unwrap();
        let d2 = assemble_derivative(&grid, Direction::Space, 2).unwrap();
        assert_eq!(d2.matrix.shape(), (49, 49));
        assert!(d2.matrix.bandwidth() < 2 * 6);
        let d1 = assemble_derivative(&grid, Direction::Time, 1).unwrap();
        assert_eq!(d1.matrix.shape(), (33, 33));
        // interior rows: 2p − 3 entries, zero centre for odd derivatives
        assert_eq!(d2.matrix.row_nnz(20), 9);
        assert_eq!(d1.matrix.row_nnz(16), 4);
    }

    #[test]
    fn causal_closure_windows() {
        for offset in 0..4 {
            assert_eq!(Closure::Causal.left_window(4, offset), Closure::Symmetric.left_window(4, offset));
        }
        assert_eq!(Closure::Causal.left_window(6, 0), 4);
        assert_eq!(Closure::Causal.left_window(8, 0), 5);
        assert_eq!(Closure::Causal.left_window(8, 5), 7);
        // six nodes at most near the end: exact through degree 4 for p = 6, 5 beyond
        for (p, degree) in [(6, 4), (8, 5), (10, 5), (12, 5)] {
            let points = 4 * p + 1;
            let h = 0.5;
            let d = derivative_matrix_with(points, p, 1, h, Closure::Causal).unwrap().to_dense();
            let xs: Vec<f64> = (0..points).map(|i| i as f64 * h).collect();
            for i in 0..p {
                let approx: f64 = (0..points).map(|k| d[[i, k]] * xs[k].powi(degree)).sum();
                let exact = degree as f64 * xs[i].powi(degree - 1);
                assert!(close(approx, exact, 1e-8), "p={p} row {i}: {approx} vs {exact}");
            }
        }
    }
}
