//! Deslauriers-Dubuc interpolating multiresolution machinery.
//!
//! Scaling coefficients of the interpolating family are nodal values, so the
//! analysis step is a predict/subtract butterfly: each node added at level
//! `j + 1` stores its value minus the order-`p` midpoint prediction from the
//! level-`j` nodes. Near the domain ends the prediction window is shifted to
//! stay inside, which keeps exactness for polynomials of degree `< p`.

use ndarray::{s, Array2, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use crate::error::{check_shape, Error, Result};
use crate::grid::{DyadicGrid, MAX_ORDER};
use crate::stencil::lagrange_weights;

/// Midpoint prediction weights of the order-`p` Deslauriers-Dubuc scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    p: usize,
    midpoint: Vec<f64>,
    /// Row `k` predicts the midpoint between coarse nodes `k` and `k + 1`
    /// from coarse nodes `0..p`, for `k < p/2 − 1`.
    boundary: Vec<Vec<f64>>,
}

pub fn dd_filter(p: usize) -> Result<FilterBank> {
    if p % 2 == 1 || !(2..=MAX_ORDER).contains(&p) {
        return Err(Error::InvalidOrder {
            order: p,
            min: 2,
            max: MAX_ORDER,
        });
    }
    let half = (p / 2) as f64;
    let centered: Vec<f64> = (0..p).map(|i| i as f64 - half + 1.0).collect();
    let midpoint = lagrange_weights(&centered, 0.5, 0);
    let one_sided: Vec<f64> = (0..p).map(|i| i as f64).collect();
    let boundary = (0..p / 2 - 1)
        .map(|k| lagrange_weights(&one_sided, k as f64 + 0.5, 0))
        .collect();
    Ok(FilterBank {
        p,
        midpoint,
        boundary,
    })
}

impl FilterBank {
    pub fn order(&self) -> usize {
        self.p
    }

    pub fn midpoint_weights(&self) -> &[f64] {
        &self.midpoint
    }

    pub fn boundary_weights(&self) -> &[Vec<f64>] {
        &self.boundary
    }

    /// Prediction for the midpoint between coarse nodes `k` and `k + 1` out of
    /// `coarse_len` nodes; `coarse(i)` reads coarse node `i`.
    fn predict(&self, k: usize, coarse_len: usize, coarse: impl Fn(usize) -> f64) -> f64 {
        let p = self.p;
        let last = coarse_len - 1;
        if k + 1 < p / 2 {
            dot(&self.boundary[k], &coarse)
        } else if k + p / 2 > last {
            let row = &self.boundary[last - 1 - k];
            let start = coarse_len - p;
            // mirrored: weight i applies to node last - i
            row.iter()
                .enumerate()
                .map(|(i, w)| w * coarse(start + p - 1 - i))
                .sum()
        } else {
            let start = k + 1 - p / 2;
            dot(&self.midpoint, |i| coarse(start + i))
        }
    }

    /// Subtracts predictions from the odd entries of a lane of length `2M + 1`.
    fn analyze_lane(&self, mut lane: ArrayViewMut1<f64>) {
        let coarse_len = lane.len().div_ceil(2);
        for k in 0..coarse_len - 1 {
            let pred = self.predict(k, coarse_len, |i| lane[2 * i]);
            lane[2 * k + 1] -= pred;
        }
    }

    fn synthesize_lane(&self, mut lane: ArrayViewMut1<f64>) {
        let coarse_len = lane.len().div_ceil(2);
        for k in 0..coarse_len - 1 {
            let pred = self.predict(k, coarse_len, |i| lane[2 * i]);
            lane[2 * k + 1] += pred;
        }
    }
}

fn dot(w: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    w.iter().enumerate().map(|(i, w)| w * f(i)).sum()
}

/// Orientation of a two-dimensional detail coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetailKind {
    /// New spatial node, existing time node.
    Space = 1,
    /// Existing spatial node, new time node.
    Time = 2,
    /// New node in both directions.
    Diagonal = 3,
}

/// Multilevel coefficients stored in place on the finest grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    grid: DyadicGrid,
    levels: usize,
    data: Array2<f64>,
}

impl WaveletCoeffs {
    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn coarsest_level(&self) -> usize {
        self.grid.level() - self.levels
    }

    /// Total number of stored coefficients (equals the number of grid nodes).
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn raw(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    /// Scaling coefficients on the coarsest level.
    pub fn base(&self) -> Array2<f64> {
        let stride = 1 << self.levels;
        self.data.slice(s![..;stride, ..;stride]).to_owned()
    }

    /// Details introduced when refining from `level` to `level + 1`.
    pub fn detail(&self, level: usize, kind: DetailKind) -> Option<Array2<f64>> {
        if level < self.coarsest_level() || level >= self.grid.level() {
            return None;
        }
        let stride = 1 << (self.grid.level() - level - 1);
        let sub = self.data.slice(s![..;stride, ..;stride]);
        let view = match kind {
            DetailKind::Space => sub.slice_move(s![1..;2, ..;2]),
            DetailKind::Time => sub.slice_move(s![..;2, 1..;2]),
            DetailKind::Diagonal => sub.slice_move(s![1..;2, 1..;2]),
        };
        Some(view.to_owned())
    }

    /// Largest detail magnitude over all levels and kinds.
    pub fn max_detail(&self) -> f64 {
        (self.coarsest_level()..self.grid.level())
            .flat_map(|l| {
                [DetailKind::Space, DetailKind::Time, DetailKind::Diagonal]
                    .into_iter()
                    .filter_map(move |k| self.detail(l, k))
            })
            .map(|d| d.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            .fold(0.0, f64::max)
    }
}

struct Filters {
    space: FilterBank,
    time: FilterBank,
}

impl Filters {
    fn for_grid(grid: &DyadicGrid) -> Result<Self> {
        Ok(Self {
            space: dd_filter(grid.px())?,
            time: dd_filter(grid.pt())?,
        })
    }

    fn analyze(&self, mut block: ArrayViewMut2<f64>) {
        for lane in block.lanes_mut(Axis(0)) {
            self.space.analyze_lane(lane);
        }
        for lane in block.lanes_mut(Axis(1)) {
            self.time.analyze_lane(lane);
        }
    }

    fn synthesize(&self, mut block: ArrayViewMut2<f64>) {
        for lane in block.lanes_mut(Axis(1)) {
            self.time.synthesize_lane(lane);
        }
        for lane in block.lanes_mut(Axis(0)) {
            self.space.synthesize_lane(lane);
        }
    }
}

/// Separable forward transform over `levels` levels (space pass, then time).
pub fn forward_transform(
    field: ArrayView2<f64>,
    grid: &DyadicGrid,
    levels: usize,
) -> Result<WaveletCoeffs> {
    check_shape("forward transform", grid.shape(), field.dim())?;
    if levels > grid.level() {
        return Err(Error::TooManyLevels {
            requested: levels,
            available: grid.level(),
        });
    }
    let filters = Filters::for_grid(grid)?;
    let mut data = field.to_owned();
    for l in 0..levels {
        let stride = 1 << l;
        filters.analyze(data.slice_mut(s![..;stride, ..;stride]));
    }
    Ok(WaveletCoeffs {
        grid: *grid,
        levels,
        data,
    })
}

pub fn backward_transform(coeffs: &WaveletCoeffs, grid: &DyadicGrid) -> Result<Array2<f64>> {
    if coeffs.grid != *grid {
        return Err(Error::ShapeMismatch {
            context: "backward transform",
            expected: grid.shape(),
            got: coeffs.grid.shape(),
        });
    }
    let filters = Filters::for_grid(grid)?;
    let mut data = coeffs.data.clone();
    for l in (0..coeffs.levels).rev() {
        let stride = 1 << l;
        filters.synthesize(data.slice_mut(s![..;stride, ..;stride]));
    }
    Ok(data)
}

/// Assembles coefficients from a coarse base and per-level detail arrays laid
/// out as in [`WaveletCoeffs::detail`]; missing details are zero.
pub fn coeffs_from_parts(
    grid: &DyadicGrid,
    base: ArrayView2<f64>,
    details: &[(usize, DetailKind, Array2<f64>)],
    levels: usize,
) -> Result<WaveletCoeffs> {
    if levels > grid.level() {
        return Err(Error::TooManyLevels {
            requested: levels,
            available: grid.level(),
        });
    }
    let coarse = grid.with_level(grid.level() - levels);
    check_shape("wavelet base", coarse.shape(), base.dim())?;
    let mut data = Array2::zeros(grid.shape());
    let stride = 1 << levels;
    data.slice_mut(s![..;stride, ..;stride]).assign(&base);
    for (level, kind, values) in details {
        if *level < coarse.level() || *level >= grid.level() {
            return Err(Error::TooManyLevels {
                requested: grid.level() - level,
                available: levels,
            });
        }
        let stride = 1 << (grid.level() - level - 1);
        let sub = data.slice_mut(s![..;stride, ..;stride]);
        let mut target = match kind {
            DetailKind::Space => sub.slice_move(s![1..;2, ..;2]),
            DetailKind::Time => sub.slice_move(s![..;2, 1..;2]),
            DetailKind::Diagonal => sub.slice_move(s![1..;2, 1..;2]),
        };
        check_shape("wavelet detail", target.dim(), values.dim())?;
        target.assign(values);
    }
    Ok(WaveletCoeffs {
        grid: *grid,
        levels,
        data,
    })
}

/// One-level synthesis with zero details: level-`j` nodal values to the
/// level-`j + 1` grid.
pub fn prolong(field: ArrayView2<f64>, grid: &DyadicGrid) -> Result<Array2<f64>> {
    check_shape("prolongation", grid.shape(), field.dim())?;
    let fine = grid.refine();
    let filters = Filters::for_grid(grid)?;
    let mut out = Array2::zeros(fine.shape());
    out.slice_mut(s![..;2, ..;2]).assign(&field);
    for lane in out.slice_mut(s![.., ..;2]).lanes_mut(Axis(0)) {
        filters.space.synthesize_lane(lane);
    }
    for lane in out.lanes_mut(Axis(1)) {
        filters.time.synthesize_lane(lane);
    }
    Ok(out)
}

/// Max-norm error of the level-`j` field measured on the level-`j + 1` grid:
/// `max |exact − prolong(field)|`, i.e. the largest wavelet coefficient of the
/// error at the next level.
pub fn error_estimate(
    field: ArrayView2<f64>,
    exact: impl Fn(f64, f64) -> f64,
    grid: &DyadicGrid,
) -> Result<f64> {
    let fine_grid = grid.refine();
    let fine = prolong(field, grid)?;
    let exact = fine_grid.sample(exact);
    Ok(fine
        .iter()
        .zip(exact.iter())
        .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent midpoint weights from the Lagrange basis formula.
    fn lagrange_midpoint(p: usize) -> Vec<f64> {
        let nodes: Vec<f64> = (0..p).map(|i| i as f64 - (p / 2) as f64 + 1.0).collect();
        (0..p)
            .map(|k| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, &xi)| (0.5 - xi) / (nodes[k] - xi))
                    .product()
            })
            .collect()
    }

    #[test]
    fn filter_weights() {
        assert_eq!(dd_filter(2).unwrap().midpoint_weights(), &[0.5, 0.5]);
        let expect4 = [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0];
        let expect6 = [
            3.0 / 256.0,
            -25.0 / 256.0,
            75.0 / 128.0,
            75.0 / 128.0,
            -25.0 / 256.0,
            3.0 / 256.0,
        ];
        for (w, e) in dd_filter(4).unwrap().midpoint_weights().iter().zip(expect4) {
            assert!((w - e).abs() < 1e-15);
        }
        for (w, e) in dd_filter(6).unwrap().midpoint_weights().iter().zip(expect6) {
            assert!((w - e).abs() < 1e-15);
        }
        for p in (2..=12).step_by(2) {
            let fb = dd_filter(p).unwrap();
            for (w, e) in fb.midpoint_weights().iter().zip(lagrange_midpoint(p)) {
                assert!((w - e).abs() < 1e-13);
            }
            assert_eq!(fb.boundary_weights().len(), p / 2 - 1);
            for row in fb.boundary_weights() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_unsupported_orders() {
        assert!(dd_filter(3).is_err());
        assert!(dd_filter(0).is_err());
        assert!(dd_filter(14).is_err());
    }

    #[test]
    fn boundary_rows_reproduce_polynomials() {
        let fb = dd_filter(8).unwrap();
        for (k, row) in fb.boundary_weights().iter().enumerate() {
            for deg in 0..8 {
                let pred: f64 = row.iter().enumerate().map(|(i, w)| w * (i as f64).powi(deg)).sum();
                let exact = (k as f64 + 0.5).powi(deg);
                assert!((pred - exact).abs() < 1e-9 * (1.0 + exact), "k={k} deg={deg}");
            }
        }
    }

    #[test]
    fn constant_field_has_zero_details() {
        let grid = DyadicGrid::unit(2, 6, 4).unwrap();
        let field = Array2::from_elem(grid.shape(), 2.5);
        let c = forward_transform(field.view(), &grid, 2).unwrap();
        assert_eq!(c.max_detail(), 0.0);
        assert!(c.base().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn finest_scaling_coefficients_are_samples() {
        let grid = DyadicGrid::unit(1, 4, 4).unwrap();
        let field = grid.sample(|x, t| (3.0 * x).sin() + t * t);
        let c = forward_transform(field.view(), &grid, 0).unwrap();
        assert_eq!(c.base(), field);
    }

    #[test]
    fn level_request_is_checked() {
        let grid = DyadicGrid::unit(1, 4, 4).unwrap();
        let field = Array2::zeros(grid.shape());
        assert!(forward_transform(field.view(), &grid, 2).is_err());
        let wrong = Array2::zeros((3, 3));
        assert!(forward_transform(wrong.view(), &grid, 1).is_err());
        assert!(prolong(wrong.view(), &grid).is_err());
    }

    #[test]
    fn prolong_keeps_coarse_values_bitwise() {
        let grid = DyadicGrid::unit(1, 6, 4).unwrap();
        let field = grid.sample(|x, t| (7.0 * x).cos() * (-t).exp());
        let fine = prolong(field.view(), &grid).unwrap();
        assert_eq!(fine.slice(s![..;2, ..;2]), field);
    }

    #[test]
    fn unit_detail_synthesizes_basis_function() {
        let grid = DyadicGrid::unit(1, 4, 4).unwrap();
        let coarse = grid.coarsen().unwrap();
        let base = Array2::zeros(coarse.shape());
        let mut d = Array2::zeros((coarse.nx() - 1, coarse.nt()));
        d[[3, 2]] = 1.0;
        let c = coeffs_from_parts(&grid, base.view(), &[(0, DetailKind::Space, d)], 1).unwrap();
        let f = backward_transform(&c, &grid).unwrap();
        // spatial part is a fine-level spike, temporal part the coarse cubic
        // DD scaling function centred on coarse time node 2
        for ((i, _), &v) in f.indexed_iter() {
            if i != 7 {
                assert_eq!(v, 0.0);
            }
        }
        let row = f.row(7);
        let expected = [0.0, -5.0 / 16.0, 0.0, 9.0 / 16.0, 1.0, 9.0 / 16.0, 0.0, -1.0 / 16.0, 0.0];
        for (k, e) in expected.iter().enumerate() {
            assert!((row[k] - e).abs() < 1e-15, "t index {k}");
        }
        assert!(row.iter().skip(expected.len()).all(|&v| v == 0.0));
    }
}
