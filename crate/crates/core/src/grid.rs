//! Tensor-product dyadic spacetime grids.
//!
//! A grid at level `j` with basis orders `(p_x, p_t)` has `2^(j+1)·p_x + 1`
//! uniformly spaced spatial nodes and `2^(j+1)·p_t + 1` temporal nodes, both
//! endpoints included. The unknown counts after Dirichlet/initial reduction are
//! `n = 2^(j+1)·p_x − 1` (spatial endpoints removed) and `s = 2^(j+1)·p_t`
//! (initial time removed). Level `j` nodes are the even-indexed nodes of level
//! `j + 1`.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_SPACE_ORDER: usize = 4;
pub const MIN_TIME_ORDER: usize = 2;
pub const MAX_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::DegenerateBounds { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Node `i` of a uniform partition into `intervals` pieces, computed from
    /// the integer index so that nested partitions share exact coordinates.
    fn node(&self, i: usize, intervals: usize) -> f64 {
        if i == intervals {
            self.hi
        } else {
            self.lo + self.width() * i as f64 / intervals as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadicGrid {
    level: usize,
    px: usize,
    pt: usize,
    space: Interval,
    time: Interval,
}

pub(crate) fn check_order(order: usize, min: usize) -> Result<()> {
    if order % 2 == 1 || order < min || order > MAX_ORDER {
        return Err(Error::InvalidOrder {
            order,
            min,
            max: MAX_ORDER,
        });
    }
    Ok(())
}

impl DyadicGrid {
    pub fn new(level: usize, px: usize, pt: usize, space: Interval, time: Interval) -> Result<Self> {
        check_order(px, MIN_SPACE_ORDER)?;
        check_order(pt, MIN_TIME_ORDER)?;
        Ok(Self {
            level,
            px,
            pt,
            space,
            time,
        })
    }

    /// Grid on the default domain `x ∈ [−1, 1]`, `t ∈ [0, 1]`.
    pub fn unit(level: usize, px: usize, pt: usize) -> Result<Self> {
        Self::new(
            level,
            px,
            pt,
            Interval { lo: -1.0, hi: 1.0 },
            Interval { lo: 0.0, hi: 1.0 },
        )
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn px(&self) -> usize {
        self.px
    }

    pub fn pt(&self) -> usize {
        self.pt
    }

    pub fn space(&self) -> Interval {
        self.space
    }

    pub fn time(&self) -> Interval {
        self.time
    }

    fn x_intervals(&self) -> usize {
        self.px << (self.level + 1)
    }

    fn t_intervals(&self) -> usize {
        self.pt << (self.level + 1)
    }

    /// Number of spatial nodes, endpoints included.
    pub fn nx(&self) -> usize {
        self.x_intervals() + 1
    }

    /// Number of temporal nodes, endpoints included.
    pub fn nt(&self) -> usize {
        self.t_intervals() + 1
    }

    /// Spatial unknowns per time level (interior nodes).
    pub fn n(&self) -> usize {
        self.nx() - 2
    }

    /// Temporal unknowns per spatial node (all times after the initial one).
    pub fn s(&self) -> usize {
        self.nt() - 1
    }

    /// Degrees of freedom of the reduced system, `n·s`.
    pub fn dof(&self) -> usize {
        self.n() * self.s()
    }

    pub fn dx(&self) -> f64 {
        self.space.width() / self.x_intervals() as f64
    }

    pub fn dt(&self) -> f64 {
        self.time.width() / self.t_intervals() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        debug_assert!(i < self.nx());
        self.space.node(i, self.x_intervals())
    }

    pub fn t(&self, k: usize) -> f64 {
        debug_assert!(k < self.nt());
        self.time.node(k, self.t_intervals())
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx()).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt()).map(|k| self.t(k)).collect()
    }

    /// Full-field shape `(nx, nt)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.nx(), self.nt())
    }

    /// Samples `f(x, t)` on every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> ndarray::Array2<f64> {
        let (xs, ts) = (self.xs(), self.ts());
        ndarray::Array2::from_shape_fn(self.shape(), |(i, k)| f(xs[i], ts[k]))
    }

    pub fn refine(&self) -> Self {
        Self {
            level: self.level + 1,
            ..*self
        }
    }

    pub fn coarsen(&self) -> Option<Self> {
        self.level.checked_sub(1).map(|level| Self { level, ..*self })
    }

    pub fn with_level(&self, level: usize) -> Self {
        Self { level, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_published_problem_sizes() {
        let g = DyadicGrid::unit(2, 6, 4).unwrap();
        assert_eq!((g.n(), g.s()), (47, 32));
        assert_eq!(DyadicGrid::unit(5, 6, 4).unwrap().dof(), 98_048);
        assert_eq!(DyadicGrid::unit(6, 8, 8).unwrap().dof(), 1_047_552);
        assert_eq!(DyadicGrid::unit(1, 6, 4).unwrap().dof(), 368);
    }

    #[test]
    fn rejects_bad_orders_and_bounds() {
        assert!(DyadicGrid::unit(2, 5, 4).is_err());
        assert!(DyadicGrid::unit(2, 2, 4).is_err());
        assert!(DyadicGrid::unit(2, 6, 3).is_err());
        assert!(DyadicGrid::unit(2, 6, 14).is_err());
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn refine_counts() {
        let g = DyadicGrid::unit(2, 6, 4).unwrap();
        assert_eq!(g.refine().n(), 95);
        let g0 = DyadicGrid::unit(0, 6, 4).unwrap();
        assert_eq!((g0.s(), g0.refine().s()), (8, 16));
        let g1 = DyadicGrid::unit(1, 6, 4).unwrap();
        assert_eq!(g1.refine().refine(), DyadicGrid::unit(3, 6, 4).unwrap());
    }

    #[test]
    fn nodes_nest_exactly() {
        let g = DyadicGrid::unit(3, 6, 4).unwrap();
        let f = g.refine();
        for i in 0..g.nx() {
            assert_eq!(g.x(i), f.x(2 * i));
        }
        for k in 0..g.nt() {
            assert_eq!(g.t(k), f.t(2 * k));
        }
        assert_eq!(g.x(0), -1.0);
        assert_eq!(g.x(g.nx() - 1), 1.0);
        assert_eq!(g.t(g.nt() - 1), 1.0);
    }
}
