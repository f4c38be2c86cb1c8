//! Uniform tensor grid over a chart rectangle.
//!
//! Node layout: axis 1 index `i` in `0..n1`, axis 2 index `j` in `0..n2`,
//! linear index `i * n2 + j`. A periodic axis places n nodes on [a, b) with
//! spacing (b - a)/n and wraps; a non-periodic axis places n nodes on [a, b]
//! inclusive with spacing (b - a)/(n - 1), so the extreme rows sit exactly on
//! the domain edge.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis<T> {
    pub n: usize,
    pub origin: T,
    pub spacing: T,
    pub periodic: bool,
}

impl<T: Scalar> GridAxis<T> {
    fn new(a: T, b: T, n: usize, periodic: bool) -> Result<Self> {
        if n < 4 {
            return Err(Error::GridTooCoarse(format!("axis needs >= 4 nodes, got {n}")));
        }
        let len = b - a;
        let spacing = if periodic {
            len / T::from_usize(n).unwrap()
        } else {
            len / T::from_usize(n - 1).unwrap()
        };
        Ok(Self { n, origin: a, spacing, periodic })
    }

    /// Minimal signed coordinate difference x - y respecting wrap.
    pub fn wrapped_delta(&self, x: T, y: T) -> T {
        let mut d = x - y;
        if self.periodic {
            let period = self.spacing * T::from_usize(self.n).unwrap();
            let half = period * T::of(0.5);
            while d > half {
                d -= period;
            }
            while d < -half {
                d += period;
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub axis1: GridAxis<T>,
    pub axis2: GridAxis<T>,
}

impl<T: Scalar> Grid<T> {
    /// Grid over the rectangle [a1,b1] x [a2,b2] with the given node counts.
    pub fn new(domain: [[T; 2]; 2], n: [usize; 2], periodic: [bool; 2]) -> Result<Self> {
        Ok(Self {
            axis1: GridAxis::new(domain[0][0], domain[0][1], n[0], periodic[0])?,
            axis2: GridAxis::new(domain[1][0], domain[1][1], n[1], periodic[1])?,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.axis1.n * self.axis2.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.axis1.n && j < self.axis2.n);
        i * self.axis2.n + j
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx / self.axis2.n, idx % self.axis2.n)
    }

    #[inline]
    pub fn pos(&self, i: usize, j: usize) -> [T; 2] {
        [
            self.axis1.origin + self.axis1.spacing * T::from_usize(i).unwrap(),
            self.axis2.origin + self.axis2.spacing * T::from_usize(j).unwrap(),
        ]
    }

    #[inline]
    pub fn pos_of(&self, idx: usize) -> [T; 2] {
        let (i, j) = self.ij(idx);
        self.pos(i, j)
    }

    /// Neighbor at offset (di, dj), wrapping periodic axes. None when the
    /// offset leaves a non-periodic axis range.
    pub fn neighbor(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<(usize, usize)> {
        let ni = Self::step(i, di, self.axis1.n, self.axis1.periodic)?;
        let nj = Self::step(j, dj, self.axis2.n, self.axis2.periodic)?;
        Some((ni, nj))
    }

    fn step(i: usize, di: isize, n: usize, periodic: bool) -> Option<usize> {
        let raw = i as isize + di;
        if periodic {
            Some(raw.rem_euclid(n as isize) as usize)
        } else if raw < 0 || raw >= n as isize {
            None
        } else {
            Some(raw as usize)
        }
    }

    /// True when the node lies on the extreme row of a non-periodic axis.
    pub fn on_open_edge(&self, i: usize, j: usize) -> bool {
        (!self.axis1.periodic && (i == 0 || i == self.axis1.n - 1))
            || (!self.axis2.periodic && (j == 0 || j == self.axis2.n - 1))
    }

    /// Distance, in whole rows, from the node to the nearest extreme row of a
    /// non-periodic axis. usize::MAX when both axes are periodic.
    pub fn open_edge_margin(&self, i: usize, j: usize) -> usize {
        let mut margin = usize::MAX;
        if !self.axis1.periodic {
            margin = margin.min(i).min(self.axis1.n - 1 - i);
        }
        if !self.axis2.periodic {
            margin = margin.min(j).min(self.axis2.n - 1 - j);
        }
        margin
    }

    /// Minimal signed coordinate offset from node `b` to node `a` per axis.
    pub fn wrapped_offset(&self, a: usize, b: usize) -> [T; 2] {
        let pa = self.pos_of(a);
        let pb = self.pos_of(b);
        [
            self.axis1.wrapped_delta(pa[0], pb[0]),
            self.axis2.wrapped_delta(pa[1], pb[1]),
        ]
    }

    /// Node nearest to a chart position.
    pub fn nearest_node(&self, x: [T; 2]) -> usize {
        let clamp = |axis: &GridAxis<T>, v: T| -> usize {
            let raw = ((v - axis.origin) / axis.spacing).round();
            let raw = raw.to_isize().unwrap_or(0);
            if axis.periodic {
                raw.rem_euclid(axis.n as isize) as usize
            } else {
                raw.clamp(0, axis.n as isize - 1) as usize
            }
        };
        self.idx(clamp(&self.axis1, x[0]), clamp(&self.axis2, x[1]))
    }
}
