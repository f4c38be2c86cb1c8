//! Finite-difference discretization of the Laplace-Beltrami Dirichlet energy
//! on a tensor grid over a metric chart.
//!
//! The stiffness matrix is assembled in flux form: each grid edge carries the
//! weight (g^dd sqrt|g|)(edge midpoint) * transverse_width / edge_length, so
//! u^T K u approximates the Dirichlet energy of the bilinearly interpolated
//! field and K is symmetric by construction. Nondiagonal metrics add a
//! cell-centered cross term. The mass matrix is lumped: node volume
//! sqrt|g|(node) * h1 * h2, halved along open-edge rows so the trace is the
//! trapezoid approximation of the chart volume.
//!
//! Coordinate poles (sphere, geodesic polar charts) stay in the grid; the
//! degenerate metric coefficient is clamped from below at half a grid
//! spacing, which couples the pole row tightly (the nodes represent one
//! point) while keeping every matrix entry finite.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manifold::{AxisKind, MetricChart};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, DiagMatrix};

/// Stiffness and lumped mass on the full grid of a chart.
#[derive(Debug, Clone)]
pub struct DiscreteOperators<T> {
    pub grid: Grid<T>,
    pub stiffness: CsrMatrix<T>,
    pub mass: DiagMatrix<T>,
    /// Relative clamp applied to pole-degenerate metric coefficients during
    /// assembly (half a grid spacing of the pole axis).
    pub pole_floor: T,
}

/// Dirichlet restriction of the operators to a node support, with the
/// support in canonical (translation independent) order.
#[derive(Debug, Clone)]
pub struct RestrictedOperators<T> {
    pub stiffness: CsrMatrix<T>,
    pub mass: DiagMatrix<T>,
    /// Local index -> global node index.
    pub nodes: Vec<usize>,
}

fn pole_floor_for<T: Scalar>(chart: &MetricChart<T>, grid: &Grid<T>) -> T {
    let mut floor = T::of(1e-12);
    let spacings = [grid.axis1.spacing, grid.axis2.spacing];
    for (axis, h) in chart.axes.iter().zip(spacings) {
        if let AxisKind::Open { start_pole, end_pole } = axis {
            if *start_pole || *end_pole {
                floor = floor.max(T::of(0.5) * h);
            }
        }
    }
    floor
}

/// Lumped node volumes: sqrt|g| at the node times the cell area, halved for
/// each open axis end the node sits on. Pole rows use the clamped metric.
pub fn node_volumes<T: Scalar>(chart: &MetricChart<T>, grid: &Grid<T>) -> Vec<T> {
    let floor = pole_floor_for(chart, grid);
    let (n1, n2) = (grid.axis1.n, grid.axis2.n);
    let cell = grid.axis1.spacing * grid.axis2.spacing;
    let half = T::of(0.5);
    let mut vols = Vec::with_capacity(grid.len());
    for i in 0..n1 {
        let f1 = if !grid.axis1.periodic && (i == 0 || i == n1 - 1) { half } else { T::one() };
        for j in 0..n2 {
            let f2 = if !grid.axis2.periodic && (j == 0 || j == n2 - 1) { half } else { T::one() };
            let t = chart.metric_at_clamped(grid.pos(i, j), floor);
            vols.push(t.sqrt_det * cell * f1 * f2);
        }
    }
    vols
}

/// Assembles stiffness and mass on an n1 x n2 grid over the chart.
pub fn assemble_operators<T: Scalar>(
    chart: &MetricChart<T>,
    n: [usize; 2],
) -> Result<DiscreteOperators<T>> {
    let grid = chart.grid(n)?;
    let floor = pole_floor_for(chart, &grid);
    let (n1, n2) = (grid.axis1.n, grid.axis2.n);
    let (h1, h2) = (grid.axis1.spacing, grid.axis2.spacing);
    let half = T::of(0.5);

    // Four triplets per edge, plus cell cross terms when the metric has
    // off-diagonal components.
    let mut triplets: Vec<(usize, usize, T)> = Vec::with_capacity(8 * grid.len());

    // Edges along axis 1.
    let e1 = if grid.axis1.periodic { n1 } else { n1 - 1 };
    for i in 0..e1 {
        for j in 0..n2 {
            let a = grid.idx(i, j);
            let b = grid.idx((i + 1) % n1, j);
            let mut x = grid.pos(i, j);
            x[0] = x[0] + half * h1;
            let t = chart.metric_at_clamped(x, floor);
            let transverse = if !grid.axis2.periodic && (j == 0 || j == n2 - 1) {
                half * h2
            } else {
                h2
            };
            let w = t.inv[0] * t.sqrt_det * transverse / h1;
            triplets.push((a, a, w));
            triplets.push((b, b, w));
            triplets.push((a, b, -w));
            triplets.push((b, a, -w));
        }
    }

    // Edges along axis 2.
    let e2 = if grid.axis2.periodic { n2 } else { n2 - 1 };
    for i in 0..n1 {
        let transverse = if !grid.axis1.periodic && (i == 0 || i == n1 - 1) {
            half * h1
        } else {
            h1
        };
        for j in 0..e2 {
            let a = grid.idx(i, j);
            let b = grid.idx(i, (j + 1) % n2);
            let mut x = grid.pos(i, j);
            x[1] = x[1] + half * h2;
            let t = chart.metric_at_clamped(x, floor);
            let w = t.inv[2] * t.sqrt_det * transverse / h2;
            triplets.push((a, a, w));
            triplets.push((b, b, w));
            triplets.push((a, b, -w));
            triplets.push((b, a, -w));
        }
    }

    // Cross term 2 g^12 (d1 u)(d2 u), one-point quadrature per cell with
    // cell-averaged differences. Zero for all builtin charts.
    if !chart.is_diagonal() {
        let c1 = if grid.axis1.periodic { n1 } else { n1 - 1 };
        let c2 = if grid.axis2.periodic { n2 } else { n2 - 1 };
        for i in 0..c1 {
            for j in 0..c2 {
                let corners = [
                    grid.idx(i, j),
                    grid.idx((i + 1) % n1, j),
                    grid.idx(i, (j + 1) % n2),
                    grid.idx((i + 1) % n1, (j + 1) % n2),
                ];
                // d1 u ~ (u_b + u_d - u_a - u_c) / (2 h1), d2 u likewise; the
                // energy s * p(u) q(u) with s = g^12 sqrt|g| / 2 follows from
                // 2 g^12 sqrt|g| h1 h2 / (2 h1 * 2 h2).
                let p = [-T::one(), T::one(), -T::one(), T::one()];
                let q = [-T::one(), -T::one(), T::one(), T::one()];
                let mut x = grid.pos(i, j);
                x[0] = x[0] + half * h1;
                x[1] = x[1] + half * h2;
                let t = chart.metric_at_clamped(x, floor);
                let s = t.inv[1] * t.sqrt_det * half;
                for (ca, (pa, qa)) in corners.iter().zip(p.iter().zip(q.iter())) {
                    for (cb, (pb, qb)) in corners.iter().zip(p.iter().zip(q.iter())) {
                        let v = s * half * (*pa * *qb + *qa * *pb);
                        if v != T::zero() {
                            triplets.push((*ca, *cb, v));
                        }
                    }
                }
            }
        }
    }

    let stiffness = CsrMatrix::from_triplets(grid.len(), triplets);
    let mass = DiagMatrix::new(node_volumes(chart, &grid));
    Ok(DiscreteOperators { grid, stiffness, mass, pole_floor: floor })
}

impl<T: Scalar> DiscreteOperators<T> {
    #[inline]
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.grid.len() == 0
    }

    /// u^T K u / u^T M u over the full grid.
    pub fn rayleigh(&self, u: &[T]) -> T {
        self.stiffness.quadratic_form(u) / self.mass.quadratic_form(u)
    }

    /// Dirichlet restriction to a support (set of node indices, any order,
    /// no duplicates). The rows keep their full diagonal, so the restricted
    /// quadratic form equals the energy of the zero-extended field.
    ///
    /// Local ordering is canonical: node keys are grid offsets relative to
    /// an anchor chosen from the support's own occupied rows and columns, so
    /// translates of a support on a translation-invariant chart produce
    /// bitwise identical matrices.
    pub fn restrict(&self, support: &[usize]) -> Result<RestrictedOperators<T>> {
        if support.is_empty() {
            return Err(Error::Dimension("cannot restrict to an empty support".into()));
        }
        let nodes = canonical_order(&self.grid, support);
        let mut local = vec![usize::MAX; self.grid.len()];
        for (k, &g) in nodes.iter().enumerate() {
            if local[g] != usize::MAX {
                return Err(Error::Dimension(format!("support node {g} repeated")));
            }
            local[g] = k;
        }
        let mut triplets = Vec::new();
        for (k, &g) in nodes.iter().enumerate() {
            for (c, v) in self.stiffness.row(g) {
                let lc = local[c];
                if lc != usize::MAX {
                    triplets.push((k, lc, v));
                }
            }
        }
        let stiffness = CsrMatrix::from_triplets(nodes.len(), triplets);
        let mass = DiagMatrix::new(nodes.iter().map(|&g| self.mass.diag[g]).collect());
        Ok(RestrictedOperators { stiffness, mass, nodes })
    }
}

impl<T: Scalar> RestrictedOperators<T> {
    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// u^T K u / u^T M u on the support.
    pub fn rayleigh(&self, u: &[T]) -> T {
        self.stiffness.quadratic_form(u) / self.mass.quadratic_form(u)
    }

    /// Zero-extends a local field to the full grid.
    pub fn scatter(&self, local: &[T], full_len: usize) -> Vec<T> {
        debug_assert_eq!(local.len(), self.nodes.len());
        let mut out = vec![T::zero(); full_len];
        for (&g, &v) in self.nodes.iter().zip(local.iter()) {
            out[g] = v;
        }
        out
    }
}

/// Orders support nodes by grid offset relative to a canonical anchor.
///
/// On periodic axes the anchor coordinate is the start of the occupied arc
/// that follows the longest unoccupied gap (ties resolved to the smallest
/// index); on open axes it is zero. Supports that wrap a whole periodic axis
/// have no translation-independent anchor on that axis and fall back to
/// index order there.
pub(crate) fn canonical_order<T: Scalar>(grid: &Grid<T>, support: &[usize]) -> Vec<usize> {
    let (n1, n2) = (grid.axis1.n, grid.axis2.n);
    let mut occ1 = vec![false; n1];
    let mut occ2 = vec![false; n2];
    for &s in support {
        let (i, j) = grid.ij(s);
        occ1[i] = true;
        occ2[j] = true;
    }
    let o1 = if grid.axis1.periodic { arc_origin(&occ1) } else { 0 };
    let o2 = if grid.axis2.periodic { arc_origin(&occ2) } else { 0 };
    let mut nodes = support.to_vec();
    nodes.sort_unstable_by_key(|&s| {
        let (i, j) = grid.ij(s);
        ((i + n1 - o1) % n1, (j + n2 - o2) % n2)
    });
    nodes
}

/// Start of the occupied arc after the longest cyclic gap; 0 when the axis
/// is fully occupied or fully empty.
fn arc_origin(occ: &[bool]) -> usize {
    let n = occ.len();
    let mut best_gap = 0usize;
    let mut best_origin = 0usize;
    let mut found = false;
    for i in 0..n {
        if occ[i] && !occ[(i + n - 1) % n] {
            let mut gap = 0;
            let mut k = (i + n - 1) % n;
            while !occ[k] {
                gap += 1;
                k = (k + n - 1) % n;
            }
            if !found || gap > best_gap {
                best_gap = gap;
                best_origin = i;
                found = true;
            }
        }
    }
    best_origin
}

/// Per-node squared gradient norm |grad u|^2 = g^ab (d_a u)(d_b u), central
/// differences inside, one-sided at open axis ends, wrapped on periodic
/// axes.
pub fn gradient_norm_sq_field<T: Scalar>(
    chart: &MetricChart<T>,
    grid: &Grid<T>,
    u: &[T],
) -> Vec<T> {
    debug_assert_eq!(u.len(), grid.len());
    let floor = pole_floor_for(chart, grid);
    let (n1, n2) = (grid.axis1.n, grid.axis2.n);
    let (h1, h2) = (grid.axis1.spacing, grid.axis2.spacing);
    let two = T::of(2.0);
    let diff = |lo: Option<usize>, hi: Option<usize>, at: usize, h: T| -> T {
        match (lo, hi) {
            (Some(l), Some(r)) => (u[r] - u[l]) / (two * h),
            (None, Some(r)) => (u[r] - u[at]) / h,
            (Some(l), None) => (u[at] - u[l]) / h,
            (None, None) => T::zero(),
        }
    };
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..n1 {
        for j in 0..n2 {
            let at = grid.idx(i, j);
            let d1 = diff(
                grid.neighbor(i, j, -1, 0).map(|(a, b)| grid.idx(a, b)),
                grid.neighbor(i, j, 1, 0).map(|(a, b)| grid.idx(a, b)),
                at,
                h1,
            );
            let d2 = diff(
                grid.neighbor(i, j, 0, -1).map(|(a, b)| grid.idx(a, b)),
                grid.neighbor(i, j, 0, 1).map(|(a, b)| grid.idx(a, b)),
                at,
                h2,
            );
            let t = chart.metric_at_clamped(grid.pos(i, j), floor);
            out.push(t.conorm_sq([d1, d2]));
        }
    }
    out
}

/// Distance in grid cells from a node to the nearest truncation end (an
/// open axis end that is not a pole). usize::MAX when the chart has none.
pub fn truncation_margin<T: Scalar>(
    chart: &MetricChart<T>,
    grid: &Grid<T>,
    idx: usize,
) -> usize {
    let (i, j) = grid.ij(idx);
    let mut margin = usize::MAX;
    let coords = [i, j];
    let ns = [grid.axis1.n, grid.axis2.n];
    for a in 0..2 {
        if let AxisKind::Open { start_pole, end_pole } = chart.axes[a] {
            if !start_pole {
                margin = margin.min(coords[a]);
            }
            if !end_pole {
                margin = margin.min(ns[a] - 1 - coords[a]);
            }
        }
    }
    margin
}
