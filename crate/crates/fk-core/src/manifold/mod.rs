//! Metric charts: rectangles in R^2 carrying a Riemannian metric tensor.
//!
//! A chart is the whole geometric input of the solver stack. Builtins cover
//! the flat torus, the round sphere in colatitude/longitude coordinates and
//! the catenoid-type surface of revolution in (angle, height) coordinates;
//! arbitrary geometries enter through per-node metric samples with bilinear
//! interpolation.
//!
//! Degenerate directions (sphere poles, centers of geodesic polar charts)
//! are kept in the chart and resolved at assembly time by clamping the
//! degenerate metric coefficient from below at a grid-dependent floor.

mod ball;
mod distance;
mod polar;

pub use ball::{ball_radius_for_volume, geodesic_ball};
pub use distance::{geodesic_distance_field, geodesic_distance_to_set, DistanceField};
pub use polar::{catenoid_polar_chart, PolarBall, PolarTarget};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Scalar;

/// Symmetric 2x2 metric at a point together with derived quantities.
#[derive(Debug, Clone, Copy)]
pub struct MetricTensor<T> {
    /// Components [g11, g12, g22].
    pub g: [T; 3],
    /// Inverse components [g^11, g^12, g^22].
    pub inv: [T; 3],
    /// sqrt(det g), the area density.
    pub sqrt_det: T,
}

impl<T: Scalar> MetricTensor<T> {
    /// Builds the tensor, failing when the components are not positive
    /// definite.
    pub fn new(g11: T, g12: T, g22: T) -> Option<Self> {
        let det = g11 * g22 - g12 * g12;
        if !(g11 > T::zero() && det > T::zero()) {
            return None;
        }
        let sqrt_det = det.sqrt();
        Some(Self {
            g: [g11, g12, g22],
            inv: [g22 / det, -g12 / det, g11 / det],
            sqrt_det,
        })
    }

    /// Squared length of a tangent vector v.
    #[inline]
    pub fn norm_sq(&self, v: [T; 2]) -> T {
        self.g[0] * v[0] * v[0] + T::of(2.0) * self.g[1] * v[0] * v[1] + self.g[2] * v[1] * v[1]
    }

    /// Length of a tangent vector v.
    #[inline]
    pub fn norm(&self, v: [T; 2]) -> T {
        self.norm_sq(v).sqrt()
    }

    /// Squared norm of a covector (gradient components) under the inverse
    /// metric.
    #[inline]
    pub fn conorm_sq(&self, d: [T; 2]) -> T {
        self.inv[0] * d[0] * d[0] + T::of(2.0) * self.inv[1] * d[0] * d[1] + self.inv[2] * d[1] * d[1]
    }
}

/// Behavior of one chart axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// Identified endpoints, nodes wrap.
    Periodic,
    /// Open interval ends. A pole end is a coordinate degeneracy that still
    /// belongs to the surface (supports may contain it); a non-pole end is a
    /// truncation boundary where fields are forced to zero.
    Open { start_pole: bool, end_pole: bool },
}

impl AxisKind {
    #[inline]
    pub fn periodic(&self) -> bool {
        matches!(self, AxisKind::Periodic)
    }
}

/// Per-node metric samples with bilinear interpolation.
#[derive(Debug, Clone)]
pub struct SampledMetric<T> {
    n: [usize; 2],
    g11: Vec<T>,
    g12: Vec<T>,
    g22: Vec<T>,
}

#[derive(Debug, Clone)]
enum ChartKind<T> {
    FlatTorus,
    Sphere { radius: T },
    Catenoid { neck: T },
    Sampled(SampledMetric<T>),
}

/// A coordinate rectangle with a metric.
#[derive(Debug, Clone)]
pub struct MetricChart<T> {
    pub name: String,
    /// [[a1, b1], [a2, b2]].
    pub domain: [[T; 2]; 2],
    pub axes: [AxisKind; 2],
    kind: ChartKind<T>,
    /// Multiplies every metric component; used for scaling experiments.
    conformal_factor: T,
}

impl<T: Scalar> MetricChart<T> {
    /// Flat torus of side lengths l1 x l2, identity metric, both axes wrap.
    pub fn flat_torus(l1: T, l2: T) -> Result<Self> {
        if !(l1 > T::zero() && l2 > T::zero()) {
            return Err(Error::ChartSpec("torus side lengths must be positive".into()));
        }
        Ok(Self {
            name: "flat-torus".into(),
            domain: [[T::zero(), l1], [T::zero(), l2]],
            axes: [AxisKind::Periodic, AxisKind::Periodic],
            kind: ChartKind::FlatTorus,
            conformal_factor: T::one(),
        })
    }

    /// Round sphere of the given radius in (colatitude, longitude)
    /// coordinates on [0, pi] x [0, 2 pi]; both colatitude ends are poles.
    pub fn sphere(radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::ChartSpec("sphere radius must be positive".into()));
        }
        let pi = T::of(std::f64::consts::PI);
        Ok(Self {
            name: "sphere".into(),
            domain: [[T::zero(), pi], [T::zero(), pi + pi]],
            axes: [
                AxisKind::Open { start_pole: true, end_pole: true },
                AxisKind::Periodic,
            ],
            kind: ChartKind::Sphere { radius },
            conformal_factor: T::one(),
        })
    }

    /// Catenoid-type surface of revolution, metric diag(t^2 + neck^2, 1) in
    /// (angle, height) coordinates on [0, 2 pi] x [-t_max, t_max]. The height
    /// ends are truncation boundaries.
    pub fn catenoid(neck: T, t_max: T) -> Result<Self> {
        if !(neck > T::zero() && t_max > T::zero()) {
            return Err(Error::ChartSpec("catenoid neck and t_max must be positive".into()));
        }
        let two_pi = T::of(2.0 * std::f64::consts::PI);
        Ok(Self {
            name: "catenoid".into(),
            domain: [[T::zero(), two_pi], [-t_max, t_max]],
            axes: [
                AxisKind::Periodic,
                AxisKind::Open { start_pole: false, end_pole: false },
            ],
            kind: ChartKind::Catenoid { neck },
            conformal_factor: T::one(),
        })
    }

    /// Rectangular window of the catenoid chart, all edges truncations.
    /// Useful for local solves far from the neck where the full angular
    /// range would waste resolution.
    pub fn catenoid_window(neck: T, theta: [T; 2], t: [T; 2]) -> Result<Self> {
        if !(neck > T::zero() && theta[1] > theta[0] && t[1] > t[0]) {
            return Err(Error::ChartSpec("catenoid window bounds out of order".into()));
        }
        Ok(Self {
            name: "catenoid-window".into(),
            domain: [theta, t],
            axes: [
                AxisKind::Open { start_pole: false, end_pole: false },
                AxisKind::Open { start_pole: false, end_pole: false },
            ],
            kind: ChartKind::Catenoid { neck },
            conformal_factor: T::one(),
        })
    }

    /// Chart from per-node metric samples laid out row-major (i * n2 + j)
    /// over the given domain. Node placement matches [`Grid`]: periodic axes
    /// exclude the right endpoint. Every sample must be positive definite.
    pub fn from_samples(
        name: impl Into<String>,
        domain: [[T; 2]; 2],
        axes: [AxisKind; 2],
        n: [usize; 2],
        g11: Vec<T>,
        g12: Vec<T>,
        g22: Vec<T>,
    ) -> Result<Self> {
        let len = n[0] * n[1];
        if g11.len() != len || g12.len() != len || g22.len() != len {
            return Err(Error::Dimension(format!(
                "metric sample arrays must have length {len}, got {}/{}/{}",
                g11.len(),
                g12.len(),
                g22.len()
            )));
        }
        for i in 0..n[0] {
            for j in 0..n[1] {
                let k = i * n[1] + j;
                if MetricTensor::new(g11[k], g12[k], g22[k]).is_none() {
                    return Err(Error::NonSpdSample { i, j });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            domain,
            axes,
            kind: ChartKind::Sampled(SampledMetric { n, g11, g12, g22 }),
            conformal_factor: T::one(),
        })
    }

    /// Same chart with the metric multiplied by `factor` (dimensionless,
    /// positive). Lengths scale by sqrt(factor), areas by factor.
    pub fn scaled(mut self, factor: T) -> Result<Self> {
        if !(factor > T::zero()) {
            return Err(Error::ChartSpec("scale factor must be positive".into()));
        }
        self.conformal_factor = self.conformal_factor * factor;
        self.name = format!("{}-scaled", self.name);
        Ok(self)
    }

    #[inline]
    pub fn periodic(&self) -> [bool; 2] {
        [self.axes[0].periodic(), self.axes[1].periodic()]
    }

    /// True when the metric is diagonal everywhere (all builtins are).
    pub fn is_diagonal(&self) -> bool {
        match &self.kind {
            ChartKind::Sampled(s) => s.g12.iter().all(|v| *v == T::zero()),
            _ => true,
        }
    }

    /// True when some axis end is a coordinate pole.
    pub fn has_pole(&self) -> bool {
        self.axes.iter().any(|a| matches!(a, AxisKind::Open { start_pole, end_pole } if *start_pole || *end_pole))
    }

    /// Grid with n = [n1, n2] nodes over this chart's domain.
    pub fn grid(&self, n: [usize; 2]) -> Result<Grid<T>> {
        Grid::new(self.domain, n, self.periodic())
    }

    /// Metric at a chart point. Degenerate coefficients (sphere poles) are
    /// floored at a tiny absolute value so the tensor stays invertible; use
    /// [`Self::metric_at_clamped`] with a grid-scale floor for assembly.
    #[inline]
    pub fn metric_at(&self, x: [T; 2]) -> MetricTensor<T> {
        self.metric_at_clamped(x, T::of(1e-12))
    }

    /// Metric at a chart point with pole-degenerate coefficients clamped so
    /// the squashed direction keeps at least the given relative floor
    /// (`sin(theta)` is replaced by `max(sin(theta), floor)` on the sphere,
    /// and analogously for sampled polar charts built by this crate).
    pub fn metric_at_clamped(&self, x: [T; 2], floor: T) -> MetricTensor<T> {
        let c = self.conformal_factor;
        let t = match &self.kind {
            ChartKind::FlatTorus => MetricTensor::new(c, T::zero(), c),
            ChartKind::Sphere { radius } => {
                let r2 = *radius * *radius;
                let s = x[0].sin().abs().max(floor);
                MetricTensor::new(c * r2, T::zero(), c * r2 * s * s)
            }
            ChartKind::Catenoid { neck } => {
                let h = x[1] * x[1] + *neck * *neck;
                MetricTensor::new(c * h, T::zero(), c)
            }
            ChartKind::Sampled(s) => {
                let [g11, g12, g22] = self.interpolate(s, x, floor);
                MetricTensor::new(c * g11, c * g12, c * g22)
            }
        };
        t.expect("chart metric must be positive definite after clamping")
    }

    /// Bilinear interpolation of sampled components. Near a pole end the
    /// degenerate coefficient is floored relative to the largest sample on
    /// the chart row closest to the pole times `floor`.
    fn interpolate(&self, s: &SampledMetric<T>, x: [T; 2], floor: T) -> [T; 3] {
        let nodes = |axis: usize| -> (usize, usize, T) {
            let n = s.n[axis];
            let (a, b) = (self.domain[axis][0], self.domain[axis][1]);
            let periodic = self.axes[axis].periodic();
            let count = if periodic { n } else { n - 1 };
            let h = (b - a) / T::from_usize(count).unwrap();
            let mut u = (x[axis] - a) / h;
            let max = T::from_usize(count).unwrap();
            if u < T::zero() {
                u = if periodic { u + max } else { T::zero() };
            }
            if u >= max {
                u = if periodic { u - max } else { max };
            }
            let i0 = u.floor().to_usize().unwrap_or(0).min(if periodic { n - 1 } else { n - 2 });
            let frac = u - T::from_usize(i0).unwrap();
            let i1 = if periodic { (i0 + 1) % n } else { (i0 + 1).min(n - 1) };
            (i0, i1, frac)
        };
        let (i0, i1, fi) = nodes(0);
        let (j0, j1, fj) = nodes(1);
        let lerp2 = |v: &Vec<T>| -> T {
            let one = T::one();
            let v00 = v[i0 * s.n[1] + j0];
            let v01 = v[i0 * s.n[1] + j1];
            let v10 = v[i1 * s.n[1] + j0];
            let v11 = v[i1 * s.n[1] + j1];
            (one - fi) * ((one - fj) * v00 + fj * v01) + fi * ((one - fj) * v10 + fj * v11)
        };
        let mut g11 = lerp2(&s.g11);
        let g12 = lerp2(&s.g12);
        let mut g22 = lerp2(&s.g22);
        // Pole flooring: keep the squashed coefficient away from zero, scaled
        // by the non-degenerate directions on the same row.
        if let AxisKind::Open { start_pole, end_pole } = self.axes[0] {
            if start_pole || end_pole {
                g22 = g22.max(floor * floor * g11.max(T::of(1e-30)));
            }
        }
        if let AxisKind::Open { start_pole, end_pole } = self.axes[1] {
            if start_pole || end_pole {
                g11 = g11.max(floor * floor * g22.max(T::of(1e-30)));
            }
        }
        [g11, g12, g22]
    }

    /// Coarse scale below which geodesic balls are embedded: half the
    /// shortest closed loop for the builtins, the smallest coordinate extent
    /// otherwise. Diagnostics use a fraction of this as their largest radius.
    pub fn injectivity_scale(&self) -> T {
        let sqrt_c = self.conformal_factor.sqrt();
        match &self.kind {
            ChartKind::FlatTorus => {
                let l1 = self.domain[0][1] - self.domain[0][0];
                let l2 = self.domain[1][1] - self.domain[1][0];
                sqrt_c * T::of(0.5) * l1.min(l2)
            }
            ChartKind::Sphere { radius } => sqrt_c * T::of(std::f64::consts::PI) * *radius,
            ChartKind::Catenoid { neck } => sqrt_c * T::of(std::f64::consts::PI) * *neck,
            ChartKind::Sampled(_) => {
                let e1 = self.domain[0][1] - self.domain[0][0];
                let e2 = self.domain[1][1] - self.domain[1][0];
                sqrt_c * e1.min(e2)
            }
        }
    }
}

/// Serializable chart description, the JSON-facing view of a chart.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartSpec {
    FlatTorus {
        l1: f64,
        l2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Sphere {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Catenoid {
        neck: f64,
        t_max: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    /// Row-major per-node samples of the metric components.
    Sampled {
        domain: [[f64; 2]; 2],
        periodic: [bool; 2],
        n1: usize,
        n2: usize,
        g11: Vec<f64>,
        g12: Vec<f64>,
        g22: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

impl ChartSpec {
    /// Builds the runtime chart, casting samples into the target scalar.
    pub fn build<T: Scalar>(&self) -> Result<MetricChart<T>> {
        let named = |mut chart: MetricChart<T>, name: &Option<String>| {
            if let Some(n) = name {
                chart.name = n.clone();
            }
            chart
        };
        match self {
            ChartSpec::FlatTorus { l1, l2, name } => {
                Ok(named(MetricChart::flat_torus(T::of(*l1), T::of(*l2))?, name))
            }
            ChartSpec::Sphere { radius, name } => {
                Ok(named(MetricChart::sphere(T::of(*radius))?, name))
            }
            ChartSpec::Catenoid { neck, t_max, name } => {
                Ok(named(MetricChart::catenoid(T::of(*neck), T::of(*t_max))?, name))
            }
            ChartSpec::Sampled { domain, periodic, n1, n2, g11, g12, g22, name } => {
                let cast = |v: &Vec<f64>| v.iter().map(|x| T::of(*x)).collect::<Vec<T>>();
                let dom = [
                    [T::of(domain[0][0]), T::of(domain[0][1])],
                    [T::of(domain[1][0]), T::of(domain[1][1])],
                ];
                let axis = |p: bool| {
                    if p {
                        AxisKind::Periodic
                    } else {
                        AxisKind::Open { start_pole: false, end_pole: false }
                    }
                };
                let chart = MetricChart::from_samples(
                    name.clone().unwrap_or_else(|| "sampled".into()),
                    dom,
                    [axis(periodic[0]), axis(periodic[1])],
                    [*n1, *n2],
                    cast(g11),
                    cast(g12),
                    cast(g22),
                )?;
                Ok(chart)
            }
        }
    }
}
