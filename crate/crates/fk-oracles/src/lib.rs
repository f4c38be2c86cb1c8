//! Reference values computed by deliberately simple, self-contained numerics.
//!
//! Everything in this crate is independent of the main solver stack: the disk
//! ground mode comes from shooting on the radial ODE with a fixed-step RK4
//! integrator, and the catenoid helpers are plain midpoint quadrature. Tests
//! elsewhere compare solver output against these values, so this crate must
//! stay free of any dependency on the crates it is used to check.

/// Radial profile of the first Dirichlet mode of the unit-coefficient disk.
///
/// The profile solves u'' + u'/x + u = 0 with u(0) = 1, u'(0) = 0; its first
/// zero `j01` fixes the ground eigenvalue of a disk of radius R as (j01/R)^2.
#[derive(Debug, Clone, Copy)]
pub struct DiskMode {
    /// First zero of the radial profile.
    pub j01: f64,
    /// |u'(j01)| of the unnormalized profile.
    pub slope_at_zero: f64,
    /// Integral of u(x)^2 x dx from 0 to j01 (unnormalized profile).
    pub norm_integral: f64,
}

#[derive(Debug, Clone, Copy)]
struct RadialState {
    x: f64,
    u: f64,
    v: f64,
}

/// Series start near x = 0 where the ODE has the removable 1/x singularity.
fn series_start(x: f64) -> RadialState {
    let x2 = x * x;
    let u = 1.0 - x2 / 4.0 + x2 * x2 / 64.0 - x2 * x2 * x2 / 2304.0;
    let v = -x / 2.0 + x * x2 / 16.0 - x * x2 * x2 / 384.0;
    RadialState { x, u, v }
}

fn rhs(x: f64, u: f64, v: f64) -> (f64, f64) {
    (v, -v / x - u)
}

fn rk4_step(s: RadialState, h: f64) -> RadialState {
    let (k1u, k1v) = rhs(s.x, s.u, s.v);
    let (k2u, k2v) = rhs(s.x + 0.5 * h, s.u + 0.5 * h * k1u, s.v + 0.5 * h * k1v);
    let (k3u, k3v) = rhs(s.x + 0.5 * h, s.u + 0.5 * h * k2u, s.v + 0.5 * h * k2v);
    let (k4u, k4v) = rhs(s.x + h, s.u + h * k3u, s.v + h * k3v);
    RadialState {
        x: s.x + h,
        u: s.u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        v: s.v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    }
}

fn integrate_to(mut s: RadialState, x_target: f64, h: f64) -> RadialState {
    while s.x < x_target {
        let step = h.min(x_target - s.x);
        s = rk4_step(s, step);
    }
    s
}

/// Shoots the radial ODE and locates the first zero of the profile.
///
/// Fixed step 1e-4 keeps the integration error far below the bisection
/// resolution; the zero is bracketed during the sweep and then bisected with
/// re-integration from the last pre-zero state.
pub fn disk_mode() -> DiskMode {
    let h = 1.0e-4;
    let x0 = 1.0e-3;
    let mut s = series_start(x0);

    // Trapezoid accumulation of u^2 x dx alongside the sweep.
    let mut norm = {
        // Series part on [0, x0]: u ~ 1, integral ~ x0^2/2.
        x0 * x0 / 2.0
    };
    let mut prev = s;
    while s.u > 0.0 {
        prev = s;
        s = rk4_step(s, h);
        norm += 0.5 * (prev.u * prev.u * prev.x + s.u * s.u * s.x) * (s.x - prev.x);
    }

    // Bisect between prev.x (u > 0) and s.x (u <= 0).
    let base = prev;
    let (mut lo, mut hi) = (prev.x, s.x);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let sm = integrate_to(base, mid, h * 0.1);
        if sm.u > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let j01 = 0.5 * (lo + hi);
    let at_zero = integrate_to(base, j01, h * 0.1);

    // Remove the overshoot of the trapezoid sum past the zero.
    let overshoot = 0.5 * (s.u * s.u * s.x + at_zero.u * at_zero.u * at_zero.x) * (s.x - j01);
    norm -= overshoot;

    DiskMode {
        j01,
        slope_at_zero: at_zero.v.abs(),
        norm_integral: norm,
    }
}

impl DiskMode {
    /// Ground eigenvalue of the flat disk of area `m`.
    pub fn lambda1(&self, m: f64) -> f64 {
        std::f64::consts::PI * self.j01 * self.j01 / m
    }

    /// Radius of the flat disk of area `m`.
    pub fn radius(&self, m: f64) -> f64 {
        (m / std::f64::consts::PI).sqrt()
    }

    /// Squared normal derivative at the boundary of the L2-normalized ground
    /// mode on the disk of area `m`, assembled from shooting quantities only.
    pub fn boundary_slope_sq(&self, m: f64) -> f64 {
        let r = self.radius(m);
        let k = self.j01 / r;
        // v = A u(k rho), ∫ v^2 dA = A^2 (2π/k^2) norm_integral = 1.
        let a_sq = k * k / (2.0 * std::f64::consts::PI * self.norm_integral);
        a_sq * k * k * self.slope_at_zero * self.slope_at_zero
    }
}

/// Area of the coordinate ellipse approximating a small geodesic ball of
/// radius `r` centred at height `t0` on the catenoid-type metric
/// diag(t^2 + neck^2, 1), by midpoint quadrature on an n x n grid.
///
/// Far from the neck this tends to the flat value pi r^2; the difference is
/// the quantity of interest when checking asymptotic flatness.
pub fn catenoid_coordinate_ball_volume(neck: f64, t0: f64, r: f64, n: usize) -> f64 {
    let c = (t0 * t0 + neck * neck).sqrt();
    // Ellipse: (dtheta * c)^2 + dt^2 <= r^2.
    let half_theta = r / c;
    let half_t = r;
    let h1 = 2.0 * half_theta / n as f64;
    let h2 = 2.0 * half_t / n as f64;
    let mut vol = 0.0;
    for i in 0..n {
        let dth = -half_theta + (i as f64 + 0.5) * h1;
        for j in 0..n {
            let dt = -half_t + (j as f64 + 0.5) * h2;
            let inside = (dth * c).powi(2) + dt * dt <= r * r;
            if inside {
                let t = t0 + dt;
                vol += (t * t + neck * neck).sqrt() * h1 * h2;
            }
        }
    }
    vol
}
