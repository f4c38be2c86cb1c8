//! Smallest eigenpair of K u = lambda M u by shift-free inverse power
//! iteration on the diagonally scaled standard form.
//!
//! With M diagonal positive, the pencil transforms to A z = lambda z where
//! A = M^{-1/2} K M^{-1/2} and z = M^{1/2} u. Each outer iteration solves
//! A y = z with a Jacobi-preconditioned conjugate gradient whose tolerance
//! tightens as the eigenpair converges. The method targets the ground state
//! of an SPD pencil, which has a healthy spectral gap, so no shifts or
//! restarts are needed.
//!
//! Determinism: the start vector comes from a fixed-seed ChaCha stream (or a
//! caller-supplied warm start), and every reduction runs in index order, so
//! a given problem always yields bitwise identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretize::{DiscreteOperators, RestrictedOperators};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, DiagMatrix};

/// Solver knobs. `tol` bounds both the relative eigenvalue change and the
/// residual relative to lambda at convergence.
#[derive(Debug, Clone)]
pub struct EigenOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Seed for the pseudo-random start vector when no warm start is given.
    pub seed: u64,
    /// Project out the constant function (in the M inner product). Needed
    /// for the smallest nonzero eigenvalue on closed manifolds, where K has
    /// the constants as kernel.
    pub deflate_constants: bool,
}

impl<T: Scalar> Default for EigenOptions<T> {
    fn default() -> Self {
        Self { tol: T::of(1e-6), max_iter: 400, seed: 7, deflate_constants: false }
    }
}

/// Converged eigenpair. The vector is normalized to u^T M u = 1 and
/// sign-fixed; for ground states (no deflation) stray negative noise is
/// clamped to zero, so the field is nonnegative node-wise.
#[derive(Debug, Clone)]
pub struct Eigenpair<T> {
    pub value: T,
    pub vector: Vec<T>,
    /// Final residual sqrt((K u - lambda M u)^T M^{-1} (K u - lambda M u)).
    pub residual: T,
    pub iterations: usize,
}

/// v^T K v / v^T M v; fails on fields with zero mass norm.
pub fn rayleigh_quotient<T: Scalar>(
    stiffness: &CsrMatrix<T>,
    mass: &DiagMatrix<T>,
    v: &[T],
) -> Result<T> {
    let denom = mass.quadratic_form(v);
    if !(denom > T::zero()) {
        return Err(Error::ZeroField);
    }
    Ok(stiffness.quadratic_form(v) / denom)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b.iter()).map(|(x, y)| *x * *y).sum()
}

/// Computes the smallest eigenpair of K u = lambda M u. `warm` is an
/// approximate eigenvector in the original (u) coordinates. K must be
/// symmetric positive definite on the complement of the deflated space;
/// singular problems without deflation stall and report EigenStalled.
pub fn smallest_eigenpair<T: Scalar>(
    stiffness: &CsrMatrix<T>,
    mass: &DiagMatrix<T>,
    warm: Option<&[T]>,
    opts: &EigenOptions<T>,
) -> Result<Eigenpair<T>> {
    let n = stiffness.n();
    if n == 0 {
        return Err(Error::Dimension("eigenproblem has no nodes".into()));
    }
    if mass.n() != n {
        return Err(Error::Dimension(format!(
            "stiffness is {n} x {n} but mass has {} entries",
            mass.n()
        )));
    }
    for (i, &mi) in mass.diag.iter().enumerate() {
        if !(mi > T::zero()) {
            return Err(Error::Dimension(format!(
                "mass diagonal entry {i} is not positive"
            )));
        }
    }

    let ms: Vec<T> = mass.diag.iter().map(|&m| T::one() / m.sqrt()).collect();

    // z-space deflation direction: the constants u = 1 map to M^{1/2} 1.
    let deflate: Option<Vec<T>> = if opts.deflate_constants {
        let mut zc: Vec<T> = mass.diag.iter().map(|&m| m.sqrt()).collect();
        let norm = dot(&zc, &zc).sqrt();
        for v in zc.iter_mut() {
            *v = *v / norm;
        }
        Some(zc)
    } else {
        None
    };
    let project = |z: &mut [T]| {
        if let Some(zc) = &deflate {
            let d = dot(z, zc);
            for (zi, ci) in z.iter_mut().zip(zc.iter()) {
                *zi = *zi - d * *ci;
            }
        }
    };

    // Jacobi preconditioner: diag(A) = diag(K) / diag(M).
    let pdiag: Vec<T> = stiffness
        .diagonal()
        .iter()
        .zip(ms.iter())
        .map(|(&k, &s)| {
            let p = k * s * s;
            if p > T::zero() {
                p
            } else {
                T::one()
            }
        })
        .collect();

    let mut tmp = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];

    let mut z: Vec<T> = match warm {
        Some(u) if u.iter().any(|v| *v != T::zero()) => {
            u.iter().zip(mass.diag.iter()).map(|(&ui, &mi)| ui * mi.sqrt()).collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            // Strictly positive start: the ground state is sign-definite,
            // so this avoids wasting iterations on sign cancellation.
            (0..n).map(|_| T::of(rng.gen::<f64>() + 0.5)).collect()
        }
    };
    project(&mut z);
    let zn = dot(&z, &z).sqrt();
    if !(zn > T::zero()) {
        return Err(Error::ZeroField);
    }
    for v in z.iter_mut() {
        *v = *v / zn;
    }

    let mut cg = CgBuffers::new(n);
    let mut y = vec![T::zero(); n];
    let mut lambda_prev = T::of(f64::INFINITY);
    let mut last_rel = T::of(f64::INFINITY);
    for it in 1..=opts.max_iter {
        apply_scaled(stiffness, &ms, &z, &mut w, &mut tmp);
        project(&mut w);
        let lambda = dot(&z, &w);
        let mut res2 = T::zero();
        for (wi, zi) in w.iter().zip(z.iter()) {
            let d = *wi - lambda * *zi;
            res2 += d * d;
        }
        let res = res2.sqrt();
        let scale = lambda.abs().max(T::of(1e-300));
        last_rel = res / scale;
        let lam_ok = (lambda - lambda_prev).abs() <= opts.tol * scale;
        if it > 1 && last_rel <= opts.tol && lam_ok {
            return Ok(finish(stiffness, mass, &ms, z, it, deflate.is_none()));
        }
        lambda_prev = lambda;

        // Inverse iteration step A y = z, seeded with z / lambda (already a
        // good approximation once the pair starts converging). The inner
        // tolerance tightens with the outer residual.
        let inner_rtol = (last_rel * T::of(0.05)).clamp(T::of(1e-13), T::of(1e-2));
        for (yi, zi) in y.iter_mut().zip(z.iter()) {
            *yi = *zi / lambda.max(T::of(1e-30));
        }
        cg.solve(
            |x, out, scratch| {
                apply_scaled(stiffness, &ms, x, out, scratch);
            },
            &pdiag,
            &z,
            &mut y,
            inner_rtol,
            2 * n + 200,
        );
        project(&mut y);
        let yn = dot(&y, &y).sqrt();
        if !(yn > T::zero()) {
            break;
        }
        for (zi, yi) in z.iter_mut().zip(y.iter()) {
            *zi = *yi / yn;
        }
    }
    Err(Error::EigenStalled {
        iterations: opts.max_iter,
        residual: last_rel.to_f64_lossy(),
    })
}

fn apply_scaled<T: Scalar>(k: &CsrMatrix<T>, ms: &[T], x: &[T], out: &mut [T], tmp: &mut [T]) {
    for ((t, xi), s) in tmp.iter_mut().zip(x.iter()).zip(ms.iter()) {
        *t = *xi * *s;
    }
    k.matvec(tmp, out);
    for (o, s) in out.iter_mut().zip(ms.iter()) {
        *o = *o * *s;
    }
}

/// Back-transform, sign-fix, clamp ground-state noise, renormalize to
/// u^T M u = 1, and report the residual of the final vector.
fn finish<T: Scalar>(
    stiffness: &CsrMatrix<T>,
    mass: &DiagMatrix<T>,
    ms: &[T],
    z: Vec<T>,
    iterations: usize,
    clamp_negative: bool,
) -> Eigenpair<T> {
    let mut u: Vec<T> = z.iter().zip(ms.iter()).map(|(&zi, &s)| zi * s).collect();
    let mut imax = 0;
    let mut best = T::zero();
    for (i, v) in u.iter().enumerate() {
        if v.abs() > best {
            best = v.abs();
            imax = i;
        }
    }
    if u[imax] < T::zero() {
        for v in u.iter_mut() {
            *v = -*v;
        }
    }
    if clamp_negative {
        for v in u.iter_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
    }
    let nrm = mass.quadratic_form(&u).sqrt();
    for v in u.iter_mut() {
        *v = *v / nrm;
    }
    let ku = stiffness.apply(&u);
    let value = dot(&u, &ku);
    let mut res2 = T::zero();
    for ((&kui, &ui), &mi) in ku.iter().zip(u.iter()).zip(mass.diag.iter()) {
        let d = kui - value * mi * ui;
        res2 += d * d / mi;
    }
    Eigenpair { value, vector: u, residual: res2.sqrt(), iterations }
}

struct CgBuffers<T> {
    r: Vec<T>,
    p: Vec<T>,
    ap: Vec<T>,
    zp: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> CgBuffers<T> {
    fn new(n: usize) -> Self {
        Self {
            r: vec![T::zero(); n],
            p: vec![T::zero(); n],
            ap: vec![T::zero(); n],
            zp: vec![T::zero(); n],
            tmp: vec![T::zero(); n],
        }
    }

    /// Preconditioned conjugate gradient for A x = b, x holding the start
    /// iterate and the result. Best-effort: returns after max_iter even if
    /// the tolerance was not met (the outer iteration absorbs inexactness).
    fn solve<F>(
        &mut self,
        apply: F,
        pdiag: &[T],
        b: &[T],
        x: &mut [T],
        rtol: T,
        max_iter: usize,
    ) where
        F: Fn(&[T], &mut [T], &mut [T]),
    {
        let bnorm = dot(b, b).sqrt();
        if !(bnorm > T::zero()) {
            for v in x.iter_mut() {
                *v = T::zero();
            }
            return;
        }
        apply(x, &mut self.ap, &mut self.tmp);
        for ((r, &bi), &api) in self.r.iter_mut().zip(b.iter()).zip(self.ap.iter()) {
            *r = bi - api;
        }
        for ((z, &ri), &pi) in self.zp.iter_mut().zip(self.r.iter()).zip(pdiag.iter()) {
            *z = ri / pi;
        }
        self.p.copy_from_slice(&self.zp);
        let mut rz = dot(&self.r, &self.zp);
        for _ in 0..max_iter {
            if dot(&self.r, &self.r).sqrt() <= rtol * bnorm {
                return;
            }
            apply(&self.p, &mut self.ap, &mut self.tmp);
            let pap = dot(&self.p, &self.ap);
            if !(pap > T::zero()) {
                // Indefinite or semidefinite direction; stop with the
                // current iterate rather than corrupting it.
                return;
            }
            let alpha = rz / pap;
            for ((xi, &pi), (ri, &api)) in x
                .iter_mut()
                .zip(self.p.iter())
                .zip(self.r.iter_mut().zip(self.ap.iter()))
            {
                *xi = *xi + alpha * pi;
                *ri = *ri - alpha * api;
            }
            for ((z, &ri), &pi) in self.zp.iter_mut().zip(self.r.iter()).zip(pdiag.iter()) {
                *z = ri / pi;
            }
            let rz_new = dot(&self.r, &self.zp);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, &zi) in self.p.iter_mut().zip(self.zp.iter()) {
                *pi = zi + beta * *pi;
            }
        }
    }
}

/// Eigensolve on a node support of assembled operators: restrict, solve,
/// scatter back to the full grid.
#[derive(Debug, Clone)]
pub struct SupportSolve<T> {
    /// Eigenpair in local (restricted) indexing.
    pub pair: Eigenpair<T>,
    /// Eigenfunction extended by zero to the full grid.
    pub field: Vec<T>,
    pub restricted: RestrictedOperators<T>,
}

/// Solves the smallest eigenpair on a support. `warm_field` is a full-grid
/// field (typically the previous iterate's eigenfunction); it is gathered
/// onto the support and used as the start vector when it is nonzero there.
///
/// A support covering a closed manifold (zero row sums) short-circuits to
/// the constant kernel with lambda = 0.
pub fn solve_on_support<T: Scalar>(
    ops: &DiscreteOperators<T>,
    support: &[usize],
    warm_field: Option<&[T]>,
    opts: &EigenOptions<T>,
) -> Result<SupportSolve<T>> {
    let restricted = ops.restrict(support)?;
    let n = restricted.len();
    if n == ops.len() && !opts.deflate_constants {
        let ones = vec![T::one(); n];
        let k1 = restricted.stiffness.apply(&ones);
        let worst = k1.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        let scale = restricted
            .stiffness
            .diagonal()
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()));
        if worst <= T::of(1e-10) * scale {
            let c = T::one() / restricted.mass.trace().sqrt();
            let vector = vec![c; n];
            let value = restricted.stiffness.quadratic_form(&vector).max(T::zero());
            let pair = Eigenpair { value, vector, residual: worst * c, iterations: 0 };
            let field = restricted.scatter(&pair.vector, ops.len());
            return Ok(SupportSolve { pair, field, restricted });
        }
    }
    let warm_local: Option<Vec<T>> = warm_field
        .map(|f| restricted.nodes.iter().map(|&g| f[g]).collect::<Vec<T>>())
        .filter(|v| v.iter().any(|x| *x != T::zero()));
    let pair = smallest_eigenpair(
        &restricted.stiffness,
        &restricted.mass,
        warm_local.as_deref(),
        opts,
    )?;
    let field = restricted.scatter(&pair.vector, ops.len());
    Ok(SupportSolve { pair, field, restricted })
}
