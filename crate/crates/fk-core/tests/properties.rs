//! Randomized invariants of the chart, discretization and solver layers.
//!
//! Each property keeps its grid small and its case count modest: the point
//! is coverage of the input space, not resolution. Deterministic invariants
//! that need no random input sit at the bottom as plain tests.

use fk_core::discretize::{assemble_operators, node_volumes};
use fk_core::eigensolve::{solve_on_support, EigenOptions};
use fk_core::manifold::{geodesic_ball, geodesic_distance_field, MetricChart};
use fk_core::shapeopt::{support_volume, volume_threshold};
use fk_core::{Chart, GridF, Operators};
use proptest::prelude::*;

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn torus() -> Chart {
    MetricChart::flat_torus(TAU, TAU).expect("torus chart")
}

fn torus_ops(n: usize) -> Operators {
    assemble_operators(&torus(), [n, n]).expect("torus operators")
}

/// Deterministic pseudo-random fields from a seed, for properties where a
/// proptest-generated vector per node would shrink poorly.
fn seeded_field(seed: u64, len: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    (0..len)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

fn seeded_mask(seed: u64, len: usize) -> Vec<bool> {
    seeded_field(seed, len).into_iter().map(|v| v > 0.0).collect()
}

/// Superposition of a few plane waves on the torus; ties across symmetric
/// nodes are common by construction, which is exactly what the threshold
/// contract has to survive.
fn wavy_field(grid: &GridF, modes: &[(i8, i8, f64)]) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let [x, y] = grid.pos(i, j);
            modes
                .iter()
                .map(|&(k1, k2, a)| a * (k1 as f64 * x + k2 as f64 * y).cos())
                .sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum AnyChart {
    Torus(f64, f64),
    Sphere(f64),
    Catenoid(f64),
}

impl AnyChart {
    fn build(self) -> Chart {
        match self {
            AnyChart::Torus(l1, l2) => MetricChart::flat_torus(l1, l2),
            AnyChart::Sphere(r) => MetricChart::sphere(r),
            AnyChart::Catenoid(neck) => MetricChart::catenoid(neck, 4.0),
        }
        .expect("chart parameters in range")
    }
}

fn any_chart() -> impl Strategy<Value = AnyChart> {
    prop_oneof![
        (1.0..8.0f64, 1.0..8.0f64).prop_map(|(a, b)| AnyChart::Torus(a, b)),
        (0.5..2.0f64).prop_map(AnyChart::Sphere),
        (0.5..1.5f64).prop_map(AnyChart::Catenoid),
    ]
}

/// Charts without pole rows, where metric scaling is exact: the pole clamp
/// floor does not scale with the metric.
fn poleless_chart() -> impl Strategy<Value = AnyChart> {
    prop_oneof![
        (1.0..8.0f64, 1.0..8.0f64).prop_map(|(a, b)| AnyChart::Torus(a, b)),
        (0.5..1.5f64).prop_map(AnyChart::Catenoid),
    ]
}

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cases(16))]

    /// Swapping source and target changes the grid distance only by
    /// floating-point rounding accumulated in path order.
    #[test]
    fn distance_swaps_source_and_target(a in 0usize..32 * 32, b in 0usize..32 * 32) {
        let chart = torus();
        let grid = chart.grid([32, 32]).expect("grid");
        let d_ab = geodesic_distance_field(&chart, &grid, grid.pos_of(a)).values[b];
        let d_ba = geodesic_distance_field(&chart, &grid, grid.pos_of(b)).values[a];
        prop_assert!(
            (d_ab - d_ba).abs() <= 1e-13 * d_ab.max(1.0),
            "d(a,b) = {d_ab} vs d(b,a) = {d_ba}"
        );
    }

    /// A smaller ball about the same center is contained in a larger one,
    /// node for node.
    #[test]
    fn geodesic_balls_nest(center in 0usize..32 * 32, r1 in 0.4..1.8f64, dr in 0.1..1.0f64) {
        let chart = torus();
        let grid = chart.grid([32, 32]).expect("grid");
        let dist = geodesic_distance_field(&chart, &grid, grid.pos_of(center));
        let small = geodesic_ball(&dist, r1);
        let large = geodesic_ball(&dist, r1 + dr);
        let in_large = {
            let mut mask = vec![false; grid.len()];
            for &i in &large {
                mask[i] = true;
            }
            mask
        };
        prop_assert!(small.iter().all(|&i| in_large[i]), "ball not nested");
    }
}

proptest! {
    #![proptest_config(cases(32))]

    /// Scaling the metric by c^2 scales the volume of any node set by c^2.
    #[test]
    fn volumes_scale_with_the_metric(
        kind in poleless_chart(),
        c in 0.3..3.0f64,
        seed in any::<u64>(),
    ) {
        let chart = kind.build();
        let scaled = kind.build().scaled(c * c).expect("scaled chart");
        let grid = chart.grid([20, 20]).expect("grid");
        let base = node_volumes(&chart, &grid);
        let big = node_volumes(&scaled, &grid);
        let mask = seeded_mask(seed, grid.len());
        let v: f64 = base.iter().zip(&mask).filter(|(_, &m)| m).map(|(v, _)| v).sum();
        let vc: f64 = big.iter().zip(&mask).filter(|(_, &m)| m).map(|(v, _)| v).sum();
        prop_assert!(
            (vc - c * c * v).abs() <= 1e-10 * (1.0 + c * c * v),
            "scaled volume {vc} vs {v} at c = {c}"
        );
    }
}

proptest! {
    #![proptest_config(cases(12))]

    /// The stiffness matrix is symmetric entry for entry, bit for bit.
    #[test]
    fn stiffness_is_exactly_symmetric(
        kind in any_chart(),
        n1 in 9usize..20,
        n2 in 9usize..20,
    ) {
        let chart = kind.build();
        let ops = assemble_operators(&chart, [n1, n2]).expect("operators");
        let k = &ops.stiffness;
        for r in 0..k.n() {
            for (c, v) in k.row(r) {
                let back = k.row(c).find(|&(cc, _)| cc == r).map(|(_, vv)| vv);
                prop_assert_eq!(back, Some(v), "entry ({}, {}) unmatched", r, c);
            }
        }
    }

    /// The two bilinear forms u'Kv and v'Ku agree to rounding; with exact
    /// entry symmetry the only slack is summation order.
    #[test]
    fn green_identity_holds(kind in any_chart(), n in 10usize..22, seed in any::<u64>()) {
        let chart = kind.build();
        let ops = assemble_operators(&chart, [n, n]).expect("operators");
        let u = seeded_field(seed, ops.len());
        let v = seeded_field(seed.wrapping_add(0x5851_f42d), ops.len());
        let uv = ops.stiffness.bilinear(&u, &v);
        let vu = ops.stiffness.bilinear(&v, &u);
        let scale = ops.stiffness.quadratic_form(&u).abs().max(ops.stiffness.quadratic_form(&v).abs());
        prop_assert!(
            (uv - vu).abs() <= 1e-12 * scale.max(1.0),
            "u'Kv = {uv} vs v'Ku = {vu}"
        );
    }

    /// Replacing g by c^2 g leaves the 2-D stiffness unchanged and scales
    /// the lumped mass by c^2, entry for entry.
    #[test]
    fn operators_obey_the_metric_scaling_law(
        kind in poleless_chart(),
        c in 0.5..2.0f64,
        n in 10usize..22,
    ) {
        let chart = kind.build();
        let scaled = kind.build().scaled(c * c).expect("scaled chart");
        let ops = assemble_operators(&chart, [n, n]).expect("operators");
        let ops_c = assemble_operators(&scaled, [n, n]).expect("scaled operators");
        for r in 0..ops.stiffness.n() {
            for ((c1, v1), (c2, v2)) in ops.stiffness.row(r).zip(ops_c.stiffness.row(r)) {
                prop_assert_eq!(c1, c2, "sparsity mismatch in row {}", r);
                prop_assert!(
                    (v1 - v2).abs() <= 1e-10 * v1.abs().max(1.0),
                    "stiffness ({}, {}): {} vs {}", r, c1, v1, v2
                );
            }
        }
        for (m1, m2) in ops.mass.diag.iter().zip(&ops_c.mass.diag) {
            prop_assert!(
                (m2 - c * c * m1).abs() <= 1e-10 * (c * c * m1).max(1e-30),
                "mass {} vs {} at c = {}", m2, c * c * m1, c
            );
        }
    }
}

proptest! {
    #![proptest_config(cases(8))]

    /// The computed ground state has no strictly negative node and a
    /// positive eigenvalue.
    #[test]
    fn ground_state_is_sign_definite(center in 0usize..20 * 20, r in 0.6..1.9f64) {
        let ops = torus_ops(20);
        let dist = geodesic_distance_field(&torus(), &ops.grid, ops.grid.pos_of(center));
        let support = geodesic_ball(&dist, r);
        prop_assume!(!support.is_empty() && support.len() < ops.len());
        let solve = solve_on_support(&ops, &support, None, &EigenOptions::default())
            .expect("eigensolve");
        let peak = solve.field.iter().cloned().fold(0.0f64, f64::max);
        prop_assert!(solve.pair.value > 0.0);
        prop_assert!(
            solve.field.iter().all(|&v| v >= -1e-10 * peak),
            "negative node, min {:?}",
            solve.field.iter().cloned().fold(f64::INFINITY, f64::min)
        );
    }

    /// Any perturbation of the ground state has a Rayleigh quotient at or
    /// above the computed eigenvalue.
    #[test]
    fn rayleigh_quotient_is_minimal_at_the_ground_state(
        center in 0usize..20 * 20,
        r in 0.6..1.9f64,
        seed in any::<u64>(),
    ) {
        let ops = torus_ops(20);
        let dist = geodesic_distance_field(&torus(), &ops.grid, ops.grid.pos_of(center));
        let support = geodesic_ball(&dist, r);
        prop_assume!(!support.is_empty() && support.len() < ops.len());
        let opts = EigenOptions { tol: 1e-9, ..EigenOptions::default() };
        let solve = solve_on_support(&ops, &support, None, &opts).expect("eigensolve");
        let bump = seeded_field(seed, solve.pair.vector.len());
        let v: Vec<f64> = solve
            .pair
            .vector
            .iter()
            .zip(&bump)
            .map(|(u, p)| u + 0.25 * p)
            .collect();
        let quotient = solve.restricted.rayleigh(&v);
        prop_assert!(
            quotient >= solve.pair.value * (1.0 - 1e-8),
            "quotient {quotient} below ground state {}",
            solve.pair.value
        );
    }

    /// Growing the support cannot raise the smallest eigenvalue.
    #[test]
    fn eigenvalues_shrink_on_nested_supports(
        center in 0usize..20 * 20,
        r in 0.6..1.4f64,
        dr in 0.3..0.8f64,
    ) {
        let ops = torus_ops(20);
        let dist = geodesic_distance_field(&torus(), &ops.grid, ops.grid.pos_of(center));
        let small = geodesic_ball(&dist, r);
        let large = geodesic_ball(&dist, r + dr);
        prop_assume!(small.len() < large.len() && large.len() < ops.len());
        let opts = EigenOptions { tol: 1e-8, ..EigenOptions::default() };
        let a = solve_on_support(&ops, &small, None, &opts).expect("small solve");
        let b = solve_on_support(&ops, &large, None, &opts).expect("large solve");
        prop_assert!(
            a.pair.value >= b.pair.value * (1.0 - 1e-6),
            "nested eigenvalues out of order: {} vs {}",
            a.pair.value,
            b.pair.value
        );
    }

    /// Eigenvalues obey the 2-D metric scaling law lambda(c^2 g) =
    /// lambda(g) / c^2.
    #[test]
    fn eigenvalues_obey_the_metric_scaling_law(
        center in 0usize..20 * 20,
        r in 0.6..1.6f64,
        c in 0.5..2.0f64,
    ) {
        let chart = torus();
        let scaled = torus().scaled(c * c).expect("scaled chart");
        let ops = assemble_operators(&chart, [20, 20]).expect("operators");
        let ops_c = assemble_operators(&scaled, [20, 20]).expect("scaled operators");
        let dist = geodesic_distance_field(&chart, &ops.grid, ops.grid.pos_of(center));
        let support = geodesic_ball(&dist, r);
        prop_assume!(!support.is_empty() && support.len() < ops.len());
        let opts = EigenOptions { tol: 1e-10, ..EigenOptions::default() };
        let a = solve_on_support(&ops, &support, None, &opts).expect("base solve");
        let b = solve_on_support(&ops_c, &support, None, &opts).expect("scaled solve");
        prop_assert!(
            (b.pair.value * c * c - a.pair.value).abs() <= 1e-8 * a.pair.value,
            "scaling law violated: {} vs {} at c = {}",
            b.pair.value * c * c,
            a.pair.value,
            c
        );
    }
}

proptest! {
    #![proptest_config(cases(24))]

    /// Thresholding any field with a positive part lands the support volume
    /// within one cell of the target, ties included.
    #[test]
    fn threshold_volume_lands_within_a_cell(
        modes in proptest::collection::vec((-3i8..4, -3i8..4, 0.2..1.0f64), 1..4),
        frac in 0.05..0.6f64,
    ) {
        let ops = torus_ops(24);
        let u = wavy_field(&ops.grid, &modes);
        prop_assume!(u.iter().any(|&v| v > 0.0));
        let total: f64 = ops.mass.diag.iter().sum();
        let m = frac * total;
        let support = volume_threshold(&ops, &u, m).expect("threshold");
        let vol = support_volume(&ops, &support);
        let cell = ops.mass.diag.iter().cloned().fold(0.0f64, f64::max);
        prop_assert!(
            (vol - m).abs() <= cell + 1e-9 * m,
            "support volume {vol} vs target {m}, cell {cell}"
        );
    }
}

/// Among equal-volume supports shaped as a ball, a square and an annulus,
/// the ball has the smallest eigenvalue.
#[test]
fn ball_beats_square_and_annulus_at_equal_volume() {
    let chart = torus();
    let ops = assemble_operators(&chart, [96, 96]).expect("operators");
    let grid = &ops.grid;
    let m = 0.6f64;
    let center = [std::f64::consts::PI, std::f64::consts::PI];

    let dist = geodesic_distance_field(&chart, grid, center);
    let r_ball = (m / std::f64::consts::PI).sqrt();
    let ball = geodesic_ball(&dist, r_ball);

    let half_side = 0.5 * m.sqrt();
    let square: Vec<usize> = (0..grid.len())
        .filter(|&idx| {
            let (i, j) = grid.ij(idx);
            let [x, y] = grid.pos(i, j);
            (x - center[0]).abs() <= half_side && (y - center[1]).abs() <= half_side
        })
        .collect();

    let r_in = 0.3f64;
    let r_out = (m / std::f64::consts::PI + r_in * r_in).sqrt();
    let annulus: Vec<usize> = {
        let outer = geodesic_ball(&dist, r_out);
        let inner: Vec<usize> = geodesic_ball(&dist, r_in);
        let mut drop = vec![false; grid.len()];
        for &i in &inner {
            drop[i] = true;
        }
        outer.into_iter().filter(|&i| !drop[i]).collect()
    };

    let opts = EigenOptions { tol: 1e-8, ..EigenOptions::default() };
    let l_ball = solve_on_support(&ops, &ball, None, &opts).expect("ball").pair.value;
    let l_square = solve_on_support(&ops, &square, None, &opts).expect("square").pair.value;
    let l_annulus = solve_on_support(&ops, &annulus, None, &opts).expect("annulus").pair.value;
    assert!(
        l_ball < l_square && l_ball < l_annulus,
        "ball {l_ball} vs square {l_square} vs annulus {l_annulus}"
    );
}
