//! Geodesic balls as node sets, and radius selection for a volume target.

use crate::error::{Error, Result};
use crate::scalar::{cmp_finite, Scalar};

use super::DistanceField;

/// Nodes within distance `r` of the distance field's source, ascending index.
pub fn geodesic_ball<T: Scalar>(dist: &DistanceField<T>, r: T) -> Vec<usize> {
    dist.values
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= r)
        .map(|(i, _)| i)
        .collect()
}

/// Radius whose ball best matches the volume target, by monotone bisection
/// on r -> Vol({d <= r}). The volume function is a step function jumping at
/// node distances, so the bisection is carried out on the sorted distance
/// values; nodes at exactly equal distance enter together. Returns the
/// radius and the achieved volume.
///
/// The achieved volume misses the target by at most half the step at the
/// crossing, one node cell generically, a few cells when symmetry makes
/// several nodes tie at the same distance.
pub fn ball_radius_for_volume<T: Scalar>(
    dist: &DistanceField<T>,
    node_volumes: &[T],
    m: T,
) -> Result<(T, T)> {
    if dist.values.len() != node_volumes.len() {
        return Err(Error::Dimension(format!(
            "distance field has {} nodes, volumes {}",
            dist.values.len(),
            node_volumes.len()
        )));
    }
    let total: T = node_volumes.iter().copied().sum();
    if !(m > T::zero()) || m > total {
        return Err(Error::VolumeOutOfRange {
            target: m.to_f64_lossy(),
            available: total.to_f64_lossy(),
        });
    }

    let mut order: Vec<usize> = (0..dist.values.len()).collect();
    order.sort_by(|&a, &b| cmp_finite(dist.values[a], dist.values[b]).then(a.cmp(&b)));

    // Walk tie groups, accumulating volume; stop at the group whose
    // inclusion first reaches the target and keep whichever side is closer.
    let mut vol = T::zero();
    let mut radius = T::zero();
    let mut k = 0;
    while k < order.len() {
        let d = dist.values[order[k]];
        let mut group_vol = T::zero();
        let mut kk = k;
        while kk < order.len() && dist.values[order[kk]] == d {
            group_vol += node_volumes[order[kk]];
            kk += 1;
        }
        let with = vol + group_vol;
        if with >= m {
            // Including this tie group crosses the target.
            let under = m - vol;
            let over = with - m;
            if under <= over && k > 0 {
                // Previous radius is closer; keep the group out.
                return Ok((radius, vol));
            }
            return Ok((d, with));
        }
        vol = with;
        radius = d;
        k = kk;
    }
    Err(Error::VolumeOutOfRange {
        target: m.to_f64_lossy(),
        available: vol.to_f64_lossy(),
    })
}
