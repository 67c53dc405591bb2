//! Entropy-weighted waypoint extraction.
//!
//! Picks the fewest waypoints such that linear interpolation between
//! consecutive waypoints reconstructs every intermediate action within `ε`,
//! where the error at frame `t` is scaled by `1 + max(0, -z_t)` and `z` is the
//! z-scored entropy. Low-entropy frames are therefore harder to skip.

use crate::entropy::EntropySeries;
use crate::error::{Error, Result};
use crate::model::Trajectory;
use crate::segment::z_scores;

/// Per-frame error weights `1 + max(0, -z_t)`.
pub fn entropy_weights(entropy: &[f64]) -> Vec<f64> {
    z_scores(entropy).into_iter().map(|z| 1.0 + (-z).max(0.0)).collect()
}

/// Whether skipping every frame strictly between `i` and `j` (0-based) keeps
/// the weighted interpolation error within `epsilon`.
fn feasible(traj: &Trajectory, weights: &[f64], i: usize, j: usize, epsilon: f64) -> bool {
    let a = traj.frame_f64(i + 1);
    let b = traj.frame_f64(j + 1);
    let span = (j - i) as f64;
    (i + 1..j).all(|t| {
        let alpha = (t - i) as f64 / span;
        let err = traj
            .frame(t + 1)
            .iter()
            .zip(a.iter().zip(&b))
            .map(|(&x, (&lo, &hi))| {
                let d = f64::from(x) - (lo + alpha * (hi - lo));
                d * d
            })
            .sum::<f64>()
            .sqrt();
        weights[t] * err <= epsilon
    })
}

/// Minimal waypoint set (1-based, always containing `1` and `T`); among
/// minimal sets the lexicographically smallest is returned.
pub fn awe_star_indices(traj: &Trajectory, entropy: &EntropySeries, epsilon: f64) -> Result<Vec<usize>> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!("error bound must be a non-negative number, got {epsilon}")));
    }
    let len = traj.len();
    if entropy.len() != len {
        return Err(Error::InvalidData(format!(
            "entropy series for {} has {} frames, trajectory has {len}",
            traj.id,
            entropy.len()
        )));
    }
    if len <= 1 {
        return Ok((1..=len).collect());
    }
    let weights = entropy_weights(&entropy.values);
    // best[i]: fewest waypoints on a path from i to the last frame, i included.
    let mut best = vec![usize::MAX; len];
    best[len - 1] = 1;
    for i in (0..len - 1).rev() {
        best[i] = (i + 1..len)
            .filter(|&j| feasible(traj, &weights, i, j, epsilon))
            .map(|j| best[j] + 1)
            .min()
            .expect("adjacent frames are always feasible");
    }
    let mut out = vec![1];
    let mut i = 0;
    while i < len - 1 {
        i = (i + 1..len)
            .find(|&j| best[j] + 1 == best[i] && feasible(traj, &weights, i, j, epsilon))
            .expect("an optimal successor exists");
        out.push(i + 1);
    }
    Ok(out)
}
