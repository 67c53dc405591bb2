//! Sources of predicted action chunks.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ActionChunk, Trajectory};

/// Anything that can predict `n` action chunks of length `chunk_len` for
/// frame `t` of a trajectory.
///
/// Implementations must be deterministic for a fixed `seed` and return chunks
/// whose dimension matches the trajectory.
pub trait ProxySampler: Sync {
    fn sample(
        &self,
        trajectory: &str,
        t: usize,
        chunk_len: usize,
        n: usize,
        seed: u64,
    ) -> Result<Vec<ActionChunk>>;
}

/// Derives the per-origin seed from the run seed, the trajectory id and the
/// 1-based frame index (FNV-1a over the id and frame bytes).
pub fn frame_seed(seed: u64, trajectory: &str, t: usize) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let hash = trajectory
        .as_bytes()
        .iter()
        .chain((t as u64).to_le_bytes().iter())
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME));
    seed ^ hash
}

#[derive(Debug, Clone)]
struct SyntheticTrace {
    dim: usize,
    mean: Vec<f64>,
    sigma: Vec<f64>,
}

/// Draws each chunk row for absolute frame `s` from `N(mean_s, sigma_s²)`,
/// independently per dimension. Rows past the trajectory end reuse the last
/// frame's mean and scale.
#[derive(Debug, Clone, Default)]
pub struct SyntheticSampler {
    traces: HashMap<String, SyntheticTrace>,
}

impl SyntheticSampler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a trajectory, centering samples on its demonstrated actions.
    pub fn insert(&mut self, traj: &Trajectory, sigma: Vec<f64>) -> Result<()> {
        if sigma.len() != traj.len() {
            return Err(Error::InvalidData(format!(
                "trajectory {}: {} noise scales for {} frames",
                traj.id,
                sigma.len(),
                traj.len()
            )));
        }
        if let Some(bad) = sigma.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::InvalidData(format!("trajectory {}: invalid noise scale {bad}", traj.id)));
        }
        let mean = traj.actions().iter().map(|&v| f64::from(v)).collect();
        self.traces.insert(
            traj.id.clone(),
            SyntheticTrace {
                dim: traj.dim(),
                mean,
                sigma,
            },
        );
        Ok(())
    }

    pub fn with(mut self, traj: &Trajectory, sigma: Vec<f64>) -> Result<Self> {
        self.insert(traj, sigma)?;
        Ok(self)
    }
}

impl ProxySampler for SyntheticSampler {
    fn sample(
        &self,
        trajectory: &str,
        t: usize,
        chunk_len: usize,
        n: usize,
        seed: u64,
    ) -> Result<Vec<ActionChunk>> {
        let trace = self
            .traces
            .get(trajectory)
            .ok_or_else(|| Error::UnknownTrajectory(trajectory.to_owned()))?;
        let len = trace.sigma.len();
        if t == 0 || t > len {
            return Err(Error::FrameOutOfRange { t, len });
        }
        let dim = trace.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut rows = Vec::with_capacity(chunk_len * dim);
                for r in 0..chunk_len {
                    let s = (t + r).min(len) - 1;
                    let sigma = trace.sigma[s];
                    for d in 0..dim {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        rows.push(trace.mean[s * dim + d] + sigma * z);
                    }
                }
                ActionChunk::new(t, dim, rows)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj() -> Trajectory {
        Trajectory::from_rows("s", &[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]], 10.0).unwrap()
    }

    #[test]
    fn zero_sigma_reproduces_mean_with_padding() {
        let sampler = SyntheticSampler::new().with(&traj(), vec![0.0; 3]).unwrap();
        let chunks = sampler.sample("s", 2, 3, 4, 1).unwrap();
        assert_eq!(chunks.len(), 4);
        for c in chunks {
            assert_eq!(c.as_slice(), &[2.0, 3.0, 4.0, 5.0, 4.0, 5.0]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let sampler = SyntheticSampler::new().with(&traj(), vec![0.3; 3]).unwrap();
        let a = sampler.sample("s", 1, 2, 5, 99).unwrap();
        let b = sampler.sample("s", 1, 2, 5, 99).unwrap();
        let c = sampler.sample("s", 1, 2, 5, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unknown_trajectory_and_bad_frame() {
        let sampler = SyntheticSampler::new().with(&traj(), vec![0.1; 3]).unwrap();
        assert!(matches!(sampler.sample("x", 1, 1, 1, 0), Err(Error::UnknownTrajectory(_))));
        assert!(matches!(sampler.sample("s", 4, 1, 1, 0), Err(Error::FrameOutOfRange { .. })));
    }

    #[test]
    fn frame_seed_separates_frames_and_ids() {
        let a = frame_seed(7, "traj", 1);
        assert_ne!(a, frame_seed(7, "traj", 2));
        assert_ne!(a, frame_seed(7, "trak", 1));
        assert_eq!(a, frame_seed(7, "traj", 1));
    }
}
