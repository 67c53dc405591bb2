//! Synthetic demonstrations with planted precision structure, plus the
//! closed-form and exhaustive oracles used to check the estimators.

use std::f64::consts::{E, PI};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::demoset::{read_json, write_json};
use crate::entropy::{EntropySeries, SyntheticSampler};
use crate::error::{Error, Result};
use crate::model::{Dataset, Trajectory};
use crate::segment::PrecisionLabeling;

/// Largest trajectory accepted by [`brute_force_awe`].
pub const BRUTE_FORCE_MAX_LEN: usize = 15;

/// Constant noise scale over the inclusive 1-based frame range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSegment {
    pub start: usize,
    pub end: usize,
    pub sigma: f64,
}

fn default_frequency() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub len: usize,
    pub dim: usize,
    pub segments: Vec<NoiseSegment>,
    /// Base path control points, spread evenly over frames `1..=len`.
    pub control_points: Vec<Vec<f64>>,
    pub seed: u64,
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
}

impl NoiseProfile {
    /// A straight base path from the origin to all-ones with scale
    /// `sigma_precision` on `precision` (inclusive) and `sigma_casual` elsewhere.
    pub fn two_level(
        len: usize,
        dim: usize,
        precision: (usize, usize),
        sigma_precision: f64,
        sigma_casual: f64,
        seed: u64,
    ) -> Self {
        let (s, e) = precision;
        let mut segments = Vec::new();
        if s > 1 {
            segments.push(NoiseSegment { start: 1, end: s - 1, sigma: sigma_casual });
        }
        segments.push(NoiseSegment { start: s, end: e, sigma: sigma_precision });
        if e < len {
            segments.push(NoiseSegment { start: e + 1, end: len, sigma: sigma_casual });
        }
        NoiseProfile {
            id: None,
            len,
            dim,
            segments,
            control_points: vec![vec![0.0; dim], vec![1.0; dim]],
            seed,
            frequency_hz: default_frequency(),
        }
    }

    /// One scale over the whole trajectory.
    pub fn constant(len: usize, dim: usize, sigma: f64, seed: u64) -> Self {
        NoiseProfile {
            id: None,
            len,
            dim,
            segments: vec![NoiseSegment { start: 1, end: len, sigma }],
            control_points: vec![vec![0.0; dim], vec![1.0; dim]],
            seed,
            frequency_hz: default_frequency(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.len == 0 || self.dim == 0 {
            return bad(format!("profile needs len >= 1 and dim >= 1, got {} and {}", self.len, self.dim));
        }
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return bad(format!("invalid control frequency {}", self.frequency_hz));
        }
        let mut next = 1;
        for seg in &self.segments {
            if seg.start != next || seg.end < seg.start {
                return bad(format!(
                    "noise segments must partition 1..={} in order; segment [{}, {}] breaks this",
                    self.len, seg.start, seg.end
                ));
            }
            if !(seg.sigma.is_finite() && seg.sigma > 0.0) {
                return bad(format!("segment [{}, {}] has non-positive scale {}", seg.start, seg.end, seg.sigma));
            }
            next = seg.end + 1;
        }
        if next != self.len + 1 {
            return bad(format!("noise segments must cover 1..={}", self.len));
        }
        if self.control_points.is_empty() {
            return bad("profile needs at least one control point".into());
        }
        if self
            .control_points
            .iter()
            .any(|p| p.len() != self.dim || p.iter().any(|v| !v.is_finite()))
        {
            return bad(format!("control points must be finite and {}-dimensional", self.dim));
        }
        Ok(())
    }

    /// Noise scale at every frame.
    pub fn sigma(&self) -> Vec<f64> {
        self.segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.sigma, s.end - s.start + 1))
            .collect()
    }

    /// Piecewise-linear base path at 1-based frame `t`.
    pub fn base_point(&self, t: usize) -> Vec<f64> {
        let m = self.control_points.len();
        if m == 1 || self.len == 1 {
            return self.control_points[0].clone();
        }
        let pos = (t - 1) as f64 * (m - 1) as f64 / (self.len - 1) as f64;
        let k = (pos.floor() as usize).min(m - 2);
        let alpha = pos - k as f64;
        self.control_points[k]
            .iter()
            .zip(&self.control_points[k + 1])
            .map(|(a, b)| a + alpha * (b - a))
            .collect()
    }
}

/// What a synthetic profile is known to contain.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub labeling: PrecisionLabeling,
    pub sigma: Vec<f64>,
    /// Differential entropy of the per-frame action distribution (nats).
    pub entropy: Vec<f64>,
}

impl GroundTruth {
    pub fn from_profile(trajectory: &str, profile: &NoiseProfile) -> Result<Self> {
        profile.validate()?;
        let max = profile.segments.iter().map(|s| s.sigma).fold(0.0, f64::max);
        let labeling = PrecisionLabeling::from_inclusive_ranges(
            trajectory,
            profile.len,
            profile
                .segments
                .iter()
                .filter(|s| s.sigma <= 0.5 * max)
                .map(|s| (s.start, s.end)),
        );
        let sigma = profile.sigma();
        let entropy = sigma
            .iter()
            .map(|&s| analytic_gaussian_entropy(s, profile.dim))
            .collect::<Result<_>>()?;
        Ok(GroundTruth { labeling, sigma, entropy })
    }

    pub fn entropy_series(&self) -> EntropySeries {
        EntropySeries::new(self.labeling.trajectory.clone(), self.entropy.clone())
    }
}

/// A generated trajectory with its sampler and ground truth.
#[derive(Debug, Clone)]
pub struct Generated {
    pub trajectory: Trajectory,
    pub sampler: SyntheticSampler,
    pub truth: GroundTruth,
}

/// Base path plus per-frame Gaussian noise at the planted scale. The sampler
/// draws around the generated actions with the same scales.
pub fn generate(profile: &NoiseProfile) -> Result<Generated> {
    let id = profile.id.clone().unwrap_or_else(|| "traj_0".to_owned());
    let truth = GroundTruth::from_profile(&id, profile)?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mut actions = Vec::with_capacity(profile.len * profile.dim);
    for (t, &sigma) in (1..=profile.len).zip(&truth.sigma) {
        for base in profile.base_point(t) {
            let z: f64 = StandardNormal.sample(&mut rng);
            actions.push((base + sigma * z) as f32);
        }
    }
    let trajectory = Trajectory::new(id, profile.dim, actions, profile.frequency_hz)?;
    let sampler = SyntheticSampler::new().with(&trajectory, truth.sigma.clone())?;
    Ok(Generated {
        trajectory,
        sampler,
        truth,
    })
}

/// A whole synthetic dataset, one trajectory per profile. Profiles without an
/// id are named `traj_{i}`.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub dataset: Dataset,
    pub sampler: SyntheticSampler,
    pub truth: Vec<GroundTruth>,
}

pub fn generate_dataset(profiles: &[NoiseProfile]) -> Result<GeneratedDataset> {
    let mut trajectories = Vec::with_capacity(profiles.len());
    let mut sampler = SyntheticSampler::new();
    let mut truth = Vec::with_capacity(profiles.len());
    for (i, profile) in profiles.iter().enumerate() {
        let mut profile = profile.clone();
        profile.id.get_or_insert_with(|| format!("traj_{i}"));
        let g = generate(&profile)?;
        sampler.insert(&g.trajectory, g.truth.sigma.clone())?;
        trajectories.push(g.trajectory);
        truth.push(g.truth);
    }
    Ok(GeneratedDataset {
        dataset: Dataset::new(trajectories),
        sampler,
        truth,
    })
}

/// `profile.json` holds one profile or an array of them.
#[derive(Deserialize)]
#[serde(untagged)]
enum ProfileFile {
    Many(Vec<NoiseProfile>),
    One(NoiseProfile),
}

pub fn read_profiles(path: &Path) -> Result<Vec<NoiseProfile>> {
    Ok(match read_json::<ProfileFile>(path)? {
        ProfileFile::Many(v) => v,
        ProfileFile::One(p) => vec![p],
    })
}

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Serialize, Deserialize)]
struct TruthRecord {
    trajectory: String,
    /// Inclusive 1-based ranges.
    precision: Vec<[usize; 2]>,
    sigma: Vec<f64>,
    entropy: Vec<f64>,
}

pub fn write_ground_truth(path: &Path, truth: &[GroundTruth]) -> Result<()> {
    let records: Vec<TruthRecord> = truth
        .iter()
        .map(|g| TruthRecord {
            trajectory: g.labeling.trajectory.clone(),
            precision: g.labeling.precision_runs().iter().map(|r| [r.start, r.end - 1]).collect(),
            sigma: g.sigma.clone(),
            entropy: g.entropy.clone(),
        })
        .collect();
    write_json(path, &records)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    let records: Vec<TruthRecord> = read_json(path)?;
    records
        .into_iter()
        .map(|r| {
            let len = r.sigma.len();
            if r.entropy.len() != len {
                return Err(Error::format(path, format!("{}: sigma and entropy lengths differ", r.trajectory)));
            }
            if let Some(bad) = r.precision.iter().find(|[s, e]| *s == 0 || s > e || *e > len) {
                return Err(Error::format(
                    path,
                    format!("{}: precision range [{}, {}] outside 1..={len}", r.trajectory, bad[0], bad[1]),
                ));
            }
            Ok(GroundTruth {
                labeling: PrecisionLabeling::from_inclusive_ranges(
                    r.trajectory,
                    len,
                    r.precision.iter().map(|[s, e]| (*s, *e)),
                ),
                sigma: r.sigma,
                entropy: r.entropy,
            })
        })
        .collect()
}

/// Differential entropy of an isotropic Gaussian, `D · ½ ln(2πe σ²)` nats.
pub fn analytic_gaussian_entropy(sigma: f64, dim: usize) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("scale must be positive, got {sigma}")));
    }
    Ok(dim as f64 * 0.5 * (2.0 * PI * E * sigma * sigma).ln())
}

/// Minimum number of waypoints (endpoints included) found by trying every
/// subset of interior frames.
pub fn brute_force_awe(traj: &Trajectory, entropy: &EntropySeries, epsilon: f64) -> Result<usize> {
    let len = traj.len();
    if len > BRUTE_FORCE_MAX_LEN {
        return Err(Error::InvalidConfig(format!(
            "exhaustive search supports at most {BRUTE_FORCE_MAX_LEN} frames, got {len}"
        )));
    }
    if entropy.len() != len {
        return Err(Error::InvalidData("entropy length differs from trajectory length".into()));
    }
    if len <= 2 {
        return Ok(len);
    }
    let n = len as f64;
    let mean = entropy.values.iter().sum::<f64>() / n;
    let std = (entropy.values.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / n).sqrt();
    let weight = |t: usize| {
        let z = if std > f64::EPSILON * mean.abs().max(1.0) {
            (entropy.values[t - 1] - mean) / std
        } else {
            0.0
        };
        if z < 0.0 {
            1.0 - z
        } else {
            1.0
        }
    };
    let deviation = |i: usize, j: usize, t: usize| -> f64 {
        let (a, b, x) = (traj.frame(i), traj.frame(j), traj.frame(t));
        let mut sq = 0.0;
        for d in 0..traj.dim() {
            let (a, b, x) = (f64::from(a[d]), f64::from(b[d]), f64::from(x[d]));
            let interp = a + (b - a) * ((t - i) as f64 / (j - i) as f64);
            sq += (x - interp) * (x - interp);
        }
        sq.sqrt()
    };
    let interior = len - 2;
    let mut best = len;
    for mask in 0u32..(1 << interior) {
        let count = mask.count_ones() as usize + 2;
        if count >= best {
            continue;
        }
        let mut waypoints = vec![1];
        waypoints.extend((0..interior).filter(|b| mask >> b & 1 == 1).map(|b| b + 2));
        waypoints.push(len);
        let ok = waypoints
            .windows(2)
            .all(|w| (w[0] + 1..w[1]).all(|t| weight(t) * deviation(w[0], w[1], t) <= epsilon));
        if ok {
            best = count;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_entropy() {
        assert!((analytic_gaussian_entropy(1.0, 1).unwrap() - 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((analytic_gaussian_entropy(1.0, 2).unwrap() - 2.837_877_066_409_345_5).abs() < 1e-12);
        let gap = analytic_gaussian_entropy(E, 1).unwrap() - analytic_gaussian_entropy(1.0, 1).unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
        assert!(analytic_gaussian_entropy(0.0, 1).is_err());
        assert!(analytic_gaussian_entropy(-1.0, 1).is_err());
    }

    #[test]
    fn planted_labeling() {
        let p = NoiseProfile::two_level(200, 2, (80, 120), 0.01, 0.1, 3);
        let truth = GroundTruth::from_profile("x", &p).unwrap();
        assert_eq!(truth.labeling.precision_runs(), std::slice::from_ref(&(80..121)));
        let flat = GroundTruth::from_profile("x", &NoiseProfile::constant(50, 1, 0.2, 0)).unwrap();
        assert_eq!(flat.labeling.precision_count(), 0);
        assert!(flat.entropy.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn seeds_change_actions_not_truth() {
        let a = generate(&NoiseProfile::two_level(60, 1, (20, 30), 0.01, 0.1, 1)).unwrap();
        let b = generate(&NoiseProfile::two_level(60, 1, (20, 30), 0.01, 0.1, 2)).unwrap();
        assert_ne!(a.trajectory.actions(), b.trajectory.actions());
        assert_eq!(a.truth, b.truth);
        let again = generate(&NoiseProfile::two_level(60, 1, (20, 30), 0.01, 0.1, 1)).unwrap();
        assert_eq!(a.trajectory, again.trajectory);
    }

    #[test]
    fn base_path_interpolates_control_points() {
        let mut p = NoiseProfile::constant(11, 1, 0.1, 0);
        p.control_points = vec![vec![0.0], vec![10.0], vec![0.0]];
        assert_eq!(p.base_point(1), vec![0.0]);
        assert_eq!(p.base_point(6), vec![10.0]);
        assert_eq!(p.base_point(11), vec![0.0]);
        assert_eq!(p.base_point(4), vec![6.0]);
    }

    #[test]
    fn profile_validation() {
        let mut p = NoiseProfile::constant(10, 1, 0.1, 0);
        p.segments[0].end = 9;
        assert!(p.validate().is_err());
        let mut p = NoiseProfile::constant(10, 1, 0.1, 0);
        p.segments[0].sigma = 0.0;
        assert!(p.validate().is_err());
        let mut p = NoiseProfile::constant(10, 1, 0.1, 0);
        p.control_points = vec![vec![f64::NAN]];
        assert!(p.validate().is_err());
    }

    #[test]
    fn ground_truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(GROUND_TRUTH_FILE);
        let g = generate_dataset(&[
            NoiseProfile::two_level(30, 1, (5, 9), 0.01, 0.1, 0),
            NoiseProfile::constant(12, 1, 0.3, 1),
        ])
        .unwrap();
        write_ground_truth(&path, &g.truth).unwrap();
        assert_eq!(read_ground_truth(&path).unwrap(), g.truth);
        assert_eq!(g.dataset.trajectories[1].id, "traj_1");
    }

    fn line(values: &[f32]) -> Trajectory {
        Trajectory::new("b", 1, values.to_vec(), 10.0).unwrap()
    }

    #[test]
    fn brute_force_examples() {
        let flat = EntropySeries::new("b", vec![0.0; 6]);
        assert_eq!(brute_force_awe(&line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]), &flat, 1e-9).unwrap(), 2);
        let corner = line(&[0.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        // deviation at the corner is 2 - 2·(2/5) = 1.2
        assert_eq!(brute_force_awe(&corner, &flat, 1.3).unwrap(), 2);
        assert_eq!(brute_force_awe(&corner, &flat, 1.1).unwrap(), 3);
        assert!(brute_force_awe(&line(&[0.0; 16]), &EntropySeries::new("b", vec![0.0; 16]), 1.0).is_err());
    }
}
