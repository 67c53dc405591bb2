//! Per-frame conditional action entropy.
//!
//! For frame `t`, every chunk predicted at an origin `j ∈ [max(1, t-K+1), t]`
//! contributes its entry for absolute time `t` to a pool of `M` samples. A
//! Gaussian KDE over the pool gives `p̂`, and the entropy is read off the
//! densities at the pooled samples.

mod archive;
mod kde;
mod sampler;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use archive::{sample_file_name, FileSampler, SampleArchive, SAMPLE_MAGIC};
pub use kde::{frame_entropy, kde_density, pool_entropy_1d, silverman_bandwidth, MIN_BANDWIDTH};
pub use sampler::{frame_seed, ProxySampler, SyntheticSampler};

use crate::demoset::write_atomic;
use crate::error::{Error, Result};
use crate::model::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Silverman,
    Fixed(f64),
}

/// How densities at the pooled samples are reduced to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    /// `-Σ p̂(s) log p̂(s)` over the pool, without `1/M`.
    Paper,
    /// `-(1/M) Σ log p̂(s)`.
    Resubstitution,
}

/// How multi-dimensional actions are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionMode {
    /// Independent 1-D estimates, summed over dimensions.
    SumPerDim,
    /// One product-kernel KDE over the full action vector.
    JointProduct,
}

impl FromStr for Bandwidth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "silverman" {
            return Ok(Bandwidth::Silverman);
        }
        s.parse::<f64>()
            .ok()
            .filter(|h| h.is_finite() && *h > 0.0)
            .map(Bandwidth::Fixed)
            .ok_or_else(|| Error::InvalidConfig(format!("bandwidth must be 'silverman' or a positive number, got {s:?}")))
    }
}

impl fmt::Display for EntropyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntropyMode::Paper => "paper",
            EntropyMode::Resubstitution => "resubstitution",
        })
    }
}

impl FromStr for EntropyMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(EntropyMode::Paper),
            "resubstitution" | "resub" => Ok(EntropyMode::Resubstitution),
            _ => Err(Error::InvalidConfig(format!("unknown entropy mode {s:?}"))),
        }
    }
}

impl FromStr for DimensionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" | "sum-per-dim" => Ok(DimensionMode::SumPerDim),
            "joint" | "joint-product" => Ok(DimensionMode::JointProduct),
            _ => Err(Error::InvalidConfig(format!("unknown dimension mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub n_samples: usize,
    pub chunk_len: usize,
    pub bandwidth: Bandwidth,
    pub mode: EntropyMode,
    pub dims: DimensionMode,
    pub seed: u64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            n_samples: 100,
            chunk_len: 10,
            bandwidth: Bandwidth::Silverman,
            mode: EntropyMode::Paper,
            dims: DimensionMode::SumPerDim,
            seed: 0,
        }
    }
}

impl EntropyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::InvalidConfig("sample count N must be at least 2".into()));
        }
        if self.chunk_len < 1 {
            return Err(Error::InvalidConfig("chunk length K must be at least 1".into()));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidConfig(format!("fixed bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// The pooled samples `a_j^i[t]` for one frame and their per-dimension bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSampleSet {
    pub t: usize,
    dim: usize,
    samples: Vec<f64>,
    bandwidth: Vec<f64>,
}

impl ActionSampleSet {
    /// Builds a set from row-major `M × dim` samples, computing bandwidths by `rule`.
    pub fn new(t: usize, dim: usize, samples: Vec<f64>, rule: Bandwidth) -> Result<Self> {
        if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
            return Err(Error::InvalidData("sample pool must hold at least one whole row".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite sample in pool for frame {t}")));
        }
        let mut set = ActionSampleSet {
            t,
            dim,
            samples,
            bandwidth: Vec::new(),
        };
        set.bandwidth = (0..dim)
            .map(|d| match rule {
                Bandwidth::Fixed(h) => Ok(h),
                Bandwidth::Silverman => silverman_bandwidth(&set.column(d)),
            })
            .collect::<Result<_>>()?;
        Ok(set)
    }

    /// Pool size `M`.
    pub fn pool_size(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.samples.iter().skip(d).step_by(self.dim).copied().collect()
    }
}

/// Gathers the entries for absolute frame `t` from every chunk whose origin
/// lies in `[max(1, t-K+1), t]`.
pub fn pool_samples(
    sampler: &dyn ProxySampler,
    traj: &Trajectory,
    t: usize,
    cfg: &EntropyConfig,
) -> Result<ActionSampleSet> {
    let len = traj.len();
    if t == 0 || t > len {
        return Err(Error::FrameOutOfRange { t, len });
    }
    let k = cfg.chunk_len;
    let first_origin = t.saturating_sub(k - 1).max(1);
    let dim = traj.dim();
    let mut pool = Vec::with_capacity(cfg.n_samples * (t - first_origin + 1) * dim);
    for j in first_origin..=t {
        let chunks = sampler.sample(&traj.id, j, k, cfg.n_samples, frame_seed(cfg.seed, &traj.id, j))?;
        if chunks.len() != cfg.n_samples {
            return Err(Error::SamplerShape(format!(
                "expected {} chunks at frame {j}, got {}",
                cfg.n_samples,
                chunks.len()
            )));
        }
        for chunk in &chunks {
            if chunk.chunk_len() != k || chunk.dim() != dim {
                return Err(Error::SamplerShape(format!(
                    "chunk at frame {j} is {}x{}, expected {k}x{dim}",
                    chunk.chunk_len(),
                    chunk.dim()
                )));
            }
            pool.extend_from_slice(chunk.row(t - j));
        }
    }
    ActionSampleSet::new(t, dim, pool, cfg.bandwidth)
}

/// Entropy estimates for one trajectory, one value per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropySeries {
    pub trajectory: String,
    pub values: Vec<f64>,
    /// Frames whose value was replaced by outlier cleaning.
    pub cleaned: Vec<bool>,
    pub mode: Option<EntropyMode>,
}

impl EntropySeries {
    pub fn new(trajectory: impl Into<String>, values: Vec<f64>) -> Self {
        let cleaned = vec![false; values.len()];
        EntropySeries {
            trajectory: trajectory.into(),
            values,
            cleaned,
            mode: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Estimates entropy at every frame `1..=T`. Frames are evaluated in
/// parallel; the result is independent of scheduling.
pub fn trajectory_entropy(
    sampler: &dyn ProxySampler,
    traj: &Trajectory,
    cfg: &EntropyConfig,
) -> Result<EntropySeries> {
    cfg.validate()?;
    let values = (1..=traj.len())
        .into_par_iter()
        .map(|t| {
            let set = pool_samples(sampler, traj, t, cfg).map_err(|e| Error::Sampling {
                trajectory: traj.id.clone(),
                t,
                source: Box::new(e),
            })?;
            Ok(frame_entropy(&set, cfg.mode, cfg.dims))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut series = EntropySeries::new(traj.id.clone(), values);
    series.mode = Some(cfg.mode);
    Ok(series)
}

pub fn entropy_file_name(i: usize) -> String {
    format!("entropy_{i}.csv")
}

#[derive(Serialize, Deserialize)]
struct EntropyRow {
    t: usize,
    entropy: f64,
}

/// Writes `t,entropy` rows (1-based `t`).
pub fn write_entropy_csv(path: &Path, series: &EntropySeries) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_writer(Vec::new());
    for (i, &entropy) in series.values.iter().enumerate() {
        writer.serialize(EntropyRow { t: i + 1, entropy }).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_atomic(path, &bytes)
}

/// Reads a `t,entropy` CSV; rows must be numbered `1..=T` in order.
pub fn read_entropy_csv(path: &Path, trajectory: &str) -> Result<EntropySeries> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut values = Vec::new();
    for row in reader.deserialize::<EntropyRow>() {
        let row = row.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if row.t != values.len() + 1 {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                message: format!("expected frame {}, found {}", values.len() + 1, row.t),
            });
        }
        if !row.entropy.is_finite() {
            return Err(Error::NonFinite {
                path: path.to_path_buf(),
                index: row.t - 1,
            });
        }
        values.push(row.entropy);
    }
    if values.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "no entropy rows".into(),
        });
    }
    Ok(EntropySeries::new(trajectory, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_traj(len: usize) -> Trajectory {
        Trajectory::new("flat", 1, vec![0.5; len], 50.0).unwrap()
    }

    fn cfg(n: usize, k: usize) -> EntropyConfig {
        EntropyConfig {
            n_samples: n,
            chunk_len: k,
            ..EntropyConfig::default()
        }
    }

    #[test]
    fn pool_size_clamps_at_start() {
        let traj = flat_traj(20);
        let sampler = SyntheticSampler::new().with(&traj, vec![0.1; 20]).unwrap();
        assert_eq!(pool_samples(&sampler, &traj, 1, &cfg(50, 7)).unwrap().pool_size(), 50);
        assert_eq!(pool_samples(&sampler, &traj, 10, &cfg(50, 4)).unwrap().pool_size(), 200);
        assert_eq!(pool_samples(&sampler, &traj, 3, &cfg(50, 4)).unwrap().pool_size(), 150);
    }

    #[test]
    fn zero_sigma_pool_is_the_mean() {
        let traj = flat_traj(12);
        let sampler = SyntheticSampler::new().with(&traj, vec![0.0; 12]).unwrap();
        let set = pool_samples(&sampler, &traj, 6, &cfg(10, 3)).unwrap();
        assert!(set.samples().iter().all(|&v| v == 0.5));
        assert_eq!(set.bandwidth(), &[MIN_BANDWIDTH]);
    }

    #[test]
    fn pool_rejects_out_of_range_frame() {
        let traj = flat_traj(5);
        let sampler = SyntheticSampler::new().with(&traj, vec![0.1; 5]).unwrap();
        assert!(pool_samples(&sampler, &traj, 0, &cfg(5, 2)).is_err());
        assert!(pool_samples(&sampler, &traj, 6, &cfg(5, 2)).is_err());
    }

    struct Lopsided;
    impl ProxySampler for Lopsided {
        fn sample(&self, _: &str, t: usize, k: usize, n: usize, _: u64) -> Result<Vec<crate::model::ActionChunk>> {
            (0..n)
                .map(|_| crate::model::ActionChunk::new(t, 2, vec![0.0; 2 * k]))
                .collect()
        }
    }

    #[test]
    fn sampler_shape_errors_carry_the_frame() {
        let traj = flat_traj(4);
        let err = trajectory_entropy(&Lopsided, &traj, &cfg(5, 2)).unwrap_err();
        assert!(matches!(err, Error::Sampling { t: 1, .. }), "{err}");
    }

    #[test]
    fn single_frame_trajectory() {
        let traj = flat_traj(1);
        let sampler = SyntheticSampler::new().with(&traj, vec![0.1]).unwrap();
        let series = trajectory_entropy(&sampler, &traj, &cfg(20, 4)).unwrap();
        assert_eq!(series.len(), 1);
        assert!(series.values[0].is_finite());
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1, 3).validate().is_err());
        assert!(cfg(2, 0).validate().is_err());
        let fixed = EntropyConfig {
            bandwidth: Bandwidth::Fixed(0.0),
            ..EntropyConfig::default()
        };
        assert!(fixed.validate().is_err());
        assert!("0.25".parse::<Bandwidth>().unwrap() == Bandwidth::Fixed(0.25));
        assert!("-1".parse::<Bandwidth>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("entropy_0.csv");
        let series = EntropySeries::new("x", vec![1.5, -0.25, 1e-300, 12345.678]);
        write_entropy_csv(&path, &series).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,entropy\n1,1.5\n"));
        assert_eq!(read_entropy_csv(&path, "x").unwrap(), series);
    }

    #[test]
    fn csv_rejects_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        std::fs::write(&path, "t,entropy\n1,0.5\n3,0.7\n").unwrap();
        assert!(read_entropy_csv(&path, "x").is_err());
    }
}
