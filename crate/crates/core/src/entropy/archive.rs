//! Sample archives exported by an external policy, and the sampler that
//! replays them.
//!
//! `samples_<i>.bin` layout: magic `DSMP`, version `u8`, then `T`, `N`, `K`,
//! `D` as little-endian `u32`, followed by `T·N·K·D` little-endian `f32` in
//! `(t, i, k, d)` order.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::ProxySampler;
use crate::demoset::write_atomic;
use crate::error::{Error, Result};
use crate::model::{ActionChunk, Dataset};

pub const SAMPLE_MAGIC: [u8; 4] = *b"DSMP";
pub const SAMPLE_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4 * 4;

pub fn sample_file_name(i: usize) -> String {
    format!("samples_{i}.bin")
}

/// Per-frame `N × K × D` chunk predictions for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleArchive {
    pub frames: usize,
    pub n_samples: usize,
    pub chunk_len: usize,
    pub dim: usize,
    data: Vec<f32>,
}

impl SampleArchive {
    pub fn new(frames: usize, n_samples: usize, chunk_len: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != frames * n_samples * chunk_len * dim {
            return Err(Error::InvalidData(format!(
                "sample tensor has {} values, expected {frames}x{n_samples}x{chunk_len}x{dim}",
                data.len()
            )));
        }
        Ok(SampleArchive {
            frames,
            n_samples,
            chunk_len,
            dim,
            data,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(path, "file too short for sample header"));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != SAMPLE_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found: magic,
                expected: SAMPLE_MAGIC,
            });
        }
        if bytes[4] != SAMPLE_VERSION {
            return Err(Error::UnsupportedVersion {
                path: path.to_path_buf(),
                version: u32::from(bytes[4]),
            });
        }
        let field = |i: usize| u32::from_le_bytes(bytes[5 + 4 * i..9 + 4 * i].try_into().unwrap()) as usize;
        let (frames, n, k, d) = (field(0), field(1), field(2), field(3));
        let count = [frames, n, k, d].iter().try_fold(1usize, |acc, &x| acc.checked_mul(x));
        if count.and_then(|c| c.checked_mul(4)).and_then(|c| c.checked_add(HEADER_LEN)) != Some(bytes.len()) {
            return Err(Error::format(
                path,
                format!("declared T={frames}, N={n}, K={k}, D={d} is inconsistent with file size {}", bytes.len()),
            ));
        }
        let data: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                path: path.to_path_buf(),
                index,
            });
        }
        Self::new(frames, n, k, d, data)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&SAMPLE_MAGIC);
        out.push(SAMPLE_VERSION);
        for v in [self.frames, self.n_samples, self.chunk_len, self.dim] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        write_atomic(path, &out)
    }

    /// The `N` chunks predicted at 1-based frame `t`.
    pub fn chunks_at(&self, t: usize) -> Result<Vec<ActionChunk>> {
        if t == 0 || t > self.frames {
            return Err(Error::FrameOutOfRange { t, len: self.frames });
        }
        let per_chunk = self.chunk_len * self.dim;
        let start = (t - 1) * self.n_samples * per_chunk;
        self.data[start..start + self.n_samples * per_chunk]
            .chunks_exact(per_chunk)
            .map(|c| ActionChunk::new(t, self.dim, c.iter().map(|&v| f64::from(v)).collect()))
            .collect()
    }
}

/// Replays archived samples; the seed is ignored since the archive is fixed.
#[derive(Debug, Clone, Default)]
pub struct FileSampler {
    archives: HashMap<String, SampleArchive>,
}

impl FileSampler {
    /// Loads `samples_<i>.bin` for every trajectory of `dataset` from `dir`,
    /// checking frame counts and action dimension.
    pub fn open(dir: &Path, dataset: &Dataset) -> Result<Self> {
        let mut archives = HashMap::new();
        for (i, traj) in dataset.trajectories.iter().enumerate() {
            let path = dir.join(sample_file_name(i));
            if !path.is_file() {
                return Err(Error::MissingFile(path));
            }
            let archive = SampleArchive::read(&path)?;
            if archive.frames != traj.len() || archive.dim != traj.dim() {
                return Err(Error::SamplerShape(format!(
                    "{}: archive holds T={}, D={} but trajectory {} has T={}, D={}",
                    path.display(),
                    archive.frames,
                    archive.dim,
                    traj.id,
                    traj.len(),
                    traj.dim()
                )));
            }
            archives.insert(traj.id.clone(), archive);
        }
        Ok(FileSampler { archives })
    }

    pub fn insert(&mut self, trajectory: impl Into<String>, archive: SampleArchive) {
        self.archives.insert(trajectory.into(), archive);
    }
}

impl ProxySampler for FileSampler {
    fn sample(&self, trajectory: &str, t: usize, chunk_len: usize, n: usize, _seed: u64) -> Result<Vec<ActionChunk>> {
        let archive = self
            .archives
            .get(trajectory)
            .ok_or_else(|| Error::UnknownTrajectory(trajectory.to_owned()))?;
        if archive.chunk_len != chunk_len || archive.n_samples != n {
            return Err(Error::SamplerShape(format!(
                "archive for {trajectory} holds N={}, K={} but N={n}, K={chunk_len} was requested",
                archive.n_samples, archive.chunk_len
            )));
        }
        archive.chunks_at(t)
    }
}
