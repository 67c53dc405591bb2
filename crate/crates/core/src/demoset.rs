//! Reading and writing the `demoset v1` directory format.
//!
//! A dataset directory holds `manifest.json` plus one `traj_<i>.bin` per
//! trajectory. Each binary file starts with a 16-byte header:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `DSUP`                  |
//! | 4      | 1    | version (`1`)                 |
//! | 5      | 3    | reserved, zero                |
//! | 8      | 4    | `T`, u32 little-endian        |
//! | 12     | 4    | `D`, u32 little-endian        |
//!
//! followed by `T·D` little-endian `f32` values in frame-major order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Trajectory};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAJ_MAGIC: [u8; 4] = *b"DSUP";
pub const FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    action_dim: usize,
    frequency_hz: f64,
    trajectories: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    file: String,
    length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    obs_refs: Option<Vec<u64>>,
}

/// File name of the `i`-th trajectory (0-based position in the manifest).
pub fn traj_file_name(i: usize) -> String {
    format!("traj_{i}.bin")
}

/// Loads a dataset directory, rejecting malformed headers, size mismatches
/// and non-finite actions.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::DatasetNotFound(dir.to_path_buf()));
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingFile(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&manifest_path, e))?;
    if manifest.version != u32::from(FORMAT_VERSION) {
        return Err(Error::UnsupportedVersion {
            path: manifest_path,
            version: manifest.version,
        });
    }
    if let Some(missing) = manifest
        .trajectories
        .iter()
        .map(|e| dir.join(&e.file))
        .find(|p| !p.is_file())
    {
        return Err(Error::MissingFile(missing));
    }

    let mut trajectories = Vec::with_capacity(manifest.trajectories.len());
    for entry in &manifest.trajectories {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let (len, dim, actions) = decode_traj(&path, &bytes)?;
        if len != entry.length {
            return Err(Error::format(
                &path,
                format!("header declares T={len} but manifest declares length {}", entry.length),
            ));
        }
        if dim != manifest.action_dim {
            return Err(Error::format(
                &path,
                format!("header declares D={dim} but manifest declares action_dim {}", manifest.action_dim),
            ));
        }
        let mut traj = Trajectory::new(entry.id.clone(), dim, actions, manifest.frequency_hz)
            .map_err(|e| Error::format(&path, e.to_string()))?;
        if let Some(refs) = &entry.obs_refs {
            traj = traj
                .with_obs_refs(refs.clone())
                .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
        }
        trajectories.push(traj);
    }
    Ok(Dataset {
        trajectories,
        action_dim: manifest.action_dim,
        meta: manifest.meta,
    })
}

fn decode_traj(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, format!("file too short for header ({} bytes)", bytes.len())));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != TRAJ_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
            expected: TRAJ_MAGIC,
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version: u32::from(bytes[4]),
        });
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = len
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(Error::format(
            path,
            format!("declared T={len}, D={dim} is inconsistent with file size {}", bytes.len()),
        ));
    }
    let actions: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(index) = actions.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            path: path.to_path_buf(),
            index,
        });
    }
    Ok((len, dim, actions))
}

fn encode_traj(traj: &Trajectory) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + traj.actions().len() * 4);
    out.extend_from_slice(&TRAJ_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&[0; 3]);
    out.extend_from_slice(&(traj.len() as u32).to_le_bytes());
    out.extend_from_slice(&(traj.dim() as u32).to_le_bytes());
    for v in traj.actions() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Writes `dataset` to `dir`, creating it if needed. Every file is written
/// atomically; the manifest goes last.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    let frequency_hz = if dataset.is_empty() {
        return Err(Error::InvalidData("cannot write an empty dataset".into()));
    } else {
        dataset.frequency_hz().ok_or_else(|| {
            Error::InvalidData("trajectories have differing control frequencies".into())
        })?
    };
    if let Some(bad) = dataset.trajectories.iter().find(|t| t.dim() != dataset.action_dim) {
        return Err(Error::InvalidData(format!(
            "trajectory {} has dimension {} but dataset declares {}",
            bad.id,
            bad.dim(),
            dataset.action_dim
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut entries = Vec::with_capacity(dataset.len());
    for (i, traj) in dataset.trajectories.iter().enumerate() {
        let file = traj_file_name(i);
        write_atomic(&dir.join(&file), &encode_traj(traj))?;
        let default_refs = traj.obs_refs().iter().copied().eq(1..=traj.len() as u64);
        entries.push(ManifestEntry {
            id: traj.id.clone(),
            file,
            length: traj.len(),
            obs_refs: (!default_refs).then(|| traj.obs_refs().to_vec()),
        });
    }
    let manifest = Manifest {
        version: u32::from(FORMAT_VERSION),
        action_dim: dataset.action_dim,
        frequency_hz,
        trajectories: entries,
        meta: dataset.meta.clone(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "not a file path"))?
        .to_string_lossy();
    let tmp: PathBuf = path.with_file_name(format!(".{file_name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dataset() -> Dataset {
        let a = Trajectory::new("a", 2, vec![0.5, -1.25, 3.0, 1e-7], 50.0).unwrap();
        let b = Trajectory::new("b", 2, vec![7.0, 8.0], 50.0)
            .unwrap()
            .with_obs_refs(vec![42])
            .unwrap();
        let mut ds = Dataset::new(vec![a, b]);
        ds.meta.insert("task".into(), "transfer_cube".into());
        ds
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample_dataset();
        write_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn single_frame_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(vec![Trajectory::new("x", 1, vec![0.5], 50.0).unwrap()]);
        write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.trajectories[0].actions(), &[0.5]);
        assert_eq!(back.trajectories[0].frequency_hz, 50.0);
    }

    #[test]
    fn header_layout_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(vec![Trajectory::new("x", 3, vec![1.0; 6], 20.0).unwrap()]);
        write_dataset(&ds, dir.path()).unwrap();
        let bytes = fs::read(dir.path().join("traj_0.bin")).unwrap();
        assert_eq!(&bytes[..8], b"DSUP\x01\0\0\0");
        assert_eq!(&bytes[8..16], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&sample_dataset(), dir.path()).unwrap();
        let path = dir.path().join("traj_0.bin");
        let mut bytes = fs::read(&path).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        fs::write(&path, bytes).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
        assert!(err.to_string().contains("bad magic"));
        assert!(err.to_string().contains("traj_0.bin"));
    }

    #[test]
    fn missing_trajectory_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(
            (0..3)
                .map(|i| Trajectory::new(format!("t{i}"), 1, vec![1.0, 2.0], 10.0).unwrap())
                .collect(),
        );
        write_dataset(&ds, dir.path()).unwrap();
        fs::remove_file(dir.path().join("traj_2.bin")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("traj_2.bin"), "{err}");
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&sample_dataset(), dir.path()).unwrap();
        let path = dir.path().join("traj_0.bin");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("inconsistent with file size"), "{err}");
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&sample_dataset(), dir.path()).unwrap();
        let path = dir.path().join("traj_1.bin");
        let mut bytes = fs::read(&path).unwrap();
        bytes[16..20].copy_from_slice(&f32::INFINITY.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0, .. }));
        assert!(err.to_string().contains("traj_1.bin"));
    }

    #[test]
    fn missing_manifest_and_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::MissingFile(_))));
        let gone = dir.path().join("nope");
        let err = load_dataset(&gone).unwrap_err();
        assert!(err.to_string().contains("dataset not found"));
    }

    #[test]
    fn mixed_frequency_cannot_be_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = sample_dataset();
        ds.trajectories[1].frequency_hz = 20.0;
        assert!(write_dataset(&ds, dir.path()).is_err());
    }
}
