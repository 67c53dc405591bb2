//! Core demonstration types: trajectories, datasets, action chunks and
//! dataset validation.
//!
//! Actions are stored as `f32` (the on-disk precision) and widened to `f64`
//! whenever arithmetic happens. Frame indices are 1-based.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// A single demonstration: `T` time-ordered action vectors of dimension `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub frequency_hz: f64,
    dim: usize,
    actions: Vec<f32>,
    obs_refs: Vec<u64>,
}

impl Trajectory {
    /// Builds a trajectory from a row-major `T × dim` action buffer.
    ///
    /// Observation references default to the 1-based frame indices. Only the
    /// shape is checked here; value-level checks live in [`validate`].
    pub fn new(id: impl Into<String>, dim: usize, actions: Vec<f32>, frequency_hz: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("action dimension must be at least 1".into()));
        }
        if !actions.len().is_multiple_of(dim) {
            return Err(Error::InvalidData(format!(
                "action buffer of length {} is not a multiple of dimension {dim}",
                actions.len()
            )));
        }
        let len = actions.len() / dim;
        Ok(Trajectory {
            id: id.into(),
            frequency_hz,
            dim,
            actions,
            obs_refs: (1..=len as u64).collect(),
        })
    }

    /// Builds a trajectory from per-frame rows, narrowing to `f32`.
    pub fn from_rows(id: impl Into<String>, rows: &[Vec<f64>], frequency_hz: f64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidData("rows have differing lengths".into()));
        }
        let actions = rows.iter().flatten().map(|&v| v as f32).collect();
        Self::new(id, dim.max(1), actions, frequency_hz)
    }

    pub fn with_obs_refs(mut self, obs_refs: Vec<u64>) -> Result<Self> {
        if obs_refs.len() != self.len() {
            return Err(Error::InvalidData(format!(
                "trajectory {}: {} observation refs for {} frames",
                self.id,
                obs_refs.len(),
                self.len()
            )));
        }
        self.obs_refs = obs_refs;
        Ok(self)
    }

    /// Number of frames `T`.
    pub fn len(&self) -> usize {
        self.actions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Action dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Raw row-major action buffer.
    pub fn actions(&self) -> &[f32] {
        &self.actions
    }

    pub fn obs_refs(&self) -> &[u64] {
        &self.obs_refs
    }

    /// Action at 1-based frame `t`.
    ///
    /// Panics if `t` is outside `1..=T`.
    pub fn frame(&self, t: usize) -> &[f32] {
        assert!(t >= 1 && t <= self.len(), "frame {t} out of range 1..={}", self.len());
        &self.actions[(t - 1) * self.dim..t * self.dim]
    }

    /// Action at 1-based frame `t`, widened to `f64`.
    pub fn frame_f64(&self, t: usize) -> Vec<f64> {
        self.frame(t).iter().map(|&v| f64::from(v)).collect()
    }

    /// Observation reference paired with frame `t`.
    pub fn obs_ref(&self, t: usize) -> u64 {
        self.obs_refs[t - 1]
    }
}

/// A collection of demonstrations sharing one action dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub action_dim: usize,
    pub meta: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Self {
        let action_dim = trajectories.first().map_or(0, Trajectory::dim);
        Dataset {
            trajectories,
            action_dim,
            meta: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectory(&self, id: &str) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }

    /// The control frequency shared by every trajectory, if there is exactly one.
    pub fn frequency_hz(&self) -> Option<f64> {
        let first = self.trajectories.first()?.frequency_hz;
        self.trajectories
            .iter()
            .all(|t| t.frequency_hz.to_bits() == first.to_bits())
            .then_some(first)
    }
}

/// `K` consecutive actions starting at `origin_t`, padded past the trajectory end.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionChunk {
    pub origin_t: usize,
    dim: usize,
    rows: Vec<f64>,
}

impl ActionChunk {
    pub fn new(origin_t: usize, dim: usize, rows: Vec<f64>) -> Result<Self> {
        if dim == 0 || rows.is_empty() || !rows.len().is_multiple_of(dim) {
            return Err(Error::InvalidData(format!(
                "chunk buffer of length {} does not hold whole rows of dimension {dim}",
                rows.len()
            )));
        }
        Ok(ActionChunk { origin_t, dim, rows })
    }

    pub fn chunk_len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row `r` (0-based offset from the origin).
    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }
}

/// Extracts the chunk `[a_t, a_{t+1}, ..., a_{t+K-1}]`, repeating `a_T` for
/// rows that run past the end of the trajectory.
pub fn chunk_at(traj: &Trajectory, t: usize, k: usize) -> Result<ActionChunk> {
    let len = traj.len();
    if t == 0 || t > len {
        return Err(Error::FrameOutOfRange { t, len });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("chunk length must be at least 1".into()));
    }
    let rows = (0..k)
        .flat_map(|r| traj.frame((t + r).min(len)).iter().map(|&v| f64::from(v)))
        .collect();
    ActionChunk::new(t, traj.dim(), rows)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub trajectory: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, trajectory: &str, message: String) {
        self.issues.push(ValidationIssue {
            trajectory: trajectory.to_owned(),
            message,
        });
    }

    /// Converts a failed report into an error summarizing every issue.
    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let summary = self
            .issues
            .iter()
            .map(|i| format!("[{}] {}", i.trajectory, i.message))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidData(summary))
    }
}

/// Checks a dataset for non-finite actions, mismatched dimensions, empty
/// trajectories and mixed control frequencies.
pub fn validate(dataset: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    if dataset.trajectories.is_empty() {
        report.push("", "dataset has no trajectories".into());
        return report;
    }

    let dims: BTreeSet<usize> = dataset.trajectories.iter().map(Trajectory::dim).collect();
    let mixed_dims = dims.len() > 1;
    let reference_hz = dataset.trajectories[0].frequency_hz;
    let mut seen = BTreeSet::new();

    for traj in &dataset.trajectories {
        if !seen.insert(traj.id.as_str()) {
            report.push(&traj.id, "duplicate trajectory id".into());
        }
        if traj.is_empty() {
            report.push(&traj.id, "zero-length trajectory".into());
        }
        if mixed_dims {
            report.push(
                &traj.id,
                format!("mixed action dimensions: D={} while trajectories have {dims:?}", traj.dim()),
            );
        } else if traj.dim() != dataset.action_dim {
            report.push(
                &traj.id,
                format!("action dimension {} differs from dataset dimension {}", traj.dim(), dataset.action_dim),
            );
        }
        let bad: Vec<usize> = traj
            .actions()
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_finite())
            .map(|(i, _)| i)
            .collect();
        if let Some(&first) = bad.first() {
            report.push(
                &traj.id,
                format!(
                    "{} non-finite action value(s), first at frame {} dim {}",
                    bad.len(),
                    first / traj.dim() + 1,
                    first % traj.dim()
                ),
            );
        }
        if !(traj.frequency_hz.is_finite() && traj.frequency_hz > 0.0) {
            report.push(&traj.id, format!("invalid control frequency {}", traj.frequency_hz));
        } else if traj.frequency_hz != reference_hz {
            report.push(
                &traj.id,
                format!("control frequency {} Hz differs from {} Hz", traj.frequency_hz, reference_hz),
            );
        }
    }
    report
}
