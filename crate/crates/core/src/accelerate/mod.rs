//! Entropy-guided piecewise downsampling and the baseline index policies.
//!
//! Every source frame `t` yields one training sample: the observation at `t`
//! paired with the actions at the downsampled indices that follow `t`. The
//! index path is regenerated from each start frame, so consecutive samples
//! see the offset copies of a downsampled chunk and no observation is lost.

mod awe;
mod contact;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use awe::{awe_star_indices, entropy_weights};
pub use contact::{contact_labeling, contacts_file_name, read_contacts_json, ContactEvent, ContactKind};

use crate::demoset::{write_atomic, write_dataset, write_json};
use crate::error::{Error, Result};
use crate::model::{Dataset, Trajectory};
use crate::segment::PrecisionLabeling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccelerationConfig {
    /// Step inside precision regions.
    pub r_low: usize,
    /// Step inside casual regions.
    pub r_high: usize,
    /// Accelerated chunk length.
    pub k_acc: usize,
}

impl Default for AccelerationConfig {
    fn default() -> Self {
        AccelerationConfig {
            r_low: 2,
            r_high: 4,
            k_acc: 24,
        }
    }
}

impl AccelerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_low < 1 || self.r_low > self.r_high {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= r_low <= r_high, got r_low={}, r_high={}",
                self.r_low, self.r_high
            )));
        }
        if self.k_acc < 1 {
            return Err(Error::InvalidConfig("accelerated chunk length must be at least 1".into()));
        }
        Ok(())
    }
}

/// Prefix counts of casual frames, for O(1) window membership tests.
struct CasualPrefix {
    prefix: Vec<usize>,
}

impl CasualPrefix {
    fn new(labeling: &PrecisionLabeling) -> Self {
        let mut prefix = Vec::with_capacity(labeling.len() + 1);
        prefix.push(0);
        for p in labeling.mask() {
            prefix.push(prefix.last().unwrap() + usize::from(!p));
        }
        CasualPrefix { prefix }
    }

    /// Whether every frame of the inclusive window `[lo, hi]`, truncated at
    /// the last frame, is casual.
    fn window_casual(&self, lo: usize, hi: usize) -> bool {
        let hi = hi.min(self.prefix.len() - 1);
        self.prefix[hi] - self.prefix[lo - 1] == hi - lo + 1
    }
}

fn piecewise_path(start: usize, len: usize, casual: &CasualPrefix, cfg: &AccelerationConfig, limit: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = start;
    while out.len() < limit {
        let step = if casual.window_casual(i, i + cfg.r_high) {
            cfg.r_high
        } else {
            cfg.r_low
        };
        i += step;
        if i > len {
            break;
        }
        out.push(i);
    }
    out
}

/// Downsampled frame indices after `t`: step `r_high` while the inclusive
/// window `[i, i + r_high]` (truncated at `len`) lies entirely in `C`, `r_low`
/// otherwise, stopping once an index would pass `len`.
pub fn piecewise_indices(t: usize, len: usize, labeling: &PrecisionLabeling, cfg: &AccelerationConfig) -> Vec<usize> {
    assert!(t >= 1 && t <= len, "start frame {t} outside 1..={len}");
    assert_eq!(labeling.len(), len, "labeling covers {} frames, expected {len}", labeling.len());
    piecewise_path(t, len, &CasualPrefix::new(labeling), cfg, usize::MAX)
}

/// `t + r, t + 2r, ...` up to `len`.
pub fn constant_indices(t: usize, len: usize, r: usize) -> Vec<usize> {
    assert!(r >= 1, "rate must be at least 1");
    (t + r..=len).step_by(r).collect()
}

/// Per-trajectory rule generating the index path from a start frame.
#[derive(Debug, Clone)]
pub enum IndexPlan {
    Piecewise {
        labeling: PrecisionLabeling,
        cfg: AccelerationConfig,
    },
    Constant(usize),
    /// Fixed waypoints; the path from `t` is every waypoint after `t`.
    Waypoints(Vec<usize>),
}

/// Generates index paths for one trajectory, reusing per-plan precomputation.
struct PathGenerator<'a> {
    plan: &'a IndexPlan,
    casual: Option<CasualPrefix>,
    len: usize,
}

impl<'a> PathGenerator<'a> {
    fn new(plan: &'a IndexPlan, len: usize) -> Self {
        let casual = match plan {
            IndexPlan::Piecewise { labeling, .. } => Some(CasualPrefix::new(labeling)),
            _ => None,
        };
        PathGenerator { plan, casual, len }
    }

    fn path(&self, t: usize, limit: usize) -> Vec<usize> {
        match self.plan {
            IndexPlan::Piecewise { cfg, .. } => {
                piecewise_path(t, self.len, self.casual.as_ref().unwrap(), cfg, limit)
            }
            IndexPlan::Constant(r) => (t + r..=self.len).step_by(*r).take(limit).collect(),
            IndexPlan::Waypoints(w) => w.iter().copied().filter(|&i| i > t && i <= self.len).take(limit).collect(),
        }
    }
}

impl IndexPlan {
    fn check(&self, traj: &Trajectory) -> Result<()> {
        match self {
            IndexPlan::Piecewise { labeling, cfg } => {
                cfg.validate()?;
                if labeling.len() != traj.len() {
                    return Err(Error::InvalidData(format!(
                        "labeling for {} covers {} frames, trajectory has {}",
                        traj.id,
                        labeling.len(),
                        traj.len()
                    )));
                }
            }
            IndexPlan::Constant(r) if *r == 0 => {
                return Err(Error::InvalidConfig("constant rate must be at least 1".into()));
            }
            IndexPlan::Waypoints(w) if w.windows(2).any(|p| p[0] >= p[1]) => {
                return Err(Error::InvalidData("waypoints must be strictly increasing".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Index path from frame 1 over the whole trajectory.
    pub fn full_path(&self, len: usize) -> Vec<usize> {
        PathGenerator::new(self, len).path(1, usize::MAX)
    }
}

/// One training pair: observation at `t` and the accelerated chunk after it.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceleratedSample {
    pub trajectory: String,
    pub t: usize,
    pub obs_ref: u64,
    /// Source frames of the chunk rows, tail-padded with `T`.
    pub indices: Vec<usize>,
    /// `K_acc × D`, row-major.
    pub actions: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub k_acc: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<AccelerationConfig>,
    /// FNV-1a digest of each labeling's precision runs, keyed by trajectory.
    pub labeling_digests: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceleratedDataset {
    /// Samples grouped by source trajectory, in dataset order.
    pub trajectories: Vec<Vec<AcceleratedSample>>,
    pub provenance: Provenance,
}

impl AcceleratedDataset {
    pub fn samples(&self) -> impl Iterator<Item = &AcceleratedSample> {
        self.trajectories.iter().flatten()
    }
}

/// Digest of a labeling, recorded in provenance.
pub fn labeling_digest(labeling: &PrecisionLabeling) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |v: u64| {
        for b in v.to_le_bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(labeling.len() as u64);
    for r in labeling.precision_runs() {
        feed(r.start as u64);
        feed(r.end as u64);
    }
    format!("{h:016x}")
}

fn samples_for(traj: &Trajectory, plan: &IndexPlan, k_acc: usize) -> Vec<AcceleratedSample> {
    let len = traj.len();
    let generator = PathGenerator::new(plan, len);
    (1..=len)
        .map(|t| {
            let mut indices = generator.path(t, k_acc);
            indices.resize(k_acc, len);
            let actions = indices.iter().flat_map(|&i| traj.frame(i).iter().copied()).collect();
            AcceleratedSample {
                trajectory: traj.id.clone(),
                t,
                obs_ref: traj.obs_ref(t),
                indices,
                actions,
            }
        })
        .collect()
}

/// Applies one index plan per trajectory (in dataset order).
pub fn accelerate_with_plans(
    dataset: &Dataset,
    plans: &[IndexPlan],
    k_acc: usize,
    method: impl Into<String>,
) -> Result<AcceleratedDataset> {
    if plans.len() != dataset.len() {
        return Err(Error::InvalidData(format!(
            "{} index plans for {} trajectories",
            plans.len(),
            dataset.len()
        )));
    }
    if k_acc < 1 {
        return Err(Error::InvalidConfig("accelerated chunk length must be at least 1".into()));
    }
    for (traj, plan) in dataset.trajectories.iter().zip(plans) {
        plan.check(traj)?;
    }
    let trajectories = dataset
        .trajectories
        .par_iter()
        .zip(plans.par_iter())
        .map(|(traj, plan)| samples_for(traj, plan, k_acc))
        .collect();
    let mut labeling_digests = BTreeMap::new();
    let mut config = None;
    for plan in plans {
        if let IndexPlan::Piecewise { labeling, cfg } = plan {
            labeling_digests.insert(labeling.trajectory.clone(), labeling_digest(labeling));
            config = Some(*cfg);
        }
    }
    Ok(AcceleratedDataset {
        trajectories,
        provenance: Provenance {
            method: method.into(),
            k_acc,
            config,
            labeling_digests,
        },
    })
}

fn piecewise_plans(dataset: &Dataset, labelings: &[PrecisionLabeling], cfg: &AccelerationConfig) -> Result<Vec<IndexPlan>> {
    cfg.validate()?;
    dataset
        .trajectories
        .iter()
        .map(|traj| {
            let labeling = labelings
                .iter()
                .find(|l| l.trajectory == traj.id)
                .ok_or_else(|| Error::MissingLabeling(traj.id.clone()))?;
            Ok(IndexPlan::Piecewise {
                labeling: labeling.clone(),
                cfg: *cfg,
            })
        })
        .collect()
}

/// Entropy-guided acceleration of every trajectory using its labeling.
pub fn accelerate_dataset(
    dataset: &Dataset,
    labelings: &[PrecisionLabeling],
    cfg: &AccelerationConfig,
) -> Result<AcceleratedDataset> {
    let plans = piecewise_plans(dataset, labelings, cfg)?;
    accelerate_with_plans(dataset, &plans, cfg.k_acc, "demospeedup")
}

/// Chunk length keeping the distance covered per chunk roughly constant:
/// `max(1, round(k_orig / speedup))`.
pub fn recommended_chunk(k_orig: usize, speedup: f64) -> Result<usize> {
    if k_orig < 1 {
        return Err(Error::InvalidConfig("original chunk length must be at least 1".into()));
    }
    if !(speedup.is_finite() && speedup >= 1.0) {
        return Err(Error::InvalidConfig(format!("speedup must be at least 1, got {speedup}")));
    }
    Ok(((k_orig as f64 / speedup).round() as usize).max(1))
}

/// Number of control steps spanning `seconds` at `frequency_hz`.
pub fn chunk_len_for_duration(seconds: f64, frequency_hz: f64) -> usize {
    (seconds * frequency_hz).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpeedup {
    pub trajectory: String,
    /// Source length `T`.
    pub original_len: usize,
    /// Frames visited by the accelerated replay, start and end included.
    pub accelerated_len: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupStats {
    pub trajectories: Vec<TrajectorySpeedup>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Speedup of one index path from frame 1.
///
/// The replay covers `T - 1` source steps in `S` accelerated steps, where
/// `S` counts the path indices plus one final step to `a_T` when the path
/// stops short of it. The ratio is `(T - 1) / S` (1 for a single frame).
pub fn path_speedup(trajectory: &str, len: usize, path: &[usize]) -> TrajectorySpeedup {
    let last = path.last().copied().unwrap_or(1);
    let steps = path.len() + usize::from(last < len);
    let ratio = if steps == 0 { 1.0 } else { (len - 1) as f64 / steps as f64 };
    TrajectorySpeedup {
        trajectory: trajectory.to_owned(),
        original_len: len,
        accelerated_len: steps + 1,
        ratio,
    }
}

fn aggregate(trajectories: Vec<TrajectorySpeedup>) -> SpeedupStats {
    let ratios: Vec<f64> = trajectories.iter().map(|t| t.ratio).collect();
    let n = ratios.len().max(1) as f64;
    SpeedupStats {
        mean: ratios.iter().sum::<f64>() / n,
        min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        trajectories,
    }
}

pub fn plan_speedup_stats(dataset: &Dataset, plans: &[IndexPlan]) -> Result<SpeedupStats> {
    if plans.len() != dataset.len() {
        return Err(Error::InvalidData(format!(
            "{} index plans for {} trajectories",
            plans.len(),
            dataset.len()
        )));
    }
    let per = dataset
        .trajectories
        .iter()
        .zip(plans)
        .map(|(traj, plan)| {
            plan.check(traj)?;
            Ok(path_speedup(&traj.id, traj.len(), &plan.full_path(traj.len())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(per))
}

/// Speedup of the entropy-guided replay from frame 1 of every trajectory.
pub fn speedup_stats(dataset: &Dataset, labelings: &[PrecisionLabeling], cfg: &AccelerationConfig) -> Result<SpeedupStats> {
    plan_speedup_stats(dataset, &piecewise_plans(dataset, labelings, cfg)?)
}

#[derive(Serialize)]
struct SampleLine<'a> {
    trajectory: &'a str,
    t: usize,
    indices: &'a [usize],
}

/// Writes `samples.jsonl` (one line per sample, dataset order).
pub fn write_samples_jsonl(path: &Path, acc: &AcceleratedDataset) -> Result<()> {
    let mut out = Vec::new();
    for s in acc.samples() {
        let line = SampleLine {
            trajectory: &s.trajectory,
            t: s.t,
            indices: &s.indices,
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| Error::json(path, e))?;
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

/// Writes the accelerated output directory: a copy of the source demoset
/// (tagged with provenance in its metadata), `samples.jsonl` and `stats.json`.
pub fn write_accelerated(dir: &Path, source: &Dataset, acc: &AcceleratedDataset, stats: &SpeedupStats) -> Result<()> {
    let mut tagged = source.clone();
    tagged.meta.insert("accelerated.method".into(), acc.provenance.method.clone());
    tagged.meta.insert("accelerated.k_acc".into(), acc.provenance.k_acc.to_string());
    if let Some(cfg) = acc.provenance.config {
        tagged.meta.insert("accelerated.r_low".into(), cfg.r_low.to_string());
        tagged.meta.insert("accelerated.r_high".into(), cfg.r_high.to_string());
    }
    for (id, digest) in &acc.provenance.labeling_digests {
        tagged.meta.insert(format!("accelerated.labeling.{id}"), digest.clone());
    }
    write_dataset(&tagged, dir)?;
    write_samples_jsonl(&dir.join("samples.jsonl"), acc)?;
    write_json(&dir.join("stats.json"), stats)
}
