//! Entropy series → precision labeling.
//!
//! The pipeline is: isolation-forest outlier cleaning, per-episode z-scoring
//! of `(t, H)`, HDBSCAN, then keeping only clusters whose mean normalized
//! entropy is below zero as the precision set.

mod hdbscan;
mod iforest;
mod labeling;

pub use hdbscan::{hdbscan, ClusterLabels, HdbscanParams};
pub use iforest::{flag_outliers, isolation_scores, IsolationForestParams};
pub use labeling::{labels_file_name, read_labels_json, write_labels_json, PrecisionLabeling};

use crate::entropy::EntropySeries;
use crate::error::{Error, Result};

/// Cluster means within this distance of zero count as zero. Z-scored
/// coordinates are only mean-zero to about this precision.
pub const MEAN_TOLERANCE: f64 = 1e-9;

/// Normalized coordinates are snapped to this grid so that affinely related
/// entropy series produce bit-identical point sets.
const SNAP: f64 = 1e-10;

/// Replaces isolation-forest outliers with the nearest preceding unflagged
/// value (the nearest following one at the head of the series).
pub fn clean_outliers(series: &EntropySeries, params: &IsolationForestParams) -> Result<EntropySeries> {
    params.validate()?;
    if params.contamination == 0.0 || series.len() < 2 {
        return Ok(series.clone());
    }
    let flags = flag_outliers(&series.values, params)?;
    let mut out = series.clone();
    let first_valid = flags.iter().position(|f| !f).expect("contamination < 0.5 leaves valid frames");
    let mut last_valid = series.values[first_valid];
    for (i, &flagged) in flags.iter().enumerate() {
        if flagged {
            out.values[i] = last_valid;
            out.cleaned[i] = true;
        } else {
            last_valid = series.values[i];
        }
    }
    Ok(out)
}

/// Per-frame `(t_norm, H_norm)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<[f64; 2]>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn entropy(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p[1])
    }
}

/// Population z-score; a constant input maps to zeros.
pub fn z_scores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std.is_nan() || std <= f64::EPSILON * mean.abs().max(1.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

fn snap(v: f64) -> f64 {
    (v / SNAP).round() * SNAP
}

/// Z-scores the time index and the entropy of every frame; the time
/// coordinate is then multiplied by `time_weight`.
pub fn normalize(series: &EntropySeries, time_weight: f64) -> PointSet {
    let times: Vec<f64> = (1..=series.len()).map(|t| t as f64).collect();
    let t_norm = z_scores(&times);
    let h_norm = z_scores(&series.values);
    PointSet {
        points: t_norm
            .into_iter()
            .zip(h_norm)
            .map(|(t, h)| [snap(t * time_weight), snap(h)])
            .collect(),
    }
}

/// Frames in clusters whose mean normalized entropy is below zero form `P`;
/// everything else, noise included, forms `C`.
pub fn precision_label(trajectory: &str, labels: &ClusterLabels, points: &PointSet) -> Result<PrecisionLabeling> {
    if labels.len() != points.len() {
        return Err(Error::InvalidData(format!(
            "{} cluster labels for {} points",
            labels.len(),
            points.len()
        )));
    }
    let mut mask = vec![false; points.len()];
    for c in 0..labels.n_clusters() {
        let members = labels.members(c);
        let mean = members.iter().map(|&i| points.points[i][1]).sum::<f64>() / members.len() as f64;
        if mean < -MEAN_TOLERANCE {
            for i in members {
                mask[i] = true;
            }
        }
    }
    Ok(PrecisionLabeling::from_mask(trajectory, &mask))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    pub iforest: IsolationForestParams,
    pub hdbscan: HdbscanParams,
    /// Multiplier on the normalized time coordinate.
    pub time_weight: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            iforest: IsolationForestParams::default(),
            hdbscan: HdbscanParams::default(),
            time_weight: 1.0,
        }
    }
}

/// Full segmentation of one entropy series.
pub fn segment(series: &EntropySeries, cfg: &SegmentConfig) -> Result<PrecisionLabeling> {
    if !(cfg.time_weight.is_finite() && cfg.time_weight >= 0.0) {
        return Err(Error::InvalidConfig(format!("time weight must be non-negative, got {}", cfg.time_weight)));
    }
    if series.is_empty() {
        return Err(Error::InvalidData(format!("empty entropy series for {}", series.trajectory)));
    }
    if series.len() < 2 {
        return Ok(PrecisionLabeling::all_casual(series.trajectory.clone(), series.len()));
    }
    let cleaned = clean_outliers(series, &cfg.iforest)?;
    let points = normalize(&cleaned, cfg.time_weight);
    let labels = hdbscan(&points.points, &cfg.hdbscan)?;
    precision_label(&series.trajectory, &labels, &points)
}
