//! File-level orchestration of the curation stages.
//!
//! Each `run_*` function reads its inputs from disk, runs one stage and
//! writes its outputs atomically, so stages can be chained by directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;

use crate::accelerate::{
    accelerate_with_plans, awe_star_indices, contact_labeling, contacts_file_name, plan_speedup_stats,
    read_contacts_json, write_accelerated, AccelerationConfig, IndexPlan, SpeedupStats,
};
use crate::demoset::{load_dataset, write_atomic, write_dataset};
use crate::entropy::{
    entropy_file_name, read_entropy_csv, trajectory_entropy, write_entropy_csv, EntropyConfig, EntropySeries,
    FileSampler, ProxySampler, SyntheticSampler,
};
use crate::error::{Error, Result};
use crate::model::{validate, Dataset};
use crate::plot::{plot_file_name, render_svg};
use crate::segment::{labels_file_name, read_labels_json, segment, write_labels_json, PrecisionLabeling, SegmentConfig};
use crate::testkit::{generate_dataset, read_ground_truth, write_ground_truth, NoiseProfile, GROUND_TRUTH_FILE};

/// Where action samples for entropy estimation come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerChoice {
    /// Archived `samples_<i>.bin` files next to the dataset.
    File,
    /// Gaussian draws around the demonstrated actions, with per-frame scales
    /// read from the dataset's `ground_truth.json`.
    Synthetic,
}

impl FromStr for SamplerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "file" => Ok(SamplerChoice::File),
            "synthetic" => Ok(SamplerChoice::Synthetic),
            _ => Err(Error::InvalidConfig(format!("unknown sampler {s:?}; expected file or synthetic"))),
        }
    }
}

/// Index policy used by the accelerate stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Entropy-guided two-rate stepping over the segmentation labels.
    DemoSpeedup,
    /// Fixed step.
    Constant(usize),
    /// Entropy-weighted waypoints with the given error bound.
    Awe(f64),
    /// Two-rate stepping with precision frames within a window of contact changes.
    Contact(usize),
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown method {s:?}; expected demospeedup, constant:<r>, awe:<eps> or contact:<window>"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("demospeedup", None) => Ok(Method::DemoSpeedup),
            ("constant", Some(a)) => match a.parse::<usize>() {
                Ok(r) if r >= 1 => Ok(Method::Constant(r)),
                _ => Err(bad()),
            },
            ("awe", Some(a)) => match a.parse::<f64>() {
                Ok(e) if e.is_finite() && e >= 0.0 => Ok(Method::Awe(e)),
                _ => Err(bad()),
            },
            ("contact", Some(a)) => a.parse().map(Method::Contact).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::DemoSpeedup => f.write_str("demospeedup"),
            Method::Constant(r) => write!(f, "constant:{r}"),
            Method::Awe(e) => write!(f, "awe:{e}"),
            Method::Contact(w) => write!(f, "contact:{w}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRunConfig {
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub sampler: SamplerChoice,
    pub entropy: EntropyConfig,
    pub segment: SegmentConfig,
    pub acceleration: AccelerationConfig,
    /// Applied to every seeded stage.
    pub seed: u64,
}

impl PipelineRunConfig {
    pub fn new(dataset: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        PipelineRunConfig {
            dataset: dataset.into(),
            out: out.into(),
            sampler: SamplerChoice::Synthetic,
            entropy: EntropyConfig::default(),
            segment: SegmentConfig::default(),
            acceleration: AccelerationConfig::default(),
            seed: 0,
        }
    }

    pub fn entropy_config(&self) -> EntropyConfig {
        EntropyConfig {
            seed: self.seed,
            ..self.entropy.clone()
        }
    }

    pub fn segment_config(&self) -> SegmentConfig {
        let mut cfg = self.segment.clone();
        cfg.iforest.seed = self.seed;
        cfg
    }
}

/// Loads and validates a demoset.
pub fn open_dataset(dir: &Path) -> Result<Dataset> {
    let ds = load_dataset(dir)?;
    validate(&ds).into_result()?;
    Ok(ds)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Builds the sampler for a dataset stored in `dir`.
pub fn open_sampler(choice: SamplerChoice, dir: &Path, dataset: &Dataset) -> Result<Box<dyn ProxySampler>> {
    match choice {
        SamplerChoice::File => Ok(Box::new(FileSampler::open(dir, dataset)?)),
        SamplerChoice::Synthetic => {
            let truth = read_ground_truth(&dir.join(GROUND_TRUTH_FILE))?;
            let mut sampler = SyntheticSampler::new();
            for traj in &dataset.trajectories {
                let g = truth
                    .iter()
                    .find(|g| g.labeling.trajectory == traj.id)
                    .ok_or_else(|| Error::InvalidData(format!("no noise scales for trajectory {}", traj.id)))?;
                sampler.insert(traj, g.sigma.clone())?;
            }
            Ok(Box::new(sampler))
        }
    }
}

/// Entropy series for every trajectory, in dataset order.
pub fn estimate_dataset(sampler: &dyn ProxySampler, dataset: &Dataset, cfg: &EntropyConfig) -> Result<Vec<EntropySeries>> {
    dataset
        .trajectories
        .iter()
        .map(|traj| trajectory_entropy(sampler, traj, cfg))
        .collect()
}

/// Labeling for every series.
pub fn segment_all(series: &[EntropySeries], cfg: &SegmentConfig) -> Result<Vec<PrecisionLabeling>> {
    series.iter().map(|s| segment(s, cfg)).collect()
}

/// Writes a synthetic demoset and its `ground_truth.json` to `out`.
pub fn run_generate(profiles: &[NoiseProfile], out: &Path) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::InvalidConfig("no noise profiles given".into()));
    }
    let generated = generate_dataset(profiles)?;
    write_dataset(&generated.dataset, out)?;
    write_ground_truth(&out.join(GROUND_TRUTH_FILE), &generated.truth)?;
    info!("generated {} trajectories in {}", generated.dataset.len(), out.display());
    Ok(())
}

/// Writes `entropy_<i>.csv` for every trajectory.
pub fn run_estimate(cfg: &PipelineRunConfig) -> Result<Vec<EntropySeries>> {
    let dataset = open_dataset(&cfg.dataset)?;
    let sampler = open_sampler(cfg.sampler, &cfg.dataset, &dataset)?;
    let entropy_cfg = cfg.entropy_config();
    create_dir(&cfg.out)?;
    let mut all = Vec::with_capacity(dataset.len());
    for (i, traj) in dataset.trajectories.iter().enumerate() {
        let series = trajectory_entropy(sampler.as_ref(), traj, &entropy_cfg)?;
        write_entropy_csv(&cfg.out.join(entropy_file_name(i)), &series)?;
        info!("estimated entropy for {} ({} frames)", traj.id, traj.len());
        all.push(series);
    }
    Ok(all)
}

/// Reads `entropy_<i>.csv` for every trajectory of `dataset`.
pub fn read_entropy_dir(dir: &Path, dataset: &Dataset) -> Result<Vec<EntropySeries>> {
    dataset
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            let path = dir.join(entropy_file_name(i));
            let series = read_entropy_csv(&path, &traj.id)?;
            if series.len() != traj.len() {
                return Err(Error::format(
                    &path,
                    format!("{} entropy rows for a trajectory of {} frames", series.len(), traj.len()),
                ));
            }
            Ok(series)
        })
        .collect()
}

/// Reads `labels_<i>.json` for every trajectory of `dataset`.
pub fn read_labels_dir(dir: &Path, dataset: &Dataset) -> Result<Vec<PrecisionLabeling>> {
    dataset
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, traj)| {
            let path = dir.join(labels_file_name(i));
            let labeling = read_labels_json(&path)?;
            if labeling.trajectory != traj.id || labeling.len() != traj.len() {
                return Err(Error::format(
                    &path,
                    format!(
                        "labels for {} ({} frames) do not match trajectory {} ({} frames)",
                        labeling.trajectory,
                        labeling.len(),
                        traj.id,
                        traj.len()
                    ),
                ));
            }
            Ok(labeling)
        })
        .collect()
}

/// Segments the entropy series in `entropy_dir`, writing `labels_<i>.json`.
pub fn run_segment(cfg: &PipelineRunConfig, entropy_dir: &Path) -> Result<Vec<PrecisionLabeling>> {
    let dataset = open_dataset(&cfg.dataset)?;
    let series = read_entropy_dir(entropy_dir, &dataset)?;
    let labelings = segment_all(&series, &cfg.segment_config())?;
    create_dir(&cfg.out)?;
    for (i, labeling) in labelings.iter().enumerate() {
        write_labels_json(&cfg.out.join(labels_file_name(i)), labeling)?;
        info!(
            "{}: {} of {} frames labeled precision",
            labeling.trajectory,
            labeling.precision_count(),
            labeling.len()
        );
    }
    Ok(labelings)
}

/// Index plans for one method. Labels are needed by `demospeedup`, entropy
/// by `awe`; contact events are read from the dataset directory.
pub fn method_plans(
    method: Method,
    dataset: &Dataset,
    dataset_dir: &Path,
    acceleration: &AccelerationConfig,
    labels: Option<&[PrecisionLabeling]>,
    entropy: Option<&[EntropySeries]>,
) -> Result<Vec<IndexPlan>> {
    dataset
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, traj)| match method {
            Method::DemoSpeedup => {
                let labeling = labels
                    .and_then(|l| l.iter().find(|l| l.trajectory == traj.id))
                    .ok_or_else(|| Error::MissingLabeling(traj.id.clone()))?;
                Ok(IndexPlan::Piecewise {
                    labeling: labeling.clone(),
                    cfg: *acceleration,
                })
            }
            Method::Constant(r) => Ok(IndexPlan::Constant(r)),
            Method::Awe(eps) => {
                let series = entropy
                    .and_then(|e| e.iter().find(|s| s.trajectory == traj.id))
                    .ok_or_else(|| Error::InvalidData(format!("no entropy series for trajectory {}", traj.id)))?;
                Ok(IndexPlan::Waypoints(awe_star_indices(traj, series, eps)?))
            }
            Method::Contact(window) => {
                let events = read_contacts_json(&dataset_dir.join(contacts_file_name(i)))?;
                Ok(IndexPlan::Piecewise {
                    labeling: contact_labeling(&traj.id, &events, traj.len(), window)?,
                    cfg: *acceleration,
                })
            }
        })
        .collect()
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Writes the accelerated demoset, `samples.jsonl` and `stats.json` to
/// `cfg.out`. `labels_dir` and `entropy_dir` are only read when the method
/// needs them.
pub fn run_accelerate(
    cfg: &PipelineRunConfig,
    method: Method,
    labels_dir: &Path,
    entropy_dir: &Path,
) -> Result<SpeedupStats> {
    cfg.acceleration.validate()?;
    if same_dir(&cfg.dataset, &cfg.out) {
        return Err(Error::InvalidConfig("accelerated output must not overwrite the source dataset".into()));
    }
    let dataset = open_dataset(&cfg.dataset)?;
    let labels = match method {
        Method::DemoSpeedup => Some(read_labels_dir(labels_dir, &dataset)?),
        _ => None,
    };
    let entropy = match method {
        Method::Awe(_) => Some(read_entropy_dir(entropy_dir, &dataset)?),
        _ => None,
    };
    let plans = method_plans(
        method,
        &dataset,
        &cfg.dataset,
        &cfg.acceleration,
        labels.as_deref(),
        entropy.as_deref(),
    )?;
    let accelerated = accelerate_with_plans(&dataset, &plans, cfg.acceleration.k_acc, method.to_string())?;
    let stats = plan_speedup_stats(&dataset, &plans)?;
    write_accelerated(&cfg.out, &dataset, &accelerated, &stats)?;
    info!("{method}: mean speedup {:.3} over {} trajectories", stats.mean, dataset.len());
    Ok(stats)
}

/// Writes `plot_<i>.svg` for every trajectory.
pub fn run_plot(dataset_dir: &Path, entropy_dir: &Path, labels_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let dataset = open_dataset(dataset_dir)?;
    let series = read_entropy_dir(entropy_dir, &dataset)?;
    let labels = read_labels_dir(labels_dir, &dataset)?;
    create_dir(out)?;
    series
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (s, l))| {
            let path = out.join(plot_file_name(i));
            write_atomic(&path, render_svg(s, l)?.as_bytes())?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_parsing() {
        assert_eq!("demospeedup".parse::<Method>().unwrap(), Method::DemoSpeedup);
        assert_eq!("constant:3".parse::<Method>().unwrap(), Method::Constant(3));
        assert_eq!("awe:0.5".parse::<Method>().unwrap(), Method::Awe(0.5));
        assert_eq!("contact:10".parse::<Method>().unwrap(), Method::Contact(10));
        for bad in ["constant", "constant:0", "awe:-1", "awe:nan", "fast", "demospeedup:2"] {
            assert!(bad.parse::<Method>().is_err(), "{bad}");
        }
        assert_eq!(Method::Awe(0.25).to_string(), "awe:0.25");
    }

    #[test]
    fn sampler_parsing() {
        assert_eq!("file".parse::<SamplerChoice>().unwrap(), SamplerChoice::File);
        assert!("policy".parse::<SamplerChoice>().is_err());
    }
}
