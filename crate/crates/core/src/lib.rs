//! Entropy-guided acceleration of robot demonstration datasets.
//!
//! The crate estimates how much a proxy policy's predicted actions vary at
//! every frame of a demonstration, splits each trajectory into precision and
//! casual regions from that signal, and downsamples casual regions harder
//! than precision ones when building the training set.
//!
//! ```no_run
//! use demospeedup::{accelerate, entropy, segment, testkit};
//!
//! let g = testkit::generate(&testkit::NoiseProfile::two_level(200, 2, (80, 120), 0.01, 0.1, 7))?;
//! let series = entropy::trajectory_entropy(&g.sampler, &g.trajectory, &entropy::EntropyConfig::default())?;
//! let labels = segment::segment(&series, &segment::SegmentConfig::default())?;
//! let ds = demospeedup::Dataset::new(vec![g.trajectory]);
//! let acc = accelerate::accelerate_dataset(&ds, &[labels], &accelerate::AccelerationConfig::default())?;
//! # Ok::<(), demospeedup::Error>(())
//! ```

pub mod accelerate;
pub mod demoset;
pub mod entropy;
mod error;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod segment;
pub mod testkit;

pub use demoset::{load_dataset, write_dataset};
pub use error::{Error, Result};
pub use model::{chunk_at, validate, ActionChunk, Dataset, Trajectory, ValidationIssue, ValidationReport};
