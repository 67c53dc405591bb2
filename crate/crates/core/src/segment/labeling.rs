use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::demoset::{read_json, write_json};
use crate::error::{Error, Result};

/// Partition of frames `1..=T` into a precision set `P` and a casualness set `C`.
///
/// `P` is stored as sorted, merged, half-open runs of 1-based frames; `C` is
/// its complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionLabeling {
    pub trajectory: String,
    len: usize,
    precision: Vec<Range<usize>>,
}

impl PrecisionLabeling {
    /// All frames casual.
    pub fn all_casual(trajectory: impl Into<String>, len: usize) -> Self {
        PrecisionLabeling {
            trajectory: trajectory.into(),
            len,
            precision: Vec::new(),
        }
    }

    /// Builds a labeling from a per-frame mask (`mask[t-1]` is true for `t ∈ P`).
    pub fn from_mask(trajectory: impl Into<String>, mask: &[bool]) -> Self {
        let mut precision: Vec<Range<usize>> = Vec::new();
        for (i, _) in mask.iter().enumerate().filter(|(_, &p)| p) {
            let t = i + 1;
            match precision.last_mut() {
                Some(run) if run.end == t => run.end = t + 1,
                _ => precision.push(t..t + 1),
            }
        }
        PrecisionLabeling {
            trajectory: trajectory.into(),
            len: mask.len(),
            precision,
        }
    }

    /// Builds a labeling from inclusive 1-based precision ranges, which may
    /// overlap; anything outside `1..=len` is clipped.
    pub fn from_inclusive_ranges(
        trajectory: impl Into<String>,
        len: usize,
        ranges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut mask = vec![false; len];
        for (start, end) in ranges {
            for t in start.max(1)..=end.min(len) {
                mask[t - 1] = true;
            }
        }
        Self::from_mask(trajectory, &mask)
    }

    /// Number of frames `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_precision(&self, t: usize) -> bool {
        let idx = self.precision.partition_point(|r| r.end <= t);
        self.precision.get(idx).is_some_and(|r| r.contains(&t))
    }

    pub fn is_casual(&self, t: usize) -> bool {
        (1..=self.len).contains(&t) && !self.is_precision(t)
    }

    pub fn precision_runs(&self) -> &[Range<usize>] {
        &self.precision
    }

    pub fn casual_runs(&self) -> Vec<Range<usize>> {
        let mut runs = Vec::new();
        let mut next = 1;
        for r in &self.precision {
            if r.start > next {
                runs.push(next..r.start);
            }
            next = r.end;
        }
        if next <= self.len {
            runs.push(next..self.len + 1);
        }
        runs
    }

    pub fn precision_frames(&self) -> Vec<usize> {
        self.precision.iter().flat_map(Clone::clone).collect()
    }

    pub fn casual_frames(&self) -> Vec<usize> {
        self.casual_runs().into_iter().flatten().collect()
    }

    pub fn precision_count(&self) -> usize {
        self.precision.iter().map(|r| r.len()).sum()
    }

    /// `mask[t-1]` is true for precision frames.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len];
        for t in self.precision_frames() {
            mask[t - 1] = true;
        }
        mask
    }

    /// Intersection-over-union of the two precision sets (1 when both are empty).
    pub fn precision_iou(&self, other: &PrecisionLabeling) -> f64 {
        let a = self.mask();
        let b = other.mask();
        let n = a.len().max(b.len());
        let get = |m: &[bool], i: usize| m.get(i).copied().unwrap_or(false);
        let inter = (0..n).filter(|&i| get(&a, i) && get(&b, i)).count();
        let union = (0..n).filter(|&i| get(&a, i) || get(&b, i)).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// On-disk form: inclusive, 1-based frame ranges.
#[derive(Debug, Serialize, Deserialize)]
struct LabelsFile {
    trajectory: String,
    precision: Vec<[usize; 2]>,
    casual: Vec<[usize; 2]>,
}

pub fn labels_file_name(i: usize) -> String {
    format!("labels_{i}.json")
}

pub fn write_labels_json(path: &Path, labeling: &PrecisionLabeling) -> Result<()> {
    let inclusive = |runs: &[Range<usize>]| runs.iter().map(|r| [r.start, r.end - 1]).collect();
    let file = LabelsFile {
        trajectory: labeling.trajectory.clone(),
        precision: inclusive(labeling.precision_runs()),
        casual: inclusive(&labeling.casual_runs()),
    };
    write_json(path, &file)
}

/// Reads a labels file, checking that the ranges partition `1..=T` exactly.
pub fn read_labels_json(path: &Path) -> Result<PrecisionLabeling> {
    let file: LabelsFile = read_json(path)?;
    let mut runs: Vec<([usize; 2], bool)> = file
        .precision
        .iter()
        .map(|r| (*r, true))
        .chain(file.casual.iter().map(|r| (*r, false)))
        .collect();
    runs.sort();
    let mut mask = Vec::new();
    for ([start, end], precision) in runs {
        if start != mask.len() + 1 || end < start {
            return Err(Error::format(
                path,
                format!("ranges do not partition the frames (range [{start}, {end}] after frame {})", mask.len()),
            ));
        }
        mask.resize(end, precision);
    }
    Ok(PrecisionLabeling::from_mask(file.trajectory, &mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_and_complement() {
        let lab = PrecisionLabeling::from_inclusive_ranges("x", 10, [(3, 4), (5, 5), (8, 12)]);
        assert_eq!(lab.precision_runs(), &[3..6, 8..11]);
        assert_eq!(lab.casual_runs(), vec![1..3, 6..8]);
        assert!(lab.is_precision(5) && lab.is_casual(6) && !lab.is_casual(11));
        assert_eq!(lab.precision_count(), 6);
    }

    #[test]
    fn iou() {
        let a = PrecisionLabeling::from_inclusive_ranges("x", 10, [(1, 4)]);
        let b = PrecisionLabeling::from_inclusive_ranges("x", 10, [(3, 6)]);
        assert!((a.precision_iou(&b) - 2.0 / 6.0).abs() < 1e-12);
        let e = PrecisionLabeling::all_casual("x", 10);
        assert_eq!(e.precision_iou(&e), 1.0);
    }

    #[test]
    fn json_round_trip_is_inclusive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels_0.json");
        let lab = PrecisionLabeling::from_inclusive_ranges("traj", 9, [(2, 3), (9, 9)]);
        write_labels_json(&path, &lab).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["precision"], serde_json::json!([[2, 3], [9, 9]]));
        assert_eq!(v["casual"], serde_json::json!([[1, 1], [4, 8]]));
        assert_eq!(read_labels_json(&path).unwrap(), lab);
    }

    #[test]
    fn json_rejects_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.json");
        std::fs::write(&path, r#"{"trajectory":"a","precision":[[1,2]],"casual":[[4,5]]}"#).unwrap();
        assert!(read_labels_json(&path).is_err());
    }
}
