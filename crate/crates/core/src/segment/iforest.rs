//! Isolation forest over a 1-D series.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForestParams {
    pub n_trees: usize,
    /// Capped at the series length.
    pub subsample: usize,
    /// Fraction of frames flagged as outliers.
    pub contamination: f64,
    pub seed: u64,
}

impl Default for IsolationForestParams {
    fn default() -> Self {
        IsolationForestParams {
            n_trees: 100,
            subsample: 256,
            contamination: 0.05,
            seed: 0,
        }
    }
}

impl IsolationForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("isolation forest needs at least one tree".into()));
        }
        if self.subsample < 2 {
            return Err(Error::InvalidConfig("isolation forest subsample must be at least 2".into()));
        }
        if !(0.0..0.5).contains(&self.contamination) {
            return Err(Error::InvalidConfig(format!(
                "contamination must lie in [0, 0.5), got {}",
                self.contamination
            )));
        }
        Ok(())
    }
}

/// Average path length of an unsuccessful BST search over `n` points.
pub(crate) fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

enum Node {
    Leaf { size: usize },
    Split { at: f64, left: usize, right: usize },
}

struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn build(values: &mut [f64], height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = Tree { nodes: Vec::new() };
        tree.grow(values, 0, height_limit, rng);
        tree
    }

    fn grow(&mut self, values: &mut [f64], depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if depth >= limit || values.len() <= 1 || lo >= hi {
            self.nodes.push(Node::Leaf { size: values.len() });
            return id;
        }
        let at = rng.random_range(lo..hi);
        self.nodes.push(Node::Leaf { size: 0 });
        let mut split = 0;
        for i in 0..values.len() {
            if values[i] < at {
                values.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = values.split_at_mut(split);
        let left = self.grow(l, depth + 1, limit, rng);
        let right = self.grow(r, depth + 1, limit, rng);
        self.nodes[id] = Node::Split { at, left, right };
        id
    }

    fn path_length(&self, x: f64) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Leaf { size } => return depth + average_path_length(size),
                Node::Split { at, left, right } => {
                    node = if x < at { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

/// Anomaly scores `2^(-E[h(x)] / c(ψ))` for every value, in `(0, 1]`.
pub fn isolation_scores(values: &[f64], params: &IsolationForestParams) -> Result<Vec<f64>> {
    params.validate()?;
    let n = values.len();
    if n < 2 {
        return Ok(vec![0.5; n]);
    }
    let psi = params.subsample.min(n);
    let limit = (psi as f64).log2().ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let trees: Vec<Tree> = (0..params.n_trees)
        .map(|_| {
            let mut sample: Vec<f64> = index::sample(&mut rng, n, psi).iter().map(|i| values[i]).collect();
            Tree::build(&mut sample, limit, &mut rng)
        })
        .collect();
    let norm = average_path_length(psi);
    Ok(values
        .iter()
        .map(|&x| {
            let mean = trees.iter().map(|t| t.path_length(x)).sum::<f64>() / trees.len() as f64;
            2f64.powf(-mean / norm)
        })
        .collect())
}

/// Flags the `ceil(contamination · n)` highest-scoring values (ties go to the
/// earlier frame).
pub fn flag_outliers(values: &[f64], params: &IsolationForestParams) -> Result<Vec<bool>> {
    params.validate()?;
    let n = values.len();
    let count = (params.contamination * n as f64).ceil() as usize;
    let mut flags = vec![false; n];
    if count == 0 || n < 2 {
        return Ok(flags);
    }
    let scores = isolation_scores(values, params)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    for &i in &order[..count.min(n - 1)] {
        flags[i] = true;
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_length_constants() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        // c(256) ≈ 10.24
        assert!((average_path_length(256) - 10.244_5).abs() < 1e-3);
    }

    #[test]
    fn spike_scores_highest() {
        let mut values: Vec<f64> = (0..200).map(|i| 1.0 + 0.01 * ((i * 37 % 19) as f64 / 9.0 - 1.0)).collect();
        values[100] = 10.0;
        let scores = isolation_scores(&values, &IsolationForestParams::default()).unwrap();
        let argmax = (0..200).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        assert_eq!(argmax, 100);
        assert!(scores[100] > 0.6, "{}", scores[100]);
    }

    #[test]
    fn flag_count_follows_contamination() {
        let values: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let params = IsolationForestParams {
            contamination: 0.1,
            ..Default::default()
        };
        assert_eq!(flag_outliers(&values, &params).unwrap().iter().filter(|f| **f).count(), 4);
        let none = IsolationForestParams {
            contamination: 0.0,
            ..Default::default()
        };
        assert!(flag_outliers(&values, &none).unwrap().iter().all(|f| !f));
    }

    #[test]
    fn rejects_bad_params() {
        let bad = IsolationForestParams {
            contamination: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let no_trees = IsolationForestParams {
            n_trees: 0,
            ..Default::default()
        };
        assert!(no_trees.validate().is_err());
    }
}
