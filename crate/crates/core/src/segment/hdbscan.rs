//! HDBSCAN over small 2-D point sets.
//!
//! Brute-force core distances, Prim's MST over the mutual-reachability graph,
//! single-linkage hierarchy, condensed tree and excess-of-mass extraction.
//! MST ties are broken by the lexicographic `(weight, lower index, higher
//! index)` order, which makes the tree (and so the labels) unique.

use std::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HdbscanParams {
    /// Defaults to `max(5, ceil(0.02 · n))`.
    pub min_cluster_size: Option<usize>,
    /// Defaults to the resolved `min_cluster_size`.
    pub min_samples: Option<usize>,
}

impl HdbscanParams {
    /// Resolves `(min_cluster_size, min_samples)` for `n` points.
    pub fn resolve(&self, n: usize) -> Result<(usize, usize)> {
        let mcs = self
            .min_cluster_size
            .unwrap_or_else(|| 5.max((0.02 * n as f64).ceil() as usize));
        if mcs < 2 {
            return Err(Error::InvalidConfig(format!("min_cluster_size must be at least 2, got {mcs}")));
        }
        let ms = self.min_samples.unwrap_or(mcs);
        if ms < 1 {
            return Err(Error::InvalidConfig("min_samples must be at least 1".into()));
        }
        Ok((mcs, ms))
    }
}

/// Per-point cluster assignment; `None` is noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    labels: Vec<Option<usize>>,
    n_clusters: usize,
}

impl ClusterLabels {
    pub fn all_noise(n: usize) -> Self {
        ClusterLabels {
            labels: vec![None; n],
            n_clusters: 0,
        }
    }

    /// Relabels clusters `0..k` in order of their first member.
    fn from_raw(raw: Vec<Option<usize>>) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let labels = raw
            .into_iter()
            .map(|l| {
                l.map(|c| match map.iter().find(|(from, _)| *from == c) {
                    Some(&(_, to)) => to,
                    None => {
                        map.push((c, map.len()));
                        map.len() - 1
                    }
                })
            })
            .collect();
        ClusterLabels {
            labels,
            n_clusters: map.len(),
        }
    }

    /// Builds labels from arbitrary cluster ids, renumbering them `0..k`.
    pub fn from_assignments(raw: &[Option<usize>]) -> Self {
        Self::from_raw(raw.to_vec())
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == Some(cluster)).collect()
    }
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    weight: f64,
    lo: usize,
    hi: usize,
}

impl Edge {
    fn new(weight: f64, a: usize, b: usize) -> Self {
        Edge {
            weight,
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    fn cmp(&self, other: &Edge) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
    }
}

/// Distance to the `k`-th nearest point, counting the point itself.
fn core_distances(points: &[[f64; 2]], k: usize) -> Vec<f64> {
    let k = k.clamp(1, points.len());
    points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| dist(p, q)).collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

fn mutual_reachability_mst(points: &[[f64; 2]], core: &[f64]) -> Vec<Edge> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<Edge>> = vec![None; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let w = dist(&points[current], &points[v]).max(core[current]).max(core[v]);
            let cand = Edge::new(w, current, v);
            if best[v].is_none_or(|b| cand.cmp(&b) == Ordering::Less) {
                best[v] = Some(cand);
            }
        }
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].unwrap().cmp(&best[b].unwrap()))
            .expect("graph is complete");
        edges.push(best[next].unwrap());
        in_tree[next] = true;
        current = next;
    }
    edges
}

struct LinkageNode {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

/// Single-linkage merge tree. Leaves are `0..n`; merge `m` is node `n + m`.
fn single_linkage(n: usize, mut edges: Vec<Edge>) -> Vec<LinkageNode> {
    edges.sort_by(Edge::cmp);
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut nodes = Vec::with_capacity(n.saturating_sub(1));
    for e in edges {
        let a = find(&mut parent, e.lo);
        let b = find(&mut parent, e.hi);
        let id = n + nodes.len();
        parent[a] = id;
        parent[b] = id;
        size[id] = size[a] + size[b];
        nodes.push(LinkageNode {
            left: a,
            right: b,
            distance: e.weight,
            size: size[id],
        });
    }
    nodes
}

enum Child {
    Point(usize),
    Cluster(usize),
}

struct CondensedEntry {
    parent: usize,
    child: Child,
    lambda: f64,
    size: usize,
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

/// Condensed cluster tree. Cluster 0 is the root; children are numbered
/// after their parents.
fn condense(n: usize, linkage: &[LinkageNode], min_cluster_size: usize) -> (Vec<CondensedEntry>, usize) {
    let node_size = |id: usize| if id < n { 1 } else { linkage[id - n].size };
    let leaves = |id: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                stack.push(linkage[x - n].right);
                stack.push(linkage[x - n].left);
            }
        }
        out
    };

    let mut entries = Vec::new();
    let mut n_clusters = 1;
    let root = n + linkage.len() - 1;
    let mut queue = std::collections::VecDeque::from([(root, 0usize)]);
    while let Some((node, cluster)) = queue.pop_front() {
        if node < n {
            continue;
        }
        let LinkageNode {
            left,
            right,
            distance,
            ..
        } = linkage[node - n];
        let lambda = lambda_of(distance);
        let (ls, rs) = (node_size(left), node_size(right));
        let big_left = ls >= min_cluster_size;
        let big_right = rs >= min_cluster_size;
        if big_left && big_right {
            for (child, size) in [(left, ls), (right, rs)] {
                let id = n_clusters;
                n_clusters += 1;
                entries.push(CondensedEntry {
                    parent: cluster,
                    child: Child::Cluster(id),
                    lambda,
                    size,
                });
                queue.push_back((child, id));
            }
        } else {
            for (child, big) in [(left, big_left), (right, big_right)] {
                if big {
                    queue.push_back((child, cluster));
                } else {
                    for p in leaves(child) {
                        entries.push(CondensedEntry {
                            parent: cluster,
                            child: Child::Point(p),
                            lambda,
                            size: 1,
                        });
                    }
                }
            }
        }
    }
    (entries, n_clusters)
}

/// Runs HDBSCAN on `points`. Fewer points than `min_cluster_size` yields all noise.
///
/// When the hierarchy never splits into two clusters of `min_cluster_size`
/// points, the whole point set is returned as a single cluster.
pub fn hdbscan(points: &[[f64; 2]], params: &HdbscanParams) -> Result<ClusterLabels> {
    let n = points.len();
    let (mcs, ms) = params.resolve(n)?;
    if n < mcs || n < 2 {
        return Ok(ClusterLabels::all_noise(n));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite point passed to hdbscan".into()));
    }

    let core = core_distances(points, ms);
    let mst = mutual_reachability_mst(points, &core);
    let linkage = single_linkage(n, mst);
    let (entries, n_clusters) = condense(n, &linkage, mcs);

    if n_clusters == 1 {
        return Ok(ClusterLabels::from_raw(vec![Some(0); n]));
    }

    let mut birth = vec![0.0; n_clusters];
    let mut cluster_parent = vec![None; n_clusters];
    let mut point_parent = vec![0usize; n];
    for e in &entries {
        match e.child {
            Child::Cluster(c) => {
                birth[c] = e.lambda;
                cluster_parent[c] = Some(e.parent);
            }
            Child::Point(p) => point_parent[p] = e.parent,
        }
    }
    let mut stability = vec![0.0; n_clusters];
    for e in &entries {
        let b = birth[e.parent];
        if e.lambda != b {
            stability[e.parent] += (e.lambda - b) * e.size as f64;
        }
    }

    // Excess of mass, leaves first. The root is never selected here.
    let mut selected = vec![false; n_clusters];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for (c, parent) in cluster_parent.iter().enumerate().skip(1) {
        if let Some(p) = *parent {
            children[p].push(c);
        }
    }
    for c in (1..n_clusters).rev() {
        let subtree: f64 = children[c].iter().map(|&k| stability[k]).sum();
        if subtree > stability[c] {
            stability[c] = subtree;
        } else {
            selected[c] = true;
            let mut stack = children[c].clone();
            while let Some(k) = stack.pop() {
                selected[k] = false;
                stack.extend_from_slice(&children[k]);
            }
        }
    }

    let raw = (0..n)
        .map(|p| {
            let mut c = Some(point_parent[p]);
            while let Some(k) = c {
                if selected[k] {
                    return Some(k);
                }
                c = cluster_parent[k];
            }
            None
        })
        .collect();
    Ok(ClusterLabels::from_raw(raw))
}
