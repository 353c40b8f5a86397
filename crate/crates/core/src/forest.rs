//! Random forest classifier: bootstrap-sampled Gini trees with a per-tree
//! random stream, so results do not depend on how trees are scheduled.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_TREES: usize = 900;

/// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Columns tried per split; `None` means ⌈sqrt(d)⌉.
    pub max_features: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: DEFAULT_TREES,
            max_features: None,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(seed: u64) -> Self {
        ForestConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn resolved_max_features(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Split column; `None` for a leaf.
    pub column: Option<usize>,
    pub threshold: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    /// Class counts of the (bootstrap) training samples reaching a leaf.
    pub leaf_counts: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf<'a>(&'a self, x: &[f64]) -> &'a [u32] {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            match (n.column, n.threshold) {
                (Some(c), Some(t)) => {
                    i = if x[c] <= t {
                        n.left.expect("split node has children")
                    } else {
                        n.right.expect("split node has children")
                    }
                }
                _ => return n.leaf_counts.as_deref().expect("leaf has counts"),
            }
        }
    }

    /// Class index voted by this tree: the leaf majority, ties to the
    /// smallest index.
    pub fn vote(&self, x: &[f64]) -> usize {
        argmax_first(self.leaf(x).iter().copied())
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match (t.nodes[i].left, t.nodes[i].right) {
                (Some(l), Some(r)) => 1 + go(t, l).max(go(t, r)),
                _ => 0,
            }
        }
        go(self, 0)
    }
}

fn argmax_first<T: PartialOrd>(it: impl IntoIterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in it.into_iter().enumerate() {
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((i, v));
        }
    }
    best.map_or(0, |(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    /// Sorted class labels; tree votes index into this.
    pub classes: Vec<String>,
    pub n_features: usize,
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
    /// Unnormalized impurity decrease per column, summed over trees.
    pub impurity_decrease: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<String>,
    /// Per row, the fraction of trees voting for each class (model class order).
    pub votes: Vec<Vec<f64>>,
}

fn gini_sum_sq(counts: &[u32]) -> u64 {
    counts.iter().map(|&c| c as u64 * c as u64).sum()
}

/// n · Gini = n − Σc²/n.
fn weighted_gini(counts: &[u32], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    n as f64 - gini_sum_sq(counts) as f64 / n as f64
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

struct Split {
    column: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.k];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<Split> {
        let d = self.x[0].len();
        let mut cols = index::sample(rng, d, self.mtry).into_vec();
        cols.sort_unstable();
        let total = self.counts(idx);
        let n = idx.len() as u32;
        let parent = weighted_gini(&total, n);
        let mut best: Option<Split> = None;
        let mut order = idx.to_vec();
        for &c in &cols {
            order.sort_by(|&a, &b| self.x[a][c].total_cmp(&self.x[b][c]));
            let mut left = vec![0u32; self.k];
            for pos in 0..order.len() - 1 {
                left[self.y[order[pos]]] += 1;
                let (lo, hi) = (self.x[order[pos]][c], self.x[order[pos + 1]][c]);
                if lo == hi {
                    continue;
                }
                let nl = pos as u32 + 1;
                let nr = n - nl;
                if (nl as usize) < self.min_leaf || (nr as usize) < self.min_leaf {
                    continue;
                }
                let right: Vec<u32> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let gain = parent - weighted_gini(&left, nl) - weighted_gini(&right, nr);
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split {
                        column: c,
                        threshold: lo + (hi - lo) / 2.0,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&idx);
        self.nodes.push(Node {
            column: None,
            threshold: None,
            left: None,
            right: None,
            leaf_counts: Some(counts.clone()),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || idx.len() < 2 * self.min_leaf || self.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let Some(split) = self.best_split(&idx, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][split.column] <= split.threshold);
        self.importance[split.column] += split.gain;
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node {
            column: Some(split.column),
            threshold: Some(split.threshold),
            left: Some(left),
            right: Some(right),
            leaf_counts: None,
        };
        id
    }
}

/// Random stream for one tree, independent of all others.
pub fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

impl ForestModel {
    /// Train on rows `x` with string labels `y`.
    pub fn fit<S: AsRef<str>>(x: &[Vec<f64>], y: &[S], config: &ForestConfig) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Invalid(format!("{} rows but {} labels", x.len(), y.len())));
        }
        let d = x[0].len();
        if d == 0 {
            return Err(Error::Invalid("feature matrix has no columns".into()));
        }
        if let Some(i) = x.iter().position(|r| r.len() != d) {
            return Err(Error::Invalid(format!("row {i} has {} columns, expected {d}", x[i].len())));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite feature value (impute before fitting)".into()));
        }
        if config.n_trees == 0 {
            return Err(Error::Invalid("n_trees must be at least 1".into()));
        }
        if config.min_leaf == 0 {
            return Err(Error::Invalid("min_leaf must be at least 1".into()));
        }
        let mut classes: Vec<String> = y.iter().map(|s| s.as_ref().to_string()).collect();
        classes.sort();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::Invalid(format!("need at least two classes, found {}", classes.len())));
        }
        let yi: Vec<usize> = y
            .iter()
            .map(|s| classes.binary_search_by(|c| c.as_str().cmp(s.as_ref())).expect("label in class list"))
            .collect();
        let mtry = config.resolved_max_features(d);
        let n = x.len();

        let built = par::map_range(config.n_trees, |t| {
            let mut rng = tree_rng(config.seed, t);
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut b = Builder {
                x,
                y: &yi,
                k: classes.len(),
                mtry,
                min_leaf: config.min_leaf,
                max_depth: config.max_depth,
                nodes: Vec::new(),
                importance: vec![0.0; d],
            };
            b.grow(sample, 0, &mut rng);
            (Tree { nodes: b.nodes }, b.importance)
        });

        let mut impurity_decrease = vec![0.0; d];
        let mut trees = Vec::with_capacity(built.len());
        for (tree, imp) in built {
            for (a, b) in impurity_decrease.iter_mut().zip(imp) {
                *a += b;
            }
            trees.push(tree);
        }
        Ok(ForestModel {
            format_version: MODEL_FORMAT_VERSION,
            classes,
            n_features: d,
            config: config.clone(),
            trees,
            impurity_decrease,
        })
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Prediction> {
        if let Some(r) = x.iter().find(|r| r.len() != self.n_features) {
            return Err(Error::Invalid(format!(
                "model expects {} columns, got {}",
                self.n_features,
                r.len()
            )));
        }
        let k = self.classes.len();
        let votes = par::map(x, |row| {
            let mut v = vec![0u32; k];
            for t in &self.trees {
                v[t.vote(row)] += 1;
            }
            v
        });
        let total = self.trees.len() as f64;
        Ok(Prediction {
            labels: votes
                .iter()
                .map(|v| self.classes[argmax_first(v.iter().copied())].clone())
                .collect(),
            votes: votes
                .iter()
                .map(|v| v.iter().map(|&c| c as f64 / total).collect())
                .collect(),
        })
    }

    /// Share of the total Gini decrease attributed to each column. Sums to 1;
    /// a forest with no splits at all gives equal shares.
    pub fn feature_importance(&self) -> Vec<f64> {
        let total: f64 = self.impurity_decrease.iter().sum();
        if total <= 0.0 {
            return vec![1.0 / self.n_features as f64; self.n_features];
        }
        self.impurity_decrease.iter().map(|v| v / total).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ForestModel = serde_json::from_str(text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "model format version {} not supported (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    /// Two Gaussian-ish blobs (sum of uniforms) in `d` dimensions; the first
    /// `informative` columns are shifted by `shift` for class "1".
    fn blobs(n: usize, d: usize, informative: usize, shift: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let cls = i % 2;
            let row = (0..d)
                .map(|j| {
                    let z: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
                    z + if j < informative && cls == 1 { shift } else { 0.0 }
                })
                .collect();
            x.push(row);
            y.push(cls.to_string());
        }
        (x, y)
    }

    fn accuracy(pred: &[String], truth: &[String]) -> f64 {
        pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
    }

    fn small(seed: u64, trees: usize) -> ForestConfig {
        ForestConfig {
            n_trees: trees,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = blobs(400, 4, 4, 6.0, 1);
        let (xt, yt) = blobs(200, 4, 4, 6.0, 2);
        let m = ForestModel::fit(&x, &y, &small(3, 50)).unwrap();
        let p = m.predict(&xt).unwrap();
        assert!(accuracy(&p.labels, &yt) >= 0.95);
        for v in &p.votes {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shuffled_labels_are_chance() {
        let mut accs = Vec::new();
        for seed in 0..20 {
            let (x, mut y) = blobs(200, 6, 0, 0.0, seed);
            y.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 100));
            let (xt, yt) = blobs(200, 6, 0, 0.0, seed + 1000);
            let m = ForestModel::fit(&x, &y, &small(seed, 60)).unwrap();
            accs.push(accuracy(&m.predict(&xt).unwrap().labels, &yt));
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((0.4..=0.6).contains(&mean), "{mean}");
    }

    #[test]
    fn determinism_across_thread_counts() {
        let (x, y) = blobs(120, 5, 2, 1.0, 9);
        let a = par::with_threads(1, || ForestModel::fit(&x, &y, &small(7, 40)).unwrap());
        let b = par::with_threads(4, || ForestModel::fit(&x, &y, &small(7, 40)).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = ForestModel::fit(&x, &y, &small(8, 40)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_stump_is_threshold_rule() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0].iter().map(|v| vec![*v]).collect();
        let y = ["a", "a", "a", "b", "b", "b"];
        let cfg = ForestConfig {
            n_trees: 1,
            max_depth: Some(1),
            seed: 0,
            ..Default::default()
        };
        let m = ForestModel::fit(&x, &y, &cfg).unwrap();
        let root = &m.trees[0].nodes[0];
        if let Some(t) = root.threshold {
            let probe: Vec<Vec<f64>> = (0..130).map(|i| vec![i as f64 / 10.0]).collect();
            let p = m.predict(&probe).unwrap();
            let left = m.trees[0].nodes[root.left.unwrap()].leaf_counts.clone().unwrap();
            let right = m.trees[0].nodes[root.right.unwrap()].leaf_counts.clone().unwrap();
            let lab = |c: &[u32]| m.classes[argmax_first(c.iter().copied())].clone();
            for (row, l) in probe.iter().zip(&p.labels) {
                let want = if row[0] <= t { lab(&left) } else { lab(&right) };
                assert_eq!(*l, want);
            }
        } else {
            // Bootstrap drew a single class: the leaf predicts it everywhere.
            assert_eq!(m.trees[0].nodes.len(), 1);
        }
    }

    #[test]
    fn vote_ties_go_to_smallest_label() {
        assert_eq!(argmax_first([2u32, 3, 3]), 1);
        let t = |cls: u32| Tree {
            nodes: vec![Node {
                column: None,
                threshold: None,
                left: None,
                right: None,
                leaf_counts: Some(if cls == 0 { vec![1, 0] } else { vec![0, 1] }),
            }],
        };
        let m = ForestModel {
            format_version: MODEL_FORMAT_VERSION,
            classes: vec!["alpha".into(), "beta".into()],
            n_features: 1,
            config: small(0, 2),
            trees: vec![t(1), t(0)],
            impurity_decrease: vec![0.0],
        };
        let p = m.predict(&[vec![0.0]]).unwrap();
        assert_eq!(p.labels, ["alpha"]);
        assert_eq!(m.feature_importance(), [1.0]);
    }

    #[test]
    fn monotone_transform_keeps_predictions() {
        let (x, y) = blobs(300, 4, 2, 1.5, 4);
        let (xt, _) = blobs(300, 4, 2, 1.5, 5);
        let tf = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| {
                    let mut r = r.clone();
                    r[0] = (r[0] + 20.0).ln();
                    r
                })
                .collect()
        };
        let a = ForestModel::fit(&x, &y, &small(2, 100)).unwrap();
        let b = ForestModel::fit(&tf(&x), &y, &small(2, 100)).unwrap();
        // Same split structure on the training points themselves.
        for (ta, tb) in a.trees.iter().zip(&b.trees) {
            assert_eq!(ta.nodes.len(), tb.nodes.len());
            for (na, nb) in ta.nodes.iter().zip(&tb.nodes) {
                assert_eq!(na.column, nb.column);
                assert_eq!(na.leaf_counts, nb.leaf_counts);
            }
        }
        assert_eq!(a.predict(&x).unwrap().labels, b.predict(&tf(&x)).unwrap().labels);
        let pa = a.predict(&xt).unwrap().labels;
        let pb = b.predict(&tf(&xt)).unwrap().labels;
        let agree = pa.iter().zip(&pb).filter(|(p, q)| p == q).count() as f64 / pa.len() as f64;
        assert!(agree >= 0.95, "{agree}");
    }

    #[test]
    fn importance_finds_the_signal() {
        let (x, y) = blobs(300, 8, 1, 3.0, 6);
        let m = ForestModel::fit(&x, &y, &small(1, 100)).unwrap();
        let imp = m.feature_importance();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(argmax_first(imp.iter().copied()), 0);
    }

    #[test]
    fn noise_importances_are_flat() {
        for seed in 0..20 {
            let (x, mut y) = blobs(200, 8, 0, 0.0, seed);
            y.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let m = ForestModel::fit(&x, &y, &small(seed, 50)).unwrap();
            let imp = m.feature_importance();
            let mean = 1.0 / imp.len() as f64;
            assert!(imp.iter().cloned().fold(0.0, f64::max) < 3.0 * mean);
        }
    }

    #[test]
    fn leaves_partition_the_bootstrap_sample() {
        let (x, y) = blobs(200, 5, 2, 1.0, 12);
        let m = ForestModel::fit(&x, &y, &small(0, 10)).unwrap();
        for t in &m.trees {
            let leaves: Vec<&Vec<u32>> = t.nodes.iter().filter_map(|n| n.leaf_counts.as_ref()).collect();
            assert_eq!(leaves.iter().map(|c| c.iter().sum::<u32>()).sum::<u32>(), 200);
            assert!(leaves.iter().all(|c| c.iter().sum::<u32>() >= m.config.min_leaf as u32));
            // Fully grown: every leaf is pure or holds identical rows.
            assert!(t.depth() > 0);
        }
    }

    #[test]
    fn json_round_trip_and_errors() {
        let (x, y) = blobs(60, 3, 1, 2.0, 0);
        let m = ForestModel::fit(&x, &y, &small(0, 5)).unwrap();
        let back = ForestModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(m.predict(&[vec![0.0; 2]]).is_err());
        assert!(ForestModel::fit(&x, &vec!["a"; 60], &small(0, 5)).is_err());
        assert!(ForestModel::fit(&[vec![], vec![]], &["a", "b"], &small(0, 5)).is_err());
        let mut bad = m.clone();
        bad.format_version = 99;
        assert!(ForestModel::from_json(&bad.to_json().unwrap()).is_err());
    }
}
