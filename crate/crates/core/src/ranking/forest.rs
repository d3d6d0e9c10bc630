use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RankingError, FEATURE_COUNT, FEATURE_NAMES};
use crate::hash::stream_seed;

pub const FOREST_FORMAT_VERSION: u32 = 1;

/// Candidate features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
}

impl MaxFeatures {
    /// Rounded down, never below one.
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (n_features as f64).log2().floor() as usize,
            MaxFeatures::All => n_features,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> ForestParams {
        ForestParams {
            n_estimators: 610,
            max_depth: 26,
            min_samples_split: 7,
            min_samples_leaf: 2,
            bootstrap: false,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), RankingError> {
        let bad = |m: &str| Err(RankingError::InvalidParams(m.to_string()));
        if self.n_estimators == 0 {
            return bad("n_estimators must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be at least 2");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1");
        }
        Ok(())
    }
}

/// Hyperparameter search space the defaults were tuned over. Carried in the
/// model file for reference only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n_estimators: (usize, usize),
    pub max_depth: (usize, usize),
    pub min_samples_split: (usize, usize),
    pub min_samples_leaf: (usize, usize),
    pub bootstrap: Vec<bool>,
    pub max_features: Vec<String>,
}

impl Default for SearchSpace {
    fn default() -> SearchSpace {
        SearchSpace {
            n_estimators: (100, 1000),
            max_depth: (3, 30),
            min_samples_split: (2, 20),
            min_samples_leaf: (1, 20),
            bootstrap: vec![true, false],
            max_features: vec!["sqrt".into(), "log2".into(), "none".into()],
        }
    }
}

/// Flat tree node. Leaves have `feature == None` and zero child indices;
/// internal nodes send `x[feature] <= threshold` to `left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Positive-class fraction of the training rows reaching this node.
    pub leaf_fraction: f64,
    pub n_samples: usize,
    pub impurity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match node.feature {
                None => return node.leaf_fraction,
                Some(f) => i = if x[f] <= node.threshold { node.left } else { node.right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i].feature {
                None => 0,
                Some(_) => 1 + walk(nodes, nodes[i].left).max(walk(nodes, nodes[i].right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.feature.is_none())
    }

    /// Unnormalised impurity decrease per feature.
    fn impurity_decrease(&self) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for n in &self.nodes {
            if let Some(f) = n.feature {
                let (l, r) = (&self.nodes[n.left], &self.nodes[n.right]);
                out[f] += n.n_samples as f64 * n.impurity
                    - l.n_samples as f64 * l.impurity
                    - r.n_samples as f64 * r.impurity;
            }
        }
        out
    }

    fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("empty tree".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !(0.0..=1.0).contains(&n.leaf_fraction) {
                return Err(format!("node {i} leaf fraction {}", n.leaf_fraction));
            }
            if let Some(f) = n.feature {
                if f >= FEATURE_COUNT {
                    return Err(format!("node {i} splits on feature {f}"));
                }
                // Children after their parent keeps every walk finite.
                for c in [n.left, n.right] {
                    if c <= i || c >= self.nodes.len() {
                        return Err(format!("node {i} has child index {c}"));
                    }
                }
                if !n.threshold.is_finite() {
                    return Err(format!("node {i} threshold {}", n.threshold));
                }
            }
        }
        Ok(())
    }
}

/// Random forest over the fixed feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankForest {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub params: ForestParams,
    pub search_space: SearchSpace,
    pub seed: u64,
    /// Training-set mean per feature; used for mean imputation in ablations.
    pub feature_means: [f64; FEATURE_COUNT],
    pub trees: Vec<Tree>,
}

fn gini_weighted(pos: usize, n: usize) -> f64 {
    // n · gini = 2·pos·(n − pos)/n
    if n == 0 {
        0.0
    } else {
        2.0 * pos as f64 * (n - pos) as f64 / n as f64
    }
}

struct Grower<'a> {
    x: &'a [[f64; FEATURE_COUNT]],
    y: &'a [bool],
    params: &'a ForestParams,
    max_features: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let n = idx.len();
        Node {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            leaf_fraction: pos as f64 / n as f64,
            n_samples: n,
            impurity: gini_weighted(pos, n) / n as f64,
        }
    }

    /// Best threshold on `f` as (weighted child impurity, threshold).
    fn best_on_feature(&self, idx: &mut [usize], f: usize) -> Option<(f64, f64)> {
        let x = self.x;
        idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.y[i]).count();
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<(f64, f64)> = None;
        let mut left_pos = 0;
        for i in 1..n {
            left_pos += self.y[idx[i - 1]] as usize;
            let (a, b) = (x[idx[i - 1]][f], x[idx[i]][f]);
            if i < min_leaf || n - i < min_leaf || a >= b {
                continue;
            }
            let child = gini_weighted(left_pos, i) + gini_weighted(total_pos - left_pos, n - i);
            if best.is_none_or(|(c, _)| child < c) {
                let mid = a + (b - a) / 2.0;
                best = Some((child, if mid < b { mid } else { a }));
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let node_id = self.nodes.len();
        let leaf = self.leaf(idx);
        let n = idx.len();
        let parent = leaf.impurity * n as f64;
        self.nodes.push(leaf);
        if depth >= self.params.max_depth
            || n < self.params.min_samples_split
            || n < 2 * self.params.min_samples_leaf
            || parent == 0.0
        {
            return node_id;
        }

        let mut order: Vec<usize> = (0..FEATURE_COUNT).collect();
        order.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        for (visited, &f) in order.iter().enumerate() {
            if visited >= self.max_features && best.is_some() {
                break;
            }
            if let Some((child, threshold)) = self.best_on_feature(idx, f) {
                if child < parent - 1e-12 && best.is_none_or(|(c, _, _)| child < c) {
                    best = Some((child, f, threshold));
                }
            }
        }
        let Some((_, f, threshold)) = best else { return node_id };

        idx.sort_unstable();
        let (mut left, mut right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][f] <= threshold);
        let l = self.grow(&mut left, depth + 1, rng);
        let r = self.grow(&mut right, depth + 1, rng);
        let node = &mut self.nodes[node_id];
        node.feature = Some(f);
        node.threshold = threshold;
        node.left = l;
        node.right = r;
        node_id
    }
}

const TAG_TREE: u64 = 0x7472_6565;

/// Grows CART trees on Gini impurity. Each tree draws from its own stream
/// keyed by (seed, tree index), so the result is independent of scheduling.
pub fn train_forest(
    rows: &[[f64; FEATURE_COUNT]],
    labels: &[bool],
    params: &ForestParams,
    seed: u64,
) -> Result<RankForest, RankingError> {
    params.validate()?;
    if rows.len() != labels.len() {
        return Err(RankingError::LengthMismatch(rows.len(), labels.len()));
    }
    if let Some(i) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(RankingError::NonFinite(i));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(RankingError::SingleClass);
    }
    let n = rows.len();
    let mut feature_means = [0.0; FEATURE_COUNT];
    for r in rows {
        for (m, v) in feature_means.iter_mut().zip(r) {
            *m += v;
        }
    }
    feature_means.iter_mut().for_each(|m| *m /= n as f64);

    let max_features = params.max_features.resolve(FEATURE_COUNT);
    let trees = (0..params.n_estimators as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[TAG_TREE, t]));
            let mut idx: Vec<usize> = if params.bootstrap {
                let mut v: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                v.sort_unstable();
                v
            } else {
                (0..n).collect()
            };
            let mut g = Grower { x: rows, y: labels, params, max_features, nodes: Vec::new() };
            g.grow(&mut idx, 0, &mut rng);
            Tree { nodes: g.nodes }
        })
        .collect();

    Ok(RankForest {
        version: FOREST_FORMAT_VERSION,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        params: *params,
        search_space: SearchSpace::default(),
        seed,
        feature_means,
        trees,
    })
}

impl RankForest {
    /// Mean positive-class leaf fraction over trees, summed in tree order.
    pub fn predict_proba(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        (sum / self.trees.len() as f64).clamp(0.0, 1.0)
    }

    /// Mean decrease in Gini impurity: normalised per tree, averaged, then
    /// renormalised. All zeros when no tree has a split.
    pub fn feature_importance(&self) -> [f64; FEATURE_COUNT] {
        let mut acc = [0.0; FEATURE_COUNT];
        for t in &self.trees {
            let d = t.impurity_decrease();
            let total: f64 = d.iter().sum();
            if total > 0.0 {
                for (a, v) in acc.iter_mut().zip(d) {
                    *a += v / total;
                }
            }
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            acc.iter_mut().for_each(|a| *a /= total);
        }
        acc
    }

    pub fn validate(&self) -> Result<(), RankingError> {
        let fmt = |m: String| Err(RankingError::Format(m));
        if self.version != FOREST_FORMAT_VERSION {
            return fmt(format!("unsupported model version {}", self.version));
        }
        if self.feature_names != FEATURE_NAMES {
            return fmt(format!("feature layout {:?} does not match {:?}", self.feature_names, FEATURE_NAMES));
        }
        if self.trees.is_empty() {
            return fmt("forest has no trees".into());
        }
        if self.feature_means.iter().any(|m| !m.is_finite()) {
            return fmt("non-finite feature mean".into());
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.validate().or_else(|m| fmt(format!("tree {i}: {m}")))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serialises")
    }

    pub fn from_json(text: &str) -> Result<RankForest, RankingError> {
        let f: RankForest = serde_json::from_str(text).map_err(|e| RankingError::Format(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }
}
