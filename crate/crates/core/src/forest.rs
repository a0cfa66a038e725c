//! Random forest over metadata feature vectors: bootstrap samples, Gini
//! splits on a random feature subset per node, midpoint thresholds.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FEATURE_LEN;
use crate::{seed, NUM_CLASSES};

pub const FOREST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("gini of an empty node")]
    EmptyNode,
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("forest file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub features_per_split: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            // ceil(sqrt(10))
            features_per_split: 4,
            max_depth: 12,
            min_samples_leaf: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root at index 0; children always have larger indices than parents.
    pub nodes: Vec<Node>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub version: u32,
    pub config: ForestConfig,
    pub seed: u64,
    pub num_classes: usize,
    pub trees: Vec<DecisionTree>,
}

/// `1 − Σ p²` over class counts.
pub fn gini(counts: &[u32]) -> Result<f64, ForestError> {
    let n: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if n == 0 {
        return Err(ForestError::EmptyNode);
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (f64::from(c) / n).powi(2)).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted child impurity `(n_L·gini_L + n_R·gini_R) / n`.
    pub impurity: f64,
}

/// Exact comparison key for weighted child impurity. Minimizing
/// `n_L·g_L + n_R·g_R` equals maximizing `S_L/n_L + S_R/n_R` where `S` is the
/// sum of squared class counts, kept as the fraction `(S_L·n_R + S_R·n_L) / (n_L·n_R)`.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(left: &[u32], right: &[u32]) -> Score {
        let sq = |c: &[u32]| c.iter().map(|&v| u128::from(v) * u128::from(v)).sum::<u128>();
        let nl: u128 = left.iter().map(|&v| u128::from(v)).sum();
        let nr: u128 = right.iter().map(|&v| u128::from(v)).sum();
        Score {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn better_than(&self, other: &Score) -> bool {
        self.num * other.den > other.num * self.den
    }
}

/// Best split of `rows` over the candidate `features`, requiring at least
/// `min_leaf` rows per side and a strict impurity decrease. Ties go to the
/// lowest feature index, then the lowest threshold.
pub fn best_split(
    x: &[[f64; FEATURE_LEN]],
    y: &[usize],
    rows: &[usize],
    features: &[usize],
    num_classes: usize,
    min_leaf: usize,
) -> Option<Split> {
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let mut total = vec![0u32; num_classes];
    for &r in rows {
        total[y[r]] += 1;
    }
    let parent_sq: u128 = total.iter().map(|&v| u128::from(v) * u128::from(v)).sum();
    // Unsplit node as a score: S/n.
    let parent = Score {
        num: parent_sq,
        den: n as u128,
    };

    let mut feats = features.to_vec();
    feats.sort_unstable();
    feats.dedup();
    let mut best: Option<(Score, usize, f64)> = None;
    let mut sorted = rows.to_vec();
    for &f in &feats {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = vec![0u32; num_classes];
        let mut right = total.clone();
        for i in 0..n - 1 {
            let r = sorted[i];
            left[y[r]] += 1;
            right[y[r]] -= 1;
            let (v, next) = (x[r][f], x[sorted[i + 1]][f]);
            if v == next || i + 1 < min_leaf || n - (i + 1) < min_leaf {
                continue;
            }
            let s = Score::new(&left, &right);
            if !s.better_than(&parent) {
                continue;
            }
            let replace = match &best {
                None => true,
                Some((b, _, _)) => s.better_than(b),
            };
            if replace {
                let mid = v + (next - v) / 2.0;
                best = Some((s, f, if mid < next { mid } else { v }));
            }
        }
    }
    best.map(|(s, feature, threshold)| Split {
        feature,
        threshold,
        impurity: (n as f64 - s.num as f64 / s.den as f64) / n as f64,
    })
}

struct Builder<'a, R: Rng> {
    x: &'a [[f64; FEATURE_LEN]],
    y: &'a [usize],
    config: &'a ForestConfig,
    num_classes: usize,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let mut counts = vec![0u32; self.num_classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        Node::Leaf { counts }
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: Vec::new() });
        let pure = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        let split = if pure || depth >= self.config.max_depth {
            None
        } else {
            let k = self.config.features_per_split.clamp(1, FEATURE_LEN);
            let feats = sample(&mut self.rng, FEATURE_LEN, k).into_vec();
            best_split(
                self.x,
                self.y,
                rows,
                &feats,
                self.num_classes,
                self.config.min_samples_leaf,
            )
        };
        self.nodes[id] = match split {
            None => self.leaf(rows),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&row| self.x[row][s.feature] <= s.threshold);
                let left = self.build(&l, depth + 1);
                let right = self.build(&r, depth + 1);
                Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                }
            }
        };
        id
    }
}

impl DecisionTree {
    fn leaf_for(&self, x: &[f64; FEATURE_LEN]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Left (`false`) / right (`true`) choices from the root to a leaf.
    pub fn decision_path(&self, x: &[f64; FEATURE_LEN]) -> Vec<bool> {
        let mut path = Vec::new();
        let mut i = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
        } = &self.nodes[i]
        {
            let go_right = !(x[*feature] <= *threshold);
            path.push(go_right);
            i = if go_right { *right } else { *left };
        }
        path
    }

    /// Leaf class frequencies.
    pub fn predict(&self, x: &[f64; FEATURE_LEN]) -> Vec<f64> {
        let counts = self.leaf_for(x);
        let n: u32 = counts.iter().sum();
        counts.iter().map(|&c| f64::from(c) / f64::from(n)).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn check(&self, num_classes: usize) -> Result<(), ForestError> {
        let bad = |m: &str| Err(ForestError::Format(m.to_string()));
        if self.nodes.is_empty() {
            return bad("empty tree");
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { counts } => {
                    if counts.len() != num_classes || counts.iter().all(|&c| c == 0) {
                        return bad("leaf without counts");
                    }
                }
                Node::Split {
                    feature, left, right, ..
                } => {
                    // Children after parents rules out cycles.
                    if *feature >= FEATURE_LEN
                        || *left <= i
                        || *right <= i
                        || *left >= self.nodes.len()
                        || *right >= self.nodes.len()
                    {
                        return bad("bad split node");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Fits `config.n_trees` trees in parallel; tree `i` draws from its own
/// stream derived from `(seed, i)`, so the result is independent of threading.
pub fn fit_forest(
    x: &[[f64; FEATURE_LEN]],
    y: &[usize],
    config: &ForestConfig,
    seed: u64,
) -> Result<RandomForest, ForestError> {
    if x.len() != y.len() {
        return Err(ForestError::DegenerateData("feature and label counts differ".into()));
    }
    if x.len() < 2 {
        return Err(ForestError::DegenerateData("fewer than two examples".into()));
    }
    if let Some(&l) = y.iter().find(|&&l| l >= NUM_CLASSES) {
        return Err(ForestError::DegenerateData(format!("label {l} out of range")));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(ForestError::DegenerateData("a single class".into()));
    }
    if config.n_trees == 0 {
        return Err(ForestError::DegenerateData("zero trees requested".into()));
    }
    let n = x.len();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed, "forest-tree", t as u64);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                x,
                y,
                config,
                num_classes: NUM_CLASSES,
                rng,
                nodes: Vec::new(),
            };
            b.build(&rows, 0);
            DecisionTree {
                nodes: b.nodes,
                max_depth: config.max_depth,
                min_samples_leaf: config.min_samples_leaf,
            }
        })
        .collect();
    Ok(RandomForest {
        version: FOREST_VERSION,
        config: config.clone(),
        seed,
        num_classes: NUM_CLASSES,
        trees,
    })
}

/// Mean of the trees' leaf class distributions.
pub fn predict_forest(model: &RandomForest, x: &[f64; FEATURE_LEN]) -> Vec<f64> {
    let mut acc = vec![0.0; model.num_classes];
    for t in &model.trees {
        for (a, p) in acc.iter_mut().zip(t.predict(x)) {
            *a += p;
        }
    }
    let k = model.trees.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    acc
}

impl RandomForest {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<RandomForest, ForestError> {
        let f: RandomForest = serde_json::from_str(text).map_err(|e| ForestError::Format(e.to_string()))?;
        if f.version != FOREST_VERSION {
            return Err(ForestError::Format(format!("unsupported forest version {}", f.version)));
        }
        if f.trees.is_empty() {
            return Err(ForestError::Format("no trees".into()));
        }
        for t in &f.trees {
            t.check(f.num_classes)?;
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[10, 0, 0, 0]).unwrap(), 0.0);
        assert!((gini(&[5, 5, 0, 0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((gini(&[1, 1, 1, 1]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(gini(&[0, 0, 0, 0]), Err(ForestError::EmptyNode));
    }

    fn leaf(counts: [u32; 4]) -> DecisionTree {
        DecisionTree {
            nodes: vec![Node::Leaf {
                counts: counts.to_vec(),
            }],
            max_depth: 12,
            min_samples_leaf: 2,
        }
    }

    fn forest(trees: Vec<DecisionTree>) -> RandomForest {
        RandomForest {
            version: FOREST_VERSION,
            config: ForestConfig::default(),
            seed: 0,
            num_classes: 4,
            trees,
        }
    }

    #[test]
    fn pure_leaf_is_one_hot() {
        assert_eq!(
            predict_forest(&forest(vec![leaf([0, 0, 6, 0])]), &[0.0; 10]),
            vec![0.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn two_trees_average() {
        let f = forest(vec![leaf([3, 0, 0, 0]), leaf([0, 2, 0, 0])]);
        assert_eq!(predict_forest(&f, &[0.0; 10]), vec![0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = vec![[0.0; 10], [1.0; 10]];
        assert!(matches!(
            fit_forest(&x, &[1, 1], &ForestConfig::default(), 0),
            Err(ForestError::DegenerateData(_))
        ));
        assert!(matches!(
            fit_forest(&x[..1], &[1], &ForestConfig::default(), 0),
            Err(ForestError::DegenerateData(_))
        ));
    }

    #[test]
    fn json_rejects_cycles() {
        let mut f = forest(vec![leaf([1, 0, 0, 0])]);
        f.trees[0].nodes = vec![Node::Split {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 0,
        }];
        assert!(RandomForest::from_json(&f.to_json()).is_err());
    }
}
