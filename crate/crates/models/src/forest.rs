//! Random forest of Gini CART trees grown on bootstrap samples with a random
//! feature subset drawn at every split.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dataset, ModelError, Result};
use crate::labels::{from_index, to_index, Label};

/// Number of features considered per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().ceil() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(n) => n.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 10,
            max_depth: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

fn majority(counts: [usize; 2]) -> Label {
    from_index(if counts[1] > counts[0] { 1 } else { 0 })
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return majority(*counts),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    max_depth: usize,
    max_features: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let mut c = [0; 2];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Lowest weighted child impurity for one feature, or `None` when constant.
    fn best_threshold(&self, idx: &[usize], f: usize, total: [usize; 2]) -> Option<(f64, f64)> {
        let mut order: Vec<(f64, usize)> = idx.iter().map(|&i| (self.x[i][f], self.y[i])).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        if order[0].0 == order[order.len() - 1].0 {
            return None;
        }
        let n = order.len() as f64;
        let mut left = [0usize; 2];
        let mut best: Option<(f64, f64)> = None;
        for s in 0..order.len() - 1 {
            left[order[s].1] += 1;
            if order[s].0 == order[s + 1].0 {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nl = (left[0] + left[1]) as f64;
            let score = (nl * gini(left) + (n - nl) * gini(right)) / n;
            let mut thr = order[s].0 + (order[s + 1].0 - order[s].0) / 2.0;
            if thr >= order[s + 1].0 {
                thr = order[s].0;
            }
            if best.is_none_or(|(b, _)| score < b) {
                best = Some((score, thr));
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&idx);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        if depth >= self.max_depth || counts[0] == 0 || counts[1] == 0 || idx.len() < 2 {
            return slot;
        }
        let d = self.x[idx[0]].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        // Draw the quota of candidate features; if all of them are constant
        // here keep drawing until one varies.
        let mut best: Option<BestSplit> = None;
        let mut informative = 0;
        let mut candidates: Vec<usize> = Vec::new();
        for &f in &features {
            if informative >= self.max_features {
                break;
            }
            candidates.push(f);
            let first = self.x[idx[0]][f];
            if idx.iter().any(|&i| self.x[i][f] != first) {
                informative += 1;
            }
        }
        candidates.sort_unstable();
        for f in candidates {
            if let Some((score, threshold)) = self.best_threshold(&idx, f, counts) {
                if best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        let Some(best) = best else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][best.feature] <= best.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        slot
    }
}

/// Grows one tree on the rows `idx` (repeats allowed).
pub fn train_tree(
    x: &[Vec<f64>],
    labels: &[Label],
    idx: Vec<usize>,
    max_depth: usize,
    max_features: MaxFeatures,
    rng: &mut ChaCha8Rng,
) -> Result<Tree> {
    let d = check_dataset(x, labels.len())?;
    if idx.is_empty() {
        return Err(ModelError::param("tree needs at least one row"));
    }
    let y: Vec<usize> = labels.iter().map(|&l| to_index(l)).collect();
    let mut g = Grower {
        x,
        y: &y,
        max_depth,
        max_features: max_features.resolve(d),
        nodes: Vec::new(),
    };
    g.grow(idx, 0, rng);
    Ok(Tree { nodes: g.nodes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub dim: usize,
}

pub fn rfc_train(x: &[Vec<f64>], labels: &[Label], cfg: &ForestConfig) -> Result<ForestModel> {
    let d = check_dataset(x, labels.len())?;
    if cfg.n_trees == 0 {
        return Err(ModelError::param("forest needs at least one tree"));
    }
    let n = x.len();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = earpipe_core::rng::stream(cfg.rng_seed, t as u64 + 1);
            let idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            train_tree(x, labels, idx, cfg.max_depth, cfg.max_features, &mut rng)
        })
        .collect::<Result<Vec<Tree>>>()?;
    Ok(ForestModel { trees, dim: d })
}

impl ForestModel {
    /// Votes per class (non-seizure, seizure).
    pub fn votes(&self, x: &[f64]) -> Result<[usize; 2]> {
        if x.len() != self.dim {
            return Err(ModelError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut v = [0; 2];
        for t in &self.trees {
            v[to_index(t.predict(x))] += 1;
        }
        Ok(v)
    }

    /// Majority vote; a tie goes to the lower class id.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.votes(x).map(majority)
    }
}
