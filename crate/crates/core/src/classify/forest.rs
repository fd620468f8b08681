//! Random forest of CART trees (Gini impurity, bootstrap rows, sqrt(F) features per split).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, check_features, encode_labels, Classifier, ClassifyError};
use crate::features::DocTermMatrix;
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestHyperparams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        ForestHyperparams {
            n_trees: 200,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Weighted class histogram of the training rows that reached the leaf.
    Leaf { histogram: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_for(&self, x: &crate::features::SparseVec) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { histogram } => return histogram,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x.get(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub classes: Vec<Label>,
    pub n_features: usize,
    pub hyperparams: ForestHyperparams,
}

impl Classifier for ForestModel {
    fn classes(&self) -> &[Label] {
        &self.classes
    }

    /// Fraction of trees voting for each class.
    fn predict_scores(&self, x: &DocTermMatrix) -> Result<Vec<Vec<f64>>, ClassifyError> {
        check_features(self.n_features, x)?;
        let k = self.classes.len();
        let n_trees = self.trees.len() as f64;
        Ok(x.rows
            .par_iter()
            .map(|row| {
                let mut votes = vec![0.0; k];
                for t in &self.trees {
                    votes[argmax(t.leaf_for(row))] += 1.0;
                }
                votes.iter_mut().for_each(|v| *v /= n_trees);
                votes
            })
            .collect())
    }
}

/// Column-major view: for every feature, the (row, value) pairs with nonzero value.
struct Columns {
    postings: Vec<Vec<(usize, f64)>>,
}

impl Columns {
    fn new(x: &DocTermMatrix) -> Self {
        let mut postings = vec![Vec::new(); x.n_features];
        for (r, row) in x.rows.iter().enumerate() {
            for (j, v) in row.iter() {
                if v != 0.0 {
                    postings[j].push((r, v));
                }
            }
        }
        Columns { postings }
    }
}

struct TreeBuilder<'a> {
    x: &'a DocTermMatrix,
    columns: &'a Columns,
    y: &'a [usize],
    n_classes: usize,
    max_depth: Option<usize>,
    mtry: usize,
    rng: ChaCha8Rng,
    /// Persistent permutation; a partial Fisher-Yates pass draws features per node.
    feature_order: Vec<usize>,
    /// Scratch: weight of each row in the node being split (0 when absent).
    in_node: Vec<f64>,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(hist: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - hist.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

impl<'a> TreeBuilder<'a> {
    fn histogram(&self, rows: &[(usize, f64)]) -> Vec<f64> {
        let mut h = vec![0.0; self.n_classes];
        for &(r, w) in rows {
            h[self.y[r]] += w;
        }
        h
    }

    /// Nonzero values of `feature` among node rows, as (value, class, weight).
    fn gather(&self, feature: usize, rows: &[(usize, f64)]) -> Vec<(f64, usize, f64)> {
        let posting = &self.columns.postings[feature];
        if posting.len() <= rows.len() * 4 {
            posting
                .iter()
                .filter(|(r, _)| self.in_node[*r] > 0.0)
                .map(|&(r, v)| (v, self.y[r], self.in_node[r]))
                .collect()
        } else {
            rows.iter()
                .filter_map(|&(r, w)| {
                    let v = self.x.rows[r].get(feature);
                    (v != 0.0).then_some((v, self.y[r], w))
                })
                .collect()
        }
    }

    /// Best threshold on one feature, or `None` when the feature is constant in the node.
    fn best_threshold(
        &self,
        feature: usize,
        rows: &[(usize, f64)],
        node_hist: &[f64],
        node_total: f64,
    ) -> Option<(f64, f64)> {
        let mut entries = self.gather(feature, rows);
        // Rows with an implicit zero enter as one weighted entry per class.
        let mut zero_hist = node_hist.to_vec();
        for &(_, c, w) in &entries {
            zero_hist[c] -= w;
        }
        for (c, &w) in zero_hist.iter().enumerate() {
            if w > 1e-12 {
                entries.push((0.0, c, w));
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = vec![0.0; node_hist.len()];
        let mut left_total = 0.0;
        let mut best: Option<(f64, f64)> = None;
        let mut i = 0;
        while i < entries.len() {
            let v = entries[i].0;
            while i < entries.len() && entries[i].0 == v {
                left[entries[i].1] += entries[i].2;
                left_total += entries[i].2;
                i += 1;
            }
            let Some(next) = entries.get(i).map(|e| e.0) else {
                break;
            };
            let right_total = node_total - left_total;
            let right: Vec<f64> = node_hist.iter().zip(&left).map(|(n, l)| n - l).collect();
            let imp = (left_total * gini(&left, left_total) + right_total * gini(&right, right_total)) / node_total;
            if best.is_none_or(|(_, b)| imp < b) {
                best = Some(((v + next) / 2.0, imp));
            }
        }
        best
    }

    fn find_split(&mut self, rows: &[(usize, f64)], hist: &[f64], total: f64) -> Option<BestSplit> {
        for &(r, w) in rows {
            self.in_node[r] = w;
        }
        let n_features = self.feature_order.len();
        let mut best: Option<BestSplit> = None;
        let mut visited = 0;
        while visited < n_features && (visited < self.mtry || best.is_none()) {
            let j = self.rng.gen_range(visited..n_features);
            self.feature_order.swap(visited, j);
            let f = self.feature_order[visited];
            visited += 1;
            if let Some((threshold, impurity)) = self.best_threshold(f, rows, hist, total) {
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        for &(r, _) in rows {
            self.in_node[r] = 0.0;
        }
        best
    }

    fn build(&mut self, rows: Vec<(usize, f64)>, depth: usize) -> usize {
        let hist = self.histogram(&rows);
        let total: f64 = hist.iter().sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            histogram: hist.clone(),
        });
        let pure = hist.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || rows.len() < 2 {
            return id;
        }
        let Some(split) = self.find_split(&rows, &hist, total) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<_>, Vec<_>) = rows
            .into_iter()
            .partition(|&(r, _)| self.x.rows[r].get(split.feature) <= split.threshold);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn tree_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn train_forest(x: &DocTermMatrix, y: &[Label], hp: &ForestHyperparams) -> Result<ForestModel, ClassifyError> {
    if hp.n_trees == 0 {
        return Err(ClassifyError::BadHyperparam("n_trees must be >= 1".into()));
    }
    if hp.max_depth == Some(0) {
        return Err(ClassifyError::BadHyperparam("max_depth must be >= 1".into()));
    }
    let (classes, yi) = encode_labels(x, y)?;
    let columns = Columns::new(x);
    let n = x.n_rows();
    let mtry = ((x.n_features as f64).sqrt().floor() as usize).max(1);

    // Each tree owns its RNG stream, so parallel and serial builds agree bit for bit.
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(hp.seed, t));
            let mut weights = vec![0.0; n];
            if hp.bootstrap {
                for _ in 0..n {
                    weights[rng.gen_range(0..n)] += 1.0;
                }
            } else {
                weights.iter_mut().for_each(|w| *w = 1.0);
            }
            let rows: Vec<(usize, f64)> = weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(r, w)| (r, *w))
                .collect();
            let mut feature_order: Vec<usize> = (0..x.n_features).collect();
            feature_order.shuffle(&mut rng);
            let mut builder = TreeBuilder {
                x,
                columns: &columns,
                y: &yi,
                n_classes: classes.len(),
                max_depth: hp.max_depth,
                mtry,
                rng,
                feature_order,
                in_node: vec![0.0; n],
                nodes: Vec::new(),
            };
            builder.build(rows, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();
    Ok(ForestModel {
        trees,
        classes,
        n_features: x.n_features,
        hyperparams: *hp,
    })
}
