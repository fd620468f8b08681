use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_features, encode_labels, Classifier, ClassifyError};
use crate::features::{DocTermMatrix, SparseVec};
use crate::label::Label;

/// k-nearest-neighbour vote under cosine distance.
///
/// The training matrix is stored inline so a persisted model is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub train: DocTermMatrix,
    /// Class index of every training row.
    pub labels: Vec<usize>,
    pub classes: Vec<Label>,
    pub k: usize,
}

pub fn train_knn(x: &DocTermMatrix, y: &[Label], k: usize) -> Result<KnnModel, ClassifyError> {
    if k == 0 {
        return Err(ClassifyError::BadHyperparam("k must be >= 1".into()));
    }
    let (classes, labels) = encode_labels(x, y)?;
    Ok(KnnModel {
        train: x.clone(),
        labels,
        classes,
        k,
    })
}

fn cosine_distance(a: &SparseVec, a_norm: f64, b: &SparseVec, b_norm: f64) -> f64 {
    if a_norm == 0.0 || b_norm == 0.0 {
        return 1.0;
    }
    1.0 - a.dot(b) / (a_norm * b_norm)
}

impl KnnModel {
    /// Indices of the `k` nearest training rows; equal distances go to the lower index.
    pub fn neighbours(&self, query: &SparseVec) -> Vec<usize> {
        let q_norm = query.norm();
        let mut dist: Vec<(f64, usize)> = self
            .train
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (cosine_distance(query, q_norm, r, r.norm()), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.truncate(self.k);
        dist.into_iter().map(|(_, i)| i).collect()
    }
}

impl Classifier for KnnModel {
    fn classes(&self) -> &[Label] {
        &self.classes
    }

    /// Vote fractions among the neighbours.
    fn predict_scores(&self, x: &DocTermMatrix) -> Result<Vec<Vec<f64>>, ClassifyError> {
        check_features(self.train.n_features, x)?;
        Ok(x.rows
            .par_iter()
            .map(|q| {
                let nn = self.neighbours(q);
                let mut votes = vec![0.0; self.classes.len()];
                for &i in &nn {
                    votes[self.labels[i]] += 1.0;
                }
                let n = nn.len() as f64;
                votes.iter_mut().for_each(|v| *v /= n);
                votes
            })
            .collect())
    }
}
