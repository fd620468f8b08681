//! Classical multiclass classifiers over TF-IDF rows.

mod forest;
mod knn;
mod linear;

pub use forest::{train_forest, ForestHyperparams, ForestModel, Node, Tree};
pub use knn::{train_knn, KnnModel};
pub use linear::{
    logreg_gradient, logreg_objective, svm_objective, train_logreg, train_svm, LinearHyperparams, LinearModel, Loss,
};

use serde::{Deserialize, Serialize};

use crate::features::DocTermMatrix;
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error("{rows} feature rows but {labels} labels")]
    DimensionMismatch { rows: usize, labels: usize },
    #[error("training data has fewer than two distinct classes")]
    SingleClass,
    #[error("model expects {expected} features, input has {found}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    BadHyperparam(String),
}

/// Sorted distinct labels and each row's index into them.
pub(crate) fn encode_labels(x: &DocTermMatrix, y: &[Label]) -> Result<(Vec<Label>, Vec<usize>), ClassifyError> {
    if x.n_rows() != y.len() {
        return Err(ClassifyError::DimensionMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    let mut classes: Vec<Label> = y.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ClassifyError::SingleClass);
    }
    let encoded = y
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    Ok((classes, encoded))
}

pub(crate) fn check_features(expected: usize, x: &DocTermMatrix) -> Result<(), ClassifyError> {
    if x.n_features != expected {
        return Err(ClassifyError::FeatureMismatch {
            expected,
            found: x.n_features,
        });
    }
    Ok(())
}

/// Index of the largest score; the earliest class wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier {
    fn classes(&self) -> &[Label];

    /// One row per document, one column per entry of [`Classifier::classes`].
    fn predict_scores(&self, x: &DocTermMatrix) -> Result<Vec<Vec<f64>>, ClassifyError>;

    fn predict(&self, x: &DocTermMatrix) -> Result<Vec<Label>, ClassifyError> {
        let classes = self.classes();
        Ok(self.predict_scores(x)?.iter().map(|row| classes[argmax(row)]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svm,
    Logreg,
    Forest,
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Svm, ModelKind::Logreg, ModelKind::Forest, ModelKind::Knn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Logreg => "logreg",
            ModelKind::Forest => "forest",
            ModelKind::Knn => "knn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Svm => "SVM",
            ModelKind::Logreg => "Logistic Reg.",
            ModelKind::Forest => "Random Forest",
            ModelKind::Knn => "KNN",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(ModelKind::Svm),
            "logreg" | "logistic" | "lr" => Ok(ModelKind::Logreg),
            "forest" | "rf" | "random-forest" => Ok(ModelKind::Forest),
            "knn" => Ok(ModelKind::Knn),
            other => Err(format!("unknown model `{other}` (svm, logreg, forest, knn)")),
        }
    }
}

/// Any trained model, tagged for JSON persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Linear(LinearModel),
    Forest(ForestModel),
    Knn(KnnModel),
}

impl Classifier for Model {
    fn classes(&self) -> &[Label] {
        match self {
            Model::Linear(m) => m.classes(),
            Model::Forest(m) => m.classes(),
            Model::Knn(m) => m.classes(),
        }
    }

    fn predict_scores(&self, x: &DocTermMatrix) -> Result<Vec<Vec<f64>>, ClassifyError> {
        match self {
            Model::Linear(m) => m.predict_scores(x),
            Model::Forest(m) => m.predict_scores(x),
            Model::Knn(m) => m.predict_scores(x),
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn encode_rejects_degenerate_inputs() {
        let x = testdata::matrix(&[&[1.0], &[1.0]]);
        assert_eq!(
            encode_labels(&x, &[Label::Hope]).unwrap_err(),
            ClassifyError::DimensionMismatch { rows: 2, labels: 1 }
        );
        assert_eq!(
            encode_labels(&x, &[Label::Hope, Label::Hope]).unwrap_err(),
            ClassifyError::SingleClass
        );
        let (classes, enc) = encode_labels(&x, &[Label::Despair, Label::Outrage]).unwrap();
        assert_eq!(classes, [Label::Outrage, Label::Despair]);
        assert_eq!(enc, [1, 0]);
    }

    #[test]
    fn model_kind_names() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
    }
}
