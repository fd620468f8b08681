use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{coherence_cv, fit, fit_terms, CoherenceReport, LdaConfig, LdaError, TopicModel, DEFAULT_WINDOW};
use crate::features::{build_vocabulary, count_matrix, NgramRange, SparseVec};
use crate::label::Label;
use crate::preprocess::TokenizedDoc;

pub const DEFAULT_K_GRID: [usize; 5] = [5, 8, 10, 12, 15];

/// How topics are scored: C_v over each topic's `top_n` terms with the given window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicScoring {
    pub top_n: usize,
    pub window: usize,
}

impl Default for TopicScoring {
    fn default() -> Self {
        TopicScoring {
            top_n: 10,
            window: DEFAULT_WINDOW,
        }
    }
}

impl TopicScoring {
    pub fn score(&self, model: &TopicModel, docs: &[Vec<String>]) -> Result<CoherenceReport, LdaError> {
        coherence_cv(&model.top_terms(self.top_n), docs, self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub coherence: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub best_k: usize,
    pub table: Vec<KScore>,
    pub best: TopicModel,
}

/// Fits one model per candidate K and keeps the most coherent; ties go to the smaller K.
pub fn select_k(
    x: &[SparseVec],
    terms: &[String],
    docs: &[Vec<String>],
    candidates: &[usize],
    cfg: &LdaConfig,
    scoring: &TopicScoring,
) -> Result<KSelection, LdaError> {
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(LdaError::EmptyCandidates);
    }
    let mut table = Vec::with_capacity(ks.len());
    let mut best: Option<(f64, TopicModel)> = None;
    for k in ks {
        let model = fit_terms(x, terms, &cfg.with_k(k))?;
        let coherence = scoring.score(&model, docs)?.mean;
        log::info!("k = {k}: coherence {coherence:.4}");
        table.push(KScore {
            k,
            coherence,
            iterations: model.elbo_trace.len(),
            converged: model.converged,
        });
        if best.as_ref().is_none_or(|(c, _)| coherence > *c) {
            best = Some((coherence, model));
        }
    }
    let (_, best) = best.expect("at least one candidate");
    Ok(KSelection {
        best_k: best.k(),
        table,
        best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubModel {
    pub n_docs: usize,
    pub model: TopicModel,
    pub coherence: CoherenceReport,
}

/// One topic model per label present, each on its own unigram vocabulary,
/// all with the same configuration.
pub fn fit_sentiment_submodels(
    docs: &[TokenizedDoc],
    labels: &[Label],
    cfg: &LdaConfig,
    max_features: usize,
    scoring: &TopicScoring,
) -> Result<BTreeMap<Label, SubModel>, LdaError> {
    if docs.len() != labels.len() {
        return Err(LdaError::LabelMismatch(docs.len(), labels.len()));
    }
    let mut out = BTreeMap::new();
    for label in Label::ALL {
        let subset: Vec<TokenizedDoc> = docs
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == label)
            .map(|(d, _)| d.clone())
            .collect();
        if subset.is_empty() {
            continue;
        }
        let vocab = build_vocabulary(&subset, NgramRange::UNIGRAMS, max_features)?;
        let x = count_matrix(&subset, &vocab);
        let model = fit(&x, &vocab, cfg)?;
        let tokens: Vec<Vec<String>> = subset.iter().map(|d| d.tokens.clone()).collect();
        let coherence = scoring.score(&model, &tokens)?;
        out.insert(
            label,
            SubModel {
                n_docs: subset.len(),
                model,
                coherence,
            },
        );
    }
    Ok(out)
}
