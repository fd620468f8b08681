//! Latent Dirichlet Allocation fitted by mean-field variational Bayes.

mod coherence;
mod select;

pub use coherence::{coherence_cv, coherence_umass, CoherenceReport, DEFAULT_WINDOW};
pub use select::{fit_sentiment_submodels, select_k, KScore, KSelection, SubModel, TopicScoring, DEFAULT_K_GRID};

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::features::{FeatureError, SparseVec, Vocabulary};

const INNER_MAX_ITERS: usize = 200;
const INNER_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum LdaError {
    #[error("invalid LDA configuration: {0}")]
    BadConfig(String),
    #[error("no documents to fit")]
    EmptyCorpus,
    #[error("every document is empty after vocabulary filtering")]
    AllDocsEmpty,
    #[error("feature index {index} outside a vocabulary of {n_features}")]
    FeatureOutOfRange { index: usize, n_features: usize },
    #[error("model was fitted on {expected} documents, got {found}")]
    DocCountMismatch { expected: usize, found: usize },
    #[error("no topics given")]
    EmptyTopics,
    #[error("coherence window must be at least 1")]
    BadWindow,
    #[error("no candidate topic counts given")]
    EmptyCandidates,
    #[error("{0} documents but {1} labels")]
    LabelMismatch(usize, usize),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaConfig {
    pub k: usize,
    /// Document-topic concentration; `None` means `1 / k`.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop once the relative ELBO change falls below this.
    #[serde(default = "default_elbo_tol")]
    pub elbo_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_beta() -> f64 {
    0.01
}

fn default_max_iters() -> usize {
    200
}

fn default_elbo_tol() -> f64 {
    1e-4
}

impl LdaConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        LdaConfig {
            k,
            alpha: None,
            beta: default_beta(),
            max_iters: default_max_iters(),
            elbo_tol: default_elbo_tol(),
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(1.0 / self.k.max(1) as f64)
    }

    pub fn with_k(&self, k: usize) -> Self {
        LdaConfig { k, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        let bad = |m: &str| Err(LdaError::BadConfig(m.to_string()));
        if self.k < 1 {
            return bad("k must be >= 1");
        }
        if !(self.alpha() > 0.0 && self.alpha().is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if self.elbo_tol.is_nan() || self.elbo_tol <= 0.0 {
            return bad("elbo_tol must be positive");
        }
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic: usize,
    pub top_words: Vec<WeightedTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    /// Configuration with `alpha` resolved.
    pub config: LdaConfig,
    pub terms: Vec<String>,
    pub vocab_digest: String,
    /// K x V topic-word Dirichlet parameters.
    pub lambda: Vec<Vec<f64>>,
    /// One row of document-topic parameters per kept document.
    pub gamma: Vec<Vec<f64>>,
    pub elbo_trace: Vec<f64>,
    /// Input positions of documents dropped for having no in-vocabulary tokens.
    pub dropped_docs: Vec<usize>,
    pub converged: bool,
}

pub fn vocab_digest(terms: &[String]) -> String {
    let mut h = Sha256::new();
    for t in terms {
        h.update(t.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn cmp_docs(a: &SparseVec, b: &SparseVec) -> Ordering {
    a.indices.cmp(&b.indices).then_with(|| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Kept documents and the content-sorted order in which their contributions are summed,
/// so the fit does not depend on input order.
struct Docs<'a> {
    rows: Vec<&'a SparseVec>,
    order: Vec<usize>,
}

impl<'a> Docs<'a> {
    fn new(x: &'a [SparseVec], n_features: usize, dropped: &[usize]) -> Result<Self, LdaError> {
        let mut rows = Vec::with_capacity(x.len());
        for (i, row) in x.iter().enumerate() {
            if let Some(&index) = row.indices.iter().find(|&&j| j >= n_features) {
                return Err(LdaError::FeatureOutOfRange { index, n_features });
            }
            if dropped.binary_search(&i).is_err() {
                rows.push(row);
            }
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| cmp_docs(rows[a], rows[b]));
        Ok(Docs { rows, order })
    }
}

fn expect_log_dirichlet(row: &[f64]) -> Vec<f64> {
    let total = digamma(row.iter().sum());
    row.iter().map(|&x| digamma(x) - total).collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `E[log p(x | a)] - E[log q(x | row)]` for one symmetric Dirichlet factor.
fn dirichlet_term(prior: f64, row: &[f64], elog: &[f64]) -> f64 {
    let n = row.len() as f64;
    let mut s = ln_gamma(prior * n) - n * ln_gamma(prior) - ln_gamma(row.iter().sum());
    for (&r, &e) in row.iter().zip(elog) {
        s += (prior - r) * e + ln_gamma(r);
    }
    s
}

/// Column-major view of E[log beta] for fast per-word lookups.
fn elog_beta_by_word(lambda: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let per_topic: Vec<Vec<f64>> = lambda.par_iter().map(|r| expect_log_dirichlet(r)).collect();
    let v = lambda[0].len();
    (0..v).map(|w| per_topic.iter().map(|r| r[w]).collect()).collect()
}

/// Per-document ELBO contribution with the word assignments at their optimum.
fn doc_elbo(doc: &SparseVec, gamma: &[f64], alpha: f64, elog_beta: &[Vec<f64>]) -> f64 {
    let elog_theta = expect_log_dirichlet(gamma);
    let mut buf = vec![0.0; gamma.len()];
    let mut s = dirichlet_term(alpha, gamma, &elog_theta);
    for (w, c) in doc.iter() {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = elog_theta[k] + elog_beta[w][k];
        }
        s += c * log_sum_exp(&buf);
    }
    s
}

/// Alternates word responsibilities and `gamma` against fixed topics. Returns the final
/// `gamma` and the count-weighted responsibilities computed from it, one K-vector per nonzero.
fn e_step(doc: &SparseVec, gamma: &[f64], alpha: f64, elog_beta: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = gamma.len();
    let mut gamma = gamma.to_vec();
    let mut resp = vec![vec![0.0; k]; doc.nnz()];
    for it in 0..INNER_MAX_ITERS {
        let elog_theta = expect_log_dirichlet(&gamma);
        let mut next = vec![alpha; k];
        for ((w, c), r) in doc.iter().zip(resp.iter_mut()) {
            for (t, x) in r.iter_mut().enumerate() {
                *x = elog_theta[t] + elog_beta[w][t];
            }
            let z = log_sum_exp(r);
            for (t, x) in r.iter_mut().enumerate() {
                *x = c * (*x - z).exp();
                next[t] += *x;
            }
        }
        let change = gamma.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>() / k as f64;
        if change < INNER_TOL || it + 1 == INNER_MAX_ITERS {
            break;
        }
        gamma = next;
    }
    (gamma, resp)
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.lambda.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Normalized topic-word distribution of topic `k`.
    pub fn topic_word(&self, k: usize) -> Vec<f64> {
        let total: f64 = self.lambda[k].iter().sum();
        self.lambda[k].iter().map(|x| x / total).collect()
    }

    /// Normalized topic mixture of kept document `i`.
    pub fn doc_topic(&self, i: usize) -> Vec<f64> {
        let total: f64 = self.gamma[i].iter().sum();
        self.gamma[i].iter().map(|x| x / total).collect()
    }

    /// The `n` most probable terms of `topic`; equal weights keep vocabulary order.
    pub fn top_words(&self, topic: usize, n: usize) -> TopicSummary {
        let probs = self.topic_word(topic);
        let mut idx: Vec<usize> = (0..probs.len()).collect();
        idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        TopicSummary {
            topic,
            top_words: idx
                .into_iter()
                .take(n)
                .map(|i| WeightedTerm {
                    term: self.terms[i].clone(),
                    weight: probs[i],
                })
                .collect(),
            coherence: None,
        }
    }

    pub fn top_terms(&self, n: usize) -> Vec<Vec<String>> {
        (0..self.k())
            .map(|k| self.top_words(k, n).top_words.into_iter().map(|w| w.term).collect())
            .collect()
    }

    fn docs<'a>(&self, x: &'a [SparseVec]) -> Result<Docs<'a>, LdaError> {
        let docs = Docs::new(x, self.n_terms(), &self.dropped_docs)?;
        if docs.rows.len() != self.gamma.len() {
            return Err(LdaError::DocCountMismatch {
                expected: self.gamma.len() + self.dropped_docs.len(),
                found: x.len(),
            });
        }
        Ok(docs)
    }

    /// Evidence lower bound of the current state on the documents it was fitted to.
    pub fn elbo(&self, x: &[SparseVec]) -> Result<f64, LdaError> {
        let docs = self.docs(x)?;
        Ok(self.elbo_of(&docs))
    }

    fn elbo_of(&self, docs: &Docs) -> f64 {
        let alpha = self.config.alpha();
        let elog_beta = elog_beta_by_word(&self.lambda);
        let per_doc: Vec<f64> = docs
            .order
            .par_iter()
            .map(|&i| doc_elbo(docs.rows[i], &self.gamma[i], alpha, &elog_beta))
            .collect();
        let topics: Vec<f64> = self
            .lambda
            .par_iter()
            .map(|row| dirichlet_term(self.config.beta, row, &expect_log_dirichlet(row)))
            .collect();
        per_doc.iter().sum::<f64>() + topics.iter().sum::<f64>()
    }

    fn iterate(&mut self, docs: &Docs) -> f64 {
        let alpha = self.config.alpha();
        let elog_beta = elog_beta_by_word(&self.lambda);
        let results: Vec<(Vec<f64>, Vec<Vec<f64>>)> = docs
            .order
            .par_iter()
            .map(|&i| e_step(docs.rows[i], &self.gamma[i], alpha, &elog_beta))
            .collect();
        let beta = self.config.beta;
        for row in self.lambda.iter_mut() {
            row.iter_mut().for_each(|x| *x = beta);
        }
        for (&i, (gamma, resp)) in docs.order.iter().zip(results) {
            for ((w, _), r) in docs.rows[i].iter().zip(&resp) {
                for (k, x) in r.iter().enumerate() {
                    self.lambda[k][w] += x;
                }
            }
            self.gamma[i] = gamma;
        }
        let e = self.elbo_of(docs);
        self.elbo_trace.push(e);
        e
    }

    /// Runs one more round of updates and returns the new ELBO.
    pub fn update(&mut self, x: &[SparseVec]) -> Result<f64, LdaError> {
        let docs = self.docs(x)?;
        Ok(self.iterate(&docs))
    }
}

/// Fits `cfg.k` topics to rows of term counts over `vocab`.
pub fn fit(x: &[SparseVec], vocab: &Vocabulary, cfg: &LdaConfig) -> Result<TopicModel, LdaError> {
    fit_terms(x, vocab.terms(), cfg)
}

pub fn fit_terms(x: &[SparseVec], terms: &[String], cfg: &LdaConfig) -> Result<TopicModel, LdaError> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(LdaError::EmptyCorpus);
    }
    if terms.is_empty() {
        return Err(LdaError::AllDocsEmpty);
    }
    let dropped: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, r)| r.sum() <= 0.0)
        .map(|(i, _)| i)
        .collect();
    if dropped.len() == x.len() {
        return Err(LdaError::AllDocsEmpty);
    }
    if !dropped.is_empty() {
        log::warn!("dropping {} documents with no in-vocabulary tokens", dropped.len());
    }
    let docs = Docs::new(x, terms.len(), &dropped)?;

    let k = cfg.k;
    let alpha = cfg.alpha();
    // Relative jitter of 0.1 * min(beta, 1) moves E[log beta] by roughly 0.1 nats at any beta;
    // digamma is steep near small beta, so a fixed relative jitter would pre-assign words at random.
    let jitter = 0.1 * cfg.beta.min(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lambda = (0..k)
        .map(|_| {
            (0..terms.len())
                .map(|_| cfg.beta * (1.0 + jitter * (2.0 * rng.gen::<f64>() - 1.0)))
                .collect()
        })
        .collect();
    let gamma = docs.rows.iter().map(|r| vec![alpha + r.sum() / k as f64; k]).collect();
    let mut model = TopicModel {
        config: LdaConfig {
            alpha: Some(alpha),
            ..cfg.clone()
        },
        terms: terms.to_vec(),
        vocab_digest: vocab_digest(terms),
        lambda,
        gamma,
        elbo_trace: Vec::new(),
        dropped_docs: dropped,
        converged: false,
    };
    let mut prev: Option<f64> = None;
    for _ in 0..cfg.max_iters {
        let e = model.iterate(&docs);
        if let Some(p) = prev {
            if ((e - p) / p.abs().max(f64::MIN_POSITIVE)).abs() < cfg.elbo_tol {
                model.converged = true;
                break;
            }
        }
        prev = Some(e);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pairs: &[(usize, f64)]) -> SparseVec {
        SparseVec {
            indices: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        }
    }

    fn terms(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn single_topic_closed_form() {
        let x = vec![row(&[(0, 2.0), (1, 1.0)]), row(&[(1, 3.0), (2, 1.0)]), row(&[(0, 1.0)])];
        let cfg = LdaConfig::new(1, 7);
        let m = fit_terms(&x, &terms(3), &cfg).unwrap();
        assert_eq!(m.lambda, vec![vec![0.01 + 3.0, 0.01 + 4.0, 0.01 + 1.0]]);
        assert_eq!(m.gamma, vec![vec![4.0], vec![5.0], vec![2.0]]);
        assert!(m.converged);
        assert_eq!(m.elbo_trace[0], m.elbo_trace[1]);
        assert_eq!(m.top_words(0, 1).top_words[0].term, "w1");
    }

    #[test]
    fn empty_documents_are_dropped() {
        let x = vec![row(&[(0, 1.0)]), row(&[]), row(&[(1, 2.0)])];
        let m = fit_terms(&x, &terms(2), &LdaConfig::new(2, 0)).unwrap();
        assert_eq!(m.dropped_docs, vec![1]);
        assert_eq!(m.gamma.len(), 2);
        assert!((m.elbo(&x).unwrap() - m.elbo_trace.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn config_errors() {
        let x = vec![row(&[(0, 1.0)])];
        let t = terms(1);
        assert!(matches!(
            fit_terms(&x, &t, &LdaConfig::new(0, 0)),
            Err(LdaError::BadConfig(_))
        ));
        let mut c = LdaConfig::new(2, 0);
        c.beta = 0.0;
        assert!(fit_terms(&x, &t, &c).is_err());
        c = LdaConfig::new(2, 0);
        c.alpha = Some(-1.0);
        assert!(fit_terms(&x, &t, &c).is_err());
        assert!(matches!(
            fit_terms(&[], &t, &LdaConfig::new(2, 0)),
            Err(LdaError::EmptyCorpus)
        ));
        assert!(matches!(
            fit_terms(&[row(&[])], &t, &LdaConfig::new(2, 0)),
            Err(LdaError::AllDocsEmpty)
        ));
        assert!(matches!(
            fit_terms(&[row(&[(3, 1.0)])], &t, &LdaConfig::new(2, 0)),
            Err(LdaError::FeatureOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn distributions_are_normalized() {
        let x = vec![
            row(&[(0, 2.0), (3, 1.0)]),
            row(&[(1, 1.0), (2, 2.0)]),
            row(&[(0, 1.0), (2, 1.0)]),
        ];
        let m = fit_terms(&x, &terms(4), &LdaConfig::new(3, 2)).unwrap();
        for k in 0..m.k() {
            assert!((m.topic_word(k).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for i in 0..m.gamma.len() {
            assert!((m.doc_topic(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(m
            .lambda
            .iter()
            .flatten()
            .chain(m.gamma.iter().flatten())
            .all(|v| *v > 0.0));
    }

    #[test]
    fn model_json_round_trip() {
        let x = vec![row(&[(0, 2.0)]), row(&[(1, 1.0)])];
        let m = fit_terms(&x, &terms(2), &LdaConfig::new(2, 1)).unwrap();
        let back: TopicModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
