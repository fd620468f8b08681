//! Frozen n-gram vocabularies, bag-of-words counts and smoothed TF-IDF.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::preprocess::TokenizedDoc;

pub const DEFAULT_MAX_FEATURES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("corpus yields no n-grams")]
    EmptyCorpus,
    #[error("invalid n-gram range ({0}, {1})")]
    BadNgramRange(usize, usize),
    #[error("max_features must be at least 1")]
    ZeroMaxFeatures,
    #[error("vocabulary has duplicate term `{0}`")]
    DuplicateTerm(String),
    #[error("terms and df lengths differ")]
    LengthMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramRange {
    pub min: usize,
    pub max: usize,
}

impl NgramRange {
    pub const UNIGRAMS: NgramRange = NgramRange { min: 1, max: 1 };
    pub const UNI_AND_BIGRAMS: NgramRange = NgramRange { min: 1, max: 2 };
    pub const BIGRAMS: NgramRange = NgramRange { min: 2, max: 2 };

    pub fn validate(self) -> Result<(), FeatureError> {
        if self.min == 0 || self.min > self.max {
            return Err(FeatureError::BadNgramRange(self.min, self.max));
        }
        Ok(())
    }
}

/// All n-grams of `tokens` within `range`, joined with single spaces.
pub fn ngrams(tokens: &[String], range: NgramRange) -> impl Iterator<Item = String> + '_ {
    (range.min..=range.max).flat_map(move |n| tokens.windows(n).map(|w| w.join(" ")))
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn from_map(map: HashMap<usize, f64>) -> Self {
        let mut pairs: Vec<(usize, f64)> = map.into_iter().collect();
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let (indices, values) = pairs.into_iter().unzip();
        SparseVec { indices, values }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b, mut acc) = (0, 0, 0.0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    /// Value at `index` (zero when absent).
    pub fn get(&self, index: usize) -> f64 {
        self.indices.binary_search(&index).map_or(0.0, |p| self.values[p])
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    df: Vec<usize>,
    max_features: usize,
    ngram_range: (usize, usize),
    n_docs: usize,
}

/// Terms in lexicographic order, each with its document frequency over the fit corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    max_features: usize,
    ngram_range: NgramRange,
    n_docs: usize,
    index: HashMap<String, usize>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = FeatureError;

    fn try_from(r: VocabularyRepr) -> Result<Self, Self::Error> {
        if r.terms.len() != r.df.len() {
            return Err(FeatureError::LengthMismatch);
        }
        let ngram_range = NgramRange {
            min: r.ngram_range.0,
            max: r.ngram_range.1,
        };
        ngram_range.validate()?;
        let mut index = HashMap::with_capacity(r.terms.len());
        for (i, t) in r.terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(FeatureError::DuplicateTerm(t.clone()));
            }
        }
        Ok(Vocabulary {
            terms: r.terms,
            df: r.df,
            max_features: r.max_features,
            ngram_range,
            n_docs: r.n_docs,
            index,
        })
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            df: v.df,
            max_features: v.max_features,
            ngram_range: (v.ngram_range.min, v.ngram_range.max),
            n_docs: v.n_docs,
        }
    }
}

impl Vocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self) -> &[usize] {
        &self.df
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn ngram_range(&self) -> NgramRange {
        self.ngram_range
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    /// Number of documents the vocabulary was fit on.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    /// Smoothed inverse document frequency, `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self) -> Vec<f64> {
        let n = self.n_docs as f64;
        self.df
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect()
    }
}

/// Keeps the `max_features` most frequent n-grams (total occurrences, ties
/// broken lexicographically), then stores them in lexicographic order.
pub fn build_vocabulary(
    docs: &[TokenizedDoc],
    ngram_range: NgramRange,
    max_features: usize,
) -> Result<Vocabulary, FeatureError> {
    ngram_range.validate()?;
    if max_features == 0 {
        return Err(FeatureError::ZeroMaxFeatures);
    }
    let mut freq: HashMap<String, (usize, usize)> = HashMap::new();
    for doc in docs {
        let mut local: HashMap<String, usize> = HashMap::new();
        for g in ngrams(&doc.tokens, ngram_range) {
            *local.entry(g).or_default() += 1;
        }
        for (g, c) in local {
            let e = freq.entry(g).or_default();
            e.0 += c;
            e.1 += 1;
        }
    }
    if freq.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut ranked: Vec<(String, usize, usize)> = freq.into_iter().map(|(t, (f, d))| (t, f, d)).collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_features);
    ranked.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    let (terms, df): (Vec<String>, Vec<usize>) = ranked.into_iter().map(|(t, _, d)| (t, d)).unzip();
    let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary {
        terms,
        df,
        max_features,
        ngram_range,
        n_docs: docs.len(),
        index,
    })
}

/// In-vocabulary n-gram occurrence counts of one document.
pub fn counts(tokens: &[String], vocab: &Vocabulary) -> SparseVec {
    let mut map: HashMap<usize, f64> = HashMap::new();
    for g in ngrams(tokens, vocab.ngram_range) {
        if let Some(i) = vocab.get(&g) {
            *map.entry(i).or_default() += 1.0;
        }
    }
    SparseVec::from_map(map)
}

pub fn count_matrix(docs: &[TokenizedDoc], vocab: &Vocabulary) -> Vec<SparseVec> {
    docs.iter().map(|d| counts(&d.tokens, vocab)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTermMatrix {
    pub rows: Vec<SparseVec>,
    pub n_features: usize,
}

impl DocTermMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// `tf * idf` with the vocabulary's frozen idf, each nonzero row scaled to unit L2 norm.
pub fn tfidf_transform(count_rows: &[SparseVec], vocab: &Vocabulary) -> DocTermMatrix {
    let idf = vocab.idf();
    let rows = count_rows
        .iter()
        .map(|row| {
            let mut values: Vec<f64> = row.iter().map(|(i, c)| c * idf[i]).collect();
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                values.iter_mut().for_each(|v| *v /= norm);
            }
            SparseVec {
                indices: row.indices.clone(),
                values,
            }
        })
        .collect();
    DocTermMatrix {
        rows,
        n_features: vocab.len(),
    }
}

/// Fit-side convenience: vocabulary plus TF-IDF rows for the same documents.
pub fn fit_tfidf(
    docs: &[TokenizedDoc],
    ngram_range: NgramRange,
    max_features: usize,
) -> Result<(Vocabulary, DocTermMatrix), FeatureError> {
    let vocab = build_vocabulary(docs, ngram_range, max_features)?;
    let x = tfidf_transform(&count_matrix(docs, &vocab), &vocab);
    Ok((vocab, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: &[&str]) -> TokenizedDoc {
        TokenizedDoc::new("d", tokens.iter().map(|t| t.to_string()).collect())
    }

    #[test]
    fn vocabulary_unigrams_and_bigrams() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        let v = build_vocabulary(&docs, NgramRange::UNI_AND_BIGRAMS, 10).unwrap();
        assert_eq!(v.terms(), ["a", "a b", "b", "b c", "c"]);
        assert_eq!(v.df(), [1, 1, 2, 1, 1]);
        assert_eq!(v.n_docs(), 2);
    }

    #[test]
    fn vocabulary_cap_keeps_most_frequent() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        let v = build_vocabulary(&docs, NgramRange::UNI_AND_BIGRAMS, 1).unwrap();
        assert_eq!(v.terms(), ["b"]);
        // Ties among frequency-1 terms resolve lexicographically.
        let v = build_vocabulary(&docs, NgramRange::UNI_AND_BIGRAMS, 3).unwrap();
        assert_eq!(v.terms(), ["a", "a b", "b"]);
    }

    #[test]
    fn frequency_is_occurrences_not_df() {
        let docs = [doc(&["x", "x", "x"]), doc(&["y"]), doc(&["y"])];
        let v = build_vocabulary(&docs, NgramRange::UNIGRAMS, 1).unwrap();
        assert_eq!(v.terms(), ["x"]);
    }

    #[test]
    fn vocabulary_errors() {
        assert_eq!(
            build_vocabulary(&[doc(&[])], NgramRange::UNI_AND_BIGRAMS, 10).unwrap_err(),
            FeatureError::EmptyCorpus
        );
        assert_eq!(
            build_vocabulary(&[], NgramRange::UNIGRAMS, 10).unwrap_err(),
            FeatureError::EmptyCorpus
        );
        assert_eq!(
            build_vocabulary(&[doc(&["a"])], NgramRange { min: 2, max: 1 }, 10).unwrap_err(),
            FeatureError::BadNgramRange(2, 1)
        );
        assert_eq!(
            build_vocabulary(&[doc(&["a"])], NgramRange::UNIGRAMS, 0).unwrap_err(),
            FeatureError::ZeroMaxFeatures
        );
    }

    #[test]
    fn bigram_only_mode() {
        let docs = [doc(&["a", "b", "c"])];
        let v = build_vocabulary(&docs, NgramRange::BIGRAMS, 10).unwrap();
        assert_eq!(v.terms(), ["a b", "b c"]);
        let v = build_vocabulary(&[doc(&["a"])], NgramRange::BIGRAMS, 10);
        assert_eq!(v.unwrap_err(), FeatureError::EmptyCorpus);
    }

    #[test]
    fn count_cases() {
        let docs = [doc(&["a", "a", "b"])];
        let v = build_vocabulary(&docs, NgramRange::UNI_AND_BIGRAMS, 10).unwrap();
        assert_eq!(v.terms(), ["a", "a a", "a b", "b"]);
        let c = counts(&docs[0].tokens, &v);
        assert_eq!(c.indices, [0, 1, 2, 3]);
        assert_eq!(c.values, [2.0, 1.0, 1.0, 1.0]);
        assert!(counts(&[], &v).is_zero());
        assert_eq!(counts(&doc(&["q", "r"]).tokens, &v).nnz(), 0);
    }

    #[test]
    fn tfidf_single_term_doc_normalizes_to_one() {
        let docs = [doc(&["a"])];
        let (_, x) = fit_tfidf(&docs, NgramRange::UNIGRAMS, 10).unwrap();
        assert_eq!(x.rows[0].values, [1.0]);
    }

    #[test]
    fn tfidf_disjoint_docs_block_diagonal() {
        let docs = [doc(&["a", "b"]), doc(&["c", "d"])];
        let (_, x) = fit_tfidf(&docs, NgramRange::UNIGRAMS, 10).unwrap();
        assert_eq!(x.rows[0].indices, [0, 1]);
        assert_eq!(x.rows[1].indices, [2, 3]);
        for r in &x.rows {
            assert!((r.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tfidf_hand_computed_weight() {
        // N = 2; idf(a) = ln(3/2) + 1, idf(b) = ln(3/3) + 1 = 1.
        // Row 0 = [1 + ln 1.5, 1] / norm; values from an independent calculation.
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        let (v, x) = fit_tfidf(&docs, NgramRange::UNIGRAMS, 10).unwrap();
        assert_eq!(v.terms(), ["a", "b", "c"]);
        assert!((x.rows[0].values[0] - 0.8148024746671689).abs() < 1e-12);
        assert!((x.rows[0].values[1] - 0.5797386715376657).abs() < 1e-12);
    }

    #[test]
    fn transform_reuses_frozen_idf() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        let (v, fit) = fit_tfidf(&docs, NgramRange::UNIGRAMS, 10).unwrap();
        let again = tfidf_transform(&count_matrix(&docs[..1], &v), &v);
        assert_eq!(again.rows[0], fit.rows[0]);
    }

    #[test]
    fn vocabulary_json_round_trip() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        let v = build_vocabulary(&docs, NgramRange::UNI_AND_BIGRAMS, 10).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["ngram_range"], serde_json::json!([1, 2]));
        let back: Vocabulary = serde_json::from_value(json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.get("b c"), Some(3));
        let bad = serde_json::json!({"terms": ["a", "a"], "df": [1, 1], "max_features": 5,
                                     "ngram_range": [1, 1], "n_docs": 1});
        assert!(serde_json::from_value::<Vocabulary>(bad).is_err());
    }

    #[test]
    fn sparse_ops() {
        let a = SparseVec {
            indices: vec![0, 2, 5],
            values: vec![1.0, 2.0, 3.0],
        };
        let b = SparseVec {
            indices: vec![2, 3, 5],
            values: vec![4.0, 9.0, 1.0],
        };
        assert_eq!(a.dot(&b), 11.0);
        assert_eq!(a.get(2), 2.0);
        assert_eq!(a.get(1), 0.0);
        assert_eq!(a.dot_dense(&[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]), 6.0);
    }
}
