//! Python bindings. Labels cross the boundary as strings ("Outrage", "Hope", "Despair"),
//! documents as lists of tokens and sparse rows as `(indices, values)` pairs.

use std::str::FromStr;

use chrono::NaiveDate;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use crisis_lens_core::annotation::{self, AnnotationSet, VoteOutcome};
use crisis_lens_core::corpus::{Corpus, Headline, Timestamp};
use crisis_lens_core::eval::{self, SplitSpec};
use crisis_lens_core::features::{self, NgramRange, SparseVec};
use crisis_lens_core::lda::{self, LdaConfig};
use crisis_lens_core::preprocess::{self, PipelineConfig, StemmerRules, Stoplist, TokenizedDoc};
use crisis_lens_core::Label;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn label(s: &str) -> PyResult<Label> {
    Label::from_str(s).map_err(err)
}

fn labels(xs: &[String]) -> PyResult<Vec<Label>> {
    xs.iter().map(|s| label(s)).collect()
}

fn tokenized(docs: Vec<Vec<String>>) -> Vec<TokenizedDoc> {
    docs.into_iter()
        .enumerate()
        .map(|(i, t)| TokenizedDoc::new(i.to_string(), t))
        .collect()
}

fn sparse(row: &SparseVec) -> (Vec<usize>, Vec<f64>) {
    (row.indices.clone(), row.values.clone())
}

#[pyfunction]
fn strip_punctuation(text: &str) -> String {
    preprocess::strip_punctuation(text)
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    preprocess::tokenize(text)
}

/// Drops stopwords; uses the bundled Bangla list unless `stopwords` is given.
#[pyfunction]
#[pyo3(signature = (tokens, stopwords=None))]
fn remove_stopwords(tokens: Vec<String>, stopwords: Option<Vec<String>>) -> Vec<String> {
    let list = match stopwords {
        Some(words) => Stoplist::parse(&words.join("\n")),
        None => Stoplist::bangla_default(),
    };
    preprocess::remove_stopwords(&tokens, &list)
}

#[pyfunction]
#[pyo3(signature = (token, multi_pass=false))]
fn stem(token: &str, multi_pass: bool) -> String {
    let rules = StemmerRules::bangla_default();
    if multi_pass {
        preprocess::stem_multi_pass(token, &rules)
    } else {
        preprocess::stem(token, &rules)
    }
}

/// The full default pipeline: punctuation, tokens, stopwords, stems.
#[pyfunction]
#[pyo3(signature = (text, multi_pass=false))]
fn preprocess_text(text: &str, multi_pass: bool) -> Vec<String> {
    let cfg = PipelineConfig {
        multi_pass_stemming: multi_pass,
        ..PipelineConfig::default()
    };
    preprocess::process_text(text, &cfg).0
}

#[pyfunction]
fn cohen_kappa(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    annotation::cohen_kappa(&labels(&a)?, &labels(&b)?).map_err(err)
}

/// Weighted plurality vote. `votes[j]` is annotator j's label or None. Returns the
/// winning label, or the list of tied labels.
#[pyfunction]
#[pyo3(signature = (votes, weights=None))]
fn majority_vote(py: Python<'_>, votes: Vec<Option<String>>, weights: Option<Vec<f64>>) -> PyResult<Py<PyAny>> {
    let weights = weights.unwrap_or_else(|| vec![1.0; votes.len()]);
    let mut pairs = Vec::new();
    for (j, v) in votes.iter().enumerate() {
        if let Some(v) = v {
            pairs.push((j, label(v)?));
        }
    }
    let set = AnnotationSet::new("vote", pairs, weights).map_err(err)?;
    Ok(match annotation::majority_vote(&set).map_err(err)? {
        VoteOutcome::Label(l) => l.as_str().into_pyobject(py)?.into_any().unbind(),
        VoteOutcome::Tie(ls) => {
            let names: Vec<&str> = ls.iter().map(|l| l.as_str()).collect();
            names.into_pyobject(py)?.into_any().unbind()
        }
    })
}

/// Frozen n-gram vocabulary with smoothed IDF.
#[pyclass(name = "Vocabulary", module = "crisis_lens")]
struct PyVocabulary {
    inner: features::Vocabulary,
}

#[pymethods]
impl PyVocabulary {
    #[staticmethod]
    #[pyo3(signature = (docs, ngram_min=1, ngram_max=1, max_features=10_000))]
    fn fit(docs: Vec<Vec<String>>, ngram_min: usize, ngram_max: usize, max_features: usize) -> PyResult<Self> {
        let range = NgramRange {
            min: ngram_min,
            max: ngram_max,
        };
        let inner = features::build_vocabulary(&tokenized(docs), range, max_features).map_err(err)?;
        Ok(PyVocabulary { inner })
    }

    #[getter]
    fn terms(&self) -> Vec<String> {
        self.inner.terms().to_vec()
    }

    #[getter]
    fn df(&self) -> Vec<usize> {
        self.inner.df().to_vec()
    }

    fn idf(&self) -> Vec<f64> {
        self.inner.idf()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Raw term counts per document.
    fn counts(&self, docs: Vec<Vec<String>>) -> Vec<(Vec<usize>, Vec<f64>)> {
        features::count_matrix(&tokenized(docs), &self.inner)
            .iter()
            .map(sparse)
            .collect()
    }

    /// L2-normalized TF-IDF rows.
    fn tfidf(&self, docs: Vec<Vec<String>>) -> Vec<(Vec<usize>, Vec<f64>)> {
        let counts = features::count_matrix(&tokenized(docs), &self.inner);
        features::tfidf_transform(&counts, &self.inner)
            .rows
            .iter()
            .map(sparse)
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyVocabulary {
            inner: serde_json::from_str(s).map_err(err)?,
        })
    }
}

/// A fitted variational LDA model.
#[pyclass(name = "TopicModel", module = "crisis_lens")]
struct PyTopicModel {
    inner: lda::TopicModel,
}

#[pymethods]
impl PyTopicModel {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn terms(&self) -> Vec<String> {
        self.inner.terms.clone()
    }

    #[getter]
    fn elbo_trace(&self) -> Vec<f64> {
        self.inner.elbo_trace.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn dropped_docs(&self) -> Vec<usize> {
        self.inner.dropped_docs.clone()
    }

    fn topic_word(&self, topic: usize) -> PyResult<Vec<f64>> {
        if topic >= self.inner.k() {
            return Err(err(format!("topic {topic} out of range")));
        }
        Ok(self.inner.topic_word(topic))
    }

    fn doc_topic(&self, doc: usize) -> PyResult<Vec<f64>> {
        if doc >= self.inner.gamma.len() {
            return Err(err(format!("document {doc} out of range")));
        }
        Ok(self.inner.doc_topic(doc))
    }

    #[pyo3(signature = (topic, n=10))]
    fn top_words(&self, topic: usize, n: usize) -> PyResult<Vec<(String, f64)>> {
        if topic >= self.inner.k() {
            return Err(err(format!("topic {topic} out of range")));
        }
        Ok(self
            .inner
            .top_words(topic, n)
            .top_words
            .into_iter()
            .map(|w| (w.term, w.weight))
            .collect())
    }

    #[pyo3(signature = (n=10))]
    fn top_terms(&self, n: usize) -> Vec<Vec<String>> {
        self.inner.top_terms(n)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyTopicModel {
            inner: serde_json::from_str(s).map_err(err)?,
        })
    }
}

/// Fits LDA on tokenized documents using a unigram count vocabulary.
#[pyfunction]
#[pyo3(signature = (docs, k, seed=42, alpha=None, beta=0.01, max_iters=200, elbo_tol=1e-4, max_features=10_000))]
#[allow(clippy::too_many_arguments)]
fn fit_lda(
    py: Python<'_>,
    docs: Vec<Vec<String>>,
    k: usize,
    seed: u64,
    alpha: Option<f64>,
    beta: f64,
    max_iters: usize,
    elbo_tol: f64,
    max_features: usize,
) -> PyResult<PyTopicModel> {
    let cfg = LdaConfig {
        k,
        alpha,
        beta,
        max_iters,
        elbo_tol,
        seed,
    };
    let docs = tokenized(docs);
    let inner = py.detach(|| {
        let vocab = features::build_vocabulary(&docs, NgramRange::UNIGRAMS, max_features).map_err(|e| e.to_string())?;
        let x = features::count_matrix(&docs, &vocab);
        lda::fit(&x, &vocab, &cfg).map_err(|e| e.to_string())
    });
    Ok(PyTopicModel {
        inner: inner.map_err(err)?,
    })
}

fn coherence_dict<'py>(py: Python<'py>, r: &lda::CoherenceReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("measure", &r.measure)?;
    d.set_item("per_topic", &r.per_topic)?;
    d.set_item("mean", r.mean)?;
    d.set_item("absent_words", &r.absent_words)?;
    d.set_item("degenerate_topics", &r.degenerate_topics)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (topics, docs, window=110))]
fn coherence_cv<'py>(
    py: Python<'py>,
    topics: Vec<Vec<String>>,
    docs: Vec<Vec<String>>,
    window: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let r = lda::coherence_cv(&topics, &docs, window).map_err(err)?;
    coherence_dict(py, &r)
}

#[pyfunction]
fn coherence_umass<'py>(
    py: Python<'py>,
    topics: Vec<Vec<String>>,
    docs: Vec<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = lda::coherence_umass(&topics, &docs).map_err(err)?;
    coherence_dict(py, &r)
}

/// Accuracy, per-class and macro/micro precision, recall and F1 over the three classes.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, truth: Vec<String>, predicted: Vec<String>) -> PyResult<Bound<'py, PyDict>> {
    let r = eval::metrics(&labels(&truth)?, &labels(&predicted)?, &Label::ALL).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("accuracy", r.accuracy)?;
    for (k, v) in [
        ("macro_precision", r.macro_precision),
        ("macro_recall", r.macro_recall),
        ("macro_f1", r.macro_f1),
        ("micro_precision", r.micro_precision),
        ("micro_recall", r.micro_recall),
        ("micro_f1", r.micro_f1),
    ] {
        d.set_item(k, v)?;
    }
    let per_class = PyDict::new(py);
    for c in &r.per_class {
        let m = PyDict::new(py);
        m.set_item("precision", c.precision)?;
        m.set_item("recall", c.recall)?;
        m.set_item("f1", c.f1)?;
        m.set_item("support", c.support)?;
        m.set_item("precision_undefined", c.precision_undefined)?;
        per_class.set_item(c.label.as_str(), m)?;
    }
    d.set_item("per_class", per_class)?;
    d.set_item("confusion", r.confusion)?;
    Ok(d)
}

/// Stratified split of positions `0..len(labels)`; returns (train, validation, test) index lists.
#[pyfunction]
#[pyo3(signature = (labels, train=0.7, validation=0.0, test=0.3, seed=42))]
fn stratified_split(
    labels: Vec<String>,
    train: f64,
    validation: f64,
    test: f64,
    seed: u64,
) -> PyResult<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let day = Timestamp::from_date(NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"));
    let records = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Ok(Headline::new(i.to_string(), "", day, "").with_label(label(l)?)))
        .collect::<PyResult<Vec<_>>>()?;
    let corpus = Corpus::new(records).map_err(err)?;
    let spec = SplitSpec {
        train,
        validation,
        test,
        seed,
    };
    let split = eval::stratified_split(&corpus, &spec).map_err(err)?;
    let ids = |hs: &[Headline]| hs.iter().map(|h| h.id.parse().expect("numeric id")).collect();
    Ok((ids(split.train.records()), ids(&split.validation), ids(&split.test)))
}

#[pymodule]
fn crisis_lens(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("LABELS", Label::ALL.map(|l| l.as_str()).to_vec())?;
    m.add_class::<PyVocabulary>()?;
    m.add_class::<PyTopicModel>()?;
    m.add_function(wrap_pyfunction!(strip_punctuation, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(remove_stopwords, m)?)?;
    m.add_function(wrap_pyfunction!(stem, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess_text, m)?)?;
    m.add_function(wrap_pyfunction!(cohen_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lda, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_cv, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_umass, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    Ok(())
}
