use std::collections::BTreeMap;

use anyhow::Result;
use serde_json::{json, Value};

use crisis_lens_core::features::{build_vocabulary, count_matrix, NgramRange, SparseVec, Vocabulary};
use crisis_lens_core::lda::{self, coherence_cv, coherence_umass, fit_sentiment_submodels, TopicModel, TopicSummary};

use super::*;
use crate::invalid;

const MODEL: &str = "lda/model.json";

fn load_tokens(ws: &Workspace) -> Result<Vec<TokenizedDoc>> {
    ws.read_lines(TOKENS, "preprocess")
}

fn token_lists(docs: &[TokenizedDoc]) -> Vec<Vec<String>> {
    docs.iter().map(|d| d.tokens.clone()).collect()
}

fn bag_of_words(ws: &Workspace, docs: &[TokenizedDoc]) -> Result<(Vocabulary, Vec<SparseVec>)> {
    let vocab = build_vocabulary(docs, NgramRange::UNIGRAMS, ws.config().lda.max_features)
        .map_err(|e| invalid(format!("topic model vocabulary: {e}")))?;
    let x = count_matrix(docs, &vocab);
    Ok((vocab, x))
}

/// Top words of every topic, each annotated with its own C_v score.
fn summaries(ws: &Workspace, model: &TopicModel, docs: &[Vec<String>]) -> Result<Vec<TopicSummary>> {
    let scoring = ws.config().lda.scoring();
    let report = scoring.score(model, docs)?;
    Ok((0..model.k())
        .map(|t| {
            let mut s = model.top_words(t, scoring.top_n);
            s.coherence = Some(report.per_topic[t]);
            s
        })
        .collect())
}

pub fn fit(ws: &Workspace) -> Result<()> {
    let docs = load_tokens(ws)?;
    let (vocab, x) = bag_of_words(ws, &docs)?;
    let model = lda::fit(&x, &vocab, &ws.config().lda.config(ws.seed()))?;
    if !model.converged {
        log::warn!(
            "topic model stopped after {} iterations without converging",
            model.elbo_trace.len()
        );
    }
    ws.write_json(MODEL, &model)
}

pub fn topics(ws: &Workspace) -> Result<()> {
    let model: TopicModel = ws.read_json(MODEL, "lda fit")?;
    let docs = token_lists(&load_tokens(ws)?);
    ws.write_json("lda/topics.json", &summaries(ws, &model, &docs)?)
}

pub fn coherence(ws: &Workspace) -> Result<()> {
    let model: TopicModel = ws.read_json(MODEL, "lda fit")?;
    let docs = token_lists(&load_tokens(ws)?);
    let l = &ws.config().lda;
    let top = model.top_terms(l.top_n);
    let cv = coherence_cv(&top, &docs, l.window)?;
    let umass = coherence_umass(&top, &docs)?;
    ws.write_json("lda/coherence.json", &json!({ "c_v": cv, "umass": umass }))
}

pub fn select_k(ws: &Workspace, ks: Option<Vec<usize>>) -> Result<()> {
    let l = &ws.config().lda;
    let candidates = ks.unwrap_or_else(|| l.k_grid.clone());
    if candidates.is_empty() || candidates.contains(&0) {
        return Err(invalid("--ks needs one or more positive integers"));
    }
    let docs = load_tokens(ws)?;
    let (vocab, x) = bag_of_words(ws, &docs)?;
    let lists = token_lists(&docs);
    let sel = lda::select_k(
        &x,
        vocab.terms(),
        &lists,
        &candidates,
        &l.config(ws.seed()),
        &l.scoring(),
    )?;
    ws.write_json(
        "lda/select_k.json",
        &json!({
            "best_k": sel.best_k,
            "table": sel.table,
            "best_topics": summaries(ws, &sel.best, &lists)?,
        }),
    )
}

pub fn by_sentiment(ws: &Workspace) -> Result<()> {
    let docs = load_tokens(ws)?;
    let labeled = ws.read_corpus(LABELED, "resolve-labels")?;
    if labeled.len() != docs.len() || labeled.iter().zip(&docs).any(|(h, d)| h.id != d.record_id) {
        return Err(invalid(
            "tokens.jsonl does not match labeled.jsonl; rerun `crisis-lens preprocess`",
        ));
    }
    let labels = labeled
        .iter()
        .map(|h| {
            h.label
                .ok_or_else(|| invalid(format!("record `{}` has no label", h.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let l = &ws.config().lda;
    let subs = fit_sentiment_submodels(&docs, &labels, &l.config(ws.seed()), l.max_features, &l.scoring())?;
    let mut out: BTreeMap<String, Value> = BTreeMap::new();
    for (label, sub) in subs {
        let topics: Vec<TopicSummary> = (0..sub.model.k())
            .map(|t| {
                let mut s = sub.model.top_words(t, l.top_n);
                s.coherence = Some(sub.coherence.per_topic[t]);
                s
            })
            .collect();
        out.insert(
            label.to_string(),
            json!({
                "n_docs": sub.n_docs,
                "k": sub.model.k(),
                "coherence": sub.coherence,
                "topics": topics,
            }),
        );
    }
    ws.write_json("lda/by_sentiment.json", &out)
}
