use anyhow::Result;
use serde_json::json;

use crisis_lens_core::classify::{train_forest, train_knn, train_logreg, train_svm, Classifier, Model, ModelKind};
use crisis_lens_core::corpus::Corpus;
use crisis_lens_core::eval::{metrics, render_table, EvalReport};
use crisis_lens_core::features::{count_matrix, fit_tfidf, tfidf_transform, Vocabulary};
use crisis_lens_core::Label;

use super::*;
use crate::invalid;

const VOCABULARY: &str = "vocabulary.json";

fn kinds(arg: &str) -> Result<Vec<ModelKind>> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok(ModelKind::ALL.to_vec());
    }
    Ok(vec![arg.parse::<ModelKind>().map_err(invalid)?])
}

fn model_path(kind: ModelKind) -> String {
    format!("models/{}.json", kind.name())
}

fn eval_path(kind: ModelKind) -> String {
    format!("eval/{}.json", kind.name())
}

fn training_corpus(ws: &Workspace) -> Result<Corpus> {
    if ws.config().augment.is_some() {
        ws.read_corpus(TRAIN_AUGMENTED, "augment")
    } else {
        ws.read_corpus("split/train.jsonl", "split")
    }
}

fn labels_of(c: &Corpus) -> Result<Vec<Label>> {
    c.iter()
        .map(|h| {
            h.label
                .ok_or_else(|| invalid(format!("record `{}` has no label", h.id)))
        })
        .collect()
}

pub fn train(ws: &Workspace, which: &str) -> Result<()> {
    let kinds = kinds(which)?;
    let train = training_corpus(ws)?;
    let y = labels_of(&train)?;
    let docs = tokenize_corpus(ws, &train)?;
    let f = &ws.config().features;
    let (vocab, x) = fit_tfidf(&docs, f.ngram_range(), f.max_features).map_err(|e| invalid(e.to_string()))?;
    ws.write_json(VOCABULARY, &vocab)?;

    let m = &ws.config().models;
    let seed = ws.seed();
    for kind in kinds {
        let model = match kind {
            ModelKind::Logreg => Model::Linear(train_logreg(&x, &y, &m.logreg.hyperparams(seed))?),
            ModelKind::Svm => Model::Linear(train_svm(&x, &y, &m.svm.hyperparams(seed))?),
            ModelKind::Forest => Model::Forest(train_forest(&x, &y, &m.forest.hyperparams(seed))?),
            ModelKind::Knn => Model::Knn(train_knn(&x, &y, m.knn.k)?),
        };
        log::info!("trained {} on {} records", kind.name(), y.len());
        ws.write_json(&model_path(kind), &model)?;
    }
    Ok(())
}

pub fn evaluate(ws: &Workspace, which: &str) -> Result<()> {
    let kinds = kinds(which)?;
    let vocab: Vocabulary = ws.read_json(VOCABULARY, "train")?;
    ws.require("split/test.jsonl", "split")?;
    let test = ws.read_corpus("split/test.jsonl", "split")?;
    if test.is_empty() {
        return Err(invalid("the test split is empty; give split.test a nonzero fraction"));
    }
    let truth = labels_of(&test)?;
    let docs = tokenize_corpus(ws, &test)?;
    let x = tfidf_transform(&count_matrix(&docs, &vocab), &vocab);

    for kind in kinds {
        let model: Model = ws.read_json(&model_path(kind), &format!("train {}", kind.name()))?;
        let predicted = model.predict(&x)?;
        let mut report = metrics(&truth, &predicted, &Label::ALL)?;
        report.config = json!({
            "model": kind.name(),
            "seed": ws.seed(),
            "train_records": vocab.n_docs(),
        });
        ws.write_json(&eval_path(kind), &report)?;
    }

    let mut rows: Vec<(&str, EvalReport)> = Vec::new();
    for kind in ModelKind::ALL {
        if ws.path(&eval_path(kind)).exists() {
            rows.push((kind.display_name(), ws.read_json(&eval_path(kind), "evaluate")?));
        }
    }
    let refs: Vec<(&str, &EvalReport)> = rows.iter().map(|(n, r)| (*n, r)).collect();
    ws.write_text("eval/table.txt", &render_table(&refs))
}
