use std::collections::BTreeMap;

use anyhow::Result;
use serde_json::json;

use crisis_lens_core::annotation::{agreement_report, label_counts, resolve_corpus};
use crisis_lens_core::augment::{
    apply_augmentation, plan_rebalance, ParaphraseProvider, SubprocessProvider, TranscriptProvider,
};
use crisis_lens_core::corpus::{self, filter_corpus, Format};
use crisis_lens_core::eval::{load_split, stratified_split, write_split};
use crisis_lens_core::Label;

use super::*;
use crate::invalid;

pub fn ingest(ws: &Workspace) -> Result<()> {
    let paths = &ws.config().paths;
    let Some(rel) = &paths.corpus else {
        return Err(invalid("paths.corpus is not set in the configuration"));
    };
    let path = ws.loaded.resolve(rel);
    if !path.is_file() {
        return Err(invalid(format!("corpus file {} does not exist", path.display())));
    }
    let format = match &paths.format {
        Some(f) => f.parse::<Format>().map_err(|e| invalid(e.to_string()))?,
        None => Format::from_path(&path),
    };
    let outcome = corpus::ingest(&path, format)?;
    if !outcome.rejects.is_empty() {
        log::warn!("rejected rows: {}, see ingest_rejects.jsonl", outcome.rejects.len());
    }
    ws.write_corpus(CORPUS, &outcome.corpus)?;
    ws.write_lines("ingest_rejects.jsonl", &outcome.rejects)
}

pub fn filter(ws: &Workspace) -> Result<()> {
    let input = ws.read_corpus(CORPUS, "ingest")?;
    let cfg = &ws.config().relevance;
    let kept = filter_corpus(&input, cfg);
    ws.write_corpus(FILTERED, &kept)?;
    ws.write_json(
        "filter_report.json",
        &json!({
            "input": input.len(),
            "kept": kept.len(),
            "removed": input.len() - kept.len(),
            "threshold": cfg.threshold,
        }),
    )
}

pub fn resolve_labels(ws: &Workspace) -> Result<()> {
    let input = ws.read_corpus(FILTERED, "filter")?;
    let a = &ws.config().annotation;
    let res = resolve_corpus(&input, &a.weights, &a.policy()?).map_err(|e| invalid(e.to_string()))?;
    if !res.ties.is_empty() {
        log::warn!("tied votes left unlabeled: {}, see ties.jsonl", res.ties.len());
    }
    ws.write_corpus(LABELED, &res.labeled)?;
    ws.write_lines("ties.jsonl", &res.ties)?;
    ws.write_json("label_counts.json", &label_counts(&res.labeled))
}

pub fn agreement(ws: &Workspace) -> Result<()> {
    let input = ws.read_corpus(FILTERED, "filter")?;
    ws.write_json("agreement.json", &agreement_report(&input).to_json_4dp())
}

pub fn preprocess(ws: &Workspace) -> Result<()> {
    let labeled = ws.read_corpus(LABELED, "resolve-labels")?;
    let docs = tokenize_corpus(ws, &labeled)?;
    let empty = docs.iter().filter(|d| d.tokens.is_empty()).count();
    if empty > 0 {
        log::warn!("{empty} headlines have no tokens left after preprocessing");
    }
    ws.write_lines(TOKENS, &docs)
}

pub fn split(ws: &Workspace) -> Result<()> {
    let labeled = ws.read_corpus(LABELED, "resolve-labels")?;
    let spec = ws.config().split_spec(ws.seed());
    let split = stratified_split(&labeled, &spec).map_err(|e| invalid(e.to_string()))?;
    write_split(&split, &ws.path(SPLIT_DIR))?;
    let counts = |records: &[crisis_lens_core::corpus::Headline]| label_counts(records);
    ws.write_json(
        "split/summary.json",
        &json!({
            "seed": spec.seed,
            "fractions": [spec.train, spec.validation, spec.test],
            "train": counts(split.train.records()),
            "validation": counts(&split.validation),
            "test": counts(&split.test),
        }),
    )
}

pub fn augment(ws: &Workspace) -> Result<()> {
    let Some(section) = &ws.config().augment else {
        return Err(invalid("no [augment] section in the configuration"));
    };
    ws.require("split/train.jsonl", "split")?;
    let split = load_split(&ws.path(SPLIT_DIR))?;
    let mut provider: Box<dyn ParaphraseProvider> = match (&section.transcript, &section.command) {
        (Some(t), _) => Box::new(TranscriptProvider::open(&ws.loaded.resolve(t)).map_err(|e| invalid(e.to_string()))?),
        (None, Some(cmd)) => Box::new(SubprocessProvider::new(cmd[0].clone(), cmd[1..].to_vec())),
        (None, None) => unreachable!("validated at load"),
    };
    let plan = plan_rebalance(&split.train.labels(), section.target());
    let outcome = apply_augmentation(&split.train, &plan, provider.as_mut());
    for (l, n) in &outcome.unmet {
        if *n > 0 {
            log::warn!("{l}: {n} paraphrases short of the target");
        }
    }
    let before: BTreeMap<Label, usize> = label_counts(split.train.records());
    let after = label_counts(outcome.split.records());
    let report = json!({
        "provider": provider.name(),
        "target": section.target(),
        "plan": plan,
        "added": outcome.added,
        "unmet": outcome.unmet,
        "skipped": outcome.skipped,
        "provider_errors": outcome.provider_errors,
        "before": before,
        "after": after,
    });
    ws.write_corpus(TRAIN_AUGMENTED, &outcome.split.into_corpus())?;
    ws.write_json("augment_report.json", &report)
}
