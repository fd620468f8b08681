use std::fmt::Write as _;

use anyhow::Result;
use serde_json::{json, Value};

use crisis_lens_core::lda::TopicSummary;
use crisis_lens_core::temporal::{
    bucket_timeline, conditional_proportion, event_report, event_report_csv, timeline_csv,
};
use crisis_lens_core::Label;

use super::*;
use crate::invalid;

pub fn timeline(ws: &Workspace) -> Result<()> {
    let labeled = ws.read_corpus(LABELED, "resolve-labels")?;
    let cfg = ws.config();
    let buckets = bucket_timeline(&labeled, cfg.timeline.granularity).map_err(|e| invalid(e.to_string()))?;
    ws.write_text("timeline.csv", &timeline_csv(&buckets))?;
    ws.write_json("timeline.json", &buckets)?;

    let rows = event_report(&labeled, &cfg.periods).map_err(|e| invalid(e.to_string()))?;
    let mut conditional = Vec::new();
    for row in rows.iter().filter(|r| r.n > 0) {
        for label in Label::ALL {
            conditional.push(conditional_proportion(&labeled, label, &row.period)?);
        }
    }
    ws.write_text("events.csv", &event_report_csv(&rows))?;
    ws.write_json("events.json", &json!({ "periods": rows, "conditional": conditional }))
}

fn optional<T: serde::de::DeserializeOwned>(ws: &Workspace, rel: &str) -> Result<Option<T>> {
    if ws.path(rel).exists() {
        Ok(Some(ws.read_json(rel, "")?))
    } else {
        Ok(None)
    }
}

fn missing(md: &mut String, command: &str) {
    let _ = writeln!(md, "_Not produced yet; run `crisis-lens {command}`._\n");
}

fn topic_table(md: &mut String, topics: &[TopicSummary]) {
    md.push_str("| Topic | C_v | Top words |\n|---|---|---|\n");
    for t in topics {
        let words: Vec<&str> = t.top_words.iter().map(|w| w.term.as_str()).collect();
        let c = t.coherence.map(|c| format!("{c:.3}")).unwrap_or_default();
        let _ = writeln!(md, "| {} | {} | {} |", t.topic, c, words.join(" "));
    }
    md.push('\n');
}

fn csv_table(md: &mut String, csv: &str) {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else { return };
    let cols = header.split(',').count();
    let _ = writeln!(md, "| {} |", header.split(',').collect::<Vec<_>>().join(" | "));
    let _ = writeln!(md, "|{}", "---|".repeat(cols));
    for l in lines {
        let _ = writeln!(md, "| {} |", l.split(',').collect::<Vec<_>>().join(" | "));
    }
    md.push('\n');
}

pub fn report(ws: &Workspace) -> Result<()> {
    let labeled = ws.read_corpus(LABELED, "resolve-labels")?;
    let mut md = String::from("# Crisis headline analysis\n\n");
    let _ = writeln!(md, "Seed: {}. Configuration hash: `{}`.\n", ws.seed(), ws.loaded.hash());

    md.push_str("## Data\n\n");
    if let Some(f) = optional::<Value>(ws, "filter_report.json")? {
        let _ = writeln!(md, "- Ingested records: {}", f["input"]);
        let _ = writeln!(md, "- Kept by the relevance filter: {}", f["kept"]);
    }
    let _ = writeln!(md, "- Labeled records: {}", labeled.len());
    let counts = crisis_lens_core::annotation::label_counts(&labeled);
    for l in Label::ALL {
        let _ = writeln!(md, "  - {l}: {}", counts.get(&l).copied().unwrap_or(0));
    }
    if let Some(a) = optional::<Value>(ws, "agreement.json")? {
        let _ = writeln!(md, "- Mean pairwise Cohen's kappa: {}", a["mean_kappa"]);
    }
    if let Some(a) = optional::<Value>(ws, "augment_report.json")? {
        let _ = writeln!(md, "- Paraphrases added to the training split: {}", a["added"]);
    }
    md.push('\n');

    md.push_str("## Classification\n\n");
    match std::fs::read_to_string(ws.path("eval/table.txt")) {
        Ok(t) => {
            let _ = writeln!(md, "```\n{}```\n", t);
        }
        Err(_) => missing(&mut md, "evaluate"),
    }

    md.push_str("## Topics\n\n");
    match optional::<Vec<TopicSummary>>(ws, "lda/topics.json")? {
        Some(t) => topic_table(&mut md, &t),
        None => missing(&mut md, "lda topics"),
    }
    if let Some(sel) = optional::<Value>(ws, "lda/select_k.json")? {
        let _ = writeln!(
            md,
            "### Choice of K (best: {})\n\n| K | C_v | Iterations |\n|---|---|---|",
            sel["best_k"]
        );
        for row in sel["table"].as_array().into_iter().flatten() {
            let c = row["coherence"].as_f64().unwrap_or(f64::NAN);
            let _ = writeln!(md, "| {} | {c:.4} | {} |", row["k"], row["iterations"]);
        }
        md.push('\n');
    }
    if let Some(by) = optional::<serde_json::Map<String, Value>>(ws, "lda/by_sentiment.json")? {
        for (label, v) in by {
            let _ = writeln!(md, "### {label} ({} headlines)\n", v["n_docs"]);
            let topics: Vec<TopicSummary> = serde_json::from_value(v["topics"].clone())?;
            topic_table(&mut md, &topics);
        }
    }

    md.push_str("## Events\n\n");
    match std::fs::read_to_string(ws.path("events.csv")) {
        Ok(csv) => {
            csv_table(&mut md, &csv);
            md.push_str("Daily shares are in `timeline.csv`.\n");
        }
        Err(_) => missing(&mut md, "timeline"),
    }
    ws.write_text("report.md", &md)
}
