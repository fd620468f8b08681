//! Headline records, CSV/JSONL ingestion, and the keyword/temporal relevance filter.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, NaiveTime};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use unicode_normalization::UnicodeNormalization;

use crate::label::Label;

pub const MAX_ANNOTATORS: usize = 3;

/// Bangladesh Standard Time, UTC+6.
const LOCAL_OFFSET_SECS: i32 = 6 * 3600;

/// Canonical column order for CSV and JSONL.
pub const COLUMNS: [&str; 8] = [
    "id",
    "text",
    "timestamp",
    "source",
    "label",
    "annotator_1",
    "annotator_2",
    "annotator_3",
];

const REQUIRED: [&str; 4] = ["id", "text", "timestamp", "source"];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("duplicate id `{id}` at line {line_number}")]
    DuplicateId { id: String, line_number: u64 },
    #[error("unknown format `{0}` (expected csv or jsonl)")]
    UnknownFormat(String),
    #[error("write failed: {0}")]
    Write(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guess from a file extension; `.json`/`.jsonl`/`.ndjson` are JSONL, everything else CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json" | "ndjson") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "ndjson" => Ok(Format::Jsonl),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// Publication time as a local (UTC+6) calendar date with an optional wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    pub date: NaiveDate,
    pub time: Option<NaiveTime>,
}

impl Timestamp {
    pub fn from_date(date: NaiveDate) -> Self {
        Timestamp { date, time: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unparseable timestamp {0:?}")]
pub struct ParseTimestampError(pub String);

impl FromStr for Timestamp {
    type Err = ParseTimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(Timestamp::from_date(date));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp {
                    date: dt.date(),
                    time: Some(dt.time()),
                });
            }
        }
        // Explicit offsets are shifted into local time before taking the date.
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            let local = dt.with_timezone(&FixedOffset::east_opt(LOCAL_OFFSET_SECS).unwrap());
            let naive = local.naive_local();
            return Ok(Timestamp {
                date: naive.date(),
                time: Some(naive.time()),
            });
        }
        Err(ParseTimestampError(s.to_string()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.time {
            None => write!(f, "{}", self.date.format("%Y-%m-%d")),
            Some(t) => write!(f, "{}T{}", self.date.format("%Y-%m-%d"), t.format("%H:%M:%S")),
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where an augmented record came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub provider_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Headline {
    pub id: String,
    /// NFC-normalized headline text.
    pub text: String,
    pub timestamp: Timestamp,
    pub source: String,
    pub label: Option<Label>,
    /// Per-annotator labels, slot `j` holding annotator `j + 1`.
    pub annotations: [Option<Label>; MAX_ANNOTATORS],
    pub provenance: Option<Provenance>,
}

impl Headline {
    pub fn new(id: impl Into<String>, text: &str, timestamp: Timestamp, source: impl Into<String>) -> Self {
        Headline {
            id: id.into(),
            text: text.nfc().collect(),
            timestamp,
            source: source.into(),
            label: None,
            annotations: [None; MAX_ANNOTATORS],
            provenance: None,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_annotations(mut self, annotations: [Option<Label>; MAX_ANNOTATORS]) -> Self {
        self.annotations = annotations;
        self
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date
    }

    pub fn has_annotations(&self) -> bool {
        self.annotations.iter().any(Option::is_some)
    }
}

/// Wire form shared by CSV and JSONL; every field optional so that row-level
/// problems become rejects instead of hard parse failures.
#[derive(Debug, Default, Serialize, Deserialize)]
struct WireRow {
    id: Option<String>,
    text: Option<String>,
    timestamp: Option<String>,
    source: Option<String>,
    label: Option<String>,
    annotator_1: Option<String>,
    annotator_2: Option<String>,
    annotator_3: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl From<&Headline> for WireRow {
    fn from(h: &Headline) -> Self {
        let ann = |j: usize| h.annotations[j].map(|l| l.to_string());
        WireRow {
            id: Some(h.id.clone()),
            text: Some(h.text.clone()),
            timestamp: Some(h.timestamp.to_string()),
            source: Some(h.source.clone()),
            label: h.label.map(|l| l.to_string()),
            annotator_1: ann(0),
            annotator_2: ann(1),
            annotator_3: ann(2),
            provenance: h.provenance.clone(),
        }
    }
}

fn non_blank(v: Option<String>) -> Option<String> {
    v.filter(|s| !s.trim().is_empty())
}

fn parse_optional_label(field: &str, v: Option<String>) -> Result<Option<Label>, String> {
    match non_blank(v) {
        None => Ok(None),
        Some(s) => s.parse().map(Some).map_err(|e| format!("{field}: {e}")),
    }
}

impl WireRow {
    fn into_headline(self) -> Result<Headline, String> {
        let id = non_blank(self.id).ok_or("missing id")?;
        let text: String = self.text.ok_or("missing text")?.nfc().collect();
        if text.trim().is_empty() {
            return Err("empty text".into());
        }
        let raw_ts = non_blank(self.timestamp).ok_or("missing timestamp")?;
        let timestamp = raw_ts.parse::<Timestamp>().map_err(|e| e.to_string())?;
        let source = self.source.ok_or("missing source")?;
        let label = parse_optional_label("label", self.label)?;
        let annotations = [
            parse_optional_label("annotator_1", self.annotator_1)?,
            parse_optional_label("annotator_2", self.annotator_2)?,
            parse_optional_label("annotator_3", self.annotator_3)?,
        ];
        Ok(Headline {
            id,
            text,
            timestamp,
            source,
            label,
            annotations,
            provenance: self.provenance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line_number: u64,
    pub reason: String,
}

/// An ordered collection of headlines with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<Headline>,
}

impl Corpus {
    /// Fails on the first duplicate id; `line_number` is then the 1-based record position.
    pub fn new(records: Vec<Headline>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, h) in records.iter().enumerate() {
            if !seen.insert(h.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    id: h.id.clone(),
                    line_number: i as u64 + 1,
                });
            }
        }
        Ok(Corpus { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Headline> {
        self.records.iter()
    }

    /// Inclusive (min, max) publication date, `None` for an empty corpus.
    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let min = self.records.iter().map(Headline::date).min()?;
        let max = self.records.iter().map(Headline::date).max()?;
        Some((min, max))
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Headline;
    type IntoIter = std::slice::Iter<'a, Headline>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOutcome {
    pub corpus: Corpus,
    pub rejects: Vec<Reject>,
}

pub fn ingest(path: &Path, format: Format) -> Result<IngestOutcome, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        Format::Csv => read_csv(file),
        Format::Jsonl => read_jsonl(BufReader::new(file)),
    }
}

fn accept(
    records: &mut Vec<Headline>,
    seen: &mut HashSet<String>,
    h: Headline,
    line_number: u64,
) -> Result<(), CorpusError> {
    if !seen.insert(h.id.clone()) {
        return Err(CorpusError::DuplicateId { id: h.id, line_number });
    }
    records.push(h);
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<IngestOutcome, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    for name in REQUIRED {
        if column(name).is_none() {
            return Err(CorpusError::MissingColumn(name.to_string()));
        }
    }
    let idx: Vec<Option<usize>> = COLUMNS.iter().map(|c| column(c)).collect();

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut seen = HashSet::new();
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                rejects.push(Reject {
                    line_number: line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let get = |k: usize| idx[k].and_then(|i| record.get(i)).map(str::to_string);
        let row = WireRow {
            id: get(0),
            text: get(1),
            timestamp: get(2),
            source: get(3),
            label: get(4),
            annotator_1: get(5),
            annotator_2: get(6),
            annotator_3: get(7),
            provenance: None,
        };
        match row.into_headline() {
            Ok(h) => accept(&mut records, &mut seen, h, line)?,
            Err(reason) => rejects.push(Reject {
                line_number: line,
                reason,
            }),
        }
    }
    Ok(IngestOutcome {
        corpus: Corpus { records },
        rejects,
    })
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<IngestOutcome, CorpusError> {
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_number = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<WireRow>(&line)
            .map_err(|e| format!("invalid JSON: {e}"))
            .and_then(WireRow::into_headline);
        match parsed {
            Ok(h) => accept(&mut records, &mut seen, h, line_number)?,
            Err(reason) => rejects.push(Reject { line_number, reason }),
        }
    }
    Ok(IngestOutcome {
        corpus: Corpus { records },
        rejects,
    })
}

/// Canonical JSONL export: one object per record, keys in [`COLUMNS`] order.
pub fn write_jsonl<W: Write>(corpus: &Corpus, mut out: W) -> Result<(), CorpusError> {
    for h in corpus {
        let line = serde_json::to_string(&WireRow::from(h)).expect("wire rows always serialize");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(corpus: &Corpus, out: W) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for h in corpus {
        let row = WireRow::from(h);
        let cell = |v: Option<String>| v.unwrap_or_default();
        w.write_record([
            cell(row.id),
            cell(row.text),
            cell(row.timestamp),
            cell(row.source),
            cell(row.label),
            cell(row.annotator_1),
            cell(row.annotator_2),
            cell(row.annotator_3),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rejects<W: Write>(rejects: &[Reject], mut out: W) -> Result<(), CorpusError> {
    for r in rejects {
        writeln!(out, "{}", serde_json::to_string(r).expect("rejects serialize"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelevanceConfigError {
    #[error("keyword_weight + temporal_weight must equal 1 (got {0})")]
    WeightSum(f64),
    #[error("weights must be nonnegative")]
    NegativeWeight,
    #[error("window_start {0} is after window_end {1}")]
    InvertedWindow(NaiveDate, NaiveDate),
    #[error("empty keyword")]
    EmptyKeyword,
    #[error("duplicate keyword `{0}`")]
    DuplicateKeyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelevanceConfig {
    pub keywords: Vec<String>,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub keyword_weight: f64,
    pub temporal_weight: f64,
    /// Records must score strictly above this.
    pub threshold: f64,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        let keywords = [
            "আন্দোলন",
            "কোটা",
            "শিক্ষার্থী",
            "ছাত্র",
            "পুলিশ",
            "সরকার",
            "হত্যা",
            "সংঘর্ষ",
            "কারফিউ",
            "ইন্টারনেট",
        ];
        RelevanceConfig {
            keywords: keywords.iter().map(|k| k.to_string()).collect(),
            window_start: NaiveDate::from_ymd_opt(2024, 7, 5).unwrap(),
            window_end: NaiveDate::from_ymd_opt(2024, 8, 30).unwrap(),
            keyword_weight: 0.5,
            temporal_weight: 0.5,
            threshold: 0.5,
        }
    }
}

impl RelevanceConfig {
    pub fn validate(&self) -> Result<(), RelevanceConfigError> {
        if self.keyword_weight < 0.0 || self.temporal_weight < 0.0 {
            return Err(RelevanceConfigError::NegativeWeight);
        }
        let sum = self.keyword_weight + self.temporal_weight;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RelevanceConfigError::WeightSum(sum));
        }
        if self.window_start > self.window_end {
            return Err(RelevanceConfigError::InvertedWindow(self.window_start, self.window_end));
        }
        let mut seen = HashSet::new();
        for k in &self.keywords {
            let k: String = k.nfc().collect();
            if k.is_empty() {
                return Err(RelevanceConfigError::EmptyKeyword);
            }
            if !seen.insert(k.clone()) {
                return Err(RelevanceConfigError::DuplicateKeyword(k));
            }
        }
        Ok(())
    }
}

/// Convex combination of keyword coverage and an in-window indicator.
pub fn relevance_score(h: &Headline, cfg: &RelevanceConfig) -> f64 {
    let text: String = h.text.nfc().collect();
    let kscore = if cfg.keywords.is_empty() {
        0.0
    } else {
        let hits = cfg
            .keywords
            .iter()
            .filter(|k| text.contains(k.nfc().collect::<String>().as_str()))
            .count();
        hits as f64 / cfg.keywords.len() as f64
    };
    let date = h.date();
    let tscore = if cfg.window_start <= date && date <= cfg.window_end {
        1.0
    } else {
        0.0
    };
    cfg.keyword_weight * kscore + cfg.temporal_weight * tscore
}

/// Keeps records with `relevance_score > cfg.threshold`, in input order.
pub fn filter_corpus(corpus: &Corpus, cfg: &RelevanceConfig) -> Corpus {
    let records = corpus
        .records
        .par_iter()
        .filter(|h| relevance_score(h, cfg) > cfg.threshold)
        .cloned()
        .collect();
    Corpus { records }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn headline(id: &str, text: &str, d: NaiveDate) -> Headline {
        Headline::new(id, text, Timestamp::from_date(d), "test")
    }

    fn cfg(keywords: &[&str], kw: f64, tw: f64, threshold: f64) -> RelevanceConfig {
        RelevanceConfig {
            keywords: keywords.iter().map(|s| s.to_string()).collect(),
            window_start: date(2024, 7, 5),
            window_end: date(2024, 8, 30),
            keyword_weight: kw,
            temporal_weight: tw,
            threshold,
        }
    }

    #[test]
    fn timestamp_forms() {
        let t: Timestamp = "2024-07-19".parse().unwrap();
        assert_eq!(t.to_string(), "2024-07-19");
        let t: Timestamp = "2024-07-19T23:10:05".parse().unwrap();
        assert_eq!(t.to_string(), "2024-07-19T23:10:05");
        // 20:00 UTC is 02:00 next day in Dhaka.
        let t: Timestamp = "2024-07-19T20:00:00Z".parse().unwrap();
        assert_eq!(t.date, date(2024, 7, 20));
        assert!("19/07/2024".parse::<Timestamp>().is_err());
    }

    #[test]
    fn empty_csv_with_header() {
        let out = read_csv("id,text,timestamp,source\n".as_bytes()).unwrap();
        assert!(out.corpus.is_empty());
        assert!(out.rejects.is_empty());
    }

    #[test]
    fn csv_missing_required_column() {
        let err = read_csv("id,text,source\n1,x,y\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::MissingColumn(c) if c == "timestamp"));
    }

    #[test]
    fn csv_rows_and_rejects() {
        let data = "id,text,timestamp,source,label,annotator_1,annotator_2,annotator_3\n\
                    a,ঢাকায় মিছিল,2024-07-16,p,Outrage,O,O,H\n\
                    b,কিছু,not-a-date,p,,,,\n\
                    c,বন্যা,2024-08-25,p,,,Despair,\n";
        let out = read_csv(data.as_bytes()).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.rejects.len(), 1);
        assert_eq!(out.rejects[0].line_number, 3);
        let a = &out.corpus.records[0];
        assert_eq!(a.label, Some(Label::Outrage));
        assert_eq!(
            a.annotations,
            [Some(Label::Outrage), Some(Label::Outrage), Some(Label::Hope)]
        );
        let c = &out.corpus.records[1];
        assert_eq!(c.annotations, [None, Some(Label::Despair), None]);
    }

    #[test]
    fn jsonl_three_rows_one_missing_timestamp() {
        // Manual count: rows 1 and 3 are complete, row 2 lacks a timestamp.
        let data = r#"{"id":"1","text":"কোটা আন্দোলন","timestamp":"2024-07-16","source":"p"}
{"id":"2","text":"মিছিল","source":"p"}
{"id":"3","text":"বন্যা","timestamp":"2024-08-22","source":"p","label":"Despair"}
"#;
        let out = read_jsonl(data.as_bytes()).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(
            out.rejects,
            vec![Reject {
                line_number: 2,
                reason: "missing timestamp".into()
            }]
        );
    }

    #[test]
    fn duplicate_id_is_fatal() {
        let data = "{\"id\":\"1\",\"text\":\"x\",\"timestamp\":\"2024-07-16\",\"source\":\"p\"}\n\
                    {\"id\":\"1\",\"text\":\"y\",\"timestamp\":\"2024-07-17\",\"source\":\"p\"}\n";
        let err = read_jsonl(data.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line_number: 2, .. }));
    }

    #[test]
    fn blank_and_bad_label_rows_rejected() {
        let data = "{\"id\":\"1\",\"text\":\"   \",\"timestamp\":\"2024-07-16\",\"source\":\"p\"}\n\
                    {\"id\":\"2\",\"text\":\"x\",\"timestamp\":\"2024-07-16\",\"source\":\"p\",\"label\":\"Joy\"}\n\
                    not json\n";
        let out = read_jsonl(data.as_bytes()).unwrap();
        assert!(out.corpus.is_empty());
        assert_eq!(out.rejects.len(), 3);
    }

    #[test]
    fn relevance_extremes() {
        let c = cfg(&["কোটা", "আন্দোলন"], 0.5, 0.5, 0.5);
        let all = headline("1", "কোটা আন্দোলন", date(2024, 7, 16));
        assert_eq!(relevance_score(&all, &c), 1.0);
        let none = headline("2", "আবহাওয়া", date(2024, 9, 16));
        assert_eq!(relevance_score(&none, &c), 0.0);
    }

    #[test]
    fn relevance_partial_coverage() {
        // 0.6 * (2/4) + 0.4 * 1 = 0.7
        let c = cfg(&["কোটা", "আন্দোলন", "পুলিশ", "বন্যা"], 0.6, 0.4, 0.5);
        let h = headline("1", "কোটাবিরোধী আন্দোলন চলছে", date(2024, 7, 20));
        assert!((relevance_score(&h, &c) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn relevance_empty_keywords_scores_time_only() {
        let c = cfg(&[], 0.5, 0.5, 0.5);
        let h = headline("1", "x", date(2024, 7, 20));
        assert_eq!(relevance_score(&h, &c), 0.5);
    }

    #[test]
    fn filter_thresholds() {
        // Five records scoring 0.9, 0.7, 0.5, 0.3, 0.1 under keyword-only weighting
        // with ten keywords: hits 9, 7, 5, 3, 1.
        let kws: Vec<String> = (0..10).map(|i| format!("k{i}")).collect();
        let kw_refs: Vec<&str> = kws.iter().map(String::as_str).collect();
        let c = cfg(&kw_refs, 1.0, 0.0, 0.5);
        let records: Vec<Headline> = [9, 7, 5, 3, 1]
            .iter()
            .enumerate()
            .map(|(i, &hits)| {
                let text = kws[..hits].join(" ");
                headline(&i.to_string(), &text, date(2024, 7, 20))
            })
            .collect();
        let corpus = Corpus::new(records).unwrap();
        let scores: Vec<f64> = corpus.iter().map(|h| relevance_score(h, &c)).collect();
        assert_eq!(scores, vec![0.9, 0.7, 0.5, 0.3, 0.1]);

        let kept = filter_corpus(&corpus, &c);
        let ids: Vec<&str> = kept.iter().map(|h| h.id.as_str()).collect();
        assert_eq!(ids, ["0", "1"]);

        let keep_all = filter_corpus(
            &corpus,
            &RelevanceConfig {
                threshold: -1.0,
                ..c.clone()
            },
        );
        assert_eq!(keep_all, corpus);
        let none = filter_corpus(&corpus, &RelevanceConfig { threshold: 1.0, ..c });
        assert!(none.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(RelevanceConfig::default().validate().is_ok());
        assert!(matches!(
            cfg(&[], 0.5, 0.6, 0.5).validate(),
            Err(RelevanceConfigError::WeightSum(_))
        ));
        let mut c = cfg(&["a", "a"], 0.5, 0.5, 0.5);
        assert!(matches!(c.validate(), Err(RelevanceConfigError::DuplicateKeyword(_))));
        c.keywords = vec![String::new()];
        assert_eq!(c.validate(), Err(RelevanceConfigError::EmptyKeyword));
        c.keywords.clear();
        c.window_end = date(2024, 7, 1);
        assert!(matches!(c.validate(), Err(RelevanceConfigError::InvertedWindow(..))));
    }

    #[test]
    fn default_filter_keeps_in_window_keyword_hits() {
        let c = RelevanceConfig::default();
        let hit = headline("1", "ঢাকায় কোটা সংস্কার", date(2024, 7, 16));
        let out_of_window = headline("2", "ঢাকায় কোটা সংস্কার", date(2024, 6, 1));
        let no_keyword = headline("3", "আবহাওয়ার খবর", date(2024, 7, 16));
        let corpus = Corpus::new(vec![hit, out_of_window, no_keyword]).unwrap();
        let kept = filter_corpus(&corpus, &c);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.records[0].id, "1");
    }

    #[test]
    fn csv_export_reads_back() {
        let h = headline("x", "কোটা, \"আন্দোলন\"", date(2024, 7, 16))
            .with_label(Label::Hope)
            .with_annotations([Some(Label::Hope), None, Some(Label::Despair)]);
        let corpus = Corpus::new(vec![h]).unwrap();
        let mut buf = Vec::new();
        write_csv(&corpus, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.corpus, corpus);
    }
}
