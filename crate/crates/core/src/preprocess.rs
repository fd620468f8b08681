//! Four-stage Bangla text pipeline: punctuation removal, whitespace tokenization,
//! stopword removal and longest-match suffix stemming.
//!
//! Text is NFC-normalized exactly once at the start of [`strip_punctuation`];
//! stoplists and stemmer rules are normalized when loaded, so all matching
//! happens between NFC strings.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Headline;

const DEFAULT_STOPLIST: &str = include_str!("../data/stopwords_bn.txt");
const DEFAULT_STEMMER_RULES: &str = include_str!("../data/stemmer_rules_bn.tsv");

/// Upper bound on passes in multi-pass stemming.
const MAX_STEM_PASSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RulesError {
    #[error("line {line}: expected `suffix<TAB>min_stem_len[<TAB>replacement]`")]
    Malformed { line: usize },
    #[error("line {line}: bad minimum stem length {value:?}")]
    BadLength { line: usize, value: String },
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // \p{P} covers the danda (U+0964) and double danda (U+0965).
    RE.get_or_init(|| Regex::new(r"[\p{P}\p{S}]").unwrap())
}

/// Removes Unicode punctuation and symbols and collapses whitespace runs.
pub fn strip_punctuation(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let spaced = punctuation().replace_all(&nfc, " ");
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist(HashSet<String>);

impl Stoplist {
    /// One token per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Stoplist {
        Stoplist(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.nfc().collect())
                .collect(),
        )
    }

    pub fn bangla_default() -> Stoplist {
        Stoplist::parse(DEFAULT_STOPLIST)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<S> for Stoplist {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stoplist(iter.into_iter().map(|s| s.as_ref().nfc().collect()).collect())
    }
}

pub fn remove_stopwords(tokens: &[String], stoplist: &Stoplist) -> Vec<String> {
    tokens.iter().filter(|t| !stoplist.contains(t)).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuffixRule {
    pub suffix: String,
    /// Codepoints that must remain after the suffix is removed.
    pub min_stem_len: usize,
    /// Appended after stripping (empty for plain removal).
    #[serde(default)]
    pub replacement: String,
}

/// Suffix rules kept sorted by descending suffix length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StemmerRules {
    rules: Vec<SuffixRule>,
}

impl StemmerRules {
    pub fn new(rules: impl IntoIterator<Item = SuffixRule>) -> Self {
        let mut rules: Vec<SuffixRule> = rules
            .into_iter()
            .map(|r| SuffixRule {
                suffix: r.suffix.nfc().collect(),
                replacement: r.replacement.nfc().collect(),
                ..r
            })
            .collect();
        // Stable, so equal-length suffixes keep file order.
        rules.sort_by_key(|r| std::cmp::Reverse(r.suffix.chars().count()));
        StemmerRules { rules }
    }

    pub fn parse_tsv(text: &str) -> Result<Self, RulesError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if !(2..=3).contains(&fields.len()) || fields[0].is_empty() {
                return Err(RulesError::Malformed { line });
            }
            let min_stem_len = fields[1].trim().parse().map_err(|_| RulesError::BadLength {
                line,
                value: fields[1].to_string(),
            })?;
            rules.push(SuffixRule {
                suffix: fields[0].to_string(),
                min_stem_len,
                replacement: fields.get(2).map_or(String::new(), |s| s.to_string()),
            });
        }
        Ok(StemmerRules::new(rules))
    }

    pub fn bangla_default() -> Self {
        StemmerRules::parse_tsv(DEFAULT_STEMMER_RULES).expect("shipped rules parse")
    }

    pub fn rules(&self) -> &[SuffixRule] {
        &self.rules
    }
}

/// One suffix rule at most: the longest suffix whose removal leaves enough stem.
pub fn stem(token: &str, rules: &StemmerRules) -> String {
    let len = token.chars().count();
    for rule in &rules.rules {
        if let Some(base) = token.strip_suffix(rule.suffix.as_str()) {
            let suffix_len = rule.suffix.chars().count();
            if len - suffix_len >= rule.min_stem_len {
                let mut out = base.to_string();
                out.push_str(&rule.replacement);
                return out;
            }
        }
    }
    token.to_string()
}

/// Repeats [`stem`] until the token stops changing.
pub fn stem_multi_pass(token: &str, rules: &StemmerRules) -> String {
    let mut current = token.to_string();
    for _ in 0..MAX_STEM_PASSES {
        let next = stem(&current, rules);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub stoplist: Stoplist,
    pub rules: StemmerRules,
    pub multi_pass_stemming: bool,
    pub keep_trace: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stoplist: Stoplist::bangla_default(),
            rules: StemmerRules::bangla_default(),
            multi_pass_stemming: false,
            keep_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stripped: String,
    pub tokens: Vec<String>,
    pub without_stopwords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub record_id: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_trace: Option<StageTrace>,
}

impl TokenizedDoc {
    pub fn new(record_id: impl Into<String>, tokens: Vec<String>) -> Self {
        TokenizedDoc {
            record_id: record_id.into(),
            tokens,
            stage_trace: None,
        }
    }
}

pub fn process_text(text: &str, cfg: &PipelineConfig) -> (Vec<String>, Option<StageTrace>) {
    let stripped = strip_punctuation(text);
    let tokens = tokenize(&stripped);
    let kept = remove_stopwords(&tokens, &cfg.stoplist);
    let stemmed = kept
        .iter()
        .map(|t| {
            if cfg.multi_pass_stemming {
                stem_multi_pass(t, &cfg.rules)
            } else {
                stem(t, &cfg.rules)
            }
        })
        .collect();
    let trace = cfg.keep_trace.then_some(StageTrace {
        stripped,
        tokens,
        without_stopwords: kept,
    });
    (stemmed, trace)
}

pub fn pipeline(h: &Headline, cfg: &PipelineConfig) -> TokenizedDoc {
    let (tokens, stage_trace) = process_text(&h.text, cfg);
    TokenizedDoc {
        record_id: h.id.clone(),
        tokens,
        stage_trace,
    }
}

pub fn pipeline_all<'a>(headlines: impl IntoIterator<Item = &'a Headline>, cfg: &PipelineConfig) -> Vec<TokenizedDoc> {
    headlines.into_iter().map(|h| pipeline(h, cfg)).collect()
}
