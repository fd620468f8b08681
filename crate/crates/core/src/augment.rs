//! Minority-class rebalancing with paraphrases from an external provider.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Headline, Provenance};
use crate::eval::TrainSplit;
use crate::label::Label;

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("cannot read transcript {path}: {source}")]
    Transcript {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("transcript line {line}: {message}")]
    TranscriptLine { line: usize, message: String },
    #[error("provider `{provider}` failed: {message}")]
    Provider { provider: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseRequest {
    pub record_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseResponse {
    pub record_id: String,
    pub paraphrases: Vec<String>,
}

pub trait ParaphraseProvider {
    fn name(&self) -> &str;

    /// Responses may come in any order and may omit records.
    fn paraphrase(&mut self, requests: &[ParaphraseRequest]) -> Result<Vec<ParaphraseResponse>, AugmentError>;
}

/// Replays paraphrases recorded in a JSONL file of [`ParaphraseResponse`] objects.
#[derive(Debug, Clone, Default)]
pub struct TranscriptProvider {
    name: String,
    by_id: HashMap<String, Vec<String>>,
}

impl TranscriptProvider {
    pub fn open(path: &Path) -> Result<Self, AugmentError> {
        let file = File::open(path).map_err(|source| AugmentError::Transcript {
            path: path.display().to_string(),
            source,
        })?;
        let name = format!(
            "transcript:{}",
            path.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        );
        Self::from_reader(name, BufReader::new(file))
    }

    /// Repeated record ids append to the earlier paraphrase list.
    pub fn from_reader<R: BufRead>(name: impl Into<String>, reader: R) -> Result<Self, AugmentError> {
        let mut by_id: HashMap<String, Vec<String>> = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| AugmentError::TranscriptLine {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let r: ParaphraseResponse = serde_json::from_str(&line).map_err(|e| AugmentError::TranscriptLine {
                line: i + 1,
                message: e.to_string(),
            })?;
            by_id.entry(r.record_id).or_default().extend(r.paraphrases);
        }
        Ok(TranscriptProvider {
            name: name.into(),
            by_id,
        })
    }
}

impl ParaphraseProvider for TranscriptProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn paraphrase(&mut self, requests: &[ParaphraseRequest]) -> Result<Vec<ParaphraseResponse>, AugmentError> {
        Ok(requests
            .iter()
            .filter_map(|r| {
                self.by_id.get(&r.record_id).map(|p| ParaphraseResponse {
                    record_id: r.record_id.clone(),
                    paraphrases: p.clone(),
                })
            })
            .collect())
    }
}

/// Runs a command that reads one request JSON per stdin line and writes one response JSON
/// per stdout line.
#[derive(Debug, Clone)]
pub struct SubprocessProvider {
    program: String,
    args: Vec<String>,
}

impl SubprocessProvider {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        SubprocessProvider {
            program: program.into(),
            args,
        }
    }

    fn fail(&self, message: impl Into<String>) -> AugmentError {
        AugmentError::Provider {
            provider: self.program.clone(),
            message: message.into(),
        }
    }
}

impl ParaphraseProvider for SubprocessProvider {
    fn name(&self) -> &str {
        &self.program
    }

    fn paraphrase(&mut self, requests: &[ParaphraseRequest]) -> Result<Vec<ParaphraseResponse>, AugmentError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| self.fail(e.to_string()))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let payload: Vec<String> = requests
            .iter()
            .map(|r| serde_json::to_string(r).expect("request serializes"))
            .collect();
        let writer = std::thread::spawn(move || -> std::io::Result<()> {
            for line in payload {
                writeln!(stdin, "{line}")?;
            }
            Ok(())
        });
        let stdout = child.stdout.take().expect("piped stdout");
        let mut responses = Vec::new();
        let mut parse_error = None;
        for line in BufReader::new(stdout).lines() {
            let line = line.map_err(|e| self.fail(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ParaphraseResponse>(&line) {
                Ok(r) => responses.push(r),
                Err(e) => {
                    parse_error.get_or_insert_with(|| format!("bad response line: {e}"));
                }
            }
        }
        let status = child.wait().map_err(|e| self.fail(e.to_string()))?;
        let write_result = writer.join().map_err(|_| self.fail("stdin writer panicked"))?;
        if !status.success() {
            return Err(self.fail(format!("exited with {status}")));
        }
        write_result.map_err(|e| self.fail(format!("writing requests: {e}")))?;
        if let Some(e) = parse_error {
            return Err(self.fail(e));
        }
        Ok(responses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum RebalanceTarget {
    /// Raise every class to the largest class count.
    MatchMajority,
    /// Raise every class to at least `n`.
    Absolute(usize),
}

/// Records still needed per class to reach the target. Classes absent from the
/// training labels have no sources and are left out.
pub fn plan_rebalance(train_labels: &[Label], target: RebalanceTarget) -> BTreeMap<Label, usize> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for &l in train_labels {
        *counts.entry(l).or_default() += 1;
    }
    let goal = match target {
        RebalanceTarget::MatchMajority => counts.values().copied().max().unwrap_or(0),
        RebalanceTarget::Absolute(n) => n,
    };
    counts.into_iter().map(|(l, c)| (l, goal.saturating_sub(c))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentOutcome {
    pub split: TrainSplit,
    pub added: BTreeMap<Label, usize>,
    /// Deficits the provider could not cover.
    pub unmet: BTreeMap<Label, usize>,
    /// Paraphrases dropped for being empty or equal to their source.
    pub skipped: usize,
    pub provider_errors: Vec<String>,
}

/// Appends paraphrased copies of training records, taking the r-th usable paraphrase of
/// each source in split order before any (r+1)-th, until each deficit is met.
pub fn apply_augmentation(
    train: &TrainSplit,
    plan: &BTreeMap<Label, usize>,
    provider: &mut dyn ParaphraseProvider,
) -> AugmentOutcome {
    let mut split = train.clone();
    let mut added = BTreeMap::new();
    let mut unmet = BTreeMap::new();
    let mut skipped = 0;
    let mut provider_errors = Vec::new();
    let mut taken_ids: HashSet<String> = train.records().iter().map(|h| h.id.clone()).collect();

    for (&label, &deficit) in plan {
        if deficit == 0 {
            continue;
        }
        let sources: Vec<&Headline> = train.records().iter().filter(|h| h.label == Some(label)).collect();
        let requests: Vec<ParaphraseRequest> = sources
            .iter()
            .map(|h| ParaphraseRequest {
                record_id: h.id.clone(),
                text: h.text.clone(),
            })
            .collect();
        let responses = if requests.is_empty() {
            Vec::new()
        } else {
            match provider.paraphrase(&requests) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("{e}");
                    provider_errors.push(e.to_string());
                    Vec::new()
                }
            }
        };
        let mut by_id: HashMap<String, Vec<String>> = HashMap::new();
        for r in responses {
            by_id.entry(r.record_id).or_default().extend(r.paraphrases);
        }
        let usable: Vec<Vec<String>> = sources
            .iter()
            .map(|h| {
                let source_text: String = h.text.nfc().collect();
                by_id
                    .get(&h.id)
                    .map(|ps| {
                        ps.iter()
                            .map(|p| p.nfc().collect::<String>())
                            .filter(|p| {
                                let keep = !p.trim().is_empty() && *p != source_text;
                                if !keep {
                                    skipped += 1;
                                    log::warn!("skipping paraphrase of `{}` identical to its source", h.id);
                                }
                                keep
                            })
                            .collect()
                    })
                    .unwrap_or_default()
            })
            .collect();

        let mut count = 0;
        let mut per_source = vec![0usize; sources.len()];
        let rounds = usable.iter().map(Vec::len).max().unwrap_or(0);
        'fill: for round in 0..rounds {
            for (s, h) in sources.iter().enumerate() {
                if count == deficit {
                    break 'fill;
                }
                let Some(text) = usable[s].get(round) else { continue };
                let id = loop {
                    per_source[s] += 1;
                    let id = format!("{}#aug{}", h.id, per_source[s]);
                    if !taken_ids.contains(&id) {
                        break id;
                    }
                };
                taken_ids.insert(id.clone());
                let mut new = Headline::new(id, text, h.timestamp, h.source.clone()).with_label(label);
                new.provenance = Some(Provenance {
                    source_id: h.id.clone(),
                    provider_name: provider.name().to_string(),
                });
                split.push(new);
                count += 1;
            }
        }
        added.insert(label, count);
        if count < deficit {
            log::warn!(
                "{label}: {} of {deficit} augmented records still missing",
                deficit - count
            );
            unmet.insert(label, deficit - count);
        }
    }
    AugmentOutcome {
        split,
        added,
        unmet,
        skipped,
        provider_errors,
    }
}
