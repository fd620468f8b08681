//! Multi-annotator label resolution and pairwise agreement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Headline, MAX_ANNOTATORS};
use crate::label::Label;

/// Relative tolerance under which two weighted vote sums count as tied.
const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotationError {
    #[error("no votes")]
    EmptyVotes,
    #[error("weight for annotator {0} must be positive and finite")]
    BadWeight(usize),
    #[error("vote from annotator {annotator} but only {declared} annotators declared")]
    UnknownAnnotator { annotator: usize, declared: usize },
    #[error("record `{0}` has neither a label nor annotations")]
    Unlabeled(String),
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty label sequence")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    pub record_id: String,
    /// (annotator index, label); indices address `weights`.
    pub votes: Vec<(usize, Label)>,
    pub weights: Vec<f64>,
}

impl AnnotationSet {
    pub fn new(
        record_id: impl Into<String>,
        votes: Vec<(usize, Label)>,
        weights: Vec<f64>,
    ) -> Result<Self, AnnotationError> {
        let set = AnnotationSet {
            record_id: record_id.into(),
            votes,
            weights,
        };
        set.validate()?;
        Ok(set)
    }

    /// Votes from a headline's annotator slots.
    pub fn from_headline(h: &Headline, weights: &[f64]) -> Result<Self, AnnotationError> {
        let votes = h
            .annotations
            .iter()
            .enumerate()
            .filter_map(|(j, l)| l.map(|l| (j, l)))
            .collect();
        AnnotationSet::new(h.id.clone(), votes, weights.to_vec())
    }

    fn validate(&self) -> Result<(), AnnotationError> {
        if self.votes.is_empty() {
            return Err(AnnotationError::EmptyVotes);
        }
        if let Some(j) = self.weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(AnnotationError::BadWeight(j));
        }
        for &(j, _) in &self.votes {
            if j >= self.weights.len() {
                return Err(AnnotationError::UnknownAnnotator {
                    annotator: j,
                    declared: self.weights.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoteOutcome {
    Label(Label),
    /// Classes sharing the maximal weighted sum, in canonical order.
    Tie(Vec<Label>),
}

/// Weighted plurality vote over the three classes.
pub fn majority_vote(a: &AnnotationSet) -> Result<VoteOutcome, AnnotationError> {
    a.validate()?;
    let mut sums = [0.0f64; 3];
    for &(j, label) in &a.votes {
        sums[label.index()] += a.weights[j];
    }
    let max = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<Label> = Label::ALL
        .into_iter()
        .filter(|l| sums[l.index()] > 0.0 && max - sums[l.index()] <= TIE_RTOL * max)
        .collect();
    Ok(match tied.as_slice() {
        [only] => VoteOutcome::Label(*only),
        _ => VoteOutcome::Tie(tied),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TiePolicy {
    /// Route ties to the tie report for human adjudication.
    #[default]
    Reject,
    /// Pick the first tied class in this order.
    Priority(Vec<Label>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieRecord {
    pub record_id: String,
    pub tied_classes: Vec<Label>,
}

#[derive(Debug, Clone, Default)]
pub struct Resolution {
    pub labeled: Corpus,
    pub ties: Vec<TieRecord>,
}

/// Labels every record: existing labels pass through, otherwise the annotator vote decides.
pub fn resolve_corpus(corpus: &Corpus, weights: &[f64], policy: &TiePolicy) -> Result<Resolution, AnnotationError> {
    let mut out = Resolution::default();
    for h in corpus {
        if h.label.is_some() {
            out.labeled.records.push(h.clone());
            continue;
        }
        if !h.has_annotations() {
            return Err(AnnotationError::Unlabeled(h.id.clone()));
        }
        let set = AnnotationSet::from_headline(h, weights)?;
        let resolved = match majority_vote(&set)? {
            VoteOutcome::Label(l) => Some(l),
            VoteOutcome::Tie(tied) => match policy {
                TiePolicy::Reject => {
                    out.ties.push(TieRecord {
                        record_id: h.id.clone(),
                        tied_classes: tied,
                    });
                    None
                }
                TiePolicy::Priority(order) => {
                    let pick = order.iter().find(|l| tied.contains(l)).copied();
                    if pick.is_none() {
                        out.ties.push(TieRecord {
                            record_id: h.id.clone(),
                            tied_classes: tied,
                        });
                    }
                    pick
                }
            },
        };
        if let Some(l) = resolved {
            let mut h = h.clone();
            h.label = Some(l);
            out.labeled.records.push(h);
        }
    }
    Ok(out)
}

/// Unweighted Cohen's kappa between two raters.
pub fn cohen_kappa(a: &[Label], b: &[Label]) -> Result<f64, AnnotationError> {
    let (p_o, p_e) = agreement_terms(a, b)?;
    Ok(kappa_from_terms(p_o, p_e))
}

fn agreement_terms(a: &[Label], b: &[Label]) -> Result<(f64, f64), AnnotationError> {
    if a.len() != b.len() {
        return Err(AnnotationError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AnnotationError::EmptyInput);
    }
    let n = a.len() as f64;
    let mut agree = 0usize;
    let mut ma = [0usize; 3];
    let mut mb = [0usize; 3];
    for (&x, &y) in a.iter().zip(b) {
        agree += usize::from(x == y);
        ma[x.index()] += 1;
        mb[y.index()] += 1;
    }
    let p_o = agree as f64 / n;
    let p_e = (0..3).map(|c| (ma[c] as f64 / n) * (mb[c] as f64 / n)).sum();
    Ok((p_o, p_e))
}

fn kappa_from_terms(p_o: f64, p_e: f64) -> f64 {
    if p_e >= 1.0 {
        // Both raters used one and the same class throughout, so p_o is 1 as well.
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub annotator_a: usize,
    pub annotator_b: usize,
    /// Records labeled by both annotators.
    pub n: usize,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pairwise: Vec<PairAgreement>,
    /// Mean of the pairwise kappas; `None` when no pair shares a record.
    pub mean_kappa: Option<f64>,
}

/// Pairwise Cohen's kappa over every annotator pair with at least one shared record.
/// Annotators are reported 1-based.
pub fn agreement_report(corpus: &Corpus) -> AgreementReport {
    let mut pairwise = Vec::new();
    for i in 0..MAX_ANNOTATORS {
        for j in i + 1..MAX_ANNOTATORS {
            let (a, b): (Vec<Label>, Vec<Label>) = corpus
                .iter()
                .filter_map(|h| Some((h.annotations[i]?, h.annotations[j]?)))
                .unzip();
            if let Ok((p_o, p_e)) = agreement_terms(&a, &b) {
                pairwise.push(PairAgreement {
                    annotator_a: i + 1,
                    annotator_b: j + 1,
                    n: a.len(),
                    observed_agreement: p_o,
                    expected_agreement: p_e,
                    kappa: kappa_from_terms(p_o, p_e),
                });
            }
        }
    }
    let mean_kappa = if pairwise.is_empty() {
        None
    } else {
        Some(pairwise.iter().map(|p| p.kappa).sum::<f64>() / pairwise.len() as f64)
    };
    AgreementReport { pairwise, mean_kappa }
}

impl AgreementReport {
    /// JSON with every real rounded to 4 decimal places.
    pub fn to_json_4dp(&self) -> serde_json::Value {
        let r4 = |x: f64| serde_json::Value::from((x * 1e4).round() / 1e4);
        let pairs: Vec<serde_json::Value> = self
            .pairwise
            .iter()
            .map(|p| {
                serde_json::json!({
                    "annotators": [p.annotator_a, p.annotator_b],
                    "n": p.n,
                    "observed_agreement": r4(p.observed_agreement),
                    "expected_agreement": r4(p.expected_agreement),
                    "kappa": r4(p.kappa),
                })
            })
            .collect();
        serde_json::json!({
            "pairwise": pairs,
            "mean_kappa": self.mean_kappa.map(r4),
        })
    }
}

/// Label counts, handy for reports.
pub fn label_counts<'a>(records: impl IntoIterator<Item = &'a Headline>) -> BTreeMap<Label, usize> {
    let mut counts = BTreeMap::new();
    for h in records {
        if let Some(l) = h.label {
            *counts.entry(l).or_default() += 1;
        }
    }
    counts
}
