//! Stratified splitting and classification metrics.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, CorpusError, Headline};
use crate::label::Label;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("split fractions must be nonnegative with positive train and test and sum to 1 (got {0:?})")]
    BadFractions([f64; 3]),
    #[error("record `{0}` has no label to stratify on")]
    Unlabeled(String),
    #[error("class {label} has {count} records but {parts} nonzero split parts")]
    ClassTooSmall { label: Label, count: usize, parts: usize },
    #[error("{0} true labels but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    Empty,
    #[error("label {0} is not among the evaluated classes")]
    UnknownLabel(Label),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// 70/30 train/test.
    pub fn classical(seed: u64) -> Self {
        SplitSpec {
            train: 0.7,
            validation: 0.0,
            test: 0.3,
            seed,
        }
    }

    /// 70/15/15 train/validation/test.
    pub fn three_way(seed: u64) -> Self {
        SplitSpec {
            train: 0.7,
            validation: 0.15,
            test: 0.15,
            seed,
        }
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let f = self.fractions();
        let ok = f.iter().all(|x| x.is_finite() && *x >= 0.0)
            && self.train > 0.0
            && (f.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        // A train-only split (1, 0, 0) is allowed as the degenerate case.
        let ok = ok && (self.test > 0.0 || self.train == 1.0);
        if ok {
            Ok(())
        } else {
            Err(EvalError::BadFractions(f))
        }
    }
}

/// Largest-remainder apportionment of `n` items across `fractions`.
/// Remainder ties go to the earlier part.
pub fn apportion(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    let rem = |i: usize| quotas[i] - counts[i] as f64;
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Training part of a split. Only [`stratified_split`] and [`load_split`] build one,
/// so augmentation can never be pointed at validation or test records.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrainSplit(Vec<Headline>);

impl TrainSplit {
    pub fn records(&self) -> &[Headline] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.0.iter().filter_map(|h| h.label).collect()
    }

    pub(crate) fn push(&mut self, h: Headline) {
        self.0.push(h);
    }

    pub fn into_corpus(self) -> Corpus {
        Corpus { records: self.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: TrainSplit,
    pub validation: Vec<Headline>,
    pub test: Vec<Headline>,
}

/// Per-class largest-remainder split; each part keeps corpus order.
pub fn stratified_split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split, EvalError> {
    spec.validate()?;
    let fractions = spec.fractions();
    let nonzero_parts = fractions.iter().filter(|f| **f > 0.0).count();
    let mut by_class: [Vec<usize>; 3] = Default::default();
    for (i, h) in corpus.iter().enumerate() {
        let label = h.label.ok_or_else(|| EvalError::Unlabeled(h.id.clone()))?;
        by_class[label.index()].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut part_of = vec![0usize; corpus.len()];
    for label in Label::ALL {
        let members = &mut by_class[label.index()];
        if members.is_empty() {
            continue;
        }
        if members.len() < nonzero_parts {
            return Err(EvalError::ClassTooSmall {
                label,
                count: members.len(),
                parts: nonzero_parts,
            });
        }
        members.shuffle(&mut rng);
        let counts = apportion(members.len(), &fractions);
        let mut cursor = 0;
        for (part, &c) in counts.iter().enumerate() {
            for &i in &members[cursor..cursor + c] {
                part_of[i] = part;
            }
            cursor += c;
        }
    }
    let mut parts: [Vec<Headline>; 3] = Default::default();
    for (i, h) in corpus.iter().enumerate() {
        parts[part_of[i]].push(h.clone());
    }
    let [train, validation, test] = parts;
    Ok(Split {
        train: TrainSplit(train),
        validation,
        test,
    })
}

pub const SPLIT_FILES: [&str; 3] = ["train.jsonl", "validation.jsonl", "test.jsonl"];

pub fn write_split(split: &Split, dir: &Path) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir).map_err(CorpusError::Write)?;
    let parts = [split.train.records(), &split.validation[..], &split.test[..]];
    for (name, records) in SPLIT_FILES.iter().zip(parts) {
        let file = File::create(dir.join(name)).map_err(CorpusError::Write)?;
        let corpus = Corpus {
            records: records.to_vec(),
        };
        corpus::write_jsonl(&corpus, BufWriter::new(file))?;
    }
    Ok(())
}

pub fn load_split(dir: &Path) -> Result<Split, EvalError> {
    let read = |name: &str| -> Result<Vec<Headline>, EvalError> {
        let path = dir.join(name);
        let file = File::open(&path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(corpus::read_jsonl(BufReader::new(file))?.corpus.records)
    };
    Ok(Split {
        train: TrainSplit(read(SPLIT_FILES[0])?),
        validation: read(SPLIT_FILES[1])?,
        test: read(SPLIT_FILES[2])?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True instances of the class.
    pub support: usize,
    /// Set when nothing was predicted as this class and precision was defined as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<Label>,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    /// `confusion[true][predicted]` counts, indexed like `classes`.
    pub confusion: Vec<Vec<u64>>,
    pub n: usize,
    #[serde(default)]
    pub config: serde_json::Value,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics(truth: &[Label], predicted: &[Label], classes: &[Label]) -> Result<EvalReport, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() || classes.is_empty() {
        return Err(EvalError::Empty);
    }
    let k = classes.len();
    let pos = |l: Label| classes.iter().position(|c| *c == l).ok_or(EvalError::UnknownLabel(l));
    let mut confusion = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[pos(t)?][pos(p)?] += 1;
    }
    let n = truth.len() as u64;
    let mut per_class = Vec::with_capacity(k);
    let (mut tp_sum, mut fp_sum, mut fn_sum) = (0u64, 0u64, 0u64);
    for c in 0..k {
        let tp = confusion[c][c];
        let row: u64 = confusion[c].iter().sum();
        let col: u64 = confusion.iter().map(|r| r[c]).sum();
        let (precision, precision_undefined) = ratio(tp, col);
        let (recall, recall_undefined) = ratio(tp, row);
        tp_sum += tp;
        fp_sum += col - tp;
        fn_sum += row - tp;
        per_class.push(ClassMetrics {
            label: classes[c],
            precision,
            recall,
            f1: harmonic(precision, recall),
            support: row as usize,
            precision_undefined,
            recall_undefined,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    let micro_precision = ratio(tp_sum, tp_sum + fp_sum).0;
    let micro_recall = ratio(tp_sum, tp_sum + fn_sum).0;
    Ok(EvalReport {
        classes: classes.to_vec(),
        accuracy: tp_sum as f64 / n as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        micro_precision,
        micro_recall,
        micro_f1: harmonic(micro_precision, micro_recall),
        per_class,
        confusion,
        n: truth.len(),
        config: serde_json::Value::Null,
    })
}

/// Half-up rounding to `places` decimals, for presentation only.
pub fn round_half_up(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    ((x * scale) + 0.5 + 1e-9).floor() / scale
}

/// Plain-text table with the columns Model, Acc., Prec., Rec., F1.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$}  {:>5}  {:>5}  {:>5}  {:>5}\n",
        "Model", "Acc.", "Prec.", "Rec.", "F1"
    );
    for (name, r) in rows {
        out.push_str(&format!(
            "{:<width$}  {:>5.2}  {:>5.2}  {:>5.2}  {:>5.2}\n",
            name,
            round_half_up(r.accuracy, 2),
            round_half_up(r.macro_precision, 2),
            round_half_up(r.macro_recall, 2),
            round_half_up(r.macro_f1, 2),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Timestamp;
    use chrono::NaiveDate;
    use Label::{Despair as D, Hope as H, Outrage as O};

    fn corpus(counts: &[(Label, usize)]) -> Corpus {
        let ts = Timestamp::from_date(NaiveDate::from_ymd_opt(2024, 7, 20).unwrap());
        let mut records = Vec::new();
        for &(l, n) in counts {
            for i in 0..n {
                records.push(Headline::new(format!("{l}-{i}"), "x", ts, "s").with_label(l));
            }
        }
        Corpus::new(records).unwrap()
    }

    fn count(records: &[Headline], l: Label) -> usize {
        records.iter().filter(|h| h.label == Some(l)).count()
    }

    #[test]
    fn apportion_largest_remainder() {
        assert_eq!(apportion(10, &[0.7, 0.0, 0.3]), [7, 0, 3]);
        assert_eq!(apportion(2028, &[0.7, 0.15, 0.15]), [1420, 304, 304]);
        // 7 * (0.7, 0.15, 0.15) = (4.9, 1.05, 1.05): floors 4,1,1 and the spare goes to train.
        assert_eq!(apportion(7, &[0.7, 0.15, 0.15]), [5, 1, 1]);
        assert_eq!(apportion(1, &[0.5, 0.0, 0.5]), [1, 0, 0]);
    }

    #[test]
    fn train_only_split() {
        let c = corpus(&[(O, 3), (H, 2)]);
        let s = stratified_split(
            &c,
            &SplitSpec {
                train: 1.0,
                validation: 0.0,
                test: 0.0,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(s.train.records(), &c.records[..]);
        assert!(s.validation.is_empty() && s.test.is_empty());
    }

    #[test]
    fn seventy_thirty_per_class() {
        let c = corpus(&[(O, 10), (H, 10)]);
        let s = stratified_split(&c, &SplitSpec::classical(5)).unwrap();
        assert_eq!((count(s.train.records(), O), count(s.train.records(), H)), (7, 7));
        assert_eq!((count(&s.test, O), count(&s.test, H)), (3, 3));
    }

    #[test]
    fn three_way_sizes_follow_per_class_rounding() {
        // Per class: O 500 -> 350/75/75; H 800 -> 560/120/120;
        // D 728 -> 509.6/109.2/109.2 -> 510/109/109. Totals 1420/304/304.
        let c = corpus(&[(O, 500), (H, 800), (D, 728)]);
        let s = stratified_split(&c, &SplitSpec::three_way(42)).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (1420, 304, 304));
        assert_eq!(count(s.train.records(), D), 510);
        assert_eq!(count(&s.validation, D), 109);
    }

    #[test]
    fn split_is_seeded_partition() {
        let c = corpus(&[(O, 13), (H, 9), (D, 21)]);
        let a = stratified_split(&c, &SplitSpec::three_way(9)).unwrap();
        let b = stratified_split(&c, &SplitSpec::three_way(9)).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<&str> = a
            .train
            .records()
            .iter()
            .chain(&a.validation)
            .chain(&a.test)
            .map(|h| h.id.as_str())
            .collect();
        ids.sort();
        let mut all: Vec<&str> = c.iter().map(|h| h.id.as_str()).collect();
        all.sort();
        assert_eq!(ids, all);
    }

    #[test]
    fn split_errors() {
        let c = corpus(&[(O, 1), (H, 5)]);
        assert!(matches!(
            stratified_split(&c, &SplitSpec::classical(0)),
            Err(EvalError::ClassTooSmall {
                label: O,
                count: 1,
                parts: 2
            })
        ));
        let bad = SplitSpec {
            train: 0.5,
            validation: 0.0,
            test: 0.4,
            seed: 0,
        };
        assert!(matches!(stratified_split(&c, &bad), Err(EvalError::BadFractions(_))));
        let mut c = corpus(&[(O, 3)]);
        c.records[0].label = None;
        assert!(matches!(
            stratified_split(&c, &SplitSpec::classical(0)),
            Err(EvalError::Unlabeled(_))
        ));
    }

    #[test]
    fn perfect_predictions() {
        let y = [O, H, D, O];
        let r = metrics(&y, &y, &Label::ALL).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r
            .per_class
            .iter()
            .all(|m| m.precision == 1.0 && m.recall == 1.0 && m.f1 == 1.0));
        assert_eq!(r.confusion, vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn nine_sample_confusion_fixture() {
        // Rows = truth, columns = prediction:
        //        O  H  D
        //   O  [ 2, 1, 0 ]
        //   H  [ 0, 3, 1 ]
        //   D  [ 1, 0, 1 ]
        let truth = [O, O, O, H, H, H, H, D, D];
        let pred = [O, O, H, H, H, H, D, O, D];
        let r = metrics(&truth, &pred, &Label::ALL).unwrap();
        assert_eq!(r.confusion, vec![vec![2, 1, 0], vec![0, 3, 1], vec![1, 0, 1]]);
        let p = [2.0 / 3.0, 3.0 / 4.0, 1.0 / 2.0];
        let rc = [2.0 / 3.0, 3.0 / 4.0, 1.0 / 2.0];
        let f = [2.0 / 3.0, 3.0 / 4.0, 1.0 / 2.0];
        for c in 0..3 {
            assert!((r.per_class[c].precision - p[c]).abs() < 1e-12);
            assert!((r.per_class[c].recall - rc[c]).abs() < 1e-12);
            assert!((r.per_class[c].f1 - f[c]).abs() < 1e-12);
        }
        assert!((r.accuracy - 6.0 / 9.0).abs() < 1e-12);
        assert!((r.macro_precision - (2.0 / 3.0 + 0.75 + 0.5) / 3.0).abs() < 1e-12);
        assert!((r.micro_recall - r.accuracy).abs() < 1e-12);
    }

    #[test]
    fn undefined_precision_is_flagged_zero() {
        let truth = [O, H, D];
        let pred = [O, O, O];
        let r = metrics(&truth, &pred, &Label::ALL).unwrap();
        assert!(r.per_class[1].precision_undefined);
        assert_eq!(r.per_class[1].precision, 0.0);
        assert_eq!(r.per_class[1].f1, 0.0);
        assert!(!r.per_class[0].precision_undefined);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(
            metrics(&[O], &[], &Label::ALL),
            Err(EvalError::LengthMismatch(1, 0))
        ));
        assert!(matches!(metrics(&[], &[], &Label::ALL), Err(EvalError::Empty)));
        assert!(matches!(metrics(&[D], &[O], &[O, H]), Err(EvalError::UnknownLabel(D))));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_half_up(0.685, 2), 0.69);
        assert_eq!(round_half_up(0.675, 2), 0.68);
        assert_eq!(round_half_up(0.7049, 2), 0.70);
    }

    #[test]
    fn table_layout() {
        let y = [O, H, D];
        let r = metrics(&y, &y, &Label::ALL).unwrap();
        let t = render_table(&[("SVM", &r)]);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("Model"));
        assert!(lines[1].starts_with("SVM") && lines[1].ends_with("1.00"));
    }

    #[test]
    fn split_files_round_trip() {
        let c = corpus(&[(O, 4), (H, 4), (D, 4)]);
        let s = stratified_split(&c, &SplitSpec::three_way(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_split(&s, dir.path()).unwrap();
        assert_eq!(load_split(dir.path()).unwrap(), s);
    }
}
