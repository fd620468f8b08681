//! Sentiment proportions over time and around named event periods.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Corpus;
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TemporalError {
    #[error("period `{name}` ends ({end}) before it starts ({start})")]
    InvertedPeriod {
        name: String,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("no records fall inside period `{0}`")]
    EmptyPeriod(String),
    #[error("record `{0}` has no label")]
    Unlabeled(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Day,
    /// Weeks starting on Monday.
    Week,
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "day" | "daily" => Ok(Granularity::Day),
            "week" | "weekly" => Ok(Granularity::Week),
            other => Err(format!("unknown granularity `{other}` (day, week)")),
        }
    }
}

impl Granularity {
    fn bucket_start(self, d: NaiveDate) -> NaiveDate {
        match self {
            Granularity::Day => d,
            Granularity::Week => d - Duration::days(d.weekday().num_days_from_monday() as i64),
        }
    }

    fn step(self) -> Duration {
        match self {
            Granularity::Day => Duration::days(1),
            Granularity::Week => Duration::days(7),
        }
    }
}

/// Named inclusive date range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodSpec {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl PeriodSpec {
    pub fn new(name: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Result<Self, TemporalError> {
        let p = PeriodSpec {
            name: name.into(),
            start,
            end,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TemporalError> {
        if self.start > self.end {
            return Err(TemporalError::InvertedPeriod {
                name: self.name.clone(),
                start: self.start,
                end: self.end,
            });
        }
        Ok(())
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// The event windows of the July–August 2024 unrest, all in 2024.
pub fn default_periods() -> Vec<PeriodSpec> {
    let d = |m, day| NaiveDate::from_ymd_opt(2024, m, day).expect("valid date");
    [
        ("pre-blackout", d(7, 15), d(7, 18)),
        ("blackout", d(7, 19), d(7, 23)),
        ("post-blackout", d(7, 24), d(7, 31)),
        ("early-august", d(8, 1), d(8, 4)),
        ("government-fall", d(8, 5), d(8, 15)),
        ("late-august-floods", d(8, 20), d(8, 30)),
    ]
    .into_iter()
    .map(|(name, start, end)| PeriodSpec {
        name: name.to_string(),
        start,
        end,
    })
    .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub outrage: u64,
    pub hope: u64,
    pub despair: u64,
}

impl LabelCounts {
    pub fn get(&self, l: Label) -> u64 {
        match l {
            Label::Outrage => self.outrage,
            Label::Hope => self.hope,
            Label::Despair => self.despair,
        }
    }

    fn add(&mut self, l: Label) {
        match l {
            Label::Outrage => self.outrage += 1,
            Label::Hope => self.hope += 1,
            Label::Despair => self.despair += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.outrage + self.hope + self.despair
    }

    /// Shares of the total; all zero when empty.
    pub fn proportions(&self) -> LabelShares {
        let n = self.total() as f64;
        let share = |c: u64| if n == 0.0 { 0.0 } else { c as f64 / n };
        LabelShares {
            outrage: share(self.outrage),
            hope: share(self.hope),
            despair: share(self.despair),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelShares {
    pub outrage: f64,
    pub hope: f64,
    pub despair: f64,
}

impl LabelShares {
    pub fn get(&self, l: Label) -> f64 {
        match l {
            Label::Outrage => self.outrage,
            Label::Hope => self.hope,
            Label::Despair => self.despair,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineBucket {
    pub start: NaiveDate,
    pub counts: LabelCounts,
    pub proportions: LabelShares,
}

fn labeled(corpus: &Corpus) -> Result<Vec<(NaiveDate, Label)>, TemporalError> {
    corpus
        .iter()
        .map(|h| {
            h.label
                .map(|l| (h.date(), l))
                .ok_or_else(|| TemporalError::Unlabeled(h.id.clone()))
        })
        .collect()
}

/// Contiguous buckets from the first to the last record's date, empty buckets included.
pub fn bucket_timeline(corpus: &Corpus, granularity: Granularity) -> Result<Vec<TimelineBucket>, TemporalError> {
    let rows = labeled(corpus)?;
    let Some((first, last)) = corpus.date_range() else {
        return Ok(Vec::new());
    };
    let mut counts: BTreeMap<NaiveDate, LabelCounts> = BTreeMap::new();
    let mut start = granularity.bucket_start(first);
    while start <= last {
        counts.insert(start, LabelCounts::default());
        start += granularity.step();
    }
    for (d, l) in rows {
        counts
            .get_mut(&granularity.bucket_start(d))
            .expect("bucket covers every date")
            .add(l);
    }
    Ok(counts
        .into_iter()
        .map(|(start, counts)| TimelineBucket {
            start,
            counts,
            proportions: counts.proportions(),
        })
        .collect())
}

/// `p_in / p_out`; infinite when nothing falls outside or `p_out` is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ratio::Finite(x) => s.serialize_f64(*x),
            Ratio::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Ratio::Finite(x)),
            Repr::Str(s) if s == "inf" => Ok(Ratio::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad ratio {s:?}"))),
        }
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::Finite(x) => write!(f, "{x}"),
            Ratio::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalProportion {
    pub label: Label,
    pub period: PeriodSpec,
    pub n_in: u64,
    pub label_in: u64,
    pub n_out: u64,
    pub label_out: u64,
    pub p_in: f64,
    /// `None` when every record lies inside the period.
    pub p_out: Option<f64>,
    pub ratio: Ratio,
}

/// Share of `label` inside `period` against its share outside, in double precision.
pub fn conditional_proportion(
    corpus: &Corpus,
    label: Label,
    period: &PeriodSpec,
) -> Result<ConditionalProportion, TemporalError> {
    period.validate()?;
    let (mut n_in, mut label_in, mut n_out, mut label_out) = (0u64, 0u64, 0u64, 0u64);
    for (d, l) in labeled(corpus)? {
        let hit = (l == label) as u64;
        if period.contains(d) {
            n_in += 1;
            label_in += hit;
        } else {
            n_out += 1;
            label_out += hit;
        }
    }
    if n_in == 0 {
        return Err(TemporalError::EmptyPeriod(period.name.clone()));
    }
    let p_in = label_in as f64 / n_in as f64;
    let p_out = (n_out > 0).then(|| label_out as f64 / n_out as f64);
    let ratio = match p_out {
        Some(p) if p > 0.0 => Ratio::Finite(p_in / p),
        _ => Ratio::Infinite,
    };
    Ok(ConditionalProportion {
        label,
        period: period.clone(),
        n_in,
        label_in,
        n_out,
        label_out,
        p_in,
        p_out,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub period: PeriodSpec,
    pub n: u64,
    pub counts: LabelCounts,
    pub proportions: LabelShares,
}

/// Label distribution inside each period; empty periods are kept with `n = 0`.
pub fn event_report(corpus: &Corpus, periods: &[PeriodSpec]) -> Result<Vec<PeriodRow>, TemporalError> {
    let rows = labeled(corpus)?;
    periods
        .iter()
        .map(|p| {
            p.validate()?;
            let mut counts = LabelCounts::default();
            for &(d, l) in &rows {
                if p.contains(d) {
                    counts.add(l);
                }
            }
            Ok(PeriodRow {
                period: p.clone(),
                n: counts.total(),
                counts,
                proportions: counts.proportions(),
            })
        })
        .collect()
}

pub fn timeline_csv(buckets: &[TimelineBucket]) -> String {
    let mut out = String::from("start,outrage,hope,despair,total,p_outrage,p_hope,p_despair\n");
    for b in buckets {
        let (c, p) = (&b.counts, &b.proportions);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6}",
            b.start,
            c.outrage,
            c.hope,
            c.despair,
            c.total(),
            p.outrage,
            p.hope,
            p.despair
        );
    }
    out
}

pub fn event_report_csv(rows: &[PeriodRow]) -> String {
    let mut out = String::from("period,start,end,n,outrage,hope,despair,p_outrage,p_hope,p_despair\n");
    for r in rows {
        let (c, p) = (&r.counts, &r.proportions);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
            r.period.name,
            r.period.start,
            r.period.end,
            r.n,
            c.outrage,
            c.hope,
            c.despair,
            p.outrage,
            p.hope,
            p.despair
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Headline, Timestamp};
    use Label::{Despair as D, Hope as H, Outrage as O};

    fn date(m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, m, d).unwrap()
    }

    fn corpus(rows: &[(u32, u32, Label)]) -> Corpus {
        Corpus::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(m, d, l))| {
                    Headline::new(format!("r{i}"), "x", Timestamp::from_date(date(m, d)), "s").with_label(l)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_record_single_bucket() {
        let b = bucket_timeline(&corpus(&[(7, 20, O)]), Granularity::Day).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].counts.outrage, 1);
        assert_eq!(b[0].proportions.outrage, 1.0);
    }

    #[test]
    fn daily_hand_counts() {
        // Three days, six records; 7/21 is the middle day.
        let c = corpus(&[(7, 20, O), (7, 20, H), (7, 22, D), (7, 21, D), (7, 20, O), (7, 22, D)]);
        let b = bucket_timeline(&c, Granularity::Day).unwrap();
        let starts: Vec<NaiveDate> = b.iter().map(|x| x.start).collect();
        assert_eq!(starts, [date(7, 20), date(7, 21), date(7, 22)]);
        assert_eq!(
            b[0].counts,
            LabelCounts {
                outrage: 2,
                hope: 1,
                despair: 0
            }
        );
        assert_eq!(
            b[1].counts,
            LabelCounts {
                outrage: 0,
                hope: 0,
                despair: 1
            }
        );
        assert_eq!(
            b[2].counts,
            LabelCounts {
                outrage: 0,
                hope: 0,
                despair: 2
            }
        );
        assert!((b[0].proportions.outrage - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gaps_are_kept_as_empty_buckets() {
        let b = bucket_timeline(&corpus(&[(7, 5, O), (7, 8, H)]), Granularity::Day).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b[1].counts.total(), 0);
        assert_eq!(b[1].proportions, LabelShares::default());
    }

    #[test]
    fn weeks_start_on_monday() {
        // 2024-07-15 is a Monday; 07-21 is the Sunday of that week.
        let b = bucket_timeline(&corpus(&[(7, 17, O), (7, 21, H), (7, 22, D)]), Granularity::Week).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].start, date(7, 15));
        assert_eq!(b[0].counts.total(), 2);
        assert_eq!(b[1].start, date(7, 22));
    }

    #[test]
    fn uniform_label_gives_unit_ratio() {
        let c = corpus(&[(7, 10, O), (7, 10, H), (7, 20, O), (7, 20, H)]);
        let p = PeriodSpec::new("b", date(7, 19), date(7, 23)).unwrap();
        let r = conditional_proportion(&c, O, &p).unwrap();
        assert_eq!((r.p_in, r.p_out), (0.5, Some(0.5)));
        assert_eq!(r.ratio, Ratio::Finite(1.0));
    }

    #[test]
    fn absent_inside_gives_zero_ratio() {
        let c = corpus(&[(7, 10, O), (7, 11, H), (7, 20, H), (7, 21, D)]);
        let p = &default_periods()[1];
        let r = conditional_proportion(&c, O, p).unwrap();
        assert_eq!(r.p_in, 0.0);
        assert_eq!(r.ratio, Ratio::Finite(0.0));
    }

    #[test]
    fn full_range_period_hits_infinite_sentinel() {
        let c = corpus(&[(7, 10, O), (7, 20, H)]);
        let p = PeriodSpec::new("all", date(7, 1), date(8, 31)).unwrap();
        let r = conditional_proportion(&c, O, &p).unwrap();
        assert_eq!(r.p_out, None);
        assert_eq!(r.ratio, Ratio::Infinite);
        assert_eq!(serde_json::to_string(&r.ratio).unwrap(), "\"inf\"");
        let back: Ratio = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(back, Ratio::Infinite);
    }

    #[test]
    fn empty_period_is_an_error() {
        let c = corpus(&[(7, 10, O)]);
        let p = PeriodSpec::new("b", date(7, 19), date(7, 23)).unwrap();
        assert_eq!(
            conditional_proportion(&c, O, &p).unwrap_err(),
            TemporalError::EmptyPeriod("b".into())
        );
        assert!(PeriodSpec::new("x", date(7, 2), date(7, 1)).is_err());
    }

    #[test]
    fn event_report_rows() {
        let c = corpus(&[(7, 16, D), (7, 17, D), (7, 18, O), (7, 20, H), (7, 21, O)]);
        let periods = &default_periods()[..2];
        let rows = event_report(&c, periods).unwrap();
        assert_eq!(
            rows[0].counts,
            LabelCounts {
                outrage: 1,
                hope: 0,
                despair: 2
            }
        );
        assert_eq!(
            rows[1].counts,
            LabelCounts {
                outrage: 1,
                hope: 1,
                despair: 0
            }
        );
        let full = PeriodSpec::new("all", date(7, 1), date(8, 31)).unwrap();
        let rows = event_report(&c, &[full]).unwrap();
        assert_eq!(rows[0].n, 5);
        assert!((rows[0].proportions.despair - 0.4).abs() < 1e-12);
        let csv = event_report_csv(&rows);
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("all,2024-07-01,2024-08-31,5,2,1,2,"));
    }

    #[test]
    fn default_periods_are_ordered_and_valid() {
        let p = default_periods();
        assert!(p.iter().all(|x| x.validate().is_ok()));
        assert!(p.windows(2).all(|w| w[0].end < w[1].start));
        assert_eq!(p[1].start, date(7, 19));
        assert_eq!(p[1].end, date(7, 23));
    }
}
