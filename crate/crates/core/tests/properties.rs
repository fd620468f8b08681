use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;

use crisis_lens_core::annotation::{cohen_kappa, majority_vote, AnnotationSet};
use crisis_lens_core::augment::{apply_augmentation, plan_rebalance, RebalanceTarget, TranscriptProvider};
use crisis_lens_core::corpus::{filter_corpus, read_jsonl, write_jsonl, Corpus, Headline, RelevanceConfig, Timestamp};
use crisis_lens_core::eval::{apportion, metrics, stratified_split, SplitSpec};
use crisis_lens_core::features::{build_vocabulary, count_matrix, tfidf_transform, NgramRange};
use crisis_lens_core::lda::coherence_cv;
use crisis_lens_core::preprocess::{process_text, stem, stem_multi_pass, PipelineConfig, StemmerRules, TokenizedDoc};
use crisis_lens_core::temporal::{bucket_timeline, conditional_proportion, default_periods, Granularity};
use crisis_lens_core::Label;

fn label() -> impl Strategy<Value = Label> {
    prop::sample::select(Label::ALL.to_vec())
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "কোটা",
        "আন্দোলন",
        "ছাত্র",
        "পুলিশ",
        "ঢাকা",
        "বন্যা",
        "আশা",
        "মিছিল",
        "x",
        "y",
    ])
    .prop_map(String::from)
}

fn headline_rows() -> impl Strategy<Value = Vec<(String, u32, Label)>> {
    prop::collection::vec(
        (
            prop::collection::vec(word(), 1..6).prop_map(|w| w.join(" ")),
            0u32..60,
            label(),
        ),
        1..40,
    )
}

fn corpus(rows: &[(String, u32, Label)]) -> Corpus {
    let base = NaiveDate::from_ymd_opt(2024, 7, 1).unwrap();
    Corpus::new(
        rows.iter()
            .enumerate()
            .map(|(i, (text, day, l))| {
                let ts = Timestamp::from_date(base + chrono::Duration::days(*day as i64));
                Headline::new(format!("h{i}"), text, ts, "src").with_label(*l)
            })
            .collect(),
    )
    .unwrap()
}

fn docs(rows: &[(String, u32, Label)]) -> Vec<TokenizedDoc> {
    rows.iter()
        .enumerate()
        .map(|(i, (t, _, _))| TokenizedDoc::new(format!("h{i}"), t.split_whitespace().map(String::from).collect()))
        .collect()
}

proptest! {
    #[test]
    fn filter_is_monotone_in_threshold(rows in headline_rows(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let c = corpus(&rows);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let cfg = |t| RelevanceConfig { threshold: t, keywords: vec!["কোটা".into(), "আন্দোলন".into()], ..RelevanceConfig::default() };
        let loose: Vec<String> = filter_corpus(&c, &cfg(lo)).records.into_iter().map(|h| h.id).collect();
        let strict = filter_corpus(&c, &cfg(hi));
        prop_assert!(strict.iter().all(|h| loose.contains(&h.id)));
    }

    #[test]
    fn jsonl_round_trip(rows in headline_rows()) {
        let c = corpus(&rows);
        let mut buf = Vec::new();
        write_jsonl(&c, &mut buf).unwrap();
        let back = read_jsonl(buf.as_slice()).unwrap();
        prop_assert!(back.rejects.is_empty());
        prop_assert_eq!(back.corpus, c);
    }

    #[test]
    fn kappa_symmetric_and_relabel_invariant(
        pairs in prop::collection::vec((label(), label()), 1..60),
        perm in Just(Label::ALL.to_vec()).prop_shuffle(),
    ) {
        let (a, b): (Vec<Label>, Vec<Label>) = pairs.into_iter().unzip();
        let k = cohen_kappa(&a, &b).unwrap();
        prop_assert!((k - cohen_kappa(&b, &a).unwrap()).abs() < 1e-12);
        let map = |l: &Label| perm[l.index()];
        let (ra, rb): (Vec<Label>, Vec<Label>) = (a.iter().map(map).collect(), b.iter().map(map).collect());
        prop_assert!((k - cohen_kappa(&ra, &rb).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn vote_invariant_to_weight_scale_and_vote_order(
        votes in prop::collection::vec(label(), 1..4),
        weights in prop::collection::vec(0.1f64..5.0, 3),
        scale in 0.01f64..100.0,
    ) {
        let v: Vec<(usize, Label)> = votes.iter().copied().enumerate().collect();
        let base = majority_vote(&AnnotationSet::new("r", v.clone(), weights.clone()).unwrap()).unwrap();
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        prop_assert_eq!(&base, &majority_vote(&AnnotationSet::new("r", v.clone(), scaled).unwrap()).unwrap());
        let mut rev = v;
        rev.reverse();
        prop_assert_eq!(&base, &majority_vote(&AnnotationSet::new("r", rev, weights).unwrap()).unwrap());
    }

    #[test]
    fn vocabulary_ignores_document_order(rows in headline_rows(), max in 1usize..12) {
        let d = docs(&rows);
        let mut rev = d.clone();
        rev.reverse();
        for range in [NgramRange::UNIGRAMS, NgramRange::UNI_AND_BIGRAMS] {
            let a = build_vocabulary(&d, range, max).unwrap();
            let b = build_vocabulary(&rev, range, max).unwrap();
            prop_assert_eq!(a.terms(), b.terms());
            prop_assert_eq!(a.df(), b.df());
        }
    }

    #[test]
    fn tfidf_rows_are_unit_or_zero(rows in headline_rows()) {
        let d = docs(&rows);
        let v = build_vocabulary(&d, NgramRange::UNIGRAMS, 5).unwrap();
        let x = tfidf_transform(&count_matrix(&d, &v), &v);
        for r in &x.rows {
            prop_assert!(r.is_zero() || (r.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn split_partitions_with_per_class_apportionment(rows in headline_rows(), seed in any::<u64>()) {
        let c = corpus(&rows);
        let spec = SplitSpec::three_way(seed);
        match stratified_split(&c, &spec) {
            Ok(s) => {
                let total = s.train.len() + s.validation.len() + s.test.len();
                prop_assert_eq!(total, c.len());
                for l in Label::ALL {
                    let n = c.iter().filter(|h| h.label == Some(l)).count();
                    if n == 0 { continue; }
                    let want = apportion(n, &[0.7, 0.15, 0.15]);
                    let got = [
                        s.train.records().iter().filter(|h| h.label == Some(l)).count(),
                        s.validation.iter().filter(|h| h.label == Some(l)).count(),
                        s.test.iter().filter(|h| h.label == Some(l)).count(),
                    ];
                    prop_assert_eq!(got.to_vec(), want);
                }
            }
            Err(_) => {
                let small = Label::ALL.iter().any(|l| {
                    let n = c.iter().filter(|h| h.label == Some(*l)).count();
                    n > 0 && n < 3
                });
                prop_assert!(small);
            }
        }
    }

    #[test]
    fn metrics_invariant_under_sample_permutation(
        pairs in prop::collection::vec((label(), label()), 1..50),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (t, p): (Vec<Label>, Vec<Label>) = pairs.iter().copied().unzip();
        let r = metrics(&t, &p, &Label::ALL).unwrap();
        prop_assert!((r.micro_recall - r.accuracy).abs() < 1e-12);
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (t2, p2): (Vec<Label>, Vec<Label>) = shuffled.into_iter().unzip();
        let r2 = metrics(&t2, &p2, &Label::ALL).unwrap();
        prop_assert_eq!(r.confusion, r2.confusion);
        prop_assert!((r.macro_f1 - r2.macro_f1).abs() < 1e-12);
        prop_assert!((r.accuracy - r2.accuracy).abs() < 1e-12);
    }

    #[test]
    fn coherence_invariant_under_topic_and_word_order(rows in headline_rows()) {
        let tokens: Vec<Vec<String>> = docs(&rows).into_iter().map(|d| d.tokens).collect();
        let topics = vec![
            vec!["কোটা".to_string(), "আন্দোলন".into(), "ছাত্র".into()],
            vec!["পুলিশ".to_string(), "ঢাকা".into(), "x".into()],
        ];
        let a = coherence_cv(&topics, &tokens, 110).unwrap();
        let mut swapped: Vec<Vec<String>> = topics.iter().rev().cloned().collect();
        swapped.iter_mut().for_each(|t| t.reverse());
        let b = coherence_cv(&swapped, &tokens, 110).unwrap();
        prop_assert!((a.mean - b.mean).abs() < 1e-12);
        prop_assert!((a.per_topic[0] - b.per_topic[1]).abs() < 1e-12);
    }

    #[test]
    fn timeline_counts_sum_and_conditionals_ignore_order(rows in headline_rows()) {
        let c = corpus(&rows);
        for g in [Granularity::Day, Granularity::Week] {
            let b = bucket_timeline(&c, g).unwrap();
            prop_assert_eq!(b.iter().map(|x| x.counts.total()).sum::<u64>(), c.len() as u64);
            for x in b.iter().filter(|x| x.counts.total() > 0) {
                let p = x.proportions;
                prop_assert!((p.outrage + p.hope + p.despair - 1.0).abs() < 1e-9);
            }
        }
        let mut rev = c.clone();
        rev.records.reverse();
        let period = &default_periods()[1];
        if let Ok(a) = conditional_proportion(&c, Label::Outrage, period) {
            prop_assert_eq!(a, conditional_proportion(&rev, Label::Outrage, period).unwrap());
        }
    }

    #[test]
    fn augmentation_adds_exactly_what_it_reports(rows in headline_rows(), per_source in 0usize..3) {
        let c = corpus(&rows);
        let spec = SplitSpec { train: 1.0, validation: 0.0, test: 0.0, seed: 0 };
        let train = stratified_split(&c, &spec).unwrap().train;
        let transcript: String = train
            .records()
            .iter()
            .map(|h| {
                let ps: Vec<String> = (0..per_source).map(|i| format!("{} v{i}", h.text)).collect();
                serde_json::json!({"record_id": h.id, "paraphrases": ps}).to_string() + "\n"
            })
            .collect();
        let mut provider = TranscriptProvider::from_reader("t", transcript.as_bytes()).unwrap();
        let plan = plan_rebalance(&train.labels(), RebalanceTarget::MatchMajority);
        let out = apply_augmentation(&train, &plan, &mut provider);
        let filled: usize = out.added.values().sum();
        prop_assert_eq!(out.split.len(), train.len() + filled);
        for (l, d) in &plan {
            prop_assert_eq!(out.added.get(l).copied().unwrap_or(0) + out.unmet.get(l).copied().unwrap_or(0), *d);
        }
        let ids: std::collections::HashSet<&str> = train.records().iter().map(|h| h.id.as_str()).collect();
        for h in &out.split.records()[train.len()..] {
            prop_assert!(ids.contains(h.provenance.as_ref().unwrap().source_id.as_str()));
        }
    }
}

#[test]
fn single_pass_stem_is_idempotent_on_worked_words() {
    let rules = StemmerRules::bangla_default();
    for w in [
        "চালিয়ে",
        "চালানো",
        "চালাবে",
        "আন্দোলনকারী",
        "আন্দোলনকারীদের",
        "শিক্ষার্থীদের",
        "ছাত্রদের",
        "পুলিশের",
        "মিছিলে",
    ] {
        let w: String = unicode_normalization::UnicodeNormalization::nfc(w).collect();
        let once = stem(&w, &rules);
        assert_eq!(stem(&once, &rules), once, "{w}");
    }
}

proptest! {
    #[test]
    fn multi_pass_pipeline_is_idempotent(rows in headline_rows()) {
        let cfg = PipelineConfig { multi_pass_stemming: true, ..PipelineConfig::default() };
        for (text, _, _) in &rows {
            let (once, _) = process_text(text, &cfg);
            let (twice, _) = process_text(&once.join(" "), &cfg);
            prop_assert_eq!(&twice, &once);
            for t in &once {
                prop_assert_eq!(&stem_multi_pass(t, &cfg.rules), t);
            }
        }
    }
}

#[test]
fn augmented_plan_keys_are_training_labels() {
    let plan = plan_rebalance(
        &[Label::Hope, Label::Hope, Label::Despair],
        RebalanceTarget::MatchMajority,
    );
    assert_eq!(plan, BTreeMap::from([(Label::Hope, 0), (Label::Despair, 1)]));
}
