//! Worked Bangla examples through each preprocessing stage with the shipped defaults.

use crisis_lens_core::preprocess::{remove_stopwords, stem, strip_punctuation, tokenize, StemmerRules, Stoplist};
use unicode_normalization::UnicodeNormalization;

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(nfc).collect()
}

#[test]
fn punctuation_removal() {
    let input = nfc("কোটাবিরোধী আন্দোলন : ঢাকা বিশ্ববিদ্যালয়ে মিছিল শুরু, মধুর ক্যানটিনে জড়ো হয়েছে ছাত্রলীগ");
    let expected = nfc("কোটাবিরোধী আন্দোলন ঢাকা বিশ্ববিদ্যালয়ে মিছিল শুরু মধুর ক্যানটিনে জড়ো হয়েছে ছাত্রলীগ");
    assert_eq!(strip_punctuation(&input).as_bytes(), expected.as_bytes());
}

#[test]
fn tokenization() {
    let input = nfc("চট্টগ্রামে ট্রেন আটকে শিক্ষার্থীদের আন্দোলন");
    assert_eq!(tokenize(&input), words("চট্টগ্রামে ট্রেন আটকে শিক্ষার্থীদের আন্দোলন"));
}

#[test]
fn stopword_removal() {
    let tokens = words("কোটাবিরোধী ও সর্বজনীন পেনশন প্রত্যাহারের আন্দোলনে নৈতিক সমর্থন দিল বিএনপি");
    let kept = remove_stopwords(&tokens, &Stoplist::bangla_default());
    assert_eq!(
        kept,
        words("কোটাবিরোধী সর্বজনীন পেনশন প্রত্যাহারের আন্দোলনে নৈতিক সমর্থন বিএনপি")
    );
}

#[test]
fn stemming() {
    let rules = StemmerRules::bangla_default();
    for w in ["চালিয়ে", "চালানো", "চালাবে"] {
        assert_eq!(stem(&nfc(w), &rules).as_bytes(), nfc("চালা").as_bytes(), "{w}");
    }
    for w in ["আন্দোলনকারী", "আন্দোলনকারীদের"] {
        assert_eq!(stem(&nfc(w), &rules).as_bytes(), nfc("আন্দোলন").as_bytes(), "{w}");
    }
}
