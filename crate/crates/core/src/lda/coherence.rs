use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::LdaError;

pub const DEFAULT_WINDOW: usize = 110;

const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub measure: String,
    pub per_topic: Vec<f64>,
    pub mean: f64,
    /// Topic words that never occur in the reference documents.
    pub absent_words: Vec<String>,
    /// Topics with fewer than two words, scored 0.
    pub degenerate_topics: Vec<usize>,
}

/// Word and word-pair occurrence counts over a set of "contexts" (windows or documents).
struct Occurrences {
    ids: HashMap<String, usize>,
    single: Vec<u64>,
    pair: HashMap<(usize, usize), u64>,
    contexts: u64,
}

impl Occurrences {
    fn new(topics: &[Vec<String>]) -> Self {
        let mut ids = HashMap::new();
        for w in topics.iter().flatten() {
            let next = ids.len();
            ids.entry(w.clone()).or_insert(next);
        }
        let n = ids.len();
        Occurrences {
            ids,
            single: vec![0; n],
            pair: HashMap::new(),
            contexts: 0,
        }
    }

    fn record(&mut self, present: &BTreeSet<usize>) {
        self.contexts += 1;
        let present: Vec<usize> = present.iter().copied().collect();
        for (a, &i) in present.iter().enumerate() {
            self.single[i] += 1;
            for &j in &present[a + 1..] {
                *self.pair.entry((i, j)).or_default() += 1;
            }
        }
    }

    /// Boolean sliding windows; a document no longer than the window is a single window.
    fn sliding(topics: &[Vec<String>], docs: &[Vec<String>], window: usize) -> Self {
        let mut occ = Occurrences::new(topics);
        for doc in docs {
            let ids: Vec<Option<usize>> = doc.iter().map(|t| occ.ids.get(t).copied()).collect();
            if ids.len() <= window {
                occ.record(&ids.iter().flatten().copied().collect());
                continue;
            }
            let mut in_window: HashMap<usize, usize> = HashMap::new();
            for id in ids[..window].iter().flatten() {
                *in_window.entry(*id).or_default() += 1;
            }
            occ.record(&in_window.keys().copied().collect());
            for start in 1..=ids.len() - window {
                if let Some(out) = ids[start - 1] {
                    let c = in_window.get_mut(&out).expect("counted on entry");
                    *c -= 1;
                    if *c == 0 {
                        in_window.remove(&out);
                    }
                }
                if let Some(inc) = ids[start + window - 1] {
                    *in_window.entry(inc).or_default() += 1;
                }
                occ.record(&in_window.keys().copied().collect());
            }
        }
        occ
    }

    fn documents(topics: &[Vec<String>], docs: &[Vec<String>]) -> Self {
        let mut occ = Occurrences::new(topics);
        for doc in docs {
            occ.record(&doc.iter().filter_map(|t| occ.ids.get(t).copied()).collect());
        }
        occ
    }

    fn id(&self, w: &str) -> usize {
        self.ids[w]
    }

    fn count(&self, i: usize) -> u64 {
        self.single[i]
    }

    fn joint(&self, i: usize, j: usize) -> u64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.single[i],
            std::cmp::Ordering::Less => self.pair.get(&(i, j)).copied().unwrap_or(0),
            std::cmp::Ordering::Greater => self.pair.get(&(j, i)).copied().unwrap_or(0),
        }
    }

    fn absent(&self, topics: &[Vec<String>]) -> Vec<String> {
        let set: BTreeSet<&String> = topics
            .iter()
            .flatten()
            .filter(|w| self.count(self.id(w)) == 0)
            .collect();
        set.into_iter().cloned().collect()
    }

    fn npmi(&self, i: usize, j: usize) -> f64 {
        let (ci, cj) = (self.count(i), self.count(j));
        if ci == 0 || cj == 0 {
            return 0.0;
        }
        let n = self.contexts as f64;
        let pij = self.joint(i, j) as f64 / n + EPSILON;
        let (pi, pj) = (ci as f64 / n, cj as f64 / n);
        (pij / (pi * pj)).ln() / -pij.ln()
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn check_topics(topics: &[Vec<String>]) -> Result<(), LdaError> {
    if topics.is_empty() {
        Err(LdaError::EmptyTopics)
    } else {
        Ok(())
    }
}

fn report(measure: &str, per_topic: Vec<f64>, occ: &Occurrences, topics: &[Vec<String>]) -> CoherenceReport {
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    CoherenceReport {
        measure: measure.to_string(),
        mean,
        per_topic,
        absent_words: occ.absent(topics),
        degenerate_topics: topics
            .iter()
            .enumerate()
            .filter(|(_, t)| t.len() < 2)
            .map(|(i, _)| i)
            .collect(),
    }
}

/// C_v coherence: NPMI context vectors over boolean sliding windows, one-set segmentation,
/// cosine between each word's vector and the topic's summed vector, averaged over words
/// then topics.
pub fn coherence_cv(topics: &[Vec<String>], docs: &[Vec<String>], window: usize) -> Result<CoherenceReport, LdaError> {
    check_topics(topics)?;
    if window == 0 {
        return Err(LdaError::BadWindow);
    }
    let occ = Occurrences::sliding(topics, docs, window);
    let per_topic = topics
        .iter()
        .map(|topic| {
            if topic.len() < 2 {
                return 0.0;
            }
            let ids: Vec<usize> = topic.iter().map(|w| occ.id(w)).collect();
            let vectors: Vec<Vec<f64>> = ids
                .iter()
                .map(|&i| ids.iter().map(|&j| occ.npmi(i, j)).collect())
                .collect();
            let mut total = vec![0.0; ids.len()];
            for v in &vectors {
                total.iter_mut().zip(v).for_each(|(t, x)| *t += x);
            }
            vectors.iter().map(|v| cosine(v, &total)).sum::<f64>() / ids.len() as f64
        })
        .collect();
    Ok(report("c_v", per_topic, &occ, topics))
}

/// UMass coherence over document co-occurrence: mean of `ln((D(w_i, w_j) + 1) / D(w_j))`
/// for every word `w_i` ranked below `w_j`. Pairs whose `w_j` never occurs are skipped.
pub fn coherence_umass(topics: &[Vec<String>], docs: &[Vec<String>]) -> Result<CoherenceReport, LdaError> {
    check_topics(topics)?;
    let occ = Occurrences::documents(topics, docs);
    let per_topic = topics
        .iter()
        .map(|topic| {
            let ids: Vec<usize> = topic.iter().map(|w| occ.id(w)).collect();
            let mut sum = 0.0;
            let mut n = 0usize;
            for a in 1..ids.len() {
                for &j in &ids[..a] {
                    let dj = occ.count(j);
                    if dj > 0 {
                        sum += ((occ.joint(ids[a], j) + 1) as f64 / dj as f64).ln();
                        n += 1;
                    }
                }
            }
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        })
        .collect();
    Ok(report("u_mass", per_topic, &occ, topics))
}
