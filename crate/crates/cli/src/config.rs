//! TOML run configuration.
//!
//! Every constant the pipeline needs has a default here, so an empty file is a valid
//! configuration apart from the corpus path. Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crisis_lens_core::annotation::TiePolicy;
use crisis_lens_core::augment::RebalanceTarget;
use crisis_lens_core::classify::{ForestHyperparams, LinearHyperparams};
use crisis_lens_core::corpus::RelevanceConfig;
use crisis_lens_core::eval::SplitSpec;
use crisis_lens_core::features::{NgramRange, DEFAULT_MAX_FEATURES};
use crisis_lens_core::lda::{LdaConfig, TopicScoring, DEFAULT_K_GRID, DEFAULT_WINDOW};
use crisis_lens_core::temporal::{default_periods, Granularity, PeriodSpec};
use crisis_lens_core::Label;

use crate::invalid;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub relevance: RelevanceConfig,
    pub annotation: AnnotationSection,
    pub preprocess: PreprocessSection,
    pub features: FeatureSection,
    pub split: SplitSection,
    pub augment: Option<AugmentSection>,
    pub models: ModelsSection,
    pub lda: LdaSection,
    pub periods: Vec<PeriodSpec>,
    pub timeline: TimelineSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            paths: Paths::default(),
            relevance: RelevanceConfig::default(),
            annotation: AnnotationSection::default(),
            preprocess: PreprocessSection::default(),
            features: FeatureSection::default(),
            split: SplitSection::default(),
            augment: None,
            models: ModelsSection::default(),
            lda: LdaSection::default(),
            periods: default_periods(),
            timeline: TimelineSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    /// `csv` or `jsonl`; inferred from the corpus extension when absent.
    pub format: Option<String>,
    pub stoplist: Option<PathBuf>,
    pub stemmer_rules: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotationSection {
    pub weights: Vec<f64>,
    /// `reject` sends ties to ties.jsonl; `priority` picks the first tied label in `priority`.
    pub tie_policy: String,
    pub priority: Vec<Label>,
}

impl Default for AnnotationSection {
    fn default() -> Self {
        AnnotationSection {
            weights: vec![1.0; 3],
            tie_policy: "reject".into(),
            priority: Label::ALL.to_vec(),
        }
    }
}

impl AnnotationSection {
    pub fn policy(&self) -> Result<TiePolicy> {
        match self.tie_policy.as_str() {
            "reject" => Ok(TiePolicy::Reject),
            "priority" => Ok(TiePolicy::Priority(self.priority.clone())),
            other => Err(invalid(format!(
                "annotation.tie_policy must be `reject` or `priority`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSection {
    pub multi_pass_stemming: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSection {
    pub max_features: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            max_features: DEFAULT_MAX_FEATURES,
            ngram_min: 1,
            ngram_max: 1,
        }
    }
}

impl FeatureSection {
    pub fn ngram_range(&self) -> NgramRange {
        NgramRange {
            min: self.ngram_min,
            max: self.ngram_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train: 0.7,
            validation: 0.0,
            test: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    /// Raise minority classes to this many training records; the majority count when absent.
    #[serde(default)]
    pub target: Option<usize>,
    /// JSONL transcript of recorded paraphrases.
    #[serde(default)]
    pub transcript: Option<PathBuf>,
    /// Program and arguments speaking the line-delimited JSON protocol.
    #[serde(default)]
    pub command: Option<Vec<String>>,
}

impl AugmentSection {
    pub fn target(&self) -> RebalanceTarget {
        match self.target {
            Some(n) => RebalanceTarget::Absolute(n),
            None => RebalanceTarget::MatchMajority,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearSection {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl LinearSection {
    fn from(hp: LinearHyperparams) -> Self {
        LinearSection {
            learning_rate: hp.learning_rate,
            l2: hp.l2,
            epochs: hp.epochs,
        }
    }

    pub fn hyperparams(&self, seed: u64) -> LinearHyperparams {
        LinearHyperparams {
            learning_rate: self.learning_rate,
            l2: self.l2,
            epochs: self.epochs,
            seed,
        }
    }
}

impl Default for LinearSection {
    fn default() -> Self {
        LinearSection::from(LinearHyperparams::logreg_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestSection {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestSection {
    fn default() -> Self {
        let d = ForestHyperparams::default();
        ForestSection {
            n_trees: d.n_trees,
            max_depth: d.max_depth,
            bootstrap: d.bootstrap,
        }
    }
}

impl ForestSection {
    pub fn hyperparams(&self, seed: u64) -> ForestHyperparams {
        ForestHyperparams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            bootstrap: self.bootstrap,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnSection {
    pub k: usize,
}

impl Default for KnnSection {
    fn default() -> Self {
        KnnSection { k: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsSection {
    pub logreg: LinearSection,
    pub svm: LinearSection,
    pub forest: ForestSection,
    pub knn: KnnSection,
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection {
            logreg: LinearSection::default(),
            svm: LinearSection::from(LinearHyperparams::svm_default()),
            forest: ForestSection::default(),
            knn: KnnSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdaSection {
    pub k: usize,
    /// `1 / k` when absent.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub max_iters: usize,
    pub elbo_tol: f64,
    pub top_n: usize,
    pub window: usize,
    pub k_grid: Vec<usize>,
    pub max_features: usize,
}

impl Default for LdaSection {
    fn default() -> Self {
        let d = LdaConfig::new(10, 0);
        LdaSection {
            k: d.k,
            alpha: None,
            beta: d.beta,
            max_iters: d.max_iters,
            elbo_tol: d.elbo_tol,
            top_n: 10,
            window: DEFAULT_WINDOW,
            k_grid: DEFAULT_K_GRID.to_vec(),
            max_features: DEFAULT_MAX_FEATURES,
        }
    }
}

impl LdaSection {
    pub fn config(&self, seed: u64) -> LdaConfig {
        LdaConfig {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            max_iters: self.max_iters,
            elbo_tol: self.elbo_tol,
            seed,
        }
    }

    pub fn scoring(&self) -> TopicScoring {
        TopicScoring {
            top_n: self.top_n,
            window: self.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimelineSection {
    pub granularity: Granularity,
}

impl Default for TimelineSection {
    fn default() -> Self {
        TimelineSection {
            granularity: Granularity::Day,
        }
    }
}

/// A parsed configuration plus the directory its relative paths are anchored to.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| invalid(format!("{origin}: {e}")))
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train: self.split.train,
            validation: self.split.validation,
            test: self.split.test,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        self.relevance
            .validate()
            .map_err(|e| invalid(format!("relevance: {e}")))?;
        self.annotation.policy()?;
        if self.annotation.weights.len() != 3 || self.annotation.weights.iter().any(|w| w.is_nan() || *w <= 0.0) {
            return Err(invalid("annotation.weights must hold three positive numbers"));
        }
        self.features
            .ngram_range()
            .validate()
            .map_err(|e| invalid(format!("features: {e}")))?;
        if self.features.max_features == 0 || self.lda.max_features == 0 {
            return Err(invalid("max_features must be at least 1"));
        }
        self.split_spec(0)
            .validate()
            .map_err(|e| invalid(format!("split: {e}")))?;
        self.lda
            .config(0)
            .validate()
            .map_err(|e| invalid(format!("lda: {e}")))?;
        if self.lda.top_n == 0 || self.lda.window == 0 {
            return Err(invalid("lda.top_n and lda.window must be at least 1"));
        }
        for p in &self.periods {
            p.validate().map_err(|e| invalid(format!("periods: {e}")))?;
        }
        if let Some(a) = &self.augment {
            if a.transcript.is_some() == a.command.is_some() {
                return Err(invalid("augment needs exactly one of `transcript` or `command`"));
            }
            if a.command.as_ref().is_some_and(|c| c.is_empty()) {
                return Err(invalid("augment.command is empty"));
            }
        }
        let m = &self.models;
        for (name, s) in [("logreg", &m.logreg), ("svm", &m.svm)] {
            if s.learning_rate.is_nan() || s.learning_rate <= 0.0 || s.l2.is_nan() || s.l2 < 0.0 || s.epochs == 0 {
                return Err(invalid(format!(
                    "models.{name}: need learning_rate > 0, l2 >= 0, epochs >= 1"
                )));
            }
        }
        if m.forest.n_trees == 0 || m.knn.k == 0 {
            return Err(invalid("models.forest.n_trees and models.knn.k must be at least 1"));
        }
        Ok(())
    }

    /// SHA-256 of the effective configuration, excluding the output directory.
    pub fn hash(&self, seed: u64) -> String {
        let mut c = self.clone();
        c.paths.out = None;
        c.seed = Some(seed);
        let json = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Loaded {
    /// Reads `path` (or uses defaults when `None`), applies the seed override and checks
    /// that every referenced input file exists.
    pub fn load(path: Option<&Path>, seed_override: Option<u64>) -> Result<Loaded> {
        let (config, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| invalid(format!("cannot read config {}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (RunConfig::parse(&text, &p.display().to_string())?, base)
            }
            None => (RunConfig::default(), PathBuf::from(".")),
        };
        config.validate()?;
        let seed = seed_override.or(config.seed).unwrap_or(DEFAULT_SEED);
        let loaded = Loaded { config, base_dir, seed };
        let p = &loaded.config.paths;
        let mut files: Vec<&PathBuf> = [&p.stoplist, &p.stemmer_rules].into_iter().flatten().collect();
        if let Some(t) = loaded.config.augment.as_ref().and_then(|a| a.transcript.as_ref()) {
            files.push(t);
        }
        for f in files {
            let full = loaded.resolve(f);
            if !full.is_file() {
                return Err(invalid(format!("referenced file {} does not exist", full.display())));
            }
        }
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn hash(&self) -> String {
        self.config.hash(self.seed)
    }

    pub fn read_input(&self, p: &Path) -> Result<String> {
        let full = self.resolve(p);
        std::fs::read_to_string(&full).with_context(|| format!("reading {}", full.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = RunConfig::parse("", "t").unwrap();
        assert_eq!(c.periods, default_periods());
        assert_eq!(c.models.knn.k, 15);
        assert_eq!(c.lda.k_grid, vec![5, 8, 10, 12, 15]);
        c.validate().unwrap();
    }

    #[test]
    fn shipped_profile_matches_defaults() {
        let shipped = RunConfig::parse(include_str!("../../../config/default.toml"), "default.toml").unwrap();
        assert_eq!(shipped, RunConfig::default());
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = RunConfig::parse("seed = 1\n[lda]\nkk = 3\n", "cfg.toml").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("kk"), "{msg}");
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = RunConfig::parse("[relevance]\nthreshold = 0.2\n[models.forest]\nn_trees = 5\n", "t").unwrap();
        assert_eq!(c.relevance.threshold, 0.2);
        assert_eq!(c.relevance.keyword_weight, 0.5);
        assert_eq!(c.models.forest.n_trees, 5);
        assert!(c.models.forest.bootstrap);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let mut a = RunConfig::default();
        let h = a.hash(1);
        a.paths.out = Some("elsewhere".into());
        assert_eq!(a.hash(1), h);
        assert_ne!(a.hash(2), h);
        a.lda.k = 3;
        assert_ne!(a.hash(1), h);
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "[split]\ntrain = 0.5\ntest = 0.2\n",
            "[annotation]\ntie_policy = \"coin\"\n",
            "[lda]\nk = 0\n",
            "[augment]\n",
            "[[periods]]\nname = \"x\"\nstart = \"2024-07-02\"\nend = \"2024-07-01\"\n",
        ] {
            let c = RunConfig::parse(text, "t").unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
    }
}
