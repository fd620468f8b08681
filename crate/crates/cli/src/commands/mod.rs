pub mod data;
pub mod lda;
pub mod model;
pub mod report;

use anyhow::Result;

use crisis_lens_core::corpus::Corpus;
use crisis_lens_core::preprocess::{pipeline_all, PipelineConfig, StemmerRules, Stoplist, TokenizedDoc};

use crate::artifacts::Workspace;

pub const CORPUS: &str = "corpus.jsonl";
pub const FILTERED: &str = "filtered.jsonl";
pub const LABELED: &str = "labeled.jsonl";
pub const TOKENS: &str = "tokens.jsonl";
pub const SPLIT_DIR: &str = "split";
pub const TRAIN_AUGMENTED: &str = "split/train_augmented.jsonl";

pub fn pipeline_config(ws: &Workspace) -> Result<PipelineConfig> {
    let paths = &ws.config().paths;
    let stoplist = match &paths.stoplist {
        Some(p) => Stoplist::parse(&ws.loaded.read_input(p)?),
        None => Stoplist::bangla_default(),
    };
    let rules = match &paths.stemmer_rules {
        Some(p) => StemmerRules::parse_tsv(&ws.loaded.read_input(p)?)
            .map_err(|e| crate::invalid(format!("{}: {e}", p.display())))?,
        None => StemmerRules::bangla_default(),
    };
    Ok(PipelineConfig {
        stoplist,
        rules,
        multi_pass_stemming: ws.config().preprocess.multi_pass_stemming,
        keep_trace: false,
    })
}

pub fn tokenize_corpus(ws: &Workspace, corpus: &Corpus) -> Result<Vec<TokenizedDoc>> {
    Ok(pipeline_all(corpus, &pipeline_config(ws)?))
}
