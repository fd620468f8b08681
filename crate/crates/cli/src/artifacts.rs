use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crisis_lens_core::corpus::{self, Corpus};

use crate::config::{hex, Loaded, RunConfig};
use crate::invalid;

pub const MANIFEST: &str = "manifest.json";

/// The output directory plus the configuration every command reads.
pub struct Workspace {
    pub loaded: Loaded,
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    config_hash: String,
    seed: u64,
    artifacts: BTreeMap<String, String>,
}

impl Workspace {
    pub fn new(loaded: Loaded, out_flag: Option<PathBuf>) -> Result<Workspace> {
        let out = match (out_flag, &loaded.config.paths.out) {
            (Some(p), _) => p,
            (None, Some(p)) => loaded.resolve(p),
            (None, None) => PathBuf::from("out"),
        };
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Workspace { loaded, out })
    }

    pub fn config(&self) -> &RunConfig {
        &self.loaded.config
    }

    pub fn seed(&self) -> u64 {
        self.loaded.seed
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Path of an artifact from an earlier stage, or a validation error naming that stage.
    pub fn require(&self, rel: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if !p.exists() {
            return Err(invalid(format!(
                "{} not found; run `crisis-lens {producer}` first",
                p.display()
            )));
        }
        Ok(p)
    }

    fn create(&self, rel: &str) -> Result<BufWriter<File>> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(BufWriter::new(f))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<()> {
        let mut w = self.create(rel)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        log::info!("wrote {rel}");
        Ok(())
    }

    pub fn write_text(&self, rel: &str, text: &str) -> Result<()> {
        let mut w = self.create(rel)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        log::info!("wrote {rel}");
        Ok(())
    }

    pub fn write_lines<T: Serialize>(&self, rel: &str, items: &[T]) -> Result<()> {
        let mut w = self.create(rel)?;
        for item in items {
            serde_json::to_writer(&mut w, item)?;
            writeln!(w)?;
        }
        w.flush()?;
        log::info!("wrote {rel}");
        Ok(())
    }

    pub fn write_corpus(&self, rel: &str, c: &Corpus) -> Result<()> {
        let mut w = self.create(rel)?;
        corpus::write_jsonl(c, &mut w)?;
        w.flush()?;
        log::info!("wrote {rel} ({} records)", c.len());
        Ok(())
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str, producer: &str) -> Result<T> {
        let p = self.require(rel, producer)?;
        let f = File::open(&p)?;
        serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", p.display()))
    }

    pub fn read_lines<T: DeserializeOwned>(&self, rel: &str, producer: &str) -> Result<Vec<T>> {
        let p = self.require(rel, producer)?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(File::open(&p)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).with_context(|| format!("{}: line {}", p.display(), i + 1))?);
        }
        Ok(out)
    }

    pub fn read_corpus(&self, rel: &str, producer: &str) -> Result<Corpus> {
        let p = self.require(rel, producer)?;
        let outcome = corpus::read_jsonl(BufReader::new(File::open(&p)?))?;
        if let Some(r) = outcome.rejects.first() {
            anyhow::bail!("{}: line {}: {}", p.display(), r.line_number, r.reason);
        }
        Ok(outcome.corpus)
    }

    /// Rewrites manifest.json with the SHA-256 of every artifact under the output directory.
    pub fn write_manifest(&self) -> Result<()> {
        let mut artifacts = BTreeMap::new();
        collect_hashes(&self.out, &self.out, &mut artifacts)?;
        artifacts.remove(MANIFEST);
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config_hash: self.loaded.hash(),
            seed: self.seed(),
            artifacts,
        };
        self.write_json(MANIFEST, &m)
    }
}

fn collect_hashes(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_hashes(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root)?.to_string_lossy().replace('\\', "/");
            let bytes = std::fs::read(&path)?;
            out.insert(rel, hex(&Sha256::digest(&bytes)));
        }
    }
    Ok(())
}
