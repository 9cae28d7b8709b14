//! Run configuration: a TOML file merged with command-line flags.
//!
//! ```toml
//! seed = 42
//! out = "runs/demo"
//! metrics = ["LM1", "LM2", "ULM1"]
//! k = [3, 5, 7, 10]
//! stopwords = "stopwords.txt"
//! adjectives = "adjectives.txt"
//! sentiment_lexicon = "SentiWordNet_3.0.0.txt"
//! accuracy = "accuracy_matrix.csv"   # or "table1" / "generate"
//! test_vectors = 500
//!
//! [domains]
//! D1 = "corpora/D1.jsonl"
//! D2 = "corpora/D2.jsonl"
//!
//! [vectors]
//! ULM1 = "vectors/word"
//! ULM2 = "vectors/sentence"
//! ```
//!
//! Relative paths in the file resolve against the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cdsa_core::MetricId;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub metrics: Option<Vec<String>>,
    pub k: Option<Vec<usize>>,
    pub stopwords: Option<PathBuf>,
    pub adjectives: Option<PathBuf>,
    pub sentiment_lexicon: Option<PathBuf>,
    pub accuracy: Option<String>,
    pub metrics_dir: Option<PathBuf>,
    pub test_vectors: Option<usize>,
    #[serde(default)]
    pub domains: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub vectors: BTreeMap<String, PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in
            [&mut cfg.out, &mut cfg.stopwords, &mut cfg.adjectives, &mut cfg.sentiment_lexicon, &mut cfg.metrics_dir]
                .into_iter()
                .flatten()
        {
            fix(p);
        }
        cfg.domains.values_mut().for_each(fix);
        cfg.vectors.values_mut().for_each(fix);
        if let Some(a) = &cfg.accuracy {
            if !matches!(a.as_str(), "table1" | "generate") && Path::new(a).is_relative() {
                cfg.accuracy = Some(base.join(a).display().to_string());
            }
        }
        Ok(cfg)
    }
}

/// Where the accuracy matrix comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum AccuracySource {
    /// The bundled 20-domain fixture.
    Table1,
    /// Train the bag-of-words baseline on the configured domains.
    Generate,
    File(PathBuf),
}

impl AccuracySource {
    pub fn parse(s: &str) -> Self {
        match s {
            "table1" => AccuracySource::Table1,
            "generate" => AccuracySource::Generate,
            p => AccuracySource::File(PathBuf::from(p)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// In domain order: the order used to break ranking ties.
    pub domains: Vec<(String, PathBuf)>,
    pub stopwords: Option<PathBuf>,
    pub adjectives: Option<PathBuf>,
    pub sentiment_lexicon: Option<PathBuf>,
    pub vectors: BTreeMap<MetricId, PathBuf>,
    pub accuracy: Option<AccuracySource>,
    pub metrics: Vec<MetricId>,
    pub metrics_dir: Option<PathBuf>,
    pub k: Vec<usize>,
    pub out: PathBuf,
    pub seed: u64,
    pub test_vectors: usize,
}

/// Flag values; `None` / empty means "not given".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub domains: Vec<String>,
    pub metrics: Option<String>,
    pub k: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub stopwords: Option<PathBuf>,
    pub adjectives: Option<PathBuf>,
    pub sentiment_lexicon: Option<PathBuf>,
    pub vectors: Vec<String>,
    pub accuracy: Option<String>,
    pub metrics_dir: Option<PathBuf>,
    pub test_vectors: Option<usize>,
}

/// Sort key that puts `D2` before `D10`.
fn natural_key(s: &str) -> (String, u64, String) {
    let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (head, tail) = s.split_at(s.len() - digits);
    (head.to_string(), tail.parse().unwrap_or(0), s.to_string())
}

fn corpus_files_in(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading domain directory {}", dir.display()))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("jsonl" | "csv")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    if out.is_empty() {
        bail!("no .jsonl or .csv corpus files in {}", dir.display());
    }
    Ok(out)
}

fn parse_assignment(s: &str, what: &str) -> Result<(String, PathBuf)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
            Ok((k.trim().to_string(), PathBuf::from(v.trim())))
        }
        _ => bail!("{what} must look like NAME=PATH, got {s:?}"),
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} {x:?}: {e}")))
        .collect()
}

fn parse_metrics(names: &[String]) -> Result<Vec<MetricId>> {
    let mut out: Vec<MetricId> = Vec::new();
    for n in names {
        if n.eq_ignore_ascii_case("all") {
            out.extend(MetricId::ALL);
            continue;
        }
        out.push(n.parse()?);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

impl RunConfig {
    /// Merges `file` (if any) with `flags`; flags win.
    pub fn resolve(file: Option<&Path>, flags: Overrides) -> Result<Self> {
        let fc = match file {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };

        let mut domains: Vec<(String, PathBuf)> = if flags.domains.is_empty() {
            fc.domains.into_iter().collect()
        } else if flags.domains.len() == 1 && !flags.domains[0].contains('=') {
            corpus_files_in(Path::new(&flags.domains[0]))?
        } else {
            flags.domains.iter().map(|d| parse_assignment(d, "--domains entry")).collect::<Result<_>>()?
        };
        domains.sort_by_key(|(id, _)| natural_key(id));
        if let Some(w) = domains.windows(2).find(|w| w[0].0 == w[1].0) {
            bail!("domain {} listed twice", w[0].0);
        }

        let metrics = match flags.metrics {
            Some(m) => parse_metrics(&parse_list::<String>(&m, "metric")?)?,
            None => parse_metrics(&fc.metrics.unwrap_or_default())?,
        };

        let k = match flags.k {
            Some(k) => parse_list::<usize>(&k, "K")?,
            None => fc.k.unwrap_or_else(|| cdsa_core::evaluation::DEFAULT_KS.to_vec()),
        };

        let mut vectors = BTreeMap::new();
        for (name, dir) in fc.vectors {
            vectors.insert(name.parse::<MetricId>()?, dir);
        }
        for v in &flags.vectors {
            let (name, dir) = parse_assignment(v, "--vectors entry")?;
            vectors.insert(name.parse::<MetricId>()?, dir);
        }
        if let Some(m) = vectors.keys().find(|m| m.vector_kind().is_none()) {
            bail!("{m} does not take vectors");
        }

        Ok(Self {
            domains,
            stopwords: flags.stopwords.or(fc.stopwords),
            adjectives: flags.adjectives.or(fc.adjectives),
            sentiment_lexicon: flags.sentiment_lexicon.or(fc.sentiment_lexicon),
            vectors,
            accuracy: flags.accuracy.or(fc.accuracy).map(|a| AccuracySource::parse(&a)),
            metrics,
            metrics_dir: flags.metrics_dir.or(fc.metrics_dir),
            k,
            out: flags.out.or(fc.out).unwrap_or_else(|| PathBuf::from("out")),
            seed: flags.seed.or(fc.seed).unwrap_or(42),
            test_vectors: flags.test_vectors.or(fc.test_vectors).unwrap_or(cdsa_core::embedding::DEFAULT_TEST_VECTORS),
        })
    }

    pub fn metrics_dir(&self) -> PathBuf {
        self.metrics_dir.clone().unwrap_or_else(|| self.out.join("metrics"))
    }
}
