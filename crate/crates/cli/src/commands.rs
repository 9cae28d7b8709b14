use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cdsa_core::baseline::{train_eval_baseline, AccuracyMatrix, BaselineConfig};
use cdsa_core::corpus::{load_corpus, Corpus, Format, NgramOverlapMatrix, Normalizer, DEFAULT_OVERLAP_ORDERS};
use cdsa_core::embedding::{
    load_sentence_vectors, load_word_vectors, select_test_vectors, sentence_metric_matrix, word_metric_matrix,
    AdjectiveLexicon, Selection,
};
use cdsa_core::evaluation::{recommendation_report, RecommendationReport};
use cdsa_core::labelled::{build_profiles, labelled_matrix, LabelledConfig};
use cdsa_core::lexstats::SentimentLexicon;
use cdsa_core::metric::{read_results_csv, write_results_csv, VectorKind};
use cdsa_core::par::Exec;
use cdsa_core::{MetricId, MetricResult};

use crate::config::{AccuracySource, RunConfig};

/// Minority-class share below which a domain is flagged as unbalanced.
pub const BALANCE_FLAG: f64 = 0.45;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> cdsa_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn normalizer(cfg: &RunConfig) -> Result<Normalizer> {
    Ok(match &cfg.stopwords {
        Some(p) => Normalizer::from_file(p)?,
        None => Normalizer::default(),
    })
}

pub fn load_domains(cfg: &RunConfig, exec: Exec) -> Result<Vec<Corpus>> {
    if cfg.domains.is_empty() {
        bail!("no domains configured; pass --domains ID=PATH ... or a directory");
    }
    let norm = normalizer(cfg)?;
    let loaded = exec.map(&cfg.domains, |(id, path)| -> Result<Corpus> {
        let corpus = Format::from_path(path)
            .and_then(|f| load_corpus(path, f, &norm))
            .with_context(|| format!("domain {id}"))?;
        if corpus.domain_id != *id {
            bail!("domain {id}: {} declares domain {:?}", path.display(), corpus.domain_id);
        }
        Ok(corpus)
    });
    loaded.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub domain: String,
    pub reviews: usize,
    pub positive: usize,
    pub negative: usize,
    pub dropped: usize,
    pub tokens: u64,
    pub vocabulary: usize,
    pub balanced: bool,
}

pub fn cmd_ingest(cfg: &RunConfig, exec: Exec) -> Result<Vec<SummaryRow>> {
    let corpora = load_domains(cfg, exec)?;
    let rows: Vec<SummaryRow> = corpora
        .iter()
        .map(|c| {
            let (positive, negative) = c.label_counts();
            let balanced = positive.min(negative) as f64 >= BALANCE_FLAG * c.len() as f64;
            if !balanced {
                log::warn!("{}: unbalanced labels ({positive} positive, {negative} negative)", c.domain_id);
            }
            SummaryRow {
                domain: c.domain_id.clone(),
                reviews: c.len(),
                positive,
                negative,
                dropped: c.dropped.len(),
                tokens: c.token_count(),
                vocabulary: c.word_counts().len(),
                balanced,
            }
        })
        .collect();
    let mut s = String::from("domain,reviews,positive,negative,dropped,tokens,mean_tokens,vocabulary,balance\n");
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.2},{},{}",
            r.domain,
            r.reviews,
            r.positive,
            r.negative,
            r.dropped,
            r.tokens,
            r.tokens as f64 / r.reviews as f64,
            r.vocabulary,
            if r.balanced { "ok" } else { "unbalanced" }
        );
    }
    write_file(&cfg.out.join("summary.csv"), s.as_bytes())?;
    Ok(rows)
}

fn vector_file(dir: &Path, domain: &str) -> PathBuf {
    dir.join(format!("{domain}.txt"))
}

/// Checks every selected metric's inputs before any corpus is read.
pub fn preflight(cfg: &RunConfig) -> Result<()> {
    if cfg.metrics.is_empty() {
        bail!("no metrics selected; pass --metrics LM1,LM2,... or 'all'");
    }
    if cfg.domains.len() < 2 {
        bail!("pairwise metrics need at least 2 domains, got {}", cfg.domains.len());
    }
    for m in &cfg.metrics {
        let Some(kind) = m.vector_kind() else { continue };
        let dir = cfg.vectors.get(m).with_context(|| format!("{m} needs vectors: pass --vectors {m}=DIR"))?;
        for (id, _) in &cfg.domains {
            let f = vector_file(dir, id);
            if !f.is_file() {
                bail!("{m}: missing vector file {} for domain {id}", f.display());
            }
        }
        match kind {
            VectorKind::Word if cfg.adjectives.is_none() => bail!("{m} needs --adjectives"),
            VectorKind::SentenceHeldOut | VectorKind::SentenceTopScore if cfg.sentiment_lexicon.is_none() => {
                bail!("{m} needs --sentiment-lexicon")
            }
            _ => {}
        }
    }
    Ok(())
}

/// Values for one metric over all ordered pairs.
pub fn compute_metric(
    metric: MetricId,
    cfg: &RunConfig,
    corpora: &[Corpus],
    profiles: Option<&[cdsa_core::labelled::DomainProfile<'_>]>,
    lcfg: &LabelledConfig,
    exec: Exec,
) -> Result<Vec<MetricResult>> {
    match metric.vector_kind() {
        None if metric == MetricId::Ngram => {
            let m = NgramOverlapMatrix::compute(corpora, 10, &DEFAULT_OVERLAP_ORDERS, exec)?;
            let mut out = Vec::new();
            for (i, s) in m.domains.iter().enumerate() {
                for (j, t) in m.domains.iter().enumerate().filter(|(j, _)| *j != i) {
                    out.push(MetricResult {
                        metric,
                        source: s.clone(),
                        target: t.clone(),
                        value: Some(m.values[i][j]),
                    });
                }
            }
            Ok(out)
        }
        None => {
            let profiles = profiles.context("labelled profiles not built")?;
            Ok(labelled_matrix(metric, profiles, lcfg, exec)?)
        }
        Some(VectorKind::Word) => {
            let dir = &cfg.vectors[&metric];
            let adjectives = AdjectiveLexicon::load(cfg.adjectives.as_ref().context("no adjectives")?)?;
            let tables = corpora
                .iter()
                .map(|c| load_word_vectors(vector_file(dir, &c.domain_id), &c.domain_id))
                .collect::<cdsa_core::Result<Vec<_>>>()?;
            Ok(word_metric_matrix(metric, &tables, &adjectives, exec)?)
        }
        Some(kind) => {
            let dir = &cfg.vectors[&metric];
            let lexicon = SentimentLexicon::load(cfg.sentiment_lexicon.as_ref().context("no sentiment lexicon")?)?;
            let mode = Selection::for_kind(kind).context("not a sentence metric")?;
            let mut sets = Vec::with_capacity(corpora.len());
            for c in corpora {
                let all = load_sentence_vectors(vector_file(dir, &c.domain_id), &c.domain_id)?;
                sets.push(select_test_vectors(c, &lexicon, &all, cfg.test_vectors, mode)?.set);
            }
            Ok(sentence_metric_matrix(metric, &sets, exec)?)
        }
    }
}

/// Writes `metrics/<ID>.csv` per selected metric. Returns the files written.
pub fn cmd_metrics(cfg: &RunConfig, exec: Exec) -> Result<Vec<PathBuf>> {
    preflight(cfg)?;
    let corpora = load_domains(cfg, exec)?;
    let lcfg = LabelledConfig::default();
    let needs_profiles = cfg.metrics.iter().any(|m| MetricId::LABELLED.contains(m));
    let profiles = if needs_profiles { Some(build_profiles(&corpora, &lcfg, exec)?) } else { None };
    let dir = cfg.metrics_dir();
    let mut written = Vec::new();
    for &metric in &cfg.metrics {
        log::info!("computing {metric}");
        let results = compute_metric(metric, cfg, &corpora, profiles.as_deref(), &lcfg, exec)?;
        let path = dir.join(format!("{metric}.csv"));
        write_file(&path, &csv_bytes(|b| write_results_csv(&results, b))?)?;
        written.push(path);
        if metric == MetricId::Ngram {
            let m = NgramOverlapMatrix::compute(&corpora, 10, &DEFAULT_OVERLAP_ORDERS, exec)?;
            let path = dir.join("ngram_overlap.csv");
            write_file(&path, &csv_bytes(|b| m.write_csv(b))?)?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn load_accuracy(cfg: &RunConfig, default: Option<AccuracySource>, exec: Exec) -> Result<AccuracyMatrix> {
    match cfg.accuracy.clone().or(default) {
        Some(AccuracySource::Table1) => Ok(AccuracyMatrix::table1()),
        Some(AccuracySource::File(p)) => {
            Ok(AccuracyMatrix::load(&p).with_context(|| format!("accuracy matrix {}", p.display()))?)
        }
        Some(AccuracySource::Generate) => Ok(run_baseline(cfg, exec)?.0),
        None => bail!("no accuracy matrix; pass --accuracy PATH, 'table1' or 'generate'"),
    }
}

pub fn cmd_evaluate(cfg: &RunConfig, exec: Exec) -> Result<RecommendationReport> {
    let matrix = load_accuracy(cfg, None, exec)?;
    let dir = cfg.metrics_dir();
    let mut metrics = BTreeMap::new();
    for &m in &cfg.metrics {
        let path = dir.join(format!("{m}.csv"));
        let file = std::fs::File::open(&path).with_context(|| format!("{m}: opening {}", path.display()))?;
        let results = read_results_csv(file).with_context(|| format!("{m}: reading {}", path.display()))?;
        if let Some(r) = results.iter().find(|r| r.metric != m) {
            bail!("{}: contains {} rows, expected only {m}", path.display(), r.metric);
        }
        metrics.insert(m, results);
    }
    if metrics.is_empty() {
        log::info!("no metrics selected; writing the chart only");
    }
    let report = recommendation_report(&matrix, &metrics, &cfg.k, exec)?;
    write_file(&cfg.out.join("chart.csv"), &csv_bytes(|b| report.write_chart_csv(b))?)?;
    if !report.evals.is_empty() {
        write_file(&cfg.out.join("eval.csv"), &csv_bytes(|b| report.write_eval_csv(b))?)?;
        write_file(&cfg.out.join("eval_per_target.csv"), &csv_bytes(|b| report.write_per_target_csv(b))?)?;
    }
    write_file(&cfg.out.join("report.md"), report.markdown().as_bytes())?;
    Ok(report)
}

/// Writes `chart.csv` and `chart.md`; returns the Markdown table.
pub fn cmd_chart(cfg: &RunConfig, exec: Exec) -> Result<String> {
    let matrix = load_accuracy(cfg, Some(AccuracySource::Table1), exec)?;
    let report = recommendation_report(&matrix, &BTreeMap::new(), &[], exec)?;
    let md = report.chart_markdown();
    write_file(&cfg.out.join("chart.csv"), &csv_bytes(|b| report.write_chart_csv(b))?)?;
    write_file(&cfg.out.join("chart.md"), md.as_bytes())?;
    Ok(md)
}

fn run_baseline(cfg: &RunConfig, exec: Exec) -> Result<(AccuracyMatrix, Vec<String>)> {
    let corpora = load_domains(cfg, exec)?;
    let bcfg = BaselineConfig { seed: cfg.seed, ..BaselineConfig::default() };
    let run = train_eval_baseline(&corpora, &bcfg, exec)?;
    Ok((run.matrix, run.notes))
}

pub fn cmd_baseline(cfg: &RunConfig, exec: Exec) -> Result<AccuracyMatrix> {
    let (matrix, _) = run_baseline(cfg, exec)?;
    write_file(&cfg.out.join("accuracy_matrix.csv"), &csv_bytes(|b| matrix.write_csv(b))?)?;
    Ok(matrix)
}

/// Writes a synthetic demo workspace plus a `run.toml` pointing at it.
pub fn cmd_synth(dir: &Path, domains: usize, reviews: usize, seed: u64) -> Result<PathBuf> {
    use cdsa_core::synthetic::{write_suite, SyntheticConfig, SyntheticSuite};
    let suite = SyntheticSuite::generate(SyntheticConfig { domains, reviews, seed, ..SyntheticConfig::default() })?;
    write_suite(&suite, dir)?;
    let mut toml = format!(
        "seed = {seed}\nout = \"out\"\nadjectives = \"adjectives.txt\"\nsentiment_lexicon = \"sentiment.tsv\"\naccuracy = \"generate\"\n\n[domains]\n"
    );
    for d in &suite.domains {
        let _ = writeln!(toml, "{} = \"corpora/{}.jsonl\"", d.id, d.id);
    }
    toml.push_str("\n[vectors]\n");
    for m in MetricId::ALL {
        match m.vector_kind() {
            Some(VectorKind::Word) => {
                let _ = writeln!(toml, "{m} = \"vectors/word\"");
            }
            Some(_) => {
                let _ = writeln!(toml, "{m} = \"vectors/sentence\"");
            }
            None => {}
        }
    }
    let path = dir.join("run.toml");
    write_file(&path, toml.as_bytes())?;
    Ok(path)
}
