//! Vector-based metrics over externally trained embeddings.
//!
//! Word-vector metrics (ULM1, ULM3, ULM4, ULM6) average the angular
//! similarity of common adjectives and add the Jaccard coefficient of the two
//! domains' adjective sets. Sentence-vector metrics (ULM2, ULM5, ULM7) take
//! the angular similarity of the two domains' mean review vectors. Which
//! trainer produced the vectors only changes the file fed in.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::lexstats::{filter_reviews, SentimentLexicon, DEFAULT_MAX_REVIEW_LEN, DEFAULT_SCORE_THRESHOLD};
use crate::metric::{MetricId, MetricResult, VectorKind};
use crate::par::Exec;

pub const DEFAULT_TEST_VECTORS: usize = 500;

/// Mean vectors with a norm below this are treated as zero.
const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    pub domain_id: String,
    pub dims: usize,
    pub entries: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVectorSet {
    pub domain_id: String,
    pub dims: usize,
    pub vectors: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjectiveLexicon {
    words: BTreeSet<String>,
}

impl AdjectiveLexicon {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty() && !w.starts_with('#'))
            .collect();
        if words.is_empty() {
            return Err(Error::Empty("adjective lexicon".into()));
        }
        Ok(Self { words })
    }

    /// One adjective per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(text.lines())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn parse_floats(fields: &[&str], ctx: &str, line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(ctx, line, format!("not a finite number: {f:?}")))
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dimensionality plus `(line, key, vector)` rows.
type VectorRows = (usize, Vec<(usize, String, Vec<f64>)>);

/// Reads `<key> f1 .. fd` lines, checking that every row has the same width.
/// When `allow_header` is set, a first line of two integers is taken as a
/// `<count> <dims>` header.
fn read_vector_lines(path: &Path, allow_header: bool) -> Result<VectorRows> {
    let ctx = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dims: Option<usize> = None;
    let mut declared_count: Option<usize> = None;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if allow_header && rows.is_empty() && dims.is_none() && fields.len() == 2 {
            if let (Ok(count), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if d == 0 {
                    return Err(Error::parse(&ctx, line_no, "header declares zero dimensions"));
                }
                dims = Some(d);
                declared_count = Some(count);
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(Error::parse(&ctx, line_no, "expected a key followed by at least one value"));
        }
        let values = parse_floats(&fields[1..], &ctx, line_no)?;
        match dims {
            None => dims = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::parse(&ctx, line_no, format!("expected {d} values, found {}", values.len())))
            }
            Some(_) => {}
        }
        rows.push((line_no, fields[0].to_string(), values));
    }
    if rows.is_empty() {
        return Err(Error::Empty(ctx));
    }
    if let Some(n) = declared_count {
        if n != rows.len() {
            log::warn!("{ctx}: header declares {n} entries, found {}", rows.len());
        }
    }
    Ok((dims.unwrap_or(0), rows))
}

/// Plain-text word vectors (word2vec / GloVe / fastText text output).
pub fn load_word_vectors(path: impl AsRef<Path>, domain_id: &str) -> Result<WordVectorTable> {
    let path = path.as_ref();
    let ctx = path.display().to_string();
    let (dims, rows) = read_vector_lines(path, true)?;
    let mut entries = BTreeMap::new();
    for (line, word, v) in rows {
        if norm(&v) == 0.0 {
            return Err(Error::parse(&ctx, line, format!("zero vector for {word:?}")));
        }
        if entries.insert(word.to_lowercase(), v).is_some() {
            return Err(Error::parse(&ctx, line, format!("duplicate entry {word:?}")));
        }
    }
    Ok(WordVectorTable { domain_id: domain_id.to_string(), dims, entries })
}

/// Review vectors keyed `<domain>:<index>`.
pub fn load_sentence_vectors(path: impl AsRef<Path>, domain_id: &str) -> Result<SentenceVectorSet> {
    let path = path.as_ref();
    let (dims, rows) = read_vector_lines(path, false)?;
    Ok(SentenceVectorSet {
        domain_id: domain_id.to_string(),
        dims,
        vectors: rows.into_iter().map(|(_, k, v)| (k, v)).collect(),
    })
}

/// `1 − arccos(cos θ)/π`, in `[0, 1]`.
pub fn angular_similarity(v1: &[f64], v2: &[f64]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::Invalid(format!("dimension mismatch: {} vs {}", v1.len(), v2.len())));
    }
    let (n1, n2) = (norm(v1), norm(v2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::Invalid("angular similarity of a zero vector".into()));
    }
    // arccos loses precision near ±1; the half-angle form does not
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in v1.iter().zip(v2) {
        let (u, v) = (a / n1, b / n2);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    let theta = 2.0 * diff.sqrt().atan2(sum.sqrt());
    Ok((1.0 - theta / std::f64::consts::PI).clamp(0.0, 1.0))
}

/// Mean angular similarity over common adjectives plus the Jaccard
/// coefficient of the two adjective vocabularies.
pub fn word_metric(tab_s: &WordVectorTable, tab_t: &WordVectorTable, adjectives: &AdjectiveLexicon) -> Result<f64> {
    let adj_s: BTreeSet<&str> = tab_s.entries.keys().map(String::as_str).filter(|w| adjectives.contains(w)).collect();
    let adj_t: BTreeSet<&str> = tab_t.entries.keys().map(String::as_str).filter(|w| adjectives.contains(w)).collect();
    let common: Vec<&str> = adj_s.intersection(&adj_t).copied().collect();
    if common.is_empty() {
        return Err(Error::Unrankable {
            metric: "word-vector".into(),
            source_domain: tab_s.domain_id.clone(),
            target: tab_t.domain_id.clone(),
            reason: "no common adjectives".into(),
        });
    }
    let mut sum = 0.0;
    for w in &common {
        sum += angular_similarity(&tab_s.entries[*w], &tab_t.entries[*w])?;
    }
    let union = adj_s.len() + adj_t.len() - common.len();
    Ok(sum / common.len() as f64 + common.len() as f64 / union as f64)
}

fn mean_vector(set: &SentenceVectorSet) -> Result<Vec<f64>> {
    if set.vectors.is_empty() {
        return Err(Error::Invalid(format!("{}: empty sentence-vector set", set.domain_id)));
    }
    let mut acc = vec![0.0; set.dims];
    for (key, v) in &set.vectors {
        if v.len() != set.dims {
            return Err(Error::Invalid(format!("{key}: expected {} dims, found {}", set.dims, v.len())));
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = set.vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Angular similarity of the two sets' mean vectors.
pub fn sentence_metric(set_s: &SentenceVectorSet, set_t: &SentenceVectorSet) -> Result<f64> {
    if set_s.dims != set_t.dims {
        return Err(Error::Invalid(format!("dimension mismatch: {} vs {}", set_s.dims, set_t.dims)));
    }
    let (m1, m2) = (mean_vector(set_s)?, mean_vector(set_t)?);
    if norm(&m1) < ZERO_NORM || norm(&m2) < ZERO_NORM {
        return Err(Error::Unrankable {
            metric: "sentence-vector".into(),
            source_domain: set_s.domain_id.clone(),
            target: set_t.domain_id.clone(),
            reason: "mean vector is numerically zero".into(),
        });
    }
    angular_similarity(&m1, &m2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// The last `count` qualifying reviews in corpus order.
    HeldOut,
    /// The `count` qualifying reviews with the largest `|score|`.
    TopScore,
}

impl Selection {
    pub fn for_kind(kind: VectorKind) -> Option<Self> {
        match kind {
            VectorKind::SentenceHeldOut => Some(Selection::HeldOut),
            VectorKind::SentenceTopScore => Some(Selection::TopScore),
            VectorKind::Word => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectedVectors {
    pub set: SentenceVectorSet,
    /// Set when fewer than the requested number of reviews qualified.
    pub shortfall: Option<usize>,
}

/// Picks the review vectors used by the sentence metrics: reviews must pass
/// the lexicon filter (|score| > 0.01, at most 100 tokens) before selection.
pub fn select_test_vectors(
    corpus: &Corpus,
    lexicon: &SentimentLexicon,
    vecs: &SentenceVectorSet,
    count: usize,
    mode: Selection,
) -> Result<SelectedVectors> {
    let by_key: HashMap<&str, &Vec<f64>> = vecs.vectors.iter().map(|(k, v)| (k.as_str(), v)).collect();
    let mut qualifying = filter_reviews(corpus, lexicon, DEFAULT_SCORE_THRESHOLD, DEFAULT_MAX_REVIEW_LEN);
    let picked: Vec<_> = match mode {
        Selection::HeldOut => {
            let skip = qualifying.len().saturating_sub(count);
            qualifying.split_off(skip)
        }
        Selection::TopScore => {
            // stable: equal |score| keeps corpus order
            qualifying.sort_by(|a, b| b.score.abs().total_cmp(&a.score.abs()));
            qualifying.truncate(count);
            qualifying
        }
    };
    let shortfall = (picked.len() < count).then(|| {
        log::warn!("{}: only {} review(s) qualify for test vectors, wanted {count}", corpus.domain_id, picked.len());
        picked.len()
    });
    let mut vectors = Vec::with_capacity(picked.len());
    for s in picked {
        let key = s.review.key();
        let v =
            by_key.get(key.as_str()).ok_or_else(|| Error::Invalid(format!("no sentence vector for review {key}")))?;
        vectors.push((key, (*v).clone()));
    }
    Ok(SelectedVectors {
        set: SentenceVectorSet { domain_id: corpus.domain_id.clone(), dims: vecs.dims, vectors },
        shortfall,
    })
}

fn unrankable_as_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Unrankable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// All ordered pairs of a word-vector metric.
pub fn word_metric_matrix(
    metric: MetricId,
    tables: &[WordVectorTable],
    adjectives: &AdjectiveLexicon,
    exec: Exec,
) -> Result<Vec<MetricResult>> {
    if metric.vector_kind() != Some(VectorKind::Word) {
        return Err(Error::Invalid(format!("{metric} is not a word-vector metric")));
    }
    crate::metric::pairwise(
        metric,
        tables.len(),
        exec,
        |i, j| unrankable_as_none(word_metric(&tables[i], &tables[j], adjectives)),
        |i| tables[i].domain_id.clone(),
    )
}

/// All ordered pairs of a sentence-vector metric over already selected sets.
pub fn sentence_metric_matrix(metric: MetricId, sets: &[SentenceVectorSet], exec: Exec) -> Result<Vec<MetricResult>> {
    if !matches!(metric.vector_kind(), Some(VectorKind::SentenceHeldOut | VectorKind::SentenceTopScore)) {
        return Err(Error::Invalid(format!("{metric} is not a sentence-vector metric")));
    }
    crate::metric::pairwise(
        metric,
        sets.len(),
        exec,
        |i, j| unrankable_as_none(sentence_metric(&sets[i], &sets[j])),
        |i| sets[i].domain_id.clone(),
    )
}
