//! Word-level sentiment statistics for a single domain.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::corpus::{Corpus, Review};
use crate::error::{Error, Result};

/// Lower clamp applied to probabilities before any logarithm.
pub const SMOOTHING_LAMBDA: f64 = 1e-6;

pub const DEFAULT_POLAR_THRESHOLD: f64 = 0.5;
pub const DEFAULT_SIGNIFICANT_MIN_COUNT: u64 = 10;
pub const DEFAULT_SIGNIFICANT_MIN_CHI2: f64 = 1.0;
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.01;
pub const DEFAULT_MAX_REVIEW_LEN: usize = 100;

/// Clamps a probability to `[λ, 1 − λ]`.
pub fn smooth(p: f64) -> f64 {
    p.clamp(SMOOTHING_LAMBDA, 1.0 - SMOOTHING_LAMBDA)
}

/// How per-word `(P, N)` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbabilityMode {
    /// Share of the word's occurrences that fall in positive / negative
    /// reviews.
    #[default]
    Occurrence,
    /// Class-conditional document frequencies `df_pos / #pos` and
    /// `df_neg / #neg`, renormalised to sum to one.
    DocumentFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarity {
    pub p: f64,
    pub n: f64,
}

impl Polarity {
    pub fn from_counts(pos: u64, neg: u64) -> Option<Self> {
        let total = pos + neg;
        (total > 0).then(|| Polarity { p: pos as f64 / total as f64, n: neg as f64 / total as f64 })
    }

    pub fn spread(&self) -> f64 {
        (self.p - self.n).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarityTable {
    pub domain_id: String,
    pub entries: BTreeMap<String, Polarity>,
}

impl PolarityTable {
    pub fn get(&self, word: &str) -> Option<Polarity> {
        self.entries.get(word).copied()
    }
}

pub fn polarity_table(corpus: &Corpus, min_count: u64) -> PolarityTable {
    polarity_table_with(corpus, min_count, ProbabilityMode::Occurrence)
}

pub fn polarity_table_with(corpus: &Corpus, min_count: u64, mode: ProbabilityMode) -> PolarityTable {
    let (n_pos, n_neg) = corpus.label_counts();
    let entries = corpus
        .word_counts()
        .iter()
        .filter(|(_, c)| c.total() >= min_count.max(1))
        .filter_map(|(w, c)| {
            let pol = match mode {
                ProbabilityMode::Occurrence => Polarity::from_counts(c.pos, c.neg)?,
                ProbabilityMode::DocumentFrequency => {
                    let fp = if n_pos == 0 { 0.0 } else { c.pos_docs as f64 / n_pos as f64 };
                    let fn_ = if n_neg == 0 { 0.0 } else { c.neg_docs as f64 / n_neg as f64 };
                    let z = fp + fn_;
                    if z == 0.0 {
                        return None;
                    }
                    Polarity { p: fp / z, n: fn_ / z }
                }
            };
            Some((w.clone(), pol))
        })
        .collect();
    PolarityTable { domain_id: corpus.domain_id.clone(), entries }
}

/// Words with `|P − N| ≥ threshold`.
pub fn polar_words(table: &PolarityTable, threshold: f64) -> BTreeSet<String> {
    table.entries.iter().filter(|(_, pol)| pol.spread() >= threshold).map(|(w, _)| w.clone()).collect()
}

/// Chi-square statistic of a word's positive/negative counts against an even
/// split.
pub fn chi_square(c_p: u64, c_n: u64) -> Result<f64> {
    if c_p + c_n == 0 {
        return Err(Error::Invalid("chi_square of a word with zero occurrences".into()));
    }
    let mu = (c_p + c_n) as f64 / 2.0;
    let dp = c_p as f64 - mu;
    let dn = c_n as f64 - mu;
    Ok((dp * dp + dn * dn) / mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificantWordSet {
    pub domain_id: String,
    pub words: BTreeSet<String>,
}

/// Words occurring at least `min_count` times with `χ² ≥ min_chi2`.
pub fn significant_words(corpus: &Corpus, min_count: u64, min_chi2: f64) -> SignificantWordSet {
    let words = corpus
        .word_counts()
        .iter()
        .filter(|(_, c)| c.total() >= min_count.max(1))
        .filter(|(_, c)| chi_square(c.pos, c.neg).map(|x| x >= min_chi2).unwrap_or(false))
        .map(|(w, _)| w.clone())
        .collect();
    SignificantWordSet { domain_id: corpus.domain_id.clone(), words }
}

/// Per-word positive and negative scores, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    entries: HashMap<String, (f64, f64)>,
}

impl SentimentLexicon {
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64, f64)>,
        S: Into<String>,
    {
        let mut map = HashMap::new();
        for (w, pos, neg) in entries {
            let w: String = w.into();
            if !(0.0..=1.0).contains(&pos) || !(0.0..=1.0).contains(&neg) {
                return Err(Error::Invalid(format!("lexicon scores for {w:?} outside [0, 1]")));
            }
            map.insert(w.to_lowercase(), (pos, neg));
        }
        if map.is_empty() {
            return Err(Error::Empty("sentiment lexicon".into()));
        }
        Ok(Self { entries: map })
    }

    /// Pre-aggregated TSV: `word<TAB>pos_score<TAB>neg_score`. Blank lines and
    /// `#` comments are skipped; a non-numeric first data row is treated as a
    /// header.
    pub fn from_tsv(text: &str, context: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen_data = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(
                    context,
                    i + 1,
                    format!("expected 3 tab-separated columns, got {}", cols.len()),
                ));
            }
            let parsed = (cols[1].trim().parse::<f64>(), cols[2].trim().parse::<f64>());
            match parsed {
                (Ok(p), Ok(n)) => {
                    seen_data = true;
                    entries.push((cols[0].trim().to_string(), p, n));
                }
                _ if !seen_data => seen_data = true, // header
                _ => return Err(Error::parse(context, i + 1, "scores must be numbers")),
            }
        }
        Self::from_entries(entries)
    }

    /// SentiWordNet 3.0 distribution format:
    /// `POS ID PosScore NegScore SynsetTerms Gloss`, tab separated. Each
    /// `term#rank` in SynsetTerms is one sense; scores are averaged over all
    /// senses of a word irrespective of part of speech.
    pub fn from_sentiwordnet(text: &str, context: &str) -> Result<Self> {
        let mut acc: BTreeMap<String, (f64, f64, u32)> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 5 {
                return Err(Error::parse(context, i + 1, "expected at least 5 tab-separated columns"));
            }
            let (Ok(pos), Ok(neg)) = (cols[2].trim().parse::<f64>(), cols[3].trim().parse::<f64>()) else {
                return Err(Error::parse(context, i + 1, "PosScore/NegScore must be numbers"));
            };
            for term in cols[4].split_whitespace() {
                let word = term.rsplit_once('#').map_or(term, |(w, _)| w).to_lowercase();
                let e = acc.entry(word).or_insert((0.0, 0.0, 0));
                e.0 += pos;
                e.1 += neg;
                e.2 += 1;
            }
        }
        Self::from_entries(acc.into_iter().map(|(w, (p, n, k))| (w, p / k as f64, n / k as f64)))
    }

    /// Loads either format, picking SentiWordNet when the first data line has
    /// at least five tab-separated columns.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ctx = path.display().to_string();
        let first = text.lines().find(|l| !l.trim().is_empty() && !l.starts_with('#'));
        match first {
            Some(l) if l.split('\t').count() >= 5 => Self::from_sentiwordnet(&text, &ctx),
            _ => Self::from_tsv(&text, &ctx),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scores(&self, word: &str) -> Option<(f64, f64)> {
        self.entries.get(word).copied()
    }

    /// `pos − neg` for a covered word.
    pub fn signed(&self, word: &str) -> Option<f64> {
        self.scores(word).map(|(p, n)| p - n)
    }
}

fn harmonic_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.len() as f64 / xs.iter().map(|x| 1.0 / x).sum::<f64>()
}

/// Harmonic mean of the positive word scores minus the harmonic mean of the
/// magnitudes of the negative ones. Words scoring exactly zero, and words the
/// lexicon does not know, contribute nothing.
pub fn review_score(tokens: &[String], lexicon: &SentimentLexicon) -> f64 {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for t in tokens {
        match lexicon.signed(t) {
            Some(s) if s > 0.0 => pos.push(s),
            Some(s) if s < 0.0 => neg.push(-s),
            _ => {}
        }
    }
    harmonic_mean(&pos) - harmonic_mean(&neg)
}

#[derive(Debug, Clone, Copy)]
pub struct ScoredReview<'a> {
    pub review: &'a Review,
    pub score: f64,
}

/// Reviews with `|score| > threshold` and at most `max_len` tokens, in corpus
/// order.
pub fn filter_reviews<'a>(
    corpus: &'a Corpus,
    lexicon: &SentimentLexicon,
    threshold: f64,
    max_len: usize,
) -> Vec<ScoredReview<'a>> {
    corpus
        .reviews
        .iter()
        .filter(|r| r.tokens.len() <= max_len)
        .map(|r| ScoredReview { review: r, score: review_score(&r.tokens, lexicon) })
        .filter(|s| s.score.abs() > threshold)
        .collect()
}
