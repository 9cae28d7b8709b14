//! Review corpora: ingestion, normalisation and n-gram statistics.
//!
//! A [`Corpus`] holds one domain's labelled reviews together with word
//! counts split by polarity and n-gram counts for orders 1 to 4. N-grams are
//! keyed by their tokens joined with a single space; tokens are purely
//! alphabetic after normalisation, so the key is unambiguous and its string
//! order equals the lexicographic order of the token tuple.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::par::Exec;

pub const MAX_ORDER: usize = 4;

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Positive,
    Negative,
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            other => Err(Error::Invalid(format!("unknown label {other:?} (expected \"positive\" or \"negative\")"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Review {
    pub domain_id: String,
    /// Position of the source record in its input file (0-based).
    pub index: usize,
    pub label: Label,
    pub tokens: Vec<String>,
}

impl Review {
    /// Key used by sentence-vector files: `<domain>:<index>`.
    pub fn key(&self) -> String {
        format!("{}:{}", self.domain_id, self.index)
    }
}

/// Occurrence and document counts of one word, split by review polarity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WordCount {
    pub pos: u64,
    pub neg: u64,
    pub pos_docs: u64,
    pub neg_docs: u64,
}

impl WordCount {
    pub fn total(&self) -> u64 {
        self.pos + self.neg
    }
}

/// Stopword-aware text normaliser.
#[derive(Debug, Clone)]
pub struct Normalizer {
    stopwords: HashSet<String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self::from_list(BUNDLED_STOPWORDS)
    }
}

impl Normalizer {
    /// Parses a stopword list, one entry per line, `#` comments allowed.
    pub fn from_list(text: &str) -> Self {
        let stopwords = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(clean_token)
            .collect();
        Self { stopwords }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_list(&text))
    }

    pub fn without_stopwords() -> Self {
        Self { stopwords: HashSet::new() }
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Lowercases, strips every non-alphabetic character, and drops tokens
    /// that end up empty (numbers, punctuation) or are stopwords.
    pub fn normalize(&self, text: &str) -> Vec<String> {
        text.split_whitespace().filter_map(clean_token).filter(|t| !self.stopwords.contains(t)).collect()
    }
}

fn clean_token(raw: &str) -> Option<String> {
    // lowercase first: some lowercase mappings emit combining marks that the
    // alphabetic filter must see
    let t: String = raw.to_lowercase().chars().filter(|c| c.is_alphabetic()).collect();
    (!t.is_empty()).then_some(t)
}

/// [`Normalizer::normalize`] with the bundled English stopword list.
pub fn normalize(text: &str) -> Vec<String> {
    static DEFAULT: OnceLock<Normalizer> = OnceLock::new();
    DEFAULT.get_or_init(Normalizer::default).normalize(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Ok(Format::Jsonl),
            Some("csv") => Ok(Format::Csv),
            _ => Err(Error::Invalid(format!("{}: cannot infer corpus format (use .jsonl or .csv)", path.display()))),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    domain: String,
    label: String,
    text: String,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub domain_id: String,
    pub reviews: Vec<Review>,
    /// Record indices dropped because they normalised to zero tokens.
    pub dropped: Vec<usize>,
    counts: BTreeMap<String, WordCount>,
    ngrams: [BTreeMap<String, u64>; MAX_ORDER],
    ngram_totals: [u64; MAX_ORDER],
}

impl Corpus {
    /// Normalises `(label, text)` records into a corpus. Records are indexed
    /// in iteration order.
    pub fn from_texts<'a, I>(domain_id: &str, records: I, normalizer: &Normalizer) -> Self
    where
        I: IntoIterator<Item = (Label, &'a str)>,
    {
        let mut reviews = Vec::new();
        let mut dropped = Vec::new();
        for (index, (label, text)) in records.into_iter().enumerate() {
            let tokens = normalizer.normalize(text);
            if tokens.is_empty() {
                dropped.push(index);
            } else {
                reviews.push(Review { domain_id: domain_id.to_string(), index, label, tokens });
            }
        }
        if !dropped.is_empty() {
            log::warn!("{domain_id}: dropped {} review(s) with no tokens after normalisation", dropped.len());
        }
        let mut corpus = Self::from_reviews(domain_id, reviews);
        corpus.dropped = dropped;
        corpus
    }

    /// Builds statistics over already-normalised reviews.
    pub fn from_reviews(domain_id: &str, reviews: Vec<Review>) -> Self {
        let mut counts: BTreeMap<String, WordCount> = BTreeMap::new();
        let mut ngrams: [BTreeMap<String, u64>; MAX_ORDER] = Default::default();
        let mut ngram_totals = [0u64; MAX_ORDER];
        for review in &reviews {
            let mut seen = HashSet::new();
            for tok in &review.tokens {
                let c = counts.entry(tok.clone()).or_default();
                let first = seen.insert(tok.as_str());
                match review.label {
                    Label::Positive => {
                        c.pos += 1;
                        c.pos_docs += first as u64;
                    }
                    Label::Negative => {
                        c.neg += 1;
                        c.neg_docs += first as u64;
                    }
                }
            }
            for order in 1..=MAX_ORDER {
                for gram in review.tokens.windows(order) {
                    *ngrams[order - 1].entry(gram.join(" ")).or_insert(0) += 1;
                    ngram_totals[order - 1] += 1;
                }
            }
        }
        Self { domain_id: domain_id.to_string(), reviews, dropped: Vec::new(), counts, ngrams, ngram_totals }
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn word_counts(&self) -> &BTreeMap<String, WordCount> {
        &self.counts
    }

    pub fn word_count(&self, word: &str) -> WordCount {
        self.counts.get(word).copied().unwrap_or_default()
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let pos = self.reviews.iter().filter(|r| r.label == Label::Positive).count();
        (pos, self.reviews.len() - pos)
    }

    pub fn token_count(&self) -> u64 {
        self.ngram_totals[0]
    }

    /// N-gram counts of the given order (1..=4).
    pub fn ngrams(&self, order: usize) -> Result<&BTreeMap<String, u64>> {
        check_order(order)?;
        Ok(&self.ngrams[order - 1])
    }

    pub fn ngram_total(&self, order: usize) -> Result<u64> {
        check_order(order)?;
        Ok(self.ngram_totals[order - 1])
    }
}

fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("n-gram order {order} outside 1..={MAX_ORDER}")))
    }
}

/// Reads a single-domain corpus file. Every record must carry the same
/// `domain`; reviews that normalise to nothing are dropped with a warning.
pub fn load_corpus(path: impl AsRef<Path>, format: Format, normalizer: &Normalizer) -> Result<Corpus> {
    let path = path.as_ref();
    let ctx = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records: Vec<(Label, String)> = Vec::new();
    let mut domain: Option<String> = None;

    let mut accept = |line: usize, rec: RawRecord| -> Result<()> {
        let label: Label = rec.label.parse().map_err(|e: Error| Error::parse(&ctx, line, e.to_string()))?;
        match &domain {
            None => domain = Some(rec.domain),
            Some(d) if *d != rec.domain => {
                return Err(Error::parse(
                    &ctx,
                    line,
                    format!("domain {:?} differs from {d:?}; one domain per file", rec.domain),
                ))
            }
            Some(_) => {}
        }
        records.push((label, rec.text));
        Ok(())
    };

    match format {
        Format::Jsonl => {
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line_no = i + 1;
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: RawRecord = serde_json::from_str(&line)
                    .map_err(|e| Error::parse(&ctx, line_no, format!("malformed record: {e}")))?;
                accept(line_no, rec)?;
            }
        }
        Format::Csv => {
            let mut rdr = csv::Reader::from_reader(file);
            let malformed = |e: csv::Error| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                Error::parse(&ctx, line, format!("malformed record: {e}"))
            };
            let headers = rdr.headers().map_err(malformed)?.clone();
            let mut row = csv::StringRecord::new();
            while rdr.read_record(&mut row).map_err(malformed)? {
                let line_no = row.position().map(|p| p.line() as usize).unwrap_or(0);
                let rec: RawRecord = row
                    .deserialize(Some(&headers))
                    .map_err(|e| Error::parse(&ctx, line_no, format!("malformed record: {e}")))?;
                accept(line_no, rec)?;
            }
        }
    }

    let Some(domain) = domain else {
        return Err(Error::Empty(ctx));
    };
    let corpus = Corpus::from_texts(&domain, records.iter().map(|(l, t)| (*l, t.as_str())), normalizer);
    if corpus.is_empty() {
        return Err(Error::Empty(format!("{ctx}: every review normalised to zero tokens")));
    }
    Ok(corpus)
}

/// The `k` most frequent n-grams of `order`, most frequent first, ties
/// broken by ascending lexicographic order.
pub fn top_k_ngrams(corpus: &Corpus, order: usize, k: usize) -> Result<Vec<(String, u64)>> {
    let grams = corpus.ngrams(order)?;
    let mut all: Vec<(&String, u64)> = grams.iter().map(|(g, c)| (g, *c)).collect();
    // BTreeMap iteration is already ascending, so a stable sort by count
    // keeps the lexicographic tie order.
    all.sort_by_key(|g| std::cmp::Reverse(g.1));
    Ok(all.into_iter().take(k).map(|(g, c)| (g.clone(), c)).collect())
}

/// Fraction of shared entries among the top-`k` n-gram lists of each order,
/// normalised by `k * orders.len()`. A corpus with fewer than `k` distinct
/// n-grams of some order therefore scores below 1 against itself.
pub fn ngram_overlap(c1: &Corpus, c2: &Corpus, k: usize, orders: &[usize]) -> Result<f64> {
    if c1.is_empty() || c2.is_empty() {
        return Err(Error::Invalid("ngram_overlap needs non-empty corpora".into()));
    }
    if k == 0 || orders.is_empty() {
        return Err(Error::Invalid("ngram_overlap needs k >= 1 and at least one order".into()));
    }
    let mut shared = 0usize;
    for &order in orders {
        let a: HashSet<String> = top_k_ngrams(c1, order, k)?.into_iter().map(|(g, _)| g).collect();
        shared += top_k_ngrams(c2, order, k)?.iter().filter(|(g, _)| a.contains(g)).count();
    }
    Ok(shared as f64 / (k * orders.len()) as f64)
}

pub const DEFAULT_OVERLAP_ORDERS: [usize; 3] = [2, 3, 4];

#[derive(Debug, Clone, PartialEq)]
pub struct NgramOverlapMatrix {
    pub domains: Vec<String>,
    /// Symmetric; the diagonal holds 1.0 but is never written out.
    pub values: Vec<Vec<f64>>,
}

impl NgramOverlapMatrix {
    pub fn compute(corpora: &[Corpus], k: usize, orders: &[usize], exec: Exec) -> Result<Self> {
        let n = corpora.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let cells = exec.map(&pairs, |&(i, j)| ngram_overlap(&corpora[i], &corpora[j], k, orders));
        let mut values = vec![vec![1.0; n]; n];
        for (&(i, j), v) in pairs.iter().zip(cells) {
            let v = v?;
            values[i][j] = v;
            values[j][i] = v;
        }
        Ok(Self { domains: corpora.iter().map(|c| c.domain_id.clone()).collect(), values })
    }

    /// Upper triangle only, two decimals; the diagonal and lower triangle
    /// are left empty.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.domains.iter().cloned());
        w.write_record(&header)?;
        for (i, d) in self.domains.iter().enumerate() {
            let mut row = vec![d.clone()];
            for j in 0..self.domains.len() {
                row.push(if j > i { format!("{:.2}", self.values[i][j]) } else { String::new() });
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn toy(domain: &str, texts: &[(Label, &str)]) -> Corpus {
        Corpus::from_texts(domain, texts.iter().copied(), &Normalizer::default())
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("The plot, 100% UNPREDICTABLE!"), vec!["plot", "unpredictable"]);
        assert!(normalize("").is_empty());
        assert!(normalize("a an the").is_empty());
        assert_eq!(normalize("Don't buy it"), vec!["buy"]);
    }

    #[test]
    fn custom_stopwords() {
        let n = Normalizer::from_list("# comment\nproduct\n");
        assert_eq!(n.normalize("the good product"), vec!["the", "good"]);
        assert_eq!(Normalizer::without_stopwords().normalize("A b"), vec!["a", "b"]);
    }

    #[test]
    fn counts_from_two_records() {
        let c = toy("d", &[(Label::Positive, "good product"), (Label::Negative, "bad product")]);
        assert_eq!(c.len(), 2);
        let wc = |w| {
            let c = c.word_count(w);
            (c.pos, c.neg)
        };
        assert_eq!(wc("good"), (1, 0));
        assert_eq!(wc("product"), (1, 1));
        assert_eq!(wc("bad"), (0, 1));
        assert_eq!(c.word_counts().len(), 3);
    }

    #[test]
    fn empty_reviews_are_dropped() {
        let c = toy("d", &[(Label::Positive, "good"), (Label::Negative, "the 42 !!"), (Label::Negative, "bad")]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.dropped, vec![1]);
        assert_eq!(c.reviews[1].index, 2);
        assert_eq!(c.reviews[1].key(), "d:2");
    }

    fn write_tmp(suffix: &str, body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_jsonl_and_csv() {
        let j = write_tmp(
            ".jsonl",
            "{\"domain\":\"D1\",\"label\":\"positive\",\"text\":\"good product\"}\n\
             {\"domain\":\"D1\",\"label\":\"negative\",\"text\":\"bad product\"}\n",
        );
        let c = load_corpus(j.path(), Format::Jsonl, &Normalizer::default()).unwrap();
        assert_eq!(c.domain_id, "D1");
        assert_eq!(c.label_counts(), (1, 1));

        let f = write_tmp(".csv", "domain,label,text\nD1,positive,\"good, product\"\nD1,negative,bad product\n");
        let c = load_corpus(f.path(), Format::from_path(f.path()).unwrap(), &Normalizer::default()).unwrap();
        assert_eq!(c.reviews[0].tokens, vec!["good", "product"]);
        assert_eq!(c.reviews[1].label, Label::Negative);
    }

    #[test]
    fn load_errors() {
        let n = Normalizer::default();
        let f = write_tmp(".jsonl", "{\"domain\":\"D1\",\"label\":\"positive\",\"text\":\"ok\"}\n{not json\n");
        let err = load_corpus(f.path(), Format::Jsonl, &n).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");

        let f = write_tmp(".jsonl", "{\"domain\":\"D1\",\"label\":\"neutral\",\"text\":\"ok\"}\n");
        let err = load_corpus(f.path(), Format::Jsonl, &n).unwrap_err().to_string();
        assert!(err.contains("unknown label") && err.contains("line 1"), "{err}");

        let f = write_tmp(".jsonl", "");
        assert!(matches!(load_corpus(f.path(), Format::Jsonl, &n), Err(Error::Empty(_))));

        let f = write_tmp(".csv", "domain,label,text\nD1,positive,fine\nD1,maybe,fine\n");
        let err = load_corpus(f.path(), Format::Csv, &n).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");

        let f = write_tmp(
            ".jsonl",
            "{\"domain\":\"D1\",\"label\":\"positive\",\"text\":\"ok\"}\n{\"domain\":\"D2\",\"label\":\"positive\",\"text\":\"ok\"}\n",
        );
        assert!(load_corpus(f.path(), Format::Jsonl, &n).is_err());
    }

    #[test]
    fn balanced_ten_thousand() {
        let texts: Vec<(Label, String)> = (0..10_000)
            .map(|i| {
                if i % 2 == 0 {
                    (Label::Positive, format!("great item number {}", i % 7))
                } else {
                    (Label::Negative, "awful item".to_string())
                }
            })
            .collect();
        let c = Corpus::from_texts("D", texts.iter().map(|(l, t)| (*l, t.as_str())), &Normalizer::default());
        assert_eq!(c.label_counts(), (5000, 5000));
    }

    #[test]
    fn top_k_rules() {
        let c = toy(
            "d",
            &[
                (Label::Positive, "good product good product good product"),
                (Label::Positive, "good product good product zeta alpha"),
            ],
        );
        let top = top_k_ngrams(&c, 2, 3).unwrap();
        assert_eq!(top[0], ("good product".to_string(), 5));

        let c = toy(
            "d",
            &[
                (Label::Positive, "beta gamma beta gamma beta gamma"),
                (Label::Negative, "alpha delta alpha delta alpha delta"),
            ],
        );
        let top = top_k_ngrams(&c, 2, 10).unwrap();
        // (alpha delta) and (beta gamma) both occur 3 times
        assert_eq!(top[0].1, 3);
        assert_eq!(top[0].0, "alpha delta");
        assert_eq!(top[1].0, "beta gamma");

        let c = toy("d", &[(Label::Positive, "one two three four five six")]);
        assert_eq!(top_k_ngrams(&c, 3, 10).unwrap().len(), 4);
        assert!(top_k_ngrams(&c, 5, 10).is_err());
        assert!(top_k_ngrams(&c, 0, 10).is_err());
    }

    #[test]
    fn overlap_identity_and_disjoint() {
        let a = toy("a", &[(Label::Positive, "red blue green yellow pink black white grey gold teal navy lime plum")]);
        let b = toy("b", &[(Label::Positive, "cat dog fish bird cat dog fish bird")]);
        assert_eq!(ngram_overlap(&a, &a, 10, &DEFAULT_OVERLAP_ORDERS).unwrap(), 1.0);
        assert_eq!(ngram_overlap(&a, &b, 10, &DEFAULT_OVERLAP_ORDERS).unwrap(), 0.0);
    }

    #[test]
    fn overlap_matrix_csv_layout() {
        let a = toy("A", &[(Label::Positive, "red blue green yellow")]);
        let b = toy("B", &[(Label::Positive, "red blue green cat")]);
        let c = toy("C", &[(Label::Positive, "cat dog fish bird")]);
        let m = NgramOverlapMatrix::compute(&[a, b, c], 10, &DEFAULT_OVERLAP_ORDERS, Exec::Sequential).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ",A,B,C");
        assert!(lines[1].starts_with("A,,"));
        assert_eq!(lines[3], "C,,,");
        assert_eq!(m.values[0][1], m.values[1][0]);
    }

    fn words() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec("[a-e]{1,2}", 1..12)
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(text in "\\PC{0,60}") {
            let once = normalize(&text);
            prop_assert_eq!(normalize(&once.join(" ")), once);
        }

        #[test]
        fn counts_sum_to_token_totals(docs in proptest::collection::vec((any::<bool>(), words()), 1..8)) {
            let texts: Vec<(Label, String)> = docs
                .iter()
                .map(|(p, w)| (if *p { Label::Positive } else { Label::Negative }, w.join(" ")))
                .collect();
            let c = Corpus::from_texts("d", texts.iter().map(|(l, t)| (*l, t.as_str())), &Normalizer::without_stopwords());
            let pos_tokens: usize = c.reviews.iter().filter(|r| r.label == Label::Positive).map(|r| r.tokens.len()).sum();
            let neg_tokens: usize = c.reviews.iter().filter(|r| r.label == Label::Negative).map(|r| r.tokens.len()).sum();
            prop_assert_eq!(c.word_counts().values().map(|w| w.pos).sum::<u64>(), pos_tokens as u64);
            prop_assert_eq!(c.word_counts().values().map(|w| w.neg).sum::<u64>(), neg_tokens as u64);
        }

        #[test]
        fn overlap_symmetric_and_granular(a in proptest::collection::vec(words(), 1..6), b in proptest::collection::vec(words(), 1..6), k in 1usize..6) {
            let n = Normalizer::without_stopwords();
            let ca = Corpus::from_texts("a", a.iter().map(|w| (Label::Positive, w.join(" "))).collect::<Vec<_>>().iter().map(|(l, t)| (*l, t.as_str())), &n);
            let cb = Corpus::from_texts("b", b.iter().map(|w| (Label::Negative, w.join(" "))).collect::<Vec<_>>().iter().map(|(l, t)| (*l, t.as_str())), &n);
            let ab = ngram_overlap(&ca, &cb, k, &DEFAULT_OVERLAP_ORDERS).unwrap();
            let ba = ngram_overlap(&cb, &ca, k, &DEFAULT_OVERLAP_ORDERS).unwrap();
            prop_assert_eq!(ab, ba);
            let scaled = ab * (k * 3) as f64;
            prop_assert!((scaled - scaled.round()).abs() < 1e-9);
        }
    }
}
