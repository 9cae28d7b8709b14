//! Seeded synthetic domains for tests, benchmarks and demo runs.
//!
//! Domain `d` draws neutral words from a sliding window over a shared
//! vocabulary and polar words from a sliding window over a polar pool, so
//! neighbouring domains overlap more than distant ones. A few polar words
//! flip orientation per domain. Every word is `z` plus lowercase letters and
//! survives normalisation unchanged.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Corpus, Label, Normalizer};
use crate::embedding::{AdjectiveLexicon, SentenceVectorSet, WordVectorTable};
use crate::error::{Error, Result};
use crate::lexstats::SentimentLexicon;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub domains: usize,
    pub reviews: usize,
    /// Neutral words per domain.
    pub neutral_vocab: usize,
    /// Window offset between consecutive domains.
    pub neutral_shift: usize,
    pub polar_vocab: usize,
    pub polar_shift: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Chance that a token is a polar word.
    pub polar_rate: f64,
    /// Chance that a polar token agrees with the review label.
    pub agreement: f64,
    /// Every `flip_every`-th polar word changes orientation, offset by domain.
    pub flip_every: usize,
    pub dims: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            domains: 20,
            reviews: 1000,
            neutral_vocab: 300,
            neutral_shift: 15,
            polar_vocab: 40,
            polar_shift: 2,
            min_len: 10,
            max_len: 30,
            polar_rate: 0.25,
            agreement: 0.9,
            flip_every: 9,
            dims: 16,
            seed: 7,
        }
    }
}

fn letters(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (i % 26) as u8);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

pub fn neutral_word(i: usize) -> String {
    format!("zq{}", letters(i))
}

pub fn polar_word(i: usize) -> String {
    format!("zp{}", letters(i))
}

/// Global orientation of polar-pool word `i`.
pub fn polar_orientation(i: usize) -> Label {
    if i.is_multiple_of(2) {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// What one generated domain looks like.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub id: String,
    pub neutral: Vec<usize>,
    pub polar: Vec<(usize, Label)>,
    pub agreement: f64,
    pub topic: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecord {
    pub label: Label,
    pub text: String,
    /// Topic used for this review's sentence vector.
    pub topic: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticDomain {
    pub id: String,
    pub records: Vec<SyntheticRecord>,
}

impl SyntheticDomain {
    pub fn corpus(&self, normalizer: &Normalizer) -> Corpus {
        Corpus::from_texts(&self.id, self.records.iter().map(|r| (r.label, r.text.as_str())), normalizer)
    }

    /// One `{"domain","label","text"}` object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Rec<'a> {
            domain: &'a str,
            label: String,
            text: &'a str,
        }
        for r in &self.records {
            let line = serde_json::to_string(&Rec { domain: &self.id, label: r.label.to_string(), text: &r.text })
                .map_err(|e| Error::Invalid(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| Error::io("<jsonl>", e))?;
        }
        Ok(())
    }
}

fn gen_domain(spec: &DomainSpec, reviews: usize, min_len: usize, max_len: usize, polar_rate: f64) -> SyntheticDomain {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pos: Vec<usize> = spec.polar.iter().filter(|p| p.1 == Label::Positive).map(|p| p.0).collect();
    let neg: Vec<usize> = spec.polar.iter().filter(|p| p.1 == Label::Negative).map(|p| p.0).collect();
    let mut records = Vec::with_capacity(reviews);
    for i in 0..reviews {
        let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
        let len = rng.gen_range(min_len..=max_len);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            if !pos.is_empty() && !neg.is_empty() && rng.gen_bool(polar_rate) {
                let agree = rng.gen_bool(spec.agreement);
                let pool = match (label, agree) {
                    (Label::Positive, true) | (Label::Negative, false) => &pos,
                    _ => &neg,
                };
                words.push(polar_word(pool[rng.gen_range(0..pool.len())]));
            } else {
                words.push(neutral_word(spec.neutral[rng.gen_range(0..spec.neutral.len())]));
            }
        }
        records.push(SyntheticRecord { label, text: words.join(" "), topic: spec.topic });
    }
    SyntheticDomain { id: spec.id.clone(), records }
}

/// Reviews `[0, m)` of `source` followed by reviews `[0, n − m)` of `noise`,
/// with `m = round(alpha · n)`. Nested in `alpha`.
pub fn mixture(id: &str, source: &SyntheticDomain, noise: &SyntheticDomain, alpha: f64) -> Result<SyntheticDomain> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Invalid(format!("mixture weight {alpha} outside [0, 1]")));
    }
    let n = source.records.len().min(noise.records.len());
    let m = (alpha * n as f64).round() as usize;
    let records = source.records[..m].iter().chain(&noise.records[..n - m]).cloned().collect();
    Ok(SyntheticDomain { id: id.to_string(), records })
}

/// Generated domains plus the lexicons and vector models that go with them.
#[derive(Debug, Clone)]
pub struct SyntheticSuite {
    pub config: SyntheticConfig,
    pub domains: Vec<SyntheticDomain>,
    topics: Vec<Vec<f64>>,
}

fn unit_noise(seed: u64, dims: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl SyntheticSuite {
    pub fn generate(config: SyntheticConfig) -> Result<Self> {
        if config.domains < 2 || config.reviews == 0 || config.neutral_vocab == 0 || config.polar_vocab < 2 {
            return Err(Error::Invalid("synthetic config needs ≥ 2 domains, reviews, and vocabulary".into()));
        }
        if config.min_len == 0 || config.min_len > config.max_len || config.dims < 2 {
            return Err(Error::Invalid("synthetic config has an invalid review length or dimension".into()));
        }
        let specs: Vec<DomainSpec> = (0..config.domains)
            .map(|d| {
                let polar = (0..config.polar_vocab)
                    .map(|k| {
                        let w = d * config.polar_shift + k;
                        let o = polar_orientation(w);
                        let flipped = config.flip_every > 0 && (w + d).is_multiple_of(config.flip_every);
                        let o = match (o, flipped) {
                            (Label::Positive, true) => Label::Negative,
                            (Label::Negative, true) => Label::Positive,
                            (o, false) => o,
                        };
                        (w, o)
                    })
                    .collect();
                DomainSpec {
                    id: format!("S{}", d + 1),
                    neutral: (d * config.neutral_shift..d * config.neutral_shift + config.neutral_vocab).collect(),
                    polar,
                    agreement: config.agreement,
                    topic: d,
                    seed: config.seed.wrapping_mul(1_000_003).wrapping_add(d as u64),
                }
            })
            .collect();
        let domains = specs
            .iter()
            .map(|s| gen_domain(s, config.reviews, config.min_len, config.max_len, config.polar_rate))
            .collect();
        let topics = Self::make_topics(&config, config.domains + 1);
        Ok(Self { config, domains, topics })
    }

    /// Topic directions sweep a quarter circle in the first two dimensions so
    /// that topic distance follows domain distance.
    fn make_topics(config: &SyntheticConfig, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|d| {
                let theta = std::f64::consts::FRAC_PI_2 * d as f64 / (n - 1) as f64;
                let mut v: Vec<f64> =
                    unit_noise(config.seed ^ (0x7091c + d as u64), config.dims).into_iter().map(|x| 0.1 * x).collect();
                v[0] += theta.cos();
                v[1] += theta.sin();
                v
            })
            .collect()
    }

    /// Corpora for every domain, in order.
    pub fn corpora(&self, normalizer: &Normalizer) -> Vec<Corpus> {
        self.domains.iter().map(|d| d.corpus(normalizer)).collect()
    }

    /// Lexicon scoring every pool word by its global orientation.
    pub fn sentiment_lexicon(&self) -> SentimentLexicon {
        let pool = self.polar_pool_size();
        SentimentLexicon::from_entries((0..pool).map(|i| match polar_orientation(i) {
            Label::Positive => (polar_word(i), 0.625, 0.0),
            Label::Negative => (polar_word(i), 0.0, 0.625),
        }))
        .expect("non-empty pool")
    }

    /// Every polar-pool word and every fifth neutral word.
    pub fn adjectives(&self) -> AdjectiveLexicon {
        let c = &self.config;
        let neutral = c.neutral_vocab + (c.domains - 1) * c.neutral_shift;
        AdjectiveLexicon::new(
            (0..self.polar_pool_size()).map(polar_word).chain((0..neutral).step_by(5).map(neutral_word)),
        )
        .expect("non-empty")
    }

    fn polar_pool_size(&self) -> usize {
        self.config.polar_vocab + (self.config.domains - 1) * self.config.polar_shift + 16
    }

    fn word_base(&self, word: &str) -> Vec<f64> {
        unit_noise(self.config.seed ^ fnv1a(word), self.config.dims)
    }

    /// Vectors for the words of `corpus`: a per-word base plus a share of the
    /// domain topic.
    pub fn word_vectors(&self, corpus: &Corpus, topic: usize) -> WordVectorTable {
        let t = &self.topics[topic];
        let entries = corpus
            .word_counts()
            .keys()
            .map(|w| {
                let v = self.word_base(w).iter().zip(t).map(|(b, t)| b + 0.5 * t).collect();
                (w.clone(), v)
            })
            .collect();
        WordVectorTable { domain_id: corpus.domain_id.clone(), dims: self.config.dims, entries }
    }

    /// One vector per review of `corpus`: the topic of the record it came
    /// from, the mean of its word bases, and a little per-review noise.
    pub fn sentence_vectors(&self, domain: &SyntheticDomain, corpus: &Corpus) -> SentenceVectorSet {
        let dims = self.config.dims;
        let vectors = corpus
            .reviews
            .iter()
            .map(|r| {
                let key = r.key();
                let topic = &self.topics[domain.records[r.index].topic];
                let mut v = vec![0.0; dims];
                for tok in &r.tokens {
                    for (a, b) in v.iter_mut().zip(self.word_base(tok)) {
                        *a += b;
                    }
                }
                let noise = unit_noise(self.config.seed ^ fnv1a(&key), dims);
                let n = r.tokens.len() as f64;
                for ((a, t), e) in v.iter_mut().zip(topic).zip(noise) {
                    *a = *a / n + t + 0.1 * e;
                }
                (key, v)
            })
            .collect();
        SentenceVectorSet { domain_id: corpus.domain_id.clone(), dims, vectors }
    }

    /// A source domain and a noise domain for mixture experiments. The noise
    /// domain reuses the source's polar words with weaker agreement, adds
    /// polar words of its own and has its own topic. Neutral words are shared
    /// so that no mixture leaves them with only a handful of occurrences.
    pub fn mixture_pair(&self) -> (SyntheticDomain, SyntheticDomain) {
        let c = &self.config;
        let polar: Vec<(usize, Label)> = (0..c.polar_vocab).map(|w| (w, polar_orientation(w))).collect();
        let src = DomainSpec {
            id: "SRC".into(),
            neutral: (0..c.neutral_vocab).collect(),
            polar: polar.clone(),
            agreement: 0.97,
            topic: 0,
            seed: c.seed ^ 0x5eed_0001,
        };
        let pool = self.polar_pool_size();
        let mut noise_polar = polar;
        noise_polar.extend((pool - 10..pool).map(|w| (w, polar_orientation(w))));
        let noise = DomainSpec {
            id: "NOISE".into(),
            neutral: (0..c.neutral_vocab).collect(),
            polar: noise_polar,
            agreement: 0.85,
            topic: self.topics.len() - 1,
            seed: c.seed ^ 0x5eed_0002,
        };
        (
            gen_domain(&src, c.reviews, c.min_len, c.max_len, c.polar_rate),
            gen_domain(&noise, c.reviews, c.min_len, c.max_len, c.polar_rate),
        )
    }
}

fn write_vector_lines<'a, W, I>(rows: I, mut out: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    for (key, v) in rows {
        write!(out, "{key}").map_err(|e| Error::io("<vectors>", e))?;
        for x in v {
            write!(out, " {x:.6}").map_err(|e| Error::io("<vectors>", e))?;
        }
        writeln!(out).map_err(|e| Error::io("<vectors>", e))?;
    }
    Ok(())
}

pub fn write_word_vectors<W: Write>(table: &WordVectorTable, out: W) -> Result<()> {
    write_vector_lines(table.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice())), out)
}

pub fn write_sentence_vectors<W: Write>(set: &SentenceVectorSet, out: W) -> Result<()> {
    write_vector_lines(set.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice())), out)
}

/// Writes a complete demo workspace: `corpora/<ID>.jsonl`, lexicons, and
/// `vectors/{word,sentence}/<ID>.txt`.
pub fn write_suite(suite: &SyntheticSuite, dir: &Path) -> Result<()> {
    let create = |p: &Path| std::fs::File::create(p).map_err(|e| Error::io(p, e)).map(std::io::BufWriter::new);
    for sub in ["corpora", "vectors/word", "vectors/sentence"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let normalizer = Normalizer::default();
    for (d, dom) in suite.domains.iter().enumerate() {
        dom.write_jsonl(create(&dir.join("corpora").join(format!("{}.jsonl", dom.id)))?)?;
        let corpus = dom.corpus(&normalizer);
        write_word_vectors(
            &suite.word_vectors(&corpus, d),
            create(&dir.join("vectors/word").join(format!("{}.txt", dom.id)))?,
        )?;
        write_sentence_vectors(
            &suite.sentence_vectors(dom, &corpus),
            create(&dir.join("vectors/sentence").join(format!("{}.txt", dom.id)))?,
        )?;
    }
    let mut lex = create(&dir.join("sentiment.tsv"))?;
    let pool = suite.polar_pool_size();
    for i in 0..pool {
        let (p, n) = match polar_orientation(i) {
            Label::Positive => (0.625, 0.0),
            Label::Negative => (0.0, 0.625),
        };
        writeln!(lex, "{}\t{p}\t{n}", polar_word(i)).map_err(|e| Error::io("sentiment.tsv", e))?;
    }
    let mut adj = create(&dir.join("adjectives.txt"))?;
    let c = &suite.config;
    let neutral = c.neutral_vocab + (c.domains - 1) * c.neutral_shift;
    for w in (0..pool).map(polar_word).chain((0..neutral).step_by(5).map(neutral_word)) {
        writeln!(adj, "{w}").map_err(|e| Error::io("adjectives.txt", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexstats::{polar_words, polarity_table};

    fn small() -> SyntheticConfig {
        SyntheticConfig { domains: 4, reviews: 200, ..SyntheticConfig::default() }
    }

    #[test]
    fn words_survive_normalisation() {
        let n = Normalizer::default();
        for i in [0, 1, 25, 26, 700, 20_000] {
            for w in [neutral_word(i), polar_word(i)] {
                assert_eq!(n.normalize(&w), vec![w.clone()]);
            }
        }
        assert_ne!(neutral_word(26), neutral_word(0));
    }

    #[test]
    fn seeded_and_balanced() {
        let a = SyntheticSuite::generate(small()).unwrap();
        let b = SyntheticSuite::generate(small()).unwrap();
        assert_eq!(a.domains[2].records, b.domains[2].records);
        let c = a.domains[0].corpus(&Normalizer::default());
        assert_eq!(c.len(), 200);
        assert_eq!(c.label_counts(), (100, 100));
        let other = SyntheticSuite::generate(SyntheticConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.domains[0].records, other.domains[0].records);
    }

    #[test]
    fn polar_words_are_recovered() {
        let s = SyntheticSuite::generate(SyntheticConfig { domains: 2, reviews: 1000, ..SyntheticConfig::default() })
            .unwrap();
        let c = s.domains[0].corpus(&Normalizer::default());
        let polar = polar_words(&polarity_table(&c, 1), 0.5);
        let expected = (0..40).map(polar_word).filter(|w| polar.contains(w)).count();
        assert!(expected >= 38, "{expected}");
        assert!(polar.iter().all(|w| w.starts_with("zp")));
    }

    #[test]
    fn mixture_is_nested() {
        let s = SyntheticSuite::generate(small()).unwrap();
        let (src, noise) = s.mixture_pair();
        let m = mixture("M", &src, &noise, 0.25).unwrap();
        assert_eq!(m.records.len(), 200);
        assert_eq!(m.records[..50], src.records[..50]);
        assert_eq!(m.records[50..], noise.records[..150]);
        assert_eq!(mixture("M", &src, &noise, 1.0).unwrap().records, src.records);
        assert!(mixture("M", &src, &noise, 1.5).is_err());
    }

    #[test]
    fn suite_files_load_back() {
        let s = SyntheticSuite::generate(SyntheticConfig { domains: 2, reviews: 50, ..SyntheticConfig::default() })
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_suite(&s, dir.path()).unwrap();
        let n = Normalizer::default();
        let c =
            crate::corpus::load_corpus(dir.path().join("corpora/S2.jsonl"), crate::corpus::Format::Jsonl, &n).unwrap();
        assert_eq!(c.len(), 50);
        let w = crate::embedding::load_word_vectors(dir.path().join("vectors/word/S2.txt"), "S2").unwrap();
        assert_eq!(w.entries.len(), c.word_counts().len());
        let sv = crate::embedding::load_sentence_vectors(dir.path().join("vectors/sentence/S2.txt"), "S2").unwrap();
        assert_eq!(sv.vectors[0].0, "S2:0");
        assert!(SentimentLexicon::load(dir.path().join("sentiment.tsv")).unwrap().len() > 40);
        assert!(AdjectiveLexicon::load(dir.path().join("adjectives.txt")).unwrap().contains(&polar_word(3)));
    }
}
