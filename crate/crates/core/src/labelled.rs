//! Metrics that need labelled data in both domains.
//!
//! * LM1: size of the intersection of chi-square significant words.
//! * LM2: mean symmetric KL divergence of common polar words plus `1/J`.
//! * LM3: mean L1 distance of common polar words' `(P, N)` plus `1/J`.
//! * LM4: percentage change of weighted n-gram entropy when the target is
//!   mixed into the source.
//!
//! `J` is the Jaccard coefficient of the two polar-word sets. All logs are
//! natural. Polarity probabilities pass through [`smooth`] before any log;
//! n-gram probabilities are never zero and are used as is.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::corpus::{Corpus, MAX_ORDER};
use crate::error::{Error, Result};
use crate::lexstats::{
    polar_words, polarity_table_with, significant_words, smooth, Polarity, PolarityTable, ProbabilityMode,
    SignificantWordSet, DEFAULT_POLAR_THRESHOLD, DEFAULT_SIGNIFICANT_MIN_CHI2, DEFAULT_SIGNIFICANT_MIN_COUNT,
};
use crate::metric::{MetricId, MetricResult};
use crate::par::Exec;

pub const UNIGRAM_WEIGHT: f64 = 1.0;
pub const NGRAM_WEIGHT: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct LabelledConfig {
    pub polar_threshold: f64,
    pub polarity_min_count: u64,
    pub probability_mode: ProbabilityMode,
    pub significant_min_count: u64,
    pub significant_min_chi2: f64,
    /// Entropy weights for orders 1..=4.
    pub entropy_weights: [f64; MAX_ORDER],
}

impl Default for LabelledConfig {
    fn default() -> Self {
        Self {
            polar_threshold: DEFAULT_POLAR_THRESHOLD,
            polarity_min_count: 1,
            probability_mode: ProbabilityMode::Occurrence,
            significant_min_count: DEFAULT_SIGNIFICANT_MIN_COUNT,
            significant_min_chi2: DEFAULT_SIGNIFICANT_MIN_CHI2,
            entropy_weights: [UNIGRAM_WEIGHT, NGRAM_WEIGHT, NGRAM_WEIGHT, NGRAM_WEIGHT],
        }
    }
}

fn unrankable(metric: MetricId, s: &str, t: &str, reason: &str) -> Error {
    Error::Unrankable {
        metric: metric.to_string(),
        source_domain: s.to_string(),
        target: t.to_string(),
        reason: reason.to_string(),
    }
}

/// LM1.
pub fn lm1_overlap(sig_s: &SignificantWordSet, sig_t: &SignificantWordSet) -> usize {
    sig_s.words.intersection(&sig_t.words).count()
}

/// Jaccard coefficient from the common count and the two set sizes.
pub fn jaccard(common: usize, w1: usize, w2: usize) -> Result<f64> {
    if common == 0 {
        return Err(Error::Invalid("no common polar words".into()));
    }
    if common > w1.min(w2) {
        return Err(Error::Invalid(format!("common count {common} exceeds min({w1}, {w2})")));
    }
    Ok(common as f64 / (w1 + w2 - common) as f64)
}

/// Symmetric KL divergence of two `(P, N)` distributions.
pub fn word_skld(a: Polarity, b: Polarity) -> f64 {
    let (p1, n1, p2, n2) = (smooth(a.p), smooth(a.n), smooth(b.p), smooth(b.n));
    let fwd = n1 * (n1 / n2).ln() + p1 * (p1 / p2).ln();
    let bwd = n2 * (n2 / n1).ln() + p2 * (p2 / p1).ln();
    (fwd + bwd) / 2.0
}

pub fn word_l1(a: Polarity, b: Polarity) -> f64 {
    (a.p - b.p).abs() + (a.n - b.n).abs()
}

/// Mean of `per_word` over the common polar words plus `1/J`.
fn polar_pair_score(
    metric: MetricId,
    table_s: &PolarityTable,
    polar_s: &BTreeSet<String>,
    table_t: &PolarityTable,
    polar_t: &BTreeSet<String>,
    per_word: fn(Polarity, Polarity) -> f64,
) -> Result<f64> {
    let common: Vec<&String> = polar_s.intersection(polar_t).collect();
    if common.is_empty() {
        return Err(unrankable(metric, &table_s.domain_id, &table_t.domain_id, "no common polar words"));
    }
    let j = jaccard(common.len(), polar_s.len(), polar_t.len())?;
    let mut sum = 0.0;
    for w in &common {
        let (Some(a), Some(b)) = (table_s.get(w), table_t.get(w)) else {
            return Err(Error::Invariant(format!("polar word {w:?} missing from its polarity table")));
        };
        sum += per_word(a, b);
    }
    Ok(sum / common.len() as f64 + 1.0 / j)
}

/// LM2 with the default polar threshold.
pub fn lm2_skld(table_s: &PolarityTable, table_t: &PolarityTable) -> Result<f64> {
    lm2_skld_polar(
        table_s,
        &polar_words(table_s, DEFAULT_POLAR_THRESHOLD),
        table_t,
        &polar_words(table_t, DEFAULT_POLAR_THRESHOLD),
    )
}

pub fn lm2_skld_polar(
    table_s: &PolarityTable,
    polar_s: &BTreeSet<String>,
    table_t: &PolarityTable,
    polar_t: &BTreeSet<String>,
) -> Result<f64> {
    polar_pair_score(MetricId::Lm2, table_s, polar_s, table_t, polar_t, word_skld)
}

/// LM3 with the default polar threshold.
pub fn lm3_chameleon(table_s: &PolarityTable, table_t: &PolarityTable) -> Result<f64> {
    lm3_chameleon_polar(
        table_s,
        &polar_words(table_s, DEFAULT_POLAR_THRESHOLD),
        table_t,
        &polar_words(table_t, DEFAULT_POLAR_THRESHOLD),
    )
}

pub fn lm3_chameleon_polar(
    table_s: &PolarityTable,
    polar_s: &BTreeSet<String>,
    table_t: &PolarityTable,
    polar_t: &BTreeSet<String>,
) -> Result<f64> {
    polar_pair_score(MetricId::Lm3, table_s, polar_s, table_t, polar_t, word_l1)
}

/// Accumulates the weighted entropy terms for one order.
struct EntropyAcc<'a> {
    polar: HashSet<&'a str>,
    order: usize,
    weight: f64,
    total: f64,
    polar_sum: f64,
    other_sum: f64,
}

impl<'a> EntropyAcc<'a> {
    fn new(polar: &'a BTreeSet<String>, order: usize, weight: f64, total: u64) -> Self {
        Self {
            polar: polar.iter().map(String::as_str).collect(),
            order,
            weight,
            total: total as f64,
            polar_sum: 0.0,
            other_sum: 0.0,
        }
    }

    fn add(&mut self, gram: &str, count: u64) {
        let is_polar = gram.split(' ').any(|w| self.polar.contains(w));
        if self.order == 1 && !is_polar {
            return;
        }
        // count >= 1, so p > 0 and needs no clamp
        let p = count as f64 / self.total;
        let term = -p * p.ln();
        if is_polar {
            self.polar_sum += term;
        } else {
            self.other_sum += term;
        }
    }

    fn finish(self) -> f64 {
        self.polar_sum * self.weight + self.other_sum / self.weight
    }
}

/// Weighted entropy of one n-gram order. N-grams containing a polar word are
/// weighted by `weight`, the rest by `1/weight`; for unigrams only polar
/// words contribute.
pub fn weighted_entropy(corpus: &Corpus, polar: &BTreeSet<String>, order: usize, weight: f64) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Invalid("weighted_entropy of an empty corpus".into()));
    }
    let grams = corpus.ngrams(order)?;
    let total = corpus.ngram_total(order)?;
    let mut acc = EntropyAcc::new(polar, order, weight, total);
    for (g, &c) in grams {
        acc.add(g, c);
    }
    Ok(acc.finish())
}

/// Weighted entropy of the concatenation of two corpora without building it.
fn mixed_weighted_entropy(a: &Corpus, b: &Corpus, polar: &BTreeSet<String>, order: usize, weight: f64) -> Result<f64> {
    let total = a.ngram_total(order)? + b.ngram_total(order)?;
    let mut acc = EntropyAcc::new(polar, order, weight, total);
    for (g, c) in merge_counts(a.ngrams(order)?, b.ngrams(order)?) {
        acc.add(g, c);
    }
    Ok(acc.finish())
}

/// Sorted union of two count maps with counts summed.
fn merge_counts<'a>(
    a: &'a BTreeMap<String, u64>,
    b: &'a BTreeMap<String, u64>,
) -> impl Iterator<Item = (&'a str, u64)> + 'a {
    let mut ia = a.iter().peekable();
    let mut ib = b.iter().peekable();
    std::iter::from_fn(move || match (ia.peek(), ib.peek()) {
        (Some((ka, _)), Some((kb, _))) => match ka.cmp(kb) {
            std::cmp::Ordering::Less => ia.next().map(|(k, c)| (k.as_str(), *c)),
            std::cmp::Ordering::Greater => ib.next().map(|(k, c)| (k.as_str(), *c)),
            std::cmp::Ordering::Equal => {
                let (k, ca) = ia.next()?;
                let (_, cb) = ib.next()?;
                Some((k.as_str(), ca + cb))
            }
        },
        (Some(_), None) => ia.next().map(|(k, c)| (k.as_str(), *c)),
        (None, Some(_)) => ib.next().map(|(k, c)| (k.as_str(), *c)),
        (None, None) => None,
    })
}

/// Sum of the per-order weighted entropies.
pub fn combined_entropy(corpus: &Corpus, polar: &BTreeSet<String>, weights: &[f64; MAX_ORDER]) -> Result<f64> {
    (1..=MAX_ORDER).map(|o| weighted_entropy(corpus, polar, o, weights[o - 1])).sum()
}

fn combined_mixed_entropy(a: &Corpus, b: &Corpus, polar: &BTreeSet<String>, weights: &[f64; MAX_ORDER]) -> Result<f64> {
    (1..=MAX_ORDER).map(|o| mixed_weighted_entropy(a, b, polar, o, weights[o - 1])).sum()
}

fn entropy_change(e_before: f64, e_after: f64) -> f64 {
    (e_after - e_before).abs() / e_before * 100.0
}

/// LM4: percentage entropy change of `source` after mixing in `target`,
/// using the source's polar words (default thresholds and weights).
pub fn lm4_entropy_change(source: &Corpus, target: &Corpus) -> Result<f64> {
    let cfg = LabelledConfig::default();
    let table = polarity_table_with(source, cfg.polarity_min_count, cfg.probability_mode);
    let polar = polar_words(&table, cfg.polar_threshold);
    let before = combined_entropy(source, &polar, &cfg.entropy_weights)?;
    lm4_with(source, &polar, before, target, &cfg.entropy_weights)
}

fn lm4_with(
    source: &Corpus,
    polar: &BTreeSet<String>,
    before: f64,
    target: &Corpus,
    weights: &[f64; MAX_ORDER],
) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::Invalid("lm4 needs a non-empty target".into()));
    }
    if before <= 0.0 {
        return Err(unrankable(MetricId::Lm4, &source.domain_id, &target.domain_id, "source entropy is zero"));
    }
    let after = combined_mixed_entropy(source, target, polar, weights)?;
    Ok(entropy_change(before, after))
}

/// Per-domain statistics reused across all pairs.
#[derive(Debug, Clone)]
pub struct DomainProfile<'a> {
    pub corpus: &'a Corpus,
    pub polarity: PolarityTable,
    pub polar: BTreeSet<String>,
    pub significant: SignificantWordSet,
    pub entropy: f64,
}

impl<'a> DomainProfile<'a> {
    pub fn build(corpus: &'a Corpus, cfg: &LabelledConfig) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Invalid(format!("{}: empty corpus", corpus.domain_id)));
        }
        let polarity = polarity_table_with(corpus, cfg.polarity_min_count, cfg.probability_mode);
        let polar = polar_words(&polarity, cfg.polar_threshold);
        let significant = significant_words(corpus, cfg.significant_min_count, cfg.significant_min_chi2);
        let entropy = combined_entropy(corpus, &polar, &cfg.entropy_weights)?;
        Ok(Self { corpus, polarity, polar, significant, entropy })
    }

    pub fn domain_id(&self) -> &str {
        &self.corpus.domain_id
    }
}

pub fn build_profiles<'a>(corpora: &'a [Corpus], cfg: &LabelledConfig, exec: Exec) -> Result<Vec<DomainProfile<'a>>> {
    exec.map_range(corpora.len(), |i| DomainProfile::build(&corpora[i], cfg)).into_iter().collect()
}

/// One labelled metric for an ordered pair of profiles; unrankable pairs
/// come back as `Ok(None)`.
pub fn pair_value(
    metric: MetricId,
    s: &DomainProfile<'_>,
    t: &DomainProfile<'_>,
    cfg: &LabelledConfig,
) -> Result<Option<f64>> {
    let r = match metric {
        MetricId::Lm1 => Ok(lm1_overlap(&s.significant, &t.significant) as f64),
        MetricId::Lm2 => lm2_skld_polar(&s.polarity, &s.polar, &t.polarity, &t.polar),
        MetricId::Lm3 => lm3_chameleon_polar(&s.polarity, &s.polar, &t.polarity, &t.polar),
        MetricId::Lm4 => lm4_with(s.corpus, &s.polar, s.entropy, t.corpus, &cfg.entropy_weights),
        other => return Err(Error::Invalid(format!("{other} is not a labelled metric"))),
    };
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Unrankable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// All ordered `(source, target)` pairs, source-major. Symmetric metrics are
/// evaluated once per unordered pair and mirrored.
pub fn labelled_matrix(
    metric: MetricId,
    profiles: &[DomainProfile<'_>],
    cfg: &LabelledConfig,
    exec: Exec,
) -> Result<Vec<MetricResult>> {
    crate::metric::pairwise(
        metric,
        profiles.len(),
        exec,
        |i, j| pair_value(metric, &profiles[i], &profiles[j], cfg),
        |i| profiles[i].domain_id().to_string(),
    )
}
