//! Cross-domain accuracy matrices: loading, a small reference classifier to
//! generate them, and the per-domain recommendation chart.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Label, Review};
use crate::error::{Error, Result};
use crate::par::Exec;

/// The published 20-domain accuracy matrix (rows: source, columns: target).
pub const TABLE1_CSV: &str = include_str!("../data/table1_accuracy.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMatrix {
    pub domains: Vec<String>,
    /// `acc[s][t]`: accuracy (%) of a model trained on `s`, tested on `t`.
    pub acc: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(domains: Vec<String>, acc: Vec<Vec<f64>>) -> Result<Self> {
        let n = domains.len();
        if n < 2 {
            return Err(Error::Invalid("accuracy matrix needs at least two domains".into()));
        }
        if acc.len() != n || acc.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid(format!("accuracy matrix is not {n}x{n}")));
        }
        for (s, row) in acc.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                if !(0.0..=100.0).contains(v) {
                    return Err(Error::Invalid(format!(
                        "accuracy {v} for ({}, {}) outside [0, 100]",
                        domains[s], domains[t]
                    )));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(d) = domains.iter().find(|d| !seen.insert(d.as_str())) {
            return Err(Error::Invalid(format!("duplicate domain {d}")));
        }
        Ok(Self { domains, acc })
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn index_of(&self, domain: &str) -> Option<usize> {
        self.domains.iter().position(|d| d == domain)
    }

    pub fn get(&self, source: usize, target: usize) -> f64 {
        self.acc[source][target]
    }

    pub fn table1() -> Self {
        Self::read_csv(TABLE1_CSV.as_bytes()).expect("bundled accuracy fixture is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f).map_err(|e| match e {
            Error::Invalid(m) => Error::Invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Header `<label>,D1,..,Dn`, then one row per source domain. Rows may
    /// come in any order but must cover exactly the header's domains.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
        let header = rdr.headers()?.clone();
        let domains: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let n = domains.len();
        let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(i + 2, |p| p.line() as usize);
            let name = rec.get(0).unwrap_or("").trim().to_string();
            if rec.len() != n + 1 {
                return Err(Error::Invalid(format!(
                    "line {line}: row {name:?} has {} cells, expected {n}",
                    rec.len().saturating_sub(1)
                )));
            }
            let mut vals = Vec::with_capacity(n);
            for (j, cell) in rec.iter().skip(1).enumerate() {
                let cell = cell.trim();
                if cell.is_empty() {
                    return Err(Error::Invalid(format!("line {line}: missing cell for target {}", domains[j])));
                }
                let v: f64 =
                    cell.parse().map_err(|_| Error::Invalid(format!("line {line}: {cell:?} is not a number")))?;
                vals.push(v);
            }
            if rows.insert(name.clone(), vals).is_some() {
                return Err(Error::Invalid(format!("line {line}: duplicate row {name}")));
            }
        }
        if rows.len() != n {
            return Err(Error::Invalid(format!("{} rows for {n} columns; matrix must be square", rows.len())));
        }
        let mut acc = Vec::with_capacity(n);
        for d in &domains {
            acc.push(rows.remove(d).ok_or_else(|| Error::Invalid(format!("no row for column domain {d}")))?);
        }
        Self::new(domains, acc)
    }

    /// Cells with two decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["source".to_string()];
        header.extend(self.domains.iter().cloned());
        w.write_record(&header)?;
        for (d, row) in self.domains.iter().zip(&self.acc) {
            let mut rec = vec![d.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.2}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartRow {
    pub domain_id: String,
    pub in_domain_acc: f64,
    /// Mean accuracy lost when this domain is the source.
    pub avg_degradation: f64,
    pub best_source: String,
    pub best_target: String,
}

/// Reference accuracy for the degradation of a `(source, target)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegradationBase {
    /// `acc[s][s] − acc[s][t]`: loss relative to the source's own in-domain
    /// accuracy. Reproduces the published chart.
    #[default]
    SourceInDomain,
    /// `acc[t][t] − acc[s][t]`.
    TargetInDomain,
}

pub fn chart(matrix: &AccuracyMatrix) -> Vec<ChartRow> {
    chart_with(matrix, DegradationBase::SourceInDomain)
}

/// Index of the maximum over `0..n` except `skip`; ties go to the lower index.
fn argmax_except(n: usize, skip: usize, value: impl Fn(usize) -> f64) -> usize {
    let mut best = None;
    for i in (0..n).filter(|&i| i != skip) {
        match best {
            Some((_, v)) if value(i) <= v => {}
            _ => best = Some((i, value(i))),
        }
    }
    best.map(|(i, _)| i).expect("matrix has at least two domains")
}

pub fn chart_with(matrix: &AccuracyMatrix, base: DegradationBase) -> Vec<ChartRow> {
    let n = matrix.len();
    (0..n)
        .map(|d| {
            let loss: f64 = (0..n)
                .filter(|&t| t != d)
                .map(|t| {
                    let reference = match base {
                        DegradationBase::SourceInDomain => matrix.get(d, d),
                        DegradationBase::TargetInDomain => matrix.get(t, t),
                    };
                    reference - matrix.get(d, t)
                })
                .sum();
            ChartRow {
                domain_id: matrix.domains[d].clone(),
                in_domain_acc: matrix.get(d, d),
                avg_degradation: loss / (n - 1) as f64,
                best_source: matrix.domains[argmax_except(n, d, |s| matrix.get(s, d))].clone(),
                best_target: matrix.domains[argmax_except(n, d, |t| matrix.get(d, t))].clone(),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub splits: usize,
    /// Test split size when the corpus is large enough (5 x 2000 = 10,000).
    pub split_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub hash_bits: u32,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { splits: 5, split_size: 2000, epochs: 5, learning_rate: 0.1, l2: 1e-6, hash_bits: 18, seed: 42 }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub matrix: AccuracyMatrix,
    /// Warnings raised while building the splits.
    pub notes: Vec<String>,
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Hashed bag-of-words logistic regression.
struct LogisticModel {
    weights: Vec<f64>,
    bias: f64,
    mask: u64,
}

impl LogisticModel {
    fn features(&self, review: &Review) -> Vec<usize> {
        let mut f: Vec<usize> = review.tokens.iter().map(|t| (fnv1a(t) & self.mask) as usize).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    fn logit(&self, feats: &[usize]) -> f64 {
        self.bias + feats.iter().map(|&i| self.weights[i]).sum::<f64>()
    }

    fn train(reviews: &[&Review], cfg: &BaselineConfig, seed: u64) -> Self {
        let mask = (1u64 << cfg.hash_bits) - 1;
        let mut model = Self { weights: vec![0.0; 1 << cfg.hash_bits], bias: 0.0, mask };
        let encoded: Vec<(Vec<usize>, f64)> =
            reviews.iter().map(|r| (model.features(r), if r.label == Label::Positive { 1.0 } else { 0.0 })).collect();
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let lr = cfg.learning_rate / (1.0 + epoch as f64);
            for &i in &order {
                let (feats, y) = &encoded[i];
                let p = 1.0 / (1.0 + (-model.logit(feats)).exp());
                let g = p - y;
                for &f in feats {
                    let w = &mut model.weights[f];
                    *w -= lr * (g + cfg.l2 * *w);
                }
                model.bias -= lr * g;
            }
        }
        model
    }

    fn predict(&self, review: &Review) -> Label {
        if self.logit(&self.features(review)) >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    fn accuracy(&self, reviews: &[&Review]) -> f64 {
        let hits = reviews.iter().filter(|r| self.predict(r) == r.label).count();
        100.0 * hits as f64 / reviews.len() as f64
    }
}

/// Seeded shuffled partition of a corpus into `splits` test folds.
fn folds<'a>(
    corpus: &'a Corpus,
    cfg: &BaselineConfig,
    seed: u64,
    notes: &mut Vec<String>,
) -> Result<Vec<Vec<&'a Review>>> {
    let n = corpus.len();
    let size = if n >= cfg.splits * cfg.split_size {
        cfg.split_size
    } else {
        let size = n / cfg.splits;
        if size == 0 {
            return Err(Error::Invalid(format!(
                "{}: {n} review(s) cannot form {} splits",
                corpus.domain_id, cfg.splits
            )));
        }
        notes.push(format!(
            "{}: {n} reviews < {} x {}; using {} splits of {size}",
            corpus.domain_id, cfg.splits, cfg.split_size, cfg.splits
        ));
        size
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(idx[..size * cfg.splits].chunks(size).map(|c| c.iter().map(|&i| &corpus.reviews[i]).collect()).collect())
}

fn check_balance(corpus: &Corpus, notes: &mut Vec<String>) -> Result<()> {
    let (pos, neg) = corpus.label_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::Invalid(format!("{}: needs both positive and negative reviews", corpus.domain_id)));
    }
    if pos != neg {
        notes.push(format!("{}: labels unbalanced ({pos} positive, {neg} negative)", corpus.domain_id));
    }
    Ok(())
}

/// Builds an accuracy matrix with a hashed-unigram logistic model. The
/// diagonal is k-fold in-domain accuracy; off-diagonal cells train on the
/// whole source and average accuracy over the target's test splits.
pub fn train_eval_baseline(corpora: &[Corpus], cfg: &BaselineConfig, exec: Exec) -> Result<BaselineRun> {
    if corpora.len() < 2 {
        return Err(Error::Invalid("baseline needs at least two corpora".into()));
    }
    if cfg.splits < 2 {
        return Err(Error::Invalid("baseline needs at least two splits".into()));
    }
    let mut notes = Vec::new();
    let mut all_folds = Vec::with_capacity(corpora.len());
    for (i, c) in corpora.iter().enumerate() {
        check_balance(c, &mut notes)?;
        all_folds.push(folds(c, cfg, cfg.seed.wrapping_add(i as u64), &mut notes)?);
    }
    for note in &notes {
        log::warn!("{note}");
    }

    let rows: Vec<Result<Vec<f64>>> = exec.map_range(corpora.len(), |s| {
        let source = &corpora[s];
        let model_seed = cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(s as u64 + 1));
        let mut row = vec![0.0; corpora.len()];

        let mut in_domain = 0.0;
        for (f, test) in all_folds[s].iter().enumerate() {
            let train: Vec<&Review> = all_folds[s]
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            in_domain += LogisticModel::train(&train, cfg, model_seed.wrapping_add(f as u64)).accuracy(test);
        }
        row[s] = in_domain / cfg.splits as f64;

        let full: Vec<&Review> = source.reviews.iter().collect();
        let model = LogisticModel::train(&full, cfg, model_seed);
        for (t, target_folds) in all_folds.iter().enumerate().filter(|(t, _)| *t != s) {
            row[t] = target_folds.iter().map(|fold| model.accuracy(fold)).sum::<f64>() / cfg.splits as f64;
        }
        Ok(row)
    });
    let acc = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let matrix = AccuracyMatrix::new(corpora.iter().map(|c| c.domain_id.clone()).collect(), acc)?;
    Ok(BaselineRun { matrix, notes })
}
