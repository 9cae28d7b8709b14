//! Metric identifiers and per-pair results shared by the metric modules.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricId {
    Lm1,
    Lm2,
    Lm3,
    Lm4,
    Ulm1,
    Ulm2,
    Ulm3,
    Ulm4,
    Ulm5,
    Ulm6,
    Ulm7,
    Ngram,
}

/// How a word- or sentence-vector metric is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorKind {
    /// Per-word vectors compared over common adjectives.
    Word,
    /// Review vectors, last qualifying reviews held out.
    SentenceHeldOut,
    /// Review vectors, top reviews by absolute lexicon score.
    SentenceTopScore,
}

impl MetricId {
    pub const ALL: [MetricId; 12] = [
        MetricId::Lm1,
        MetricId::Lm2,
        MetricId::Lm3,
        MetricId::Lm4,
        MetricId::Ulm1,
        MetricId::Ulm2,
        MetricId::Ulm3,
        MetricId::Ulm4,
        MetricId::Ulm5,
        MetricId::Ulm6,
        MetricId::Ulm7,
        MetricId::Ngram,
    ];

    pub const LABELLED: [MetricId; 4] = [MetricId::Lm1, MetricId::Lm2, MetricId::Lm3, MetricId::Lm4];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Lm1 => "LM1",
            MetricId::Lm2 => "LM2",
            MetricId::Lm3 => "LM3",
            MetricId::Lm4 => "LM4",
            MetricId::Ulm1 => "ULM1",
            MetricId::Ulm2 => "ULM2",
            MetricId::Ulm3 => "ULM3",
            MetricId::Ulm4 => "ULM4",
            MetricId::Ulm5 => "ULM5",
            MetricId::Ulm6 => "ULM6",
            MetricId::Ulm7 => "ULM7",
            MetricId::Ngram => "NGRAM",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            MetricId::Lm2 | MetricId::Lm3 | MetricId::Lm4 => Direction::LowerIsMoreSimilar,
            _ => Direction::HigherIsMoreSimilar,
        }
    }

    pub fn is_symmetric(self) -> bool {
        self != MetricId::Lm4
    }

    /// `None` for the labelled metrics and the n-gram overlap.
    pub fn vector_kind(self) -> Option<VectorKind> {
        match self {
            MetricId::Ulm1 | MetricId::Ulm3 | MetricId::Ulm4 | MetricId::Ulm6 => Some(VectorKind::Word),
            MetricId::Ulm2 | MetricId::Ulm5 => Some(VectorKind::SentenceHeldOut),
            MetricId::Ulm7 => Some(VectorKind::SentenceTopScore),
            _ => None,
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == up)
            .ok_or_else(|| Error::Invalid(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsMoreSimilar,
    LowerIsMoreSimilar,
}

/// One metric value for an ordered `(source, target)` pair. `value` is
/// `None` when the pair is unrankable (no common polar words, zero entropy,
/// degenerate mean vector, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub metric: MetricId,
    pub source: String,
    pub target: String,
    pub value: Option<f64>,
}

impl MetricResult {
    pub fn direction(&self) -> Direction {
        self.metric.direction()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    metric_id: String,
    source: String,
    target: String,
    value: Option<f64>,
    direction: Direction,
}

/// Writes `metric_id,source,target,value,direction`. Unrankable pairs get an
/// empty value cell.
pub fn write_results_csv<W: Write>(results: &[MetricResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(Row {
            metric_id: r.metric.to_string(),
            source: r.source.clone(),
            target: r.target.clone(),
            value: r.value,
            direction: r.direction(),
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<MetricResult>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        let metric: MetricId = row.metric_id.parse()?;
        if metric.direction() != row.direction {
            return Err(Error::Invalid(format!(
                "{metric}: direction column {:?} contradicts the metric",
                row.direction
            )));
        }
        out.push(MetricResult { metric, source: row.source, target: row.target, value: row.value });
    }
    Ok(out)
}

/// Shared driver for pairwise metric tables.
pub(crate) fn pairwise<F, N>(metric: MetricId, n: usize, exec: Exec, value: F, name: N) -> Result<Vec<MetricResult>>
where
    F: Fn(usize, usize) -> Result<Option<f64>> + Sync + Send,
    N: Fn(usize) -> String,
{
    let pairs: Vec<(usize, usize)> = if metric.is_symmetric() {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect()
    };
    let values = exec.map(&pairs, |&(i, j)| value(i, j));
    let mut cell: BTreeMap<(usize, usize), Option<f64>> = BTreeMap::new();
    for (&(i, j), v) in pairs.iter().zip(values) {
        let v = v?;
        cell.insert((i, j), v);
        if metric.is_symmetric() {
            cell.insert((j, i), v);
        }
    }
    Ok(cell
        .into_iter()
        .map(|((i, j), value)| MetricResult { metric, source: name(i), target: name(j), value })
        .collect())
}
