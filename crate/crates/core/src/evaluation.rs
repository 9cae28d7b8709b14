//! Source-domain rankings and how well they agree with the accuracy matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use crate::baseline::{chart, AccuracyMatrix, ChartRow};
use crate::error::{Error, Result};
use crate::metric::{Direction, MetricId, MetricResult};
use crate::par::Exec;

pub const DEFAULT_KS: [usize; 4] = [3, 5, 7, 10];

/// Candidate sources for one target, best first. `metric` is `None` for the
/// ground-truth ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub target: String,
    pub metric: Option<MetricId>,
    pub order: Vec<String>,
}

fn sort_candidates(mut cands: Vec<(usize, Option<f64>)>, direction: Direction) -> Vec<usize> {
    cands.sort_by(|(ia, va), (ib, vb)| {
        let by_value = match (va, vb) {
            (Some(a), Some(b)) => match direction {
                Direction::HigherIsMoreSimilar => b.total_cmp(a),
                Direction::LowerIsMoreSimilar => a.total_cmp(b),
            },
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        by_value.then(ia.cmp(ib))
    });
    cands.into_iter().map(|(i, _)| i).collect()
}

/// Orders every domain except `target` by the metric's values for
/// `(source, target)`. Unrankable pairs go last; ties go to the domain that
/// comes first in `domains`.
pub fn rank_sources(results: &[MetricResult], target: &str, domains: &[String]) -> Result<RankedList> {
    let metric = results.first().map(|r| r.metric).ok_or_else(|| Error::Invalid("no metric results to rank".into()))?;
    if let Some(r) = results.iter().find(|r| r.metric != metric) {
        return Err(Error::Invalid(format!("mixed metrics {metric} and {} in one ranking", r.metric)));
    }
    if !domains.iter().any(|d| d == target) {
        return Err(Error::DomainMismatch(format!("target {target} not among the domains")));
    }
    let by_source: HashMap<&str, Option<f64>> =
        results.iter().filter(|r| r.target == target).map(|r| (r.source.as_str(), r.value)).collect();
    let mut cands = Vec::with_capacity(domains.len() - 1);
    for (i, s) in domains.iter().enumerate().filter(|(_, s)| *s != target) {
        let v = by_source
            .get(s.as_str())
            .ok_or_else(|| Error::Invalid(format!("{metric}: missing pair ({s}, {target})")))?;
        cands.push((i, *v));
    }
    Ok(RankedList {
        target: target.to_string(),
        metric: Some(metric),
        order: sort_candidates(cands, metric.direction()).into_iter().map(|i| domains[i].clone()).collect(),
    })
}

/// Sources ordered by their accuracy on `target`, highest first.
pub fn truth_ranking(matrix: &AccuracyMatrix, target: &str) -> Result<RankedList> {
    let t = matrix
        .index_of(target)
        .ok_or_else(|| Error::DomainMismatch(format!("target {target} not in accuracy matrix")))?;
    let cands = (0..matrix.len()).filter(|&s| s != t).map(|s| (s, Some(matrix.get(s, t)))).collect();
    Ok(RankedList {
        target: target.to_string(),
        metric: None,
        order: sort_candidates(cands, Direction::HigherIsMoreSimilar)
            .into_iter()
            .map(|i| matrix.domains[i].clone())
            .collect(),
    })
}

fn check_pair(pred: &RankedList, truth: &RankedList, k: usize) -> Result<()> {
    if pred.target != truth.target {
        return Err(Error::Invalid(format!("rankings for different targets: {} vs {}", pred.target, truth.target)));
    }
    let a: BTreeSet<&String> = pred.order.iter().collect();
    let b: BTreeSet<&String> = truth.order.iter().collect();
    if a != b {
        return Err(Error::DomainMismatch(format!("rankings for {} cover different domains", pred.target)));
    }
    if k == 0 || k > truth.order.len() {
        return Err(Error::KOutOfRange { k, max: truth.order.len() });
    }
    Ok(())
}

/// Size of the intersection of the two top-`k` sets.
pub fn precision_at_k(pred: &RankedList, truth: &RankedList, k: usize) -> Result<usize> {
    check_pair(pred, truth, k)?;
    let top: BTreeSet<&String> = truth.order[..k].iter().collect();
    Ok(pred.order[..k].iter().filter(|d| top.contains(d)).count())
}

/// Number of positions within the top `k` where both rankings agree.
pub fn ranking_accuracy(pred: &RankedList, truth: &RankedList, k: usize) -> Result<usize> {
    check_pair(pred, truth, k)?;
    Ok(pred.order[..k].iter().zip(&truth.order[..k]).filter(|(a, b)| a == b).count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetScore {
    pub target: String,
    pub precision: usize,
    pub ranking_accuracy: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: MetricId,
    pub k: usize,
    /// Total top-K intersections over all targets.
    pub hits: usize,
    /// Total exact-position matches over all targets.
    pub correct: usize,
    pub precision_pct: f64,
    pub nra: f64,
    pub per_target: Vec<TargetScore>,
}

/// Scores one metric's rankings against the truth for every target of the
/// matrix: `precision_pct = 100·Σ hits / (N·K)`, `nra = Σ correct / (N·K)`.
pub fn aggregate(metric: MetricId, matrix: &AccuracyMatrix, preds: &[RankedList], k: usize) -> Result<EvalReport> {
    let n = matrix.len();
    if k == 0 || k > n - 1 {
        return Err(Error::KOutOfRange { k, max: n - 1 });
    }
    let by_target: HashMap<&str, &RankedList> = preds.iter().map(|p| (p.target.as_str(), p)).collect();
    let mut per_target = Vec::with_capacity(n);
    for target in &matrix.domains {
        let pred = by_target
            .get(target.as_str())
            .ok_or_else(|| Error::Invalid(format!("{metric}: no ranking for target {target}")))?;
        let truth = truth_ranking(matrix, target)?;
        per_target.push(TargetScore {
            target: target.clone(),
            precision: precision_at_k(pred, &truth, k)?,
            ranking_accuracy: ranking_accuracy(pred, &truth, k)?,
        });
    }
    let hits: usize = per_target.iter().map(|t| t.precision).sum();
    let correct: usize = per_target.iter().map(|t| t.ranking_accuracy).sum();
    let denom = (n * k) as f64;
    Ok(EvalReport {
        metric,
        k,
        hits,
        correct,
        precision_pct: 100.0 * hits as f64 / denom,
        nra: correct as f64 / denom,
        per_target,
    })
}

/// Every target's ranking under one metric, in matrix domain order.
pub fn rank_all(results: &[MetricResult], domains: &[String]) -> Result<Vec<RankedList>> {
    domains.iter().map(|t| rank_sources(results, t, domains)).collect()
}

#[derive(Debug, Clone)]
pub struct RecommendationReport {
    pub chart: Vec<ChartRow>,
    pub ks: Vec<usize>,
    /// Metric-major, then by K.
    pub evals: Vec<EvalReport>,
}

fn check_domains(metric: MetricId, matrix: &AccuracyMatrix, results: &[MetricResult]) -> Result<()> {
    let want: BTreeSet<&str> = matrix.domains.iter().map(String::as_str).collect();
    let got: BTreeSet<&str> = results.iter().flat_map(|r| [r.source.as_str(), r.target.as_str()]).collect();
    if want != got {
        let missing: Vec<&str> = want.difference(&got).copied().collect();
        let extra: Vec<&str> = got.difference(&want).copied().collect();
        return Err(Error::DomainMismatch(format!(
            "{metric}: domains missing from metric results: {missing:?}; not in accuracy matrix: {extra:?}"
        )));
    }
    Ok(())
}

/// Chart plus one [`EvalReport`] per metric and K.
pub fn recommendation_report(
    matrix: &AccuracyMatrix,
    metrics: &BTreeMap<MetricId, Vec<MetricResult>>,
    ks: &[usize],
    exec: Exec,
) -> Result<RecommendationReport> {
    let n = matrix.len();
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n - 1) {
        return Err(Error::KOutOfRange { k, max: n - 1 });
    }
    let work: Vec<(&MetricId, &Vec<MetricResult>)> = metrics.iter().collect();
    let per_metric = exec.map(&work, |(metric, results)| -> Result<Vec<EvalReport>> {
        check_domains(**metric, matrix, results)?;
        let preds = rank_all(results, &matrix.domains)?;
        ks.iter().map(|&k| aggregate(**metric, matrix, &preds, k)).collect()
    });
    let mut evals = Vec::new();
    for r in per_metric {
        evals.extend(r?);
    }
    Ok(RecommendationReport { chart: chart(matrix), ks: ks.to_vec(), evals })
}

impl RecommendationReport {
    pub fn write_chart_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["domain", "in_domain_acc", "avg_degradation", "best_source", "best_target"])?;
        for r in &self.chart {
            w.write_record([
                r.domain_id.clone(),
                format!("{:.2}", r.in_domain_acc),
                format!("{:.2}", r.avg_degradation),
                r.best_source.clone(),
                r.best_target.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// `metric_id,K,precision_pct,nra` at full precision.
    pub fn write_eval_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric_id", "K", "precision_pct", "nra"])?;
        for e in &self.evals {
            w.write_record([e.metric.to_string(), e.k.to_string(), e.precision_pct.to_string(), e.nra.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_per_target_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric_id", "K", "target", "precision", "ranking_accuracy"])?;
        for e in &self.evals {
            for t in &e.per_target {
                w.write_record([
                    e.metric.to_string(),
                    e.k.to_string(),
                    t.target.clone(),
                    t.precision.to_string(),
                    t.ranking_accuracy.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn chart_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("| Domain | In-Domain Accuracy (%) | Avg CDSA Degradation (%) | Best Source | Best Target |\n");
        s.push_str("|---|---:|---:|---|---|\n");
        for r in &self.chart {
            let _ = writeln!(
                s,
                "| {} | {:.2} | {:.2} | {} | {} |",
                r.domain_id, r.in_domain_acc, r.avg_degradation, r.best_source, r.best_target
            );
        }
        s
    }

    pub fn eval_markdown(&self) -> String {
        if self.evals.is_empty() {
            return "_No metric results supplied; evaluation section omitted._\n".to_string();
        }
        let mut s = String::from("| Metric |");
        for k in &self.ks {
            let _ = write!(s, " Top {k} Precision (%) | Top {k} NRA |");
        }
        s.push('\n');
        s.push_str("|---|");
        s.push_str(&"---:|---:|".repeat(self.ks.len()));
        s.push('\n');
        let mut metrics: Vec<MetricId> = self.evals.iter().map(|e| e.metric).collect();
        metrics.dedup();
        for m in metrics {
            let _ = write!(s, "| {m} |");
            for k in &self.ks {
                if let Some(e) = self.evals.iter().find(|e| e.metric == m && e.k == *k) {
                    let _ = write!(s, " {:.2} | {:.3} |", e.precision_pct, e.nra);
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn markdown(&self) -> String {
        format!(
            "## Recommendation chart\n\n{}\n## Source ranking quality\n\n{}",
            self.chart_markdown(),
            self.eval_markdown()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn results(metric: MetricId, target: &str, vals: &[(&str, Option<f64>)]) -> Vec<MetricResult> {
        vals.iter()
            .map(|(s, v)| MetricResult { metric, source: s.to_string(), target: target.into(), value: *v })
            .collect()
    }

    fn list(target: &str, order: &[&str]) -> RankedList {
        RankedList { target: target.into(), metric: None, order: names(order) }
    }

    #[test]
    fn ranking_directions_and_ties() {
        let d = names(&["A", "B", "C", "D"]);
        let r = results(MetricId::Lm2, "A", &[("B", Some(1.2)), ("C", Some(3.0)), ("D", Some(2.0))]);
        assert_eq!(rank_sources(&r, "A", &d).unwrap().order, names(&["B", "D", "C"]));

        let d3 = names(&["A", "B", "C"]);
        let r = results(MetricId::Ulm1, "A", &[("B", Some(1.9)), ("C", Some(1.2))]);
        assert_eq!(rank_sources(&r, "A", &d3).unwrap().order, names(&["B", "C"]));
        let r = results(MetricId::Ulm1, "A", &[("C", Some(1.0)), ("B", Some(1.0))]);
        assert_eq!(rank_sources(&r, "A", &d3).unwrap().order, names(&["B", "C"]));

        let r = results(MetricId::Lm3, "A", &[("B", None), ("C", Some(9.0)), ("D", None)]);
        assert_eq!(rank_sources(&r, "A", &d).unwrap().order, names(&["C", "B", "D"]));

        let r = results(MetricId::Lm3, "A", &[("B", Some(1.0))]);
        assert!(rank_sources(&r, "A", &d).is_err());
    }

    #[test]
    fn truth_examples() {
        let m = AccuracyMatrix::new(
            names(&["A", "B", "C"]),
            vec![vec![90.0, 1.0, 1.0], vec![70.0, 90.0, 1.0], vec![80.0, 1.0, 90.0]],
        )
        .unwrap();
        assert_eq!(truth_ranking(&m, "A").unwrap().order, names(&["C", "B"]));
        let eq = AccuracyMatrix::new(
            names(&["A", "B", "C"]),
            vec![vec![90.0, 1.0, 1.0], vec![70.0, 90.0, 1.0], vec![70.0, 1.0, 90.0]],
        )
        .unwrap();
        assert_eq!(truth_ranking(&eq, "A").unwrap().order, names(&["B", "C"]));
        let t1 = AccuracyMatrix::table1();
        assert_eq!(truth_ranking(&t1, "D1").unwrap().order[0], "D10");
    }

    #[test]
    fn precision_and_ra_examples() {
        let all = ["B", "C", "D", "E", "F", "G"];
        let t = list("A", &all);
        assert_eq!(precision_at_k(&t, &t, 5).unwrap(), 5);
        assert_eq!(ranking_accuracy(&t, &t, 5).unwrap(), 5);

        let p = list("A", &["E", "F", "G", "B", "C", "D"]);
        let q = list("A", &["B", "C", "D", "E", "F", "G"]);
        assert_eq!(precision_at_k(&p, &q, 3).unwrap(), 0);

        let p = list("A", &["B", "C", "D", "E", "F", "G"]);
        let q = list("A", &["C", "E", "B", "D", "F", "G"]);
        assert_eq!(precision_at_k(&p, &q, 3).unwrap(), 2);

        let p = list("A", &["B", "C", "D", "E"]);
        let q = list("A", &["B", "D", "C", "E"]);
        assert_eq!(ranking_accuracy(&p, &q, 3).unwrap(), 1);

        let p = list("A", &["E", "D", "C", "B"]);
        let q = list("A", &["B", "C", "D", "E"]);
        assert_eq!(ranking_accuracy(&p, &q, 4).unwrap(), 0);

        assert!(matches!(precision_at_k(&p, &q, 5), Err(Error::KOutOfRange { .. })));
        assert!(ranking_accuracy(&p, &q, 0).is_err());
        assert!(precision_at_k(&p, &list("B", &["A", "C", "D", "E"]), 2).is_err());
    }

    #[test]
    fn aggregate_granularity_examples() {
        // 27 intersections and 12 exact matches over 20 targets at K = 3
        assert_eq!(format!("{:.2}", 100.0 * 27.0 / 60.0), "45.00");
        assert_eq!(format!("{:.3}", 12.0 / 60.0), "0.200");

        let m = AccuracyMatrix::table1();
        let truths: Vec<RankedList> = m.domains.iter().map(|t| truth_ranking(&m, t).unwrap()).collect();
        for k in DEFAULT_KS {
            let e = aggregate(MetricId::Lm1, &m, &truths, k).unwrap();
            assert_eq!(e.precision_pct, 100.0);
            assert_eq!(e.nra, 1.0);
        }
    }

    fn fixture_results(metric: MetricId, m: &AccuracyMatrix) -> Vec<MetricResult> {
        let mut out = Vec::new();
        for (s, src) in m.domains.iter().enumerate() {
            for (t, tgt) in m.domains.iter().enumerate().filter(|(t, _)| *t != s) {
                out.push(MetricResult { metric, source: src.clone(), target: tgt.clone(), value: Some(m.get(s, t)) });
            }
        }
        out
    }

    #[test]
    fn report_shapes() {
        let m = AccuracyMatrix::table1();
        let mut metrics = BTreeMap::new();
        metrics.insert(MetricId::Ulm1, fixture_results(MetricId::Ulm1, &m));
        let r = recommendation_report(&m, &metrics, &DEFAULT_KS, Exec::Parallel).unwrap();
        assert_eq!(r.chart.len(), 20);
        assert_eq!(r.evals.len(), 4);
        assert!(r.evals.iter().all(|e| e.precision_pct == 100.0));
        let md = r.eval_markdown();
        assert_eq!(md.lines().count(), 3);
        assert!(md.contains("| ULM1 | 100.00 | 1.000 |"));

        let empty = recommendation_report(&m, &BTreeMap::new(), &DEFAULT_KS, Exec::Parallel).unwrap();
        assert!(empty.evals.is_empty());
        assert!(empty.markdown().contains("evaluation section omitted"));

        let eight = AccuracyMatrix::new(
            (0..8).map(|i| format!("X{i}")).collect(),
            (0..8).map(|i| (0..8).map(|j| if i == j { 90.0 } else { 70.0 }).collect()).collect(),
        )
        .unwrap();
        assert!(matches!(
            recommendation_report(&eight, &BTreeMap::new(), &[10], Exec::Sequential),
            Err(Error::KOutOfRange { k: 10, max: 7 })
        ));

        let mut wrong = BTreeMap::new();
        wrong.insert(MetricId::Lm1, fixture_results(MetricId::Lm1, &eight));
        assert!(matches!(recommendation_report(&m, &wrong, &[3], Exec::Sequential), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn report_csvs() {
        let m = AccuracyMatrix::table1();
        let mut metrics = BTreeMap::new();
        metrics.insert(MetricId::Lm1, fixture_results(MetricId::Lm1, &m));
        let r = recommendation_report(&m, &metrics, &[3], Exec::Sequential).unwrap();
        let mut buf = Vec::new();
        r.write_eval_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "metric_id,K,precision_pct,nra\nLM1,3,100,1\n");
        let mut buf = Vec::new();
        r.write_chart_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("D1,84.84,10.82,D10,D10"));
        let mut buf = Vec::new();
        r.write_per_target_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 21);
    }

    fn perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
        Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
    }

    proptest! {
        #[test]
        fn ra_never_exceeds_precision(a in perm(9), b in perm(9), k in 1usize..=9) {
            let ids: Vec<String> = (0..9).map(|i| format!("S{i}")).collect();
            let p = RankedList { target: "T".into(), metric: None, order: a.iter().map(|&i| ids[i].clone()).collect() };
            let q = RankedList { target: "T".into(), metric: None, order: b.iter().map(|&i| ids[i].clone()).collect() };
            prop_assert!(ranking_accuracy(&p, &q, k).unwrap() <= precision_at_k(&p, &q, k).unwrap());
        }

        #[test]
        fn scores_invariant_under_monotone_transform(vals in proptest::collection::vec(0.0f64..10.0, 6)) {
            let d: Vec<String> = (0..7).map(|i| format!("S{i}")).collect();
            let mk = |f: &dyn Fn(f64) -> f64| -> Vec<MetricResult> {
                vals.iter().enumerate().map(|(i, v)| MetricResult { metric: MetricId::Ulm3, source: d[i + 1].clone(), target: d[0].clone(), value: Some(f(*v)) }).collect()
            };
            let a = rank_sources(&mk(&|x| x), "S0", &d).unwrap();
            let b = rank_sources(&mk(&|x| (x * 0.5 + 3.0).exp()), "S0", &d).unwrap();
            prop_assert_eq!(a.order, b.order);
        }
    }
}
