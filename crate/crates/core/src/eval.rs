//! TREC-style effectiveness metrics: AP, nDCG@k and MRR@k.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::Ranking;

/// Graded relevance judgments, query id -> doc id -> grade.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one judgment. A `(query, doc)` pair may appear only once.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> Result<()> {
        let docs = self.judgments.entry(query_id.to_string()).or_default();
        if docs.insert(doc_id.to_string(), grade).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate judgment for ({query_id}, {doc_id})"
            )));
        }
        Ok(())
    }

    pub fn query(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(query_id)?.get(doc_id).copied()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.judgments
            .iter()
            .flat_map(|(q, docs)| docs.iter().map(move |(d, &g)| (q.as_str(), d.as_str(), g)))
    }

    pub fn n_queries(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gain {
    /// `2^rel - 1`
    #[default]
    Exponential,
    /// `rel`
    Linear,
}

impl Gain {
    fn apply(self, grade: u32) -> f64 {
        match self {
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
            Gain::Linear => grade as f64,
        }
    }
}

impl FromStr for Gain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "exponential" => Ok(Gain::Exponential),
            "linear" | "lin" => Ok(Gain::Linear),
            other => Err(Error::InvalidArgument(format!("unknown gain {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Ap,
    Ndcg(usize),
    Mrr(usize),
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Ap => write!(f, "AP"),
            Metric::Ndcg(k) => write!(f, "nDCG@{k}"),
            Metric::Mrr(k) => write!(f, "MRR@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Accepts `AP`, `nDCG@k`, `MRR@k` (case-insensitive; `@k` defaults to 10).
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let (name, k) = match lower.split_once('@') {
            Some((name, k)) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad metric cutoff in {s:?}")))?;
                if k == 0 {
                    return Err(Error::InvalidArgument(format!("metric cutoff must be >= 1 in {s:?}")));
                }
                (name.to_string(), k)
            }
            None => (lower.clone(), 10),
        };
        match name.as_str() {
            "ap" | "map" => Ok(Metric::Ap),
            "ndcg" => Ok(Metric::Ndcg(k)),
            "mrr" | "rr" => Ok(Metric::Mrr(k)),
            _ => Err(Error::InvalidArgument(format!("unknown metric {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub metrics: Vec<Metric>,
    pub gain: Gain,
    /// Minimum grade counted as relevant by AP and MRR.
    pub rel_threshold: u32,
    /// Ranks considered by AP.
    pub depth: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            metrics: vec![Metric::Ap, Metric::Ndcg(10), Metric::Mrr(10)],
            gain: Gain::Exponential,
            rel_threshold: 1,
            depth: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub metric: String,
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
}

/// AP over the top `depth` hits. `None` when the query has no judgments.
pub fn average_precision(r: &Ranking, qrels: &Qrels, rel_threshold: u32, depth: usize) -> Option<f64> {
    let judged = qrels.query(&r.query_id)?;
    let total_relevant = judged.values().filter(|&&g| g >= rel_threshold).count();
    if total_relevant == 0 {
        return Some(0.0);
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, hit) in r.hits.iter().take(depth).enumerate() {
        if judged.get(&hit.doc_id).is_some_and(|&g| g >= rel_threshold) {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    Some(sum / total_relevant as f64)
}

pub fn ndcg_at_k(r: &Ranking, qrels: &Qrels, k: usize, gain: Gain) -> Option<f64> {
    let judged = qrels.query(&r.query_id)?;
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = r
        .hits
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, h)| gain.apply(judged.get(&h.doc_id).copied().unwrap_or(0)) / discount(i))
        .sum();
    let mut ideal: Vec<u32> = judged.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain.apply(g) / discount(i))
        .sum();
    Some(if idcg > 0.0 { dcg / idcg } else { 0.0 })
}

pub fn mrr_at_k(r: &Ranking, qrels: &Qrels, k: usize, rel_threshold: u32) -> Option<f64> {
    let judged = qrels.query(&r.query_id)?;
    let first = r
        .hits
        .iter()
        .take(k)
        .position(|h| judged.get(&h.doc_id).is_some_and(|&g| g >= rel_threshold));
    Some(first.map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

fn metric_value(metric: Metric, r: &Ranking, qrels: &Qrels, cfg: &EvalConfig) -> Option<f64> {
    match metric {
        Metric::Ap => average_precision(r, qrels, cfg.rel_threshold, cfg.depth),
        Metric::Ndcg(k) => ndcg_at_k(r, qrels, k, cfg.gain),
        Metric::Mrr(k) => mrr_at_k(r, qrels, k, cfg.rel_threshold),
    }
}

/// Evaluates a run over every judged query. Judged queries missing from the
/// run score 0; run queries without judgments are skipped with a warning.
pub fn evaluate_run(run: &[Ranking], qrels: &Qrels, cfg: &EvalConfig) -> Result<Vec<MetricReport>> {
    if run.is_empty() {
        return Err(Error::InvalidArgument("run is empty".into()));
    }
    let mut by_query: BTreeMap<&str, &Ranking> = BTreeMap::new();
    for r in run {
        if by_query.insert(r.query_id.as_str(), r).is_some() {
            return Err(Error::InvalidArgument(format!(
                "query {:?} appears twice in run",
                r.query_id
            )));
        }
    }
    let unjudged: Vec<&str> = by_query
        .keys()
        .copied()
        .filter(|q| qrels.query(q).is_none())
        .collect();
    if unjudged.len() == by_query.len() {
        return Err(Error::InvalidArgument(
            "run and qrels share no queries".into(),
        ));
    }
    if !unjudged.is_empty() {
        warn!(
            "{} run queries have no judgments and are skipped (first: {})",
            unjudged.len(),
            unjudged[0]
        );
    }
    let missing = qrels
        .query_ids()
        .filter(|q| !by_query.contains_key(q))
        .count();
    if missing > 0 {
        warn!("{missing} judged queries are absent from the run and score 0");
    }

    let reports = cfg
        .metrics
        .iter()
        .map(|&metric| {
            let per_query: BTreeMap<String, f64> = qrels
                .query_ids()
                .map(|q| {
                    let empty;
                    let ranking = match by_query.get(q) {
                        Some(r) => *r,
                        None => {
                            empty = Ranking {
                                query_id: q.to_string(),
                                hits: Vec::new(),
                            };
                            &empty
                        }
                    };
                    let v = metric_value(metric, ranking, qrels, cfg).unwrap_or(0.0);
                    (q.to_string(), v)
                })
                .collect();
            let mean = per_query.values().sum::<f64>() / per_query.len() as f64;
            MetricReport {
                metric: metric.to_string(),
                per_query,
                mean,
            }
        })
        .collect();
    Ok(reports)
}

/// Queries that appear in both runs.
pub fn shared_queries<'a>(a: &'a [Ranking], b: &'a [Ranking]) -> BTreeSet<&'a str> {
    let left: BTreeSet<&str> = a.iter().map(|r| r.query_id.as_str()).collect();
    b.iter()
        .map(|r| r.query_id.as_str())
        .filter(|q| left.contains(q))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::ScoredHit;

    fn ranking(q: &str, docs: &[&str]) -> Ranking {
        Ranking {
            query_id: q.into(),
            hits: docs
                .iter()
                .enumerate()
                .map(|(i, d)| ScoredHit {
                    doc_id: d.to_string(),
                    score: (docs.len() - i) as f64,
                })
                .collect(),
        }
    }

    fn qrels(entries: &[(&str, &str, u32)]) -> Qrels {
        let mut q = Qrels::new();
        for &(qid, d, g) in entries {
            q.insert(qid, d, g).unwrap();
        }
        q
    }

    #[test]
    fn ap_hand_computed() {
        let q = qrels(&[("q", "a", 1), ("q", "c", 1)]);
        let ap = average_precision(&ranking("q", &["a", "b", "c"]), &q, 1, 1000).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ap_all_relevant_and_none_relevant() {
        let q = qrels(&[("q", "a", 1), ("q", "b", 2), ("q", "x", 1)]);
        assert_eq!(average_precision(&ranking("q", &["a", "b"]), &q, 1, 2), Some(2.0 / 3.0));
        let q2 = qrels(&[("q", "a", 1), ("q", "b", 1)]);
        assert_eq!(average_precision(&ranking("q", &["a", "b"]), &q2, 1, 2), Some(1.0));
        assert_eq!(average_precision(&ranking("q", &["y", "z"]), &q2, 1, 2), Some(0.0));
    }

    #[test]
    fn ap_depth_and_threshold() {
        let q = qrels(&[("q", "a", 1), ("q", "b", 2)]);
        let r = ranking("q", &["x", "a", "b"]);
        assert_eq!(average_precision(&r, &q, 2, 1000), Some(1.0 / 3.0));
        assert_eq!(average_precision(&r, &q, 1, 2), Some(0.25));
    }

    #[test]
    fn ndcg_hand_computed() {
        let q = qrels(&[("q", "A", 3), ("q", "B", 1)]);
        let v = ndcg_at_k(&ranking("q", &["B", "A"]), &q, 10, Gain::Exponential).unwrap();
        let dcg = 1.0 + 7.0 / 3f64.log2();
        let idcg = 7.0 + 1.0 / 3f64.log2();
        assert!((dcg - 5.416_508_275).abs() < 1e-9);
        assert!((idcg - 7.630_929_754).abs() < 1e-9);
        assert!((v - dcg / idcg).abs() < 1e-12);
        assert!((v - 0.709_809_741).abs() < 1e-9);
    }

    #[test]
    fn ndcg_ideal_and_unjudged() {
        let q = qrels(&[("q", "A", 3), ("q", "B", 1), ("q", "C", 0)]);
        assert_eq!(ndcg_at_k(&ranking("q", &["A", "B"]), &q, 10, Gain::Linear), Some(1.0));
        assert_eq!(ndcg_at_k(&ranking("q", &["x", "y"]), &q, 10, Gain::Exponential), Some(0.0));
    }

    #[test]
    fn mrr_cases() {
        let q = qrels(&[("q", "r", 1)]);
        assert_eq!(mrr_at_k(&ranking("q", &["a", "b", "r"]), &q, 10, 1), Some(1.0 / 3.0));
        assert_eq!(mrr_at_k(&ranking("q", &["r"]), &q, 10, 1), Some(1.0));
        let mut docs: Vec<String> = (0..10).map(|i| format!("n{i}")).collect();
        docs.push("r".into());
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        assert_eq!(mrr_at_k(&ranking("q", &refs), &q, 10, 1), Some(0.0));
    }

    #[test]
    fn missing_query_is_none() {
        let q = qrels(&[("q", "r", 1)]);
        assert_eq!(mrr_at_k(&ranking("other", &["r"]), &q, 10, 1), None);
        assert_eq!(average_precision(&ranking("other", &["r"]), &q, 1, 10), None);
    }

    #[test]
    fn evaluate_mean_and_missing_queries() {
        let q = qrels(&[("q1", "a", 1), ("q2", "b", 1), ("q3", "c", 1)]);
        let run = vec![
            ranking("q1", &["a"]),
            ranking("q2", &["x", "b"]),
            ranking("q9", &["a"]),
        ];
        let cfg = EvalConfig {
            metrics: vec![Metric::Mrr(10)],
            ..EvalConfig::default()
        };
        let reports = evaluate_run(&run, &q, &cfg).unwrap();
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.metric, "MRR@10");
        assert_eq!(r.per_query.len(), 3);
        assert_eq!(r.per_query["q3"], 0.0);
        assert!((r.mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn evaluate_ideal_run() {
        let q = qrels(&[("q1", "a", 2), ("q1", "b", 1), ("q2", "c", 1)]);
        let run = vec![ranking("q1", &["a", "b"]), ranking("q2", &["c"])];
        for r in evaluate_run(&run, &q, &EvalConfig::default()).unwrap() {
            assert_eq!(r.mean, 1.0, "{}", r.metric);
        }
    }

    #[test]
    fn evaluate_errors() {
        let q = qrels(&[("q1", "a", 1)]);
        assert!(evaluate_run(&[], &q, &EvalConfig::default()).is_err());
        assert!(evaluate_run(&[ranking("zz", &["a"])], &q, &EvalConfig::default()).is_err());
        let dup = vec![ranking("q1", &["a"]), ranking("q1", &["b"])];
        assert!(evaluate_run(&dup, &q, &EvalConfig::default()).is_err());
    }

    #[test]
    fn qrels_duplicate_rejected() {
        let mut q = Qrels::new();
        q.insert("q", "d", 1).unwrap();
        assert!(q.insert("q", "d", 2).is_err());
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("AP".parse::<Metric>().unwrap(), Metric::Ap);
        assert_eq!("nDCG@10".parse::<Metric>().unwrap(), Metric::Ndcg(10));
        assert_eq!("mrr@5".parse::<Metric>().unwrap(), Metric::Mrr(5));
        assert_eq!("ndcg".parse::<Metric>().unwrap(), Metric::Ndcg(10));
        assert!("recall@10".parse::<Metric>().is_err());
        assert!("ndcg@0".parse::<Metric>().is_err());
        assert_eq!(Metric::Ndcg(10).to_string(), "nDCG@10");
    }
}
