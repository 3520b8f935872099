//! Evaluation metrics: subtoken precision/recall/F1 and top-k accuracy.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Micro-aggregated counts for one language (or the overall pool).
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct MetricEntry {
    pub samples: u64,
    // Summarization counts.
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    // Completion counts.
    pub hit1: u64,
    pub hit5: u64,
    pub top1: f64,
    pub top5: f64,
}

impl MetricEntry {
    pub fn merge(&mut self, other: &MetricEntry) {
        self.samples += other.samples;
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.hit1 += other.hit1;
        self.hit5 += other.hit5;
    }

    /// Recompute the derived rates from the raw counts. A zero denominator
    /// yields a zero rate.
    pub fn finalize(&mut self) {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        self.precision = ratio(self.tp, self.tp + self.fp);
        self.recall = ratio(self.tp, self.tp + self.fn_);
        self.f1 = if self.precision + self.recall == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / (self.precision + self.recall)
        };
        self.top1 = ratio(self.hit1, self.samples);
        self.top5 = ratio(self.hit5, self.samples);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub per_language: BTreeMap<String, MetricEntry>,
    pub all: MetricEntry,
}

impl MetricsReport {
    pub fn new(task: &str) -> Self {
        MetricsReport {
            task: task.to_string(),
            per_language: BTreeMap::new(),
            all: MetricEntry::default(),
        }
    }

    pub fn entry(&mut self, language: &str) -> &mut MetricEntry {
        self.per_language.entry(language.to_string()).or_default()
    }

    /// Rebuild the pooled entry from the per-language counts and derive all
    /// rates.
    pub fn finalize(&mut self) {
        let mut all = MetricEntry::default();
        for entry in self.per_language.values_mut() {
            entry.finalize();
            all.merge(entry);
        }
        all.finalize();
        self.all = all;
    }
}

/// Multiset-free subtoken overlap counts between a prediction and the gold
/// name: each gold occurrence can be matched at most once.
pub fn subtoken_counts(pred: &[u32], gold: &[u32]) -> (u64, u64, u64) {
    let mut remaining: BTreeMap<u32, u64> = BTreeMap::new();
    for &g in gold {
        *remaining.entry(g).or_insert(0) += 1;
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    for &p in pred {
        match remaining.get_mut(&p) {
            Some(c) if *c > 0 => {
                *c -= 1;
                tp += 1;
            }
            _ => fp += 1,
        }
    }
    let fn_ = remaining.values().sum::<u64>();
    (tp, fp, fn_)
}

/// Whether `answer` ranks in the top k of `logits`, breaking score ties in
/// favor of the lower id.
pub fn topk_hit(logits: &[f64], answer: usize, k: usize) -> bool {
    let target = logits[answer];
    let ahead = logits
        .iter()
        .enumerate()
        .filter(|&(i, &v)| v > target || (v == target && i < answer))
        .count();
    ahead < k
}

/// Fraction of samples whose answer ranks in the top k (same tie-break).
pub fn topk_accuracy(logits_batch: &[Vec<f64>], answers: &[usize], k: usize) -> f64 {
    if logits_batch.is_empty() {
        return 0.0;
    }
    let hits = logits_batch
        .iter()
        .zip(answers)
        .filter(|(l, &a)| topk_hit(l, a, k))
        .count();
    hits as f64 / logits_batch.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_prf_example() {
        // pred [get, name] vs gold [get, file, name]: P = 1, R = 2/3, F1 = 0.8
        let (tp, fp, fn_) = subtoken_counts(&[10, 12], &[10, 11, 12]);
        let mut e = MetricEntry { samples: 1, tp, fp, fn_, ..Default::default() };
        e.finalize();
        assert!((e.precision - 1.0).abs() < 1e-12);
        assert!((e.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((e.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn duplicate_subtokens_match_at_most_once() {
        // pred [a, a] vs gold [a]: one true positive, one false positive.
        let (tp, fp, fn_) = subtoken_counts(&[7, 7], &[7]);
        assert_eq!((tp, fp, fn_), (1, 1, 0));
    }

    #[test]
    fn empty_prediction_conventions() {
        let (tp, fp, fn_) = subtoken_counts(&[], &[1, 2]);
        let mut e = MetricEntry { samples: 1, tp, fp, fn_, ..Default::default() };
        e.finalize();
        assert_eq!(e.precision, 0.0);
        assert_eq!(e.recall, 0.0);
        assert_eq!(e.f1, 0.0);
    }

    #[test]
    fn topk_tie_break_prefers_lower_id() {
        let logits = [0.5, 0.9, 0.9, 0.1];
        assert!(topk_hit(&logits, 1, 1)); // beats id 2 on the tie
        assert!(!topk_hit(&logits, 2, 1));
        assert!(topk_hit(&logits, 2, 2));
        assert!(!topk_hit(&logits, 3, 3));
        assert!(topk_hit(&logits, 3, 4));
    }

    #[test]
    fn report_pools_counts_across_languages() {
        let mut report = MetricsReport::new("summarization");
        let e = report.entry("python");
        e.samples = 1;
        e.tp = 2;
        e.fp = 0;
        e.fn_ = 1;
        let e = report.entry("javascript");
        e.samples = 1;
        e.tp = 1;
        e.fp = 1;
        e.fn_ = 0;
        report.finalize();
        assert_eq!(report.all.tp, 3);
        assert_eq!(report.all.fp, 1);
        assert_eq!(report.all.fn_, 1);
        assert!((report.all.precision - 0.75).abs() < 1e-12);
        // Pooled counts, not averaged per-language rates.
        assert!((report.per_language["python"].precision - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let mut report = MetricsReport::new("completion");
        let e = report.entry("python");
        e.samples = 4;
        e.hit1 = 2;
        e.hit5 = 3;
        report.finalize();
        let s = serde_json::to_string(&report).unwrap();
        assert!(s.contains("\"fn\""));
        let back: MetricsReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back.all, report.all);
    }
}
