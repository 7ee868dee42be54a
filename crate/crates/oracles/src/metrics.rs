//! Direct-counting classification metrics: one scan of the label pairs per
//! class, no shared tallies.

/// Per-class precision/recall/F1 for `label`, counting TP/FP/FN in separate
/// passes. 0/0 divisions yield 0.
pub fn class_prf(gold: &[&str], pred: &[&str], label: &str) -> (f64, f64, f64) {
    let tp = gold
        .iter()
        .zip(pred)
        .filter(|(g, p)| **g == label && **p == label)
        .count() as f64;
    let fp = gold
        .iter()
        .zip(pred)
        .filter(|(g, p)| **g != label && **p == label)
        .count() as f64;
    let fn_ = gold
        .iter()
        .zip(pred)
        .filter(|(g, p)| **g == label && **p != label)
        .count() as f64;
    let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
    let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Accuracy by direct comparison; for single-label multi-class scoring this
/// must equal micro-F1.
pub fn accuracy(gold: &[&str], pred: &[&str]) -> f64 {
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    hits as f64 / gold.len() as f64
}

/// Macro-F1 over an explicit label list.
pub fn macro_f1(gold: &[&str], pred: &[&str], labels: &[&str]) -> f64 {
    let sum: f64 = labels.iter().map(|l| class_prf(gold, pred, l).2).sum();
    sum / labels.len() as f64
}

/// Support-weighted F1 over an explicit label list.
pub fn weighted_f1(gold: &[&str], pred: &[&str], labels: &[&str]) -> f64 {
    let total = gold.len() as f64;
    labels
        .iter()
        .map(|l| {
            let support = gold.iter().filter(|g| *g == l).count() as f64;
            class_prf(gold, pred, l).2 * support / total
        })
        .sum()
}

/// Micro-F1 from pooled TP/FP/FN over an explicit label list (the general
/// definition, not the accuracy shortcut).
pub fn micro_f1(gold: &[&str], pred: &[&str], labels: &[&str]) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for label in labels {
        for (g, p) in gold.iter().zip(pred) {
            if g == label && p == label {
                tp += 1.0;
            } else if g != label && p == label {
                fp += 1.0;
            } else if g == label && p != label {
                fn_ += 1.0;
            }
        }
    }
    let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
    let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Token-level slot counting for one class over flattened tag sequences,
/// ignoring the outside tag entirely.
pub fn slot_token_prf(gold: &[&str], pred: &[&str], label: &str) -> (f64, f64, f64) {
    class_prf(gold, pred, label)
}

/// Exact-match spans: maximal runs of one non-outside label.
pub fn spans(tags: &[&str], outside: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        if tags[i] == outside {
            i += 1;
            continue;
        }
        let start = i;
        let label = tags[i];
        while i + 1 < tags.len() && tags[i + 1] == label {
            i += 1;
        }
        out.push((start, i, label.to_string()));
        i += 1;
    }
    out
}

/// Span-level P/R/F1 for one class by listing spans on both sides and
/// counting exact (start, end, label) matches.
pub fn slot_span_prf(
    gold_seqs: &[Vec<&str>],
    pred_seqs: &[Vec<&str>],
    label: &str,
    outside: &str,
) -> (f64, f64, f64) {
    let mut tp = 0.0;
    let mut n_gold = 0.0;
    let mut n_pred = 0.0;
    for (g, p) in gold_seqs.iter().zip(pred_seqs) {
        let gs: Vec<_> = spans(g, outside)
            .into_iter()
            .filter(|(_, _, l)| l == label)
            .collect();
        let ps: Vec<_> = spans(p, outside)
            .into_iter()
            .filter(|(_, _, l)| l == label)
            .collect();
        n_gold += gs.len() as f64;
        n_pred += ps.len() as f64;
        tp += gs.iter().filter(|s| ps.contains(s)).count() as f64;
    }
    let precision = if n_pred == 0.0 { 0.0 } else { tp / n_pred };
    let recall = if n_gold == 0.0 { 0.0 } else { tp / n_gold };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}
