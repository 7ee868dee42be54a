//! Classification scoring: per-class precision/recall/F1 with micro, macro
//! and weighted averages, confusion matrices, token- and span-level slot
//! metrics, and the ablation comparison table.
//!
//! Conventions are pinned for testability: any 0/0 ratio is 0, the micro
//! average pools TP/FP/FN over all classes (which equals accuracy for
//! single-label multi-class scoring), the macro average is the unweighted
//! mean of per-class F1 over the scored label set, and the weighted average
//! weights each class by its gold support (zero-support classes get zero
//! weight).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::OUTSIDE_TAG;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class: Vec<ClassScore>,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

/// Row-gold, column-predicted counts over an ordered label list.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, row: usize) -> usize {
        self.counts[row].iter().sum()
    }

    /// Aligned text rendering with gold labels on rows.
    pub fn render(&self) -> String {
        let width = self
            .labels
            .iter()
            .map(|l| l.len())
            .chain(std::iter::once(5))
            .max()
            .unwrap();
        let mut out = String::new();
        out.push_str(&format!("{:>width$} |", "", width = width));
        for label in &self.labels {
            out.push_str(&format!(" {:>width$}", label, width = width));
        }
        out.push('\n');
        for (r, label) in self.labels.iter().enumerate() {
            out.push_str(&format!("{:>width$} |", label, width = width));
            for c in 0..self.labels.len() {
                out.push_str(&format!(" {:>width$}", self.counts[r][c], width = width));
            }
            out.push('\n');
        }
        out
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn f1(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

/// Labels in order of first appearance in gold, then pred.
fn appearance_labels(gold: &[String], pred: &[String]) -> Vec<String> {
    let mut labels = Vec::new();
    for l in gold.iter().chain(pred) {
        if !labels.contains(l) {
            labels.push(l.clone());
        }
    }
    labels
}

fn metrics_over_labels(
    gold: &[String],
    pred: &[String],
    labels: &[String],
) -> (Metrics, ConfusionMatrix) {
    let index: std::collections::HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut counts = vec![vec![0usize; labels.len()]; labels.len()];
    for (g, p) in gold.iter().zip(pred) {
        counts[index[g.as_str()]][index[p.as_str()]] += 1;
    }

    let mut per_class = Vec::with_capacity(labels.len());
    let (mut tp_all, mut fp_all, mut fn_all) = (0usize, 0usize, 0usize);
    for (i, label) in labels.iter().enumerate() {
        let tp = counts[i][i];
        let gold_total: usize = counts[i].iter().sum();
        let pred_total: usize = counts.iter().map(|row| row[i]).sum();
        let fp = pred_total - tp;
        let fn_ = gold_total - tp;
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let precision = ratio(tp as f64, pred_total as f64);
        let recall = ratio(tp as f64, gold_total as f64);
        per_class.push(ClassScore {
            label: label.clone(),
            precision,
            recall,
            f1: f1(precision, recall),
            support: gold_total,
        });
    }
    let micro_p = ratio(tp_all as f64, (tp_all + fp_all) as f64);
    let micro_r = ratio(tp_all as f64, (tp_all + fn_all) as f64);
    let micro_f1 = f1(micro_p, micro_r);
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / labels.len().max(1) as f64;
    let total_support: usize = per_class.iter().map(|c| c.support).sum();
    let weighted_f1 = per_class
        .iter()
        .map(|c| c.f1 * ratio(c.support as f64, total_support as f64))
        .sum();
    (
        Metrics {
            per_class,
            micro_f1,
            macro_f1,
            weighted_f1,
        },
        ConfusionMatrix {
            labels: labels.to_vec(),
            counts,
        },
    )
}

/// Scores single-label intent predictions. The label set is the union of
/// gold and predicted labels in order of first appearance; pass an explicit
/// list via [`intent_metrics_with_labels`] to pin a schema.
pub fn intent_metrics(gold: &[String], pred: &[String]) -> Result<(Metrics, ConfusionMatrix)> {
    if gold.is_empty() {
        return Err(Error::EmptyInput("no intent labels to score".into()));
    }
    if gold.len() != pred.len() {
        return Err(Error::Shape(format!(
            "{} gold labels vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let labels = appearance_labels(gold, pred);
    Ok(metrics_over_labels(gold, pred, &labels))
}

pub fn intent_metrics_with_labels(
    gold: &[String],
    pred: &[String],
    labels: &[String],
) -> Result<(Metrics, ConfusionMatrix)> {
    if gold.is_empty() {
        return Err(Error::EmptyInput("no intent labels to score".into()));
    }
    if gold.len() != pred.len() {
        return Err(Error::Shape(format!(
            "{} gold labels vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    for l in gold.iter().chain(pred) {
        if !labels.contains(l) {
            return Err(Error::Data(format!("label {} not in the declared set", l)));
        }
    }
    Ok(metrics_over_labels(gold, pred, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotMode {
    /// Score every token position whose gold or predicted tag is not `O`.
    Token,
    /// Score exact-match maximal runs of one non-`O` label.
    Span,
}

/// Token- or span-level slot scoring over per-utterance tag sequences. The
/// outside tag is never a class.
pub fn slot_metrics(
    gold_seqs: &[Vec<String>],
    pred_seqs: &[Vec<String>],
    mode: SlotMode,
) -> Result<Metrics> {
    if gold_seqs.len() != pred_seqs.len() {
        return Err(Error::Shape(format!(
            "{} gold sequences vs {} predicted",
            gold_seqs.len(),
            pred_seqs.len()
        )));
    }
    for (i, (g, p)) in gold_seqs.iter().zip(pred_seqs).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Shape(format!(
                "sequence {} has {} gold tags vs {} predicted",
                i,
                g.len(),
                p.len()
            )));
        }
    }
    match mode {
        SlotMode::Token => {
            let gold: Vec<String> = gold_seqs.iter().flatten().cloned().collect();
            let pred: Vec<String> = pred_seqs.iter().flatten().cloned().collect();
            let labels: Vec<String> = appearance_labels(&gold, &pred)
                .into_iter()
                .filter(|l| l != OUTSIDE_TAG)
                .collect();
            let mut per_class = Vec::with_capacity(labels.len());
            let (mut tp_all, mut fp_all, mut fn_all) = (0usize, 0usize, 0usize);
            for label in &labels {
                let mut tp = 0;
                let mut fp = 0;
                let mut fn_ = 0;
                for (g, p) in gold.iter().zip(&pred) {
                    match (g == label, p == label) {
                        (true, true) => tp += 1,
                        (false, true) => fp += 1,
                        (true, false) => fn_ += 1,
                        _ => {}
                    }
                }
                tp_all += tp;
                fp_all += fp;
                fn_all += fn_;
                let precision = ratio(tp as f64, (tp + fp) as f64);
                let recall = ratio(tp as f64, (tp + fn_) as f64);
                per_class.push(ClassScore {
                    label: label.clone(),
                    precision,
                    recall,
                    f1: f1(precision, recall),
                    support: tp + fn_,
                });
            }
            Ok(finish_slot_metrics(per_class, tp_all, fp_all, fn_all))
        }
        SlotMode::Span => {
            let gold_spans: Vec<Vec<(usize, usize, String)>> =
                gold_seqs.iter().map(|s| spans(s)).collect();
            let pred_spans: Vec<Vec<(usize, usize, String)>> =
                pred_seqs.iter().map(|s| spans(s)).collect();
            let mut labels: Vec<String> = Vec::new();
            for span_list in gold_spans.iter().chain(&pred_spans) {
                for (_, _, l) in span_list {
                    if !labels.contains(l) {
                        labels.push(l.clone());
                    }
                }
            }
            let mut per_class = Vec::with_capacity(labels.len());
            let (mut tp_all, mut fp_all, mut fn_all) = (0usize, 0usize, 0usize);
            for label in &labels {
                let mut tp = 0;
                let mut n_gold = 0;
                let mut n_pred = 0;
                for (gs, ps) in gold_spans.iter().zip(&pred_spans) {
                    let g: Vec<_> = gs.iter().filter(|(_, _, l)| l == label).collect();
                    let p: Vec<_> = ps.iter().filter(|(_, _, l)| l == label).collect();
                    n_gold += g.len();
                    n_pred += p.len();
                    tp += g.iter().filter(|s| p.contains(s)).count();
                }
                tp_all += tp;
                fp_all += n_pred - tp;
                fn_all += n_gold - tp;
                let precision = ratio(tp as f64, n_pred as f64);
                let recall = ratio(tp as f64, n_gold as f64);
                per_class.push(ClassScore {
                    label: label.clone(),
                    precision,
                    recall,
                    f1: f1(precision, recall),
                    support: n_gold,
                });
            }
            Ok(finish_slot_metrics(per_class, tp_all, fp_all, fn_all))
        }
    }
}

fn finish_slot_metrics(
    per_class: Vec<ClassScore>,
    tp: usize,
    fp: usize,
    fn_: usize,
) -> Metrics {
    let micro_p = ratio(tp as f64, (tp + fp) as f64);
    let micro_r = ratio(tp as f64, (tp + fn_) as f64);
    let micro_f1 = f1(micro_p, micro_r);
    let macro_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|c| c.f1).sum::<f64>() / per_class.len() as f64
    };
    let total: usize = per_class.iter().map(|c| c.support).sum();
    let weighted_f1 = per_class
        .iter()
        .map(|c| c.f1 * ratio(c.support as f64, total as f64))
        .sum();
    Metrics {
        per_class,
        micro_f1,
        macro_f1,
        weighted_f1,
    }
}

/// Maximal runs of one non-outside label as (start, end inclusive, label).
pub fn spans(tags: &[String]) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        if tags[i] == OUTSIDE_TAG {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < tags.len() && tags[i + 1] == tags[start] {
            i += 1;
        }
        out.push((start, i, tags[start].clone()));
        i += 1;
    }
    out
}

/// Converts per-token tags to BIO span markup for span-level consumers.
pub fn to_bio(tags: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(tags.len());
    for (i, tag) in tags.iter().enumerate() {
        if tag == OUTSIDE_TAG {
            out.push(OUTSIDE_TAG.to_string());
        } else if i > 0 && tags[i - 1] == *tag {
            out.push(format!("I-{}", tag));
        } else {
            out.push(format!("B-{}", tag));
        }
    }
    out
}

/// One named run in an ablation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    /// Populated when a run failed instead of producing metrics.
    pub failure: Option<String>,
}

/// Builds the comparison table, preserving input order; micro-F1 is the
/// headline column.
pub fn ablation_report(runs: &[(String, std::result::Result<Metrics, String>)]) -> Result<(String, Vec<AblationRow>)> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("ablation report over no runs".into()));
    }
    let rows: Vec<AblationRow> = runs
        .iter()
        .map(|(name, result)| match result {
            Ok(m) => AblationRow {
                name: name.clone(),
                micro_f1: m.micro_f1,
                macro_f1: m.macro_f1,
                weighted_f1: m.weighted_f1,
                failure: None,
            },
            Err(message) => AblationRow {
                name: name.clone(),
                micro_f1: f64::NAN,
                macro_f1: f64::NAN,
                weighted_f1: f64::NAN,
                failure: Some(message.clone()),
            },
        })
        .collect();
    let name_width = rows.iter().map(|r| r.name.len()).chain(std::iter::once(4)).max().unwrap();
    let mut table = format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}\n",
        "run",
        "micro-F1",
        "macro-F1",
        "wgt-F1",
        width = name_width
    );
    for row in &rows {
        match &row.failure {
            None => table.push_str(&format!(
                "{:<width$}  {:>8.4}  {:>8.4}  {:>8.4}\n",
                row.name,
                row.micro_f1,
                row.macro_f1,
                row.weighted_f1,
                width = name_width
            )),
            Some(message) => table.push_str(&format!(
                "{:<width$}  FAILED: {}\n",
                row.name,
                message,
                width = name_width
            )),
        }
    }
    Ok((table, rows))
}
