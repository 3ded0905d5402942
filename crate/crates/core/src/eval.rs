//! Macro-averaged precision/recall/F1, accuracy and confusion analysis.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TagScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_support: usize,
    pub pred_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub per_tag: BTreeMap<String, TagScores>,
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f: f64,
    pub overall_accuracy: f64,
    pub n_tokens: usize,
    pub n_correct: usize,
}

/// Rows are gold tags, columns predicted tags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Aligns gold and predicted tags token by token.
///
/// Gold tags come from `gold`'s gold column. Predictions come from `pred`'s
/// predicted column, falling back to its gold column so a plain two-column
/// file of predictions can be scored directly.
fn aligned_pairs<'a>(gold: &'a Dataset, pred: &'a Dataset) -> Result<Vec<(&'a str, &'a str)>> {
    if gold.len() != pred.len() {
        return Err(Error::Contract(format!(
            "gold has {} sentences but predictions have {}; first divergent sentence is {}",
            gold.len(),
            pred.len(),
            gold.len().min(pred.len())
        )));
    }
    let mut pairs = Vec::with_capacity(gold.n_tokens());
    for (si, (g, p)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Contract(format!(
                "sentence {si} has {} gold tokens but {} predicted tokens",
                g.len(),
                p.len()
            )));
        }
        for (ti, (gt, pt)) in g.tokens.iter().zip(&p.tokens).enumerate() {
            if gt.form != pt.form {
                return Err(Error::Contract(format!(
                    "sentence {si}, token {ti}: gold form `{}` differs from predicted form `{}`",
                    gt.form, pt.form
                )));
            }
            let gold_tag = gt
                .gold_tag
                .as_deref()
                .ok_or_else(|| Error::Contract(format!("sentence {si}, token {ti}: missing gold tag")))?;
            let pred_tag = pt
                .pred_tag
                .as_deref()
                .or(pt.gold_tag.as_deref())
                .ok_or_else(|| Error::Contract(format!("sentence {si}, token {ti}: missing predicted tag")))?;
            pairs.push((gold_tag, pred_tag));
        }
    }
    Ok(pairs)
}

/// Label order: the gold tag set first, then predicted-only labels sorted.
fn label_order(gold: &Dataset, pairs: &[(&str, &str)]) -> Vec<String> {
    let mut labels: Vec<String> = gold.tagset.labels().to_vec();
    let mut extra: Vec<&str> = pairs
        .iter()
        .flat_map(|(g, p)| [*g, *p])
        .filter(|l| gold.tagset.index_of(l).is_none())
        .collect();
    extra.sort_unstable();
    extra.dedup();
    labels.extend(extra.into_iter().map(String::from));
    labels
}

fn confusion_from_pairs(labels: Vec<String>, pairs: &[(&str, &str)]) -> ConfusionMatrix {
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let n = labels.len();
    let mut counts = vec![vec![0; n]; n];
    for (g, p) in pairs {
        counts[index[g]][index[p]] += 1;
    }
    ConfusionMatrix { labels, counts }
}

pub fn confusion_matrix(gold: &Dataset, pred: &Dataset) -> Result<ConfusionMatrix> {
    let pairs = aligned_pairs(gold, pred)?;
    Ok(confusion_from_pairs(label_order(gold, &pairs), &pairs))
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    pub fn column_sum(&self, j: usize) -> usize {
        self.counts.iter().map(|row| row[j]).sum()
    }

    /// TAB-separated matrix; first row and first column carry tag labels.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in &self.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                let _ = write!(out, "\t{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_report(&self) -> EvalReport {
        let n_tokens = self.total();
        let n_correct = self.trace();
        let mut per_tag = BTreeMap::new();
        let (mut sp, mut sr, mut sf, mut included) = (0.0, 0.0, 0.0, 0usize);
        for (i, label) in self.labels.iter().enumerate() {
            let tp = self.counts[i][i];
            let gold_support = self.row_sum(i);
            let pred_count = self.column_sum(i);
            let precision = ratio(tp, pred_count);
            let recall = ratio(tp, gold_support);
            let f1 = harmonic(precision, recall);
            if gold_support > 0 {
                sp += precision;
                sr += recall;
                sf += f1;
                included += 1;
            }
            per_tag.insert(
                label.clone(),
                TagScores {
                    precision,
                    recall,
                    f1,
                    gold_support,
                    pred_count,
                },
            );
        }
        let mean = |s: f64| if included == 0 { 0.0 } else { s / included as f64 };
        EvalReport {
            per_tag,
            macro_p: mean(sp),
            macro_r: mean(sr),
            macro_f: mean(sf),
            overall_accuracy: ratio(n_correct, n_tokens),
            n_tokens,
            n_correct,
        }
    }
}

/// Per-tag and macro-averaged scores. Macro means run over tags that occur
/// in the gold data; predicted-only tags are still listed per tag.
pub fn evaluate(gold: &Dataset, pred: &Dataset) -> Result<EvalReport> {
    Ok(confusion_matrix(gold, pred)?.to_report())
}

/// Off-diagonal cells by count (descending), ties by gold then predicted
/// index.
pub fn top_confusions(m: &ConfusionMatrix, k: usize) -> Vec<(String, String, usize)> {
    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for (g, row) in m.counts.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            if g != p && c > 0 {
                cells.push((g, p, c));
            }
        }
    }
    cells.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    cells
        .into_iter()
        .take(k)
        .map(|(g, p, c)| (m.labels[g].clone(), m.labels[p].clone(), c))
        .collect()
}

impl EvalReport {
    /// Per-tag rows followed by the macro and accuracy footer.
    pub fn to_table(&self) -> String {
        let width = self
            .per_tag
            .keys()
            .map(|k| k.chars().count())
            .chain(["accuracy".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>8}  {:>8}",
            "tag", "precision", "recall", "f1", "support", "predicted"
        );
        for (tag, s) in &self.per_tag {
            let pad = width - tag.chars().count() + tag.len();
            let _ = writeln!(
                out,
                "{tag:<pad$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>8}  {:>8}",
                s.precision, s.recall, s.f1, s.gold_support, s.pred_count
            );
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>8}",
            "macro", self.macro_p, self.macro_r, self.macro_f, self.n_tokens
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.4}  ({} / {})",
            "accuracy", self.overall_accuracy, self.n_correct, self.n_tokens
        );
        out
    }

    /// `key<TAB>value` lines; per-tag entries as `<metric>:<TAG>`.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "macro_p\t{:.4}", self.macro_p);
        let _ = writeln!(out, "macro_r\t{:.4}", self.macro_r);
        let _ = writeln!(out, "macro_f\t{:.4}", self.macro_f);
        let _ = writeln!(out, "accuracy\t{:.4}", self.overall_accuracy);
        let _ = writeln!(out, "n_tokens\t{}", self.n_tokens);
        let _ = writeln!(out, "n_correct\t{}", self.n_correct);
        for (tag, s) in &self.per_tag {
            let _ = writeln!(out, "precision:{tag}\t{:.4}", s.precision);
            let _ = writeln!(out, "recall:{tag}\t{:.4}", s.recall);
            let _ = writeln!(out, "f1:{tag}\t{:.4}", s.f1);
            let _ = writeln!(out, "support:{tag}\t{}", s.gold_support);
            let _ = writeln!(out, "predicted:{tag}\t{}", s.pred_count);
        }
        out
    }
}
