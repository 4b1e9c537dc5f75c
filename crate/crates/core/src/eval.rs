//! Scoring predicted tags against gold: token accuracy, per-tag
//! precision/recall/F1 with support-weighted, macro and micro averages,
//! per-language accuracy and a confusion matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::persist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences.
    pub support: u64,
    pub predicted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: u64,
    pub correct: u64,
    pub token_accuracy: f64,
    pub per_tag: BTreeMap<String, TagScore>,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub per_lang_accuracy: BTreeMap<String, f64>,
    pub per_lang_support: BTreeMap<String, u64>,
    /// gold tag -> predicted tag -> count
    pub confusion: BTreeMap<String, BTreeMap<String, u64>>,
    pub excluded_langs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalOptions {
    /// Tokens whose language label is listed here are not scored.
    pub exclude_langs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn evaluate(gold: &Corpus, pred: &Corpus) -> Result<EvalReport> {
    evaluate_with(gold, pred, &EvalOptions::default())
}

pub fn evaluate_with(gold: &Corpus, pred: &Corpus, opts: &EvalOptions) -> Result<EvalReport> {
    if gold.sentences.len() != pred.sentences.len() {
        return Err(Error::Alignment {
            sentence: gold.sentences.len().min(pred.sentences.len()) + 1,
            token: 0,
            message: format!(
                "{} gold sentences vs {} predicted",
                gold.sentences.len(),
                pred.sentences.len()
            ),
        });
    }
    let mut confusion: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut lang_counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let (mut total, mut correct) = (0u64, 0u64);

    for (si, (gs, ps)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
        let misalign = |token: usize, message: String| Error::Alignment {
            sentence: si + 1,
            token,
            message,
        };
        if gs.len() != ps.len() {
            return Err(misalign(0, format!("{} gold tokens vs {} predicted", gs.len(), ps.len())));
        }
        for (ti, (g, p)) in gs.tokens.iter().zip(&ps.tokens).enumerate() {
            if g.form != p.form || g.lang != p.lang {
                return Err(misalign(
                    ti + 1,
                    format!("gold {}/{} vs predicted {}/{}", g.form, g.lang, p.form, p.lang),
                ));
            }
            let (Some(gt), Some(pt)) = (&g.tag, &p.tag) else {
                return Err(misalign(ti + 1, "both corpora must be tagged".into()));
            };
            if opts.exclude_langs.contains(&g.lang) {
                continue;
            }
            total += 1;
            let hit = gt == pt;
            correct += hit as u64;
            let entry = lang_counts.entry(g.lang.clone()).or_default();
            entry.0 += hit as u64;
            entry.1 += 1;
            *confusion.entry(gt.clone()).or_default().entry(pt.clone()).or_default() += 1;
        }
    }

    let mut support: BTreeMap<&str, u64> = BTreeMap::new();
    let mut predicted: BTreeMap<&str, u64> = BTreeMap::new();
    let mut true_pos: BTreeMap<&str, u64> = BTreeMap::new();
    for (g, row) in &confusion {
        for (p, &n) in row {
            *support.entry(g).or_default() += n;
            *predicted.entry(p).or_default() += n;
            if g == p {
                *true_pos.entry(g).or_default() += n;
            }
        }
    }
    let tags: BTreeSet<&str> = support.keys().chain(predicted.keys()).copied().collect();
    let per_tag: BTreeMap<String, TagScore> = tags
        .iter()
        .map(|&t| {
            let tp = true_pos.get(t).copied().unwrap_or(0);
            let sup = support.get(t).copied().unwrap_or(0);
            let pred_n = predicted.get(t).copied().unwrap_or(0);
            let precision = ratio(tp, pred_n);
            let recall = ratio(tp, sup);
            (
                t.to_string(),
                TagScore {
                    precision,
                    recall,
                    f1: f1(precision, recall),
                    support: sup,
                    predicted: pred_n,
                },
            )
        })
        .collect();

    let weighted_f1 = if total == 0 {
        0.0
    } else {
        per_tag.values().map(|s| s.support as f64 * s.f1).sum::<f64>() / total as f64
    };
    let macro_f1 = if per_tag.is_empty() {
        0.0
    } else {
        per_tag.values().map(|s| s.f1).sum::<f64>() / per_tag.len() as f64
    };
    let accuracy = ratio(correct, total);

    Ok(EvalReport {
        total,
        correct,
        token_accuracy: accuracy,
        per_tag,
        weighted_f1,
        macro_f1,
        micro_f1: f1(accuracy, accuracy),
        per_lang_accuracy: lang_counts.iter().map(|(l, &(c, n))| (l.clone(), ratio(c, n))).collect(),
        per_lang_support: lang_counts.iter().map(|(l, &(_, n))| (l.clone(), n)).collect(),
        confusion,
        excluded_langs: opts.exclude_langs.clone(),
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

impl EvalReport {
    pub const FORMAT: &'static str = "cmtag-eval-report";
    pub const VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        persist::to_json(Self::FORMAT, Self::VERSION, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        persist::from_json(Self::FORMAT, Self::VERSION, text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tokens: {}", self.total);
        let _ = writeln!(out, "accuracy: {}", pct(self.token_accuracy));
        let _ = writeln!(
            out,
            "F1: {} (weighted)  {} (macro)  {} (micro)",
            pct(self.weighted_f1),
            pct(self.macro_f1),
            pct(self.micro_f1)
        );
        if !self.excluded_langs.is_empty() {
            let _ = writeln!(out, "excluded languages: {}", self.excluded_langs.join(", "));
        }

        let width = self
            .per_lang_accuracy
            .keys()
            .chain(self.per_tag.keys())
            .map(|k| k.chars().count())
            .chain(["language".len()])
            .max()
            .unwrap_or(8);
        let _ = writeln!(out, "\n{:<width$}  {:>8}  {:>9}", "language", "tokens", "accuracy");
        for (lang, acc) in &self.per_lang_accuracy {
            let n = self.per_lang_support.get(lang).copied().unwrap_or(0);
            let _ = writeln!(out, "{:<width$}  {:>8}  {:>9}", lang, n, pct(*acc));
        }

        let _ = writeln!(
            out,
            "\n{:<width$}  {:>9}  {:>9}  {:>9}  {:>8}",
            "tag", "precision", "recall", "f1", "support"
        );
        for (tag, s) in &self.per_tag {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9}  {:>9}  {:>9}  {:>8}",
                tag,
                pct(s.precision),
                pct(s.recall),
                pct(s.f1),
                s.support
            );
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Text => Ok(self.to_text()),
        }
    }
}
