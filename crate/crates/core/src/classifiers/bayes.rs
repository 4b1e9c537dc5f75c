use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{prediction, Dataset, Prediction, Schema};
use crate::error::{Error, Result};
use crate::maxent::softmax;

/// Naive Bayes over categorical attributes. Priors are class frequencies;
/// conditionals are `(count + alpha) / (class_count + alpha * |domain|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub schema: Schema,
    pub alpha: f64,
    pub total: u64,
    pub class_counts: Vec<u64>,
    /// `[class][attribute][value]`.
    pub value_counts: Vec<Vec<Vec<u64>>>,
}

pub fn train_nb(data: &Dataset, alpha: f64) -> Result<NaiveBayesModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("smoothing alpha must be positive"));
    }
    data.validate()?;
    let labels = data.labels()?;
    let k = data.class_domain.len();
    let mut class_counts = vec![0u64; k];
    let mut value_counts: Vec<Vec<Vec<u64>>> = (0..k)
        .map(|_| data.attributes.iter().map(|a| vec![0; a.domain.len()]).collect())
        .collect();
    for (row, &c) in data.instances.iter().zip(labels) {
        class_counts[c] += 1;
        for (a, &v) in row.iter().enumerate() {
            value_counts[c][a][v] += 1;
        }
    }
    Ok(NaiveBayesModel {
        schema: data.schema(),
        alpha,
        total: data.len() as u64,
        class_counts,
        value_counts,
    })
}

impl NaiveBayesModel {
    pub fn prior(&self, class: usize) -> f64 {
        self.class_counts[class] as f64 / self.total as f64
    }

    /// `P(attribute = value | class)`; `None` is a value outside the domain.
    pub fn conditional(&self, class: usize, attribute: usize, value: Option<usize>) -> f64 {
        let count = value.map_or(0, |v| self.value_counts[class][attribute][v]);
        let domain = self.schema.attributes[attribute].domain.len() as f64;
        (count as f64 + self.alpha) / (self.class_counts[class] as f64 + self.alpha * domain)
    }

    pub fn posterior(&self, values: &[Option<usize>]) -> Vec<f64> {
        let log_joint: Vec<f64> = (0..self.class_counts.len())
            .map(|c| {
                if self.class_counts[c] == 0 {
                    return f64::NEG_INFINITY;
                }
                self.prior(c).ln()
                    + values
                        .iter()
                        .enumerate()
                        .map(|(a, &v)| self.conditional(c, a, v).ln())
                        .sum::<f64>()
            })
            .collect();
        softmax(&log_joint)
    }

    pub fn predict<S: AsRef<str>>(&self, values: &[S]) -> Result<Prediction> {
        let encoded = self.schema.encode(values)?;
        Ok(prediction(&self.schema.class_domain, self.posterior(&encoded)))
    }

    pub fn render(&self) -> String {
        let mut out = format!("naive Bayes, alpha = {}, {} instances\n", self.alpha, self.total);
        for (c, label) in self.schema.class_domain.iter().enumerate() {
            let _ = writeln!(out, "  {label}: prior {:.4} ({})", self.prior(c), self.class_counts[c]);
        }
        out
    }
}
