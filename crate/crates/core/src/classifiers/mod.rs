//! Categorical classifiers: a C4.5-style decision tree, naive Bayes with
//! additive smoothing, and a random forest of unpruned trees.
//!
//! Attribute values and class labels are strings; datasets encode them as
//! indices into sorted per-attribute domains.

mod bayes;
mod forest;
mod tree;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persist;

pub use bayes::{train_nb, NaiveBayesModel};
pub use forest::{train_forest, ForestParams, RandomForest};
pub use tree::{add_errors, entropy, split_scores, train_tree, DecisionTree, Node, SplitScore, TreeParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    /// Sorted, distinct.
    pub domain: Vec<String>,
}

/// Attribute and class value domains, stored with every trained model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<Attribute>,
    pub class_domain: Vec<String>,
}

impl Schema {
    /// Encodes raw values; values outside an attribute's domain become `None`.
    pub fn encode<S: AsRef<str>>(&self, values: &[S]) -> Result<Vec<Option<usize>>> {
        if values.len() != self.attributes.len() {
            return Err(Error::invalid(format!(
                "instance has {} values, model expects {}",
                values.len(),
                self.attributes.len()
            )));
        }
        Ok(values
            .iter()
            .zip(&self.attributes)
            .map(|(v, a)| a.domain.binary_search_by(|d| d.as_str().cmp(v.as_ref())).ok())
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub attributes: Vec<Attribute>,
    /// Value ids, one row per instance.
    pub instances: Vec<Vec<usize>>,
    pub class_domain: Vec<String>,
    /// Class ids, present for training data.
    pub classes: Option<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from string rows. Domains are the observed values
    /// plus `extra_values`, sorted.
    pub fn from_rows<S: AsRef<str>>(
        names: &[&str],
        rows: &[Vec<S>],
        labels: Option<&[S]>,
        extra_values: &[&str],
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("dataset has no instances"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != names.len()) {
            return Err(Error::invalid(format!(
                "row has {} values, expected {}",
                bad.len(),
                names.len()
            )));
        }
        let attributes: Vec<Attribute> = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let mut domain: BTreeSet<String> = rows.iter().map(|r| r[j].as_ref().to_string()).collect();
                domain.extend(extra_values.iter().map(|v| v.to_string()));
                Attribute {
                    name: name.to_string(),
                    domain: domain.into_iter().collect(),
                }
            })
            .collect();
        let schema = Schema {
            attributes,
            class_domain: Vec::new(),
        };
        let instances = rows
            .iter()
            .map(|r| {
                schema
                    .encode(r)
                    .map(|e| e.into_iter().map(|v| v.expect("value in its own domain")).collect())
            })
            .collect::<Result<Vec<Vec<usize>>>>()?;
        let (class_domain, classes) = match labels {
            None => (Vec::new(), None),
            Some(labels) => {
                if labels.len() != rows.len() {
                    return Err(Error::invalid("label count differs from row count"));
                }
                let domain: Vec<String> = labels
                    .iter()
                    .map(|l| l.as_ref().to_string())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let ids = labels
                    .iter()
                    .map(|l| domain.binary_search_by(|d| d.as_str().cmp(l.as_ref())).expect("label in domain"))
                    .collect();
                (domain, Some(ids))
            }
        };
        Ok(Dataset {
            attributes: schema.attributes,
            instances,
            class_domain,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn schema(&self) -> Schema {
        Schema {
            attributes: self.attributes.clone(),
            class_domain: self.class_domain.clone(),
        }
    }

    /// Class ids, or an error for unlabeled or empty data.
    pub fn labels(&self) -> Result<&[usize]> {
        if self.instances.is_empty() {
            return Err(Error::invalid("dataset has no instances"));
        }
        let labels = self
            .classes
            .as_deref()
            .ok_or_else(|| Error::invalid("dataset is unlabeled"))?;
        if labels.len() != self.instances.len() {
            return Err(Error::invalid("label count differs from instance count"));
        }
        Ok(labels)
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.instances {
            if row.len() != self.attributes.len() {
                return Err(Error::invalid("instance arity differs from attribute count"));
            }
            if row.iter().zip(&self.attributes).any(|(&v, a)| v >= a.domain.len()) {
                return Err(Error::invalid("instance value outside its attribute domain"));
            }
        }
        if let Some(c) = &self.classes {
            if c.iter().any(|&c| c >= self.class_domain.len()) {
                return Err(Error::invalid("class id outside the class domain"));
            }
        }
        Ok(())
    }

    /// Header row of attribute names (plus `class` when labeled), then one
    /// comma-separated row per instance.
    pub fn to_csv(&self) -> String {
        let mut out = self
            .attributes
            .iter()
            .map(|a| a.name.as_str())
            .collect::<Vec<_>>()
            .join(",");
        if self.classes.is_some() {
            out.push_str(",class");
        }
        out.push('\n');
        for (i, row) in self.instances.iter().enumerate() {
            let mut fields: Vec<&str> = row
                .iter()
                .zip(&self.attributes)
                .map(|(&v, a)| a.domain[v].as_str())
                .collect();
            if let Some(c) = &self.classes {
                fields.push(&self.class_domain[c[i]]);
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Predicted label with a distribution over the model's class domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub distribution: Vec<(String, f64)>,
}

/// Index of the maximum; ties go to the lowest index.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn prediction(class_domain: &[String], distribution: Vec<f64>) -> Prediction {
    let label = class_domain[argmax(&distribution)].clone();
    Prediction {
        label,
        distribution: class_domain.iter().cloned().zip(distribution).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ClassifierModel {
    J48(DecisionTree),
    NaiveBayes(NaiveBayesModel),
    RandomForest(RandomForest),
}

impl ClassifierModel {
    pub const FORMAT: &'static str = "cmtag-classifier";
    pub const VERSION: u32 = 1;

    pub fn schema(&self) -> &Schema {
        match self {
            ClassifierModel::J48(m) => &m.schema,
            ClassifierModel::NaiveBayes(m) => &m.schema,
            ClassifierModel::RandomForest(m) => &m.schema,
        }
    }

    pub fn predict<S: AsRef<str>>(&self, values: &[S]) -> Result<Prediction> {
        match self {
            ClassifierModel::J48(m) => m.predict(values),
            ClassifierModel::NaiveBayes(m) => m.predict(values),
            ClassifierModel::RandomForest(m) => m.predict(values),
        }
    }

    /// Human-readable rendering: the tree itself, or a summary for the
    /// other model kinds.
    pub fn describe(&self) -> String {
        match self {
            ClassifierModel::J48(t) => t.render(),
            ClassifierModel::NaiveBayes(m) => m.render(),
            ClassifierModel::RandomForest(f) => f.render(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        persist::to_json(Self::FORMAT, Self::VERSION, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        persist::from_json(Self::FORMAT, Self::VERSION, text)
    }
}
