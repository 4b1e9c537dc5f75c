//! C4.5-style decision tree over categorical attributes.
//!
//! Splits are multiway. The split attribute maximises gain ratio among
//! candidates whose information gain is at least the mean candidate gain.
//! Optional pruning replaces a subtree by a leaf when the leaf's pessimistic
//! error estimate is no worse than the subtree's.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{argmax, prediction, Dataset, Prediction, Schema};
use crate::error::{Error, Result};

/// Ratio and gain comparisons treat differences below this as ties.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub confidence: f64,
    pub prune: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 2,
            confidence: 0.25,
            prune: true,
        }
    }
}

impl TreeParams {
    pub fn unpruned() -> Self {
        TreeParams {
            prune: false,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::invalid("min_leaf must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence <= 0.5) {
            return Err(Error::invalid("pruning confidence must be in (0, 0.5]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub value: usize,
    pub node: Node,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: usize,
        /// Training instances per class that reached this node.
        counts: Vec<u64>,
    },
    Split {
        attribute: usize,
        counts: Vec<u64>,
        /// One branch per attribute value seen at this node.
        children: Vec<Branch>,
        /// Index into `children` taken by values with no branch: the child
        /// holding the most training instances.
        fallback: usize,
    },
}

impl Node {
    pub fn counts(&self) -> &[u64] {
        match self {
            Node::Leaf { counts, .. } | Node::Split { counts, .. } => counts,
        }
    }

    fn leaf(counts: Vec<u64>) -> Node {
        Node::Leaf {
            label: argmax(&counts),
            counts,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { children, .. } => 1 + children.iter().map(|b| b.node.node_count()).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { children, .. } => 1 + children.iter().map(|b| b.node.depth()).max().unwrap_or(0),
        }
    }

    /// The leaf an encoded instance reaches.
    pub fn route(&self, values: &[Option<usize>]) -> &Node {
        let mut node = self;
        while let Node::Split {
            attribute,
            children,
            fallback,
            ..
        } = node
        {
            let branch = values[*attribute]
                .and_then(|v| children.iter().find(|b| b.value == v))
                .unwrap_or(&children[*fallback]);
            node = &branch.node;
        }
        node
    }
}

pub fn entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitScore {
    pub attribute: usize,
    pub gain: f64,
    pub split_info: f64,
    pub gain_ratio: f64,
}

/// Scores every attribute in `available` taking at least two values on `rows`.
pub fn split_scores(data: &Dataset, labels: &[usize], rows: &[usize], available: &[usize]) -> Vec<SplitScore> {
    let k = data.class_domain.len();
    let mut parent = vec![0u64; k];
    for &r in rows {
        parent[labels[r]] += 1;
    }
    let base = entropy(&parent);
    let n = rows.len() as f64;
    let mut out = Vec::new();
    for &a in available {
        let arity = data.attributes[a].domain.len();
        let mut table = vec![vec![0u64; k]; arity];
        for &r in rows {
            table[data.instances[r][a]][labels[r]] += 1;
        }
        let sizes: Vec<u64> = table.iter().map(|row| row.iter().sum()).collect();
        if sizes.iter().filter(|&&s| s > 0).count() < 2 {
            continue;
        }
        let mut remainder = 0.0;
        let mut split_info = 0.0;
        for (row, &size) in table.iter().zip(&sizes) {
            if size == 0 {
                continue;
            }
            let w = size as f64 / n;
            remainder += w * entropy(row);
            split_info -= w * w.log2();
        }
        let gain = base - remainder;
        out.push(SplitScore {
            attribute: a,
            gain,
            split_info,
            gain_ratio: gain / split_info,
        });
    }
    out
}

/// Best gain ratio among candidates with at least mean gain; ties go to the
/// lowest attribute id.
pub(crate) fn choose_split(mut scores: Vec<SplitScore>) -> Option<SplitScore> {
    if scores.is_empty() {
        return None;
    }
    scores.sort_by_key(|s| s.attribute);
    let mean = scores.iter().map(|s| s.gain).sum::<f64>() / scores.len() as f64;
    let mut best: Option<SplitScore> = None;
    for s in scores.into_iter().filter(|s| s.gain >= mean - TIE_EPS) {
        if best.as_ref().is_none_or(|b| s.gain_ratio > b.gain_ratio + TIE_EPS) {
            best = Some(s);
        }
    }
    best
}

/// Recursive induction shared by single trees and forest members. `pick`
/// narrows the attributes considered at each node.
pub(crate) struct Grower<'a, P: FnMut(&[usize]) -> Vec<usize>> {
    pub data: &'a Dataset,
    pub labels: &'a [usize],
    pub min_leaf: usize,
    pub pick: P,
}

impl<P: FnMut(&[usize]) -> Vec<usize>> Grower<'_, P> {
    pub fn grow(&mut self, rows: &[usize], available: &[usize]) -> Node {
        let mut counts = vec![0u64; self.data.class_domain.len()];
        for &r in rows {
            counts[self.labels[r]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || available.is_empty() || rows.len() < self.min_leaf {
            return Node::leaf(counts);
        }
        let mut considered = (self.pick)(available);
        let mut choice = choose_split(split_scores(self.data, self.labels, rows, &considered));
        if choice.is_none() && considered.len() < available.len() {
            considered = available.to_vec();
            choice = choose_split(split_scores(self.data, self.labels, rows, &considered));
        }
        let Some(split) = choice else {
            return Node::leaf(counts);
        };

        let a = split.attribute;
        let arity = self.data.attributes[a].domain.len();
        let mut parts: Vec<Vec<usize>> = vec![Vec::new(); arity];
        for &r in rows {
            parts[self.data.instances[r][a]].push(r);
        }
        let rest: Vec<usize> = available.iter().copied().filter(|&x| x != a).collect();
        let mut children = Vec::new();
        let mut fallback = 0;
        let mut largest = 0;
        for (value, part) in parts.iter().enumerate() {
            if part.is_empty() {
                continue;
            }
            if part.len() > largest {
                largest = part.len();
                fallback = children.len();
            }
            children.push(Branch {
                value,
                node: self.grow(part, &rest),
            });
        }
        Node::Split {
            attribute: a,
            counts,
            children,
            fallback,
        }
    }
}

/// Upper-confidence extra errors for `errors` observed among `n` instances
/// (the binomial bound C4.5 uses for pessimistic pruning).
pub fn add_errors(n: f64, errors: f64, confidence: f64) -> f64 {
    if errors < 1.0 {
        let base = n * (1.0 - confidence.powf(1.0 / n));
        if errors == 0.0 {
            return base;
        }
        return base + errors * (add_errors(n, 1.0, confidence) - base);
    }
    if errors + 0.5 >= n {
        return (n - errors).max(0.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - confidence);
    let f = (errors + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt()) / (1.0 + z * z / n);
    r * n - errors
}

fn leaf_estimate(counts: &[u64], confidence: f64) -> f64 {
    let n: u64 = counts.iter().sum();
    let errors = (n - counts.iter().max().copied().unwrap_or(0)) as f64;
    errors + add_errors(n as f64, errors, confidence)
}

/// Bottom-up subtree replacement; returns the node's estimated error count.
fn prune(node: &mut Node, confidence: f64) -> f64 {
    let Node::Split { children, counts, .. } = node else {
        return leaf_estimate(node.counts(), confidence);
    };
    let subtree: f64 = children.iter_mut().map(|b| prune(&mut b.node, confidence)).sum();
    let as_leaf = leaf_estimate(counts, confidence);
    if as_leaf <= subtree + 0.1 {
        *node = Node::leaf(counts.clone());
        as_leaf
    } else {
        subtree
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub schema: Schema,
    pub params: TreeParams,
    pub root: Node,
}

pub fn train_tree(data: &Dataset, params: &TreeParams) -> Result<DecisionTree> {
    params.validate()?;
    data.validate()?;
    let labels = data.labels()?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let available: Vec<usize> = (0..data.attributes.len()).collect();
    let mut grower = Grower {
        data,
        labels,
        min_leaf: params.min_leaf,
        pick: |a: &[usize]| a.to_vec(),
    };
    let mut root = grower.grow(&rows, &available);
    if params.prune {
        prune(&mut root, params.confidence);
    }
    Ok(DecisionTree {
        schema: data.schema(),
        params: params.clone(),
        root,
    })
}

pub(crate) fn leaf_distribution(node: &Node) -> Vec<f64> {
    let counts = node.counts();
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
}

impl DecisionTree {
    pub fn predict<S: AsRef<str>>(&self, values: &[S]) -> Result<Prediction> {
        let encoded = self.schema.encode(values)?;
        Ok(self.predict_encoded(&encoded))
    }

    pub fn predict_encoded(&self, values: &[Option<usize>]) -> Prediction {
        let leaf = self.root.route(values);
        let mut p = prediction(&self.schema.class_domain, leaf_distribution(leaf));
        if let Node::Leaf { label, .. } = leaf {
            p.label = self.schema.class_domain[*label].clone();
        }
        p
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        render_node(&self.schema, &self.root, 0, &mut out);
        let _ = writeln!(
            out,
            "\nleaves: {}  nodes: {}",
            count_leaves(&self.root),
            self.root.node_count()
        );
        out
    }
}

fn count_leaves(node: &Node) -> usize {
    match node {
        Node::Leaf { .. } => 1,
        Node::Split { children, .. } => children.iter().map(|b| count_leaves(&b.node)).sum(),
    }
}

fn leaf_text(schema: &Schema, label: usize, counts: &[u64]) -> String {
    let n: u64 = counts.iter().sum();
    format!("{} ({}/{})", schema.class_domain[label], n, n - counts[label])
}

fn render_node(schema: &Schema, node: &Node, depth: usize, out: &mut String) {
    match node {
        Node::Leaf { label, counts } if depth == 0 => {
            let _ = writeln!(out, ": {}", leaf_text(schema, *label, counts));
        }
        Node::Leaf { .. } => {}
        Node::Split {
            attribute, children, ..
        } => {
            let attr = &schema.attributes[*attribute];
            for b in children {
                let indent = "|   ".repeat(depth);
                let _ = write!(out, "{indent}{} = {}", attr.name, attr.domain[b.value]);
                match &b.node {
                    Node::Leaf { label, counts } => {
                        let _ = writeln!(out, ": {}", leaf_text(schema, *label, counts));
                    }
                    child => {
                        out.push('\n');
                        render_node(schema, child, depth + 1, out);
                    }
                }
            }
        }
    }
}
