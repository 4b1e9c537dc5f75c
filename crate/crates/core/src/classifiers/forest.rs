use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Grower, Node};
use super::{argmax, Dataset, Prediction, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub seed: u64,
    pub min_leaf: usize,
    /// Attributes drawn per node; `None` means `ceil(sqrt(m))`.
    pub max_features: Option<usize>,
    /// Train each tree on a bootstrap resample. Turning this off (with all
    /// attributes per node) reduces a one-tree forest to an unpruned tree.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            seed: 42,
            min_leaf: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub schema: Schema,
    pub params: ForestParams,
    pub trees: Vec<Node>,
}

pub fn train_forest(data: &Dataset, params: &ForestParams) -> Result<RandomForest> {
    if params.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if params.min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be at least 1"));
    }
    data.validate()?;
    let labels = data.labels()?;
    let m = data.attributes.len();
    let k = params
        .max_features
        .unwrap_or_else(|| (m as f64).sqrt().ceil() as usize)
        .clamp(1, m.max(1));

    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| master.random()).collect();
    let trees = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = data.len();
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let available: Vec<usize> = (0..m).collect();
            let mut grower = Grower {
                data,
                labels,
                min_leaf: params.min_leaf,
                pick: |avail: &[usize]| {
                    let mut pool = avail.to_vec();
                    pool.shuffle(&mut rng);
                    pool.truncate(k);
                    pool.sort_unstable();
                    pool
                },
            };
            grower.grow(&rows, &available)
        })
        .collect();
    Ok(RandomForest {
        schema: data.schema(),
        params: params.clone(),
        trees,
    })
}

impl RandomForest {
    pub fn predict<S: AsRef<str>>(&self, values: &[S]) -> Result<Prediction> {
        let encoded = self.schema.encode(values)?;
        Ok(self.predict_encoded(&encoded))
    }

    /// Majority vote over tree labels; the distribution is the vote share.
    pub fn predict_encoded(&self, values: &[Option<usize>]) -> Prediction {
        let mut votes = vec![0usize; self.schema.class_domain.len()];
        for tree in &self.trees {
            if let Node::Leaf { label, .. } = tree.route(values) {
                votes[*label] += 1;
            }
        }
        let n = self.trees.len() as f64;
        Prediction {
            label: self.schema.class_domain[argmax(&votes)].clone(),
            distribution: self
                .schema
                .class_domain
                .iter()
                .cloned()
                .zip(votes.iter().map(|&v| v as f64 / n))
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "random forest: {} trees, seed {}, bootstrap {}\n",
            self.trees.len(),
            self.params.seed,
            self.params.bootstrap
        );
        let nodes: usize = self.trees.iter().map(Node::node_count).sum();
        let _ = writeln!(out, "total nodes: {nodes}");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::{a1_determines_label, random_dataset};
    use super::super::tree::{train_tree, TreeParams};
    use super::*;

    #[test]
    fn same_seed_same_forest() {
        let d = random_dataset(8, 100, 5, 3, 3);
        let p = ForestParams {
            n_trees: 10,
            ..Default::default()
        };
        assert_eq!(train_forest(&d, &p).unwrap(), train_forest(&d, &p).unwrap());
        let other = train_forest(&d, &ForestParams { seed: 43, ..p.clone() }).unwrap();
        assert_ne!(other.trees, train_forest(&d, &p).unwrap().trees);
    }

    #[test]
    fn one_tree_without_randomness_is_a_plain_tree() {
        for seed in 0..5 {
            let d = random_dataset(seed, 120, 5, 3, 3);
            let forest = train_forest(
                &d,
                &ForestParams {
                    n_trees: 1,
                    max_features: Some(5),
                    bootstrap: false,
                    ..Default::default()
                },
            )
            .unwrap();
            let tree = train_tree(&d, &TreeParams::unpruned()).unwrap();
            assert_eq!(forest.trees[0], tree.root);
        }
    }

    #[test]
    fn fits_determined_labels() {
        let d = a1_determines_label(4, 90);
        let f = train_forest(&d, &ForestParams { n_trees: 25, ..Default::default() }).unwrap();
        let labels = d.classes.as_ref().unwrap();
        for (row, &c) in d.instances.iter().zip(labels) {
            let enc: Vec<Option<usize>> = row.iter().map(|&v| Some(v)).collect();
            assert_eq!(f.predict_encoded(&enc).label, d.class_domain[c]);
        }
    }

    #[test]
    fn vote_shares() {
        let leaf = |label| Node::Leaf {
            label,
            counts: vec![1, 1],
        };
        let d = a1_determines_label(1, 5);
        let f = RandomForest {
            schema: Schema {
                attributes: d.attributes.clone(),
                class_domain: vec!["N".into(), "V".into()],
            },
            params: ForestParams::default(),
            trees: vec![leaf(0), leaf(0), leaf(1)],
        };
        let p = f.predict(&["v0", "v0", "v0"]).unwrap();
        assert_eq!(p.label, "N");
        assert!((p.distribution[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.distribution[1].1 - 1.0 / 3.0).abs() < 1e-15);

        let tie = RandomForest {
            trees: vec![leaf(1), leaf(0)],
            ..f
        };
        assert_eq!(tie.predict(&["v0", "v0", "v0"]).unwrap().label, "N");
    }
}
