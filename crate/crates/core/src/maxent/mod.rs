//! Log-linear tagger conditioned on the previous tag.
//!
//! Each token is classified by a softmax over tags of summed feature weights.
//! Training uses gold previous tags and minimises L2-regularised negative
//! conditional log-likelihood with L-BFGS; tagging runs a beam search over
//! previous-tag states ([`decode`]).

mod decode;
pub mod lbfgs;
pub mod templates;

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::persist;
use crate::START;

pub use decode::decode;
pub use templates::{extract_history_features, word_shape, FeatureTemplateSet, History, DEFAULT_ARCH};

/// Events per objective chunk is `ceil(n / OBJECTIVE_CHUNKS)`; fixing the
/// chunk count keeps summation order, and hence the loss, independent of
/// the thread count.
const OBJECTIVE_CHUNKS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub l2_lambda: f64,
    /// Relative gradient-norm stopping threshold.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Default beam width recorded for tagging.
    pub beam_width: usize,
    /// Features seen fewer times than this in training are dropped.
    pub feature_count_cutoff: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            l2_lambda: 1.0,
            tolerance: 1e-5,
            max_iterations: 200,
            beam_width: 3,
            feature_count_cutoff: 1,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::invalid("l2_lambda must be finite and non-negative"));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if self.beam_width == 0 {
            return Err(Error::invalid("beam width must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
    pub gradient_norm: f64,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxentModel {
    pub templates: FeatureTemplateSet,
    /// Sorted.
    pub tags: Vec<String>,
    /// Feature strings in id order.
    pub features: Vec<String>,
    /// Row-major `features.len() x tags.len()`.
    pub weights: Vec<f64>,
    pub options: TrainOptions,
    pub summary: TrainingSummary,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for MaxentModel {
    fn eq(&self, other: &Self) -> bool {
        self.templates == other.templates
            && self.tags == other.tags
            && self.features == other.features
            && self.weights == other.weights
            && self.options == other.options
            && self.summary == other.summary
    }
}

/// One training token: active feature ids and the gold tag id.
#[derive(Debug, Clone)]
struct Event {
    features: Vec<usize>,
    gold: usize,
}

impl MaxentModel {
    pub const FORMAT: &'static str = "cmtag-maxent";
    pub const VERSION: u32 = 1;

    /// A model with the given feature inventory and weights. Mostly useful
    /// for tests and hand-built models.
    pub fn from_parts(
        templates: FeatureTemplateSet,
        tags: Vec<String>,
        features: Vec<String>,
        weights: Vec<f64>,
        options: TrainOptions,
    ) -> Result<Self> {
        let mut model = MaxentModel {
            templates,
            tags,
            features,
            weights,
            options,
            summary: TrainingSummary::default(),
            index: HashMap::new(),
        };
        model.rebuild_index()?;
        Ok(model)
    }

    fn rebuild_index(&mut self) -> Result<()> {
        if self.tags.is_empty() {
            return Err(Error::InvalidModel("maxent model has no tags".into()));
        }
        if self.tags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel("maxent tags must be sorted and distinct".into()));
        }
        if self.weights.len() != self.features.len() * self.tags.len() {
            return Err(Error::InvalidModel(format!(
                "{} weights for {} features x {} tags",
                self.weights.len(),
                self.features.len(),
                self.tags.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel("non-finite maxent weight".into()));
        }
        self.index = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        if self.index.len() != self.features.len() {
            return Err(Error::InvalidModel("duplicate maxent feature".into()));
        }
        Ok(())
    }

    pub fn feature_id(&self, feature: &str) -> Option<usize> {
        self.index.get(feature).copied()
    }

    pub fn num_tags(&self) -> usize {
        self.tags.len()
    }

    fn add_weights(&self, feature: usize, scores: &mut [f64]) {
        let t = self.tags.len();
        for (s, w) in scores.iter_mut().zip(&self.weights[feature * t..(feature + 1) * t]) {
            *s += w;
        }
    }

    /// Unnormalised tag scores for a set of feature strings; unknown
    /// features contribute nothing.
    pub fn scores<S: AsRef<str>>(&self, features: &[S]) -> Vec<f64> {
        let mut scores = vec![0.0; self.tags.len()];
        for f in features {
            if let Some(id) = self.feature_id(f.as_ref()) {
                self.add_weights(id, &mut scores);
            }
        }
        scores
    }

    /// `P(tag | history)` for every tag, in `self.tags` order.
    pub fn tag_probabilities(&self, history: &History<'_>) -> Vec<f64> {
        softmax(&self.scores(&extract_history_features(history, &self.templates)))
    }

    fn events(&self, corpus: &Corpus) -> Result<Vec<Event>> {
        let tag_id: HashMap<&str, usize> = self.tags.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut events = Vec::with_capacity(corpus.token_count());
        for sentence in &corpus.sentences {
            let words: Vec<&str> = sentence.forms().collect();
            let gold = sentence.tags().ok_or(Error::Untagged)?;
            for i in 0..words.len() {
                let prev = if i == 0 { START } else { gold[i - 1] };
                let h = History {
                    words: &words,
                    position: i,
                    prev_tag: prev,
                };
                let features = extract_history_features(&h, &self.templates)
                    .iter()
                    .filter_map(|f| self.feature_id(f))
                    .collect();
                let gold = *tag_id
                    .get(gold[i])
                    .ok_or_else(|| Error::invalid(format!("tag {:?} unknown to the model", gold[i])))?;
                events.push(Event { features, gold });
            }
        }
        Ok(events)
    }

    pub fn decode(&self, words: &[&str], beam_width: usize) -> Result<Vec<String>> {
        decode(self, words, beam_width)
    }

    /// Tags every sentence of `corpus` (existing tags are ignored).
    pub fn tag_corpus(&self, corpus: &Corpus, beam_width: usize) -> Result<Corpus> {
        let sentences = corpus
            .sentences
            .par_iter()
            .map(|s| {
                let words: Vec<&str> = s.forms().collect();
                s.with_tags(&self.decode(&words, beam_width)?)
            })
            .collect::<Result<Vec<Sentence>>>()?;
        Ok(Corpus {
            sentences,
            tagged: true,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        persist::to_json(Self::FORMAT, Self::VERSION, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: MaxentModel = persist::from_json(Self::FORMAT, Self::VERSION, text)?;
        model.rebuild_index()?;
        Ok(model)
    }
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub(crate) fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

fn event_objective(events: &[Event], weights: &[f64], num_tags: usize, l2: f64) -> (f64, Vec<f64>) {
    let chunk = events.len().div_ceil(OBJECTIVE_CHUNKS).max(1);
    let partials: Vec<(f64, Vec<f64>)> = events
        .par_chunks(chunk)
        .map(|events| {
            let mut loss = 0.0;
            let mut grad = vec![0.0; weights.len()];
            let mut scores = vec![0.0; num_tags];
            for e in events {
                scores.iter_mut().for_each(|s| *s = 0.0);
                for &f in &e.features {
                    for (s, w) in scores.iter_mut().zip(&weights[f * num_tags..(f + 1) * num_tags]) {
                        *s += w;
                    }
                }
                let lse = log_sum_exp(&scores);
                loss += lse - scores[e.gold];
                for &f in &e.features {
                    let row = &mut grad[f * num_tags..(f + 1) * num_tags];
                    for (t, g) in row.iter_mut().enumerate() {
                        *g += (scores[t] - lse).exp();
                    }
                    row[e.gold] -= 1.0;
                }
            }
            (loss, grad)
        })
        .collect();

    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (l, g) in partials {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    if l2 > 0.0 {
        loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
        grad.iter_mut().zip(weights).for_each(|(g, w)| *g += l2 * w);
    }
    (loss, grad)
}

/// Regularised negative conditional log-likelihood of `data` under `model`
/// (gold previous tags), and its gradient with respect to `model.weights`.
pub fn objective(model: &MaxentModel, data: &Corpus) -> Result<(f64, Vec<f64>)> {
    data.require_tagged()?;
    let events = model.events(data)?;
    Ok(event_objective(&events, &model.weights, model.num_tags(), model.options.l2_lambda))
}

pub fn train_maxent(data: &Corpus, templates: &FeatureTemplateSet, opts: &TrainOptions) -> Result<MaxentModel> {
    train_maxent_with_init(data, templates, opts, |n| vec![0.0; n])
}

/// As [`train_maxent`], starting the optimiser from `init(num_weights)`.
pub fn train_maxent_with_init(
    data: &Corpus,
    templates: &FeatureTemplateSet,
    opts: &TrainOptions,
    init: impl FnOnce(usize) -> Vec<f64>,
) -> Result<MaxentModel> {
    opts.validate()?;
    data.require_tagged()?;
    let tags: Vec<String> = data
        .tokens()
        .filter_map(|t| t.tag.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for sentence in &data.sentences {
        let words: Vec<&str> = sentence.forms().collect();
        let gold = sentence.tags().ok_or(Error::Untagged)?;
        for i in 0..words.len() {
            let h = History {
                words: &words,
                position: i,
                prev_tag: if i == 0 { START } else { gold[i - 1] },
            };
            for f in extract_history_features(&h, templates) {
                let n = counts.entry(f.clone()).or_insert(0);
                if *n == 0 {
                    order.push(f);
                }
                *n += 1;
            }
        }
    }
    let features: Vec<String> = order
        .into_iter()
        .filter(|f| counts[f] >= opts.feature_count_cutoff)
        .collect();
    if features.is_empty() {
        return Err(Error::invalid("no features survive the count cutoff"));
    }

    let num_weights = features.len() * tags.len();
    let mut model = MaxentModel::from_parts(templates.clone(), tags, features, vec![0.0; num_weights], opts.clone())?;
    let start = init(num_weights);
    if start.len() != num_weights {
        return Err(Error::invalid("initial weight vector has the wrong length"));
    }

    let events = model.events(data)?;
    let num_tags = model.num_tags();
    let settings = lbfgs::LbfgsSettings {
        tolerance: opts.tolerance,
        max_iterations: opts.max_iterations,
        ..Default::default()
    };
    let outcome = lbfgs::minimize(
        |w| event_objective(&events, w, num_tags, opts.l2_lambda),
        start,
        &settings,
    )?;
    if !outcome.loss.is_finite() || outcome.x.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical("maxent training diverged".into()));
    }
    model.weights = outcome.x;
    model.summary = TrainingSummary {
        iterations: outcome.iterations,
        converged: outcome.converged,
        final_loss: outcome.loss,
        gradient_norm: outcome.gradient_norm,
        loss_history: outcome.loss_history,
    };
    Ok(model)
}
