//! Skip-gram word embeddings trained with negative sampling, and cosine
//! nearest-neighbour queries over the learned word vectors.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::lexicon::normalize;
use crate::persist;

/// Exponent applied to unigram counts when drawing negatives.
pub const DISTORTION: f64 = 0.75;
/// The learning rate never decays below `learning_rate * MIN_LR_FRACTION`.
pub const MIN_LR_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Maximum window; the effective window is drawn from `1..=window` per position.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: u64,
    pub seed: u64,
    pub lowercase: bool,
    /// Frequent-word subsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
    /// 1 runs the bit-reproducible sequential trainer. Larger values train
    /// shards independently and average parameters after each epoch.
    pub threads: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 1,
            seed: 42,
            lowercase: false,
            subsample: None,
            threads: 1,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
            ("threads", self.threads),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("embedding {name} must be at least 1")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("embedding learning rate must be positive"));
        }
        if let Some(t) = self.subsample {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::invalid("subsample threshold must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    words: Vec<String>,
    counts: Vec<u64>,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        Vocab::from_parts(r.words, r.counts)
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            words: v.words,
            counts: v.counts,
        }
    }
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words && self.counts == other.counts
    }
}

impl Vocab {
    fn from_parts(words: Vec<String>, counts: Vec<u64>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, counts, index }
    }

    /// Collects forms from every corpus (tags ignored), drops words seen fewer
    /// than `min_count` times, and orders ids by descending count then word.
    pub fn build(corpora: &[&Corpus], min_count: u64, lowercase: bool) -> Result<Self> {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for corpus in corpora {
            for t in corpus.tokens() {
                *counts.entry(normalize(&t.form, lowercase)).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|&(_, n)| n >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::invalid("vocabulary is empty after min_count filtering"));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (words, counts) = kept.into_iter().unzip();
        Ok(Vocab::from_parts(words, counts))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub vocab: Vocab,
    pub config: EmbeddingConfig,
    /// Word vectors, one row per vocabulary id. Similarity uses these only.
    pub input: Vec<Vec<f64>>,
    /// Context vectors.
    pub output: Vec<Vec<f64>>,
    #[serde(skip)]
    norms: OnceLock<Vec<f64>>,
}

impl PartialEq for EmbeddingModel {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab
            && self.config == other.config
            && self.input == other.input
            && self.output == other.output
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!("vector lengths differ: {} vs {}", u.len(), v.len())));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("cosine of a zero vector"));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss of one (center, context) pair with its sampled negatives, and the
/// scalar factors from which every gradient is formed:
/// `d/d center = pos_coef * positive + sum_j neg_coef[j] * negative[j]`,
/// `d/d positive = pos_coef * center`, `d/d negative[j] = neg_coef[j] * center`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerms {
    pub loss: f64,
    pub pos_coef: f64,
    pub neg_coefs: Vec<f64>,
}

pub fn pair_terms(center: &[f64], positive: &[f64], negatives: &[&[f64]]) -> PairTerms {
    let s = dot(center, positive);
    let mut loss = softplus(-s);
    let pos_coef = sigmoid(s) - 1.0;
    let neg_coefs = negatives
        .iter()
        .map(|n| {
            let s = dot(center, n);
            loss += softplus(s);
            sigmoid(s)
        })
        .collect();
    PairTerms {
        loss,
        pos_coef,
        neg_coefs,
    }
}

/// Full gradients of the pair loss, expanded from [`pair_terms`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn pair_gradient(center: &[f64], positive: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let terms = pair_terms(center, positive, negatives);
    let mut g_center: Vec<f64> = positive.iter().map(|p| terms.pos_coef * p).collect();
    for (n, &c) in negatives.iter().zip(&terms.neg_coefs) {
        for (g, x) in g_center.iter_mut().zip(n.iter()) {
            *g += c * x;
        }
    }
    PairGradient {
        loss: terms.loss,
        center: g_center,
        positive: center.iter().map(|x| terms.pos_coef * x).collect(),
        negatives: terms
            .neg_coefs
            .iter()
            .map(|&c| center.iter().map(|x| c * x).collect())
            .collect(),
    }
}

struct Params {
    input: Vec<Vec<f64>>,
    output: Vec<Vec<f64>>,
}

/// Everything one pass over a set of sentences needs besides the parameters.
struct Pass<'a> {
    cfg: &'a EmbeddingConfig,
    noise: &'a WeightedIndex<f64>,
    keep_prob: Option<&'a [f64]>,
    total_updates: f64,
}

impl Pass<'_> {
    /// One epoch over `sentences`; returns (loss sum, pair count).
    fn run(
        &self,
        params: &mut Params,
        sentences: &[Vec<usize>],
        rng: &mut ChaCha8Rng,
        processed: &mut u64,
        progress_scale: f64,
    ) -> Result<(f64, u64)> {
        let cfg = self.cfg;
        let mut loss_sum = 0.0;
        let mut pairs = 0u64;
        let mut grad_center = vec![0.0; cfg.dim];
        let mut negs: Vec<usize> = Vec::with_capacity(cfg.negatives);
        let mut kept: Vec<usize> = Vec::new();

        for sentence in sentences {
            kept.clear();
            match self.keep_prob {
                Some(p) => kept.extend(sentence.iter().copied().filter(|&w| rng.random::<f64>() < p[w])),
                None => kept.extend_from_slice(sentence),
            }
            for i in 0..kept.len() {
                let progress = (*processed as f64 * progress_scale) / self.total_updates;
                let lr = (cfg.learning_rate * (1.0 - progress)).max(cfg.learning_rate * MIN_LR_FRACTION);
                *processed += 1;

                let b = rng.random_range(1..=cfg.window);
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(kept.len() - 1);
                let center = kept[i];
                for (j, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    negs.clear();
                    for _ in 0..cfg.negatives {
                        let n = self.noise.sample(rng);
                        if n != context {
                            negs.push(n);
                        }
                    }
                    let neg_rows: Vec<&[f64]> = negs.iter().map(|&n| params.output[n].as_slice()).collect();
                    let terms = pair_terms(&params.input[center], &params.output[context], &neg_rows);
                    if !terms.loss.is_finite() {
                        return Err(Error::Numerical(
                            "non-finite skip-gram loss; learning rate too large?".into(),
                        ));
                    }
                    loss_sum += terms.loss;
                    pairs += 1;

                    for (g, p) in grad_center.iter_mut().zip(&params.output[context]) {
                        *g = terms.pos_coef * p;
                    }
                    for (&n, &c) in negs.iter().zip(&terms.neg_coefs) {
                        for (g, x) in grad_center.iter_mut().zip(&params.output[n]) {
                            *g += c * x;
                        }
                    }
                    let (input, output) = (&mut params.input, &mut params.output);
                    let center_row = &input[center];
                    for (o, x) in output[context].iter_mut().zip(center_row) {
                        *o -= lr * terms.pos_coef * x;
                    }
                    for (&n, &c) in negs.iter().zip(&terms.neg_coefs) {
                        for (o, x) in output[n].iter_mut().zip(center_row) {
                            *o -= lr * c * x;
                        }
                    }
                    for (v, g) in input[center].iter_mut().zip(&grad_center) {
                        *v -= lr * g;
                    }
                }
            }
        }
        Ok((loss_sum, pairs))
    }
}

/// Trained model plus the mean pair loss of every epoch.
#[derive(Debug, Clone)]
pub struct TrainedEmbeddings {
    pub model: EmbeddingModel,
    pub epoch_losses: Vec<f64>,
}

pub fn train_skipgram(corpora: &[&Corpus], cfg: &EmbeddingConfig) -> Result<EmbeddingModel> {
    train_skipgram_logged(corpora, cfg).map(|t| t.model)
}

pub fn train_skipgram_logged(corpora: &[&Corpus], cfg: &EmbeddingConfig) -> Result<TrainedEmbeddings> {
    cfg.validate()?;
    let vocab = Vocab::build(corpora, cfg.min_count, cfg.lowercase)?;
    let sentences: Vec<Vec<usize>> = corpora
        .iter()
        .flat_map(|c| c.sentences.iter())
        .map(|s| {
            s.forms()
                .filter_map(|f| vocab.id(&normalize(f, cfg.lowercase)))
                .collect::<Vec<_>>()
        })
        .filter(|s| s.len() > 1)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / cfg.dim as f64;
    let mut params = Params {
        input: (0..vocab.len())
            .map(|_| (0..cfg.dim).map(|_| rng.random_range(-half..half)).collect())
            .collect(),
        output: vec![vec![0.0; cfg.dim]; vocab.len()],
    };

    let noise = WeightedIndex::new(vocab.counts().iter().map(|&c| (c as f64).powf(DISTORTION)))
        .map_err(|e| Error::Numerical(format!("noise distribution: {e}")))?;
    let total_count: u64 = vocab.counts().iter().sum();
    let keep_prob: Option<Vec<f64>> = cfg.subsample.map(|t| {
        vocab
            .counts()
            .iter()
            .map(|&c| {
                let f = c as f64 / total_count as f64;
                ((t / f).sqrt()).min(1.0)
            })
            .collect()
    });
    let positions: usize = sentences.iter().map(Vec::len).sum();
    let pass = Pass {
        cfg,
        noise: &noise,
        keep_prob: keep_prob.as_deref(),
        total_updates: (cfg.epochs * positions.max(1)) as f64,
    };

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    if cfg.threads == 1 || sentences.len() < 2 {
        let mut processed = 0u64;
        for _ in 0..cfg.epochs {
            let (loss, pairs) = pass.run(&mut params, &sentences, &mut rng, &mut processed, 1.0)?;
            epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
        }
    } else {
        let shard_len = sentences.len().div_ceil(cfg.threads);
        let shards: Vec<&[Vec<usize>]> = sentences.chunks(shard_len).collect();
        let scale = shards.len() as f64;
        let shard_seeds: Vec<u64> = (0..cfg.epochs * shards.len()).map(|_| rng.random()).collect();
        let mut processed_per_shard = vec![0u64; shards.len()];
        for epoch in 0..cfg.epochs {
            let results: Vec<Result<(Params, f64, u64, u64)>> = shards
                .par_iter()
                .zip(processed_per_shard.par_iter())
                .enumerate()
                .map(|(s, (shard, &done))| {
                    let mut local = Params {
                        input: params.input.clone(),
                        output: params.output.clone(),
                    };
                    let mut rng = ChaCha8Rng::seed_from_u64(shard_seeds[epoch * shards.len() + s]);
                    let mut processed = done;
                    let (loss, pairs) = pass.run(&mut local, shard, &mut rng, &mut processed, scale)?;
                    Ok((local, loss, pairs, processed))
                })
                .collect();
            let results = results.into_iter().collect::<Result<Vec<_>>>()?;
            let inv = 1.0 / results.len() as f64;
            for row in params.input.iter_mut().chain(params.output.iter_mut()) {
                row.iter_mut().for_each(|x| *x = 0.0);
            }
            let (mut loss, mut pairs) = (0.0, 0u64);
            for (s, (local, l, p, done)) in results.into_iter().enumerate() {
                for (dst, src) in params.input.iter_mut().zip(&local.input) {
                    dst.iter_mut().zip(src).for_each(|(d, x)| *d += inv * x);
                }
                for (dst, src) in params.output.iter_mut().zip(&local.output) {
                    dst.iter_mut().zip(src).for_each(|(d, x)| *d += inv * x);
                }
                loss += l;
                pairs += p;
                processed_per_shard[s] = done;
            }
            epoch_losses.push(if pairs == 0 { 0.0 } else { loss / pairs as f64 });
        }
    }

    if params.input.iter().chain(&params.output).flatten().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite embedding parameters".into()));
    }
    Ok(TrainedEmbeddings {
        model: EmbeddingModel::from_parts(vocab, cfg.clone(), params.input, params.output)?,
        epoch_losses,
    })
}

impl EmbeddingModel {
    pub const FORMAT: &'static str = "cmtag-embeddings";
    pub const VERSION: u32 = 1;

    pub fn from_parts(
        vocab: Vocab,
        config: EmbeddingConfig,
        input: Vec<Vec<f64>>,
        output: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let model = EmbeddingModel {
            vocab,
            config,
            input,
            output,
            norms: OnceLock::new(),
        };
        model.validate()?;
        Ok(model)
    }

    /// A model built from hand-set word vectors; context vectors are zero.
    pub fn from_vectors(words: &[&str], vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        let vocab = Vocab::from_parts(words.iter().map(|w| w.to_string()).collect(), vec![1; words.len()]);
        let config = EmbeddingConfig {
            dim,
            ..EmbeddingConfig::default()
        };
        let output = vec![vec![0.0; dim]; words.len()];
        EmbeddingModel::from_parts(vocab, config, vectors, output)
    }

    fn validate(&self) -> Result<()> {
        let n = self.vocab.len();
        if self.vocab.index.len() != n || self.vocab.counts.len() != n {
            return Err(Error::InvalidModel("vocabulary words must be distinct".into()));
        }
        if self.input.len() != n || self.output.len() != n {
            return Err(Error::InvalidModel("embedding matrices must have one row per word".into()));
        }
        let dim = self.config.dim;
        if dim == 0 || self.input.iter().chain(&self.output).any(|r| r.len() != dim) {
            return Err(Error::InvalidModel(format!("embedding rows must have length {dim}")));
        }
        if self.input.iter().chain(&self.output).flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("non-finite embedding value".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vocab
            .id(&normalize(word, self.config.lowercase))
            .map(|i| self.input[i].as_slice())
    }

    fn norms(&self) -> &[f64] {
        self.norms.get_or_init(|| self.input.iter().map(|r| norm(r)).collect())
    }

    /// Top-`k` words by cosine similarity of word vectors, excluding the query,
    /// most similar first with ties in word order.
    pub fn nearest(&self, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let key = normalize(word, self.config.lowercase);
        let q = self.vocab.id(&key).ok_or_else(|| Error::OutOfVocabulary(key.clone()))?;
        let norms = self.norms();
        if norms[q] == 0.0 {
            return Err(Error::invalid(format!("word {key:?} has a zero vector")));
        }
        let query = &self.input[q];
        let mut scored: Vec<(usize, f64)> = (0..self.vocab.len())
            .filter(|&i| i != q && norms[i] > 0.0)
            .map(|i| (i, (dot(query, &self.input[i]) / (norms[q] * norms[i])).clamp(-1.0, 1.0)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.vocab.word(a.0).cmp(self.vocab.word(b.0)))
        });
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(i, s)| (self.vocab.word(i).to_string(), s))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        persist::to_json(Self::FORMAT, Self::VERSION, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: EmbeddingModel = persist::from_json(Self::FORMAT, Self::VERSION, text)?;
        model.validate()?;
        Ok(model)
    }

    /// Conventional text layout: a `<vocab_size> <dim>` header, then each word
    /// followed by its vector.
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.vocab.len(), self.dim());
        for (w, row) in self.vocab.words.iter().zip(&self.input) {
            if w.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!(
                    "word {w:?} contains whitespace; use the JSON format"
                )));
            }
            out.push_str(w);
            for x in row {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Reads the text layout. Counts default to 1 and context vectors to zero,
    /// so the result supports similarity queries only.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::format(1, "missing header"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| Error::format(1, "bad header"));
        if parts.len() != 2 {
            return Err(Error::format(1, "header must be `<vocab_size> <dim>`"));
        }
        let (n, dim) = (parse_usize(parts[0])?, parse_usize(parts[1])?);
        let mut words = Vec::with_capacity(n);
        let mut input = Vec::with_capacity(n);
        for (idx, line) in lines {
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap_or_default().to_string();
            let row = fields
                .map(|f| f.parse::<f64>().map_err(|_| Error::format(idx + 1, format!("bad number {f:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != dim {
                return Err(Error::format(idx + 1, format!("expected {dim} values, found {}", row.len())));
            }
            words.push(word);
            input.push(row);
        }
        if words.len() != n {
            return Err(Error::format(1, format!("header promises {n} words, found {}", words.len())));
        }
        let word_refs: Vec<&str> = words.iter().map(String::as_str).collect();
        EmbeddingModel::from_vectors(&word_refs, input)
    }
}
