//! Word/tag frequency lexicon and the three-step "similar word" tag lookup:
//! exact lexicon hit, then the first in-lexicon embedding neighbour, then the
//! globally most frequent tag.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embeddings::EmbeddingModel;
use crate::error::{Error, Result};
use crate::persist;

/// Default neighbour-list cap for the embedding step.
pub const DEFAULT_NEIGHBORS: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrequencyLexicon {
    pub word_tag_counts: BTreeMap<String, BTreeMap<String, u64>>,
    pub global_tag_counts: BTreeMap<String, u64>,
    pub total_tokens: u64,
    pub lowercased: bool,
}

/// Argmax over counts; equal counts resolve to the smallest key.
fn argmax(counts: &BTreeMap<String, u64>) -> Option<&str> {
    let mut best: Option<(&str, u64)> = None;
    for (tag, &n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((tag, n));
        }
    }
    best.map(|(t, _)| t)
}

pub fn normalize(word: &str, lowercase: bool) -> String {
    if lowercase {
        word.to_lowercase()
    } else {
        word.to_string()
    }
}

impl FrequencyLexicon {
    pub const FORMAT: &'static str = "cmtag-lexicon";
    pub const VERSION: u32 = 1;

    pub fn build(corpus: &Corpus, lowercase: bool) -> Result<Self> {
        corpus.require_tagged()?;
        let mut lex = FrequencyLexicon {
            lowercased: lowercase,
            ..Default::default()
        };
        for t in corpus.tokens() {
            let tag = t.tag.as_ref().ok_or(Error::Untagged)?;
            *lex.word_tag_counts
                .entry(normalize(&t.form, lowercase))
                .or_default()
                .entry(tag.clone())
                .or_default() += 1;
            *lex.global_tag_counts.entry(tag.clone()).or_default() += 1;
            lex.total_tokens += 1;
        }
        Ok(lex)
    }

    pub fn is_empty(&self) -> bool {
        self.total_tokens == 0
    }

    pub fn contains(&self, word: &str) -> bool {
        self.word_tag_counts.contains_key(&normalize(word, self.lowercased))
    }

    /// Tags observed in training, sorted.
    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.global_tag_counts.keys().map(String::as_str)
    }

    pub fn most_frequent_tag(&self, word: &str) -> Option<&str> {
        self.word_tag_counts
            .get(&normalize(word, self.lowercased))
            .and_then(argmax)
    }

    pub fn global_most_frequent_tag(&self) -> Result<&str> {
        argmax(&self.global_tag_counts).ok_or_else(|| Error::invalid("empty lexicon"))
    }

    /// Checks the count invariants; run on every load.
    pub fn validate(&self) -> Result<()> {
        let mut marginal: BTreeMap<&str, u64> = BTreeMap::new();
        let mut total = 0;
        for (word, counts) in &self.word_tag_counts {
            if counts.is_empty() {
                return Err(Error::InvalidModel(format!("lexicon entry {word:?} has no tags")));
            }
            for (tag, &n) in counts {
                if n == 0 {
                    return Err(Error::InvalidModel(format!("zero count for {word:?}/{tag}")));
                }
                *marginal.entry(tag).or_default() += n;
                total += n;
            }
        }
        let global: BTreeMap<&str, u64> = self
            .global_tag_counts
            .iter()
            .map(|(k, &v)| (k.as_str(), v))
            .collect();
        if marginal != global || total != self.total_tokens {
            return Err(Error::InvalidModel(
                "lexicon global counts disagree with per-word counts".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        persist::to_json(Self::FORMAT, Self::VERSION, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lex: Self = persist::from_json(Self::FORMAT, Self::VERSION, text)?;
        lex.validate()?;
        Ok(lex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FallbackStep {
    Exact = 1,
    Neighbor = 2,
    Global = 3,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FallbackResult {
    pub tag: String,
    pub step: FallbackStep,
    /// Set exactly when `step` is [`FallbackStep::Neighbor`].
    pub neighbor: Option<String>,
}

/// A lexicon paired with optional embeddings, validated to agree on case
/// normalisation. Lookups through it never fail.
#[derive(Debug, Clone, Copy)]
pub struct FallbackChain<'a> {
    lexicon: &'a FrequencyLexicon,
    embeddings: Option<&'a EmbeddingModel>,
    k: usize,
    global: &'a str,
}

impl<'a> FallbackChain<'a> {
    pub fn new(
        lexicon: &'a FrequencyLexicon,
        embeddings: Option<&'a EmbeddingModel>,
        k: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("neighbour cap k must be at least 1"));
        }
        let global = lexicon.global_most_frequent_tag()?;
        if let Some(emb) = embeddings {
            if emb.config.lowercase != lexicon.lowercased {
                return Err(Error::invalid(format!(
                    "lexicon lowercased={} but embeddings lowercase={}",
                    lexicon.lowercased, emb.config.lowercase
                )));
            }
        }
        Ok(FallbackChain {
            lexicon,
            embeddings,
            k,
            global,
        })
    }

    pub fn lexicon(&self) -> &'a FrequencyLexicon {
        self.lexicon
    }

    pub fn embeddings(&self) -> Option<&'a EmbeddingModel> {
        self.embeddings
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fallback_tag(&self, word: &str) -> FallbackResult {
        if let Some(tag) = self.lexicon.most_frequent_tag(word) {
            return FallbackResult {
                tag: tag.to_string(),
                step: FallbackStep::Exact,
                neighbor: None,
            };
        }
        if let Some(emb) = self.embeddings {
            // Out-of-vocabulary words simply skip this step.
            if let Ok(neighbors) = emb.nearest(word, self.k) {
                for (candidate, _) in neighbors {
                    if let Some(tag) = self.lexicon.most_frequent_tag(&candidate) {
                        return FallbackResult {
                            tag: tag.to_string(),
                            step: FallbackStep::Neighbor,
                            neighbor: Some(candidate),
                        };
                    }
                }
            }
        }
        FallbackResult {
            tag: self.global.to_string(),
            step: FallbackStep::Global,
            neighbor: None,
        }
    }
}
