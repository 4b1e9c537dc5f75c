//! Part-of-speech tagging toolkit for code-mixed, Romanized social-media text.
//!
//! Two tagging systems live here:
//!
//! * a log-linear (maximum-entropy) tagger conditioned on the previous tag and
//!   decoded by beam search ([`maxent`]), trained only on the tagged corpus;
//! * a feature pipeline that combines language labels, left-context tags and
//!   "similar word" tags from a frequency lexicon with skip-gram embedding
//!   fallback ([`lexicon`], [`embeddings`], [`mlfeatures`]), feeding a
//!   categorical classifier ([`classifiers`]).
//!
//! [`corpus`] holds the data model and TAB-separated file format, and
//! [`eval`] scores predictions against gold data.

pub mod classifiers;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod maxent;
pub mod mlfeatures;
mod persist;
pub mod synth;

pub use classifiers::{
    ClassifierModel, Dataset, DecisionTree, ForestParams, NaiveBayesModel, Prediction,
    RandomForest, TreeParams,
};
pub use corpus::{
    corpus_stats, parse_corpus, serialize_corpus, split_corpus, Corpus, CorpusStats, Sentence, TagMode,
    Token,
};
pub use embeddings::{EmbeddingConfig, EmbeddingModel, Vocab};
pub use error::{Error, Result};
pub use eval::{EvalOptions, EvalReport};
pub use lexicon::{FallbackChain, FallbackResult, FallbackStep, FrequencyLexicon};
pub use maxent::{FeatureTemplateSet, MaxentModel, TrainOptions};
pub use mlfeatures::{
    Algorithm, ClassifierTagger, ExtractionMode, ExtractionSettings, FeatureExtractor, FeatureVector,
    PosBucket,
};
pub use persist::sniff_format;

/// Boundary value for context positions before the start of a sentence.
pub const START: &str = "⟨S⟩";
/// Boundary value for context positions past the end of a sentence.
pub const END: &str = "⟨/S⟩";
