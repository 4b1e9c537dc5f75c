//! Per-token categorical feature vectors for the classifier tagger, and the
//! tagger that couples them with a trained classifier.
//!
//! Each token gets its own language and its neighbours' languages, the tags
//! of the two previous tokens (gold while training, predicted while
//! tagging), the fallback-chain tags of the next two word forms, and a
//! position bucket. Positions outside the sentence read as [`START`] or
//! [`END`].

use serde::{Deserialize, Serialize};

use crate::classifiers::{
    train_forest, train_nb, train_tree, ClassifierModel, Dataset, ForestParams, TreeParams,
};
use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::lexicon::{FallbackChain, DEFAULT_NEIGHBORS};
use crate::persist;
use crate::{END, START};

pub const ATTRIBUTE_NAMES: [&str; 8] = [
    "lang_cur",
    "lang_prev",
    "lang_next",
    "tag_prev1",
    "tag_prev2",
    "tag_next1_sim",
    "tag_next2_sim",
    "pos_bucket",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PosBucket {
    First,
    Second,
    Middle,
    Penult,
    Last,
}

impl PosBucket {
    /// Bucket of 0-based position `i` in a sentence of length `len`. Short
    /// sentences resolve overlaps as FIRST, then LAST, then SECOND, then PENULT.
    pub fn of(i: usize, len: usize) -> PosBucket {
        if i == 0 {
            PosBucket::First
        } else if i + 1 == len {
            PosBucket::Last
        } else if i == 1 {
            PosBucket::Second
        } else if i + 2 == len {
            PosBucket::Penult
        } else {
            PosBucket::Middle
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PosBucket::First => "FIRST",
            PosBucket::Second => "SECOND",
            PosBucket::Middle => "MIDDLE",
            PosBucket::Penult => "PENULT",
            PosBucket::Last => "LAST",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub lang_cur: String,
    pub lang_prev: String,
    pub lang_next: String,
    pub tag_prev1: String,
    pub tag_prev2: String,
    pub tag_next1_sim: String,
    pub tag_next2_sim: String,
    /// Bucket name, or the 1-based position when raw positions are enabled.
    pub position: String,
    pub label: Option<String>,
}

impl FeatureVector {
    /// Attribute values in [`ATTRIBUTE_NAMES`] order.
    pub fn values(&self) -> [&str; 8] {
        [
            &self.lang_cur,
            &self.lang_prev,
            &self.lang_next,
            &self.tag_prev1,
            &self.tag_prev2,
            &self.tag_next1_sim,
            &self.tag_next2_sim,
            &self.position,
        ]
    }
}

/// Where the left-context tags come from.
#[derive(Debug, Clone, Copy)]
pub enum ExtractionMode<'a> {
    /// Gold tags of the (tagged) sentence.
    Train,
    /// Previously predicted tags; entry `j` is the prediction for token `j`.
    Infer(&'a [String]),
}

/// Extraction choices stored with a trained classifier tagger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSettings {
    /// Neighbour cap for the embedding fallback step.
    pub k: usize,
    pub raw_position: bool,
    /// Enabled attributes, a subsequence of [`ATTRIBUTE_NAMES`].
    pub attributes: Vec<String>,
    pub lowercase: bool,
    pub uses_embeddings: bool,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        ExtractionSettings {
            k: DEFAULT_NEIGHBORS,
            raw_position: false,
            attributes: ATTRIBUTE_NAMES.iter().map(|s| s.to_string()).collect(),
            lowercase: false,
            uses_embeddings: false,
        }
    }
}

impl ExtractionSettings {
    /// Sets the attribute mask from names, keeping canonical order.
    pub fn with_attributes<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self> {
        for n in names {
            if !ATTRIBUTE_NAMES.contains(&n.as_ref()) {
                return Err(Error::invalid(format!("unknown attribute {:?}", n.as_ref())));
            }
        }
        self.attributes = ATTRIBUTE_NAMES
            .iter()
            .filter(|a| names.iter().any(|n| n.as_ref() == **a))
            .map(|a| a.to_string())
            .collect();
        if self.attributes.is_empty() {
            return Err(Error::invalid("at least one attribute must be enabled"));
        }
        Ok(self)
    }

    fn enabled(&self) -> Vec<usize> {
        ATTRIBUTE_NAMES
            .iter()
            .enumerate()
            .filter(|(_, a)| self.attributes.iter().any(|x| x == *a))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn project<'v>(&self, v: &'v FeatureVector) -> Vec<&'v str> {
        let all = v.values();
        self.enabled().into_iter().map(|i| all[i]).collect()
    }
}

/// Feature extraction bound to one lexicon/embedding pair.
#[derive(Debug, Clone, Copy)]
pub struct FeatureExtractor<'a> {
    chain: FallbackChain<'a>,
    raw_position: bool,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(chain: FallbackChain<'a>, raw_position: bool) -> Self {
        FeatureExtractor { chain, raw_position }
    }

    /// Vector for position `i`; `left_tags` holds the tags of positions
    /// before `i` (at least the last two of them).
    pub fn extract_position<S: AsRef<str>>(&self, sentence: &Sentence, i: usize, left_tags: &[S]) -> FeatureVector {
        let sims = |j: usize| match sentence.tokens.get(j) {
            Some(t) => self.chain.fallback_tag(&t.form).tag,
            None => END.to_string(),
        };
        self.vector(sentence, i, left_tags, sims(i + 1), sims(i + 2))
    }

    fn vector<S: AsRef<str>>(
        &self,
        sentence: &Sentence,
        i: usize,
        left_tags: &[S],
        next1: String,
        next2: String,
    ) -> FeatureVector {
        let len = sentence.len();
        let tokens = &sentence.tokens;
        let left = |back: usize| -> String {
            if i < back {
                START.to_string()
            } else {
                left_tags[i - back].as_ref().to_string()
            }
        };
        FeatureVector {
            lang_cur: tokens[i].lang.clone(),
            lang_prev: if i == 0 { START.to_string() } else { tokens[i - 1].lang.clone() },
            lang_next: tokens.get(i + 1).map_or_else(|| END.to_string(), |t| t.lang.clone()),
            tag_prev1: left(1),
            tag_prev2: left(2),
            tag_next1_sim: next1,
            tag_next2_sim: next2,
            position: if self.raw_position {
                (i + 1).to_string()
            } else {
                PosBucket::of(i, len).as_str().to_string()
            },
            label: tokens[i].tag.clone(),
        }
    }

    pub fn extract_vectors(&self, sentence: &Sentence, mode: ExtractionMode<'_>) -> Result<Vec<FeatureVector>> {
        let left: Vec<String> = match mode {
            ExtractionMode::Train => sentence
                .tags()
                .ok_or(Error::Untagged)?
                .into_iter()
                .map(str::to_string)
                .collect(),
            ExtractionMode::Infer(predicted) => {
                if predicted.len() + 1 < sentence.len() {
                    return Err(Error::invalid(format!(
                        "{} predicted tags for a sentence of {} tokens",
                        predicted.len(),
                        sentence.len()
                    )));
                }
                predicted.to_vec()
            }
        };
        let mut sims: Vec<String> = sentence.forms().map(|f| self.chain.fallback_tag(f).tag).collect();
        sims.push(END.to_string());
        sims.push(END.to_string());
        let mut out: Vec<FeatureVector> = (0..sentence.len())
            .map(|i| self.vector(sentence, i, &left, sims[i + 1].clone(), sims[i + 2].clone()))
            .collect();
        if matches!(mode, ExtractionMode::Infer(_)) {
            out.iter_mut().for_each(|v| v.label = None);
        }
        Ok(out)
    }
}

/// Converts vectors to a dataset over the enabled attributes. Domains are
/// the observed values plus both sentinels.
pub fn vectors_to_dataset(vectors: &[FeatureVector], settings: &ExtractionSettings) -> Result<Dataset> {
    if vectors.is_empty() {
        return Err(Error::invalid("no feature vectors"));
    }
    let labeled = vectors[0].label.is_some();
    if vectors.iter().any(|v| v.label.is_some() != labeled) {
        return Err(Error::invalid("feature vectors mix labeled and unlabeled instances"));
    }
    let enabled = settings.enabled();
    let names: Vec<&str> = enabled.iter().map(|&i| ATTRIBUTE_NAMES[i]).collect();
    let rows: Vec<Vec<&str>> = vectors.iter().map(|v| settings.project(v)).collect();
    let labels: Option<Vec<&str>> = labeled.then(|| vectors.iter().map(|v| v.label.as_deref().unwrap_or_default()).collect());
    Dataset::from_rows(&names, &rows, labels.as_deref(), &[START, END])
}

/// Which classifier a [`ClassifierTagger`] trains.
#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    J48(TreeParams),
    NaiveBayes { alpha: f64 },
    RandomForest(ForestParams),
}

/// A classifier plus the extraction settings it was trained with. Tags
/// sentences greedily left to right, feeding predictions back as context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTagger {
    pub extraction: ExtractionSettings,
    pub classifier: ClassifierModel,
}

impl ClassifierTagger {
    pub const FORMAT: &'static str = "cmtag-classifier-tagger";
    pub const VERSION: u32 = 1;

    /// TRAIN-mode extraction over `corpus`, returning the dataset too.
    pub fn training_dataset(corpus: &Corpus, chain: FallbackChain<'_>, settings: &ExtractionSettings) -> Result<Dataset> {
        corpus.require_tagged()?;
        let extractor = FeatureExtractor::new(chain, settings.raw_position);
        let mut vectors = Vec::with_capacity(corpus.token_count());
        for s in &corpus.sentences {
            vectors.extend(extractor.extract_vectors(s, ExtractionMode::Train)?);
        }
        vectors_to_dataset(&vectors, settings)
    }

    pub fn train(corpus: &Corpus, chain: FallbackChain<'_>, settings: ExtractionSettings, algorithm: &Algorithm) -> Result<Self> {
        let settings = ExtractionSettings {
            k: chain.k(),
            lowercase: chain.lexicon().lowercased,
            uses_embeddings: chain.embeddings().is_some(),
            ..settings
        };
        let data = Self::training_dataset(corpus, chain, &settings)?;
        let classifier = match algorithm {
            Algorithm::J48(p) => ClassifierModel::J48(train_tree(&data, p)?),
            Algorithm::NaiveBayes { alpha } => ClassifierModel::NaiveBayes(train_nb(&data, *alpha)?),
            Algorithm::RandomForest(p) => ClassifierModel::RandomForest(train_forest(&data, p)?),
        };
        Ok(ClassifierTagger {
            extraction: settings,
            classifier,
        })
    }

    /// Checks that `chain` matches what the tagger was trained with.
    pub fn check_chain(&self, chain: &FallbackChain<'_>) -> Result<()> {
        if chain.lexicon().lowercased != self.extraction.lowercase {
            return Err(Error::invalid("lexicon case normalisation differs from training"));
        }
        if chain.embeddings().is_some() != self.extraction.uses_embeddings {
            return Err(Error::invalid(if self.extraction.uses_embeddings {
                "model was trained with embeddings; supply the embedding model"
            } else {
                "model was trained without embeddings"
            }));
        }
        Ok(())
    }

    pub fn tag_sentence(&self, sentence: &Sentence, chain: FallbackChain<'_>) -> Result<Vec<String>> {
        let extractor = FeatureExtractor::new(chain, self.extraction.raw_position);
        let mut predicted: Vec<String> = Vec::with_capacity(sentence.len());
        for i in 0..sentence.len() {
            let v = extractor.extract_position(sentence, i, &predicted);
            let p = self.classifier.predict(&self.extraction.project(&v))?;
            predicted.push(p.label);
        }
        Ok(predicted)
    }

    pub fn tag_corpus(&self, corpus: &Corpus, chain: FallbackChain<'_>) -> Result<Corpus> {
        self.check_chain(&chain)?;
        let sentences = corpus
            .sentences
            .iter()
            .map(|s| s.with_tags(&self.tag_sentence(s, chain)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            sentences,
            tagged: true,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        persist::to_json(Self::FORMAT, Self::VERSION, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        persist::from_json(Self::FORMAT, Self::VERSION, text)
    }
}
