//! Language-labeled, optionally POS-tagged corpora.
//!
//! The on-disk format is one token per line, `form<TAB>lang[<TAB>tag]`, with
//! blank lines separating sentences. Files are UTF-8.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persist;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub lang: String,
    pub tag: Option<String>,
}

impl Token {
    /// Builds a token, checking the field invariants of the file format.
    pub fn new(form: impl Into<String>, lang: impl Into<String>, tag: Option<String>) -> Result<Self> {
        let token = Token {
            form: form.into(),
            lang: lang.into(),
            tag,
        };
        token.validate()?;
        Ok(token)
    }

    pub fn tagged(form: &str, lang: &str, tag: &str) -> Self {
        Token::new(form, lang, Some(tag.to_string())).expect("valid token")
    }

    pub fn untagged(form: &str, lang: &str) -> Self {
        Token::new(form, lang, None).expect("valid token")
    }

    pub fn validate(&self) -> Result<()> {
        check_field("form", &self.form)?;
        check_field("lang", &self.lang)?;
        if let Some(tag) = &self.tag {
            check_field("tag", tag)?;
        }
        Ok(())
    }
}

fn check_field(name: &str, value: &str) -> Result<()> {
    if value.is_empty() {
        return Err(Error::invalid(format!("empty {name}")));
    }
    if value.contains(['\t', '\r', '\n']) {
        return Err(Error::invalid(format!("{name} {value:?} contains TAB or a line break")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    pub fn is_tagged(&self) -> bool {
        self.tokens.iter().all(|t| t.tag.is_some())
    }

    /// Gold tags, if every token carries one.
    pub fn tags(&self) -> Option<Vec<&str>> {
        self.tokens.iter().map(|t| t.tag.as_deref()).collect()
    }

    pub fn without_tags(&self) -> Sentence {
        Sentence::new(
            self.tokens
                .iter()
                .map(|t| Token {
                    tag: None,
                    ..t.clone()
                })
                .collect(),
        )
    }

    /// Returns a copy carrying `tags`, which must have one entry per token.
    pub fn with_tags<S: AsRef<str>>(&self, tags: &[S]) -> Result<Sentence> {
        if tags.len() != self.tokens.len() {
            return Err(Error::invalid(format!(
                "{} tags for a sentence of {} tokens",
                tags.len(),
                self.tokens.len()
            )));
        }
        self.tokens
            .iter()
            .zip(tags)
            .map(|(t, tag)| Token::new(t.form.clone(), t.lang.clone(), Some(tag.as_ref().to_string())))
            .collect::<Result<Vec<_>>>()
            .map(Sentence::new)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub tagged: bool,
}

/// How [`parse_corpus`] treats the optional tag column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagMode {
    /// Decided by the first token line, then enforced.
    Auto,
    Yes,
    No,
}

impl Corpus {
    /// Builds a corpus, checking token invariants and tagging homogeneity.
    pub fn new(sentences: Vec<Sentence>) -> Result<Self> {
        let mut tagged = None;
        for s in &sentences {
            if s.is_empty() {
                return Err(Error::invalid("sentence with no tokens"));
            }
            for t in &s.tokens {
                t.validate()?;
                let has = t.tag.is_some();
                match tagged {
                    None => tagged = Some(has),
                    Some(prev) if prev != has => {
                        return Err(Error::invalid("corpus mixes tagged and untagged tokens"))
                    }
                    _ => {}
                }
            }
        }
        Ok(Corpus {
            sentences,
            tagged: tagged.unwrap_or(false),
        })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn without_tags(&self) -> Corpus {
        Corpus {
            sentences: self.sentences.iter().map(Sentence::without_tags).collect(),
            tagged: false,
        }
    }

    pub fn require_tagged(&self) -> Result<()> {
        if self.tagged && !self.sentences.is_empty() {
            Ok(())
        } else {
            Err(Error::Untagged)
        }
    }
}

/// Parses the TAB-separated corpus format.
pub fn parse_corpus(text: &str, expect: TagMode) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    let mut tagged = match expect {
        TagMode::Auto => None,
        TagMode::Yes => Some(true),
        TagMode::No => Some(false),
    };

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence::new(std::mem::take(&mut current)));
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::format(
                line_no,
                format!("expected 2 or 3 TAB-separated fields, found {}", fields.len()),
            ));
        }
        if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
            return Err(Error::format(line_no, format!("field {} is empty", pos + 1)));
        }
        let has_tag = fields.len() == 3;
        match tagged {
            None => tagged = Some(has_tag),
            Some(want) if want != has_tag => {
                let what = if want { "tagged" } else { "untagged" };
                return Err(Error::format(
                    line_no,
                    format!("taggedness mismatch: expected {what} token line"),
                ));
            }
            _ => {}
        }
        current.push(Token {
            form: fields[0].to_string(),
            lang: fields[1].to_string(),
            tag: fields.get(2).map(|t| t.to_string()),
        });
    }
    if !current.is_empty() {
        sentences.push(Sentence::new(current));
    }
    Ok(Corpus {
        sentences,
        tagged: tagged.unwrap_or(false),
    })
}

/// Inverse of [`parse_corpus`] for canonical files.
pub fn serialize_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for (i, sentence) in corpus.sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for t in &sentence.tokens {
            out.push_str(&t.form);
            out.push('\t');
            out.push_str(&t.lang);
            if let Some(tag) = &t.tag {
                out.push('\t');
                out.push_str(tag);
            }
            out.push('\n');
        }
    }
    out
}

/// Sentence-level split. With `shuffle`, sentences are permuted by a
/// ChaCha8 stream seeded from `seed` before the first `floor(ratio * n)`
/// go to the training side.
pub fn split_corpus(corpus: &Corpus, ratio: f64, seed: u64, shuffle: bool) -> Result<(Corpus, Corpus)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    if corpus.sentences.len() < 2 {
        return Err(Error::invalid("splitting needs at least 2 sentences"));
    }
    let n = corpus.sentences.len();
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let cut = (ratio * n as f64).floor() as usize;
    let pick = |ids: &[usize]| Corpus {
        sentences: ids.iter().map(|&i| corpus.sentences[i].clone()).collect(),
        tagged: corpus.tagged,
    };
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: u64,
    pub per_lang: BTreeMap<String, u64>,
    pub per_tag: BTreeMap<String, u64>,
    pub sentence_count: u64,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        sentence_count: corpus.sentences.len() as u64,
        ..Default::default()
    };
    for t in corpus.tokens() {
        stats.total += 1;
        *stats.per_lang.entry(t.lang.clone()).or_default() += 1;
        if let Some(tag) = &t.tag {
            *stats.per_tag.entry(tag.clone()).or_default() += 1;
        }
    }
    stats
}

impl CorpusStats {
    /// Field-wise sum, used to check split additivity.
    pub fn merge(&self, other: &CorpusStats) -> CorpusStats {
        let add = |a: &BTreeMap<String, u64>, b: &BTreeMap<String, u64>| {
            let mut out = a.clone();
            for (k, v) in b {
                *out.entry(k.clone()).or_default() += v;
            }
            out
        };
        CorpusStats {
            total: self.total + other.total,
            per_lang: add(&self.per_lang, &other.per_lang),
            per_tag: add(&self.per_tag, &other.per_tag),
            sentence_count: self.sentence_count + other.sentence_count,
        }
    }

    pub const FORMAT: &'static str = "cmtag-corpus-stats";
    pub const VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        persist::to_json(Self::FORMAT, Self::VERSION, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        persist::from_json(Self::FORMAT, Self::VERSION, text)
    }

    /// Aligned table: total row, one row per language, then per-tag counts.
    pub fn to_text(&self) -> String {
        let pct = |n: u64| {
            if self.total == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.total as f64
            }
        };
        let width = self
            .per_lang
            .keys()
            .chain(self.per_tag.keys())
            .map(|k| k.chars().count())
            .chain(["sentences".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>10}", "sentences", self.sentence_count);
        let _ = writeln!(out, "{:<width$}  {:>10}  {:>7}", "total", self.total, "100.00%");
        for (lang, n) in &self.per_lang {
            let _ = writeln!(out, "{:<width$}  {:>10}  {:>6.2}%", lang, n, pct(*n));
        }
        if !self.per_tag.is_empty() {
            let _ = writeln!(out, "tags:");
            for (tag, n) in &self.per_tag {
                let _ = writeln!(out, "{:<width$}  {:>10}  {:>6.2}%", tag, n, pct(*n));
            }
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Three sentences, eight tokens; shared by several module tests.
    pub fn toy1() -> Corpus {
        let s = |toks: &[(&str, &str, &str)]| {
            Sentence::new(toks.iter().map(|(f, l, t)| Token::tagged(f, l, t)).collect())
        };
        Corpus::new(vec![
            s(&[("a", "en", "D"), ("cat", "en", "N"), ("runs", "en", "V")]),
            s(&[("the", "en", "D"), ("cat", "en", "N"), ("sat", "en", "V")]),
            s(&[("billi", "hi", "N"), ("runs", "en", "V")]),
        ])
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_tagged_sentences() {
        let c = parse_corpus("a\ten\tD\ncat\ten\tN\n\nok\ten\tV\n", TagMode::Auto).unwrap();
        assert!(c.tagged);
        assert_eq!(c.sentences.iter().map(Sentence::len).collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!(c.sentences[1].tokens[0], Token::tagged("ok", "en", "V"));
    }

    #[test]
    fn parses_untagged_without_trailing_newline() {
        let c = parse_corpus("a\ten\nb\thi", TagMode::Auto).unwrap();
        assert!(!c.tagged);
        assert_eq!(c.len(), 1);
        assert_eq!(c.sentences[0].len(), 2);
    }

    #[test]
    fn taggedness_mismatch_reports_line() {
        match parse_corpus("a\ten\tD\nb\thi\n", TagMode::Auto) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_corpus("a\ten\n", TagMode::Yes) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_field_counts_and_empty_fields() {
        for (text, want) in [
            ("a\n", 1),
            ("a\ten\tD\n\nb\ten\tN\tX\n", 3),
            ("a\ten\tD\n\t\tN\n", 2),
            ("a\ten\tD\nb\t\tN\n", 2),
        ] {
            match parse_corpus(text, TagMode::Auto) {
                Err(Error::Format { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn runs_of_blank_lines_collapse() {
        let c = parse_corpus("\n\na\ten\n\n\n\nb\ten\n\n", TagMode::No).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.sentences.iter().all(|s| !s.is_empty()));
    }

    #[test]
    fn serializes_canonically() {
        let one = Corpus::new(vec![Sentence::new(vec![Token::tagged("w", "en", "N")])]).unwrap();
        assert_eq!(serialize_corpus(&one), "w\ten\tN\n");
        let text = serialize_corpus(&fixtures::toy1());
        assert_eq!(text.matches("\n\n").count(), 2);
        assert!(!text.ends_with("\n\n"));
        let canonical = "a\ten\tD\ncat\ten\tN\n\nok\ten\tV\n";
        assert_eq!(serialize_corpus(&parse_corpus(canonical, TagMode::Auto).unwrap()), canonical);
    }

    #[test]
    fn toy1_stats() {
        let st = corpus_stats(&fixtures::toy1());
        assert_eq!(st.total, 8);
        assert_eq!(st.sentence_count, 3);
        assert_eq!(st.per_lang, BTreeMap::from([("en".into(), 7), ("hi".into(), 1)]));
        assert_eq!(
            st.per_tag,
            BTreeMap::from([("D".into(), 2), ("N".into(), 3), ("V".into(), 3)])
        );
        assert_eq!(CorpusStats::from_json(&st.to_json().unwrap()).unwrap(), st);
        let text = st.to_text();
        assert!(text.contains("total") && text.contains("87.50%"));
    }

    #[test]
    fn split_sizes_and_errors() {
        let sentences: Vec<Sentence> = (0..10)
            .map(|i| Sentence::new(vec![Token::tagged(&format!("w{i}"), "en", "N")]))
            .collect();
        let c = Corpus::new(sentences).unwrap();
        let (train, test) = split_corpus(&c, 0.8, 7, true).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let again = split_corpus(&c, 0.8, 7, true).unwrap();
        assert_eq!(serialize_corpus(&train), serialize_corpus(&again.0));
        assert_eq!(serialize_corpus(&test), serialize_corpus(&again.1));

        let (prefix, _) = split_corpus(&c, 0.8, 7, false).unwrap();
        assert_eq!(prefix.sentences, c.sentences[..8].to_vec());

        assert!(split_corpus(&c, 0.0, 1, true).is_err());
        assert!(split_corpus(&c, 1.0, 1, true).is_err());
        let single = Corpus::new(vec![c.sentences[0].clone()]).unwrap();
        assert!(split_corpus(&single, 0.5, 1, true).is_err());
    }

    fn token_strategy() -> impl Strategy<Value = (String, String, String)> {
        ("[a-zA-Z0-9 .,:!?\u{900}-\u{97f}]{1,6}", "(en|hi|bn|te|O)", "[A-Z_$]{1,3}")
            .prop_filter("non-blank form", |(f, _, _)| !f.trim().is_empty())
    }

    fn corpus_strategy() -> impl Strategy<Value = Corpus> {
        (
            any::<bool>(),
            prop::collection::vec(prop::collection::vec(token_strategy(), 1..6), 0..6),
        )
            .prop_map(|(tagged, sents)| {
                Corpus::new(
                    sents
                        .into_iter()
                        .map(|toks| {
                            Sentence::new(
                                toks.into_iter()
                                    .map(|(f, l, t)| Token::new(f, l, tagged.then_some(t)).unwrap())
                                    .collect(),
                            )
                        })
                        .collect(),
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(c in corpus_strategy()) {
            let text = serialize_corpus(&c);
            let back = parse_corpus(&text, TagMode::Auto).unwrap();
            prop_assert_eq!(back.sentences, c.sentences.clone());
            if !c.is_empty() {
                prop_assert_eq!(back.tagged, c.tagged);
            }
        }

        #[test]
        fn split_is_a_partition(n in 2usize..40, seed in any::<u64>(), ratio in 0.05f64..0.95) {
            let c = Corpus::new((0..n)
                .map(|i| Sentence::new(vec![Token::tagged(&format!("w{i}"), "en", "N"); 1 + i % 3]))
                .collect()).unwrap();
            let (train, test) = split_corpus(&c, ratio, seed, true).unwrap();
            prop_assert_eq!(train.len(), (ratio * n as f64).floor() as usize);
            let mut all: Vec<String> = train.sentences.iter().chain(&test.sentences)
                .map(|s| s.tokens[0].form.clone()).collect();
            all.sort();
            let mut orig: Vec<String> = c.sentences.iter().map(|s| s.tokens[0].form.clone()).collect();
            orig.sort();
            prop_assert_eq!(all, orig);
            prop_assert_eq!(corpus_stats(&train).merge(&corpus_stats(&test)), corpus_stats(&c));
        }
    }
}
