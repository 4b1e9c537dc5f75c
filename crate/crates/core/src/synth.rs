//! Seeded synthetic corpora with known structure, for tests and benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Sentence, Token};
use crate::mlfeatures::PosBucket;

const CONSONANTS: &[char] = &['b', 'd', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v'];

/// Final character and the tag it determines.
pub const SUFFIX_TAGS: [(char, &str); 5] = [('a', "N"), ('e', "D"), ('i', "V"), ('o', "J"), ('u', "R")];

/// Sentences of random words whose tag is a function of the last character.
pub fn suffix_toy(sentences: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = (0..sentences)
        .map(|_| {
            let len = rng.random_range(3..=10);
            Sentence::new(
                (0..len)
                    .map(|_| {
                        let stem_len = rng.random_range(1..=6);
                        let mut form: String = (0..stem_len)
                            .map(|_| *CONSONANTS.choose(&mut rng).expect("non-empty"))
                            .collect();
                        let (last, tag) = SUFFIX_TAGS[rng.random_range(0..SUFFIX_TAGS.len())];
                        form.push(last);
                        Token::tagged(&form, "en", tag)
                    })
                    .collect(),
            )
        })
        .collect();
    Corpus::new(out).expect("generated tokens are valid")
}

/// Two word families (`a0..`, `b0..`); each sentence draws uniformly from one
/// family, so words in a family share one context distribution.
pub fn two_families(tokens: usize, family_size: usize, sentence_len: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::new();
    let mut produced = 0;
    while produced < tokens {
        let family = if rng.random_bool(0.5) { 'a' } else { 'b' };
        let len = sentence_len.min(tokens - produced);
        sentences.push(Sentence::new(
            (0..len)
                .map(|_| Token::untagged(&format!("{family}{}", rng.random_range(0..family_size)), "en"))
                .collect(),
        ));
        produced += len;
    }
    Corpus::new(sentences).expect("generated tokens are valid")
}

pub const CODE_MIXED_LANGS: [&str; 3] = ["en", "hi", "O"];

/// Tag for a (language, position bucket) pair in [`code_mixed`].
pub fn code_mixed_tag(lang: &str, bucket: PosBucket) -> String {
    format!("{}_{}", lang.to_uppercase(), bucket.as_str())
}

/// Code-mixed sentences whose tag is a function of the token's language and
/// position bucket.
pub fn code_mixed(sentences: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = (0..sentences)
        .map(|_| {
            let len = rng.random_range(1..=12);
            Sentence::new(
                (0..len)
                    .map(|i| {
                        let lang = CODE_MIXED_LANGS[rng.random_range(0..CODE_MIXED_LANGS.len())];
                        let form = format!("{}{}", lang[..1].to_lowercase(), rng.random_range(0..40));
                        Token::tagged(&form, lang, &code_mixed_tag(lang, PosBucket::of(i, len)))
                    })
                    .collect(),
            )
        })
        .collect();
    Corpus::new(out).expect("generated tokens are valid")
}
