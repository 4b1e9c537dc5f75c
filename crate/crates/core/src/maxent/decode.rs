use std::cmp::Ordering;

use super::{log_sum_exp, MaxentModel};
use crate::error::{Error, Result};
use crate::START;

#[derive(Debug, Clone)]
struct Hypothesis {
    score: f64,
    tags: Vec<usize>,
}

/// Higher score first; equal scores prefer the lexicographically smaller
/// sequence (tag ids follow sorted tag order).
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.tags.cmp(&b.tags))
}

/// Left-to-right beam search. Hypotheses sharing a last tag are merged,
/// keeping the best, and at most `beam_width` survive each position, so a
/// beam of at least `tags.len()` is exact Viterbi and a beam of 1 is greedy.
pub fn decode(model: &MaxentModel, words: &[&str], beam_width: usize) -> Result<Vec<String>> {
    if beam_width == 0 {
        return Err(Error::invalid("beam width must be at least 1"));
    }
    let num_tags = model.num_tags();
    let prev_feature = |prev: &str| {
        model
            .templates
            .prev_tag_feature(prev)
            .and_then(|f| model.feature_id(&f))
    };
    let start_feature = prev_feature(START);
    let tag_features: Vec<Option<usize>> = model.tags.iter().map(|t| prev_feature(t)).collect();

    let mut beam = vec![Hypothesis {
        score: 0.0,
        tags: Vec::new(),
    }];
    let mut local = vec![0.0; num_tags];
    for position in 0..words.len() {
        let base = model.scores(&model.templates.context_features(words, position));
        let mut best: Vec<Option<Hypothesis>> = vec![None; num_tags];
        for hyp in &beam {
            local.copy_from_slice(&base);
            let prev = match hyp.tags.last() {
                None => start_feature,
                Some(&t) => tag_features[t],
            };
            if let Some(f) = prev {
                model.add_weights(f, &mut local);
            }
            let lse = log_sum_exp(&local);
            for (t, slot) in best.iter_mut().enumerate() {
                let mut tags = hyp.tags.clone();
                tags.push(t);
                let cand = Hypothesis {
                    score: hyp.score + (local[t] - lse),
                    tags,
                };
                if slot.as_ref().is_none_or(|cur| rank(&cand, cur) == Ordering::Less) {
                    *slot = Some(cand);
                }
            }
        }
        beam = best.into_iter().flatten().collect();
        beam.sort_by(rank);
        beam.truncate(beam_width);
    }
    let winner = beam.into_iter().min_by(rank).map(|h| h.tags).unwrap_or_default();
    Ok(winner.into_iter().map(|t| model.tags[t].clone()).collect())
}
