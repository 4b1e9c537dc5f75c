//! Independent oracles shared by the integration and acceptance suites.
//! Nothing here calls the code path it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use cmtag::classifiers::{Dataset, DecisionTree, NaiveBayesModel, Node};
use cmtag::corpus::{Corpus, Sentence, Token};
use cmtag::embeddings::{self, EmbeddingModel};
use cmtag::eval::EvalReport;
use cmtag::maxent::{self, FeatureTemplateSet, History, MaxentModel, TrainOptions, DEFAULT_ARCH};
use cmtag::START;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn toy1() -> Corpus {
    let s = |toks: &[(&str, &str, &str)]| Sentence::new(toks.iter().map(|(f, l, t)| Token::tagged(f, l, t)).collect());
    Corpus::new(vec![
        s(&[("a", "en", "D"), ("cat", "en", "N"), ("runs", "en", "V")]),
        s(&[("the", "en", "D"), ("cat", "en", "N"), ("sat", "en", "V")]),
        s(&[("billi", "hi", "N"), ("runs", "en", "V")]),
    ])
    .unwrap()
}

// ---------------------------------------------------------------- counting

/// word -> tag -> count by a plain scan.
pub fn recount(c: &Corpus, lowercase: bool) -> BTreeMap<String, BTreeMap<String, u64>> {
    let mut out: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for s in &c.sentences {
        for t in &s.tokens {
            let w = if lowercase { t.form.to_lowercase() } else { t.form.clone() };
            *out.entry(w).or_default().entry(t.tag.clone().unwrap()).or_default() += 1;
        }
    }
    out
}

/// Most frequent key; ties to the smallest key. Written as a sort, unlike
/// the implementation's running scan.
pub fn oracle_argmax(counts: &BTreeMap<String, u64>) -> Option<String> {
    let mut v: Vec<(&String, &u64)> = counts.iter().collect();
    v.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    v.first().map(|(k, _)| (*k).clone())
}

/// Hand-set 5-word embedding fixture: "kitten" is nearest "cat", then "sat".
pub fn five_word_embeddings() -> EmbeddingModel {
    EmbeddingModel::from_vectors(
        &["kitten", "cat", "sat", "puppy", "zebra"],
        vec![
            vec![1.0, 0.1, 0.0],
            vec![0.9, 0.2, 0.0],
            vec![0.6, 0.6, 0.1],
            vec![0.0, 0.2, 1.0],
            vec![-1.0, 0.0, 0.2],
        ],
    )
    .unwrap()
}

// ---------------------------------------------------------------- cosine

pub fn oracle_cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    uv / (uu.sqrt() * vv.sqrt())
}

/// All-pairs scan: every other word with its cosine, best first, ties by word.
pub fn oracle_nearest(words: &[String], vectors: &[Vec<f64>], query: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = (0..words.len())
        .filter(|&j| j != query)
        .map(|j| (words[j].clone(), oracle_cosine(&vectors[query], &vectors[j])))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all
}

pub fn random_embeddings(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let words: Vec<String> = (0..n).map(|i| format!("w{i:03}")).collect();
    let vectors = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (words, vectors)
}

/// Largest gap between `nearest` and the scan over every word of a random
/// vocabulary, or `Err` on an ordering difference.
pub fn check_nearest_against_scan(seed: u64) -> Result<f64, String> {
    let mut r = rng(seed);
    let n = r.random_range(2..=200);
    let dim = r.random_range(1..=8);
    let (words, vectors) = random_embeddings(&mut r, n, dim);
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let model = EmbeddingModel::from_vectors(&refs, vectors.clone()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for q in 0..n {
        let k = 1 + (q * 7) % n;
        let got = model.nearest(&words[q], k).map_err(|e| e.to_string())?;
        let want: Vec<(String, f64)> = oracle_nearest(&words, &vectors, q).into_iter().take(k).collect();
        if got.len() != want.len() {
            return Err(format!("seed {seed} query {q}: {} results vs {}", got.len(), want.len()));
        }
        for (g, w) in got.iter().zip(&want) {
            if g.0 != w.0 {
                return Err(format!("seed {seed} query {q}: {} vs {}", g.0, w.0));
            }
            worst = worst.max((g.1 - w.1).abs());
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------- finite differences

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Worst relative gradient error of the maxent objective over `points`
/// random weight vectors on TOY1 with the full template set.
pub fn maxent_gradient_check(points: usize, seed: u64) -> f64 {
    let data = toy1();
    let templates = FeatureTemplateSet::parse(DEFAULT_ARCH).unwrap();
    let opts = TrainOptions {
        max_iterations: 0,
        ..Default::default()
    };
    let base = maxent::train_maxent(&data, &templates, &opts).unwrap();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let mut model = base.clone();
        model.weights.iter_mut().for_each(|w| *w = r.random_range(-1.0..1.0));
        let (_, analytic) = maxent::objective(&model, &data).unwrap();
        let mut f = |w: &[f64]| {
            let mut m = model.clone();
            m.weights.copy_from_slice(w);
            maxent::objective(&m, &data).unwrap().0
        };
        let numeric = central_difference(&mut f, &model.weights, 1e-5);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

/// Worst relative gradient error of the skip-gram pair loss at `points`
/// random parameter points, `dim` = 4, three negatives.
pub fn skipgram_gradient_check(points: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let dim = 4;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        // layout: center | positive | neg0 | neg1 | neg2
        let x: Vec<f64> = (0..5 * dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let loss = |x: &[f64]| {
            let n: Vec<&[f64]> = (2..5).map(|j| &x[j * dim..(j + 1) * dim]).collect();
            embeddings::pair_gradient(&x[..dim], &x[dim..2 * dim], &n).loss
        };
        let n: Vec<&[f64]> = (2..5).map(|j| &x[j * dim..(j + 1) * dim]).collect();
        let g = embeddings::pair_gradient(&x[..dim], &x[dim..2 * dim], &n);
        let mut analytic = g.center.clone();
        analytic.extend(&g.positive);
        for ng in &g.negatives {
            analytic.extend(ng);
        }
        let mut f = |x: &[f64]| loss(x);
        let numeric = central_difference(&mut f, &x, 1e-5);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

// ---------------------------------------------------------------- decoding

/// Random maxent model over `num_tags` tags with word, affix and
/// previous-tag features drawn from a small vocabulary.
pub fn random_maxent(r: &mut ChaCha8Rng, num_tags: usize, vocab: &[&str]) -> MaxentModel {
    let templates = FeatureTemplateSet::parse("words(-1,1),order(1),suffix(2)").unwrap();
    let tags: Vec<String> = (0..num_tags).map(|t| format!("T{t}")).collect();
    let mut features: Vec<String> = vec!["bias".into(), format!("prevtag={START}")];
    features.extend(tags.iter().map(|t| format!("prevtag={t}")));
    for w in vocab {
        features.push(format!("w[0]={w}"));
        features.push(format!("w[-1]={w}"));
        features.push(format!("w[+1]={w}"));
        let chars: Vec<char> = w.chars().collect();
        features.push(format!("suf1={}", chars[chars.len() - 1]));
    }
    features.sort();
    features.dedup();
    let weights = (0..features.len() * num_tags).map(|_| r.random_range(-2.0..2.0)).collect();
    MaxentModel::from_parts(templates, tags, features, weights, TrainOptions::default()).unwrap()
}

/// Exhaustive argmax over all tag sequences, scoring each by summed log
/// probabilities from `tag_probabilities`; ties to the smaller sequence.
pub fn brute_force_decode(model: &MaxentModel, words: &[&str]) -> Vec<String> {
    let t = model.tags.len();
    let l = words.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for code in 0..t.pow(l as u32) {
        let mut seq = vec![0; l];
        let mut c = code;
        for i in (0..l).rev() {
            seq[i] = c % t;
            c /= t;
        }
        let mut score = 0.0;
        for i in 0..l {
            let prev = if i == 0 { START } else { model.tags[seq[i - 1]].as_str() };
            let p = model.tag_probabilities(&History {
                words,
                position: i,
                prev_tag: prev,
            });
            score += p[seq[i]].ln();
        }
        // enumeration is in lexicographic order, so strict > keeps the smaller sequence
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, seq));
        }
    }
    best.unwrap().1.into_iter().map(|i| model.tags[i].clone()).collect()
}

// ---------------------------------------------------------------- trees

fn h(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).log2())
        .sum()
}

/// Gain-ratio choice recomputed from scratch for the instances in `rows`
/// over attributes `available`, applying the mean-gain filter.
pub fn oracle_split(d: &Dataset, rows: &[usize], available: &[usize]) -> Option<usize> {
    let labels = d.classes.as_ref().unwrap();
    let k = d.class_domain.len();
    let mut parent = vec![0.0; k];
    for &r in rows {
        parent[labels[r]] += 1.0;
    }
    let n = rows.len() as f64;
    let mut cands: Vec<(usize, f64, f64)> = Vec::new();
    for &a in available {
        let mut groups: HashMap<usize, Vec<f64>> = HashMap::new();
        for &r in rows {
            groups.entry(d.instances[r][a]).or_insert_with(|| vec![0.0; k])[labels[r]] += 1.0;
        }
        if groups.len() < 2 {
            continue;
        }
        let mut cond = 0.0;
        let mut si = 0.0;
        for g in groups.values() {
            let w = g.iter().sum::<f64>() / n;
            cond += w * h(g);
            si -= w * w.log2();
        }
        let gain = h(&parent) - cond;
        cands.push((a, gain, gain / si));
    }
    if cands.is_empty() {
        return None;
    }
    let mean = cands.iter().map(|c| c.1).sum::<f64>() / cands.len() as f64;
    let mut eligible: Vec<&(usize, f64, f64)> = cands.iter().filter(|c| c.1 >= mean - 1e-12).collect();
    let top = eligible.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    eligible.retain(|c| c.2 >= top - 1e-12);
    eligible.iter().map(|c| c.0).min()
}

/// Walks the tree with the training rows and checks every split against
/// [`oracle_split`]. Returns the number of split nodes checked.
pub fn check_tree_splits(tree: &DecisionTree, d: &Dataset) -> Result<usize, String> {
    fn walk(node: &Node, d: &Dataset, rows: &[usize], available: &[usize], checked: &mut usize) -> Result<(), String> {
        if let Node::Split { attribute, children, .. } = node {
            let want = oracle_split(d, rows, available);
            if want != Some(*attribute) {
                return Err(format!("split on {attribute}, oracle says {want:?} ({} rows)", rows.len()));
            }
            *checked += 1;
            let rest: Vec<usize> = available.iter().copied().filter(|&a| a != *attribute).collect();
            for b in children {
                let sub: Vec<usize> = rows.iter().copied().filter(|&r| d.instances[r][*attribute] == b.value).collect();
                walk(&b.node, d, &sub, &rest, checked)?;
            }
        }
        Ok(())
    }
    let rows: Vec<usize> = (0..d.len()).collect();
    let available: Vec<usize> = (0..d.attributes.len()).collect();
    let mut checked = 0;
    walk(&tree.root, d, &rows, &available, &mut checked)?;
    Ok(checked)
}

/// Random categorical dataset; `consistent` derives each label from a hash
/// of the row so identical rows always agree.
pub fn random_dataset(seed: u64, consistent: bool) -> Dataset {
    let mut r = rng(seed);
    let n = r.random_range(10..=200);
    let m = r.random_range(1..=6);
    let classes = r.random_range(2..=4);
    let arities: Vec<usize> = (0..m).map(|_| r.random_range(2..=4)).collect();
    let names: Vec<String> = (0..m).map(|j| format!("a{j}")).collect();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|_| arities.iter().map(|&k| format!("v{}", r.random_range(0..k))).collect())
        .collect();
    let labels: Vec<String> = rows
        .iter()
        .map(|row| {
            let c = if consistent {
                row.iter().map(|v| v.bytes().map(|b| b as usize).sum::<usize>()).fold(seed as usize, |a, x| a.wrapping_mul(31).wrapping_add(x)) % classes
            } else {
                r.random_range(0..classes)
            };
            format!("c{c}")
        })
        .collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Dataset::from_rows(&name_refs, &rows, Some(&labels), &[]).unwrap()
}

// ---------------------------------------------------------------- naive Bayes

/// Posterior by direct products of smoothed relative frequencies, counted
/// straight from the dataset rows.
pub fn oracle_nb_posterior(d: &Dataset, alpha: f64, probe: &[usize]) -> Vec<f64> {
    let labels = d.classes.as_ref().unwrap();
    let k = d.class_domain.len();
    let n = d.len() as f64;
    let joint: Vec<f64> = (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..d.len()).filter(|&i| labels[i] == c).collect();
            let nc = members.len() as f64;
            let mut p = nc / n;
            for (a, &v) in probe.iter().enumerate() {
                let cnt = members.iter().filter(|&&i| d.instances[i][a] == v).count() as f64;
                p *= (cnt + alpha) / (nc + alpha * d.attributes[a].domain.len() as f64);
            }
            p
        })
        .collect();
    let z: f64 = joint.iter().sum();
    joint.into_iter().map(|p| p / z).collect()
}

pub fn check_nb(model: &NaiveBayesModel, d: &Dataset, alpha: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for row in &d.instances {
        let want = oracle_nb_posterior(d, alpha, row);
        let enc: Vec<Option<usize>> = row.iter().map(|&v| Some(v)).collect();
        let got = model.posterior(&enc);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------- evaluation

pub fn random_gold_pred(seed: u64, tokens: usize) -> (Corpus, Corpus) {
    let mut r = rng(seed);
    let tags = ["N", "V", "D", "J", "X"];
    let langs = ["en", "hi", "O"];
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    let mut left = tokens;
    while left > 0 {
        let len = r.random_range(1..=8).min(left);
        left -= len;
        let mut gs = Vec::new();
        let mut ps = Vec::new();
        for i in 0..len {
            let form = format!("w{i}");
            let lang = langs[r.random_range(0..langs.len())];
            let g = tags[r.random_range(0..tags.len())];
            let p = if r.random_bool(0.6) { g } else { tags[r.random_range(0..tags.len())] };
            gs.push(Token::tagged(&form, lang, g));
            ps.push(Token::tagged(&form, lang, p));
        }
        gold.push(Sentence::new(gs));
        pred.push(Sentence::new(ps));
    }
    (Corpus::new(gold).unwrap(), Corpus::new(pred).unwrap())
}

/// Largest deviation between the report and a pairwise recount.
pub fn check_report(report: &EvalReport, gold: &Corpus, pred: &Corpus) -> f64 {
    let pairs: Vec<(&str, &str)> = gold
        .tokens()
        .zip(pred.tokens())
        .map(|(g, p)| (g.tag.as_deref().unwrap(), p.tag.as_deref().unwrap()))
        .collect();
    let n = pairs.len() as f64;
    let acc = pairs.iter().filter(|(g, p)| g == p).count() as f64 / n;
    let mut worst = (report.token_accuracy - acc).abs();
    let mut tags: Vec<&str> = pairs.iter().flat_map(|(g, p)| [*g, *p]).collect();
    tags.sort();
    tags.dedup();
    let mut weighted = 0.0;
    for t in &tags {
        let tp = pairs.iter().filter(|(g, p)| g == t && p == t).count() as f64;
        let support = pairs.iter().filter(|(g, _)| g == t).count() as f64;
        let predicted = pairs.iter().filter(|(_, p)| p == t).count() as f64;
        let prec = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let rec = if support > 0.0 { tp / support } else { 0.0 };
        let f = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        weighted += support * f;
        let s = &report.per_tag[*t];
        worst = worst
            .max((s.precision - prec).abs())
            .max((s.recall - rec).abs())
            .max((s.f1 - f).abs())
            .max((s.support as f64 - support).abs());
    }
    if report.per_tag.len() != tags.len() {
        return f64::INFINITY;
    }
    worst.max((report.weighted_f1 - weighted / n).abs())
}

// ---------------------------------------------------------------- embeddings

/// Mean cosine within families minus mean cosine across, over all pairs.
pub fn family_separation(model: &EmbeddingModel) -> (f64, f64) {
    let words = model.vocab.words();
    let (mut within, mut nw, mut across, mut na) = (0.0, 0, 0.0, 0);
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let c = oracle_cosine(&model.input[i], &model.input[j]);
            if words[i].as_bytes()[0] == words[j].as_bytes()[0] {
                within += c;
                nw += 1;
            } else {
                across += c;
                na += 1;
            }
        }
    }
    (within / nw as f64, across / na as f64)
}

// ---------------------------------------------------------------- pipelines

/// Every artifact of one seeded end-to-end run, serialized.
#[derive(Debug, PartialEq)]
pub struct PipelineArtifacts {
    pub train_file: String,
    pub test_file: String,
    pub lexicon: String,
    pub embeddings: String,
    pub maxent: String,
    pub maxent_tagged: String,
    pub maxent_report: String,
    pub classifier: String,
    pub classifier_tagged: String,
    pub classifier_report: String,
    pub accuracy: f64,
}

/// Split, lexicon, embeddings, maxent and J48 taggers, evaluation.
pub fn run_pipeline(corpus: &Corpus, seed: u64) -> PipelineArtifacts {
    use cmtag::embeddings::EmbeddingConfig;
    use cmtag::lexicon::{FallbackChain, FrequencyLexicon};
    use cmtag::mlfeatures::{Algorithm, ClassifierTagger, ExtractionSettings};
    use cmtag::{eval, serialize_corpus, split_corpus, TreeParams};

    let (train, test) = split_corpus(corpus, 0.8, seed, true).unwrap();
    let lex = FrequencyLexicon::build(&train, false).unwrap();
    let emb = embeddings::train_skipgram(
        &[&train, &test.without_tags()],
        &EmbeddingConfig {
            dim: 16,
            epochs: 2,
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    let templates = FeatureTemplateSet::parse(DEFAULT_ARCH).unwrap();
    let maxent_model = maxent::train_maxent(&train, &templates, &TrainOptions { max_iterations: 60, ..Default::default() }).unwrap();
    let maxent_tagged = maxent_model.tag_corpus(&test.without_tags(), 3).unwrap();

    let chain = FallbackChain::new(&lex, Some(&emb), 50).unwrap();
    let tagger = ClassifierTagger::train(&train, chain, ExtractionSettings::default(), &Algorithm::J48(TreeParams::default())).unwrap();
    let clf_tagged = tagger.tag_corpus(&test.without_tags(), chain).unwrap();
    let report = eval::evaluate(&test, &clf_tagged).unwrap();

    PipelineArtifacts {
        train_file: serialize_corpus(&train),
        test_file: serialize_corpus(&test),
        lexicon: lex.to_json().unwrap(),
        embeddings: emb.to_json().unwrap(),
        maxent: maxent_model.to_json().unwrap(),
        maxent_tagged: serialize_corpus(&maxent_tagged),
        maxent_report: eval::evaluate(&test, &maxent_tagged).unwrap().to_json().unwrap(),
        classifier: tagger.to_json().unwrap(),
        classifier_tagged: serialize_corpus(&clf_tagged),
        classifier_report: report.to_json().unwrap(),
        accuracy: report.token_accuracy,
    }
}
