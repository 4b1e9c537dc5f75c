//! The `cmtag` command line: corpus utilities, the maxent tagger, the
//! lexicon/embedding/classifier tagger, and evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data-format error, 3 model
//! format or version mismatch.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cmtag::classifiers::{ClassifierModel, ForestParams, TreeParams};
use cmtag::embeddings::{self, EmbeddingConfig, EmbeddingModel};
use cmtag::eval::{self, EvalOptions, EvalReport, ReportFormat};
use cmtag::lexicon::{FallbackChain, FrequencyLexicon, DEFAULT_NEIGHBORS};
use cmtag::maxent::{self, FeatureTemplateSet, MaxentModel, TrainOptions, DEFAULT_ARCH};
use cmtag::mlfeatures::{Algorithm, ClassifierTagger, ExtractionSettings, ATTRIBUTE_NAMES};
use cmtag::{corpus_stats, parse_corpus, serialize_corpus, split_corpus, Corpus, CorpusStats, TagMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VERSION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cmtag", version, about = "POS tagging for code-mixed social-media text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Token counts overall, per language and per tag.
    Stats(StatsArgs),
    /// Seeded sentence-level train/test split.
    Split(SplitArgs),
    /// Train the maximum-entropy tagger.
    TrainMaxent(TrainMaxentArgs),
    /// Tag a corpus with a maxent model.
    TagMaxent(TagMaxentArgs),
    /// Train skip-gram word embeddings.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Print the nearest neighbours of a word.
    Nearest(NearestArgs),
    /// Build the word/tag frequency lexicon from a tagged corpus.
    BuildLexicon(BuildLexiconArgs),
    /// Train a classifier tagger on lexicon/embedding features.
    TrainClf(TrainClfArgs),
    /// Tag a corpus with a classifier tagger.
    TagClf(TagClfArgs),
    /// Score a predicted corpus against gold.
    Eval(EvalArgs),
    /// Summarise any model or report file.
    Describe(DescribeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Text => "text",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    J48,
    Nb,
    Rf,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::J48 => "j48",
            Algo::Nb => "nb",
            Algo::Rf => "rf",
        })
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub corpus: PathBuf,
    #[arg(long, default_value_t = Format::Text)]
    pub format: Format,
    /// Output file [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub corpus: PathBuf,
    /// Fraction of sentences sent to the training file.
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Keep file order instead of shuffling [default: off]
    #[arg(long)]
    pub no_shuffle: bool,
    /// Training portion.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Test portion; also accepted as `-o2`.
    #[arg(long = "output2")]
    pub output2: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainMaxentArgs {
    pub train: PathBuf,
    /// Feature template specification.
    #[arg(long, default_value = DEFAULT_ARCH)]
    pub arch: String,
    /// L2 penalty strength.
    #[arg(long, default_value_t = TrainOptions::default().l2_lambda)]
    pub l2: f64,
    /// Relative gradient-norm stopping threshold.
    #[arg(long, default_value_t = TrainOptions::default().tolerance)]
    pub tolerance: f64,
    #[arg(long, default_value_t = TrainOptions::default().max_iterations)]
    pub max_iterations: usize,
    /// Beam width stored as the model's tagging default.
    #[arg(long, default_value_t = TrainOptions::default().beam_width)]
    pub beam: usize,
    /// Drop features seen fewer times than this.
    #[arg(long, default_value_t = TrainOptions::default().feature_count_cutoff)]
    pub cutoff: usize,
    /// Worker threads, 0 for all cores; results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TagMaxentArgs {
    pub model: PathBuf,
    pub input: PathBuf,
    /// Beam width [default: the width stored in the model]
    #[arg(long)]
    pub beam: Option<usize>,
    /// Output file [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainEmbeddingsArgs {
    /// One or more corpora; tags, if present, are ignored.
    #[arg(required = true)]
    pub corpora: Vec<PathBuf>,
    #[arg(long, default_value_t = EmbeddingConfig::default().dim)]
    pub dim: usize,
    /// Maximum context radius.
    #[arg(long, default_value_t = EmbeddingConfig::default().window)]
    pub window: usize,
    /// Noise samples per positive pair.
    #[arg(long, default_value_t = EmbeddingConfig::default().negatives)]
    pub negatives: usize,
    #[arg(long, default_value_t = EmbeddingConfig::default().epochs)]
    pub epochs: usize,
    /// Initial learning rate, decayed linearly.
    #[arg(long = "lr", default_value_t = EmbeddingConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = EmbeddingConfig::default().min_count)]
    pub min_count: u64,
    #[arg(long, default_value_t = EmbeddingConfig::default().seed)]
    pub seed: u64,
    /// Lower-case words before counting [default: off]
    #[arg(long)]
    pub lowercase: bool,
    /// Frequent-word subsampling threshold, e.g. 1e-3 [default: off]
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Worker threads; 1 is the exact sequential algorithm.
    #[arg(long, default_value_t = EmbeddingConfig::default().threads)]
    pub threads: usize,
    /// json keeps the full model; text is word2vec-style vectors only.
    #[arg(long, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct NearestArgs {
    pub embeddings: PathBuf,
    pub word: String,
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct BuildLexiconArgs {
    pub train: PathBuf,
    /// Lower-case words; must match the embeddings used with it [default: off]
    #[arg(long)]
    pub lowercase: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Frequency lexicon built from the training corpus.
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Embedding model for the neighbour step [default: none]
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainClfArgs {
    pub train: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = Algo::J48)]
    pub algo: Algo,
    /// Neighbours searched by the embedding fallback step.
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    pub k: usize,
    /// Random forest seed.
    #[arg(long, default_value_t = ForestParams::default().seed)]
    pub seed: u64,
    /// Random forest size.
    #[arg(long, default_value_t = ForestParams::default().n_trees)]
    pub trees: usize,
    /// Attributes drawn per forest node [default: ceil(sqrt(attributes))]
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Smallest node that may be split (tree and forest).
    #[arg(long, default_value_t = TreeParams::default().min_leaf)]
    pub min_leaf: usize,
    /// Pruning confidence factor.
    #[arg(long, default_value_t = TreeParams::default().confidence)]
    pub confidence: f64,
    /// Skip pessimistic pruning [default: off]
    #[arg(long)]
    pub no_prune: bool,
    /// Naive Bayes smoothing.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Use the raw token index instead of the position bucket [default: off]
    #[arg(long)]
    pub raw_position: bool,
    /// Comma-separated attribute subset.
    #[arg(long, value_delimiter = ',', default_values_t = ATTRIBUTE_NAMES.map(String::from))]
    pub attributes: Vec<String>,
    /// Also write the training feature table as CSV [default: none]
    #[arg(long)]
    pub dump_features: Option<PathBuf>,
    /// Worker threads for forest training, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TagClfArgs {
    pub model: PathBuf,
    pub input: PathBuf,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Output file [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub gold: PathBuf,
    pub predicted: PathBuf,
    #[arg(long, default_value_t = Format::Text)]
    pub format: Format,
    /// Leave tokens with this language label out of scoring; repeatable [default: none]
    #[arg(long = "exclude-lang")]
    pub exclude_lang: Vec<String>,
    /// Output file [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    pub file: PathBuf,
}

/// A corpus parse failure tied to its file.
#[derive(Debug)]
struct DataError {
    path: PathBuf,
    line: usize,
    message: String,
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.path.display(), self.line, self.message)
    }
}

impl std::error::Error for DataError {}

/// `-o2` is not expressible as a clap short flag; map it to `--output2`.
fn normalize_args(args: Vec<OsString>) -> Vec<OsString> {
    args.into_iter()
        .map(|a| match a.to_str() {
            Some("-o2") => OsString::from("--output2"),
            Some(s) if s.starts_with("-o2=") => OsString::from(format!("--output2={}", &s[4..])),
            _ => a,
        })
        .collect()
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = normalize_args(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

/// Maps an error chain to the documented exit codes.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<DataError>() || cause.is::<std::io::Error>() {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<cmtag::Error>() {
            return match e {
                cmtag::Error::VersionMismatch { .. } | cmtag::Error::InvalidModel(_) => EXIT_VERSION,
                cmtag::Error::Format { .. }
                | cmtag::Error::Untagged
                | cmtag::Error::Alignment { .. }
                | cmtag::Error::Json(_)
                | cmtag::Error::Io(_) => EXIT_DATA,
                cmtag::Error::InvalidArgument(_)
                | cmtag::Error::Numerical(_)
                | cmtag::Error::OutOfVocabulary(_) => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write(p, text),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_corpus(path: &Path, mode: TagMode) -> Result<Corpus> {
    parse_corpus(&read(path)?, mode).map_err(|e| match e {
        cmtag::Error::Format { line, message } => DataError {
            path: path.to_path_buf(),
            line,
            message,
        }
        .into(),
        other => anyhow::Error::new(other).context(format!("in {}", path.display())),
    })
}

fn load<T>(path: &Path, parse: impl FnOnce(&str) -> cmtag::Result<T>) -> Result<T> {
    let text = read(path)?;
    parse(&text).with_context(|| format!("cannot load {}", path.display()))
}

/// JSON embedding models carry their config; anything else is read as
/// word2vec-style text vectors.
fn load_embeddings(path: &Path) -> Result<EmbeddingModel> {
    load(path, |text| {
        if text.trim_start().starts_with('{') {
            EmbeddingModel::from_json(text)
        } else {
            EmbeddingModel::from_text(text)
        }
    })
}

fn report_format(f: Format) -> ReportFormat {
    match f {
        Format::Json => ReportFormat::Json,
        Format::Text => ReportFormat::Text,
    }
}

fn with_threads<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(job))
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Stats(a) => stats(a),
        Command::Split(a) => split(a),
        Command::TrainMaxent(a) => train_maxent(a),
        Command::TagMaxent(a) => tag_maxent(a),
        Command::TrainEmbeddings(a) => train_embeddings(a),
        Command::Nearest(a) => nearest(a),
        Command::BuildLexicon(a) => build_lexicon(a),
        Command::TrainClf(a) => train_clf(a),
        Command::TagClf(a) => tag_clf(a),
        Command::Eval(a) => evaluate(a),
        Command::Describe(a) => describe(a),
    }
}

fn stats(a: StatsArgs) -> Result<()> {
    let s = corpus_stats(&load_corpus(&a.corpus, TagMode::Auto)?);
    let text = match a.format {
        Format::Json => s.to_json()?,
        Format::Text => s.to_text(),
    };
    emit(a.output.as_deref(), &text)
}

fn split(a: SplitArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus, TagMode::Auto)?;
    let (train, test) = split_corpus(&corpus, a.ratio, a.seed, !a.no_shuffle)?;
    write(&a.output, &serialize_corpus(&train))?;
    write(&a.output2, &serialize_corpus(&test))?;
    eprintln!("{} train / {} test sentences", train.len(), test.len());
    Ok(())
}

fn train_maxent(a: TrainMaxentArgs) -> Result<()> {
    let templates = FeatureTemplateSet::parse(&a.arch)?;
    let train = load_corpus(&a.train, TagMode::Yes)?;
    let opts = TrainOptions {
        l2_lambda: a.l2,
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
        beam_width: a.beam,
        feature_count_cutoff: a.cutoff,
    };
    let model = with_threads(a.threads, || maxent::train_maxent(&train, &templates, &opts))??;
    let s = &model.summary;
    eprintln!(
        "{} features x {} tags; {} iterations, loss {:.6}, converged {}",
        model.features.len(),
        model.tags.len(),
        s.iterations,
        s.final_loss,
        s.converged
    );
    write(&a.output, &model.to_json()?)
}

fn tag_maxent(a: TagMaxentArgs) -> Result<()> {
    let model = load(&a.model, MaxentModel::from_json)?;
    let input = load_corpus(&a.input, TagMode::Auto)?;
    let beam = a.beam.unwrap_or(model.options.beam_width);
    let tagged = model.tag_corpus(&input, beam)?;
    emit(a.output.as_deref(), &serialize_corpus(&tagged))
}

fn train_embeddings(a: TrainEmbeddingsArgs) -> Result<()> {
    let corpora = a
        .corpora
        .iter()
        .map(|p| load_corpus(p, TagMode::Auto))
        .collect::<Result<Vec<_>>>()?;
    let cfg = EmbeddingConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        min_count: a.min_count,
        seed: a.seed,
        lowercase: a.lowercase,
        subsample: a.subsample,
        threads: a.threads,
    };
    let refs: Vec<&Corpus> = corpora.iter().collect();
    let trained = embeddings::train_skipgram_logged(&refs, &cfg)?;
    for (i, loss) in trained.epoch_losses.iter().enumerate() {
        eprintln!("epoch {}: mean loss {loss:.6}", i + 1);
    }
    let text = match a.format {
        Format::Json => trained.model.to_json()?,
        Format::Text => trained.model.to_text()?,
    };
    write(&a.output, &text)
}

fn nearest(a: NearestArgs) -> Result<()> {
    let model = load_embeddings(&a.embeddings)?;
    let mut out = String::new();
    for (word, cos) in model.nearest(&a.word, a.k)? {
        out.push_str(&format!("{word}\t{cos:.6}\n"));
    }
    emit(None, &out)
}

fn build_lexicon(a: BuildLexiconArgs) -> Result<()> {
    let lex = FrequencyLexicon::build(&load_corpus(&a.train, TagMode::Yes)?, a.lowercase)?;
    write(&a.output, &lex.to_json()?)
}

fn load_chain_parts(a: &ChainArgs) -> Result<(FrequencyLexicon, Option<EmbeddingModel>)> {
    let lex = load(&a.lexicon, FrequencyLexicon::from_json)?;
    let emb = a.embeddings.as_deref().map(load_embeddings).transpose()?;
    Ok((lex, emb))
}

fn train_clf(a: TrainClfArgs) -> Result<()> {
    let train = load_corpus(&a.train, TagMode::Yes)?;
    let (lex, emb) = load_chain_parts(&a.chain)?;
    let chain = FallbackChain::new(&lex, emb.as_ref(), a.k)?;
    let settings = ExtractionSettings {
        raw_position: a.raw_position,
        ..Default::default()
    }
    .with_attributes(&a.attributes)?;
    let algorithm = match a.algo {
        Algo::J48 => Algorithm::J48(TreeParams {
            min_leaf: a.min_leaf,
            confidence: a.confidence,
            prune: !a.no_prune,
        }),
        Algo::Nb => Algorithm::NaiveBayes { alpha: a.alpha },
        Algo::Rf => Algorithm::RandomForest(ForestParams {
            n_trees: a.trees,
            seed: a.seed,
            min_leaf: a.min_leaf,
            max_features: a.max_features,
            bootstrap: true,
        }),
    };
    if let Some(path) = &a.dump_features {
        let data = ClassifierTagger::training_dataset(&train, chain, &settings)?;
        write(path, &data.to_csv())?;
    }
    let tagger = with_threads(a.threads, || ClassifierTagger::train(&train, chain, settings, &algorithm))??;
    write(&a.output, &tagger.to_json()?)
}

fn tag_clf(a: TagClfArgs) -> Result<()> {
    let tagger = load(&a.model, ClassifierTagger::from_json)?;
    let (lex, emb) = load_chain_parts(&a.chain)?;
    let chain = FallbackChain::new(&lex, emb.as_ref(), tagger.extraction.k)?;
    let input = load_corpus(&a.input, TagMode::Auto)?;
    let tagged = tagger.tag_corpus(&input, chain)?;
    emit(a.output.as_deref(), &serialize_corpus(&tagged))
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let gold = load_corpus(&a.gold, TagMode::Yes)?;
    let pred = load_corpus(&a.predicted, TagMode::Yes)?;
    let opts = EvalOptions {
        exclude_langs: a.exclude_lang,
    };
    let report = eval::evaluate_with(&gold, &pred, &opts)?;
    emit(a.output.as_deref(), &report.render(report_format(a.format))?)
}

fn describe(a: DescribeArgs) -> Result<()> {
    let text = read(&a.file)?;
    let Some(format) = cmtag::sniff_format(&text) else {
        let model = load_embeddings(&a.file)?;
        return emit(None, &format!("word vectors: {} words, dim {}\n", model.vocab.len(), model.dim()));
    };
    let out = match format.as_str() {
        MaxentModel::FORMAT => {
            let m = MaxentModel::from_json(&text)?;
            let s = &m.summary;
            format!(
                "maxent tagger\ntemplates: {}\ntags: {}\nfeatures: {}\nbeam: {}\nl2: {}\niterations: {} (converged {})\nloss: {:.6}\n",
                m.templates,
                m.tags.join(" "),
                m.features.len(),
                m.options.beam_width,
                m.options.l2_lambda,
                s.iterations,
                s.converged,
                s.final_loss
            )
        }
        EmbeddingModel::FORMAT => {
            let m = EmbeddingModel::from_json(&text)?;
            let c = &m.config;
            format!(
                "skip-gram embeddings\nwords: {}\ndim: {}\nwindow: {}\nnegatives: {}\nepochs: {}\nlearning rate: {}\nseed: {}\nlowercase: {}\n",
                m.vocab.len(),
                c.dim,
                c.window,
                c.negatives,
                c.epochs,
                c.learning_rate,
                c.seed,
                c.lowercase
            )
        }
        FrequencyLexicon::FORMAT => {
            let l = FrequencyLexicon::from_json(&text)?;
            format!(
                "frequency lexicon\nwords: {}\ntokens: {}\ntags: {}\nlowercased: {}\nglobal fallback: {}\n",
                l.word_tag_counts.len(),
                l.total_tokens,
                l.tags().collect::<Vec<_>>().join(" "),
                l.lowercased,
                l.global_most_frequent_tag()?
            )
        }
        ClassifierTagger::FORMAT => {
            let t = ClassifierTagger::from_json(&text)?;
            let e = &t.extraction;
            format!(
                "classifier tagger\nattributes: {}\nneighbours: {}\nembeddings: {}\nlowercase: {}\nraw position: {}\n{}",
                e.attributes.join(","),
                e.k,
                e.uses_embeddings,
                e.lowercase,
                e.raw_position,
                t.classifier.describe()
            )
        }
        ClassifierModel::FORMAT => ClassifierModel::from_json(&text)?.describe(),
        EvalReport::FORMAT => EvalReport::from_json(&text)?.to_text(),
        CorpusStats::FORMAT => CorpusStats::from_json(&text)?.to_text(),
        other => bail!(cmtag::Error::InvalidModel(format!("unknown artifact format {other:?}"))),
    };
    emit(None, &out)
}
