//! Command-line front end. `main.rs` only parses arguments and maps errors
//! to exit codes; everything else lives here so tests can inspect the
//! command definition.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use reveval::agreement::{agreement, LabelLevel};
use reveval::corpus::{corpus_stats, parse_corpus, Document, LabelMap};
use reveval::corruption::{build_worse_testset, NoiseConfig};
use reveval::gec::{extract_edits, gleu_corpus, max_match_f05, tokenize, GleuConfig};
use reveval::irc::{evaluate_parallel, IrcConfig};
use reveval::lm::{FitOptions, NgramModel};
use reveval::metric::{lm_sentences, AdapterConfig, MetricFactory, MetricSpec, ADAPTER_ENV};
use reveval::pairs::{
    export_training_pairs, extract_pairs, parse_id_list, read_jsonl, render_id_list, split_corpus, write_jsonl,
    write_pairs_csv, PairMode, SnippetPair,
};

/// Error that maps to the usage exit code rather than the validation one.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(
    name = "reveval",
    version,
    about = "Evaluate document revision metrics on edit-annotated corpora"
)]
pub struct Cli {
    /// Increase log detail (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Worker threads for metric evaluation [default: logical cores].
    #[arg(long, value_name = "N", global = true)]
    pub jobs: Option<usize>,
    /// Label-to-aspect overrides, one `label = Aspect` per line.
    #[arg(long, value_name = "FILE", global = true)]
    pub labels: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a corpus and report schema or validation errors.
    Validate(ValidateArgs),
    /// Aspect distribution and metadata breakdowns.
    Stats(StatsArgs),
    /// Extract single-edit snippet pairs.
    Pairs(PairsArgs),
    /// Paper-level train/test split.
    Split(SplitArgs),
    /// Build source-vs-corrupted pairs.
    Corrupt(CorruptArgs),
    /// Meta-evaluate a metric on snippet pairs.
    Eval(EvalArgs),
    /// Detection and correction agreement between editors.
    Agree(AgreeArgs),
    /// Sampled multi-reference GLEU.
    Gleu(GleuArgs),
    /// Span-level precision, recall and F0.5.
    MmScore(MmScoreArgs),
    /// Fit an n-gram language model.
    LmTrain(LmTrainArgs),
    /// Perplexity of text under a saved model.
    LmPpl(LmPplArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TextFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Apply,
    Revert,
}

impl From<ModeArg> for PairMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Apply => PairMode::Apply,
            ModeArg::Revert => PairMode::Revert,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Granularity {
    Paragraph,
    Document,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Side {
    Source,
    Revised,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Corpus XML file or directory.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Corpus XML file or directory.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    pub format: TextFormat,
    /// Output file [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    /// Corpus XML file or directory.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Only use papers listed in this id file.
    #[arg(long, value_name = "FILE")]
    pub split: Option<PathBuf>,
    /// Apply each edit to the source, or revert it from the full revision.
    #[arg(long, value_enum, default_value = "apply")]
    pub mode: ModeArg,
    /// Output format.
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: PairFormat,
    /// Output file [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write labelled (a, b) training pairs here.
    #[arg(long, value_name = "FILE")]
    pub training_out: Option<PathBuf>,
    /// Share of training pairs with the better snippet in slot a.
    #[arg(long, default_value_t = 0.5, value_name = "F")]
    pub swap_fraction: f64,
    /// Seed for the training-pair swap [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Corpus XML file or directory.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Train:test ratio in papers.
    #[arg(long, default_value = "3:1", value_name = "TRAIN:TEST")]
    pub ratio: String,
    /// Shuffle seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Test paper ids [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Train paper ids.
    #[arg(long, value_name = "FILE")]
    pub train_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Corpus XML file or directory.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Noise configuration as key = value lines.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed, overriding the config file [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only use papers listed in this id file.
    #[arg(long, value_name = "FILE")]
    pub split: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: PairFormat,
    /// Output file [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Corpus to extract pairs from.
    #[arg(
        long,
        value_name = "PATH",
        required_unless_present = "pairs",
        conflicts_with = "pairs"
    )]
    pub corpus: Option<PathBuf>,
    /// Pre-built pairs (JSON lines), e.g. from `pairs` or `corrupt`.
    #[arg(long, value_name = "FILE")]
    pub pairs: Option<PathBuf>,
    /// Only use papers listed in this id file.
    #[arg(long, value_name = "FILE")]
    pub split: Option<PathBuf>,
    /// Pair construction when reading a corpus.
    #[arg(long, value_enum, default_value = "apply")]
    pub mode: ModeArg,
    /// native-ppl:<model>, adapter:<command>, oracle, random:<seed> or invert:<spec>.
    #[arg(long, value_name = "SPEC")]
    pub metric: String,
    /// Presentation and bootstrap seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scores this close count as a tie.
    #[arg(long, default_value_t = 0.0, value_name = "EPS")]
    pub tie_epsilon: f64,
    /// Bootstrap resamples for confidence intervals.
    #[arg(long, default_value_t = 1000, value_name = "N")]
    pub resamples: usize,
    /// Seconds to wait for an adapter handshake.
    #[arg(long, default_value_t = 30, value_name = "SECS")]
    pub handshake_timeout: u64,
    /// Seconds to wait for each adapter response.
    #[arg(long, default_value_t = 60, value_name = "SECS")]
    pub request_timeout: u64,
    /// Report JSON [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Per-aspect table as CSV.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    /// Corpus XML file or directory.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Compare raw label strings instead of aspects.
    #[arg(long)]
    pub raw_labels: bool,
    /// Output file [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("input").required(true).args(["source", "corpus"])))]
pub struct RefInput {
    /// Source text, one instance per line.
    #[arg(long, value_name = "FILE", requires_all = ["hyp", "refs"])]
    pub source: Option<PathBuf>,
    /// System output, one instance per line.
    #[arg(long, value_name = "FILE", requires = "source")]
    pub hyp: Option<PathBuf>,
    /// Reference file, one instance per line; repeat for several references.
    #[arg(long = "ref", value_name = "FILE", requires = "source")]
    pub refs: Vec<PathBuf>,
    /// Read sources and references from a corpus instead of text files.
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// With --corpus: `source` or `editor:<name>`; the other editors are references.
    #[arg(long, default_value = "source", value_name = "SYSTEM", requires = "corpus")]
    pub system: String,
    /// With --corpus: one instance per paragraph or per document.
    #[arg(long, value_enum, default_value = "paragraph", requires = "corpus")]
    pub granularity: Granularity,
}

#[derive(Debug, Args)]
pub struct GleuArgs {
    #[command(flatten)]
    pub input: RefInput,
    /// Reference sampling iterations.
    #[arg(long, default_value_t = 500, value_name = "N")]
    pub iterations: usize,
    /// Highest n-gram order.
    #[arg(long, default_value_t = 4, value_name = "N")]
    pub max_n: usize,
    /// Reference sampling seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MmScoreArgs {
    #[command(flatten)]
    pub input: RefInput,
    /// Output JSON [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("train_input").required(true).args(["input", "corpus"])))]
pub struct LmTrainArgs {
    /// Training text, one paragraph per line; repeatable.
    #[arg(long, value_name = "FILE")]
    pub input: Vec<PathBuf>,
    /// Train on a corpus side instead.
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// Corpus side to train on.
    #[arg(long, value_enum, default_value = "revised", requires = "corpus")]
    pub side: Side,
    /// Only use papers listed in this id file.
    #[arg(long, value_name = "FILE", requires = "corpus")]
    pub split: Option<PathBuf>,
    /// N-gram order.
    #[arg(long, default_value_t = 3, value_name = "N")]
    pub order: usize,
    /// Tokens seen fewer times become <unk>.
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub min_count: u64,
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LmPplArgs {
    /// Model written by lm-train.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Text to score, one paragraph per line.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Output JSON [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let labels = load_labels(cli.labels.as_deref())?;
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    match cli.command {
        Command::Validate(a) => validate(a, &labels),
        Command::Stats(a) => stats(a, &labels),
        Command::Pairs(a) => pairs(a, &labels),
        Command::Split(a) => split(a, &labels),
        Command::Corrupt(a) => corrupt(a, &labels),
        Command::Eval(a) => eval(a, &labels, jobs),
        Command::Agree(a) => agree(a, &labels),
        Command::Gleu(a) => gleu(a, &labels),
        Command::MmScore(a) => mm_score(a, &labels),
        Command::LmTrain(a) => lm_train(a, &labels),
        Command::LmPpl(a) => lm_ppl(a),
    }
}

fn load_labels(path: Option<&Path>) -> Result<LabelMap> {
    let Some(path) = path else {
        return Ok(LabelMap::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LabelMap::default()
        .parse_overrides(&text)
        .with_context(|| format!("in label file {}", path.display()))
}

fn seed_or_default(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        log::warn!("no --seed given; using 0");
        0
    })
}

fn load_corpus(path: &Path, labels: &LabelMap) -> Result<Vec<Document>> {
    let docs = parse_corpus(path, labels)?;
    log::info!("loaded {} documents from {}", docs.len(), path.display());
    Ok(docs)
}

fn load_ids(path: Option<&Path>) -> Result<Option<BTreeSet<String>>> {
    path.map(|p| {
        let text = fs::read_to_string(p).with_context(|| format!("reading split file {}", p.display()))?;
        let ids = parse_id_list(&text);
        if ids.is_empty() {
            bail!("split file {} lists no paper ids", p.display());
        }
        Ok(ids)
    })
    .transpose()
}

/// Writes to `path` atomically (temp file + rename), or to stdout.
fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(p) if p == Path::new("-") => return write_output(None, bytes),
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("creating a file in {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.flush()?;
            tmp.persist(p).with_context(|| format!("writing {}", p.display()))?;
        }
    }
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn pair_bytes(pairs: &[SnippetPair], format: PairFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        PairFormat::Jsonl => write_jsonl(pairs, &mut buf)?,
        PairFormat::Csv => write_pairs_csv(pairs, &mut buf)?,
    }
    Ok(buf)
}

fn validate(a: ValidateArgs, labels: &LabelMap) -> Result<()> {
    let docs = load_corpus(&a.corpus, labels)?;
    let edits: usize = docs.iter().map(Document::edit_count).sum();
    println!("ok: {} documents, {edits} edits", docs.len());
    Ok(())
}

fn stats(a: StatsArgs, labels: &LabelMap) -> Result<()> {
    let docs = load_corpus(&a.corpus, labels)?;
    let stats = corpus_stats(&docs);
    let bytes = match a.format {
        TextFormat::Text => stats.render_text().into_bytes(),
        TextFormat::Json => json_bytes(&stats)?,
    };
    write_output(a.out.as_deref(), &bytes)
}

fn pairs(a: PairsArgs, labels: &LabelMap) -> Result<()> {
    let docs = load_corpus(&a.corpus, labels)?;
    let ids = load_ids(a.split.as_deref())?;
    let ex = extract_pairs(&docs, ids.as_ref(), a.mode.into());
    log::info!("extracted {} pairs", ex.pairs.len());
    write_output(a.out.as_deref(), &pair_bytes(&ex.pairs, a.format)?)?;
    if let Some(path) = a.training_out {
        let seed = seed_or_default(a.seed);
        let training = export_training_pairs(&ex.pairs, a.swap_fraction, seed).map_err(|e| usage(e.to_string()))?;
        let mut buf = Vec::new();
        write_jsonl(&training, &mut buf)?;
        write_output(Some(&path), &buf)?;
    }
    Ok(())
}

fn parse_ratio(s: &str) -> Result<(usize, usize)> {
    let bad = || usage(format!("--ratio must look like 3:1, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn split(a: SplitArgs, labels: &LabelMap) -> Result<()> {
    let (train, test) = parse_ratio(&a.ratio)?;
    let seed = seed_or_default(a.seed);
    let docs = load_corpus(&a.corpus, labels)?;
    let spec = split_corpus(&docs, train, test, seed)?;
    let header = |side: &str, n: usize| format!("{side} papers ({n}), ratio {train}:{test}, seed {seed}");
    write_output(
        a.out.as_deref(),
        render_id_list(&spec.test_doc_ids, &header("test", spec.test_doc_ids.len())).as_bytes(),
    )?;
    if let Some(p) = a.train_out {
        write_output(
            Some(&p),
            render_id_list(&spec.train_doc_ids, &header("train", spec.train_doc_ids.len())).as_bytes(),
        )?;
    }
    Ok(())
}

fn corrupt(a: CorruptArgs, labels: &LabelMap) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            NoiseConfig::parse(&text).with_context(|| format!("in noise config {}", p.display()))?
        }
        None => NoiseConfig::default(),
    };
    match (a.seed, &a.config) {
        (Some(s), _) => cfg.seed = s,
        (None, None) => cfg.seed = seed_or_default(None),
        (None, Some(_)) => {}
    }
    let docs = load_corpus(&a.corpus, labels)?;
    let docs: Vec<Document> = match load_ids(a.split.as_deref())? {
        Some(ids) => docs.into_iter().filter(|d| ids.contains(&d.id)).collect(),
        None => docs,
    };
    let set = build_worse_testset(&docs, &cfg);
    log::info!(
        "built {} corrupted pairs; {} paper(s) sentence-shuffled",
        set.pairs.len(),
        set.shuffled_docs.len()
    );
    write_output(a.out.as_deref(), &pair_bytes(&set.pairs, a.format)?)
}

fn eval(a: EvalArgs, labels: &LabelMap, jobs: usize) -> Result<()> {
    let seed = seed_or_default(a.seed);
    let default_adapter = std::env::var(ADAPTER_ENV).ok();
    let spec = MetricSpec::parse(&a.metric, default_adapter.as_deref()).map_err(|e| usage(e.to_string()))?;
    let pairs: Vec<SnippetPair> = match (&a.corpus, &a.pairs) {
        (Some(corpus), _) => {
            let docs = load_corpus(corpus, labels)?;
            let ids = load_ids(a.split.as_deref())?;
            extract_pairs(&docs, ids.as_ref(), a.mode.into()).pairs
        }
        (None, Some(p)) => {
            let file = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let mut pairs: Vec<SnippetPair> =
                read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", p.display()))?;
            if let Some(ids) = load_ids(a.split.as_deref())? {
                pairs.retain(|x| ids.contains(&x.doc_id));
            }
            pairs
        }
        (None, None) => return Err(usage("either --corpus or --pairs is required")),
    };
    if pairs.is_empty() {
        bail!("no pairs to evaluate");
    }
    let factory = MetricFactory::new(&spec, Some(&pairs), a.tie_epsilon)?.with_adapter_config(AdapterConfig {
        handshake_timeout: Duration::from_secs(a.handshake_timeout),
        request_timeout: Duration::from_secs(a.request_timeout),
        ..AdapterConfig::default()
    });
    let cfg = IrcConfig {
        seed,
        bootstrap_resamples: a.resamples,
        ..IrcConfig::default()
    };
    let report = evaluate_parallel(|| factory.instance().map_err(|e| e.to_string()), &pairs, &cfg, jobs)?;
    let table = report.per_aspect_text();
    match a.out.as_deref() {
        None => {
            write_output(None, &json_bytes(&report)?)?;
            eprint!("{table}");
        }
        Some(p) => {
            write_output(Some(p), &json_bytes(&report)?)?;
            print!("{table}");
        }
    }
    if let Some(p) = a.table {
        write_output(Some(&p), report.per_aspect_csv().as_bytes())?;
    }
    Ok(())
}

fn agree(a: AgreeArgs, labels: &LabelMap) -> Result<()> {
    let docs = load_corpus(&a.corpus, labels)?;
    let level = if a.raw_labels {
        LabelLevel::Raw
    } else {
        LabelLevel::Aspect
    };
    let report = agreement(&docs, level)?;
    write_output(a.out.as_deref(), &json_bytes(&report)?)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Tokenized sources, hypotheses and per-instance reference sets.
struct RefData {
    sources: Vec<Vec<String>>,
    hyps: Vec<Vec<String>>,
    refs: Vec<Vec<Vec<String>>>,
}

fn toks(s: &str) -> Vec<String> {
    tokenize(s).into_tokens()
}

fn load_ref_data(input: &RefInput, labels: &LabelMap) -> Result<RefData> {
    if let Some(src) = &input.source {
        let hyp = input.hyp.as_ref().ok_or_else(|| usage("--source needs --hyp"))?;
        if input.refs.is_empty() {
            return Err(usage("--source needs at least one --ref"));
        }
        let sources = read_lines(src)?;
        let hyps = read_lines(hyp)?;
        if hyps.len() != sources.len() {
            bail!(
                "{} has {} lines but {} has {}",
                hyp.display(),
                hyps.len(),
                src.display(),
                sources.len()
            );
        }
        let mut refs: Vec<Vec<Vec<String>>> = vec![Vec::new(); sources.len()];
        for r in &input.refs {
            let lines = read_lines(r)?;
            if lines.len() != sources.len() {
                bail!(
                    "{} has {} lines but {} has {}",
                    r.display(),
                    lines.len(),
                    src.display(),
                    sources.len()
                );
            }
            for (slot, line) in refs.iter_mut().zip(&lines) {
                slot.push(toks(line));
            }
        }
        return Ok(RefData {
            sources: sources.iter().map(|s| toks(s)).collect(),
            hyps: hyps.iter().map(|s| toks(s)).collect(),
            refs,
        });
    }
    let corpus = input
        .corpus
        .as_ref()
        .ok_or_else(|| usage("give --source/--hyp/--ref or --corpus"))?;
    let system = match input.system.as_str() {
        "source" => None,
        s => Some(
            s.strip_prefix("editor:")
                .filter(|e| !e.is_empty())
                .ok_or_else(|| usage(format!("--system must be `source` or `editor:<name>`, got {s:?}")))?
                .to_string(),
        ),
    };
    let docs = load_corpus(corpus, labels)?;
    corpus_ref_data(&docs, system.as_deref(), input.granularity)
}

fn corpus_ref_data(docs: &[Document], system: Option<&str>, granularity: Granularity) -> Result<RefData> {
    let mut by_paper: std::collections::BTreeMap<&str, Vec<&Document>> = Default::default();
    for d in docs {
        by_paper.entry(&d.id).or_default().push(d);
    }
    let mut data = RefData {
        sources: Vec::new(),
        hyps: Vec::new(),
        refs: Vec::new(),
    };
    for (paper, mut versions) in by_paper {
        versions.sort_by(|a, b| a.editor.cmp(&b.editor));
        let hyp_doc = match system {
            Some(e) => match versions.iter().find(|d| d.editor == e) {
                Some(d) => Some(*d),
                None => {
                    log::warn!("paper {paper}: no version by editor {e}; skipped");
                    continue;
                }
            },
            None => None,
        };
        let refs: Vec<&Document> = versions
            .iter()
            .copied()
            .filter(|d| Some(d.editor.as_str()) != system)
            .collect();
        if refs.is_empty() {
            log::warn!("paper {paper}: no reference editors; skipped");
            continue;
        }
        match granularity {
            Granularity::Document => {
                let src = versions[0].source_text(None)?;
                data.hyps.push(toks(&match hyp_doc {
                    Some(d) => d.revised_text(None)?,
                    None => src.clone(),
                }));
                data.refs.push(
                    refs.iter()
                        .map(|d| Ok(toks(&d.revised_text(None)?)))
                        .collect::<Result<_>>()?,
                );
                data.sources.push(toks(&src));
            }
            Granularity::Paragraph => {
                let layouts: Vec<_> = versions.iter().map(|d| d.layout()).collect();
                let n = layouts[0].paragraphs().len();
                if layouts.iter().any(|l| l.paragraphs().len() != n) {
                    bail!(
                        "paper {paper}: editors' versions have different paragraph counts; use --granularity document"
                    );
                }
                let ref_layouts: Vec<_> = versions
                    .iter()
                    .zip(&layouts)
                    .filter(|(d, _)| Some(d.editor.as_str()) != system)
                    .map(|(_, l)| l)
                    .collect();
                let hyp_layout = hyp_doc.map(|h| {
                    let i = versions
                        .iter()
                        .position(|d| d.editor == h.editor)
                        .expect("hyp is a version");
                    &layouts[i]
                });
                for pi in 0..n {
                    let src = layouts[0].source_paragraph(pi);
                    data.sources.push(toks(src));
                    data.hyps.push(match hyp_layout {
                        Some(l) => toks(&l.revised_paragraph(pi)),
                        None => toks(src),
                    });
                    data.refs
                        .push(ref_layouts.iter().map(|l| toks(&l.revised_paragraph(pi))).collect());
                }
            }
        }
    }
    if data.sources.is_empty() {
        bail!("no instances: every paper was skipped");
    }
    Ok(data)
}

#[derive(Serialize)]
struct GleuOutput {
    score: f64,
    iterations: usize,
    seed: u64,
    instances: usize,
    per_instance: Vec<f64>,
}

fn gleu(a: GleuArgs, labels: &LabelMap) -> Result<()> {
    let seed = seed_or_default(a.seed);
    let data = load_ref_data(&a.input, labels)?;
    let cfg = GleuConfig {
        max_n: a.max_n,
        iterations: a.iterations,
        seed,
        ..GleuConfig::default()
    };
    let report = gleu_corpus(&data.sources, &data.hyps, &data.refs, &cfg)?;
    let out = GleuOutput {
        score: report.score,
        iterations: a.iterations,
        seed,
        instances: data.sources.len(),
        per_instance: report.per_instance,
    };
    write_output(a.out.as_deref(), &json_bytes(&out)?)
}

#[derive(Serialize)]
struct MmOutput {
    /// F0.5 scaled to [0, 100].
    score: f64,
    precision: f64,
    recall: f64,
    f05: f64,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    per_instance: Vec<f64>,
}

fn mm_score(a: MmScoreArgs, labels: &LabelMap) -> Result<()> {
    let data = load_ref_data(&a.input, labels)?;
    let gold: Vec<Vec<_>> = data
        .sources
        .iter()
        .zip(&data.refs)
        .map(|(s, refs)| refs.iter().map(|r| extract_edits(s, r)).collect())
        .collect();
    let score = max_match_f05(&data.sources, &data.hyps, &gold)?;
    let out = MmOutput {
        score: 100.0 * score.f05,
        precision: score.precision,
        recall: score.recall,
        f05: score.f05,
        tp: score.counts.tp,
        fp: score.counts.fp,
        fn_: score.counts.fn_,
        per_instance: score.per_instance.iter().map(|m| m.f05).collect(),
    };
    write_output(a.out.as_deref(), &json_bytes(&out)?)
}

fn lm_train(a: LmTrainArgs, labels: &LabelMap) -> Result<()> {
    let mut sentences: Vec<Vec<String>> = Vec::new();
    if let Some(corpus) = &a.corpus {
        let docs = load_corpus(corpus, labels)?;
        let ids = load_ids(a.split.as_deref())?;
        for d in docs
            .iter()
            .filter(|d| ids.as_ref().is_none_or(|ids| ids.contains(&d.id)))
        {
            let layout = d.layout();
            for pi in 0..layout.paragraphs().len() {
                let text = match a.side {
                    Side::Source => layout.source_paragraph(pi).to_string(),
                    Side::Revised => layout.revised_paragraph(pi),
                };
                sentences.extend(lm_sentences(&text));
            }
        }
    }
    for path in &a.input {
        for line in read_lines(path)? {
            sentences.extend(lm_sentences(&line));
        }
    }
    let model = NgramModel::fit(
        &sentences,
        FitOptions {
            order: a.order,
            min_count: a.min_count,
        },
    )?;
    log::info!(
        "fitted order-{} model on {} sentences, vocabulary {}",
        a.order,
        sentences.len(),
        model.predictable_size()
    );
    write_output(Some(&a.out), &model.to_bytes())
}

#[derive(Serialize)]
struct PplOutput {
    perplexity: f64,
    tokens: usize,
    lines: usize,
    per_line: Vec<Option<f64>>,
}

fn lm_ppl(a: LmPplArgs) -> Result<()> {
    let model = NgramModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let lines = read_lines(&a.input)?;
    let mut all = Vec::new();
    let mut per_line = Vec::with_capacity(lines.len());
    for line in &lines {
        let sentences = lm_sentences(line);
        per_line.push(if sentences.is_empty() {
            None
        } else {
            Some(model.perplexity_sentences(&sentences)?)
        });
        all.extend(sentences);
    }
    if all.is_empty() {
        bail!("{} contains no tokens", a.input.display());
    }
    let out = PplOutput {
        perplexity: model.perplexity_sentences(&all)?,
        tokens: all.iter().map(Vec::len).sum(),
        lines: lines.len(),
        per_line,
    };
    write_output(a.out.as_deref(), &json_bytes(&out)?)
}
