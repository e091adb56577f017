//! `hypo`: dataset building, agent correction runs, scoring, and reports
//! from one binary. Every subcommand composes operations from `hypo-core`;
//! no metric math lives here.

use std::collections::HashMap;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hypo_core::agent::{
    read_results, write_results, Agent, AgentMode, CachedCompletionProvider, CallBudget,
    CompletionProvider, CorrectionResult, EchoProvider, HttpCompletionProvider, ScriptedProvider,
    TemplateSet,
};
use hypo_core::dataset::{build_corpus, read_raw_nbest, split_stats, BuildConfig};
use hypo_core::error::{HypoError, Result};
use hypo_core::metrics::semantic::{
    CachedEmbeddingProvider, CachedNliProvider, EmbeddingProvider, HashEmbeddingProvider,
    HttpEmbeddingProvider, HttpNliProvider, NliProvider, OverlapNliProvider,
};
use hypo_core::metrics::slu::{HttpSluTagger, MockTagger, SluTagger};
use hypo_core::metrics::wer::Aggregation;
use hypo_core::model::{read_corpus, write_corpus, EvalCorpus, Split};
use hypo_core::report::{
    audit_aggregation, build_report, read_scores, render_table, round2, write_scores,
    MetricReport, ScoringConfig, TableFormat, TableShape,
};
use hypo_core::textnorm::NormConfig;
use hypo_core::truncate::{truncate_repeated_phrase, TruncationConfig};

#[derive(Parser)]
#[command(name = "hypo", version, about = "N-best transcript correction and evaluation pipeline")]
struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an evaluation corpus from a raw n-best dump.
    BuildDataset(BuildDatasetArgs),
    /// Run the correction agent over a corpus and write results.
    Correct(CorrectArgs),
    /// Apply repeated-phrase truncation to text (flag or stdin lines).
    Truncate(TruncateArgs),
    /// Word error rate of results (or the top-1 baseline) against references.
    Wer(WerArgs),
    /// Embedding and NLI similarity scores for a results file.
    ScoreSemantic(ScoreSemanticArgs),
    /// Intent accuracy and slot F1 under pseudo-gold tagging.
    ScoreSlu(ScoreSluArgs),
    /// All metrics at once; optionally writes a machine-readable score file.
    Evaluate(EvaluateArgs),
    /// Render score files as a table.
    Report(ReportArgs),
    /// Run all four agent modes and print the comparison table.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file (JSON lines).
    #[arg(long)]
    corpus: PathBuf,
    /// Restrict to one split: train, dev or test. Default: all records.
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
}

#[derive(Args)]
struct EndpointArgs {
    /// Base URL for http backends (chat at /chat/completions, embeddings at
    /// /embeddings, NLI at /nli, tagging at /tag).
    #[arg(long, env = "HYPO_ENDPOINT")]
    endpoint: Option<String>,
    /// Model name sent to http backends.
    #[arg(long, env = "HYPO_MODEL")]
    model: Option<String>,
    /// Bearer token for http backends.
    #[arg(long, env = "HYPO_API_KEY")]
    api_key: Option<String>,
    /// Directory for on-disk call caches.
    #[arg(long, env = "HYPO_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ProviderArgs {
    /// Completion backend.
    #[arg(long, default_value = "echo", value_parser = ["echo", "scripted", "http"])]
    provider: String,
    /// Completions table for the scripted provider: JSON object id -> reply.
    #[arg(long)]
    script: Option<PathBuf>,
}

#[derive(Args)]
struct AgentKnobs {
    /// Worker threads for provider fan-out.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Completion length cap per request.
    #[arg(long, default_value_t = 256)]
    max_tokens: u32,
    /// Cap on total provider calls; records beyond it keep top-1.
    #[arg(long)]
    budget: Option<u64>,
    /// Directory with combined.txt, judge.txt and editor.txt templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Shortest phrase length considered by truncation.
    #[arg(long, default_value_t = 1)]
    truncate_min: usize,
    /// Longest phrase length considered by truncation.
    #[arg(long, default_value_t = 5)]
    truncate_max: usize,
}

#[derive(Args)]
struct BuildDatasetArgs {
    /// Raw n-best dump (JSON lines).
    #[arg(long)]
    input: PathBuf,
    /// Where to write the built corpus.
    #[arg(long)]
    out: PathBuf,
    /// Hypotheses per utterance.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Minimum reference length in words, inclusive.
    #[arg(long, default_value_t = 4)]
    min_words: usize,
    /// Maximum reference length in words, inclusive.
    #[arg(long, default_value_t = 32)]
    max_words: usize,
    /// Seed for fill-by-sampling when fewer than k candidates are distinct.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CorrectArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Where to write correction results (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Agent mode: jea, judge, editor or passthrough.
    #[arg(long, value_parser = parse_mode)]
    mode: AgentMode,
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(flatten)]
    endpoint: EndpointArgs,
    #[command(flatten)]
    knobs: AgentKnobs,
}

#[derive(Args)]
struct TruncateArgs {
    /// Text to truncate; without it, each stdin line is processed.
    #[arg(long)]
    text: Option<String>,
    /// Shortest phrase length considered.
    #[arg(long, default_value_t = 1)]
    min: usize,
    /// Longest phrase length considered.
    #[arg(long, default_value_t = 5)]
    max: usize,
}

#[derive(Args)]
struct WerArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Correction results to score; without it, the top-1 baseline.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Average per-utterance rates instead of pooling edit counts.
    #[arg(long = "macro")]
    macro_average: bool,
}

#[derive(Args)]
struct ScoreSemanticArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Correction results to score.
    #[arg(long)]
    results: PathBuf,
    /// Embedding backend.
    #[arg(long, default_value = "hash", value_parser = ["hash", "http"])]
    embedder: String,
    /// NLI backend.
    #[arg(long, default_value = "overlap", value_parser = ["overlap", "http", "none"])]
    nli: String,
    #[command(flatten)]
    endpoint: EndpointArgs,
    /// Worker threads for scorer fan-out.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Args)]
struct ScoreSluArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Correction results to score.
    #[arg(long)]
    results: PathBuf,
    /// SLU tagger backend.
    #[arg(long, default_value = "mock", value_parser = ["mock", "http"])]
    tagger: String,
    #[command(flatten)]
    endpoint: EndpointArgs,
    /// Worker threads for scorer fan-out.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Args)]
struct ScorerArgs {
    /// Embedding backend.
    #[arg(long, default_value = "hash", value_parser = ["hash", "http", "none"])]
    embedder: String,
    /// NLI backend.
    #[arg(long, default_value = "overlap", value_parser = ["overlap", "http", "none"])]
    nli: String,
    /// SLU tagger backend.
    #[arg(long, default_value = "mock", value_parser = ["mock", "http", "none"])]
    tagger: String,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Correction results to score; without it, the top-1 baseline.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Where to write the machine-readable score file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    scorers: ScorerArgs,
    #[command(flatten)]
    endpoint: EndpointArgs,
    /// Average per-utterance rates instead of pooling edit counts.
    #[arg(long = "macro")]
    macro_average: bool,
    /// Worker threads for scorer fan-out.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Score files to render, one table row each, in order.
    #[arg(long, num_args = 1.., required = true)]
    scores: Vec<PathBuf>,
    /// Table shape.
    #[arg(long, default_value = "multimetric", value_parser = parse_shape)]
    shape: TableShape,
    /// Output format.
    #[arg(long, default_value = "text", value_parser = parse_format)]
    format: TableFormat,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(flatten)]
    endpoint: EndpointArgs,
    #[command(flatten)]
    scorers: ScorerArgs,
    #[command(flatten)]
    knobs: AgentKnobs,
    /// Writes results-<mode>.jsonl and scores-<mode>.json per mode here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Output format.
    #[arg(long, default_value = "text", value_parser = parse_format)]
    format: TableFormat,
}

fn parse_mode(s: &str) -> Result<AgentMode> {
    AgentMode::from_str(s)
}

fn parse_split(s: &str) -> Result<Split> {
    Split::from_str(s)
}

fn parse_shape(s: &str) -> Result<TableShape> {
    TableShape::from_str(s)
}

fn parse_format(s: &str) -> Result<TableFormat> {
    TableFormat::from_str(s)
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildDataset(args) => cmd_build_dataset(args),
        Command::Correct(args) => cmd_correct(args),
        Command::Truncate(args) => cmd_truncate(args),
        Command::Wer(args) => cmd_wer(args),
        Command::ScoreSemantic(args) => cmd_score_semantic(args),
        Command::ScoreSlu(args) => cmd_score_slu(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
        Command::Ablate(args) => cmd_ablate(args),
    }
}

fn load_corpus(args: &CorpusArgs) -> Result<EvalCorpus> {
    let corpus = read_corpus(&args.corpus)?;
    let corpus = match args.split {
        None => corpus,
        Some(split) => EvalCorpus::new(
            corpus.records().iter().filter(|r| r.split == split).cloned().collect(),
        ),
    };
    if corpus.is_empty() {
        return Err(HypoError::Config(format!(
            "no records to process in {}{}",
            args.corpus.display(),
            args.split.map(|s| format!(" (split {s})")).unwrap_or_default()
        )));
    }
    Ok(corpus)
}

fn cache_file(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| HypoError::io(dir, e))?;
    Ok(dir.join(name))
}

fn build_completion_provider(
    corpus: &EvalCorpus,
    provider: &ProviderArgs,
    endpoint: &EndpointArgs,
) -> Result<Box<dyn CompletionProvider>> {
    let inner: Box<dyn CompletionProvider> = match provider.provider.as_str() {
        "echo" => Box::new(EchoProvider::from_corpus(corpus)),
        "scripted" => {
            let path = provider.script.as_ref().ok_or_else(|| {
                HypoError::Config("--provider scripted needs --script <file>".into())
            })?;
            let text = fs::read_to_string(path).map_err(|e| HypoError::io(path, e))?;
            let table: HashMap<String, String> = serde_json::from_str(&text)
                .map_err(|e| HypoError::schema(path, 1, e.to_string()))?;
            Box::new(ScriptedProvider::new(table))
        }
        "http" => {
            let url = endpoint.endpoint.as_deref().ok_or_else(|| {
                HypoError::Config("--provider http needs --endpoint (or HYPO_ENDPOINT)".into())
            })?;
            let model = endpoint.model.as_deref().ok_or_else(|| {
                HypoError::Config("--provider http needs --model (or HYPO_MODEL)".into())
            })?;
            Box::new(HttpCompletionProvider::new(url, model, endpoint.api_key.clone()))
        }
        other => return Err(HypoError::Config(format!("unknown provider '{other}'"))),
    };
    match &endpoint.cache_dir {
        Some(dir) => Ok(Box::new(CachedCompletionProvider::new(
            inner,
            &cache_file(dir, "completions.cache")?,
        )?)),
        None => Ok(inner),
    }
}

/// Owned scorer backends; `scoring()` borrows them into a `ScoringConfig`.
#[derive(Default)]
struct Scorers {
    embedder: Option<Box<dyn EmbeddingProvider>>,
    nli: Option<Box<dyn NliProvider>>,
    tagger: Option<Box<dyn SluTagger>>,
}

impl Scorers {
    fn scoring(&self, aggregation: Aggregation) -> ScoringConfig<'_> {
        ScoringConfig {
            embedder: self.embedder.as_deref(),
            nli: self.nli.as_deref(),
            tagger: self.tagger.as_deref(),
            aggregation,
            truncation: TruncationConfig::default(),
            norm: NormConfig::default(),
        }
    }
}

fn require_endpoint<'a>(endpoint: &'a EndpointArgs, what: &str) -> Result<&'a str> {
    endpoint.endpoint.as_deref().ok_or_else(|| {
        HypoError::Config(format!("{what} needs --endpoint (or HYPO_ENDPOINT)"))
    })
}

fn build_scorers(
    embedder: &str,
    nli: &str,
    tagger: &str,
    endpoint: &EndpointArgs,
) -> Result<Scorers> {
    let mut scorers = Scorers::default();
    scorers.embedder = match embedder {
        "none" => None,
        "hash" => Some(Box::new(HashEmbeddingProvider::default())),
        "http" => {
            let base = require_endpoint(endpoint, "--embedder http")?.trim_end_matches('/');
            let model = endpoint.model.as_deref().ok_or_else(|| {
                HypoError::Config("--embedder http needs --model (or HYPO_MODEL)".into())
            })?;
            Some(Box::new(HttpEmbeddingProvider::new(
                &format!("{base}/embeddings"),
                model,
                endpoint.api_key.as_deref(),
            )?))
        }
        other => return Err(HypoError::Config(format!("unknown embedder '{other}'"))),
    };
    scorers.nli = match nli {
        "none" => None,
        "overlap" => Some(Box::new(OverlapNliProvider)),
        "http" => {
            let base = require_endpoint(endpoint, "--nli http")?.trim_end_matches('/');
            Some(Box::new(HttpNliProvider::new(
                &format!("{base}/nli"),
                endpoint.api_key.as_deref(),
            )?))
        }
        other => return Err(HypoError::Config(format!("unknown nli backend '{other}'"))),
    };
    scorers.tagger = match tagger {
        "none" => None,
        "mock" => Some(Box::new(MockTagger::default())),
        "http" => {
            let base = require_endpoint(endpoint, "--tagger http")?.trim_end_matches('/');
            Some(Box::new(HttpSluTagger::new(
                &format!("{base}/tag"),
                endpoint.api_key.as_deref(),
            )?))
        }
        other => return Err(HypoError::Config(format!("unknown tagger '{other}'"))),
    };
    if let Some(dir) = &endpoint.cache_dir {
        if let Some(inner) = scorers.embedder.take() {
            scorers.embedder = Some(Box::new(CachedEmbeddingProvider::new(
                inner,
                &cache_file(dir, "embeddings.cache")?,
            )?));
        }
        if let Some(inner) = scorers.nli.take() {
            scorers.nli = Some(Box::new(CachedNliProvider::new(
                inner,
                &cache_file(dir, "nli.cache")?,
            )?));
        }
    }
    Ok(scorers)
}

/// Scores inside a bounded thread pool so scorer fan-out never exceeds
/// the subcommand's --parallelism.
fn scored_report(
    corpus: &EvalCorpus,
    results: &[CorrectionResult],
    scoring: &ScoringConfig<'_>,
    parallelism: usize,
) -> Result<MetricReport> {
    if parallelism == 0 {
        return Err(HypoError::Config("parallelism must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HypoError::Config(format!("could not build thread pool: {e}")))?;
    pool.install(|| build_report(corpus, results, scoring))
}

fn build_agent(knobs: &AgentKnobs) -> Result<Agent> {
    let tcfg = TruncationConfig::new(knobs.truncate_min, knobs.truncate_max)?;
    let mut agent = Agent::new(tcfg).with_max_tokens(knobs.max_tokens);
    if let Some(dir) = &knobs.templates {
        agent = agent.with_templates(TemplateSet::from_dir(dir)?);
    }
    if let Some(calls) = knobs.budget {
        agent = agent.with_budget(Arc::new(CallBudget::new(calls)));
    }
    Ok(agent)
}

/// Results carrying each record's top-1 hypothesis, for baseline scoring.
fn passthrough_results(corpus: &EvalCorpus) -> Result<Vec<CorrectionResult>> {
    let echo = EchoProvider::from_corpus(corpus);
    Agent::new(TruncationConfig::default()).run_batch(
        corpus,
        AgentMode::PASSTHROUGH,
        &echo,
        1,
    )
}

fn load_results(corpus: &EvalCorpus, path: Option<&Path>) -> Result<Vec<CorrectionResult>> {
    match path {
        Some(path) => read_results(path, &NormConfig::default()),
        None => passthrough_results(corpus),
    }
}

fn aggregation(macro_average: bool) -> Aggregation {
    if macro_average {
        Aggregation::Macro
    } else {
        Aggregation::Micro
    }
}

fn print_column(name: &str, value: Option<f64>) {
    if let Some(v) = value {
        println!("{name:<11} {:>8.2}", round2(v));
    }
}

fn print_report_summary(report: &MetricReport) {
    println!("mode        {}", report.metadata.mode);
    println!("provider    {}", report.metadata.provider);
    println!("records     {}", report.per_utterance.len());
    print_column("WER-All", report.corpus.wer_all);
    print_column("WER-NoErr", report.corpus.wer_noerr);
    print_column("WER-Err", report.corpus.wer_err);
    print_column("Q-Emb", report.corpus.q_emb);
    print_column("BERT-F1", report.corpus.bert_f1);
    print_column("MENLI", report.corpus.menli);
    print_column("Intent-Acc", report.corpus.intent_acc);
    print_column("Slot-F1", report.corpus.slot_f1);
}

fn cmd_build_dataset(args: BuildDatasetArgs) -> Result<()> {
    let raws = read_raw_nbest(&args.input)?;
    let cfg = BuildConfig {
        k: args.k,
        min_words: args.min_words,
        max_words: args.max_words,
        rng_seed: args.seed,
        norm: NormConfig::default(),
    };
    let corpus = build_corpus(&raws, &cfg)?;
    write_corpus(&corpus, &args.out)?;
    let stats = split_stats(&corpus);
    println!(
        "kept {} of {} records (train {} / dev {} / test {}) -> {}",
        corpus.size(),
        raws.len(),
        stats.train,
        stats.dev,
        stats.test,
        args.out.display()
    );
    Ok(())
}

fn cmd_correct(args: CorrectArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let provider = build_completion_provider(&corpus, &args.provider, &args.endpoint)?;
    let agent = build_agent(&args.knobs)?;
    let results = agent.run_batch(&corpus, args.mode, provider.as_ref(), args.knobs.parallelism)?;
    write_results(&args.out, &results)?;
    let fallbacks = results.iter().filter(|r| !r.flags.is_empty()).count();
    println!(
        "corrected {} utterances in mode {} ({} flagged) -> {}",
        results.len(),
        args.mode,
        fallbacks,
        args.out.display()
    );
    Ok(())
}

fn cmd_truncate(args: TruncateArgs) -> Result<()> {
    let tcfg = TruncationConfig::new(args.min, args.max)?;
    let emit = |line: &str| {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        println!("{}", truncate_repeated_phrase(&tokens, &tcfg).join(" "));
    };
    match args.text {
        Some(text) => emit(&text),
        None => {
            for line in std::io::stdin().lock().lines() {
                let line = line.map_err(|e| HypoError::io(Path::new("stdin"), e))?;
                emit(&line);
            }
        }
    }
    Ok(())
}

fn cmd_wer(args: WerArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let results = load_results(&corpus, args.results.as_deref())?;
    let scorers = Scorers::default();
    let report = build_report(&corpus, &results, &scorers.scoring(aggregation(args.macro_average)))?;
    let noerr = report
        .per_utterance
        .iter()
        .filter(|r| r.partition == hypo_core::report::PartitionLabel::NoErr)
        .count();
    println!("mode        {}", report.metadata.mode);
    println!("records     {} (noerr {} / err {})", report.per_utterance.len(), noerr, report.per_utterance.len() - noerr);
    print_column("WER-All", report.corpus.wer_all);
    print_column("WER-NoErr", report.corpus.wer_noerr);
    print_column("WER-Err", report.corpus.wer_err);
    Ok(())
}

fn cmd_score_semantic(args: ScoreSemanticArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let results = read_results(&args.results, &NormConfig::default())?;
    let scorers = build_scorers(&args.embedder, &args.nli, "none", &args.endpoint)?;
    let report = scored_report(
        &corpus,
        &results,
        &scorers.scoring(Aggregation::Micro),
        args.parallelism,
    )?;
    println!("records     {}", report.per_utterance.len());
    print_column("Q-Emb", report.corpus.q_emb);
    print_column("BERT-F1", report.corpus.bert_f1);
    print_column("MENLI", report.corpus.menli);
    Ok(())
}

fn cmd_score_slu(args: ScoreSluArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let results = read_results(&args.results, &NormConfig::default())?;
    let scorers = build_scorers("none", "none", &args.tagger, &args.endpoint)?;
    let report = scored_report(
        &corpus,
        &results,
        &scorers.scoring(Aggregation::Micro),
        args.parallelism,
    )?;
    let excluded = report.per_utterance.iter().filter(|r| r.intent_match.is_none()).count();
    println!("records     {} ({} excluded by tagger failures)", report.per_utterance.len(), excluded);
    print_column("Intent-Acc", report.corpus.intent_acc);
    print_column("Slot-F1", report.corpus.slot_f1);
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let results = load_results(&corpus, args.results.as_deref())?;
    let scorers = build_scorers(
        &args.scorers.embedder,
        &args.scorers.nli,
        &args.scorers.tagger,
        &args.endpoint,
    )?;
    let report = scored_report(
        &corpus,
        &results,
        &scorers.scoring(aggregation(args.macro_average)),
        args.parallelism,
    )?;
    audit_aggregation(&report)?;
    print_report_summary(&report);
    println!("aggregation audit: ok");
    if let Some(out) = &args.out {
        write_scores(&report, out)?;
        println!("scores -> {}", out.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut reports = Vec::with_capacity(args.scores.len());
    for path in &args.scores {
        let report = read_scores(path)?;
        audit_aggregation(&report)?;
        reports.push(report);
    }
    print!("{}", render_table(&reports, args.shape, args.format)?);
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let provider = build_completion_provider(&corpus, &args.provider, &args.endpoint)?;
    let scorers = build_scorers(
        &args.scorers.embedder,
        &args.scorers.nli,
        &args.scorers.tagger,
        &args.endpoint,
    )?;
    let agent = build_agent(&args.knobs)?;
    let scoring = scorers.scoring(Aggregation::Micro);

    let mut reports = Vec::new();
    for mode in [AgentMode::PASSTHROUGH, AgentMode::JUDGE, AgentMode::EDITOR, AgentMode::JEA] {
        let results = agent.run_batch(&corpus, mode, provider.as_ref(), args.knobs.parallelism)?;
        let report = scored_report(&corpus, &results, &scoring, args.knobs.parallelism)?;
        audit_aggregation(&report)?;
        if let Some(dir) = &args.out_dir {
            fs::create_dir_all(dir).map_err(|e| HypoError::io(dir, e))?;
            write_results(&dir.join(format!("results-{mode}.jsonl")), &results)?;
            write_scores(&report, &dir.join(format!("scores-{mode}.json")))?;
        }
        reports.push(report);
    }
    print!("{}", render_table(&reports, TableShape::Ablation, args.format)?);
    Ok(())
}
