use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ctxner::config::{Config, EndpointOverrides};
use ctxner::corpus::{load_ner_corpus, unique_entity_strings, Document};
use ctxner::datagen::{generate_dataset, llm_client_from_endpoint, read_dataset, write_dataset};
use ctxner::eval::{emit_report, run_experiment};
use ctxner::rerank::{train_lexical_scorer, ScorerSpec};
use ctxner::retrieval::{ContextWindow, Retriever};

#[derive(Parser)]
#[command(name = "ctxner", version, about = "Document-level context retrieval for NER")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// More log output on stderr; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Load the corpus and print a summary.
    ValidateCorpus(Common),
    /// Generate the synthetic relevance dataset.
    GenDataset {
        #[command(flatten)]
        common: Common,
        /// `mock`, `mock://<seed>` or an http(s) completion endpoint.
        #[arg(long)]
        llm_endpoint: Option<String>,
    },
    /// Train the lexical relevance scorer on the generated dataset.
    TrainScorer(Common),
    /// Run every configured experiment and write the report tables.
    RunEval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        scorer_endpoint: Option<String>,
        #[arg(long)]
        ner_endpoint: Option<String>,
    },
    /// Print the candidate pool of every annotated sentence as JSON lines.
    DumpPool {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, value_enum, default_value_t = WindowArg::Chapter)]
        window: WindowArg,
        /// Restrict to one document.
        #[arg(long)]
        doc: Option<String>,
    },
    /// Score one (query, context) pair.
    Score {
        #[arg(long)]
        query: String,
        #[arg(long)]
        context: String,
        #[arg(long, value_enum, default_value_t = ScorerArg::Random)]
        scorer: ScorerArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lexical model file.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Implies `--scorer remote`.
        #[arg(long)]
        scorer_endpoint: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct Grid {
    #[arg(long)]
    n: Option<usize>,
    /// One value or a comma-separated sweep.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    window: Option<WindowArg>,
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Chapter,
    Book,
}

impl From<WindowArg> for ContextWindow {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Chapter => ContextWindow::FirstChapter,
            WindowArg::Book => ContextWindow::FullBook,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScorerArg {
    Random,
    Lexical,
    Remote,
}

fn load_config(common: &Common, overrides: EndpointOverrides) -> anyhow::Result<Config> {
    let mut config = Config::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.set_seed(seed);
    }
    if let Some(out) = &common.out_dir {
        config.out_dir = out.clone();
    }
    config.apply_endpoints(&overrides.or(EndpointOverrides::from_env()));
    config.validate()?;
    Ok(config)
}

fn load_corpus(config: &Config) -> anyhow::Result<Vec<Document>> {
    load_ner_corpus(&config.corpus).with_context(|| format!("loading corpus {}", config.corpus.display()))
}

fn create_out_dir(config: &Config) -> anyhow::Result<()> {
    fs::create_dir_all(&config.out_dir).with_context(|| format!("creating {}", config.out_dir.display()))
}

fn validate_corpus(common: &Common) -> anyhow::Result<()> {
    let config = load_config(common, EndpointOverrides::default())?;
    let docs = load_corpus(&config)?;
    let sentences: usize = docs.iter().map(Document::len).sum();
    let annotated: usize = docs.iter().map(|d| d.annotated_sentences().count()).sum();
    let entities: usize = unique_entity_strings(&docs).values().map(|s| s.len()).sum();
    println!("{} documents, {sentences} sentences", docs.len());
    println!("{annotated} annotated sentences, {entities} unique entity strings");
    Ok(())
}

fn gen_dataset(common: &Common, llm_endpoint: Option<String>) -> anyhow::Result<()> {
    let config = load_config(
        common,
        EndpointOverrides {
            llm: llm_endpoint,
            ..Default::default()
        },
    )?;
    let docs = load_corpus(&config)?;
    let llm = llm_client_from_endpoint(&config.llm.endpoint, &config.llm.adapter, config.datagen.parallelism)?;
    let (train, eval, report) = generate_dataset(&docs, llm.as_ref(), &config.datagen)?;
    create_out_dir(&config)?;
    let dataset = config.dataset_path();
    write_dataset(&dataset, &train, &eval)?;
    let report_path = config.out_dir.join("generation_report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;
    if report.failed > 0 {
        log::warn!("{} entities skipped after LLM failures", report.failed);
    }
    println!(
        "{} positives ({} filtered, {} empty, {} failed), {} negatives; train {} / eval {} -> {}",
        report.accepted,
        report.filtered,
        report.empty,
        report.failed,
        report.negative_sampling + report.positive_swap,
        report.train,
        report.eval,
        dataset.display()
    );
    Ok(())
}

fn train_scorer(common: &Common) -> anyhow::Result<()> {
    let config = load_config(common, EndpointOverrides::default())?;
    let dataset = config.dataset_path();
    let (train, eval) = read_dataset(&dataset)?;
    let model = train_lexical_scorer(&train, config.training)?;
    let metrics = model.evaluate(&eval, 0.5);
    create_out_dir(&config)?;
    let path = config.model_path();
    model.save(&path)?;
    let metrics_path = config.out_dir.join("scorer_metrics.json");
    fs::write(&metrics_path, serde_json::to_string_pretty(&metrics)? + "\n")
        .with_context(|| format!("writing {}", metrics_path.display()))?;
    println!(
        "train loss {:.4}; eval F1 {:.4} (accuracy {:.4}, {} examples) -> {}",
        model.train_loss,
        metrics.f1,
        metrics.accuracy,
        metrics.examples,
        path.display()
    );
    Ok(())
}

fn run_eval(common: &Common, grid: &Grid, overrides: EndpointOverrides) -> anyhow::Result<()> {
    let mut config = load_config(common, overrides)?;
    for e in &mut config.experiment {
        if let Some(n) = grid.n {
            e.n = n;
        }
        if let Some(k) = &grid.k {
            e.k = k.clone();
        }
        if let Some(w) = grid.window {
            e.window = w.into();
        }
        if let Some(runs) = grid.runs {
            e.runs = runs;
        }
    }
    config.validate()?;
    if config.experiment.is_empty() {
        bail!("no [[experiment]] entries in {}", common.config.display());
    }
    let Some(ner) = &config.ner else {
        bail!("no [ner] predictor configured");
    };
    let predictor = ner.build()?;
    let docs = load_corpus(&config)?;
    let mut reports = Vec::new();
    for experiment in &config.experiment {
        log::info!("running {}", experiment.config_id());
        let report = run_experiment(experiment, &docs, predictor.as_ref())?;
        println!(
            "{}: best k={} F1 {:.4}",
            report.config_id, report.summary.best_k, report.summary.best_f1
        );
        reports.push(report);
    }
    let written = emit_report(&reports, &config.out_dir, &config.report.parsed()?)?;
    log::info!("wrote {} report files to {}", written.len(), config.out_dir.display());
    Ok(())
}

fn dump_pool(common: &Common, n: usize, window: WindowArg, only: Option<&str>) -> anyhow::Result<()> {
    let config = load_config(common, EndpointOverrides::default())?;
    let seed = config.seed.unwrap_or(0);
    let docs = load_corpus(&config)?;
    if let Some(id) = only {
        if !docs.iter().any(|d| d.doc_id == id) {
            bail!("unknown document {id:?}");
        }
    }
    let bm25 = config.experiment.first().map(|e| e.bm25).unwrap_or_default();
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    for doc in docs.iter().filter(|d| only.is_none_or(|id| d.doc_id == id)) {
        if doc.annotated_sentences().next().is_none() {
            continue;
        }
        let retriever = Retriever::with_heuristic_nouns(doc, window.into(), bm25)?;
        for sentence in doc.annotated_sentences() {
            for record in retriever.pool_records(sentence.index, n, seed) {
                serde_json::to_writer(&mut out, &record)?;
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn score(
    query: &str,
    context: &str,
    mut kind: ScorerArg,
    seed: u64,
    model: Option<PathBuf>,
    endpoint: Option<String>,
) -> anyhow::Result<()> {
    let endpoint = endpoint.or(EndpointOverrides::from_env().scorer);
    if endpoint.is_some() && kind == ScorerArg::Random {
        kind = ScorerArg::Remote;
    }
    let spec = match kind {
        ScorerArg::Random => ScorerSpec::Random { seed },
        ScorerArg::Lexical => ScorerSpec::Lexical {
            model_path: model.context("--model is required for the lexical scorer")?,
        },
        ScorerArg::Remote => ScorerSpec::Remote {
            endpoint: endpoint.context("--scorer-endpoint is required for the remote scorer")?,
        },
    };
    let scorer = spec.build()?;
    let scores = scorer.score_pairs(query, &[context])?;
    let Some(s) = scores.first() else {
        bail!("scorer returned no score");
    };
    println!("{:.4}", s.value());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("starting worker pool")?;
    }
    match cli.command {
        Command::ValidateCorpus(common) => validate_corpus(&common),
        Command::GenDataset { common, llm_endpoint } => gen_dataset(&common, llm_endpoint),
        Command::TrainScorer(common) => train_scorer(&common),
        Command::RunEval {
            common,
            grid,
            scorer_endpoint,
            ner_endpoint,
        } => run_eval(
            &common,
            &grid,
            EndpointOverrides {
                llm: None,
                scorer: scorer_endpoint,
                ner: ner_endpoint,
            },
        ),
        Command::DumpPool {
            common,
            n,
            window,
            doc,
        } => dump_pool(&common, n, window, doc.as_deref()),
        Command::Score {
            query,
            context,
            scorer,
            seed,
            model,
            scorer_endpoint,
        } => score(&query, &context, scorer, seed, model, scorer_endpoint),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}

/// The error chain on one line, skipping causes a message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}
