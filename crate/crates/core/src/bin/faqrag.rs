use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use faqrag::config::{ConfigError, ServiceConfig};
use faqrag::embedding_store::{build_index, EmbeddingIndex, IndexKind};
use faqrag::evaluation::{
    evaluate_retrieval, read_jsonl, run_end_to_end_eval, score_generation, EvalError, GenerationAnnotation,
    RelevanceJudgments, RetrievalRun,
};
use faqrag::knowledge_base::load_faq_corpus;
use faqrag::pipeline::PipelineError;
use faqrag::prompt_builder::PromptTemplate;

#[derive(Parser)]
#[command(name = "faqrag", version, about = "Multilingual FAQ answering engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the question and combined Q+A indexes for a corpus.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "FAQRAG_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "FAQRAG_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Answer one query and print the response as JSON.
    Ask {
        query: String,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Print the language and script detected for a text.
    Detect { text: String },
    /// Print the prompt template with fixed parts filled in.
    PromptDocs {
        #[arg(long)]
        template: Option<PathBuf>,
    },
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, env = "FAQRAG_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    index_dir: Option<PathBuf>,
}

impl EngineArgs {
    fn resolve(&self) -> Result<ServiceConfig, ConfigError> {
        let mut config = ServiceConfig::resolve(self.config.as_deref())?;
        if let Some(c) = &self.corpus {
            config.corpus = Some(c.clone());
        }
        if let Some(d) = &self.index_dir {
            config.index_dir = Some(d.clone());
        }
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Score a retrieval run against relevance judgments.
    Retrieval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Score annotated answers.
    Generation {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Answer a query set and write the retrieval run and responses.
    Run {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out_run: PathBuf,
        #[arg(long)]
        out_responses: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Pipeline(#[from] PipelineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Serve(#[from] faqrag::service::ServeError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Corpus(_) | ConfigError::Index { .. }) => 4,
            CliError::Config(ConfigError::Pipeline(e)) | CliError::Pipeline(e) if e.stage().is_some() => 5,
            CliError::Eval(EvalError::Pipeline { .. }) => 5,
            CliError::Eval(_) => 6,
            _ => 3,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn ingest(corpus: &Path, out: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let config = ServiceConfig::resolve(config)?;
    let corpus = load_faq_corpus(corpus).map_err(ConfigError::from)?;
    let providers = config.providers.build()?;
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_owned(),
        source,
    })?;
    for kind in [IndexKind::QuestionOnly, IndexKind::CombinedQa] {
        let path = out.join(kind.file_name());
        let index_err = |source| ConfigError::Index {
            path: path.clone(),
            source,
        };
        let index = build_index(&corpus, providers.embedder.as_ref(), kind).map_err(index_err)?;
        index.save(&path).map_err(index_err)?;
        EmbeddingIndex::load_for(&path, &corpus).map_err(index_err)?;
        println!("{}: {} rows, dim {}, model {}", path.display(), index.len(), index.dim(), index.model_id());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { corpus, out, config } => ingest(&corpus, &out, config.as_deref()),
        Command::Serve { config } => {
            let config = ServiceConfig::resolve(config.as_deref())?;
            let rt = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
                path: PathBuf::from("<runtime>"),
                source,
            })?;
            rt.block_on(faqrag::service::serve(config))?;
            Ok(())
        }
        Command::Ask { query, engine } => {
            let pipeline = engine.resolve()?.build_pipeline()?;
            let response = pipeline.answer_query(&query)?;
            println!("{}", serde_json::to_string_pretty(&response).expect("response serializes"));
            Ok(())
        }
        Command::Detect { text } => {
            let tag = faqrag::detect_language_and_script(&text).map_err(|_| PipelineError::EmptyQuery)?;
            println!("{}", serde_json::to_string(&tag).expect("tag serializes"));
            Ok(())
        }
        Command::PromptDocs { template } => {
            let template = match template {
                Some(path) => PromptTemplate::load(path).map_err(ConfigError::from)?,
                None => PromptTemplate::default(),
            };
            print!("{}", template.render_template_docs());
            Ok(())
        }
        Command::Eval(EvalCommand::Retrieval { run, judgments, format }) => {
            let report = evaluate_retrieval(&RetrievalRun::load(run)?, &RelevanceJudgments::load(judgments)?)?;
            match format {
                Format::Text => print!("{}", report.render_text()),
                Format::Json => print!("{}", report.to_json()),
            }
            Ok(())
        }
        Command::Eval(EvalCommand::Generation { annotations, format }) => {
            let annotations: Vec<GenerationAnnotation> = read_jsonl(annotations)?;
            let report = score_generation(&annotations)?;
            match format {
                Format::Text => print!("{}", report.render_text()),
                Format::Json => print!("{}", report.to_json()),
            }
            Ok(())
        }
        Command::Eval(EvalCommand::Run {
            queries,
            out_run,
            out_responses,
            engine,
        }) => {
            let queries = RelevanceJudgments::load(queries)?;
            let pipeline = engine.resolve()?.build_pipeline()?;
            let out = run_end_to_end_eval(queries.records(), &pipeline)?;
            write_file(&out_run, &out.run.to_jsonl())?;
            if let Some(path) = out_responses {
                write_file(&path, &out.responses_jsonl())?;
            }
            let cached = out.run.records.iter().filter(|r| r.cache_answered).count();
            println!("{} queries answered, {cached} from cache", out.run.records.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "faqrag=info,warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
