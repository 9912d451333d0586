//! `standoff`: command-line driver for the stand-off annotation pipeline.

mod commands;
mod config;
mod failure;
mod pipeline;

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use standoff::inline::OffsetConvention;

use config::{Config, DEFAULT_CONFIG_FILE};
use failure::{CmdResult, Failure, SUCCESS, USAGE};
use pipeline::Stage;

#[derive(Debug, Parser)]
#[command(name = "standoff", version, about = "Stand-off annotation pipeline for clinical text")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, env = "STANDOFF_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,
    /// Offset display convention: half-open-0 or inclusive-1.
    #[arg(long, global = true)]
    convention: Option<OffsetConvention>,
    /// Worker threads for `run`.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<NonZeroUsize>,
    /// Store connection string (a SQLite path or `sqlite::memory:`).
    #[arg(long, global = true, value_name = "CONN")]
    store: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create the store schema.
    Init,
    /// Print the schema DDL.
    Schema,
    /// Import plain-text documents and external annotation files.
    Import(ImportArgs),
    /// Run pipeline stages over stored documents.
    Run(RunArgs),
    /// Annotations standing in an interval relation to a span.
    Query(QueryArgs),
    /// Split a sentence around two concepts.
    Segments(SegmentsArgs),
    /// Convert inline XML markup to plain text plus stand-off annotations.
    Convert(ConvertArgs),
    /// Mine frequent subgraphs of stored or file-based graphs.
    GraphMine(MineArgs),
    /// Write annotations in the external line format.
    Export(ExportArgs),
    /// Manage task instances, instance sets and ground-truth labels.
    #[command(subcommand)]
    Instances(InstanceCommand),
}

#[derive(Debug, Args)]
struct ImportArgs {
    /// Add imported documents to this corpus, creating it if needed.
    #[arg(long)]
    corpus: Option<String>,
    /// External annotation file (repeatable).
    #[arg(long = "annotations", value_name = "FILE")]
    annotations: Vec<PathBuf>,
    /// Plain-text files; each becomes a document named after its file stem.
    files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Comma-separated stages; they always run in pipeline order.
    #[arg(long, value_delimiter = ',', required = true, value_enum)]
    stages: Vec<Stage>,
    /// Only documents of this corpus.
    #[arg(long, conflicts_with = "docs")]
    corpus: Option<String>,
    /// Stored document names, or text files to import first. Default: all.
    docs: Vec<String>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    doc: String,
    /// Relation tag, e.g. during, before, overlapped-by.
    #[arg(long)]
    rel: String,
    #[arg(long)]
    start: usize,
    #[arg(long)]
    end: usize,
    /// Only annotations of this type.
    #[arg(long = "type", value_name = "TYPE")]
    type_name: Option<String>,
}

#[derive(Debug, Args)]
struct SegmentsArgs {
    #[arg(long)]
    doc: String,
    /// Sentence annotation id.
    #[arg(long)]
    sentence: i64,
    /// First concept annotation id.
    #[arg(long)]
    c1: i64,
    /// Second concept annotation id.
    #[arg(long)]
    c2: i64,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    input: PathBuf,
    /// Where the .txt and .ann files go. Default: next to the input.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Treat the input as a corpus of records, one document per record.
    #[arg(long)]
    records: bool,
    #[arg(long, default_value = "RECORD", requires = "records")]
    record_element: String,
    #[arg(long, default_value = "TEXT", requires = "records")]
    text_element: String,
    /// Also store the converted documents and annotations.
    #[arg(long)]
    import: bool,
    #[arg(long, requires = "import")]
    corpus: Option<String>,
}

#[derive(Debug, Args)]
struct MineArgs {
    #[arg(long)]
    min_support: Option<NonZeroUsize>,
    #[arg(long)]
    max_nodes: Option<NonZeroUsize>,
    /// Mine graphs from an interchange file instead of the store.
    #[arg(long, value_name = "FILE")]
    graphs: Option<PathBuf>,
    /// Stored graph type to mine.
    #[arg(long = "type", default_value = standoff::graph::DEPENDENCY, conflicts_with = "graphs")]
    graph_type: String,
    /// Also write the patterns in the interchange format.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Output file. Default: standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Document names. Default: all.
    docs: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum InstanceCommand {
    /// Create an instance; prints its id.
    Create {
        #[arg(long)]
        corpus: String,
        /// document, annotation-pair or document-set.
        #[arg(long)]
        kind: String,
        /// Document names or ids, or annotation ids.
        #[arg(required = true)]
        content: Vec<String>,
    },
    /// Group instances into a named set; prints its id.
    MakeSet {
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        purpose: String,
        #[arg(required = true)]
        instances: Vec<i64>,
    },
    /// Record a ground-truth label.
    Label { instance: i64, task: String, label: String },
    /// Show an instance, with its label for a task.
    Show {
        instance: i64,
        #[arg(long)]
        task: Option<String>,
    },
    /// List the sets of a corpus for a purpose.
    Sets {
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        purpose: String,
    },
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let file = match &cli.config {
        Some(path) => Some(path.clone()),
        None => Some(PathBuf::from(DEFAULT_CONFIG_FILE)).filter(|p| Path::new(p).is_file()),
    };
    let mut config = Config::load(file.as_deref(), std::env::vars())?;
    if let Some(store) = &cli.store {
        config.store = store.clone();
    }
    if let Some(c) = cli.convention {
        config.convention = c;
    }
    if let Some(j) = cli.jobs {
        config.jobs = j.get();
    }
    config.validate()?;
    Ok(config)
}

fn dispatch(cli: Cli) -> CmdResult {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Init => commands::init(&config),
        Command::Schema => commands::schema(),
        Command::Import(a) => commands::import(&config, a.corpus.as_deref(), &a.files, &a.annotations),
        Command::Run(a) => commands::run(&config, &a.stages, a.corpus.as_deref(), &a.docs),
        Command::Query(a) => commands::query(&config, &a.doc, &a.rel, a.start, a.end, a.type_name.as_deref()),
        Command::Segments(a) => commands::segments(&config, &a.doc, a.sentence, a.c1, a.c2),
        Command::Convert(a) => commands::convert(
            &config,
            &commands::ConvertOptions {
                input: a.input,
                out_dir: a.out_dir,
                records: a.records.then_some(standoff::inline::RecordOptions {
                    record_element: a.record_element,
                    text_element: a.text_element,
                }),
                import: a.import,
                corpus: a.corpus,
            },
        ),
        Command::GraphMine(a) => {
            let mut config = config;
            if let Some(n) = a.min_support {
                config.min_support = n.get();
            }
            if let Some(n) = a.max_nodes {
                config.max_nodes = n.get();
            }
            commands::graph_mine(&config, a.graphs.as_deref(), &a.graph_type, a.out.as_deref())
        }
        Command::Export(a) => commands::export(&config, &a.docs, a.out.as_deref()),
        Command::Instances(c) => match c {
            InstanceCommand::Create { corpus, kind, content } => {
                commands::instance_create(&config, &corpus, &kind, &content)
            }
            InstanceCommand::MakeSet {
                corpus,
                name,
                purpose,
                instances,
            } => commands::instance_set(&config, &corpus, &name, &purpose, &instances),
            InstanceCommand::Label { instance, task, label } => {
                commands::instance_label(&config, instance, &task, &label)
            }
            InstanceCommand::Show { instance, task } => commands::instance_show(&config, instance, task.as_deref()),
            InstanceCommand::Sets { corpus, purpose } => commands::instance_sets(&config, &corpus, &purpose),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { SUCCESS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
