mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cordscope", version, about = "Extract, store, query and chart medical entities from paper abstracts")]
struct Cli {
    /// More logging (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a metadata CSV and store entity-less paper documents.
    Ingest {
        #[arg(long, visible_alias = "metadata")]
        data: PathBuf,
        #[arg(long, visible_alias = "out")]
        store: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Run entity extraction over one shard (or all shards) of a metadata CSV.
    Process(ProcessArgs),
    /// Store maintenance.
    #[command(subcommand)]
    Store(StoreCommand),
    /// Run a query against a store.
    Query {
        #[arg(long)]
        store: PathBuf,
        /// Query text; `-` reads standard input.
        sql: Option<String>,
        /// Read the query from a file.
        #[arg(long, conflicts_with = "sql")]
        file: Option<PathBuf>,
        #[arg(long, default_value = "table")]
        format: String,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Write an analytics export as JSON (or CSV for cooccur --csv).
    Export(ExportArgs),
    /// Serve the HTTP API over a store snapshot.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// 0 picks a free port; the bound URL is printed either way.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Allowed CORS origin (default: any).
        #[arg(long)]
        cors: Option<String>,
        /// Directory served under /ui.
        #[arg(long)]
        ui: Option<PathBuf>,
        #[arg(long)]
        query_cap: Option<usize>,
    },
    /// Run a local mock of the hosted entity job service.
    MockTa {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 0)]
        port: u16,
        #[arg(long, default_value = "mock-key")]
        key: String,
        /// `running` replies before each job succeeds.
        #[arg(long, default_value_t = 1)]
        running: usize,
    },
    /// Gazetteer utilities.
    #[command(subcommand)]
    Gazetteer(GazetteerCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Local,
    Remote,
    Mock,
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value_t = 1)]
    nodes: usize,
    /// Shard number, or `all` to run every shard and merge.
    #[arg(long, default_value = "0")]
    number: String,
    #[arg(long, value_enum, default_value = "local")]
    backend: BackendKind,
    /// Gazetteer TSV for the local backend (default: bundled).
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Canned result documents (JSON Lines) for the mock backend.
    #[arg(long)]
    mock_results: Option<PathBuf>,
    /// Service endpoint for the remote backend (default: $TA_ENDPOINT).
    #[arg(long)]
    endpoint: Option<String>,
    /// Service key for the remote backend (default: $TA_KEY).
    #[arg(long)]
    key: Option<String>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 100)]
    checkpoint_interval: usize,
    /// Reprocess documents recorded as failed in the checkpoint.
    #[arg(long)]
    retry_failed: bool,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 5)]
    max_attempts: u32,
}

#[derive(Subcommand)]
enum StoreCommand {
    /// Merge shard stores into one store; later shards win on shared ids.
    Merge {
        #[arg(long)]
        into: PathBuf,
        #[arg(required = true)]
        shards: Vec<PathBuf>,
    },
    /// Rewrite the live documents into a single segment.
    Compact {
        #[arg(required_unless_present = "store")]
        root: Option<PathBuf>,
        #[arg(long, conflicts_with = "root")]
        store: Option<PathBuf>,
    },
    /// Print document and segment counts.
    Stats {
        #[arg(long)]
        store: PathBuf,
    },
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ignore mentions without a UMLS id.
    #[arg(long, global = true)]
    drop_unlinked: bool,
    #[command(subcommand)]
    kind: ExportKind,
}

#[derive(Subcommand)]
enum ExportKind {
    /// Monthly counts for one term, or for the top terms of a category.
    Timeseries {
        #[arg(long)]
        term: Option<String>,
        #[arg(long)]
        category: Option<String>,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Monthly relative shares of the top-k terms.
    Shares {
        #[arg(long, default_value = "MedicationName")]
        category: String,
        #[arg(long, default_value_t = 12)]
        k: usize,
    },
    /// Co-occurrence matrix between two categories.
    Cooccur {
        #[arg(long)]
        rows: String,
        #[arg(long)]
        cols: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, default_value = "binary")]
        mode: String,
        #[arg(long)]
        csv: bool,
    },
    /// Sankey nodes and links between two categories.
    Sankey {
        #[arg(long)]
        rows: String,
        #[arg(long)]
        cols: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, default_value = "binary")]
        mode: String,
    },
    /// Same-category chord matrix.
    Chord {
        #[arg(long)]
        category: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long, default_value = "binary")]
        mode: String,
    },
}

#[derive(Subcommand)]
enum GazetteerCommand {
    /// Print the bundled gazetteer as TSV.
    Dump,
    /// Run the local extractor over text and print the entities as JSON.
    Annotate { text: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match run::dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
