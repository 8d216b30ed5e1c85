use std::fs;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use cordscope::analytics::export::{chord_json, cooccur_csv, cooccur_json, sankey_json, shares_json, timeseries_json};
use cordscope::analytics::{CountMode, ExportOptions};
use cordscope::ner::{Gazetteer, LocalExtractor, RetryPolicy};
use cordscope::pipeline::{self, BackendConfig, NodeSelection, PipelineConfig, PipelineError};
use cordscope::query::{evaluate_limited, parse_query, render, OutputFormat};
use cordscope::store::Store;
use cordscope::{AnalyzedPaper, EntityCategory};
use cordscope_server::mock_ta::{MockConfig, MockServer, PollReply};
use cordscope_server::{router, AppState, ServerOptions};

use crate::{BackendKind, Command, ExportArgs, ExportKind, GazetteerCommand, ProcessArgs, StoreCommand};

const EXIT_QUERY_ERROR: u8 = 2;

pub fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Ingest { data, store, limit } => ingest(&data, &store, limit),
        Command::Process(args) => process(args),
        Command::Store(cmd) => store_command(cmd),
        Command::Query { store, sql, file, format, limit } => query(&store, sql, file, &format, limit),
        Command::Export(args) => export(args),
        Command::Serve { store, host, port, cors, ui, query_cap } => serve(&store, &host, port, cors, ui, query_cap),
        Command::MockTa { host, port, key, running } => mock_ta(&host, port, key, running),
        Command::Gazetteer(cmd) => gazetteer(cmd),
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn ingest(data: &Path, root: &Path, limit: Option<usize>) -> Result<u8> {
    let corpus = pipeline::load_corpus(data, limit)?;
    let store = Store::open_writer(root)?;
    for r in &corpus.records {
        store.upsert(&AnalyzedPaper::new(r.cord_uid.clone(), r.title.clone(), r.publish_time))?;
    }
    store.flush()?;
    print_json(&json!({
        "rows": corpus.rows,
        "documents": store.len(),
        "duplicates": corpus.duplicates,
        "dropped_empty_id": corpus.dropped_empty_id,
        "malformed_dates": corpus.malformed_dates,
        "empty_abstracts": corpus.records.iter().filter(|r| r.abstract_text.trim().is_empty()).count(),
    }))?;
    Ok(0)
}

fn process(args: ProcessArgs) -> Result<u8> {
    let backend = match args.backend {
        BackendKind::Local => BackendConfig::Local { gazetteer: args.gazetteer },
        BackendKind::Remote => BackendConfig::Remote { endpoint: args.endpoint, key: args.key },
        BackendKind::Mock => {
            BackendConfig::Mock { results: args.mock_results.ok_or_else(|| anyhow!("--backend mock needs --mock-results"))? }
        }
    };
    let node = if args.number.eq_ignore_ascii_case("all") {
        NodeSelection::All
    } else {
        NodeSelection::One(args.number.parse().with_context(|| format!("--number must be a shard index or `all`, not `{}`", args.number))?)
    };
    let mut config = PipelineConfig::new(args.data, args.store, backend);
    config.nodes = args.nodes;
    config.node = node;
    config.workers = args.workers;
    config.checkpoint_interval = args.checkpoint_interval;
    config.retry_failed = args.retry_failed;
    config.limit = args.limit;
    config.retry = RetryPolicy { max_attempts: args.max_attempts, ..RetryPolicy::default() };
    match pipeline::run(&config) {
        Ok(report) => {
            print_json(&serde_json::to_value(&report)?)?;
            let code = report.exit_code();
            if code != 0 {
                eprintln!("completed with {} failed document(s)", report.failed());
            }
            Ok(code as u8)
        }
        Err(PipelineError::Shards(errors)) => {
            for e in &errors {
                eprintln!("error: {e}");
            }
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

fn store_command(cmd: StoreCommand) -> Result<u8> {
    match cmd {
        StoreCommand::Merge { into, shards } => {
            let store = Store::open_writer(&into)?;
            let copied = store.merge_from(&shards)?;
            print_json(&json!({ "copied": copied, "documents": store.len() }))?;
        }
        StoreCommand::Compact { root, store } => {
            let root = root.or(store).ok_or_else(|| anyhow!("give a store root"))?;
            let s = Store::open_writer(&root)?;
            let before = s.disk_size()?;
            s.compact()?;
            print_json(&json!({ "documents": s.len(), "bytes_before": before, "bytes_after": s.disk_size()? }))?;
        }
        StoreCommand::Stats { store } => {
            let s = Store::open(&store)?;
            print_json(&json!({
                "documents": s.len(),
                "segments": s.segment_paths().len(),
                "superseded": s.superseded(),
                "bytes": s.disk_size()?,
            }))?;
        }
    }
    Ok(0)
}

fn read_sql(sql: Option<String>, file: Option<PathBuf>) -> Result<String> {
    match (sql, file) {
        (_, Some(path)) => fs::read_to_string(&path).with_context(|| format!("reading {}", path.display())),
        (Some(s), None) if s == "-" => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            Ok(buf)
        }
        (Some(s), None) => Ok(s),
        (None, None) => bail!("give a query or --file"),
    }
}

fn query(root: &Path, sql: Option<String>, file: Option<PathBuf>, format: &str, limit: Option<usize>) -> Result<u8> {
    let format = OutputFormat::from_str(format).map_err(|e| anyhow!(e))?;
    let sql = read_sql(sql, file)?;
    let q = match parse_query(&sql) {
        Ok(q) => q,
        Err(e) => {
            eprint!("{}", e.render(&sql));
            return Ok(EXIT_QUERY_ERROR);
        }
    };
    let store = Store::open(root)?;
    let docs = cordscope::query::documents(&store)?;
    let (rows, truncated) = evaluate_limited(&q, &docs, limit.unwrap_or(usize::MAX));
    print!("{}", render(&rows, format));
    if truncated {
        eprintln!("(truncated at {} rows)", rows.len());
    }
    Ok(0)
}

fn category(name: &str) -> Result<EntityCategory> {
    EntityCategory::from_str(name).map_err(|e| anyhow!(e))
}

fn mode(name: &str) -> Result<CountMode> {
    CountMode::from_str(name).map_err(|e| anyhow!(e))
}

fn export(args: ExportArgs) -> Result<u8> {
    let root = args.store.ok_or_else(|| anyhow!("--store is required"))?;
    let papers = Store::open(&root)?.load_all()?;
    let mut opts = ExportOptions::default();
    opts.rollup.drop_unlinked = args.drop_unlinked;
    let bytes = match args.kind {
        ExportKind::Timeseries { term, category: cat, top } => {
            let cat = cat.as_deref().map(category).transpose()?;
            timeseries_json(&papers, cat.as_ref(), term.as_deref(), ExportOptions { top, ..opts })?
        }
        ExportKind::Shares { category: cat, k } => shares_json(&papers, &category(&cat)?, k, opts),
        ExportKind::Cooccur { rows, cols, top, mode: m, csv } => {
            let o = ExportOptions { top, mode: mode(&m)?, ..opts };
            let (rows, cols) = (category(&rows)?, category(&cols)?);
            if csv {
                cooccur_csv(&papers, &rows, &cols, o)
            } else {
                cooccur_json(&papers, &rows, &cols, o)
            }
        }
        ExportKind::Sankey { rows, cols, top, mode: m } => {
            sankey_json(&papers, &category(&rows)?, &category(&cols)?, ExportOptions { top, mode: mode(&m)?, ..opts })
        }
        ExportKind::Chord { category: cat, top, mode: m } => {
            chord_json(&papers, &category(&cat)?, ExportOptions { top, mode: mode(&m)?, ..opts })
        }
    };
    match args.out {
        Some(path) => fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(0)
}

fn serve(root: &Path, host: &str, port: u16, cors: Option<String>, ui: Option<PathBuf>, query_cap: Option<usize>) -> Result<u8> {
    let mut state = AppState::open(root)?;
    if let Some(cap) = query_cap {
        state.query_cap = cap;
    }
    let documents = state.snapshot().papers.len();
    let listener = TcpListener::bind((host, port)).with_context(|| format!("binding {host}:{port}"))?;
    let addr = listener.local_addr()?;
    println!("listening on http://{addr} ({documents} documents)");
    std::io::stdout().flush()?;
    let app = router(Arc::new(state), &ServerOptions { cors_origin: cors, ui_dir: ui });
    cordscope_server::runtime::serve_blocking(listener, app)?;
    Ok(0)
}

fn mock_ta(host: &str, port: u16, key: String, running: usize) -> Result<u8> {
    let mut config = MockConfig::new(key);
    config.poll_script = vec![PollReply::Running; running];
    let addr = format!("{host}:{port}").parse().with_context(|| format!("bad address {host}:{port}"))?;
    let server = MockServer::spawn(config, addr)?;
    println!("mock service on {}", server.url());
    std::io::stdout().flush()?;
    loop {
        std::thread::park();
    }
}

fn gazetteer(cmd: GazetteerCommand) -> Result<u8> {
    match cmd {
        GazetteerCommand::Dump => print!("{}", Gazetteer::bundled_tsv()),
        GazetteerCommand::Annotate { text } => {
            let (entities, relations) = LocalExtractor::bundled().analyze(&text);
            let relations: Vec<_> = relations
                .iter()
                .map(|r| json!({"relationType": r.relation_type, "bidirectional": r.bidirectional, "source": r.source, "target": r.target}))
                .collect();
            print_json(&json!({ "entities": entities, "relations": relations }))?;
        }
    }
    Ok(0)
}
