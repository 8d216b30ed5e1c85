use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use cordscope::corpus::shard_filter;
use cordscope::ner::{serialize_result_json, LocalExtractor};
use cordscope::pipeline::{
    load_corpus, run_with_backend, shard_dir, Backend, BackendConfig, BatchOutcome, Fatal, LocalBackend, MockBackend, NodeSelection,
    PipelineConfig, PipelineError,
};
use cordscope::store::Store;
use cordscope::PaperRecord;

const ABSTRACTS: [&str; 6] = [
    "Patients received hydroxychloroquine (HCQ) 400 mg daily, and fever resolved.",
    "Chloroquine (CQ) was compared with azithromycin in pneumonia.",
    "No myocarditis was observed after remdesivir.",
    "Cough and fever were reported in most cases of COVID-19.",
    "",
    "Tocilizumab and dexamethasone were given; there was no dyspnea.",
];

fn write_metadata(dir: &Path, rows: usize) -> PathBuf {
    let mut csv = String::from("cord_uid,title,abstract,publish_time\n");
    for i in 0..rows {
        // every 25th row repeats an earlier id with a later date
        let (id, date) = if i % 25 == 24 {
            (format!("a{:04}", i - 20), "2021-03-01".to_string())
        } else {
            (format!("a{i:04}"), format!("2020-{:02}-10", i % 12 + 1))
        };
        writeln!(csv, "{id},\"Title {i}\",\"{}\",{date}", ABSTRACTS[i % ABSTRACTS.len()]).unwrap();
    }
    let path = dir.join("metadata.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

/// Canned results for every record except those in `missing`.
fn canned(records: &[PaperRecord], missing: &[&str]) -> MockBackend {
    let local = LocalBackend::new(LocalExtractor::bundled());
    let refs: Vec<&PaperRecord> =
        records.iter().filter(|r| !r.abstract_text.is_empty() && !missing.contains(&r.cord_uid.as_str())).collect();
    let results: HashMap<String, serde_json::Value> =
        local.analyze(&refs).unwrap().into_iter().map(|(id, p)| (id, serialize_result_json(&p.unwrap(), 0))).collect();
    MockBackend::new(results)
}

/// id -> stored JSON, for set comparisons.
fn contents(root: &Path) -> BTreeMap<String, String> {
    Store::open(root).unwrap().load_all().unwrap().iter().map(|p| (p.id.clone(), p.to_json_value().to_string())).collect()
}

fn compacted_bytes(root: &Path) -> Vec<u8> {
    let store = Store::open_writer(root).unwrap();
    store.compact().unwrap();
    let segments = store.segment_paths();
    assert_eq!(segments.len(), 1);
    std::fs::read(&segments[0]).unwrap()
}

/// Delegates to `inner` but aborts the run on any batch containing `fatal_on`,
/// and remembers what it was asked to analyze.
struct Crashing<'a> {
    inner: &'a dyn Backend,
    fatal_on: Option<String>,
    seen: Mutex<Vec<String>>,
}

impl<'a> Crashing<'a> {
    fn new(inner: &'a dyn Backend, fatal_on: Option<&str>) -> Self {
        Self { inner, fatal_on: fatal_on.map(str::to_string), seen: Mutex::new(Vec::new()) }
    }
}

impl Backend for Crashing<'_> {
    fn name(&self) -> &str {
        "crashing"
    }

    fn batch_size(&self) -> usize {
        3
    }

    fn analyze(&self, records: &[&PaperRecord]) -> Result<BatchOutcome, Fatal> {
        if self.fatal_on.as_ref().is_some_and(|id| records.iter().any(|r| &r.cord_uid == id)) {
            return Err(Fatal("service went away".into()));
        }
        self.seen.lock().unwrap().extend(records.iter().map(|r| r.cord_uid.clone()));
        self.inner.analyze(records)
    }
}

fn config(metadata: &Path, root: &Path, nodes: usize, node: NodeSelection, workers: usize) -> PipelineConfig {
    let mut c = PipelineConfig::new(metadata, root, BackendConfig::Local { gazetteer: None });
    c.nodes = nodes;
    c.node = node;
    c.workers = workers;
    c.checkpoint_interval = 4;
    c
}

pub fn shard_laws() {
    for nodes in 1..=8 {
        let mut owner = vec![None; 1000];
        for node in 0..nodes {
            for (i, slot) in owner.iter_mut().enumerate() {
                if shard_filter(i, node, nodes).unwrap() {
                    assert!(slot.is_none(), "index {i} in shards {slot:?} and {node} of {nodes}");
                    *slot = Some(node);
                }
            }
        }
        assert!(owner.iter().all(Option::is_some), "{nodes} nodes leave indices unassigned");
    }

    let dir = tempfile::tempdir().unwrap();
    let metadata = write_metadata(dir.path(), 250);
    let corpus = load_corpus(&metadata, None).unwrap();
    assert_eq!(corpus.duplicates, 10);
    // a few ids have no canned result, so failures take part in the comparison
    let mock = canned(&corpus.records, &["a0007", "a0131"]);

    let sequential = dir.path().join("sequential");
    let report = run_with_backend(&config(&metadata, &sequential, 1, NodeSelection::One(0), 1), &mock).unwrap();
    assert_eq!(report.failed(), 2);
    let want = contents(&sequential);
    assert_eq!(want.len(), corpus.records.len() - 2);

    let parallel = dir.path().join("parallel");
    let report = run_with_backend(&config(&metadata, &parallel, 8, NodeSelection::All, 8), &mock).unwrap();
    assert_eq!(report.shards.len(), 8);
    assert_eq!(report.failed(), 2);
    assert_eq!(contents(&parallel), want, "8-shard merge differs from the sequential run");
    let per_shard: usize = (0..8).map(|s| contents(&shard_dir(&parallel, s)).len()).sum();
    assert_eq!(per_shard, want.len());

    // single shard: crash part way, resume, compare bytes
    let clean = dir.path().join("clean");
    run_with_backend(&config(&metadata, &clean, 1, NodeSelection::One(0), 1), &Crashing::new(&mock, None)).unwrap();
    let crashed = dir.path().join("crashed");
    let mut cfg = config(&metadata, &crashed, 1, NodeSelection::One(0), 1);
    cfg.checkpoint_interval = 1;
    let analyzable = |from: usize, shard: usize| {
        (from..corpus.records.len()).find(|&i| i % 8 == shard && !corpus.records[i].abstract_text.is_empty()).unwrap()
    };
    let victim_index = analyzable(150, 150 % 8);
    let victim = corpus.records[victim_index].cord_uid.clone();
    let first = Crashing::new(&mock, Some(&victim));
    assert!(matches!(run_with_backend(&cfg, &first), Err(PipelineError::Fatal { .. })));
    let second = Crashing::new(&mock, None);
    let resumed = run_with_backend(&cfg, &second).unwrap();
    let resumed_after = resumed.shards[0].resumed_after.expect("resumed from a checkpoint");
    assert!(resumed_after < victim_index);
    let before: Vec<&str> = corpus.records[..=resumed_after].iter().map(|r| r.cord_uid.as_str()).collect();
    assert!(second.seen.lock().unwrap().iter().all(|id| !before.contains(&id.as_str())), "resume reprocessed checkpointed rows");
    assert_eq!(contents(&crashed), contents(&clean));
    assert_eq!(compacted_bytes(&crashed), compacted_bytes(&clean));

    // all shards: one shard crashes, the rerun resumes it and merges
    let multi = dir.path().join("multi");
    let cfg = config(&metadata, &multi, 8, NodeSelection::All, 4);
    let victim = corpus.records[analyzable(160, 3)].cord_uid.clone();
    match run_with_backend(&cfg, &Crashing::new(&mock, Some(&victim))) {
        Err(PipelineError::Shards(errors)) => assert_eq!(errors.len(), 1),
        other => panic!("expected one failed shard, got {other:?}"),
    }
    let rerun = run_with_backend(&cfg, &Crashing::new(&mock, None)).unwrap();
    assert!(rerun.shards[3].resumed_after.is_some());
    assert_eq!(contents(&multi), want, "crash-resumed 8-shard run differs from the sequential run");
}
