use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};

use serde_json::Value;

use crate::fixture;

const BIN: &str = env!("CARGO_BIN_EXE_cordscope");
const NODES: usize = 8;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = Command::new(BIN).args(args).output().unwrap();
    assert!(out.status.success(), "cordscope {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn ok_json(args: &[&str]) -> Value {
    serde_json::from_slice(&ok(args)).unwrap()
}

struct Server(Child, String);

impl Server {
    fn start(store: &Path) -> Self {
        let mut child = Command::new(BIN)
            .args(["serve", "--store", s(store), "--port", "0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
        let url = line.split_whitespace().find(|w| w.starts_with("http://")).expect("serve prints its URL").to_string();
        Server(child, url)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

/// (export arguments, equivalent API path)
const EXPORTS: &[(&[&str], &str)] = &[
    (&["timeseries", "--term", "C0020336"], "/terms/C0020336/timeseries"),
    (&["timeseries", "--category", "MedicationName", "--top", "3"], ""),
    (&["shares"], "/analytics/shares"),
    (&["cooccur", "--rows", "MedicationName", "--cols", "SymptomOrSign"], "/analytics/cooccur?rows=MedicationName&cols=SymptomOrSign"),
    (&["cooccur", "--rows", "MedicationName", "--cols", "Diagnosis", "--csv"], ""),
    (
        &["sankey", "--rows", "MedicationName", "--cols", "Diagnosis", "--mode", "multiplicity"],
        "/analytics/sankey?rows=MedicationName&cols=Diagnosis&mode=multiplicity",
    ),
    (&["chord", "--category", "MedicationName"], "/analytics/chord?category=MedicationName"),
];

const QUERIES: &[&str] = &[
    "SELECT DISTINCT e.text FROM papers p JOIN e IN p.entities WHERE e.category='MedicationName'",
    "SELECT p.title, r.source.text FROM papers p JOIN r IN p.relations WHERE r.relationType='DosageOfMedication' AND r.target.text LIKE 'hydro%'",
    "SELECT e.category, e.text, ARRAY (SELECT VALUE l.id FROM l IN e.links WHERE l.dataSource='UMLS')[0] AS umls_id FROM papers p JOIN e IN p.entities",
];

/// Runs the whole flow in `dir` and returns every artifact by name.
fn pipeline(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let data = fixture("synthetic_50.csv");
    let mut artifacts = BTreeMap::new();

    let ingested = ok_json(&["ingest", "--data", s(&data), "--store", s(&dir.join("ingest"))]);
    assert_eq!((ingested["rows"].as_u64(), ingested["documents"].as_u64()), (Some(50), Some(48)));

    let mut shards = Vec::new();
    let mut processed = 0;
    for n in 0..NODES {
        let root = dir.join(format!("shard-{n}"));
        let report = ok_json(&[
            "process",
            "--data",
            s(&data),
            "--backend",
            "local",
            "--nodes",
            &NODES.to_string(),
            "--number",
            &n.to_string(),
            "--store",
            s(&root),
        ]);
        let shard = &report["shards"][0];
        assert_eq!(shard["failed"].as_array().map(Vec::len), Some(0));
        processed += shard["processed"].as_u64().unwrap() + shard["skipped_empty_abstract"].as_u64().unwrap();
        shards.push(root);
    }
    assert_eq!(processed, 48);

    let merged = dir.join("merged");
    let mut args = vec!["store", "merge", "--into", s(&merged)];
    args.extend(shards.iter().map(|p| s(p)));
    assert_eq!(ok_json(&args)["documents"].as_u64(), Some(48));
    let compacted = ok_json(&["store", "compact", "--store", s(&merged)]);
    assert_eq!(compacted["documents"].as_u64(), Some(48));
    let stats = ok_json(&["store", "stats", "--store", s(&merged)]);
    assert_eq!(stats["segments"].as_u64(), Some(1));

    for (i, q) in QUERIES.iter().enumerate() {
        let rows = ok(&["query", "--store", s(&merged), "--format", "jsonl", q]);
        // the local backend emits no dosage relations, so query 1 may be empty
        assert!(i == 1 || !rows.is_empty(), "query {i} returned nothing");
        artifacts.insert(format!("query-{i}"), rows);
    }

    let server = Server::start(&merged);
    let http = reqwest::blocking::Client::new();
    for (i, (export, path)) in EXPORTS.iter().enumerate() {
        let mut args = vec!["export", "--store", s(&merged)];
        args.extend(export.iter());
        let bytes = ok(&args);
        assert!(!bytes.is_empty());
        if !path.is_empty() {
            let resp = http.get(format!("{}{path}", server.1)).send().unwrap();
            assert_eq!(resp.status().as_u16(), 200, "{path}");
            assert_eq!(resp.bytes().unwrap().to_vec(), bytes, "API and CLI differ for {path}");
        }
        artifacts.insert(format!("export-{i}"), bytes);
    }
    let health = http.get(format!("{}/health", server.1)).send().unwrap();
    assert_eq!(health.status().as_u16(), 200);
    let page: Value = http.get(format!("{}/entities?category=MedicationName&limit=5", server.1)).send().unwrap().json().unwrap();
    assert!(page.to_string().contains("C0020336"), "{page}");
    artifacts
}

pub fn end_to_end() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline(a.path());
    let second = pipeline(b.path());
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        assert!(bytes == &second[name], "{name} differs between runs");
    }
}
