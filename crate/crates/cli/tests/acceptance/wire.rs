use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use cordscope::ner::{
    parse_result_json, serialize_result_json, EntityLink, LocalExtractor, RemoteDocument, RemoteError, RetryPolicy, TextAnalyticsClient,
    VirtualClock, ABBREVIATION,
};
use cordscope::{EntityCategory, PaperRecord};
use cordscope_server::mock_ta::{MockConfig, MockServer, PollReply};
use serde_json::Value;

use crate::fixture;

/// A result document for the example abstract, positioned third in its
/// batch. Entities past the first two are filled in from the abstract in
/// order of appearance.
const RESULT_DOC: &str = r##"{ "id": "jkk62qn0z",
  "entities": [
    { "offset": 24, "length": 28, "text": "coronavirus disease pandemic",
      "category": "Diagnosis", "confidenceScore": 0.98,
      "isNegated": false },
    { "offset": 54, "length": 8, "text": "COVID-19",
      "category": "Diagnosis", "confidenceScore": 1.0, "isNegated": false,
      "links": [
        { "dataSource": "UMLS", "id": "C5203670" },
        { "dataSource": "ICD10CM", "id": "U07.1"} ] },
    { "offset": 111, "length": 10, "text": "treatments",
      "category": "TreatmentName", "confidenceScore": 0.91, "isNegated": false },
    { "offset": 180, "length": 19, "text": "infectious diseases",
      "category": "Diagnosis", "confidenceScore": 0.87, "isNegated": false },
    { "offset": 251, "length": 11, "text": "chloroquine",
      "category": "MedicationName", "confidenceScore": 1.0, "isNegated": false,
      "links": [ { "dataSource": "UMLS", "id": "C0008269" } ] },
    { "offset": 264, "length": 2, "text": "CQ",
      "category": "MedicationName", "confidenceScore": 1.0, "isNegated": false,
      "links": [ { "dataSource": "UMLS", "id": "C0008269" } ] },
    { "offset": 272, "length": 18, "text": "hydroxychloroquine",
      "category": "MedicationName", "confidenceScore": 1.0, "isNegated": false,
      "links": [ { "dataSource": "UMLS", "id": "C0020336" } ] },
    { "offset": 292, "length": 3, "text": "HCQ",
      "category": "MedicationName", "confidenceScore": 1.0, "isNegated": false,
      "links": [ { "dataSource": "UMLS", "id": "C0020336" } ] } ],
  "relations": [
    { "relationType": "Abbreviation", "bidirectional": true,
      "source": "#/results/documents/2/entities/6",
      "target": "#/results/documents/2/entities/7"} ]
}"##;

fn example_abstract() -> String {
    std::fs::read_to_string(fixture("example_abstract.txt")).unwrap().trim_end().to_string()
}

fn char_slice(text: &str, offset: usize, length: usize) -> String {
    text.chars().skip(offset).take(length).collect()
}

/// Re-emits a value with object keys sorted at every level.
fn canonical(v: &Value) -> String {
    fn sort(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let sorted: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, sort(v))).collect();
                Value::Object(sorted.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sort(v)).unwrap()
}

pub fn schema_fidelity() {
    let text = example_abstract();
    let meta = PaperRecord::new("jkk62qn0z", "", text.as_str());
    let paper = parse_result_json(RESULT_DOC.as_bytes(), &meta).unwrap();
    assert_eq!(paper.id, "jkk62qn0z");
    assert_eq!(paper.entities.len(), 8);

    let e = &paper.entities[0];
    assert_eq!((e.offset, e.length, e.text.as_str()), (24, 28, "coronavirus disease pandemic"));
    assert_eq!(e.category, EntityCategory::Diagnosis);
    assert_eq!(e.confidence, 0.98);
    assert!(!e.is_negated);
    assert!(e.links.is_empty());

    let covid = &paper.entities[1];
    assert_eq!((covid.offset, covid.length, covid.text.as_str()), (54, 8, "COVID-19"));
    assert_eq!(covid.confidence, 1.0);
    assert_eq!(covid.links, vec![EntityLink::new("UMLS", "C5203670"), EntityLink::new("ICD10CM", "U07.1")]);
    assert_eq!(covid.umls_id(), Some("C5203670"));

    // offsets address the abstract, and reconciliation left them alone
    for e in &paper.entities {
        assert_eq!(char_slice(&text, e.offset, e.length), e.text, "entity at {}", e.offset);
    }

    assert_eq!(paper.relations.len(), 1);
    let r = &paper.relations[0];
    assert_eq!(r.relation_type, ABBREVIATION);
    assert!(r.bidirectional);
    assert_eq!((r.source, r.target), (6, 7));
    assert_eq!(paper.entities[r.source].text, "hydroxychloroquine");
    assert_eq!(paper.entities[r.target].text, "HCQ");

    let original: Value = serde_json::from_str(RESULT_DOC).unwrap();
    let emitted = serialize_result_json(&paper, 2);
    assert_eq!(canonical(&emitted), canonical(&original));
    let bytes = serde_json::to_vec(&emitted).unwrap();
    assert_eq!(parse_result_json(&bytes, &meta).unwrap(), paper);
}

pub fn annotated_abstract() {
    let text = example_abstract();
    let (entities, relations) = LocalExtractor::bundled().analyze(&text);
    let meds: Vec<&str> = entities.iter().filter(|e| e.category == EntityCategory::MedicationName).map(|e| e.text.as_str()).collect();
    for name in ["chloroquine", "CQ", "hydroxychloroquine", "HCQ"] {
        assert!(meds.contains(&name), "no MedicationName `{name}` in {meds:?}");
    }
    let first = &entities[0];
    assert_eq!((first.offset, first.text.as_str()), (24, "coronavirus disease pandemic"));

    let abbreviations: Vec<(&str, &str)> = relations
        .iter()
        .filter(|r| r.relation_type == ABBREVIATION)
        .inspect(|r| assert!(r.bidirectional))
        .map(|r| (entities[r.source].text.as_str(), entities[r.target].text.as_str()))
        .collect();
    let linked = |a: &str, b: &str| abbreviations.iter().any(|&(s, t)| (s, t) == (a, b) || (s, t) == (b, a));
    assert!(linked("chloroquine", "CQ"), "{abbreviations:?}");
    assert!(linked("hydroxychloroquine", "HCQ"), "{abbreviations:?}");
    for e in &entities {
        assert_eq!(char_slice(&text, e.offset, e.length), e.text);
    }
}

const KEY: &str = "acceptance-key";

fn mock(script: Vec<PollReply>) -> (MockServer, TextAnalyticsClient, Arc<VirtualClock>) {
    let mut config = MockConfig::new(KEY);
    config.poll_script = script;
    let server = MockServer::spawn(config, "127.0.0.1:0".parse().unwrap()).unwrap();
    let clock = Arc::new(VirtualClock::new());
    let client = TextAnalyticsClient::with_clock(server.url(), KEY, clock.clone()).unwrap();
    (server, client, clock)
}

pub fn retry_poll_protocol() {
    let policy = RetryPolicy { max_attempts: 5, ..RetryPolicy::default() }.no_jitter();
    let docs = vec![RemoteDocument::new("d1", "Chloroquine (CQ) was given.")];

    let (server, client, clock) = mock(vec![PollReply::Running, PollReply::Running]);
    let handle = client.submit(&docs).unwrap();
    let job = client.poll_job(&handle, &policy).unwrap();
    assert_eq!(job["status"], "succeeded");
    let job_id = handle.operation_location().rsplit('/').next().unwrap().to_string();
    assert_eq!(server.mock.job_polls(&job_id), Some(3));
    assert_eq!(server.counters().polls, 3);
    assert_eq!(clock.sleeps(), vec![Duration::from_secs(1), Duration::from_secs(2)]);
    server.stop().unwrap();

    let (server, client, clock) = mock(vec![PollReply::Http(500); 5]);
    let handle = client.submit(&docs).unwrap();
    match client.poll_job(&handle, &policy) {
        Err(RemoteError::Timeout { attempts, last }) => {
            assert_eq!(attempts, 5);
            assert!(matches!(*last, RemoteError::Unavailable { status: 500, .. }), "{last}");
        }
        other => panic!("expected exhaustion, got {other:?}"),
    }
    assert_eq!(server.counters().polls, 5);
    let expected: Vec<Duration> = (0..4).map(|i| Duration::from_secs(1 << i)).collect();
    assert_eq!(clock.sleeps(), expected);
    server.stop().unwrap();
}
