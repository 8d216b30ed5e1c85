//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod cooccur;
mod e2e;
mod pipeline;
mod query;
mod wire;

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn(),
}

const fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

const CRITERIA: &[Criterion] = &[
    Criterion { name: "wire schema fidelity", limit: secs(1), run: wire::schema_fidelity },
    Criterion { name: "annotated abstract", limit: secs(1), run: wire::annotated_abstract },
    Criterion { name: "negativity formula", limit: secs(5), run: cooccur::negativity },
    Criterion { name: "query dialect", limit: secs(60), run: query::dialect },
    Criterion { name: "shard laws", limit: secs(60), run: pipeline::shard_laws },
    Criterion { name: "co-occurrence properties", limit: None, run: cooccur::properties },
    Criterion { name: "retry/poll protocol", limit: None, run: wire::retry_poll_protocol },
    Criterion { name: "end to end", limit: secs(30), run: e2e::end_to_end },
];

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, c) in CRITERIA.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || *f == n.to_string()) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = start.elapsed();
        let verdict = match (outcome, c.limit) {
            (Err(p), _) => Err(panic_message(&*p)),
            (Ok(()), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (Ok(()), _) => Ok(()),
        };
        let limit = c.limit.map(|l| format!(" < {}s", l.as_secs())).unwrap_or_default();
        match verdict {
            Ok(()) => println!("PASS [{n}] {} ({:.3}s{limit})", c.name, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL [{n}] {} ({:.3}s{limit}): {}", c.name, elapsed.as_secs_f64(), why.lines().next().unwrap_or(""));
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
