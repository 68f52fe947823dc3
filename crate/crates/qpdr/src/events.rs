//! Structured JSON-lines event log and run statistics.
//!
//! In sequential mode the timestamp is the event sequence number, so two
//! runs with the same seed produce byte-identical logs.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde_json::{json, Value};

pub struct EventLog {
    sink: Option<Mutex<Box<dyn Write + Send>>>,
    seq: AtomicU64,
    logical_time: bool,
    start: Instant,
}

impl EventLog {
    pub fn disabled() -> EventLog {
        EventLog {
            sink: None,
            seq: AtomicU64::new(0),
            logical_time: false,
            start: Instant::now(),
        }
    }

    pub fn to_writer(w: Box<dyn Write + Send>, logical_time: bool) -> EventLog {
        EventLog {
            sink: Some(Mutex::new(w)),
            seq: AtomicU64::new(0),
            logical_time,
            start: Instant::now(),
        }
    }

    pub fn emit(&self, event: &str, fields: Value) {
        let Some(sink) = &self.sink else { return };
        let mut guard = sink.lock().unwrap();
        // sequence under the lock so ordering and numbering agree
        let seq = self.seq.fetch_add(1, Ordering::Relaxed);
        let ts = if self.logical_time {
            seq
        } else {
            self.start.elapsed().as_micros() as u64
        };
        let mut record = json!({
            "seq": seq,
            "ts": ts,
            "event": event,
        });
        if let (Some(obj), Some(extra)) = (record.as_object_mut(), fields.as_object()) {
            for (k, v) in extra {
                obj.insert(k.clone(), v.clone());
            }
        }
        let _ = writeln!(guard, "{record}");
        let _ = guard.flush();
    }
}

/// Counters reported in the final stats summary.
#[derive(Debug, Default)]
pub struct EngineStats {
    pub ig_queries: AtomicU64,
    pub sep_queries: AtomicU64,
    pub oracle_queries: AtomicU64,
    pub lemmas_learned: AtomicU64,
    pub pushes: AtomicU64,
}

impl EngineStats {
    pub fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(counter: &AtomicU64) -> u64 {
        counter.load(Ordering::Relaxed)
    }
}
