use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use forage_core::policy::{CallOutcome, EventType};

use crate::client::QueryOutcome;
use crate::GatewayError;

/// How the transport ended, before any parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Ok,
    Timeout,
    /// Connection refused, HTTP status >= 400 and similar.
    Failed,
}

/// One gateway call, as stored in a cassette.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub robot_id: String,
    pub event_type: EventType,
    pub request: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub transport: Transport,
    pub latency_secs: f64,
    pub outcome: CallOutcome,
}

impl CallRecord {
    pub fn query_outcome(&self) -> QueryOutcome {
        match (self.transport, &self.response) {
            (Transport::Ok, Some(body)) => QueryOutcome::Body(body.clone()),
            (Transport::Ok, None) => QueryOutcome::Body(String::new()),
            (Transport::Timeout, _) => QueryOutcome::Timeout,
            (Transport::Failed, _) => QueryOutcome::Failed(self.error.clone().unwrap_or_default()),
        }
    }
}

pub fn load_cassette(path: &Path) -> Result<Vec<CallRecord>, GatewayError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Recorded calls keyed by exact request body; repeats are served in order.
#[derive(Debug, Default)]
pub struct Cassette {
    entries: Mutex<HashMap<String, VecDeque<CallRecord>>>,
}

impl Cassette {
    pub fn new(records: Vec<CallRecord>) -> Self {
        let mut entries: HashMap<String, VecDeque<CallRecord>> = HashMap::new();
        for r in records {
            entries.entry(r.request.clone()).or_default().push_back(r);
        }
        Self {
            entries: Mutex::new(entries),
        }
    }

    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        Ok(Self::new(load_cassette(path)?))
    }

    pub fn take(&self, request: &str) -> Option<CallRecord> {
        self.entries
            .lock()
            .expect("cassette lock")
            .get_mut(request)
            .and_then(VecDeque::pop_front)
    }

    /// Like `take`, but the last entry for a request is served forever.
    pub fn peek_or_take(&self, request: &str) -> Option<CallRecord> {
        let mut entries = self.entries.lock().expect("cassette lock");
        let queue = entries.get_mut(request)?;
        if queue.len() > 1 {
            queue.pop_front()
        } else {
            queue.front().cloned()
        }
    }
}

/// Append-only cassette writer.
#[derive(Debug)]
pub(crate) struct Recorder {
    file: Mutex<File>,
}

impl Recorder {
    pub fn create(path: &Path) -> Result<Self, GatewayError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn append(&self, record: &CallRecord) -> Result<(), GatewayError> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut f = self.file.lock().expect("recorder lock");
        f.write_all(line.as_bytes())?;
        Ok(())
    }
}
