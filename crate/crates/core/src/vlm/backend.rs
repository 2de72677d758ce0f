use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use super::prompt::display_name;
use super::transcript::TranscriptRecord;

/// What a backend sees for one request.
#[derive(Clone, Copy, Debug)]
pub struct VlmRequest<'a> {
    pub prompt: &'a str,
    pub images: &'a [Vec<u8>],
    pub sample_id: Option<&'a str>,
    /// Ground truth, consulted only by the oracle mock.
    pub label_hint: Option<&'a str>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackendReply {
    pub text: String,
    /// Simulated backends report their own latency so runs are reproducible.
    pub latency: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BackendFailure {
    /// Worth retrying: timeouts, connection resets, 429, 5xx.
    Transient(String),
    /// Retrying cannot help: bad request, auth failure, exhausted script.
    Fatal(String),
}

impl BackendFailure {
    pub fn detail(&self) -> &str {
        match self {
            BackendFailure::Transient(d) | BackendFailure::Fatal(d) => d,
        }
    }
}

pub trait VlmBackend: Send + Sync {
    /// Stable description recorded in run metadata.
    fn identity(&self) -> String;

    fn send(&self, req: &VlmRequest<'_>) -> Result<BackendReply, BackendFailure>;

    /// Simulated backends skip rate limiting and backoff sleeps.
    fn is_simulated(&self) -> bool {
        false
    }
}

/// Answers every request with the true label.
#[derive(Debug, Default)]
pub struct OracleMock {
    fixed_label: Option<String>,
    latency: f64,
    wire: Mutex<Vec<usize>>,
}

impl OracleMock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Always answers `label`, ignoring request hints.
    pub fn with_label(label: &str) -> Self {
        Self {
            fixed_label: Some(label.to_owned()),
            ..Self::default()
        }
    }

    pub fn with_latency(mut self, seconds: f64) -> Self {
        self.latency = seconds;
        self
    }

    /// Image counts of every request received, in order.
    pub fn wire_log(&self) -> Vec<usize> {
        self.wire.lock().unwrap().clone()
    }
}

impl VlmBackend for OracleMock {
    fn identity(&self) -> String {
        match &self.fixed_label {
            Some(l) => format!("oracle:{l}"),
            None => "oracle".into(),
        }
    }

    fn send(&self, req: &VlmRequest<'_>) -> Result<BackendReply, BackendFailure> {
        self.wire.lock().unwrap().push(req.images.len());
        let label = self
            .fixed_label
            .as_deref()
            .or(req.label_hint)
            .ok_or_else(|| BackendFailure::Fatal("oracle mock has no label for this request".into()))?;
        Ok(BackendReply {
            text: format!(
                "Considering the overall silhouette and distinctive parts across the views, the category is {}.",
                display_name(label)
            ),
            latency: Some(self.latency),
        })
    }

    fn is_simulated(&self) -> bool {
        true
    }
}

/// Replays a transcript. Records carrying a `sample_id` answer requests for
/// that sample in order, the last one repeating once the rest are used; other
/// records form a shared queue consumed in order.
#[derive(Debug)]
pub struct ScriptedMock {
    name: String,
    by_sample: HashMap<String, Mutex<VecDeque<TranscriptRecord>>>,
    shared: Mutex<VecDeque<TranscriptRecord>>,
    wire: Mutex<Vec<usize>>,
}

impl ScriptedMock {
    pub fn new(name: &str, records: Vec<TranscriptRecord>) -> Self {
        let mut by_sample: HashMap<String, VecDeque<TranscriptRecord>> = HashMap::new();
        let mut shared = VecDeque::new();
        for r in records {
            match &r.sample_id {
                Some(id) => by_sample.entry(id.clone()).or_default().push_back(r),
                None => shared.push_back(r),
            }
        }
        Self {
            name: name.to_owned(),
            by_sample: by_sample.into_iter().map(|(k, v)| (k, Mutex::new(v))).collect(),
            shared: Mutex::new(shared),
            wire: Mutex::new(Vec::new()),
        }
    }

    pub fn wire_log(&self) -> Vec<usize> {
        self.wire.lock().unwrap().clone()
    }

    fn next_record(&self, sample_id: Option<&str>) -> Option<TranscriptRecord> {
        if let Some(queue) = sample_id.and_then(|id| self.by_sample.get(id)) {
            let mut q = queue.lock().unwrap();
            return if q.len() > 1 { q.pop_front() } else { q.front().cloned() };
        }
        self.shared.lock().unwrap().pop_front()
    }
}

impl VlmBackend for ScriptedMock {
    fn identity(&self) -> String {
        format!("scripted:{}", self.name)
    }

    fn send(&self, req: &VlmRequest<'_>) -> Result<BackendReply, BackendFailure> {
        self.wire.lock().unwrap().push(req.images.len());
        let rec = self
            .next_record(req.sample_id)
            .ok_or_else(|| BackendFailure::Fatal("transcript exhausted".into()))?;
        match (rec.response, rec.error) {
            (_, Some(err)) => Err(BackendFailure::Transient(err)),
            (Some(text), None) => Ok(BackendReply {
                text,
                latency: Some(rec.latency),
            }),
            (None, None) => Err(BackendFailure::Fatal(
                "transcript record has neither response nor error".into(),
            )),
        }
    }

    fn is_simulated(&self) -> bool {
        true
    }
}
