//! Prompt construction, vision-language backends, and answer parsing.

mod backend;
mod http;
mod parse;
mod prompt;
mod transcript;

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{BackendFailure, BackendReply, OracleMock, ScriptedMock, VlmBackend, VlmRequest};
pub use http::{
    extract_text, request_body, LiveBackend, LiveConfig, API_KEY_ENV, DEFAULT_ENDPOINT, DEFAULT_MODEL, ENDPOINT_ENV,
    MODEL_ENV,
};
pub use parse::{parse_choice, ParsedChoice};
pub use prompt::{build_prompt, display_name, CategorySet, PromptSpec, VisualizationKind, MODELNET10, MODELNET40};
pub use transcript::{image_digest, parse_transcript, read_transcript, TranscriptRecord, TranscriptWriter};

/// Images accepted per request by the service.
pub const MAX_IMAGES: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum GatewayError {
    #[error("{0} images exceed the limit of {MAX_IMAGES} per request; compose a grid first")]
    TooManyImages(usize),
    #[error("a request needs at least one image")]
    NoImages,
    #[error("backend configuration missing: {0}")]
    ConfigMissing(String),
    #[error("invalid category set: {0}")]
    InvalidCategories(String),
    #[error("unknown visualization phrase {0:?}")]
    InvalidPhrase(String),
    #[error("transcript: {0}")]
    Transcript(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Seconds before the first retry.
    pub base_delay: f64,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: 2.0,
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `n` (0-based).
    pub fn delay(&self, n: u32) -> Duration {
        let secs = self.base_delay * self.factor.powi(n as i32);
        Duration::from_secs_f64(secs.clamp(0.0, 3600.0))
    }
}

/// Token bucket shared by all requests of a gateway.
#[derive(Debug)]
pub struct RateLimiter {
    rate: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(requests_per_sec: f64, burst: u32) -> Self {
        let burst = f64::from(burst.max(1));
        Self {
            rate: requests_per_sec.max(1e-9),
            burst,
            state: Mutex::new((burst, Instant::now())),
        }
    }

    /// Blocks until a token is available, then takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.rate;
                st.0 = (st.0 + refill).min(self.burst);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Answered(String),
    ServiceError(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VlmResponse {
    pub outcome: Outcome,
    /// Seconds from the start of the answering request to its completion;
    /// for a service error, the whole time spent.
    pub latency: f64,
    pub retries: u32,
}

/// Per-request metadata that does not go on the wire.
#[derive(Clone, Copy, Debug, Default)]
pub struct RequestMeta<'a> {
    pub sample_id: Option<&'a str>,
    pub label_hint: Option<&'a str>,
}

fn check_images(images: &[Vec<u8>]) -> Result<(), GatewayError> {
    match images.len() {
        0 => Err(GatewayError::NoImages),
        n if n > MAX_IMAGES => Err(GatewayError::TooManyImages(n)),
        _ => Ok(()),
    }
}

type AttemptHook<'a> = &'a dyn Fn(u32, &Result<BackendReply, BackendFailure>, f64);

struct Hooks<'a> {
    before_attempt: &'a dyn Fn(),
    after_attempt: AttemptHook<'a>,
}

fn classify_with(
    images: &[Vec<u8>],
    prompt: &str,
    backend: &dyn VlmBackend,
    policy: &RetryPolicy,
    meta: RequestMeta<'_>,
    hooks: Hooks<'_>,
) -> Result<VlmResponse, GatewayError> {
    check_images(images)?;
    let req = VlmRequest {
        prompt,
        images,
        sample_id: meta.sample_id,
        label_hint: meta.label_hint,
    };
    let started = Instant::now();
    let mut spent_simulated = 0.0;
    let mut attempt = 0u32;
    loop {
        (hooks.before_attempt)();
        let t0 = Instant::now();
        let result = backend.send(&req);
        let measured = t0.elapsed().as_secs_f64();
        let latency = match &result {
            Ok(r) => r.latency.unwrap_or(measured),
            Err(_) if backend.is_simulated() => 0.0,
            Err(_) => measured,
        };
        (hooks.after_attempt)(attempt, &result, latency);
        spent_simulated += latency;
        match result {
            Ok(reply) => {
                return Ok(VlmResponse {
                    outcome: Outcome::Answered(reply.text),
                    latency,
                    retries: attempt,
                })
            }
            Err(BackendFailure::Transient(detail)) if attempt < policy.max_retries => {
                log::warn!("attempt {} failed ({detail}); retrying", attempt + 1);
                if !backend.is_simulated() {
                    std::thread::sleep(policy.delay(attempt));
                }
                attempt += 1;
            }
            Err(fail) => {
                let total = if backend.is_simulated() {
                    spent_simulated
                } else {
                    started.elapsed().as_secs_f64()
                };
                return Ok(VlmResponse {
                    outcome: Outcome::ServiceError(fail.detail().to_owned()),
                    latency: total,
                    retries: attempt,
                });
            }
        }
    }
}

/// Sends one request with all images attached, retrying transient failures.
/// A failure that survives the retries comes back as [`Outcome::ServiceError`].
pub fn classify(
    images: &[Vec<u8>],
    prompt: &str,
    backend: &dyn VlmBackend,
    policy: &RetryPolicy,
    meta: RequestMeta<'_>,
) -> Result<VlmResponse, GatewayError> {
    classify_with(
        images,
        prompt,
        backend,
        policy,
        meta,
        Hooks {
            before_attempt: &|| {},
            after_attempt: &|_, _, _| {},
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub retry: RetryPolicy,
    pub requests_per_sec: f64,
    pub max_inflight: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            retry: RetryPolicy::default(),
            requests_per_sec: 0.5,
            max_inflight: 2,
        }
    }
}

/// A backend plus the shared request discipline: rate limit, bounded
/// concurrency, retries, and an optional transcript sink.
pub struct Gateway {
    config: GatewayConfig,
    limiter: RateLimiter,
    inflight: (Mutex<usize>, Condvar),
    transcript: Option<Mutex<TranscriptWriter>>,
    backend: Arc<dyn VlmBackend>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn VlmBackend>, config: GatewayConfig) -> Self {
        Self {
            limiter: RateLimiter::new(config.requests_per_sec, 1),
            inflight: (Mutex::new(0), Condvar::new()),
            transcript: None,
            config,
            backend,
        }
    }

    pub fn with_transcript(mut self, writer: TranscriptWriter) -> Self {
        self.transcript = Some(Mutex::new(writer));
        self
    }

    pub fn backend(&self) -> &dyn VlmBackend {
        &*self.backend
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn classify(
        &self,
        images: &[Vec<u8>],
        prompt: &str,
        meta: RequestMeta<'_>,
    ) -> Result<VlmResponse, GatewayError> {
        check_images(images)?;
        let max = self.config.max_inflight.max(1);
        {
            let (lock, cv) = &self.inflight;
            let mut n = cv.wait_while(lock.lock().unwrap(), |n| *n >= max).unwrap();
            *n += 1;
        }
        let digests: Vec<String> = if self.transcript.is_some() {
            images.iter().map(|i| image_digest(i)).collect()
        } else {
            Vec::new()
        };
        let simulated = self.backend.is_simulated();
        let before = || {
            if !simulated {
                self.limiter.acquire();
            }
        };
        let after = |attempt: u32, result: &Result<BackendReply, BackendFailure>, latency: f64| {
            if let Some(t) = &self.transcript {
                let (response, error) = match result {
                    Ok(r) => (Some(r.text.clone()), None),
                    Err(e) => (None, Some(e.detail().to_owned())),
                };
                let rec = TranscriptRecord {
                    sample_id: meta.sample_id.map(str::to_owned),
                    attempt: Some(attempt),
                    prompt: prompt.to_owned(),
                    image_digests: digests.clone(),
                    response,
                    error,
                    latency,
                };
                if let Err(e) = t.lock().unwrap().write(&rec) {
                    log::error!("{e}");
                }
            }
        };
        let result = classify_with(
            images,
            prompt,
            &*self.backend,
            &self.config.retry,
            meta,
            Hooks {
                before_attempt: &before,
                after_attempt: &after,
            },
        );
        let (lock, cv) = &self.inflight;
        *lock.lock().unwrap() -= 1;
        cv.notify_one();
        result
    }
}
