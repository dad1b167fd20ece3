use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::cassette::{CallRecord, Cassette, Recorder};
use crate::config::{ApiStyle, GatewayConfig, Mode};
use crate::mock::{MockReply, MockResponder};
use crate::GatewayError;

static NETWORK_OPS: AtomicU64 = AtomicU64::new(0);

/// Outbound HTTP requests attempted by any gateway in this process.
pub fn global_network_ops() -> u64 {
    NETWORK_OPS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryOutcome {
    Body(String),
    Timeout,
    /// Connection refused, HTTP status >= 400 and the like.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub outcome: QueryOutcome,
    pub latency_secs: f64,
}

enum Backend {
    Http {
        agent: ureq::Agent,
        url: String,
        api_key: Option<String>,
    },
    Mock(MockResponder),
    Replay(Cassette),
}

/// Shared by every robot of every trial that uses it.
pub struct Gateway {
    config: GatewayConfig,
    backend: Backend,
    recorder: Option<Recorder>,
    network_ops: AtomicU64,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.config.mode)
            .field("network_ops", &self.network_ops())
            .finish()
    }
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let backend = match config.mode {
            Mode::Mock => Backend::Mock(MockResponder::new(config.mock_behavior.clone())?),
            Mode::Replay => Backend::Replay(Cassette::open(
                config.cassette.as_deref().expect("validated"),
            )?),
            Mode::Live | Mode::Record => {
                let agent: ureq::Agent = ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
                    .http_status_as_error(false)
                    .build()
                    .into();
                let endpoint = match config.api_style {
                    ApiStyle::Chat => "chat/completions",
                    ApiStyle::Responses => "responses",
                };
                Backend::Http {
                    agent,
                    url: format!("{}/{endpoint}", config.base_url.trim_end_matches('/')),
                    api_key: config.api_key()?,
                }
            }
        };
        let recorder = match config.mode {
            Mode::Record => Some(Recorder::create(config.cassette.as_deref().expect("validated"))?),
            _ => None,
        };
        Ok(Self {
            config,
            backend,
            recorder,
            network_ops: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Outbound HTTP requests attempted by this gateway.
    pub fn network_ops(&self) -> u64 {
        self.network_ops.load(Ordering::SeqCst)
    }

    /// Sends one request body. `Err` only for misconfiguration, such as a
    /// replay miss; transport failures are reported in the outcome.
    pub fn query(&self, request: &str) -> Result<QueryResult, GatewayError> {
        let simulated = self.config.injected_latency_secs.unwrap_or(0.0);
        match &self.backend {
            Backend::Mock(responder) => {
                let outcome = match responder.respond(request) {
                    MockReply::Body(b) => QueryOutcome::Body(b),
                    MockReply::Error(code, msg) => QueryOutcome::Failed(format!("http status {code}: {msg}")),
                    MockReply::Hang => QueryOutcome::Timeout,
                };
                Ok(QueryResult {
                    outcome,
                    latency_secs: simulated,
                })
            }
            Backend::Replay(cassette) => {
                let record = cassette
                    .take(request)
                    .ok_or_else(|| GatewayError::ReplayMiss(truncate(request, 200)))?;
                Ok(QueryResult {
                    outcome: record.query_outcome(),
                    latency_secs: record.latency_secs,
                })
            }
            Backend::Http { agent, url, api_key } => {
                self.network_ops.fetch_add(1, Ordering::SeqCst);
                NETWORK_OPS.fetch_add(1, Ordering::SeqCst);
                let start = Instant::now();
                let mut req = agent.post(url).header("Content-Type", "application/json");
                if let Some(key) = api_key {
                    req = req.header("Authorization", format!("Bearer {key}"));
                }
                let outcome = match req.send(request) {
                    Ok(mut resp) => {
                        let status = resp.status().as_u16();
                        match resp.body_mut().read_to_string() {
                            Ok(body) if status < 400 => QueryOutcome::Body(body),
                            Ok(body) => QueryOutcome::Failed(format!("http status {status}: {}", truncate(&body, 200))),
                            Err(e) => classify(e),
                        }
                    }
                    Err(e) => classify(e),
                };
                Ok(QueryResult {
                    outcome,
                    latency_secs: start.elapsed().as_secs_f64(),
                })
            }
        }
    }

    /// Appends to the cassette in record mode; a no-op otherwise.
    pub fn record(&self, record: &CallRecord) -> Result<(), GatewayError> {
        match &self.recorder {
            Some(r) => r.append(record),
            None => Ok(()),
        }
    }
}

fn classify(e: ureq::Error) -> QueryOutcome {
    match e {
        ureq::Error::Timeout(_) => QueryOutcome::Timeout,
        ureq::Error::Io(io) if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
            QueryOutcome::Timeout
        }
        other => QueryOutcome::Failed(other.to_string()),
    }
}

fn truncate(s: &str, n: usize) -> String {
    match s.char_indices().nth(n) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}
