use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use forage_core::policy::{scripted_decide, DecisionResponse, TacticalAction};

use crate::cassette::Cassette;
use crate::config::ApiStyle;
use crate::prompt::{event_from_request, style_of_request};
use crate::GatewayError;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockBehavior {
    /// Answers with the scripted heuristic applied to the embedded event.
    #[default]
    Scripted,
    /// Answers with an action that is on no whitelist.
    AlwaysInvalid,
    /// Never answers.
    AlwaysTimeout,
    FixedAction { action: TacticalAction },
    /// Serves recorded responses, keyed by request body.
    EchoCassette { path: PathBuf },
}

impl FromStr for MockBehavior {
    type Err = GatewayError;

    /// `scripted`, `always_invalid`, `always_timeout`, `fixed_action:ACTION`
    /// or `echo_cassette:PATH`.
    fn from_str(s: &str) -> Result<Self, GatewayError> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("scripted", None) => Ok(MockBehavior::Scripted),
            ("always_invalid", None) => Ok(MockBehavior::AlwaysInvalid),
            ("always_timeout", None) => Ok(MockBehavior::AlwaysTimeout),
            ("fixed_action", Some(a)) => TacticalAction::from_name(a)
                .map(|action| MockBehavior::FixedAction { action })
                .ok_or_else(|| GatewayError::Config(format!("unknown action `{a}`"))),
            ("echo_cassette", Some(p)) => Ok(MockBehavior::EchoCassette { path: p.into() }),
            _ => Err(GatewayError::Config(format!("unknown mock behavior `{s}`"))),
        }
    }
}

impl fmt::Display for MockBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockBehavior::Scripted => f.write_str("scripted"),
            MockBehavior::AlwaysInvalid => f.write_str("always_invalid"),
            MockBehavior::AlwaysTimeout => f.write_str("always_timeout"),
            MockBehavior::FixedAction { action } => write!(f, "fixed_action:{action}"),
            MockBehavior::EchoCassette { path } => write!(f, "echo_cassette:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockReply {
    Body(String),
    /// HTTP status and body.
    Error(u16, String),
    Hang,
}

pub const INVALID_ACTION: &str = "EXPLORE_NEARBY";

/// Computes mock answers; shared by in-process mock mode and the server.
#[derive(Debug)]
pub struct MockResponder {
    behavior: MockBehavior,
    cassette: Option<Cassette>,
}

impl MockResponder {
    pub fn new(behavior: MockBehavior) -> Result<Self, GatewayError> {
        let cassette = match &behavior {
            MockBehavior::EchoCassette { path } => Some(Cassette::open(path)?),
            _ => None,
        };
        Ok(Self { behavior, cassette })
    }

    pub fn behavior(&self) -> &MockBehavior {
        &self.behavior
    }

    /// Deterministic in the request body.
    pub fn respond(&self, request: &str) -> MockReply {
        let decision = match &self.behavior {
            MockBehavior::AlwaysTimeout => return MockReply::Hang,
            MockBehavior::EchoCassette { .. } => {
                let cassette = self.cassette.as_ref().expect("loaded with the behavior");
                return match cassette.peek_or_take(request) {
                    Some(r) => match r.response {
                        Some(body) => MockReply::Body(body),
                        None => MockReply::Hang,
                    },
                    None => MockReply::Error(404, "no cassette entry for request".into()),
                };
            }
            MockBehavior::Scripted => match event_from_request(request) {
                Some(event) => scripted_decide(&event),
                None => return MockReply::Error(400, "request carries no decision event".into()),
            },
            MockBehavior::AlwaysInvalid => DecisionResponse {
                action: INVALID_ACTION.into(),
                rationale: "This action is not on the whitelist.".into(),
            },
            MockBehavior::FixedAction { action } => DecisionResponse {
                action: action.to_string(),
                rationale: format!("Fixed mock answer {action}."),
            },
        };
        MockReply::Body(envelope(&decision, style_of_request(request)))
    }
}

fn envelope(decision: &DecisionResponse, style: ApiStyle) -> String {
    let content = serde_json::to_string(decision).expect("decision serializes");
    let v = match style {
        ApiStyle::Chat => json!({
            "id": "mock-completion",
            "object": "chat.completion",
            "model": "mock",
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop"
            }]
        }),
        ApiStyle::Responses => json!({
            "id": "mock-response",
            "object": "response",
            "model": "mock",
            "output": [{
                "type": "message",
                "role": "assistant",
                "content": [{"type": "output_text", "text": content}]
            }]
        }),
    };
    v.to_string()
}

/// A running local OpenAI-compatible endpoint. Stops when dropped.
pub struct MockServer {
    port: u16,
    stop: Arc<AtomicBool>,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn port(&self) -> u16 {
        self.port
    }

    /// Base URL to put in a gateway config.
    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}/v1", self.port)
    }

    /// Blocks until the server thread exits.
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Serves `behavior` on 127.0.0.1:`port` (0 picks a free port).
pub fn mock_serve(behavior: MockBehavior, port: u16) -> Result<MockServer, GatewayError> {
    let responder = Arc::new(MockResponder::new(behavior)?);
    let server = Arc::new(
        tiny_http::Server::http(("127.0.0.1", port))
            .map_err(|e| GatewayError::Server(format!("cannot bind port {port}: {e}")))?,
    );
    let port = server
        .server_addr()
        .to_ip()
        .map(|a| a.port())
        .ok_or_else(|| GatewayError::Server("server has no IP address".into()))?;
    let stop = Arc::new(AtomicBool::new(false));
    let handle = {
        let (server, stop) = (server.clone(), stop.clone());
        std::thread::spawn(move || serve_loop(&server, &responder, &stop))
    };
    Ok(MockServer {
        port,
        stop,
        server,
        handle: Some(handle),
    })
}

fn serve_loop(server: &tiny_http::Server, responder: &MockResponder, stop: &Arc<AtomicBool>) {
    let mut hung = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        let mut request = match server.recv_timeout(Duration::from_millis(100)) {
            Ok(Some(r)) => r,
            Ok(None) => continue,
            Err(_) => break,
        };
        let path = request.url().to_string();
        if !(path.ends_with("/chat/completions") || path.ends_with("/responses")) {
            let _ = request.respond(tiny_http::Response::from_string("not found").with_status_code(404));
            continue;
        }
        let mut body = String::new();
        if request.as_reader().read_to_string(&mut body).is_err() {
            let _ = request.respond(tiny_http::Response::from_string("bad body").with_status_code(400));
            continue;
        }
        let json_header = tiny_http::Header::from_bytes("Content-Type", "application/json")
            .expect("static header");
        match responder.respond(&body) {
            MockReply::Body(b) => {
                let _ = request.respond(tiny_http::Response::from_string(b).with_header(json_header));
            }
            MockReply::Error(code, msg) => {
                let _ = request.respond(tiny_http::Response::from_string(msg).with_status_code(code));
            }
            // keep the connection open and never answer
            MockReply::Hang => hung.push(request),
        }
    }
    drop(hung);
}
