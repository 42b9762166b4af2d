//! Client side of the remote grounding protocol.
//!
//! Each exchange is one `POST {endpoint}/v1/ground` carrying the full
//! conversation so far:
//!
//! ```json
//! {"conversation_id": "...", "system_instruction": "...",
//!  "turns": [{"role": "user", "text": "...",
//!             "images": [{"name": "snapshot_1.ppm", "encoding": "base64-p6", "data": "..."}]}]}
//! ```
//!
//! A 2xx reply is `{"text": "..."}`; anything else is `{"error": "..."}`.
//! The reply text is read with [`parse_response`].

use std::fs;
use std::path::Path;
use std::time::Duration;

use base64::Engine;
use navground_core::grounding::{parse_response, DialogueTurn, Grounder, GrounderResponse};
use navground_core::sensing::raster::render_ppm;
use navground_core::pipeline::Observation;
use serde::{Deserialize, Serialize};

/// Environment variable holding the bearer token for the remote endpoint.
pub const TOKEN_ENV: &str = "NAVGROUND_API_KEY";
pub const IMAGE_ENCODING: &str = "base64-p6";
pub const INSTRUCTION_VERSION: &str = "v1";
const INSTRUCTION_TEMPLATE: &str = include_str!("../assets/instruction_v1.txt");

const ID_CONVENTION: &str = "An ID is the object type followed by a number, for example chair7 or table2; \
the same object keeps the same ID in every picture.";
const REPLY_FORMAT: &str = "If exactly one object fits, reply \"The <object> is labeled as <ID> in the <ordinal> image.\" \
If several fit, reply \"It could be <ID> in the <ordinal> image or <ID> in the <ordinal> image.\" listing all of them. \
If nothing fits, reply \"I cannot find it.\"";

/// System instruction for a sweep of `omega` snapshots.
pub fn system_instruction(omega: usize) -> String {
    INSTRUCTION_TEMPLATE
        .replace("{omega}", &omega.to_string())
        .replace("{id_convention}", ID_CONVENTION)
        .replace("{reply_format}", REPLY_FORMAT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireImage {
    pub name: String,
    pub encoding: String,
    pub data: String,
}

impl WireImage {
    pub fn from_ppm(name: &str, ppm: &[u8]) -> Self {
        Self {
            name: name.to_string(),
            encoding: IMAGE_ENCODING.to_string(),
            data: base64::engine::general_purpose::STANDARD.encode(ppm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireTurn {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<WireImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundRequest {
    pub conversation_id: String,
    pub system_instruction: String,
    pub turns: Vec<WireTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundReply {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub error: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("server answered {status}: {message}")]
    Status { status: u16, message: String },
    #[error("request failed: {0}")]
    Network(String),
    #[error("malformed reply: {0}")]
    Decode(String),
    #[error("transcript has no reply for exchange {exchange}")]
    TranscriptExhausted { exchange: usize },
    #[error("exchange {exchange}: expected user text containing `{expected}`, got `{got}`")]
    TranscriptMismatch { exchange: usize, expected: String, got: String },
    #[error("cannot read transcript {path}: {message}")]
    Transcript { path: String, message: String },
}

/// Delivers one request and returns the reply text.
pub trait Transport {
    fn exchange(&mut self, request: &GroundRequest) -> Result<String, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn exchange(&mut self, request: &GroundRequest) -> Result<String, TransportError> {
        (**self).exchange(request)
    }
}

/// HTTP transport. The token, when present, is sent as a bearer token.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: &str, token: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/v1/ground", endpoint.trim_end_matches('/'));
        Self { url, token, agent }
    }

    /// Reads the token from [`TOKEN_ENV`].
    pub fn from_env(endpoint: &str, timeout: Duration) -> Self {
        Self::new(endpoint, std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()), timeout)
    }
}

impl Transport for HttpTransport {
    fn exchange(&mut self, request: &GroundRequest) -> Result<String, TransportError> {
        let mut req = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(request).map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| TransportError::Network(e.to_string()))?;
        if (200..300).contains(&status) {
            let reply: GroundReply = serde_json::from_str(&body).map_err(|e| TransportError::Decode(e.to_string()))?;
            Ok(reply.text)
        } else {
            let message = serde_json::from_str::<ErrorReply>(&body).map_or(body, |e| e.error);
            Err(TransportError::Status { status, message })
        }
    }
}

/// One scripted reply of a canned transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CannedReply {
    pub expect_text_substring: String,
    pub reply_text: String,
}

/// Offline transport replaying a transcript in order. Each exchange must end
/// with a user turn containing the expected substring.
#[derive(Debug, Clone, Default)]
pub struct CannedTransport {
    replies: Vec<CannedReply>,
    next: usize,
    requests: Vec<GroundRequest>,
}

impl CannedTransport {
    pub fn new(replies: Vec<CannedReply>) -> Self {
        Self { replies, next: 0, requests: Vec::new() }
    }

    pub fn load(path: &Path) -> Result<Self, TransportError> {
        let err = |message: String| TransportError::Transcript { path: path.display().to_string(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let replies: Vec<CannedReply> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        Ok(Self::new(replies))
    }

    /// Requests seen so far.
    pub fn requests(&self) -> &[GroundRequest] {
        &self.requests
    }

    pub fn remaining(&self) -> usize {
        self.replies.len() - self.next
    }
}

impl Transport for CannedTransport {
    fn exchange(&mut self, request: &GroundRequest) -> Result<String, TransportError> {
        let exchange = self.next + 1;
        let entry = self.replies.get(self.next).ok_or(TransportError::TranscriptExhausted { exchange })?;
        let got = request
            .turns
            .last()
            .filter(|t| t.role == Role::User)
            .map_or("", |t| t.text.as_str());
        if !got.contains(&entry.expect_text_substring) {
            return Err(TransportError::TranscriptMismatch {
                exchange,
                expected: entry.expect_text_substring.clone(),
                got: got.to_string(),
            });
        }
        self.requests.push(request.clone());
        self.next += 1;
        Ok(entry.reply_text.clone())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RemoteError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("conversation reached its limit of {limit} turns")]
    TurnLimit { limit: usize },
}

/// Grounder backed by a remote vision-language model.
///
/// The annotated snapshots travel with the first user turn. A failed exchange
/// leaves the conversation untouched, so the same turn can be retried.
#[derive(Debug, Clone)]
pub struct RemoteGrounder<T> {
    transport: T,
    conversation_id: String,
    system_instruction: String,
    images: Vec<WireImage>,
    turns: Vec<WireTurn>,
    max_turns: usize,
}

impl<T: Transport> RemoteGrounder<T> {
    pub fn new(transport: T, conversation_id: &str, system_instruction: String, images: Vec<WireImage>, max_turns: usize) -> Self {
        Self {
            transport,
            conversation_id: conversation_id.to_string(),
            system_instruction,
            images,
            turns: Vec::new(),
            max_turns,
        }
    }

    /// Grounder over the annotated snapshots of `obs`.
    pub fn for_observation(transport: T, conversation_id: &str, obs: &Observation, tag_offset: u32, max_turns: usize) -> Self {
        let images = encode_snapshots(obs, tag_offset);
        Self::new(transport, conversation_id, system_instruction(obs.snapshots.len()), images, max_turns)
    }

    /// Conversation so far, user and assistant turns interleaved.
    pub fn transcript(&self) -> &[WireTurn] {
        &self.turns
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    /// Sends free text as the next user turn.
    pub fn send_text(&mut self, text: &str) -> Result<GrounderResponse, RemoteError> {
        let user_turns = self.turns.iter().filter(|t| t.role == Role::User).count();
        if user_turns >= self.max_turns {
            return Err(RemoteError::TurnLimit { limit: self.max_turns });
        }
        let images = if user_turns == 0 { self.images.clone() } else { Vec::new() };
        let mut turns = self.turns.clone();
        turns.push(WireTurn { role: Role::User, text: text.to_string(), images });
        let request = GroundRequest {
            conversation_id: self.conversation_id.clone(),
            system_instruction: self.system_instruction.clone(),
            turns,
        };
        let reply = self.transport.exchange(&request)?;
        self.turns = request.turns;
        self.turns.push(WireTurn { role: Role::Assistant, text: reply.clone(), images: Vec::new() });
        Ok(parse_response(&reply))
    }
}

impl<T: Transport> Grounder for RemoteGrounder<T> {
    type Error = RemoteError;

    fn ground(&mut self, turn: &DialogueTurn) -> Result<GrounderResponse, RemoteError> {
        self.send_text(&turn.text)
    }
}

/// Annotated P6 renders of every snapshot, named `snapshot_<i>.ppm`.
pub fn encode_snapshots(obs: &Observation, tag_offset: u32) -> Vec<WireImage> {
    obs.snapshots
        .iter()
        .zip(&obs.annotated)
        .map(|(s, a)| WireImage::from_ppm(&format!("snapshot_{}.ppm", s.index), &render_ppm(s, a, tag_offset)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use navground_core::grounding::ResponseStatus;

    fn canned(pairs: &[(&str, &str)]) -> CannedTransport {
        CannedTransport::new(
            pairs
                .iter()
                .map(|(e, r)| CannedReply { expect_text_substring: e.to_string(), reply_text: r.to_string() })
                .collect(),
        )
    }

    fn grounder(t: CannedTransport) -> RemoteGrounder<CannedTransport> {
        let img = WireImage::from_ppm("snapshot_1.ppm", b"P6\n1 1\n255\n\0\0\0");
        RemoteGrounder::new(t, "c1", system_instruction(8), vec![img], 3)
    }

    #[test]
    fn instruction_slots_filled() {
        let s = system_instruction(8);
        assert!(s.contains("took 8 pictures"));
        assert!(!s.contains('{'));
    }

    #[test]
    fn images_ride_on_first_turn_only() {
        let mut g = grounder(canned(&[("chair", "It could be chair1 in the first image or chair2 in the first image."), ("high", "The chair is labeled as chair2 in the first image.")]));
        assert_eq!(g.send_text("the chair").unwrap().status(), ResponseStatus::Ambiguous);
        assert_eq!(g.send_text("the high one").unwrap().status(), ResponseStatus::Resolved);
        let t = g.into_transport();
        let reqs = t.requests();
        assert_eq!(reqs.len(), 2);
        assert_eq!(reqs[0].turns.len(), 1);
        assert_eq!(reqs[0].turns[0].images.len(), 1);
        assert_eq!(reqs[1].turns.len(), 3);
        assert!(reqs[1].turns[2].images.is_empty());
        assert_eq!(reqs[1].turns[1].role, Role::Assistant);
    }

    #[test]
    fn failed_exchange_keeps_transcript() {
        let mut g = grounder(canned(&[("door", "I cannot find it.")]));
        assert!(matches!(g.send_text("the chair"), Err(RemoteError::Transport(TransportError::TranscriptMismatch { .. }))));
        assert!(g.transcript().is_empty());
        assert_eq!(g.send_text("near the door").unwrap().status(), ResponseStatus::NotFound);
        assert_eq!(g.transcript().len(), 2);
        assert!(matches!(g.send_text("more"), Err(RemoteError::Transport(TransportError::TranscriptExhausted { exchange: 2 }))));
    }

    #[test]
    fn turn_limit() {
        let mut g = grounder(canned(&[("", "x"), ("", "x"), ("", "x"), ("", "x")]));
        for _ in 0..3 {
            g.send_text("a").unwrap();
        }
        assert!(matches!(g.send_text("a"), Err(RemoteError::TurnLimit { limit: 3 })));
    }

    #[test]
    fn wire_format_field_names() {
        let req = GroundRequest {
            conversation_id: "c".into(),
            system_instruction: "s".into(),
            turns: vec![WireTurn { role: Role::User, text: "t".into(), images: vec![WireImage::from_ppm("a.ppm", b"P6")] }],
        };
        let v: serde_json::Value = serde_json::to_value(&req).unwrap();
        assert_eq!(v["turns"][0]["role"], "user");
        assert_eq!(v["turns"][0]["images"][0]["encoding"], "base64-p6");
        assert_eq!(v["turns"][0]["images"][0]["data"], "UDY=");
        let back: GroundRequest = serde_json::from_value(v).unwrap();
        assert_eq!(back, req);
    }
}
