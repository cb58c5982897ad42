//! Blocking client for a running service. The CLI uses it to open an
//! interactive session and wait for a person to finish it in the browser.

use std::time::{Duration, Instant};

use pawshake::protocol::{SessionPhase, SessionReport};
use reqwest::blocking::{Client, Response};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::api::{ChoiceBody, SatisfactionBody};
use crate::error::ErrorBody;
use crate::store::{BeliefPayload, CreateSession, QueryPayload, SessionState};

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("cannot reach the service: {0}")]
    Http(#[from] reqwest::Error),
    #[error("service answered {status}: {body:?}")]
    Service { status: u16, body: ErrorBody },
    #[error("unreadable response: {0}")]
    Decode(String),
    #[error("nobody finished session {session_id} within {seconds} s")]
    Timeout { session_id: String, seconds: f64 },
}

pub struct BridgeClient {
    base: String,
    http: Client,
}

impl BridgeClient {
    pub fn new(base_url: &str) -> Result<Self, BridgeError> {
        let http = Client::builder().timeout(Duration::from_secs(30)).build()?;
        Ok(Self {
            base: base_url.trim_end_matches('/').to_string(),
            http,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn check(resp: Response) -> Result<Response, BridgeError> {
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status().as_u16();
        let text = resp.text()?;
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
            error: "unknown".into(),
            message: text,
        });
        Err(BridgeError::Service { status, body })
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, BridgeError> {
        let text = Self::check(self.http.get(self.url(path)).send()?)?.text()?;
        serde_json::from_str(&text).map_err(|e| BridgeError::Decode(e.to_string()))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, BridgeError> {
        let text = Self::check(self.http.post(self.url(path)).json(body).send()?)?.text()?;
        serde_json::from_str(&text).map_err(|e| BridgeError::Decode(e.to_string()))
    }

    pub fn create(&self, req: &CreateSession) -> Result<SessionState, BridgeError> {
        self.post("/sessions", req)
    }

    pub fn state(&self, id: &str) -> Result<SessionState, BridgeError> {
        self.get(&format!("/sessions/{id}"))
    }

    pub fn query(&self, id: &str) -> Result<QueryPayload, BridgeError> {
        self.get(&format!("/sessions/{id}/query"))
    }

    pub fn choose(&self, id: &str, query_id: &str, selected: &str) -> Result<SessionState, BridgeError> {
        let body = ChoiceBody {
            query_id: query_id.into(),
            selected: selected.into(),
        };
        self.post(&format!("/sessions/{id}/choice"), &body)
    }

    pub fn rate(&self, id: &str, rating: &str) -> Result<SessionState, BridgeError> {
        let body = SatisfactionBody { rating: rating.into() };
        self.post(&format!("/sessions/{id}/satisfaction"), &body)
    }

    pub fn belief(&self, id: &str) -> Result<BeliefPayload, BridgeError> {
        self.get(&format!("/sessions/{id}/belief"))
    }

    /// Report bytes exactly as served.
    pub fn report_json(&self, id: &str) -> Result<String, BridgeError> {
        Ok(Self::check(self.http.get(self.url(&format!("/sessions/{id}/report"))).send()?)?.text()?)
    }

    /// Polls until the session is done, then fetches its report.
    pub fn wait_for_report(&self, id: &str, timeout: Duration, poll: Duration) -> Result<String, BridgeError> {
        let start = Instant::now();
        loop {
            if self.state(id)?.phase == SessionPhase::Done {
                return self.report_json(id);
            }
            if start.elapsed() >= timeout {
                return Err(BridgeError::Timeout {
                    session_id: id.to_string(),
                    seconds: timeout.as_secs_f64(),
                });
            }
            std::thread::sleep(poll.min(timeout.saturating_sub(start.elapsed())));
        }
    }

    pub fn report(&self, id: &str) -> Result<SessionReport, BridgeError> {
        SessionReport::from_json(&self.report_json(id)?).map_err(BridgeError::Decode)
    }
}
