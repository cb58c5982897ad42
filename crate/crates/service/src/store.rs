//! Live sessions, each behind its own lock, mirrored to disk as the list of
//! answers given so far. A restarted service rebuilds every session by
//! replaying those answers.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use pawshake::config::Config;
use pawshake::handshake::HandshakeParams;
use pawshake::pref::{BeliefTraceRow, Side};
use pawshake::protocol::{replay, session_id, Satisfaction, Session, SessionPhase, UserTag};
use pawshake::sim::HumanHandModel;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::broadcast;

use crate::error::ServiceError;
use crate::preview::HandshakePreview;
use crate::API_SCHEMA_VERSION;

#[derive(Debug, Clone)]
pub struct StoreConfig {
    /// Base configuration; sessions may override parts of it.
    pub config: Config,
    /// Where session records are kept. `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub max_sessions: usize,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            config: Config::default(),
            data_dir: None,
            max_sessions: 64,
        }
    }
}

/// Body of `POST /sessions`. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub seed: Option<u64>,
    pub label: Option<String>,
    pub hand: Option<HumanHandModel>,
    /// Merged into the base configuration (JSON merge patch).
    pub overrides: Option<Value>,
}

/// What is written to disk: enough to rebuild the session exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRecord {
    pub schema_version: u32,
    pub session_id: String,
    pub seed: u64,
    pub label: String,
    pub hand: HumanHandModel,
    pub config: Config,
    pub choices: Vec<Side>,
    pub satisfaction: Option<Satisfaction>,
}

/// Summary returned by most endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub schema_version: u32,
    pub session_id: String,
    pub label: String,
    pub seed: u64,
    #[serde(flatten)]
    pub phase: SessionPhase,
    pub pending_query: Option<String>,
    pub answers: usize,
    pub optimized: Option<HandshakeParams>,
    pub satisfaction: Option<Satisfaction>,
}

/// Payload of `GET /sessions/{id}/query`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPayload {
    pub schema_version: u32,
    pub session_id: String,
    pub query_id: String,
    #[serde(flatten)]
    pub phase: SessionPhase,
    pub left: HandshakePreview,
    pub right: HandshakePreview,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefPayload {
    pub schema_version: u32,
    pub session_id: String,
    pub trace: Vec<BeliefTraceRow>,
}

/// Pushed to event-stream subscribers after every transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub state: SessionState,
    pub belief: Option<BeliefTraceRow>,
}

struct Entry {
    session: Session,
    record: SessionRecord,
    query: Option<QueryPayload>,
}

impl Entry {
    fn new(session: Session, record: SessionRecord) -> Self {
        let mut e = Self {
            session,
            record,
            query: None,
        };
        e.refresh_query();
        e
    }

    fn refresh_query(&mut self) {
        let s = &self.session;
        self.query = s.pending().map(|q| {
            let preview = |r: &pawshake::protocol::HandshakeRecord| {
                HandshakePreview::new(r, s.log(&r.log_id).expect("pending handshakes are simulated"))
            };
            QueryPayload {
                schema_version: API_SCHEMA_VERSION,
                session_id: s.id(),
                query_id: q.id.clone(),
                phase: q.phase,
                left: preview(&q.left),
                right: preview(&q.right),
            }
        });
    }

    fn state(&self) -> SessionState {
        let s = &self.session;
        SessionState {
            schema_version: API_SCHEMA_VERSION,
            session_id: s.id(),
            label: s.label().to_string(),
            seed: s.seed(),
            phase: s.phase(),
            pending_query: s.pending().map(|q| q.id.clone()),
            answers: self.record.choices.len(),
            optimized: s.optimized().map(|r| r.params),
            satisfaction: self.record.satisfaction,
        }
    }
}

pub struct SessionStore {
    cfg: StoreConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    events: broadcast::Sender<SessionEvent>,
}

/// RFC 7386 merge patch.
fn merge(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    t.remove(k);
                } else {
                    merge(t.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        (t, p) => *t = p.clone(),
    }
}

fn apply_overrides(base: &Config, overrides: Option<&Value>) -> Result<Config, ServiceError> {
    let Some(patch) = overrides else {
        return Ok(base.clone());
    };
    let mut value = serde_json::to_value(base).map_err(|e| ServiceError::Internal(e.to_string()))?;
    merge(&mut value, patch);
    Config::from_json(&value.to_string()).map_err(|e| ServiceError::InvalidConfig(e.to_string()))
}

fn record_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

impl SessionStore {
    /// Opens the store, rebuilding every session found in `data_dir`.
    pub fn open(cfg: StoreConfig) -> Result<Self, ServiceError> {
        cfg.config.validate().map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
        let store = Self {
            sessions: RwLock::new(HashMap::new()),
            events: broadcast::channel(256).0,
            cfg,
        };
        if let Some(dir) = &store.cfg.data_dir {
            fs::create_dir_all(dir).map_err(|e| ServiceError::Storage(e.to_string()))?;
            let mut map = store.sessions.write();
            for entry in fs::read_dir(dir).map_err(|e| ServiceError::Storage(e.to_string()))? {
                let path = entry.map_err(|e| ServiceError::Storage(e.to_string()))?.path();
                if path.extension().is_none_or(|x| x != "json") {
                    continue;
                }
                let text = fs::read_to_string(&path).map_err(|e| ServiceError::Storage(e.to_string()))?;
                let record: SessionRecord = serde_json::from_str(&text)
                    .map_err(|e| ServiceError::Storage(format!("{}: {e}", path.display())))?;
                let session = replay(
                    &record.config,
                    record.seed,
                    &record.label,
                    &record.hand,
                    &record.choices,
                    record.satisfaction,
                )
                .map_err(|e| ServiceError::Storage(format!("{}: {e}", path.display())))?;
                map.insert(record.session_id.clone(), Arc::new(Mutex::new(Entry::new(session, record))));
            }
        }
        Ok(store)
    }

    pub fn config(&self) -> &StoreConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn subscribe(&self) -> broadcast::Receiver<SessionEvent> {
        self.events.subscribe()
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ServiceError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn persist(&self, record: &SessionRecord) -> Result<(), ServiceError> {
        let Some(dir) = &self.cfg.data_dir else {
            return Ok(());
        };
        let text = serde_json::to_string_pretty(record).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let path = record_path(dir, &record.session_id);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| ServiceError::Storage(e.to_string()))
    }

    fn publish(&self, entry: &Entry) {
        // Nobody listening is fine.
        let _ = self.events.send(SessionEvent {
            state: entry.state(),
            belief: entry.session.belief_trace().last().copied(),
        });
    }

    pub fn create(&self, req: CreateSession) -> Result<SessionState, ServiceError> {
        let config = apply_overrides(&self.cfg.config, req.overrides.as_ref())?;
        // Seeds stay below 2^53 so browsers can hold them exactly.
        let seed = req.seed.unwrap_or_else(|| rand::random::<u64>() >> 11);
        let id = session_id(seed);
        let label = req.label.unwrap_or_default();
        let hand = req.hand.unwrap_or(config.interactive_hand);
        {
            let map = self.sessions.read();
            if map.contains_key(&id) {
                return Err(ServiceError::SessionExists(id));
            }
            if map.len() >= self.cfg.max_sessions {
                return Err(ServiceError::TooManySessions(self.cfg.max_sessions));
            }
        }
        let session = Session::new(&config, seed, &label, UserTag::Interactive, hand)?;
        let record = SessionRecord {
            schema_version: API_SCHEMA_VERSION,
            session_id: id.clone(),
            seed,
            label,
            hand,
            config,
            choices: Vec::new(),
            satisfaction: None,
        };
        let entry = Entry::new(session, record);
        let state = entry.state();
        {
            // Re-check under the write lock; another create may have raced us.
            let mut map = self.sessions.write();
            if map.contains_key(&id) {
                return Err(ServiceError::SessionExists(id));
            }
            if map.len() >= self.cfg.max_sessions {
                return Err(ServiceError::TooManySessions(self.cfg.max_sessions));
            }
            self.persist(&entry.record)?;
            map.insert(id, Arc::new(Mutex::new(entry)));
        }
        Ok(state)
    }

    pub fn state(&self, id: &str) -> Result<SessionState, ServiceError> {
        Ok(self.entry(id)?.lock().state())
    }

    pub fn query(&self, id: &str) -> Result<QueryPayload, ServiceError> {
        self.entry(id)?.lock().query.clone().ok_or(ServiceError::NoPendingQuery)
    }

    pub fn belief(&self, id: &str) -> Result<BeliefPayload, ServiceError> {
        let entry = self.entry(id)?;
        let e = entry.lock();
        Ok(BeliefPayload {
            schema_version: API_SCHEMA_VERSION,
            session_id: id.to_string(),
            trace: e.session.belief_trace().to_vec(),
        })
    }

    /// The finished report, serialized exactly as the harness writes it.
    pub fn report_json(&self, id: &str) -> Result<String, ServiceError> {
        let entry = self.entry(id)?;
        let e = entry.lock();
        e.session.report().map(|r| r.to_json()).ok_or(ServiceError::NotFinished)
    }

    pub fn record(&self, id: &str) -> Result<SessionRecord, ServiceError> {
        Ok(self.entry(id)?.lock().record.clone())
    }

    pub fn choose(&self, id: &str, query_id: &str, selected: &str) -> Result<SessionState, ServiceError> {
        let side = match selected {
            "left" => Side::Left,
            "right" => Side::Right,
            other => return Err(ServiceError::InvalidSelection(other.to_string())),
        };
        let entry = self.entry(id)?;
        let mut e = entry.lock();
        e.session.choose(query_id, side)?;
        e.record.choices.push(side);
        self.persist(&e.record)?;
        e.refresh_query();
        self.publish(&e);
        Ok(e.state())
    }

    pub fn rate(&self, id: &str, rating: &str) -> Result<SessionState, ServiceError> {
        let rating = Satisfaction::parse_human(rating).ok_or_else(|| ServiceError::UnknownRating(rating.to_string()))?;
        let entry = self.entry(id)?;
        let mut e = entry.lock();
        e.session.rate(rating)?;
        e.record.satisfaction = Some(rating);
        self.persist(&e.record)?;
        e.refresh_query();
        self.publish(&e);
        Ok(e.state())
    }
}
