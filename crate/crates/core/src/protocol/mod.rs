//! The three-phase experiment: 10 training comparisons, the optimized
//! handshake, and 6 validation comparisons against ablations.
//!
//! [`Session`] is the state machine shared by the batch harness and the
//! HTTP service; both feed it answers and read the same report.

mod batch;
mod export;
mod report;

pub use batch::{run_batch, BatchSummary, CategoryStats, MeanStd, ParamStats};
pub use export::{
    belief_trace_csv, handshakes_csv, read_report, write_batch, write_session, ExportError, HANDSHAKE_CSV_HEADER,
};
pub use report::{
    HandshakeRecord, Satisfaction, SessionReport, SessionSeeds, TrainingComparison, ValidationComparison,
    REPORT_SCHEMA_VERSION,
};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::handshake::HandshakeParams;
use crate::metrics::evaluate;
use crate::pref::{
    ablation_variants, belief_trace_row, generate_candidates, optimized_params, select_query, AblationVariant, Belief,
    BeliefTraceRow, Choice, PrefError, Query, Side,
};
use crate::sim::{run_handshake, HandshakeLog, HumanHandModel, SimError};

pub const TRAINING_TRIALS: usize = 10;
pub const VALIDATION_TRIALS: usize = 6;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("unknown oracle {0:?}")]
    UnknownOracle(String),
    #[error("candidate pairs exhausted")]
    OracleExhausted,
    #[error("operation needs phase {expected}, session is in {actual}")]
    WrongPhase { expected: &'static str, actual: String },
    #[error("no query is pending")]
    NoPendingQuery,
    #[error("query {0} has already been answered")]
    DuplicatePost(String),
    #[error("query {0} is not the pending query")]
    UnknownQuery(String),
    #[error("replay ran out of answers")]
    ReplayExhausted,
    #[error("more answers than the protocol asks for")]
    TooManyAnswers,
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
}

impl From<PrefError> for ProtocolError {
    fn from(e: PrefError) -> Self {
        match e {
            PrefError::Exhausted(_) => ProtocolError::OracleExhausted,
            other => ProtocolError::ConfigInvalid(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum SessionPhase {
    Training { trial: usize },
    OptimizedReveal,
    Validation { trial: usize },
    Done,
}

impl SessionPhase {
    pub fn name(&self) -> String {
        match self {
            SessionPhase::Training { trial } => format!("training({trial})"),
            SessionPhase::OptimizedReveal => "optimized_reveal".into(),
            SessionPhase::Validation { trial } => format!("validation({trial})"),
            SessionPhase::Done => "done".into(),
        }
    }
}

/// Independent random streams of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    Candidates = 1,
    Belief = 2,
    Queries = 3,
    Simulation = 4,
    Validation = 5,
    Oracle = 6,
}

fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Seed of the synthetic user drawn for an oracle session.
pub fn oracle_seed(seed: u64) -> u64 {
    stream(seed, Stream::Oracle).random()
}

pub fn session_id(seed: u64) -> String {
    format!("hs-{seed:016x}")
}

/// A comparison waiting for an answer, with both handshakes already
/// simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub id: String,
    pub phase: SessionPhase,
    /// Candidate indices during training.
    pub pair: Option<Query>,
    pub left: HandshakeRecord,
    pub right: HandshakeRecord,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ValidationSlot {
    variant: AblationVariant,
    optimized_side: Side,
}

/// Who produced the answers, as written in the report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UserTag {
    Oracle { name: String },
    Interactive,
}

pub struct Session {
    config: Config,
    seed: u64,
    label: String,
    user: UserTag,
    hand: HumanHandModel,
    phase: SessionPhase,
    candidates: Vec<HandshakeParams>,
    belief: Belief,
    used: BTreeSet<(usize, usize)>,
    choices: Vec<Choice>,
    trace: Vec<BeliefTraceRow>,
    training: Vec<TrainingComparison>,
    optimized_index: Option<usize>,
    optimized: Option<HandshakeRecord>,
    satisfaction: Option<Satisfaction>,
    plan: Vec<ValidationSlot>,
    validation: Vec<ValidationComparison>,
    pending: Option<PendingQuery>,
    answered: BTreeSet<String>,
    logs: BTreeMap<String, HandshakeLog>,
    query_rng: ChaCha8Rng,
    sim_rng: ChaCha8Rng,
    validation_rng: ChaCha8Rng,
    seeds: SessionSeeds,
}

impl Session {
    pub fn new(
        config: &Config,
        seed: u64,
        label: impl Into<String>,
        user: UserTag,
        hand: HumanHandModel,
    ) -> Result<Self, ProtocolError> {
        config.validate().map_err(|e| ProtocolError::ConfigInvalid(e.to_string()))?;
        hand.validate().map_err(|e| ProtocolError::ConfigInvalid(e.to_string()))?;
        let candidates = generate_candidates(&mut stream(seed, Stream::Candidates), &config.ranges);
        let belief_seed: u64 = stream(seed, Stream::Belief).random();
        let belief = Belief::initialize(belief_seed, &config.learner);
        let trace = vec![belief_trace_row(0, &belief, &candidates, &config.ranges)];
        let seeds = SessionSeeds {
            session: seed,
            belief: belief_seed,
            candidates_stream: Stream::Candidates as u64,
            queries_stream: Stream::Queries as u64,
            simulation_stream: Stream::Simulation as u64,
            validation_stream: Stream::Validation as u64,
        };
        let mut session = Self {
            config: config.clone(),
            seed,
            label: label.into(),
            user,
            hand,
            phase: SessionPhase::Training { trial: 1 },
            candidates,
            belief,
            used: BTreeSet::new(),
            choices: Vec::new(),
            trace,
            training: Vec::new(),
            optimized_index: None,
            optimized: None,
            satisfaction: None,
            plan: Vec::new(),
            validation: Vec::new(),
            pending: None,
            answered: BTreeSet::new(),
            logs: BTreeMap::new(),
            query_rng: stream(seed, Stream::Queries),
            sim_rng: stream(seed, Stream::Simulation),
            validation_rng: stream(seed, Stream::Validation),
            seeds,
        };
        session.prepare_training_query(1)?;
        Ok(session)
    }

    pub fn id(&self) -> String {
        session_id(self.seed)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn hand(&self) -> &HumanHandModel {
        &self.hand
    }

    pub fn candidates(&self) -> &[HandshakeParams] {
        &self.candidates
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn belief_trace(&self) -> &[BeliefTraceRow] {
        &self.trace
    }

    pub fn pending(&self) -> Option<&PendingQuery> {
        self.pending.as_ref()
    }

    pub fn optimized(&self) -> Option<&HandshakeRecord> {
        self.optimized.as_ref()
    }

    pub fn log(&self, id: &str) -> Option<&HandshakeLog> {
        self.logs.get(id)
    }

    pub fn logs(&self) -> &BTreeMap<String, HandshakeLog> {
        &self.logs
    }

    /// All answers given so far, training then validation.
    pub fn answers(&self) -> Vec<Side> {
        self.training
            .iter()
            .map(|t| t.selected)
            .chain(self.validation.iter().map(|v| v.selected))
            .collect()
    }

    pub fn satisfaction(&self) -> Option<Satisfaction> {
        self.satisfaction
    }

    fn simulate(&mut self, log_id: String, params: HandshakeParams) -> Result<HandshakeRecord, ProtocolError> {
        let sim_seed: u64 = self.sim_rng.random();
        let cfg = &self.config;
        let log = run_handshake(&cfg.robot, &cfg.sim, &params, &self.hand, sim_seed)?;
        let record = HandshakeRecord {
            log_id: log_id.clone(),
            params,
            sim_seed,
            grasp: log.grasp,
            metrics: evaluate(&log, &cfg.metrics),
            log_sha256: log.csv_sha256(),
        };
        self.logs.insert(log_id, log);
        Ok(record)
    }

    fn prepare_training_query(&mut self, trial: usize) -> Result<(), ProtocolError> {
        let pair = select_query(&self.used, self.candidates.len(), &mut self.query_rng)?;
        self.used.insert(pair.key());
        let id = format!("t{trial:02}");
        let left = self.simulate(format!("{id}L"), self.candidates[pair.left])?;
        let right = self.simulate(format!("{id}R"), self.candidates[pair.right])?;
        self.pending = Some(PendingQuery {
            id,
            phase: self.phase,
            pair: Some(pair),
            left,
            right,
        });
        Ok(())
    }

    fn prepare_validation_query(&mut self, trial: usize) -> Result<(), ProtocolError> {
        let slot = self.plan[trial - 1];
        let opt = self.candidates[self.optimized_index.expect("optimum chosen before validation")];
        let id = format!("v{trial:02}");
        let (lp, rp) = match slot.optimized_side {
            Side::Left => (opt, slot.variant.params),
            Side::Right => (slot.variant.params, opt),
        };
        let left = self.simulate(format!("{id}L"), lp)?;
        let right = self.simulate(format!("{id}R"), rp)?;
        self.pending = Some(PendingQuery {
            id,
            phase: self.phase,
            pair: None,
            left,
            right,
        });
        Ok(())
    }

    /// Answer the pending query `query_id`.
    pub fn choose(&mut self, query_id: &str, selected: Side) -> Result<SessionPhase, ProtocolError> {
        let Some(pending) = self.pending.take_if(|p| p.id == query_id) else {
            return Err(if self.answered.contains(query_id) {
                ProtocolError::DuplicatePost(query_id.to_string())
            } else if self.pending.is_none() {
                ProtocolError::NoPendingQuery
            } else {
                ProtocolError::UnknownQuery(query_id.to_string())
            });
        };
        self.answered.insert(pending.id.clone());
        match self.phase {
            SessionPhase::Training { trial } => {
                let pair = pending.pair.expect("training queries carry a pair");
                let choice = Choice { query: pair, selected };
                self.choices.push(choice);
                let observations: Vec<_> = self
                    .choices
                    .iter()
                    .map(|c| c.observation(&self.candidates, &self.config.ranges))
                    .collect();
                self.belief.update(&observations, &self.config.learner);
                self.trace
                    .push(belief_trace_row(trial, &self.belief, &self.candidates, &self.config.ranges));
                self.training.push(TrainingComparison {
                    trial,
                    query: pair,
                    left: pending.left,
                    right: pending.right,
                    selected,
                });
                if trial < TRAINING_TRIALS {
                    self.phase = SessionPhase::Training { trial: trial + 1 };
                    self.prepare_training_query(trial + 1)?;
                } else {
                    let best = optimized_params(&self.belief, &self.candidates, &self.config.ranges)
                        .expect("candidate set is nonempty");
                    self.optimized_index = Some(best);
                    self.phase = SessionPhase::OptimizedReveal;
                    self.optimized = Some(self.simulate("opt".into(), self.candidates[best])?);
                }
            }
            SessionPhase::Validation { trial } => {
                let slot = self.plan[trial - 1];
                self.validation.push(ValidationComparison {
                    trial,
                    variant: slot.variant,
                    optimized_side: slot.optimized_side,
                    left: pending.left,
                    right: pending.right,
                    selected,
                    optimized_won: selected == slot.optimized_side,
                });
                if trial < VALIDATION_TRIALS {
                    self.phase = SessionPhase::Validation { trial: trial + 1 };
                    self.prepare_validation_query(trial + 1)?;
                } else {
                    self.phase = SessionPhase::Done;
                }
            }
            SessionPhase::OptimizedReveal | SessionPhase::Done => unreachable!("no query pending in {:?}", self.phase),
        }
        Ok(self.phase)
    }

    /// Record the rating of the optimized handshake and start validation.
    pub fn rate(&mut self, rating: Satisfaction) -> Result<SessionPhase, ProtocolError> {
        if self.phase != SessionPhase::OptimizedReveal {
            return Err(ProtocolError::WrongPhase {
                expected: "optimized_reveal",
                actual: self.phase.name(),
            });
        }
        self.satisfaction = Some(rating);
        let opt = self.candidates[self.optimized_index.expect("optimum chosen")];
        let mut variants = ablation_variants(&opt, &self.config.ranges, &self.config.ablation);
        variants.shuffle(&mut self.validation_rng);
        self.plan = variants
            .into_iter()
            .map(|variant| ValidationSlot {
                variant,
                optimized_side: if self.validation_rng.random_bool(0.5) {
                    Side::Left
                } else {
                    Side::Right
                },
            })
            .collect();
        self.phase = SessionPhase::Validation { trial: 1 };
        self.prepare_validation_query(1)?;
        Ok(self.phase)
    }

    /// The final report, once the session is done.
    pub fn report(&self) -> Option<SessionReport> {
        if self.phase != SessionPhase::Done {
            return None;
        }
        Some(SessionReport {
            schema_version: REPORT_SCHEMA_VERSION,
            session_id: self.id(),
            label: self.label.clone(),
            user: self.user.clone(),
            seeds: self.seeds,
            config_hash: self.config.hash(),
            dtw_downsample: self.config.metrics.dtw_downsample,
            hand: self.hand,
            candidates: self.candidates.clone(),
            training: self.training.clone(),
            belief_trace: self.trace.clone(),
            optimized_index: self.optimized_index?,
            optimized: self.optimized.clone()?,
            satisfaction: self.satisfaction?,
            validation: self.validation.clone(),
        })
    }
}

/// Where a session's answers come from.
#[derive(Debug, Clone, PartialEq)]
pub enum UserSource {
    /// A synthetic user from the config's oracle table.
    Oracle(String),
    /// Recorded answers (16 choices) and rating, as an interactive user gave them.
    Replay {
        choices: Vec<Side>,
        satisfaction: Satisfaction,
    },
}

/// A finished session with its handshake logs.
#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub report: SessionReport,
    pub logs: BTreeMap<String, HandshakeLog>,
}

/// Run the full experiment for one user.
pub fn run_session(config: &Config, seed: u64, label: &str, source: &UserSource) -> Result<SessionOutcome, ProtocolError> {
    config.validate().map_err(|e| ProtocolError::ConfigInvalid(e.to_string()))?;
    let session = match source {
        UserSource::Oracle(name) => {
            let spec = config
                .oracles
                .get(name)
                .ok_or_else(|| ProtocolError::UnknownOracle(name.clone()))?;
            let mut user = spec.instantiate(oracle_seed(seed), &config.ranges).with_grip(config.grip);
            let hand = user.hand_for(&config.ranges);
            let mut session = Session::new(config, seed, label, UserTag::Oracle { name: name.clone() }, hand)?;
            while let Some(q) = session.pending().cloned() {
                let side = user.answer(&q.left.params, &q.right.params, &config.ranges);
                session.choose(&q.id, side)?;
                if session.phase() == SessionPhase::OptimizedReveal {
                    session.rate(Satisfaction::NotApplicable)?;
                }
            }
            session
        }
        UserSource::Replay { choices, satisfaction } => {
            replay(config, seed, label, &config.interactive_hand, choices, Some(*satisfaction))?
        }
    };
    let report = session.report().ok_or(ProtocolError::ReplayExhausted)?;
    Ok(SessionOutcome {
        report,
        logs: session.logs,
    })
}

/// Rebuild an interactive session from its recorded answers. Stops early
/// (without error) when the answers run out.
pub fn replay(
    config: &Config,
    seed: u64,
    label: &str,
    hand: &HumanHandModel,
    choices: &[Side],
    satisfaction: Option<Satisfaction>,
) -> Result<Session, ProtocolError> {
    let mut session = Session::new(config, seed, label, UserTag::Interactive, *hand)?;
    let mut answers = choices.iter();
    loop {
        if session.phase() == SessionPhase::OptimizedReveal {
            match satisfaction {
                Some(r) => {
                    session.rate(r)?;
                }
                None => break,
            }
        }
        let Some(id) = session.pending().map(|q| q.id.clone()) else {
            break;
        };
        let Some(&side) = answers.next() else {
            break;
        };
        session.choose(&id, side)?;
    }
    if answers.next().is_some() {
        return Err(ProtocolError::TooManyAnswers);
    }
    Ok(session)
}
