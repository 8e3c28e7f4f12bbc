//! Workload management: jobs, their lifecycle, the broker's matchmaking and
//! the logging and bookkeeping store. The event-driven flow that moves jobs
//! through the grid lives in [`crate::grid`].

mod lb;
mod matching;
mod state;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::jdl::{Expr, JdlDocument};

pub use lb::{replay, Component, LbEntry, LbEvent, LbStore, ReplayError};
pub use matching::{compare, entry_attrs, rank_candidates, Candidate, MatchInput, MatchResult, Ranked};
pub use state::JobState;

/// Re-match attempts before a job is aborted.
pub const MAX_MATCH_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WmsError {
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("unknown broker {0}")]
    UnknownBroker(String),
    #[error("unknown computing element {0}")]
    UnknownCe(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("{subject} is not a member of VO {vo}")]
    VoMembership { subject: String, vo: String },
    #[error("no VO given: set VirtualOrganisation or pass a VO")]
    NoVo,
    #[error("{0}")]
    NotAuthorized(String),
    #[error("gatekeeper of {0} is down")]
    GatekeeperDown(String),
    #[error("{0} is down")]
    ServiceDown(String),
    #[error("input sandbox file {0} not found on the user interface")]
    SandboxMissing(String),
    #[error("job {0} has no output yet")]
    OutputNotReady(String),
    #[error("illegal transition {from} -> {to} for job {job}")]
    IllegalTransition { job: String, from: JobState, to: JobState },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokerConfig {
    pub id: String,
    pub info_primary: String,
    pub info_backup: String,
    pub replica_catalog: String,
    pub glue_aware: bool,
    #[serde(with = "expr_text")]
    pub default_rank: Expr,
    pub strict_data: bool,
    /// Where the broker runs, for sandbox transfer times.
    pub site: Option<String>,
}

mod expr_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::jdl::{expr_to_string, parse_expr, Expr};

    pub fn serialize<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&expr_to_string(e))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        let text = String::deserialize(d)?;
        parse_expr(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub owner: String,
    pub vo: String,
    #[serde(skip)]
    pub jdl: Option<JdlDocument>,
    pub jdl_text: String,
    pub state: JobState,
    pub assigned_ce: Option<String>,
    pub submitted_at: u64,
    /// `None` for direct submissions.
    pub rb: Option<String>,
    pub attempts: u32,
    pub excluded: BTreeSet<String>,
    pub reason: String,
    /// Output sandbox held at the broker once the job is done.
    pub output: Vec<OutputFile>,
    /// Output data registered in the replica catalogue, as `(lfn, pfn)`.
    pub registered: Vec<(String, String)>,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
}

impl Job {
    pub fn jdl(&self) -> &JdlDocument {
        self.jdl.as_ref().expect("jobs keep their parsed description")
    }
}

/// Jobs plus their event trail. Every state change goes through
/// [`Wms::transition`], which writes exactly one LB event.
#[derive(Debug, Clone, Default)]
pub struct Wms {
    jobs: BTreeMap<String, Job>,
    lb: LbStore,
    counter: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobFilter {
    pub owner: Option<String>,
    pub state: Option<JobState>,
}

impl Wms {
    pub fn new() -> Self {
        Self::default()
    }

    /// `<rb>-NNNNNN` or `direct-NNNNNN`, from one grid-wide counter.
    pub fn next_id(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}-{:06}", self.counter)
    }

    /// Registers a new job in `Submitted` and logs its creation.
    pub fn create(&mut self, job: Job, t: u64, reason: &str) {
        debug_assert_eq!(job.state, JobState::Submitted);
        self.lb.append(LbEvent {
            t,
            job: job.id.clone(),
            component: Component::UI,
            entry: LbEntry::Transition { from: None, to: JobState::Submitted },
            reason: reason.to_string(),
        });
        self.jobs.insert(job.id.clone(), job);
    }

    pub fn transition(&mut self, id: &str, to: JobState, t: u64, component: Component, reason: &str) -> Result<(), WmsError> {
        let job = self.jobs.get_mut(id).ok_or_else(|| WmsError::UnknownJob(id.to_string()))?;
        let from = job.state;
        if !from.can_move_to(to) {
            return Err(WmsError::IllegalTransition { job: id.to_string(), from, to });
        }
        job.state = to;
        job.reason = reason.to_string();
        self.lb.append(LbEvent {
            t,
            job: id.to_string(),
            component,
            entry: LbEntry::Transition { from: Some(from), to },
            reason: reason.to_string(),
        });
        Ok(())
    }

    pub fn info(&mut self, id: &str, t: u64, component: Component, tag: &str, reason: &str) {
        self.lb.append(LbEvent {
            t,
            job: id.to_string(),
            component,
            entry: LbEntry::Info { tag: tag.to_string() },
            reason: reason.to_string(),
        });
    }

    pub fn job(&self, id: &str) -> Result<&Job, WmsError> {
        self.jobs.get(id).ok_or_else(|| WmsError::UnknownJob(id.to_string()))
    }

    pub fn job_mut(&mut self, id: &str) -> Result<&mut Job, WmsError> {
        self.jobs.get_mut(id).ok_or_else(|| WmsError::UnknownJob(id.to_string()))
    }

    pub fn jobs(&self) -> impl Iterator<Item = &Job> {
        self.jobs.values()
    }

    pub fn query(&self, filter: &JobFilter) -> Vec<&Job> {
        self.jobs
            .values()
            .filter(|j| filter.owner.as_ref().is_none_or(|o| *o == j.owner))
            .filter(|j| filter.state.is_none_or(|s| s == j.state))
            .collect()
    }

    pub fn lb(&self) -> &LbStore {
        &self.lb
    }

    pub fn events(&self, id: &str) -> Result<Vec<&LbEvent>, WmsError> {
        self.job(id)?;
        Ok(self.lb.events(id))
    }
}

/// Cycles through a fixed CE list for direct submissions.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    ces: Vec<String>,
    next: usize,
}

impl RoundRobin {
    pub fn new(ces: Vec<String>) -> Self {
        Self { ces, next: 0 }
    }

    pub fn next_ce(&mut self) -> Option<&str> {
        if self.ces.is_empty() {
            return None;
        }
        let i = self.next % self.ces.len();
        self.next += 1;
        Some(&self.ces[i])
    }
}
