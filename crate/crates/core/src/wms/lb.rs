//! Logging and bookkeeping: the append-only job event store.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::JobState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    UI,
    RB,
    JSS,
    CE,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::UI => "UI",
            Component::RB => "RB",
            Component::JSS => "JSS",
            Component::CE => "CE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LbEntry {
    /// `from` is `None` only for the event that creates the job.
    Transition { from: Option<JobState>, to: JobState },
    Info { tag: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LbEvent {
    pub t: u64,
    pub job: String,
    pub component: Component,
    #[serde(flatten)]
    pub entry: LbEntry,
    pub reason: String,
}

impl LbEvent {
    /// `t \t job \t component \t from \t to \t reason`.
    pub fn export_line(&self) -> String {
        let (from, to) = match &self.entry {
            LbEntry::Transition { from, to } => (from.map_or("-", JobState::as_str).to_string(), to.to_string()),
            LbEntry::Info { tag } => ("-".to_string(), format!("info:{tag}")),
        };
        let reason: String = self.reason.chars().map(|c| if c.is_control() { ' ' } else { c }).collect();
        format!("{}\t{}\t{}\t{}\t{}\t{}", self.t, self.job, self.component, from, to, reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("job {job}: first event is not a creation")]
    NoCreation { job: String },
    #[error("job {job}: event {index} moves {from} to {to}, which is not a lifecycle edge")]
    IllegalTransition { job: String, index: usize, from: String, to: String },
    #[error("job {job}: event {index} claims the job was {claimed} but it was {actual}")]
    WrongSource { job: String, index: usize, claimed: String, actual: String },
    #[error("job {job}: time goes backwards at event {index}")]
    TimeReversed { job: String, index: usize },
}

/// Folds one job's events into its final state, checking every edge.
pub fn replay(job: &str, events: &[&LbEvent]) -> Result<Option<JobState>, ReplayError> {
    let mut state: Option<JobState> = None;
    let mut last_t = 0;
    for (index, e) in events.iter().enumerate() {
        if e.t < last_t {
            return Err(ReplayError::TimeReversed { job: job.to_string(), index });
        }
        last_t = e.t;
        let LbEntry::Transition { from, to } = &e.entry else { continue };
        match (state, from) {
            (None, None) if *to == JobState::Submitted => {}
            (None, _) => return Err(ReplayError::NoCreation { job: job.to_string() }),
            (Some(s), Some(f)) if s == *f => {
                if !s.can_move_to(*to) {
                    return Err(ReplayError::IllegalTransition {
                        job: job.to_string(),
                        index,
                        from: s.to_string(),
                        to: to.to_string(),
                    });
                }
            }
            (Some(s), f) => {
                return Err(ReplayError::WrongSource {
                    job: job.to_string(),
                    index,
                    claimed: f.map_or("-", JobState::as_str).to_string(),
                    actual: s.to_string(),
                })
            }
        }
        state = Some(*to);
    }
    Ok(state)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LbStore {
    events: Vec<LbEvent>,
    by_job: BTreeMap<String, Vec<usize>>,
}

impl LbStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, e: LbEvent) {
        self.by_job.entry(e.job.clone()).or_default().push(self.events.len());
        self.events.push(e);
    }

    pub fn all(&self) -> &[LbEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn knows(&self, job: &str) -> bool {
        self.by_job.contains_key(job)
    }

    pub fn events(&self, job: &str) -> Vec<&LbEvent> {
        self.by_job.get(job).into_iter().flatten().map(|&i| &self.events[i]).collect()
    }

    pub fn jobs(&self) -> impl Iterator<Item = &str> {
        self.by_job.keys().map(String::as_str)
    }

    pub fn replay(&self, job: &str) -> Result<Option<JobState>, ReplayError> {
        replay(job, &self.events(job))
    }

    /// Every event as one exported line, in append order.
    pub fn export(&self) -> String {
        self.events.iter().map(|e| e.export_line() + "\n").collect()
    }
}
