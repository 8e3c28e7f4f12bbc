use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobState {
    Submitted,
    Waiting,
    Ready,
    Scheduled,
    Running,
    DoneOk,
    DoneFailed,
    Aborted,
    Cancelled,
}

impl JobState {
    pub const ALL: [JobState; 9] = [
        JobState::Submitted,
        JobState::Waiting,
        JobState::Ready,
        JobState::Scheduled,
        JobState::Running,
        JobState::DoneOk,
        JobState::DoneFailed,
        JobState::Aborted,
        JobState::Cancelled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Submitted => "SUBMITTED",
            JobState::Waiting => "WAITING",
            JobState::Ready => "READY",
            JobState::Scheduled => "SCHEDULED",
            JobState::Running => "RUNNING",
            JobState::DoneOk => "DONE_OK",
            JobState::DoneFailed => "DONE_FAILED",
            JobState::Aborted => "ABORTED",
            JobState::Cancelled => "CANCELLED",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::DoneOk | JobState::DoneFailed | JobState::Aborted | JobState::Cancelled)
    }

    /// The lifecycle relation. `Scheduled -> Waiting` is the re-match edge
    /// taken when dispatch to the chosen CE fails.
    pub fn can_move_to(self, to: JobState) -> bool {
        use JobState::*;
        match (self, to) {
            (Submitted, Waiting) | (Waiting, Ready) | (Ready, Scheduled) | (Scheduled, Running) => true,
            (Running, DoneOk) | (Running, DoneFailed) => true,
            (Scheduled, Waiting) => true,
            (Waiting | Ready | Scheduled, Aborted) => true,
            (from, Cancelled) => !from.is_terminal(),
            _ => false,
        }
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JobState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JobState::ALL
            .into_iter()
            .find(|j| j.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown job state {s}"))
    }
}
