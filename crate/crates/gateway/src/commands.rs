//! User-facing commands, shared by the command line and `run` scripts.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};

use crate::api::{AdvanceBody, ApiRequest, FailureBody, ReplicaOp};
use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// VO membership administration.
    Vo {
        #[command(subcommand)]
        op: VoOp,
    },
    /// Site grid-mapfiles.
    Gridmap {
        #[command(subcommand)]
        op: GridmapOp,
    },
    /// Submit a JDL file through a broker or straight to a CE.
    Submit(SubmitArgs),
    /// One job, or all jobs matching the filters.
    Status {
        id: Option<String>,
        #[arg(long)]
        user: Option<String>,
        #[arg(long)]
        state: Option<String>,
    },
    /// Bookkeeping trail of a job.
    Events { id: String },
    Cancel { id: String },
    /// Output sandbox listing and registered output data of a finished job.
    Output { id: String },
    Replica {
        #[command(subcommand)]
        op: ReplicaCmd,
    },
    Info {
        #[command(subcommand)]
        op: InfoOp,
    },
    /// CE and SE entries, optionally of one schema family.
    Resources {
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        query: Option<String>,
    },
    Monitor {
        #[command(subcommand)]
        op: MonitorOp,
    },
    Brokers,
    /// Current simulated time.
    Time,
    /// Move the clock: by SECS, to an absolute time, or until every job is done.
    Advance {
        secs: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long)]
        until_quiet: bool,
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Inject a failure window.
    Fail {
        /// gatekeeper, gris, gridftp, crl_fetch, index, rb or rc
        kind: String,
        target: String,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        until: Option<u64>,
    },
    /// Toggle worker-node outbound connectivity at a site.
    Connectivity {
        site: String,
        #[arg(long, action = clap::ArgAction::Set)]
        wn_outbound: bool,
    },
    /// Print the bookkeeping or event log.
    Log {
        #[command(subcommand)]
        which: LogKind,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum VoOp {
    List,
    AddMember {
        vo: String,
        subject: String,
        /// The member has not signed the usage guidelines.
        #[arg(long)]
        unsigned: bool,
        /// Issuing CA when a certificate has to be created.
        #[arg(long)]
        ca: Option<String>,
    },
    RemoveMember { vo: String, subject: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum GridmapOp {
    Gen { site: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Args)]
pub struct SubmitArgs {
    pub jdl: PathBuf,
    #[arg(long)]
    pub user: String,
    #[arg(long)]
    pub vo: Option<String>,
    #[arg(long, conflicts_with = "ce")]
    pub rb: Option<String>,
    #[arg(long)]
    pub ce: Option<String>,
    /// Script variable to bind the new job id to.
    #[arg(long = "as")]
    pub bind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum ReplicaCmd {
    Ls {
        lfn: String,
        #[arg(long)]
        catalog: Option<String>,
    },
    /// Copy a file to an SE and register it under a new LFN.
    Cp {
        src: String,
        se: String,
        lfn: String,
        #[arg(long)]
        catalog: Option<String>,
    },
    /// Add a replica of a registered LFN at another SE.
    Replicate {
        lfn: String,
        se: String,
        #[arg(long)]
        catalog: Option<String>,
    },
    Rm {
        lfn: String,
        pfn: String,
        #[arg(long)]
        catalog: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum InfoOp {
    Query {
        #[arg(default_value = "")]
        filter: String,
        #[arg(long)]
        index: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum MonitorOp {
    Snapshot {
        #[arg(long)]
        filter: Option<String>,
        /// Also write the map document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum LogKind {
    Lb,
    Events,
}

/// A command ready to send, plus what to do locally with the answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prepared {
    pub req: ApiRequest,
    pub bind: Option<String>,
    pub save_to: Option<PathBuf>,
}

impl Command {
    /// Relative JDL and output paths resolve against `base`.
    pub fn prepare(&self, base: &Path) -> Result<Prepared, ApiError> {
        use ApiRequest as R;
        let plain = |req| Ok(Prepared { req, bind: None, save_to: None });
        match self.clone() {
            Command::Vo { op: VoOp::List } => plain(R::Vos),
            Command::Vo { op: VoOp::AddMember { vo, subject, unsigned, ca } } => {
                plain(R::AddMember { vo, subject, signed: !unsigned, ca })
            }
            Command::Vo { op: VoOp::RemoveMember { vo, subject } } => plain(R::RemoveMember { vo, subject }),
            Command::Gridmap { op: GridmapOp::Gen { site } } => plain(R::Gridmap(site)),
            Command::Submit(a) => {
                let path = base.join(&a.jdl);
                let jdl = std::fs::read_to_string(&path)
                    .map_err(|e| ApiError::bad_request(format!("cannot read {}: {e}", path.display())))?;
                Ok(Prepared { req: R::Submit { jdl, user: a.user, vo: a.vo, rb: a.rb, ce: a.ce }, bind: a.bind, save_to: None })
            }
            Command::Status { id: Some(id), user: None, state: None } => plain(R::GetJob(id)),
            Command::Status { id: Some(_), .. } => Err(ApiError::bad_request("status takes a job id or filters, not both")),
            Command::Status { id: None, user, state } => plain(R::ListJobs { user, state }),
            Command::Events { id } => plain(R::JobEvents(id)),
            Command::Cancel { id } => plain(R::Cancel(id)),
            Command::Output { id } => plain(R::JobOutput(id)),
            Command::Replica { op } => plain(match op {
                ReplicaCmd::Ls { lfn, catalog } => R::ListReplicas { lfn, catalog },
                ReplicaCmd::Cp { src, se, lfn, catalog } => R::Replica(ReplicaOp::Cp { src, se, lfn, catalog }),
                ReplicaCmd::Replicate { lfn, se, catalog } => R::Replica(ReplicaOp::Replicate { lfn, se, catalog }),
                ReplicaCmd::Rm { lfn, pfn, catalog } => R::Replica(ReplicaOp::Unregister { lfn, pfn, catalog }),
            }),
            Command::Info { op: InfoOp::Query { filter, index } } => plain(R::Info { query: filter, index }),
            Command::Resources { class, query } => plain(R::Resources { class, query }),
            Command::Monitor { op: MonitorOp::Snapshot { filter, out } } => {
                Ok(Prepared { req: R::Map { filter }, bind: None, save_to: out.map(|o| base.join(o)) })
            }
            Command::Brokers => plain(R::Brokers),
            Command::Time => plain(R::Time),
            Command::Advance { secs, to, until_quiet, limit } => plain(R::Advance(AdvanceBody { secs, to, until_quiet, limit })),
            Command::Fail { kind, target, from, until } => plain(R::Failure(FailureBody { kind, target, start: from, end: until })),
            Command::Connectivity { site, wn_outbound } => plain(R::Connectivity { site, wn_outbound }),
            Command::Log { which: LogKind::Lb } => plain(R::LbLog),
            Command::Log { which: LogKind::Events } => plain(R::EventLog),
        }
    }
}
