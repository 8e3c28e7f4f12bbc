//! The `/v1` operation set. Every CLI command, script line and HTTP route is
//! translated into an [`ApiRequest`] and executed by [`execute`], which is
//! what keeps the three front ends in step.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use worldgrid::fabric::{FailureKind, FailureWindow};
use worldgrid::grid::{Grid, ResourceClass, SubmitRequest, Target};
use worldgrid::monitor::{export_map, MapFilter};
use worldgrid::wms::{JobFilter, JobState};

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum ReplicaOp {
    Cp { src: String, se: String, lfn: String, catalog: Option<String> },
    Replicate { lfn: String, se: String, catalog: Option<String> },
    Unregister { lfn: String, pfn: String, catalog: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiRequest {
    Submit { jdl: String, user: String, vo: Option<String>, rb: Option<String>, ce: Option<String> },
    ListJobs { user: Option<String>, state: Option<String> },
    GetJob(String),
    JobEvents(String),
    JobOutput(String),
    Cancel(String),
    Resources { class: Option<String>, query: Option<String> },
    Info { query: String, index: Option<String> },
    ListReplicas { lfn: String, catalog: Option<String> },
    Replica(ReplicaOp),
    Map { filter: Option<String> },
    Vos,
    AddMember { vo: String, subject: String, signed: bool, ca: Option<String> },
    RemoveMember { vo: String, subject: String },
    Gridmap(String),
    Brokers,
    Advance(AdvanceBody),
    Time,
    Failure(FailureBody),
    Connectivity { site: String, wn_outbound: bool },
    LbLog,
    EventLog,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvanceBody {
    #[serde(default)]
    pub secs: Option<u64>,
    #[serde(default)]
    pub to: Option<u64>,
    #[serde(default)]
    pub until_quiet: bool,
    /// Upper bound on the clock for `until_quiet`.
    #[serde(default)]
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureBody {
    pub kind: String,
    pub target: String,
    #[serde(default)]
    pub start: Option<u64>,
    #[serde(default)]
    pub end: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberBody {
    pub subject: String,
    #[serde(default = "yes")]
    pub signed: bool,
    #[serde(default)]
    pub ca: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectivityBody {
    pub wn_outbound: bool,
}

/// Rendered response: status plus a body that is already text, so local and
/// remote execution print the same bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub status: u16,
    pub content_type: &'static str,
    pub body: String,
}

pub const JSON: &str = "application/json";
pub const TEXT: &str = "text/plain; charset=utf-8";

impl Reply {
    pub fn json(v: &Value) -> Self {
        Self::with_status(200, v)
    }

    pub fn with_status(status: u16, v: &Value) -> Self {
        Reply { status, content_type: JSON, body: format!("{}\n", serde_json::to_string_pretty(v).expect("json")) }
    }

    pub fn text(body: String) -> Self {
        Reply { status: 200, content_type: TEXT, body }
    }

    pub fn value(&self) -> Option<Value> {
        serde_json::from_str(&self.body).ok()
    }
}

/// Gateway-level settings execution depends on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecContext {
    /// Ordered broker ids; the first is the default.
    pub brokers: Vec<String>,
    pub interactive: bool,
}

impl ExecContext {
    pub fn for_grid(grid: &Grid) -> Self {
        Self { brokers: grid.brokers().iter().map(|b| b.config.id.clone()).collect(), interactive: false }
    }
}

impl ApiRequest {
    pub fn is_read(&self) -> bool {
        use ApiRequest::*;
        matches!(
            self,
            ListJobs { .. }
                | GetJob(_)
                | JobEvents(_)
                | JobOutput(_)
                | Resources { .. }
                | Info { .. }
                | ListReplicas { .. }
                | Map { .. }
                | Vos
                | Gridmap(_)
                | Brokers
                | Time
                | LbLog
                | EventLog
        )
    }
}

fn to<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

pub fn execute(grid: &mut Grid, ctx: &ExecContext, req: ApiRequest) -> Result<Reply, ApiError> {
    if req.is_read() {
        read(grid, ctx, &req)
    } else {
        write(grid, ctx, req)
    }
}

/// Operations that never change the simulation.
pub fn read(grid: &Grid, ctx: &ExecContext, req: &ApiRequest) -> Result<Reply, ApiError> {
    use ApiRequest::*;
    Ok(match req {
        ListJobs { user, state } => {
            let state = match state.as_deref() {
                None | Some("") => None,
                Some(s) => Some(s.parse::<JobState>().map_err(|_| ApiError::bad_request(format!("unknown job state {s:?}")))?),
            };
            let jobs = grid.jobs(&JobFilter { owner: user.clone().filter(|u| !u.is_empty()), state });
            Reply::json(&to(jobs))
        }
        GetJob(id) => Reply::json(&to(grid.job(id)?)),
        JobEvents(id) => Reply::json(&to(grid.job_events(id)?)),
        JobOutput(id) => {
            let files = grid.output(id)?;
            let job = grid.job(id)?;
            let registered: Vec<Value> = job.registered.iter().map(|(l, p)| json!({"lfn": l, "pfn": p})).collect();
            Reply::json(&json!({"id": id, "files": files, "registered": registered}))
        }
        Resources { class, query } => {
            let class = match class.as_deref() {
                None | Some("") => None,
                Some(c) => Some(c.parse::<ResourceClass>()?),
            };
            Reply::json(&to(grid.resources(class, query.as_deref().unwrap_or(""))?))
        }
        Info { query, index } => Reply::json(&to(grid.query_info(query, index.as_deref())?)),
        ListReplicas { lfn, catalog } => {
            let pfns: Vec<Value> = grid
                .list_replicas(lfn, catalog.as_deref())?
                .iter()
                .map(|p| json!({"se": p.se, "url": p.url(), "size": p.size}))
                .collect();
            Reply::json(&json!({"lfn": lfn, "replicas": pfns}))
        }
        Map { filter } => {
            let f: MapFilter = filter.as_deref().unwrap_or("").parse()?;
            let mut r = Reply::text(format!("{}\n", export_map(&grid.map(&f)?)));
            r.content_type = JSON;
            r
        }
        Vos => Reply::json(&to(grid.vos())),
        Gridmap(site) => Reply::text(grid.gridmap(site)?.to_string()),
        Brokers => {
            let list: Vec<Value> = ctx
                .brokers
                .iter()
                .filter_map(|id| grid.broker(id))
                .map(|b| {
                    json!({
                        "id": b.config.id,
                        "location": b.location,
                        "glue_aware": b.config.glue_aware,
                        "info_primary": b.config.info_primary,
                        "info_backup": b.config.info_backup,
                        "replica_catalog": b.config.replica_catalog,
                    })
                })
                .collect();
            Reply::json(&Value::Array(list))
        }
        Time => Reply::json(&json!({"t": grid.now(), "interactive": ctx.interactive})),
        LbLog => Reply::text(grid.lb_log()),
        EventLog => Reply::text(grid.event_log()),
        _ => unreachable!("not a read"),
    })
}

fn write(grid: &mut Grid, ctx: &ExecContext, req: ApiRequest) -> Result<Reply, ApiError> {
    use ApiRequest::*;
    Ok(match req {
        Submit { jdl, user, vo, rb, ce } => {
            if user.trim().is_empty() {
                return Err(ApiError::bad_request("user subject is required"));
            }
            let target = match (rb.filter(|r| !r.is_empty()), ce.filter(|c| !c.is_empty())) {
                (Some(_), Some(_)) => return Err(ApiError::bad_request("give either rb or ce, not both")),
                (None, Some(ce)) => Target::Ce(ce),
                (Some(rb), None) => Target::Broker(rb),
                (None, None) => {
                    Target::Broker(ctx.brokers.first().cloned().ok_or_else(|| ApiError::new("UnknownBroker", "no broker configured"))?)
                }
            };
            let id = grid.submit(&SubmitRequest { jdl, owner: user, vo: vo.filter(|v| !v.is_empty()), target })?;
            Reply::with_status(201, &json!({"id": id}))
        }
        Cancel(id) => {
            let cancelled = grid.cancel(&id)?;
            let state = grid.job(&id)?.state;
            Reply::json(&json!({"id": id, "cancelled": cancelled, "state": state}))
        }
        Replica(op) => {
            let p = match op {
                ReplicaOp::Cp { src, se, lfn, catalog } => grid.copy_and_register(&src, &se, &lfn, catalog.as_deref())?,
                ReplicaOp::Replicate { lfn, se, catalog } => grid.replicate(&lfn, &se, catalog.as_deref())?,
                ReplicaOp::Unregister { lfn, pfn, catalog } => {
                    grid.unregister(&lfn, &pfn, catalog.as_deref())?;
                    return Ok(Reply::json(&json!({"lfn": lfn, "unregistered": pfn})));
                }
            };
            Reply::with_status(201, &json!({"se": p.se, "url": p.url(), "size": p.size}))
        }
        AddMember { vo, subject, signed, ca } => {
            grid.add_member(&vo, &subject, signed, ca.as_deref())?;
            Reply::with_status(201, &json!({"vo": vo, "subject": subject, "signed": signed}))
        }
        RemoveMember { vo, subject } => {
            let removed = grid.remove_member(&vo, &subject)?;
            Reply::json(&json!({"vo": vo, "subject": subject, "removed": removed}))
        }
        Advance(a) => {
            if ctx.interactive {
                return Err(ApiError::new("InteractiveMode", "the clock runs by itself in interactive mode"));
            }
            advance(grid, &a)?
        }
        Failure(f) => {
            let kind: FailureKind = f.kind.parse().map_err(ApiError::bad_request)?;
            let start = f.start.unwrap_or(grid.now());
            grid.inject_failure(FailureWindow { kind, target: f.target.clone(), start, end: f.end })?;
            Reply::with_status(201, &json!({"kind": kind, "target": f.target, "start": start, "end": f.end}))
        }
        Connectivity { site, wn_outbound } => {
            grid.set_wn_outbound(&site, wn_outbound)?;
            Reply::json(&json!({"site": site, "wn_outbound": wn_outbound}))
        }
        other => read(grid, ctx, &other)?,
    })
}

/// Exactly one of `secs`, `to` or `until_quiet` moves the clock.
pub fn advance(grid: &mut Grid, a: &AdvanceBody) -> Result<Reply, ApiError> {
    let chosen = [a.secs.is_some(), a.to.is_some(), a.until_quiet].iter().filter(|x| **x).count();
    if chosen != 1 {
        return Err(ApiError::bad_request("advance takes exactly one of secs, to or until_quiet"));
    }
    let mut quiet = None;
    if let Some(s) = a.secs {
        grid.advance(s)?;
    } else if let Some(t) = a.to {
        grid.advance_to(t)?;
    } else {
        let limit = a.limit.unwrap_or(grid.now().saturating_add(DEFAULT_QUIET_WINDOW));
        if limit < grid.now() {
            return Err(ApiError::new("TimeTravel", format!("limit {limit} is before now {}", grid.now())));
        }
        quiet = Some(grid.run_until_quiet(limit));
    }
    Ok(Reply::json(&json!({"t": grid.now(), "quiet": quiet})))
}

/// How far `until_quiet` may run the clock when no limit is given.
pub const DEFAULT_QUIET_WINDOW: u64 = 86_400;
