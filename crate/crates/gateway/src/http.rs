//! Wire form of [`ApiRequest`]: one function per direction.

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::api::{AdvanceBody, ApiRequest, ConnectivityBody, FailureBody, MemberBody, ReplicaOp};
use crate::error::ApiError;

pub const PREFIX: &str = "/v1";

const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.').remove(b'~');

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: &'static str,
    /// Percent-encoded, starting with [`PREFIX`].
    pub path: String,
    pub query: Vec<(String, String)>,
    pub content_type: Option<&'static str>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitBody {
    pub jdl: String,
    pub user: String,
    #[serde(default)]
    pub vo: Option<String>,
    #[serde(default)]
    pub rb: Option<String>,
    #[serde(default)]
    pub ce: Option<String>,
}

fn path(segments: &[&str]) -> String {
    let mut p = PREFIX.to_string();
    for s in segments {
        p.push('/');
        p.extend(utf8_percent_encode(s, SEGMENT));
    }
    p
}

fn q(pairs: &[(&str, &Option<String>)]) -> Vec<(String, String)> {
    pairs.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
}

fn get(path: String, query: Vec<(String, String)>) -> HttpRequest {
    HttpRequest { method: "GET", path, query, content_type: None, body: String::new() }
}

fn with_json<T: Serialize>(method: &'static str, path: String, body: &T) -> HttpRequest {
    HttpRequest {
        method,
        path,
        query: Vec::new(),
        content_type: Some("application/json"),
        body: serde_json::to_string(body).expect("json"),
    }
}

pub fn to_http(req: &ApiRequest) -> HttpRequest {
    use ApiRequest::*;
    match req {
        // JDL travels as the raw body; the rest as query parameters
        Submit { jdl, user, vo, rb, ce } => HttpRequest {
            method: "POST",
            path: path(&["jobs"]),
            query: q(&[("user", &Some(user.clone())), ("vo", vo), ("rb", rb), ("ce", ce)]),
            content_type: Some("text/plain"),
            body: jdl.clone(),
        },
        ListJobs { user, state } => get(path(&["jobs"]), q(&[("user", user), ("state", state)])),
        GetJob(id) => get(path(&["jobs", id]), vec![]),
        JobEvents(id) => get(path(&["jobs", id, "events"]), vec![]),
        JobOutput(id) => get(path(&["jobs", id, "output"]), vec![]),
        Cancel(id) => HttpRequest { method: "DELETE", ..get(path(&["jobs", id]), vec![]) },
        Resources { class, query } => get(path(&["resources"]), q(&[("class", class), ("query", query)])),
        Info { query, index } => get(path(&["info"]), q(&[("query", &Some(query.clone())), ("index", index)])),
        ListReplicas { lfn, catalog } => get(path(&["replicas", lfn]), q(&[("catalog", catalog)])),
        Replica(op) => with_json("POST", path(&["replicas"]), op),
        Map { filter } => get(path(&["monitor", "map"]), q(&[("filter", filter)])),
        Vos => get(path(&["vos"]), vec![]),
        AddMember { vo, subject, signed, ca } => with_json(
            "POST",
            path(&["vos", vo, "members"]),
            &MemberBody { subject: subject.clone(), signed: *signed, ca: ca.clone() },
        ),
        RemoveMember { vo, subject } => HttpRequest { method: "DELETE", ..get(path(&["vos", vo, "members", subject]), vec![]) },
        Gridmap(site) => get(path(&["gridmap", site]), vec![]),
        Brokers => get(path(&["brokers"]), vec![]),
        Advance(a) => with_json("POST", path(&["sim", "advance"]), a),
        Time => get(path(&["sim", "time"]), vec![]),
        Failure(f) => with_json("POST", path(&["sim", "failures"]), f),
        Connectivity { site, wn_outbound } => {
            with_json("PUT", path(&["sites", site, "connectivity"]), &ConnectivityBody { wn_outbound: *wn_outbound })
        }
        LbLog => get(path(&["logs", "lb"]), vec![]),
        EventLog => get(path(&["logs", "events"]), vec![]),
    }
}

struct Query(Vec<(String, String)>);

impl Query {
    fn parse(raw: Option<&str>, allowed: &[&str]) -> Result<Self, ApiError> {
        let pairs: Vec<(String, String)> = url::form_urlencoded::parse(raw.unwrap_or("").as_bytes()).into_owned().collect();
        for (i, (k, _)) in pairs.iter().enumerate() {
            if !allowed.contains(&k.as_str()) {
                return Err(ApiError::bad_request(format!("unknown query parameter {k:?}")));
            }
            if pairs[..i].iter().any(|(o, _)| o == k) {
                return Err(ApiError::bad_request(format!("query parameter {k:?} given twice")));
            }
        }
        Ok(Query(pairs))
    }

    fn get(&self, k: &str) -> Option<String> {
        self.0.iter().find(|(x, _)| x == k).map(|(_, v)| v.clone())
    }
}

fn json_body<T: DeserializeOwned>(body: &str) -> Result<T, ApiError> {
    serde_json::from_str(body).map_err(|e| ApiError::bad_request(format!("request body: {e}")))
}

fn is_json(content_type: Option<&str>) -> bool {
    content_type.is_some_and(|c| c.split(';').next().unwrap_or("").trim().eq_ignore_ascii_case("application/json"))
}

/// Parses one HTTP request into an operation. `path` is still percent-encoded.
pub fn from_http(method: &str, raw_path: &str, raw_query: Option<&str>, content_type: Option<&str>, body: &[u8]) -> Result<ApiRequest, ApiError> {
    use ApiRequest::*;
    let not_found = || ApiError::new("NotFound", format!("no such endpoint {raw_path}"));
    let rest = raw_path.strip_prefix(PREFIX).ok_or_else(not_found)?;
    let rest = rest.strip_prefix('/').ok_or_else(not_found)?;
    let mut segs = Vec::new();
    for s in rest.split('/') {
        let d = percent_decode_str(s).decode_utf8().map_err(|_| ApiError::bad_request("path is not valid UTF-8"))?;
        if d.is_empty() {
            return Err(not_found());
        }
        segs.push(d.into_owned());
    }
    let body = std::str::from_utf8(body).map_err(|_| ApiError::bad_request("body is not valid UTF-8"))?;
    let seg: Vec<&str> = segs.iter().map(String::as_str).collect();
    let no_query = |r: ApiRequest| -> Result<ApiRequest, ApiError> {
        Query::parse(raw_query, &[])?;
        Ok(r)
    };
    let wrong_method = || Err(ApiError::new("MethodNotAllowed", format!("{method} not allowed on {raw_path}")));

    match (seg.as_slice(), method) {
        (["jobs"], "POST") => {
            let qs = Query::parse(raw_query, &["user", "vo", "rb", "ce"])?;
            if is_json(content_type) {
                if !qs.0.is_empty() {
                    return Err(ApiError::bad_request("JSON submissions carry their parameters in the body"));
                }
                let b: SubmitBody = json_body(body)?;
                Ok(Submit { jdl: b.jdl, user: b.user, vo: b.vo, rb: b.rb, ce: b.ce })
            } else {
                let user = qs.get("user").ok_or_else(|| ApiError::bad_request("user query parameter is required"))?;
                Ok(Submit { jdl: body.to_string(), user, vo: qs.get("vo"), rb: qs.get("rb"), ce: qs.get("ce") })
            }
        }
        (["jobs"], "GET") => {
            let qs = Query::parse(raw_query, &["user", "state"])?;
            Ok(ListJobs { user: qs.get("user"), state: qs.get("state") })
        }
        (["jobs"], _) => wrong_method(),
        (["jobs", id], "GET") => no_query(GetJob(id.to_string())),
        (["jobs", id], "DELETE") => no_query(Cancel(id.to_string())),
        (["jobs", _], _) => wrong_method(),
        (["jobs", id, "events"], "GET") => no_query(JobEvents(id.to_string())),
        (["jobs", id, "output"], "GET") => no_query(JobOutput(id.to_string())),
        (["jobs", _, "events" | "output"], _) => wrong_method(),
        (["resources"], "GET") => {
            let qs = Query::parse(raw_query, &["class", "query"])?;
            Ok(Resources { class: qs.get("class"), query: qs.get("query") })
        }
        (["info"], "GET") => {
            let qs = Query::parse(raw_query, &["query", "index"])?;
            Ok(Info { query: qs.get("query").unwrap_or_default(), index: qs.get("index") })
        }
        (["resources" | "info"], _) => wrong_method(),
        (["replicas"], "POST") => {
            Query::parse(raw_query, &[])?;
            Ok(Replica(json_body::<ReplicaOp>(body)?))
        }
        (["replicas"], _) => wrong_method(),
        (["replicas", lfn], "GET") => {
            let qs = Query::parse(raw_query, &["catalog"])?;
            Ok(ListReplicas { lfn: lfn.to_string(), catalog: qs.get("catalog") })
        }
        (["replicas", _], _) => wrong_method(),
        (["monitor", "map"], "GET") => {
            let qs = Query::parse(raw_query, &["filter"])?;
            Ok(Map { filter: qs.get("filter") })
        }
        (["monitor", "map"], _) => wrong_method(),
        (["vos"], "GET") => no_query(Vos),
        (["vos"], _) => wrong_method(),
        (["vos", vo, "members"], "POST") => {
            Query::parse(raw_query, &[])?;
            let m: MemberBody = json_body(body)?;
            Ok(AddMember { vo: vo.to_string(), subject: m.subject, signed: m.signed, ca: m.ca })
        }
        (["vos", _, "members"], _) => wrong_method(),
        (["vos", vo, "members", subject], "DELETE") => no_query(RemoveMember { vo: vo.to_string(), subject: subject.to_string() }),
        (["vos", _, "members", _], _) => wrong_method(),
        (["gridmap", site], "GET") => no_query(Gridmap(site.to_string())),
        (["gridmap", _], _) => wrong_method(),
        (["brokers"], "GET") => no_query(Brokers),
        (["brokers"], _) => wrong_method(),
        (["sim", "advance"], "POST") => {
            Query::parse(raw_query, &[])?;
            let a: AdvanceBody = if body.trim().is_empty() { AdvanceBody::default() } else { json_body(body)? };
            Ok(Advance(a))
        }
        (["sim", "time"], "GET") => no_query(Time),
        (["sim", "failures"], "POST") => {
            Query::parse(raw_query, &[])?;
            Ok(Failure(json_body::<FailureBody>(body)?))
        }
        (["sim", "advance" | "time" | "failures"], _) => wrong_method(),
        (["sites", site, "connectivity"], "PUT") => {
            Query::parse(raw_query, &[])?;
            let c: ConnectivityBody = json_body(body)?;
            Ok(Connectivity { site: site.to_string(), wn_outbound: c.wn_outbound })
        }
        (["sites", _, "connectivity"], _) => wrong_method(),
        (["logs", "lb"], "GET") => no_query(LbLog),
        (["logs", "events"], "GET") => no_query(EventLog),
        (["logs", "lb" | "events"], _) => wrong_method(),
        _ => Err(not_found()),
    }
}
