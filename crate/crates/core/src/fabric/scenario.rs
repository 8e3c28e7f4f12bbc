//! The scenario file: a TOML document describing sites, services, trust,
//! VOs, users, links and scheduled failures.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Continent, FailureKind, Lrms};
use crate::auth::GridFlavor;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error at {line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("scenario error in {location}: {message}")]
    Invalid { location: String, message: String },
    #[error("cannot read scenario {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(location: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { location: location.into(), message: message.into() }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(default = "GridParams::default_duration_min")]
    pub duration_min: u64,
    #[serde(default = "GridParams::default_duration_max")]
    pub duration_max: u64,
    /// Seconds between two consecutive workload-management state changes.
    #[serde(default = "GridParams::default_hop")]
    pub hop_latency: u64,
    #[serde(default = "GridParams::default_info_refresh")]
    pub info_refresh: u64,
    #[serde(default = "GridParams::default_ttl")]
    pub registration_ttl: u64,
    #[serde(default = "GridParams::default_crl_refresh")]
    pub crl_refresh: u64,
    #[serde(default = "GridParams::default_probe_period")]
    pub probe_period: u64,
    #[serde(default = "GridParams::default_probe_timeout")]
    pub probe_timeout: u64,
    #[serde(default = "GridParams::default_history")]
    pub history_capacity: usize,
    /// MB/s between hosts of one site.
    #[serde(default = "GridParams::default_intra_site")]
    pub bandwidth_intra_site: f64,
    /// MB/s between sites on the same continent.
    #[serde(default = "GridParams::default_inter_site")]
    pub bandwidth_inter_site: f64,
    /// MB/s between continents.
    #[serde(default = "GridParams::default_inter_site")]
    pub bandwidth_intercontinental: f64,
    /// Where user interfaces submit from; sandboxes travel UI to broker.
    #[serde(default)]
    pub ui_site: Option<String>,
    /// Operations-centre coordinates, used for probe latency.
    #[serde(default = "GridParams::default_ops")]
    pub operations_center: [f64; 2],
    #[serde(default = "GridParams::default_output_size")]
    pub default_output_bytes: u64,
    #[serde(default = "GridParams::default_sandbox_size")]
    pub default_sandbox_bytes: u64,
}

impl GridParams {
    fn default_duration_min() -> u64 {
        30
    }
    fn default_duration_max() -> u64 {
        600
    }
    fn default_hop() -> u64 {
        1
    }
    fn default_info_refresh() -> u64 {
        crate::infosys::DEFAULT_REFRESH_PERIOD
    }
    fn default_ttl() -> u64 {
        crate::infosys::DEFAULT_REGISTRATION_TTL
    }
    fn default_crl_refresh() -> u64 {
        3_600
    }
    fn default_probe_period() -> u64 {
        30
    }
    fn default_probe_timeout() -> u64 {
        5
    }
    fn default_history() -> usize {
        4_096
    }
    fn default_intra_site() -> f64 {
        100.0
    }
    fn default_inter_site() -> f64 {
        10.0
    }
    fn default_ops() -> [f64; 2] {
        [43.72, 10.40]
    }
    fn default_output_size() -> u64 {
        100_000_000
    }
    fn default_sandbox_size() -> u64 {
        1_024
    }
}

impl Default for GridParams {
    fn default() -> Self {
        toml::from_str("").expect("all grid parameters have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaSpec {
    pub id: String,
    #[serde(default = "CaSpec::default_period")]
    pub crl_period: u64,
    #[serde(default = "CaSpec::default_lifetime")]
    pub crl_lifetime: u64,
    #[serde(default)]
    pub revoked: Vec<u64>,
}

impl CaSpec {
    fn default_period() -> u64 {
        3_600
    }
    fn default_lifetime() -> u64 {
        7_200
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustSpec {
    #[serde(default)]
    pub edg: Vec<String>,
    #[serde(default)]
    pub vdt: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoSpec {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub subject: String,
    pub ca: String,
    pub serial: u64,
    #[serde(default)]
    pub not_before: u64,
    #[serde(default = "UserSpec::forever")]
    pub not_after: u64,
    /// VOs the user belongs to, in registration order.
    #[serde(default)]
    pub vos: Vec<String>,
    #[serde(default = "yes")]
    pub signed: bool,
}

impl UserSpec {
    fn forever() -> u64 {
        u64::MAX / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeSpec {
    pub host: String,
    #[serde(default = "CeSpec::default_port")]
    pub port: u16,
    pub lrms: Lrms,
    #[serde(default = "CeSpec::default_queue")]
    pub queue: String,
    pub cpus: u32,
    #[serde(default)]
    pub runtime_environment: Vec<String>,
    /// Defaults to the site's supported VOs.
    #[serde(default)]
    pub authorized_vos: Option<Vec<String>>,
    /// Defaults to every SE of the site.
    #[serde(default)]
    pub close_ses: Option<Vec<String>>,
}

impl CeSpec {
    fn default_port() -> u16 {
        2119
    }
    fn default_queue() -> String {
        "workq".into()
    }

    pub fn id(&self) -> String {
        format!("{}:{}/{}-{}", self.host, self.port, self.lrms, self.queue)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeSpec {
    pub host: String,
    pub capacity_bytes: u64,
    #[serde(default = "SeSpec::default_protocols")]
    pub protocols: Vec<String>,
}

impl SeSpec {
    fn default_protocols() -> Vec<String> {
        vec!["gsiftp".into()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideSpec {
    pub subject: String,
    /// A local account name, or "DENY".
    pub account: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub country: String,
    pub continent: Continent,
    pub lat: f64,
    pub lon: f64,
    pub flavor: GridFlavor,
    #[serde(default)]
    pub glue: bool,
    /// Recorded only; authentication always goes through GSI.
    #[serde(default)]
    pub kerberos: bool,
    #[serde(default = "yes")]
    pub brokerable: bool,
    #[serde(default)]
    pub os: String,
    #[serde(default = "yes")]
    pub wn_outbound: bool,
    #[serde(default = "yes")]
    pub inbound_ports_open: bool,
    pub supported_vos: Vec<String>,
    #[serde(default)]
    pub overrides: Vec<OverrideSpec>,
    /// Worker nodes (EDG) or client nodes (VDT).
    #[serde(default = "SiteSpec::default_wn")]
    pub worker_nodes: u32,
    #[serde(default)]
    pub ce: Vec<CeSpec>,
    #[serde(default)]
    pub se: Vec<SeSpec>,
}

impl SiteSpec {
    fn default_wn() -> u32 {
        1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSpec {
    pub id: String,
    #[serde(default)]
    pub backup_of: Option<String>,
    /// Hosting location name, e.g. "INFN-Pisa".
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub lat: f64,
    #[serde(default)]
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrokerSpec {
    pub id: String,
    pub info_primary: String,
    pub info_backup: String,
    pub replica_catalog: String,
    #[serde(default)]
    pub glue_aware: bool,
    #[serde(default = "BrokerSpec::default_rank")]
    pub default_rank: String,
    #[serde(default)]
    pub strict_data: bool,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub lat: f64,
    #[serde(default)]
    pub lon: f64,
    /// Site whose network the broker sits on; used for sandbox transfer times.
    #[serde(default)]
    pub site: Option<String>,
    /// Continent of an off-site broker.
    #[serde(default = "BrokerSpec::default_continent")]
    pub continent: Continent,
}

impl BrokerSpec {
    fn default_rank() -> String {
        "other.FreeCPUs".into()
    }
    fn default_continent() -> Continent {
        Continent::EU
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSpec {
    pub id: String,
    #[serde(default)]
    pub location: String,
    #[serde(default)]
    pub lat: f64,
    #[serde(default)]
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    /// MB/s.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSpec {
    pub kind: FailureKind,
    pub target: String,
    pub start: u64,
    #[serde(default)]
    pub end: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    pub path: String,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaSpec {
    pub catalog: String,
    pub lfn: String,
    pub se: String,
    pub size: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub ca: Vec<CaSpec>,
    #[serde(default)]
    pub trust: TrustSpec,
    #[serde(default)]
    pub vo: Vec<VoSpec>,
    #[serde(default)]
    pub user: Vec<UserSpec>,
    #[serde(default)]
    pub site: Vec<SiteSpec>,
    #[serde(default)]
    pub index: Vec<IndexSpec>,
    #[serde(default)]
    pub broker: Vec<BrokerSpec>,
    #[serde(default)]
    pub replica_catalog: Vec<CatalogSpec>,
    #[serde(default)]
    pub link: Vec<LinkSpec>,
    #[serde(default)]
    pub failure: Vec<FailureSpec>,
    #[serde(default)]
    pub ui_file: Vec<FileSpec>,
    #[serde(default)]
    pub replica: Vec<ReplicaSpec>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
            ScenarioError::Parse { line, column, message: e.message().to_string() }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn site(&self, id: &str) -> Option<&SiteSpec> {
        self.site.iter().find(|s| s.id == id)
    }

    /// Structural checks the type system cannot express.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let g = &self.grid;
        if g.duration_min == 0 || g.duration_min > g.duration_max {
            return Err(invalid("grid", "need 0 < duration_min <= duration_max"));
        }
        if g.info_refresh == 0 || g.probe_period == 0 || g.crl_refresh == 0 {
            return Err(invalid("grid", "periods must be positive"));
        }
        for (name, bw) in [
            ("bandwidth_intra_site", g.bandwidth_intra_site),
            ("bandwidth_inter_site", g.bandwidth_inter_site),
            ("bandwidth_intercontinental", g.bandwidth_intercontinental),
        ] {
            if !(bw > 0.0 && bw.is_finite()) {
                return Err(invalid(format!("grid.{name}"), "bandwidth must be positive"));
            }
        }

        let cas = unique(self.ca.iter().map(|c| c.id.as_str()), "ca")?;
        for (i, c) in self.ca.iter().enumerate() {
            if c.crl_period == 0 || c.crl_lifetime == 0 {
                return Err(invalid(format!("ca[{i}]"), "CRL period and lifetime must be positive"));
            }
        }
        for ca in self.trust.edg.iter().chain(&self.trust.vdt) {
            if !cas.contains(ca.as_str()) {
                return Err(invalid("trust", format!("unknown CA {ca}")));
            }
        }
        let vos = unique(self.vo.iter().map(|v| v.name.as_str()), "vo")?;
        unique(self.user.iter().map(|u| u.subject.as_str()), "user")?;
        for (i, u) in self.user.iter().enumerate() {
            if !cas.contains(u.ca.as_str()) {
                return Err(invalid(format!("user[{i}].ca"), format!("unknown CA {}", u.ca)));
            }
            if u.not_before >= u.not_after {
                return Err(invalid(format!("user[{i}]"), "not_before must precede not_after"));
            }
            for v in &u.vos {
                if !vos.contains(v.as_str()) {
                    return Err(invalid(format!("user[{i}].vos"), format!("unknown VO {v}")));
                }
            }
        }

        let sites = unique(self.site.iter().map(|s| s.id.as_str()), "site")?;
        let mut hosts = BTreeSet::new();
        let mut ses = BTreeSet::new();
        let mut ces = BTreeSet::new();
        for (i, s) in self.site.iter().enumerate() {
            let at = format!("site[{i}] ({})", s.id);
            for v in &s.supported_vos {
                if !vos.contains(v.as_str()) {
                    return Err(invalid(&at, format!("unknown VO {v}")));
                }
            }
            let ce_hosts: BTreeSet<&str> = s.ce.iter().map(|c| c.host.as_str()).collect();
            let se_hosts: BTreeSet<&str> = s.se.iter().map(|c| c.host.as_str()).collect();
            match s.flavor {
                GridFlavor::Edg => {
                    if ce_hosts.iter().any(|h| se_hosts.contains(h)) {
                        return Err(invalid(&at, "EDG sites run CE and SE on distinct hosts"));
                    }
                    if !s.ce.is_empty() && s.worker_nodes == 0 {
                        return Err(invalid(&at, "EDG sites need at least one worker node"));
                    }
                }
                GridFlavor::Vdt => {
                    let all: BTreeSet<&str> = ce_hosts.union(&se_hosts).copied().collect();
                    if all.len() > 1 || (ce_hosts.is_empty() != se_hosts.is_empty()) {
                        return Err(invalid(&at, "VDT sites run one combined CE/SE server"));
                    }
                }
            }
            for h in ce_hosts.union(&se_hosts) {
                // a VDT server appears in both sets once per site
                if !hosts.insert(h.to_string()) {
                    return Err(invalid(&at, format!("host {h} appears at more than one site")));
                }
            }
            for se in &s.se {
                ses.insert(se.host.clone());
            }
            for c in &s.ce {
                if c.cpus == 0 {
                    return Err(invalid(&at, format!("CE {} has no CPUs", c.id())));
                }
                if !ces.insert(c.id()) {
                    return Err(invalid(&at, format!("duplicate CE {}", c.id())));
                }
                for v in c.authorized_vos.iter().flatten() {
                    if !vos.contains(v.as_str()) {
                        return Err(invalid(&at, format!("unknown VO {v}")));
                    }
                }
            }
        }
        for (i, s) in self.site.iter().enumerate() {
            for c in &s.ce {
                for se in c.close_ses.iter().flatten() {
                    if !ses.contains(se) {
                        return Err(invalid(format!("site[{i}] ({})", s.id), format!("unknown close SE {se}")));
                    }
                }
            }
        }
        if let Some(ui) = &g.ui_site {
            if !sites.contains(ui.as_str()) {
                return Err(invalid("grid.ui_site", format!("unknown site {ui}")));
            }
        }

        let indexes = unique(self.index.iter().map(|x| x.id.as_str()), "index")?;
        for (i, x) in self.index.iter().enumerate() {
            if let Some(b) = &x.backup_of {
                if !indexes.contains(b.as_str()) {
                    return Err(invalid(format!("index[{i}]"), format!("unknown index {b}")));
                }
            }
        }
        let catalogs = unique(self.replica_catalog.iter().map(|c| c.id.as_str()), "replica_catalog")?;
        unique(self.broker.iter().map(|b| b.id.as_str()), "broker")?;
        for (i, b) in self.broker.iter().enumerate() {
            let at = format!("broker[{i}] ({})", b.id);
            for ix in [&b.info_primary, &b.info_backup] {
                if !indexes.contains(ix.as_str()) {
                    return Err(invalid(&at, format!("unknown index {ix}")));
                }
            }
            if !catalogs.contains(b.replica_catalog.as_str()) {
                return Err(invalid(&at, format!("unknown replica catalog {}", b.replica_catalog)));
            }
            if crate::jdl::parse_expr(&b.default_rank).is_err() {
                return Err(invalid(&at, "default_rank does not parse"));
            }
            if let Some(s) = &b.site {
                if !sites.contains(s.as_str()) {
                    return Err(invalid(&at, format!("unknown site {s}")));
                }
            }
        }
        for (i, l) in self.link.iter().enumerate() {
            for s in [&l.a, &l.b] {
                if !sites.contains(s.as_str()) {
                    return Err(invalid(format!("link[{i}]"), format!("unknown site {s}")));
                }
            }
            if !(l.bandwidth > 0.0 && l.bandwidth.is_finite()) {
                return Err(invalid(format!("link[{i}]"), "bandwidth must be positive"));
            }
        }
        for (i, f) in self.failure.iter().enumerate() {
            let known = match f.kind {
                FailureKind::Gatekeeper | FailureKind::Gris | FailureKind::Gridftp | FailureKind::CrlFetch => {
                    sites.contains(f.target.as_str())
                }
                FailureKind::Index => indexes.contains(f.target.as_str()),
                FailureKind::Rb => self.broker.iter().any(|b| b.id == f.target),
                FailureKind::Rc => catalogs.contains(f.target.as_str()),
            };
            if !known {
                return Err(invalid(format!("failure[{i}]"), format!("unknown {} target {}", f.kind, f.target)));
            }
            if f.end.is_some_and(|e| e <= f.start) {
                return Err(invalid(format!("failure[{i}]"), "window end must follow start"));
            }
        }
        for (i, r) in self.replica.iter().enumerate() {
            if !catalogs.contains(r.catalog.as_str()) {
                return Err(invalid(format!("replica[{i}]"), format!("unknown catalog {}", r.catalog)));
            }
            if !ses.contains(&r.se) {
                return Err(invalid(format!("replica[{i}]"), format!("unknown SE {}", r.se)));
            }
        }
        Ok(())
    }
}

fn unique<'a>(ids: impl Iterator<Item = &'a str>, table: &str) -> Result<BTreeSet<&'a str>, ScenarioError> {
    let mut seen = BTreeSet::new();
    for (i, id) in ids.enumerate() {
        if id.is_empty() {
            return Err(invalid(format!("{table}[{i}]"), "empty id"));
        }
        if !seen.insert(id) {
            return Err(invalid(format!("{table}[{i}]"), format!("duplicate id {id}")));
        }
    }
    Ok(seen)
}
