//! Operations-centre monitoring: periodic probes of every site service and
//! the central services, tri-state status, filtered aggregation and the
//! world-map export.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fabric::{distance_km, Fabric, FailureKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Gatekeeper,
    Gris,
    Gridftp,
    Rb,
    Rc,
    Index,
}

impl ProbeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeKind::Gatekeeper => "gatekeeper",
            ProbeKind::Gris => "gris",
            ProbeKind::Gridftp => "gridftp",
            ProbeKind::Rb => "rb",
            ProbeKind::Rc => "rc",
            ProbeKind::Index => "index",
        }
    }

    fn failure(self) -> FailureKind {
        match self {
            ProbeKind::Gatekeeper => FailureKind::Gatekeeper,
            ProbeKind::Gris => FailureKind::Gris,
            ProbeKind::Gridftp => FailureKind::Gridftp,
            ProbeKind::Rb => FailureKind::Rb,
            ProbeKind::Rc => FailureKind::Rc,
            ProbeKind::Index => FailureKind::Index,
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Up,
    Warn,
    Down,
}

impl Status {
    pub fn color(self) -> &'static str {
        match self {
            Status::Up => "green",
            Status::Warn => "yellow",
            Status::Down => "red",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Up => "UP",
            Status::Warn => "WARN",
            Status::Down => "DOWN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    /// Site id, or the id of a central service.
    pub target: String,
    pub kind: ProbeKind,
    pub period: u64,
    pub timeout: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub t: u64,
    pub target: String,
    pub kind: ProbeKind,
    pub status: Status,
    pub latency_ms: u64,
    pub detail: String,
}

/// A service outside any site: broker, catalogue or top index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralService {
    pub id: String,
    pub kind: ProbeKind,
    pub location: String,
    pub lat: f64,
    pub lon: f64,
}

/// Conditions the probes read besides failure windows.
pub trait ProbeContext {
    /// CAs whose CRL copy at `site` is missing or out of date.
    fn stale_crls(&self, site: &str) -> Vec<String>;
    /// Whether any registration of the site's index entries has lapsed.
    fn stale_registration(&self, site: &str) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MonitorError {
    #[error("unknown {what} {value:?} in filter")]
    UnknownFilterValue { what: String, value: String },
    #[error("cannot parse filter {0:?}: expected vo=, country= or site=")]
    BadFilter(String),
    #[error("map document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "by", content = "value", rename_all = "lowercase")]
pub enum MapFilter {
    #[default]
    None,
    Vo(String),
    Country(String),
    Site(String),
}

impl FromStr for MapFilter {
    type Err = MonitorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(MapFilter::None);
        }
        let (k, v) = s.split_once('=').ok_or_else(|| MonitorError::BadFilter(s.to_string()))?;
        if v.is_empty() {
            return Err(MonitorError::BadFilter(s.to_string()));
        }
        match k {
            "vo" => Ok(MapFilter::Vo(v.to_string())),
            "country" => Ok(MapFilter::Country(v.to_string())),
            "site" => Ok(MapFilter::Site(v.to_string())),
            _ => Err(MonitorError::BadFilter(s.to_string())),
        }
    }
}

impl fmt::Display for MapFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapFilter::None => f.write_str("none"),
            MapFilter::Vo(v) => write!(f, "vo={v}"),
            MapFilter::Country(v) => write!(f, "country={v}"),
            MapFilter::Site(v) => write!(f, "site={v}"),
        }
    }
}

/// Synthetic host gauges, all fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub load: f64,
    pub memory: f64,
    pub swap: f64,
    pub disk: f64,
    pub network: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceStatus {
    pub kind: ProbeKind,
    pub status: Status,
    pub latency_ms: u64,
    pub detail: String,
    pub checked_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteStatus {
    pub id: String,
    pub name: String,
    pub country: String,
    pub continent: String,
    pub lat: f64,
    pub lon: f64,
    pub flavor: String,
    pub vos: Vec<String>,
    pub services: Vec<ServiceStatus>,
    pub rollup: Status,
    pub color: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralStatus {
    pub id: String,
    pub location: String,
    pub lat: f64,
    pub lon: f64,
    pub service: ServiceStatus,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub t: u64,
    pub filter: MapFilter,
    pub sites: Vec<SiteStatus>,
    pub central: Vec<CentralStatus>,
}

#[derive(Debug, Clone)]
pub struct Monitor {
    probes: Vec<Probe>,
    central: Vec<CentralService>,
    ops_center: (f64, f64),
    capacity: usize,
    history: VecDeque<ProbeResult>,
    latest: BTreeMap<(String, ProbeKind), ProbeResult>,
    next_due: BTreeMap<usize, u64>,
}

const SITE_KINDS: [ProbeKind; 3] = [ProbeKind::Gatekeeper, ProbeKind::Gris, ProbeKind::Gridftp];

impl Monitor {
    /// One gatekeeper, GRIS and GridFTP probe per site plus one per central
    /// service, all on the fabric's probe period.
    pub fn new<T>(fabric: &Fabric<T>, central: Vec<CentralService>) -> Self {
        let p = fabric.params();
        let mut probes = Vec::new();
        for s in fabric.sites() {
            for kind in SITE_KINDS {
                probes.push(Probe { target: s.id.clone(), kind, period: p.probe_period.max(1), timeout: p.probe_timeout });
            }
        }
        for c in &central {
            probes.push(Probe { target: c.id.clone(), kind: c.kind, period: p.probe_period.max(1), timeout: p.probe_timeout });
        }
        Self {
            probes,
            central,
            ops_center: (p.operations_center[0], p.operations_center[1]),
            capacity: p.history_capacity.max(1),
            history: VecDeque::new(),
            latest: BTreeMap::new(),
            next_due: BTreeMap::new(),
        }
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn history(&self) -> &VecDeque<ProbeResult> {
        &self.history
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn latest(&self, target: &str, kind: ProbeKind) -> Option<&ProbeResult> {
        self.latest.get(&(target.to_string(), kind))
    }

    fn coords<T>(&self, fabric: &Fabric<T>, target: &str) -> Option<(f64, f64)> {
        fabric
            .site(target)
            .map(|s| (s.lat, s.lon))
            .or_else(|| self.central.iter().find(|c| c.id == target).map(|c| (c.lat, c.lon)))
    }

    /// Runs every probe that is due at `now`.
    pub fn run_probes<T>(&mut self, now: u64, fabric: &Fabric<T>, ctx: &dyn ProbeContext) -> Vec<ProbeResult> {
        let mut out = Vec::new();
        for (i, p) in self.probes.iter().enumerate() {
            let due = self.next_due.get(&i).copied().unwrap_or(0);
            if due > now {
                continue;
            }
            self.next_due.insert(i, now + p.period);
            let km = self.coords(fabric, &p.target).map_or(0.0, |c| distance_km(self.ops_center, c));
            let latency = 5 + (km / 100.0).round() as u64;
            let (status, latency_ms, detail) = if fabric.is_down(p.kind.failure(), &p.target, now) {
                (Status::Down, p.timeout * 1000, format!("no response within {} s", p.timeout))
            } else {
                let warn = match p.kind {
                    ProbeKind::Gatekeeper => {
                        let stale = ctx.stale_crls(&p.target);
                        (!stale.is_empty()).then(|| format!("stale CRL for {}", stale.join(",")))
                    }
                    ProbeKind::Gris => ctx.stale_registration(&p.target).then(|| "stale index registration".to_string()),
                    _ => None,
                };
                match warn {
                    Some(d) => (Status::Warn, latency, d),
                    None => (Status::Up, latency, "ok".to_string()),
                }
            };
            out.push(ProbeResult { t: now, target: p.target.clone(), kind: p.kind, status, latency_ms, detail });
        }
        for r in &out {
            self.latest.insert((r.target.clone(), r.kind), r.clone());
            self.history.push_back(r.clone());
            while self.history.len() > self.capacity {
                self.history.pop_front();
            }
        }
        out
    }

    fn service(&self, target: &str, kind: ProbeKind) -> ServiceStatus {
        match self.latest(target, kind) {
            Some(r) => ServiceStatus {
                kind,
                status: r.status,
                latency_ms: r.latency_ms,
                detail: r.detail.clone(),
                checked_at: Some(r.t),
            },
            None => ServiceStatus { kind, status: Status::Up, latency_ms: 0, detail: "not yet probed".into(), checked_at: None },
        }
    }

    /// The map at `now` under `filter`. `vos` are the VO names the grid knows.
    pub fn aggregate<T>(&self, now: u64, fabric: &Fabric<T>, filter: &MapFilter, vos: &[String]) -> Result<MapSnapshot, MonitorError> {
        let unknown = |what: &str, value: &str| MonitorError::UnknownFilterValue { what: what.into(), value: value.into() };
        match filter {
            MapFilter::Vo(v) if !vos.contains(v) => return Err(unknown("vo", v)),
            MapFilter::Country(c) if !fabric.sites().any(|s| s.country == *c) => return Err(unknown("country", c)),
            MapFilter::Site(x) if fabric.site(x).is_none() => return Err(unknown("site", x)),
            _ => {}
        }
        let mut sites = Vec::new();
        for s in fabric.sites() {
            let ces: Vec<_> = s.ces.iter().filter_map(|c| fabric.ce(c)).collect();
            let site_vos: BTreeSet<String> = ces.iter().flat_map(|c| c.authorized_vos.iter().cloned()).collect();
            let keep = match filter {
                MapFilter::None => true,
                MapFilter::Vo(v) => site_vos.contains(v),
                MapFilter::Country(c) => s.country == *c,
                MapFilter::Site(x) => s.id == *x,
            };
            if !keep {
                continue;
            }
            let services: Vec<ServiceStatus> = SITE_KINDS.iter().map(|k| self.service(&s.id, *k)).collect();
            let rollup = services.iter().map(|x| x.status).max().unwrap_or(Status::Up);
            sites.push(SiteStatus {
                id: s.id.clone(),
                name: s.name.clone(),
                country: s.country.clone(),
                continent: s.continent.to_string(),
                lat: s.lat,
                lon: s.lon,
                flavor: s.flavor.to_string(),
                vos: site_vos.into_iter().collect(),
                services,
                rollup,
                color: rollup.color().to_string(),
                metrics: site_metrics(fabric, &s.id),
            });
        }
        let central = self
            .central
            .iter()
            .map(|c| {
                let service = self.service(&c.id, c.kind);
                CentralStatus {
                    id: c.id.clone(),
                    location: c.location.clone(),
                    lat: c.lat,
                    lon: c.lon,
                    color: service.status.color().to_string(),
                    service,
                }
            })
            .collect();
        Ok(MapSnapshot { t: now, filter: filter.clone(), sites, central })
    }
}

/// Gauges derived from fabric state: load is running over total CPUs, disk
/// is used over total SE bytes; memory, swap and network follow load.
pub fn site_metrics<T>(fabric: &Fabric<T>, site: &str) -> Metrics {
    let Some(s) = fabric.site(site) else { return Metrics::default() };
    let (mut running, mut cpus, mut waiting) = (0usize, 0u32, 0usize);
    for c in s.ces.iter().filter_map(|c| fabric.ce(c)) {
        running += c.running_jobs();
        waiting += c.waiting_jobs();
        cpus += c.total_cpus;
    }
    let (mut used, mut total) = (0u64, 0u64);
    for x in s.ses.iter().filter_map(|x| fabric.se(x)) {
        used += x.used_bytes();
        total += x.total_bytes;
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { (a / b).min(1.0) } else { 0.0 };
    let load = ratio(running as f64, cpus as f64);
    let round = |x: f64| (x * 1000.0).round() / 1000.0;
    Metrics {
        load: round(load),
        memory: round(0.2 + 0.6 * load),
        swap: round(ratio(waiting as f64, (cpus.max(1) * 4) as f64)),
        disk: round(ratio(used as f64, total as f64)),
        network: round(ratio(running as f64, 20.0)),
    }
}

/// The map document served to the portal.
pub fn export_map(snapshot: &MapSnapshot) -> String {
    serde_json::to_string_pretty(snapshot).expect("snapshot serializes")
}

pub fn parse_map(text: &str) -> Result<MapSnapshot, MonitorError> {
    serde_json::from_str(text).map_err(|e| MonitorError::Document(e.to_string()))
}
