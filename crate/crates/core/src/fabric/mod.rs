//! Discrete-event model of the site fabric: sites of two flavors, computing
//! elements backed by FIFO batch queues, storage elements, network links,
//! failure windows and the information providers that publish it all.

mod queue;
mod scenario;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auth::{GridFlavor, MappingOverride};
use crate::infosys::{DirectoryEntry, DistinguishedName, Rdn, EDG_CE_CLASS, EDG_SE_CLASS, GLUE_CE_CLASS, GLUE_SE_CLASS};

pub use queue::EventQueue;
pub use scenario::{
    BrokerSpec, CaSpec, CatalogSpec, CeSpec, FailureSpec, FileSpec, GridParams, IndexSpec, LinkSpec, OverrideSpec,
    ReplicaSpec, Scenario, ScenarioError, SeSpec, SiteSpec, TrustSpec, UserSpec, VoSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Continent {
    EU,
    US,
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Continent::EU => "EU",
            Continent::US => "US",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lrms {
    Pbs,
    Lsf,
    Condor,
}

impl fmt::Display for Lrms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lrms::Pbs => "pbs",
            Lrms::Lsf => "lsf",
            Lrms::Condor => "condor",
        })
    }
}

/// What a failure window takes out. Site-scoped kinds target a site id; the
/// rest target an index, broker or catalogue id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Gatekeeper,
    Gris,
    Gridftp,
    CrlFetch,
    Index,
    Rb,
    Rc,
}

impl FailureKind {
    pub const ALL: [FailureKind; 7] = [
        FailureKind::Gatekeeper,
        FailureKind::Gris,
        FailureKind::Gridftp,
        FailureKind::CrlFetch,
        FailureKind::Index,
        FailureKind::Rb,
        FailureKind::Rc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::Gatekeeper => "gatekeeper",
            FailureKind::Gris => "gris",
            FailureKind::Gridftp => "gridftp",
            FailureKind::CrlFetch => "crl_fetch",
            FailureKind::Index => "index",
            FailureKind::Rb => "rb",
            FailureKind::Rc => "rc",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FailureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FailureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown failure kind {s}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureWindow {
    pub kind: FailureKind,
    pub target: String,
    pub start: u64,
    /// Exclusive; `None` means until the end of the run.
    pub end: Option<u64>,
}

impl FailureWindow {
    pub fn covers(&self, t: u64) -> bool {
        self.start <= t && self.end.is_none_or(|e| t < e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub wn_outbound: bool,
    pub inbound_ports_open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub name: String,
    pub country: String,
    pub continent: Continent,
    pub lat: f64,
    pub lon: f64,
    pub flavor: GridFlavor,
    pub glue: bool,
    pub kerberos: bool,
    pub brokerable: bool,
    pub os: String,
    pub connectivity: Connectivity,
    pub supported_vos: Vec<String>,
    pub overrides: Vec<(String, MappingOverride)>,
    pub worker_nodes: u32,
    pub ces: Vec<String>,
    pub ses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueuedJob {
    pub job: String,
    pub duration: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunningJob {
    pub started: u64,
    pub ends: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CeStats {
    pub enqueued: u64,
    pub completed: u64,
    pub cancelled: u64,
    pub failed: u64,
}

/// A gatekeeper in front of one batch queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputingElementSim {
    pub id: String,
    pub site: String,
    pub host: String,
    pub port: u16,
    pub lrms: Lrms,
    pub queue_name: String,
    pub total_cpus: u32,
    pub queue: VecDeque<QueuedJob>,
    pub running: BTreeMap<String, RunningJob>,
    pub runtime_environment: Vec<String>,
    pub authorized_vos: Vec<String>,
    pub close_ses: Vec<String>,
    pub stats: CeStats,
}

impl ComputingElementSim {
    pub fn free_cpus(&self) -> u32 {
        self.total_cpus - self.running.len() as u32
    }

    pub fn waiting_jobs(&self) -> usize {
        self.queue.len()
    }

    pub fn running_jobs(&self) -> usize {
        self.running.len()
    }

    pub fn holds(&self, job: &str) -> bool {
        self.running.contains_key(job) || self.queue.iter().any(|q| q.job == job)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageElementSim {
    pub id: String,
    pub site: String,
    pub total_bytes: u64,
    pub protocols: Vec<String>,
    pub files: BTreeMap<String, u64>,
}

impl StorageElementSim {
    pub fn used_bytes(&self) -> u64 {
        self.files.values().sum()
    }

    pub fn free_bytes(&self) -> u64 {
        self.total_bytes.saturating_sub(self.used_bytes())
    }

    /// Whether `size` bytes fit at `path`, counting any file it would replace.
    pub fn fits(&self, path: &str, size: u64) -> bool {
        let replaced = self.files.get(path).copied().unwrap_or(0);
        self.used_bytes() - replaced + size <= self.total_bytes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FabricError {
    #[error("unknown computing element {0}")]
    UnknownCe(String),
    #[error("unknown storage element {0}")]
    UnknownSe(String),
    #[error("unknown site {0}")]
    UnknownSite(String),
    #[error("gatekeeper of {0} is down")]
    GatekeeperDown(String),
    #[error("job {0} is already known to this CE")]
    DuplicateJob(String),
    #[error("storage element {se} lacks space: {needed} bytes needed, {free} free")]
    NoSpace { se: String, needed: u64, free: u64 },
}

#[derive(Debug, Clone, PartialEq)]
enum SimEvent<T> {
    JobFinished { ce: String, job: String, ends: u64 },
    External(T),
}

/// Something that happened while the clock moved.
#[derive(Debug, Clone, PartialEq)]
pub enum FabricEvent<T> {
    JobStarted { t: u64, ce: String, job: String },
    JobFinished { t: u64, ce: String, job: String, started: u64 },
    External { t: u64, payload: T },
}

impl<T> FabricEvent<T> {
    pub fn time(&self) -> u64 {
        match self {
            FabricEvent::JobStarted { t, .. } | FabricEvent::JobFinished { t, .. } | FabricEvent::External { t, .. } => *t,
        }
    }
}

/// The simulated sites plus their clock. `T` is the payload of events the
/// owner schedules for itself; they come back out of [`Fabric::step`] in
/// time order, interleaved with the fabric's own events.
#[derive(Debug, Clone)]
pub struct Fabric<T> {
    params: GridParams,
    queue: EventQueue<SimEvent<T>>,
    rng: ChaCha8Rng,
    sites: BTreeMap<String, Site>,
    ces: BTreeMap<String, ComputingElementSim>,
    ses: BTreeMap<String, StorageElementSim>,
    failures: Vec<FailureWindow>,
    links: BTreeMap<(String, String), f64>,
    ui_files: BTreeMap<String, u64>,
    wn_files: BTreeMap<String, BTreeMap<String, u64>>,
}

fn link_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl<T> Fabric<T> {
    pub fn from_scenario(s: &Scenario, seed: u64) -> Self {
        let mut sites = BTreeMap::new();
        let mut ces = BTreeMap::new();
        let mut ses = BTreeMap::new();
        for spec in &s.site {
            let se_ids: Vec<String> = spec.se.iter().map(|x| x.host.clone()).collect();
            let mut ce_ids = Vec::new();
            for c in &spec.ce {
                let id = c.id();
                ce_ids.push(id.clone());
                ces.insert(
                    id.clone(),
                    ComputingElementSim {
                        id,
                        site: spec.id.clone(),
                        host: c.host.clone(),
                        port: c.port,
                        lrms: c.lrms,
                        queue_name: c.queue.clone(),
                        total_cpus: c.cpus,
                        queue: VecDeque::new(),
                        running: BTreeMap::new(),
                        runtime_environment: c.runtime_environment.clone(),
                        authorized_vos: c.authorized_vos.clone().unwrap_or_else(|| spec.supported_vos.clone()),
                        close_ses: c.close_ses.clone().unwrap_or_else(|| se_ids.clone()),
                        stats: CeStats::default(),
                    },
                );
            }
            for x in &spec.se {
                ses.insert(
                    x.host.clone(),
                    StorageElementSim {
                        id: x.host.clone(),
                        site: spec.id.clone(),
                        total_bytes: x.capacity_bytes,
                        protocols: x.protocols.clone(),
                        files: BTreeMap::new(),
                    },
                );
            }
            let overrides = spec
                .overrides
                .iter()
                .map(|o| {
                    let rule = if o.account == "DENY" {
                        MappingOverride::Deny
                    } else {
                        MappingOverride::Account(o.account.clone())
                    };
                    (o.subject.clone(), rule)
                })
                .collect();
            sites.insert(
                spec.id.clone(),
                Site {
                    id: spec.id.clone(),
                    name: if spec.name.is_empty() { spec.id.clone() } else { spec.name.clone() },
                    country: spec.country.clone(),
                    continent: spec.continent,
                    lat: spec.lat,
                    lon: spec.lon,
                    flavor: spec.flavor,
                    glue: spec.glue,
                    kerberos: spec.kerberos,
                    brokerable: spec.brokerable,
                    os: spec.os.clone(),
                    connectivity: Connectivity {
                        wn_outbound: spec.wn_outbound,
                        inbound_ports_open: spec.inbound_ports_open,
                    },
                    supported_vos: spec.supported_vos.clone(),
                    overrides,
                    worker_nodes: spec.worker_nodes,
                    ces: ce_ids,
                    ses: se_ids,
                },
            );
        }
        let failures = s
            .failure
            .iter()
            .map(|f| FailureWindow { kind: f.kind, target: f.target.clone(), start: f.start, end: f.end })
            .collect();
        let links = s.link.iter().map(|l| (link_key(&l.a, &l.b), l.bandwidth)).collect();
        let ui_files = s.ui_file.iter().map(|f| (f.path.clone(), f.size)).collect();
        Self {
            params: s.grid.clone(),
            queue: EventQueue::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            sites,
            ces,
            ses,
            failures,
            links,
            ui_files,
            wn_files: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> u64 {
        self.queue.now()
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> {
        self.sites.values()
    }

    pub fn site(&self, id: &str) -> Option<&Site> {
        self.sites.get(id)
    }

    pub fn site_mut(&mut self, id: &str) -> Option<&mut Site> {
        self.sites.get_mut(id)
    }

    pub fn ces(&self) -> impl Iterator<Item = &ComputingElementSim> {
        self.ces.values()
    }

    pub fn ce(&self, id: &str) -> Option<&ComputingElementSim> {
        self.ces.get(id)
    }

    pub fn ses(&self) -> impl Iterator<Item = &StorageElementSim> {
        self.ses.values()
    }

    pub fn se(&self, id: &str) -> Option<&StorageElementSim> {
        self.ses.get(id)
    }

    /// Writes a file on an SE, replacing any file at the same path.
    pub fn store(&mut self, se: &str, path: &str, size: u64) -> Result<(), FabricError> {
        let s = self.ses.get_mut(se).ok_or_else(|| FabricError::UnknownSe(se.to_string()))?;
        if !s.fits(path, size) {
            return Err(FabricError::NoSpace { se: se.to_string(), needed: size, free: s.free_bytes() });
        }
        s.files.insert(path.to_string(), size);
        Ok(())
    }

    pub fn delete(&mut self, se: &str, path: &str) -> Option<u64> {
        self.ses.get_mut(se)?.files.remove(path)
    }

    pub fn ui_files(&self) -> &BTreeMap<String, u64> {
        &self.ui_files
    }

    pub fn put_ui_file(&mut self, path: &str, size: u64) {
        self.ui_files.insert(path.to_string(), size);
    }

    pub fn wn_files(&self, site: &str) -> Option<&BTreeMap<String, u64>> {
        self.wn_files.get(site)
    }

    pub fn put_wn_file(&mut self, site: &str, path: &str, size: u64) {
        self.wn_files.entry(site.to_string()).or_default().insert(path.to_string(), size);
    }

    // ----- failures -----

    pub fn add_failure(&mut self, w: FailureWindow) {
        self.failures.push(w);
    }

    pub fn failures(&self) -> &[FailureWindow] {
        &self.failures
    }

    pub fn is_down(&self, kind: FailureKind, target: &str, t: u64) -> bool {
        self.failures.iter().any(|w| w.kind == kind && w.target == target && w.covers(t))
    }

    /// Every instant at which some failure window opens or closes.
    pub fn failure_edges(&self) -> BTreeSet<u64> {
        self.failures.iter().flat_map(|w| std::iter::once(w.start).chain(w.end)).collect()
    }

    // ----- network -----

    /// MB/s between two sites.
    pub fn bandwidth(&self, a: &str, b: &str) -> f64 {
        if let Some(bw) = self.links.get(&link_key(a, b)) {
            return *bw;
        }
        if a == b {
            return self.params.bandwidth_intra_site;
        }
        match (self.sites.get(a), self.sites.get(b)) {
            (Some(x), Some(y)) if x.continent == y.continent => self.params.bandwidth_inter_site,
            _ => self.params.bandwidth_intercontinental,
        }
    }

    /// Whole seconds to move `bytes` between two sites, at least one for a
    /// non-empty transfer.
    pub fn transfer_secs(&self, a: &str, b: &str, bytes: u64) -> u64 {
        if bytes == 0 {
            return 0;
        }
        let secs = bytes as f64 / (self.bandwidth(a, b) * 1_000_000.0);
        (secs.ceil() as u64).max(1)
    }

    // ----- clock -----

    pub fn schedule(&mut self, t: u64, payload: T) {
        self.queue.push(t, SimEvent::External(payload));
    }

    /// Drops pending owner events that fail `keep`.
    pub fn retain_scheduled(&mut self, mut keep: impl FnMut(&T) -> bool) {
        self.queue.retain(|e| match e {
            SimEvent::External(p) => keep(p),
            _ => true,
        });
    }

    pub fn next_event_time(&self) -> Option<u64> {
        self.queue.peek_time()
    }

    /// Processes the earliest pending event at or before `until`, returning
    /// what it caused, or `None` when nothing is due.
    pub fn step(&mut self, until: u64) -> Option<Vec<FabricEvent<T>>> {
        let (t, ev) = self.queue.pop_until(until)?;
        Some(match ev {
            SimEvent::External(payload) => vec![FabricEvent::External { t, payload }],
            SimEvent::JobFinished { ce, job, ends } => {
                let Some(c) = self.ces.get_mut(&ce) else { return Some(Vec::new()) };
                // a cancelled job leaves a stale completion behind
                match c.running.get(&job) {
                    Some(r) if r.ends == ends => {}
                    _ => return Some(Vec::new()),
                }
                let r = c.running.remove(&job).expect("checked");
                c.stats.completed += 1;
                let mut out = vec![FabricEvent::JobFinished { t, ce: ce.clone(), job, started: r.started }];
                out.extend(self.start_queued(&ce));
                out
            }
        })
    }

    /// Runs every event up to `until` and parks the clock there.
    pub fn advance(&mut self, until: u64) -> Vec<FabricEvent<T>> {
        let mut out = Vec::new();
        while let Some(evs) = self.step(until) {
            out.extend(evs);
        }
        self.queue.set_now(until);
        out
    }

    pub fn set_now(&mut self, t: u64) {
        self.queue.set_now(t);
    }

    /// Log-uniform duration within the configured bounds, whole seconds.
    pub fn draw_duration(&mut self) -> u64 {
        let (lo, hi) = (self.params.duration_min as f64, self.params.duration_max as f64);
        let u: f64 = self.rng.random();
        let d = (lo.ln() + u * (hi.ln() - lo.ln())).exp().round() as u64;
        d.clamp(self.params.duration_min, self.params.duration_max)
    }

    /// Hands a job to a CE's batch queue. The duration is fixed now, drawn
    /// from the rng unless given.
    pub fn enqueue(&mut self, ce: &str, job: &str, duration: Option<u64>) -> Result<Vec<FabricEvent<T>>, FabricError> {
        let site = self.ces.get(ce).ok_or_else(|| FabricError::UnknownCe(ce.to_string()))?.site.clone();
        if self.is_down(FailureKind::Gatekeeper, &site, self.now()) {
            return Err(FabricError::GatekeeperDown(ce.to_string()));
        }
        if self.ces[ce].holds(job) {
            return Err(FabricError::DuplicateJob(job.to_string()));
        }
        let duration = match duration {
            Some(d) => d.max(1),
            None => self.draw_duration(),
        };
        let c = self.ces.get_mut(ce).expect("checked");
        c.queue.push_back(QueuedJob { job: job.to_string(), duration });
        c.stats.enqueued += 1;
        Ok(self.start_queued(ce))
    }

    fn start_queued(&mut self, ce: &str) -> Vec<FabricEvent<T>> {
        let now = self.now();
        let mut out = Vec::new();
        let c = self.ces.get_mut(ce).expect("known CE");
        while c.free_cpus() > 0 {
            let Some(q) = c.queue.pop_front() else { break };
            let ends = now + q.duration;
            c.running.insert(q.job.clone(), RunningJob { started: now, ends });
            self.queue.push(ends, SimEvent::JobFinished { ce: ce.to_string(), job: q.job.clone(), ends });
            out.push(FabricEvent::JobStarted { t: now, ce: ce.to_string(), job: q.job });
        }
        out
    }

    fn remove(&mut self, ce: &str, job: &str, failed: bool) -> Option<Vec<FabricEvent<T>>> {
        let c = self.ces.get_mut(ce)?;
        let was_running = c.running.remove(job).is_some();
        if !was_running {
            let pos = c.queue.iter().position(|q| q.job == job)?;
            c.queue.remove(pos);
        }
        if failed {
            c.stats.failed += 1;
        } else {
            c.stats.cancelled += 1;
        }
        Some(if was_running { self.start_queued(ce) } else { Vec::new() })
    }

    /// Removes a queued or running job. `None` if the CE does not hold it.
    pub fn cancel(&mut self, ce: &str, job: &str) -> Option<Vec<FabricEvent<T>>> {
        self.remove(ce, job, false)
    }

    /// Like [`Fabric::cancel`] but counted as a failure.
    pub fn fail_job(&mut self, ce: &str, job: &str) -> Option<Vec<FabricEvent<T>>> {
        self.remove(ce, job, true)
    }

    // ----- information providers -----

    /// Hosts that run a GRIS, with their site: every CE and SE host.
    pub fn gris_hosts(&self) -> Vec<(String, String)> {
        let mut hosts = BTreeSet::new();
        for c in self.ces.values() {
            hosts.insert((c.site.clone(), c.host.clone()));
        }
        for s in self.ses.values() {
            hosts.insert((s.site.clone(), s.id.clone()));
        }
        hosts.into_iter().collect()
    }

    /// Entries the GRIS on `host` publishes right now.
    pub fn host_entries(&self, host: &str, now: u64) -> Vec<DirectoryEntry> {
        let source = format!("gris:{host}");
        let mut out = Vec::new();
        let ces: Vec<&ComputingElementSim> = self.ces.values().filter(|c| c.host == host).collect();
        let ses: Vec<&StorageElementSim> = self.ses.values().filter(|s| s.id == host).collect();
        let Some(site_id) = ces.first().map(|c| &c.site).or(ses.first().map(|s| &s.site)) else {
            return out;
        };
        let site = &self.sites[site_id];
        let base = site_base(site_id);
        let cpus: u32 = ces.iter().map(|c| c.total_cpus).sum();
        out.push(
            DirectoryEntry::new(base.child(rdn("mds-hostname", host)), &source, now)
                .with_class("MdsHost")
                .with_attr("Mds-Hostname", host)
                .with_attr("Mds-Os-name", if site.os.is_empty() { "linux" } else { &site.os })
                .with_attr("Mds-Cpu-Total-count", cpus),
        );
        for c in ces {
            let mut classes = vec![(EDG_CE_CLASS, "ceid", None)];
            if site.glue {
                classes.push((GLUE_CE_CLASS, "glueceuniqueid", Some("GlueCEUniqueID")));
            }
            for (class, leaf, key) in classes {
                let mut e = DirectoryEntry::new(base.child(rdn(leaf, &c.id)), &source, now)
                    .with_class(class)
                    .with_attr("CEId", &c.id)
                    .with_attr("LRMSType", c.lrms)
                    .with_attr("TotalCPUs", c.total_cpus)
                    .with_attr("FreeCPUs", c.free_cpus())
                    .with_attr("RunningJobs", c.running_jobs())
                    .with_attr("WaitingJobs", c.waiting_jobs())
                    .with_list("RunTimeEnvironment", c.runtime_environment.iter())
                    .with_list("AuthorizedVOs", c.authorized_vos.iter())
                    .with_list("CloseSEs", c.close_ses.iter())
                    .with_attr("HostName", &c.host)
                    .with_attr("SiteId", site_id);
                if let Some(k) = key {
                    e = e.with_attr(k, &c.id);
                }
                out.push(e);
            }
        }
        for s in ses {
            let mut classes = vec![(EDG_SE_CLASS, "seid", None)];
            if site.glue {
                classes.push((GLUE_SE_CLASS, "glueseuniqueid", Some("GlueSEUniqueID")));
            }
            for (class, leaf, key) in classes {
                let mut e = DirectoryEntry::new(base.child(rdn(leaf, &s.id)), &source, now)
                    .with_class(class)
                    .with_attr("SEId", &s.id)
                    .with_attr("TotalBytes", s.total_bytes)
                    .with_attr("UsedBytes", s.used_bytes())
                    .with_list("Protocols", s.protocols.iter())
                    .with_attr("HostName", &s.id)
                    .with_attr("SiteId", site_id);
                if let Some(k) = key {
                    e = e.with_attr(k, &s.id);
                }
                out.push(e);
            }
        }
        out
    }

    /// Everything every GRIS publishes right now.
    pub fn snapshot_providers(&self) -> Vec<DirectoryEntry> {
        let now = self.now();
        self.gris_hosts().iter().flat_map(|(_, h)| self.host_entries(h, now)).collect()
    }
}

fn rdn(attr: &str, value: &str) -> Rdn {
    Rdn::new(attr, value).expect("fabric ids are valid rdn values")
}

/// `mds-vo-name=<site>,o=grid`: the subtree a site's resources publish under.
pub fn site_base(site: &str) -> DistinguishedName {
    DistinguishedName::new(vec![rdn("mds-vo-name", site), rdn("o", "grid")]).expect("non-empty")
}

/// Great-circle distance in kilometres.
pub fn distance_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1, la2, lo2) = (a.0.to_radians(), a.1.to_radians(), b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * 6_371.0 * h.sqrt().asin()
}
