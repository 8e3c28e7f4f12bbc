//! The whole testbed in one owner: fabric and clock, information indexes,
//! trust and VO state, brokers, catalogues, bookkeeping and monitoring.
//!
//! Jobs move through their lifecycle on scheduled hops one `hop_latency`
//! apart; sandbox and data transfers add their simulated transfer time.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::auth::{
    authenticate, authorize, mkgridmap, AuthError, CaRegistry, CertificateAuthority, CertificateRecord, CrlDistribution,
    GridFlavor, GridMapfile, SitePolicy, VoRegistry,
};
use crate::datamgmt::{self, DataError, Endpoint, LogicalFileName, PhysicalFileName, ReplicaCatalog};
use crate::fabric::{Continent, Fabric, FabricError, FabricEvent, FailureKind, FailureWindow, Scenario, ScenarioError};
use crate::infosys::{
    DirectoryEntry, DistinguishedName, IndexLevel, InfoError, InfoSource, InfoSystem, QueryFilter, Schema, Scope,
    EDG_CE_CLASS, EDG_SE_CLASS, GLUE_CE_CLASS, GLUE_SE_CLASS,
};
use crate::jdl::{evaluate, parse_expr, AttrMap, EvalEnv, JdlDocument, JdlError, Value};
use crate::monitor::{CentralService, MapFilter, MapSnapshot, Monitor, MonitorError, ProbeContext, ProbeKind, ProbeResult};
use crate::wms::{
    rank_candidates, BrokerConfig, Candidate, Component, Job, JobFilter, JobState, LbEvent, MatchInput, MatchResult,
    OutputFile, Wms, WmsError, MAX_MATCH_ATTEMPTS,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Jdl(#[from] JdlError),
    #[error(transparent)]
    Wms(#[from] WmsError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("unknown site {0}")]
    UnknownSite(String),
    #[error("unknown replica catalogue {0}")]
    UnknownCatalog(String),
    #[error("unknown index {0}")]
    UnknownIndex(String),
    #[error("cannot move the clock back from {now} to {to}")]
    TimeTravel { now: u64, to: u64 },
    #[error("invalid request: {0}")]
    Invalid(String),
}

/// Where a submission goes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Broker(String),
    Ce(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub jdl: String,
    pub owner: String,
    pub vo: Option<String>,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceClass {
    Edg,
    Glue,
}

impl std::str::FromStr for ResourceClass {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edg" => Ok(ResourceClass::Edg),
            "glue" => Ok(ResourceClass::Glue),
            _ => Err(GridError::Invalid(format!("resource class must be edg or glue, not {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum GridEvent {
    InfoRefresh,
    CrlRefresh,
    ProbeTick,
    Hop { job: String, epoch: u64 },
    Enqueue { job: String, epoch: u64 },
    OutputStaged { job: String, epoch: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokerInfo {
    pub config: BrokerConfig,
    pub location: String,
    pub lat: f64,
    pub lon: f64,
    pub continent: Continent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoSummary {
    pub name: String,
    pub members: Vec<String>,
    pub signed: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Grid {
    seed: u64,
    fabric: Fabric<GridEvent>,
    info: InfoSystem,
    indexes: Vec<(String, Option<String>)>,
    registry: CaRegistry,
    crls: CrlDistribution,
    vos: Vec<VoRegistry>,
    certs: BTreeMap<String, CertificateRecord>,
    mapfiles: BTreeMap<String, GridMapfile>,
    brokers: BTreeMap<String, BrokerInfo>,
    broker_order: Vec<String>,
    catalogs: BTreeMap<String, ReplicaCatalog>,
    wms: Wms,
    job_epochs: BTreeMap<String, u64>,
    matched: BTreeMap<String, String>,
    monitor: Monitor,
    events: Vec<String>,
    next_serial: u64,
}

fn gris_node(host: &str) -> String {
    format!("gris:{host}")
}

fn giis_node(site: &str) -> String {
    format!("giis:{site}")
}

fn grid_base() -> DistinguishedName {
    "o=grid".parse().expect("static dn")
}

impl Grid {
    pub fn load(path: &std::path::Path, seed: u64) -> Result<Self, GridError> {
        Self::new(&Scenario::load(path)?, seed)
    }

    pub fn new(s: &Scenario, seed: u64) -> Result<Self, GridError> {
        s.validate()?;
        let fabric: Fabric<GridEvent> = Fabric::from_scenario(s, seed);

        let mut registry = CaRegistry::new();
        for ca in &s.trust.edg {
            registry.trust(GridFlavor::Edg, ca);
        }
        for ca in &s.trust.vdt {
            registry.trust(GridFlavor::Vdt, ca);
        }
        let mut crls = CrlDistribution::new();
        for c in &s.ca {
            let mut a = CertificateAuthority::new(&c.id, c.crl_period, c.crl_lifetime);
            a.revoked.extend(c.revoked.iter().copied());
            crls.add_authority(a);
        }
        for site in &s.site {
            crls.add_site(&site.id);
        }

        let mut vos: Vec<VoRegistry> = s.vo.iter().map(|v| VoRegistry::new(&v.name)).collect();
        let mut certs = BTreeMap::new();
        let mut next_serial = 1;
        for u in &s.user {
            certs.insert(u.subject.clone(), CertificateRecord::new(&u.subject, &u.ca, u.serial, u.not_before, u.not_after)?);
            next_serial = next_serial.max(u.serial + 1);
            for name in &u.vos {
                let vo = vos.iter_mut().find(|v| v.name == *name).expect("validated");
                vo.add_member(&u.subject, u.signed)?;
            }
        }

        let mut info = InfoSystem::new(Arc::new(Schema::worldgrid()));
        for (site, host) in fabric.gris_hosts() {
            let _ = site;
            info.add_node(&gris_node(&host), IndexLevel::Gris, None)?;
        }
        for site in fabric.sites() {
            info.add_node(&giis_node(&site.id), IndexLevel::SiteGiis, None)?;
        }
        // primaries before backups
        let mut idx: Vec<&crate::fabric::IndexSpec> = s.index.iter().collect();
        idx.sort_by_key(|i| i.backup_of.is_some());
        for i in &idx {
            info.add_node(&i.id, IndexLevel::TopGiis, i.backup_of.as_deref())?;
        }
        let indexes = s.index.iter().map(|i| (i.id.clone(), i.backup_of.clone())).collect();

        let mut brokers = BTreeMap::new();
        for b in &s.broker {
            let config = BrokerConfig {
                id: b.id.clone(),
                info_primary: b.info_primary.clone(),
                info_backup: b.info_backup.clone(),
                replica_catalog: b.replica_catalog.clone(),
                glue_aware: b.glue_aware,
                default_rank: parse_expr(&b.default_rank)?,
                strict_data: b.strict_data,
                site: b.site.clone(),
            };
            let continent = b.site.as_ref().and_then(|x| fabric.site(x)).map_or(b.continent, |x| x.continent);
            brokers.insert(
                b.id.clone(),
                BrokerInfo { config, location: b.location.clone(), lat: b.lat, lon: b.lon, continent },
            );
        }
        let broker_order = s.broker.iter().map(|b| b.id.clone()).collect();

        let mut central = Vec::new();
        for b in &s.broker {
            central.push(CentralService { id: b.id.clone(), kind: ProbeKind::Rb, location: b.location.clone(), lat: b.lat, lon: b.lon });
        }
        for c in &s.replica_catalog {
            central.push(CentralService { id: c.id.clone(), kind: ProbeKind::Rc, location: c.location.clone(), lat: c.lat, lon: c.lon });
        }
        for i in &s.index {
            central.push(CentralService { id: i.id.clone(), kind: ProbeKind::Index, location: i.location.clone(), lat: i.lat, lon: i.lon });
        }
        let monitor = Monitor::new(&fabric, central);

        let mut g = Grid {
            seed,
            fabric,
            info,
            indexes,
            registry,
            crls,
            vos,
            certs,
            mapfiles: BTreeMap::new(),
            brokers,
            broker_order,
            catalogs: s.replica_catalog.iter().map(|c| (c.id.clone(), ReplicaCatalog::new(&c.id))).collect(),
            wms: Wms::new(),
            job_epochs: BTreeMap::new(),
            matched: BTreeMap::new(),
            monitor,
            events: Vec::new(),
            next_serial,
        };
        g.regenerate_mapfiles()?;
        for r in &s.replica {
            let lfn: LogicalFileName = r.lfn.parse()?;
            let path = lfn.physical_path();
            g.fabric.store(&r.se, &path, r.size).map_err(|e| GridError::Invalid(e.to_string()))?;
            let pfn = PhysicalFileName { se: r.se.clone(), path, protocol: datamgmt::GRIDFTP.into(), size: r.size };
            g.catalogs.get_mut(&r.catalog).expect("validated").register(lfn, pfn);
        }
        g.log("start", &format!("seed {seed}, {} sites", g.fabric.sites().count()));
        g.refresh_crls();
        g.refresh_info();
        g.probe();
        let p = g.fabric.params().clone();
        g.fabric.schedule(p.info_refresh, GridEvent::InfoRefresh);
        g.fabric.schedule(p.crl_refresh, GridEvent::CrlRefresh);
        g.fabric.schedule(p.probe_period, GridEvent::ProbeTick);
        Ok(g)
    }

    // ----- accessors -----

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn now(&self) -> u64 {
        self.fabric.now()
    }

    pub fn fabric(&self) -> &Fabric<impl Sized> {
        &self.fabric
    }

    pub fn info(&self) -> &InfoSystem {
        &self.info
    }

    pub fn wms(&self) -> &Wms {
        &self.wms
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    pub fn crls(&self) -> &CrlDistribution {
        &self.crls
    }

    pub fn registry(&self) -> &CaRegistry {
        &self.registry
    }

    pub fn certificate(&self, subject: &str) -> Option<&CertificateRecord> {
        self.certs.get(subject)
    }

    pub fn catalog(&self, id: &str) -> Option<&ReplicaCatalog> {
        self.catalogs.get(id)
    }

    pub fn catalogs(&self) -> impl Iterator<Item = &ReplicaCatalog> {
        self.catalogs.values()
    }

    /// The catalogue used when none is named: the first one declared.
    pub fn default_catalog(&self) -> Option<&str> {
        self.broker_order
            .first()
            .and_then(|b| self.brokers.get(b))
            .map(|b| b.config.replica_catalog.as_str())
            .or_else(|| self.catalogs.keys().next().map(String::as_str))
    }

    pub fn brokers(&self) -> Vec<&BrokerInfo> {
        self.broker_order.iter().filter_map(|b| self.brokers.get(b)).collect()
    }

    pub fn broker(&self, id: &str) -> Option<&BrokerInfo> {
        self.brokers.get(id)
    }

    pub fn job(&self, id: &str) -> Result<&Job, GridError> {
        Ok(self.wms.job(id)?)
    }

    pub fn jobs(&self, filter: &JobFilter) -> Vec<&Job> {
        self.wms.query(filter)
    }

    pub fn job_events(&self, id: &str) -> Result<Vec<&LbEvent>, GridError> {
        Ok(self.wms.events(id)?)
    }

    pub fn lb_log(&self) -> String {
        self.wms.lb().export()
    }

    /// Every simulation event so far, one `t \t kind \t detail` line each.
    pub fn event_log(&self) -> String {
        self.events.iter().map(|l| format!("{l}\n")).collect()
    }

    /// Records an externally driven action in the event log.
    pub fn log(&mut self, kind: &str, detail: &str) {
        let detail: String = detail.chars().map(|c| if c.is_control() { ' ' } else { c }).collect();
        self.events.push(format!("{}\t{kind}\t{detail}", self.now()));
    }

    // ----- VOs and authorization -----

    pub fn vos(&self) -> Vec<VoSummary> {
        self.vos
            .iter()
            .map(|v| VoSummary {
                name: v.name.clone(),
                members: v.members().to_vec(),
                signed: v.members().iter().filter(|m| v.has_signed(m)).cloned().collect(),
            })
            .collect()
    }

    pub fn vo_names(&self) -> Vec<String> {
        self.vos.iter().map(|v| v.name.clone()).collect()
    }

    /// Adds a member, issuing a certificate from `ca` (default: the first CA
    /// the grid knows) when the subject has none. Site mapfiles are rebuilt.
    pub fn add_member(&mut self, vo: &str, subject: &str, signed: bool, ca: Option<&str>) -> Result<(), GridError> {
        let idx = self.vos.iter().position(|v| v.name == vo).ok_or_else(|| AuthError::UnknownVo(vo.to_string()))?;
        if !self.certs.contains_key(subject) {
            let ca = match ca {
                Some(c) => c.to_string(),
                None => self.crls.authorities().next().map(|a| a.id.clone()).ok_or_else(|| GridError::Invalid("no CA configured".into()))?,
            };
            if self.crls.authority(&ca).is_none() {
                return Err(GridError::Invalid(format!("unknown CA {ca}")));
            }
            let now = self.now();
            let cert = CertificateRecord::new(subject, &ca, self.next_serial, now, u64::MAX / 2)?;
            self.next_serial += 1;
            self.certs.insert(subject.to_string(), cert);
        }
        self.vos[idx].add_member(subject, signed)?;
        self.log("vo_add_member", &format!("{vo} {subject}"));
        self.regenerate_mapfiles()
    }

    pub fn remove_member(&mut self, vo: &str, subject: &str) -> Result<bool, GridError> {
        let v = self.vos.iter_mut().find(|v| v.name == vo).ok_or_else(|| AuthError::UnknownVo(vo.to_string()))?;
        let removed = v.remove_member(subject);
        if removed {
            self.log("vo_remove_member", &format!("{vo} {subject}"));
            self.regenerate_mapfiles()?;
        }
        Ok(removed)
    }

    fn regenerate_mapfiles(&mut self) -> Result<(), GridError> {
        let mut out = BTreeMap::new();
        for s in self.fabric.sites() {
            let policy = SitePolicy { supported_vos: s.supported_vos.clone(), overrides: s.overrides.clone() };
            out.insert(s.id.clone(), mkgridmap(&self.vos, &policy)?);
        }
        self.mapfiles = out;
        Ok(())
    }

    pub fn gridmap(&self, site: &str) -> Result<&GridMapfile, GridError> {
        self.mapfiles.get(site).ok_or_else(|| GridError::UnknownSite(site.to_string()))
    }

    /// What a gatekeeper at `site` would say to `subject` right now.
    pub fn check_access(&self, subject: &str, site: &str) -> Result<String, GridError> {
        let s = self.fabric.site(site).ok_or_else(|| GridError::UnknownSite(site.to_string()))?;
        let cert = self.certs.get(subject).ok_or_else(|| WmsError::UnknownUser(subject.to_string()))?;
        authenticate(cert, s.flavor, self.now(), &self.crls.site_crls(site), &self.registry)?;
        Ok(authorize(subject, self.gridmap(site)?)?)
    }

    pub fn revoke(&mut self, ca: &str, serial: u64) -> bool {
        let ok = self.crls.revoke(ca, serial);
        if ok {
            self.log("revoke", &format!("{ca} {serial}"));
        }
        ok
    }

    // ----- information service -----

    fn sync_down(&mut self) {
        let now = self.now();
        for (id, _) in &self.indexes {
            self.info.set_down(id, self.fabric.is_down(FailureKind::Index, id, now));
        }
        for (site, host) in self.fabric.gris_hosts() {
            self.info.set_down(&gris_node(&host), self.fabric.is_down(FailureKind::Gris, &site, now));
        }
    }

    /// One refresh pass: live GRISes republish and re-register with their
    /// site index; brokerable site indexes re-register with every live top.
    fn refresh_info(&mut self) {
        self.sync_down();
        let now = self.now();
        let ttl = self.fabric.params().registration_ttl;
        let mut published = 0;
        let mut live_sites = BTreeSet::new();
        for (site, host) in self.fabric.gris_hosts() {
            let node = gris_node(&host);
            if self.info.is_down(&node) {
                continue;
            }
            let src = InfoSource::static_entries(&node, self.fabric.host_entries(&host, now));
            if let Ok(r) = self.info.load_sources(&node, &[src], now) {
                published += r.accepted;
            }
            self.info.register(&giis_node(&site), &node, ttl, now).expect("static hierarchy");
            live_sites.insert(site);
        }
        let brokerable: Vec<String> = self.fabric.sites().filter(|s| s.brokerable).map(|s| s.id.clone()).collect();
        for site in brokerable.iter().filter(|s| live_sites.contains(*s)) {
            for (top, _) in &self.indexes {
                if !self.info.is_down(top) {
                    self.info.register(top, &giis_node(site), ttl, now).expect("static hierarchy");
                }
            }
        }
        self.log("info_refresh", &format!("{published} entries from {} sites", live_sites.len()));
    }

    fn refresh_crls(&mut self) {
        let now = self.now();
        let fabric = &self.fabric;
        let report = self.crls.refresh_crls(now, |site, _| !fabric.is_down(FailureKind::CrlFetch, site, now));
        let failed = report.iter().filter(|r| r.outcome == crate::auth::FetchOutcome::Failed).count();
        self.log("crl_refresh", &format!("{} fetched, {failed} failed", report.len() - failed));
    }

    /// The top index queried when none is named: the first primary, or its
    /// backup when it is down.
    pub fn default_index(&self) -> Result<String, GridError> {
        let (primary, _) = self.indexes.iter().find(|(_, b)| b.is_none()).ok_or_else(|| GridError::UnknownIndex("(none)".into()))?;
        let backup = self.indexes.iter().find(|(_, b)| b.as_deref() == Some(primary)).map(|(id, _)| id.clone());
        let down = |id: &str| self.fabric.is_down(FailureKind::Index, id, self.now());
        if !down(primary) {
            return Ok(primary.clone());
        }
        match backup {
            Some(b) if !down(&b) => Ok(b),
            _ => Err(InfoError::AllIndexesDown.into()),
        }
    }

    /// Subtree search under `o=grid` at `index` (default: [`Grid::default_index`]).
    pub fn query_info(&self, filter: &str, index: Option<&str>) -> Result<Vec<DirectoryEntry>, GridError> {
        let f: QueryFilter = if filter.trim().is_empty() { QueryFilter::any() } else { filter.parse()? };
        let node = match index {
            Some(i) => i.to_string(),
            None => self.default_index()?,
        };
        Ok(self.info.search(&node, &grid_base(), Scope::Subtree, &f, self.now())?)
    }

    /// CE and SE entries of one schema family, optionally narrowed by a filter.
    pub fn resources(&self, class: Option<ResourceClass>, filter: &str) -> Result<Vec<DirectoryEntry>, GridError> {
        let classes: &[&str] = match class {
            Some(ResourceClass::Edg) => &[EDG_CE_CLASS, EDG_SE_CLASS],
            Some(ResourceClass::Glue) => &[GLUE_CE_CLASS, GLUE_SE_CLASS],
            None => &[EDG_CE_CLASS, EDG_SE_CLASS, GLUE_CE_CLASS, GLUE_SE_CLASS],
        };
        let entries = self.query_info(filter, None)?;
        Ok(entries.into_iter().filter(|e| classes.iter().any(|c| e.has_class(c))).collect())
    }

    // ----- matchmaking -----

    /// Runs the broker's matchmaking for `job` against current directory
    /// content without changing any state.
    pub fn match_job(&self, broker: &str, job: &Job) -> Result<MatchResult, GridError> {
        let b = self.brokers.get(broker).ok_or_else(|| WmsError::UnknownBroker(broker.to_string()))?;
        let now = self.now();
        let top = self.info.effective_top(&b.config.info_primary, &b.config.info_backup)?;
        let class = if b.config.glue_aware { GLUE_CE_CLASS } else { EDG_CE_CLASS };
        let entries = self.info.search(&top, &grid_base(), Scope::Subtree, &QueryFilter::ObjectClassIs(class.into()), now)?;
        let schema = self.info.schema().clone();
        let candidates: Vec<Candidate> = entries.iter().filter_map(|e| Candidate::from_entry(e, &schema)).collect();
        let jdl = job.jdl();
        let mut replicas = BTreeMap::new();
        let rc_up = !self.fabric.is_down(FailureKind::Rc, &b.config.replica_catalog, now);
        if let (true, Some(cat)) = (rc_up, self.catalogs.get(&b.config.replica_catalog)) {
            for l in &jdl.input_data {
                if let Ok(lfn) = l.parse::<LogicalFileName>() {
                    replicas.insert(l.clone(), cat.locations(&lfn).into_iter().map(str::to_string).collect());
                }
            }
        }
        let input = MatchInput {
            jdl,
            vo: &job.vo,
            default_rank: &b.config.default_rank,
            strict_data: b.config.strict_data,
            replicas: &replicas,
            excluded: &job.excluded,
        };
        Ok(rank_candidates(&input, &candidates, |site| {
            self.mapfiles.get(site).is_some_and(|m| m.account_for(&job.owner).is_some())
        }))
    }

    // ----- submission -----

    fn resolve_vo(&self, jdl: &JdlDocument, owner: &str, requested: Option<&str>) -> Result<String, GridError> {
        let vo = match jdl.virtual_organisation.as_deref().or(requested) {
            Some(v) => v.to_string(),
            None => match self.vos.iter().find(|v| v.is_member(owner)) {
                Some(v) => v.name.clone(),
                None => return Err(WmsError::VoMembership { subject: owner.to_string(), vo: "(any)".into() }.into()),
            },
        };
        let reg = self.vos.iter().find(|v| v.name == vo).ok_or_else(|| AuthError::UnknownVo(vo.clone()))?;
        if !reg.is_member(owner) {
            return Err(WmsError::VoMembership { subject: owner.to_string(), vo }.into());
        }
        Ok(vo)
    }

    fn sandbox_bytes(&self, jdl: &JdlDocument) -> Result<u64, GridError> {
        let mut total = 0;
        for f in &jdl.input_sandbox {
            total += *self.fabric.ui_files().get(f).ok_or_else(|| WmsError::SandboxMissing(f.clone()))?;
        }
        Ok(total)
    }

    fn secs_between(&self, from: Option<&str>, from_continent: Continent, to_site: &str, bytes: u64) -> u64 {
        match from {
            Some(s) => self.fabric.transfer_secs(s, to_site, bytes),
            None => {
                if bytes == 0 {
                    return 0;
                }
                let p = self.fabric.params();
                let same = self.fabric.site(to_site).is_some_and(|x| x.continent == from_continent);
                let bw = if same { p.bandwidth_inter_site } else { p.bandwidth_intercontinental };
                ((bytes as f64 / (bw * 1_000_000.0)).ceil() as u64).max(1)
            }
        }
    }

    /// Where sandboxes of `job` are staged from and back to.
    fn staging_point(&self, job: &Job) -> (Option<String>, Continent) {
        match job.rb.as_ref().and_then(|r| self.brokers.get(r)) {
            Some(b) => (b.config.site.clone(), b.continent),
            None => {
                let ui = self.fabric.params().ui_site.clone();
                let c = ui.as_ref().and_then(|s| self.fabric.site(s)).map_or(Continent::EU, |s| s.continent);
                (ui, c)
            }
        }
    }

    pub fn submit(&mut self, req: &SubmitRequest) -> Result<String, GridError> {
        let jdl = JdlDocument::parse(&req.jdl)?;
        let now = self.now();
        let (prefix, rb) = match &req.target {
            Target::Broker(b) => {
                if !self.brokers.contains_key(b) {
                    return Err(WmsError::UnknownBroker(b.clone()).into());
                }
                (b.clone(), Some(b.clone()))
            }
            Target::Ce(ce) => {
                if self.fabric.ce(ce).is_none() {
                    return Err(WmsError::UnknownCe(ce.clone()).into());
                }
                ("direct".to_string(), None)
            }
        };
        let vo = self.resolve_vo(&jdl, &req.owner, req.vo.as_deref())?;
        let sandbox = self.sandbox_bytes(&jdl)?;
        if let Some(b) = &rb {
            if self.fabric.is_down(FailureKind::Rb, b, now) {
                return Err(WmsError::ServiceDown(format!("resource broker {b}")).into());
            }
        }
        if let Target::Ce(ce) = &req.target {
            let site = self.fabric.ce(ce).expect("checked").site.clone();
            authorize(&req.owner, self.gridmap(&site)?).map_err(|e| WmsError::NotAuthorized(e.to_string()))?;
        }
        let id = self.wms.next_id(&prefix);
        let job = Job {
            id: id.clone(),
            owner: req.owner.clone(),
            vo,
            jdl: Some(jdl),
            jdl_text: req.jdl.clone(),
            state: JobState::Submitted,
            assigned_ce: None,
            submitted_at: now,
            rb: rb.clone(),
            attempts: 0,
            excluded: BTreeSet::new(),
            reason: String::new(),
            output: Vec::new(),
            registered: Vec::new(),
            started_at: None,
            finished_at: None,
        };
        let reason = match &req.target {
            Target::Broker(b) => format!("submitted to {b}"),
            Target::Ce(ce) => format!("direct submission to {ce}"),
        };
        self.wms.create(job, now, &reason);
        self.job_epochs.insert(id.clone(), 0);
        self.log("submit", &format!("{id} {}", req.owner));

        if let Target::Ce(ce) = &req.target {
            self.matched.insert(id.clone(), ce.clone());
            let site = self.fabric.ce(ce).expect("checked").site.clone();
            if self.fabric.is_down(FailureKind::Gatekeeper, &site, now) {
                // the gatekeeper refuses the contact outright
                self.step_job(&id, JobState::Waiting, Component::UI, "no matchmaking for direct submission");
                self.step_job(&id, JobState::Ready, Component::UI, &format!("target {ce}"));
                self.job_mut(&id).assigned_ce = Some(ce.clone());
                self.step_job(&id, JobState::Scheduled, Component::JSS, &format!("dispatching to {ce}"));
                let err = FabricError::GatekeeperDown(ce.clone());
                self.abort(&id, Component::JSS, &err.to_string());
                return Err(WmsError::GatekeeperDown(ce.clone()).into());
            }
        }
        let (from, cont) = {
            let job = self.wms.job(&id).expect("just created");
            self.staging_point(job)
        };
        let first_hop = match &req.target {
            // sandbox goes UI -> broker
            Target::Broker(_) => {
                let ui = self.fabric.params().ui_site.clone();
                match (&ui, &from) {
                    (Some(u), Some(f)) => self.fabric.transfer_secs(u, f, sandbox),
                    (Some(u), None) => self.secs_between(None, cont, u, sandbox),
                    _ => 0,
                }
            }
            Target::Ce(_) => 0,
        };
        self.schedule_hop(&id, now + self.hop() + first_hop);
        Ok(id)
    }

    fn hop(&self) -> u64 {
        self.fabric.params().hop_latency
    }

    fn epoch(&self, id: &str) -> u64 {
        self.job_epochs.get(id).copied().unwrap_or(0)
    }

    fn job_mut(&mut self, id: &str) -> &mut Job {
        self.wms.job_mut(id).expect("known job")
    }

    fn schedule_hop(&mut self, id: &str, t: u64) {
        let epoch = self.epoch(id);
        self.fabric.schedule(t, GridEvent::Hop { job: id.to_string(), epoch });
    }

    /// Transition plus epoch bump, so pending events for the old state lapse.
    fn step_job(&mut self, id: &str, to: JobState, c: Component, reason: &str) {
        let now = self.now();
        self.wms.transition(id, to, now, c, reason).expect("lifecycle edge");
        *self.job_epochs.entry(id.to_string()).or_default() += 1;
        if to.is_terminal() {
            self.job_mut(id).finished_at = Some(now);
        }
    }

    fn abort(&mut self, id: &str, c: Component, reason: &str) {
        self.step_job(id, JobState::Aborted, c, reason);
    }

    pub fn cancel(&mut self, id: &str) -> Result<bool, GridError> {
        let job = self.wms.job(id)?;
        if job.state.is_terminal() {
            return Ok(false);
        }
        if let Some(ce) = job.assigned_ce.clone() {
            if let Some(evs) = self.fabric.cancel(&ce, id) {
                self.step_job(id, JobState::Cancelled, Component::UI, "cancelled by user");
                self.handle_fabric(evs);
                self.log("cancel", id);
                return Ok(true);
            }
        }
        self.step_job(id, JobState::Cancelled, Component::UI, "cancelled by user");
        self.log("cancel", id);
        Ok(true)
    }

    pub fn output(&self, id: &str) -> Result<&[OutputFile], GridError> {
        let job = self.wms.job(id)?;
        if job.state != JobState::DoneOk {
            return Err(WmsError::OutputNotReady(id.to_string()).into());
        }
        Ok(&job.output)
    }

    // ----- replicas -----

    fn catalog_id(&self, catalog: Option<&str>) -> Result<String, GridError> {
        let id = catalog.or(self.default_catalog()).ok_or_else(|| GridError::UnknownCatalog("(none)".into()))?;
        if !self.catalogs.contains_key(id) {
            return Err(GridError::UnknownCatalog(id.to_string()));
        }
        Ok(id.to_string())
    }

    pub fn list_replicas(&self, lfn: &str, catalog: Option<&str>) -> Result<Vec<PhysicalFileName>, GridError> {
        let lfn: LogicalFileName = lfn.parse()?;
        let id = self.catalog_id(catalog)?;
        if self.fabric.is_down(FailureKind::Rc, &id, self.now()) {
            return Err(DataError::ServiceDown(format!("replica catalogue {id}")).into());
        }
        Ok(self.catalogs[&id].list_replicas(&lfn))
    }

    pub fn copy_and_register(&mut self, src: &str, dest_se: &str, lfn: &str, catalog: Option<&str>) -> Result<PhysicalFileName, GridError> {
        let src: Endpoint = src.parse()?;
        let lfn: LogicalFileName = lfn.parse()?;
        let id = self.catalog_id(catalog)?;
        let cat = self.catalogs.get_mut(&id).expect("checked");
        let p = datamgmt::copy_and_register(cat, &mut self.fabric, &src, dest_se, &lfn)?;
        self.log("replica_cp", &format!("{lfn} {}", p.url()));
        Ok(p)
    }

    pub fn replicate(&mut self, lfn: &str, dest_se: &str, catalog: Option<&str>) -> Result<PhysicalFileName, GridError> {
        let lfn: LogicalFileName = lfn.parse()?;
        let id = self.catalog_id(catalog)?;
        let cat = self.catalogs.get_mut(&id).expect("checked");
        let p = datamgmt::replicate(cat, &mut self.fabric, &lfn, dest_se)?;
        self.log("replicate", &format!("{lfn} {}", p.url()));
        Ok(p)
    }

    pub fn unregister(&mut self, lfn: &str, pfn: &str, catalog: Option<&str>) -> Result<(), GridError> {
        let l: LogicalFileName = lfn.parse()?;
        let (se, path) = PhysicalFileName::parse_url(pfn)
            .ok_or_else(|| DataError::UnknownPair { lfn: lfn.to_string(), pfn: pfn.to_string() })?;
        let id = self.catalog_id(catalog)?;
        if self.fabric.is_down(FailureKind::Rc, &id, self.now()) {
            return Err(DataError::ServiceDown(format!("replica catalogue {id}")).into());
        }
        self.catalogs.get_mut(&id).expect("checked").unregister(&l, &se, &path)?;
        self.log("unregister", &format!("{lfn} {pfn}"));
        Ok(())
    }

    /// Catalogue and fabric agree for every catalogue.
    pub fn check_consistency(&self) -> Result<(), String> {
        self.catalogs.values().try_for_each(|c| c.check_consistency(&self.fabric))
    }

    // ----- failures -----

    pub fn inject_failure(&mut self, w: FailureWindow) -> Result<(), GridError> {
        let known = match w.kind {
            FailureKind::Gatekeeper | FailureKind::Gris | FailureKind::Gridftp | FailureKind::CrlFetch => {
                self.fabric.site(&w.target).is_some()
            }
            FailureKind::Index => self.indexes.iter().any(|(i, _)| *i == w.target),
            FailureKind::Rb => self.brokers.contains_key(&w.target),
            FailureKind::Rc => self.catalogs.contains_key(&w.target),
        };
        if !known {
            return Err(GridError::Invalid(format!("no {} named {}", w.kind, w.target)));
        }
        if w.end.is_some_and(|e| e <= w.start) {
            return Err(GridError::Invalid("failure window must end after it starts".into()));
        }
        self.log("failure", &format!("{} {} {}..{}", w.kind, w.target, w.start, w.end.map_or("end".into(), |e| e.to_string())));
        self.fabric.add_failure(w);
        self.sync_down();
        Ok(())
    }

    pub fn set_wn_outbound(&mut self, site: &str, enabled: bool) -> Result<(), GridError> {
        let s = self.fabric.site_mut(site).ok_or_else(|| GridError::UnknownSite(site.to_string()))?;
        s.connectivity.wn_outbound = enabled;
        self.log("connectivity", &format!("{site} wn_outbound={enabled}"));
        Ok(())
    }

    // ----- monitoring -----

    fn probe(&mut self) -> Vec<ProbeResult> {
        let now = self.now();
        let ctx = Ctx { grid_info: &self.info, crls: &self.crls, fabric: &self.fabric, indexes: &self.indexes, now };
        let results = self.monitor.run_probes(now, &self.fabric, &ctx);
        let down = results.iter().filter(|r| r.status == crate::monitor::Status::Down).count();
        let warn = results.iter().filter(|r| r.status == crate::monitor::Status::Warn).count();
        self.log("probe", &format!("{} results, {down} down, {warn} warn", results.len()));
        results
    }

    pub fn map(&self, filter: &MapFilter) -> Result<MapSnapshot, GridError> {
        Ok(self.monitor.aggregate(self.now(), &self.fabric, filter, &self.vo_names())?)
    }

    // ----- clock -----

    /// Processes everything up to `until` and parks the clock there.
    pub fn advance_to(&mut self, until: u64) -> Result<(), GridError> {
        if until < self.now() {
            return Err(GridError::TimeTravel { now: self.now(), to: until });
        }
        while let Some(evs) = self.fabric.step(until) {
            self.handle_fabric(evs);
        }
        self.fabric.set_now(until);
        self.sync_down();
        Ok(())
    }

    pub fn advance(&mut self, secs: u64) -> Result<(), GridError> {
        self.advance_to(self.now().saturating_add(secs))
    }

    /// Advances event by event until no job is active or `limit` is reached.
    /// Returns whether every job is terminal.
    pub fn run_until_quiet(&mut self, limit: u64) -> bool {
        loop {
            if self.wms.jobs().all(|j| j.state.is_terminal()) {
                return true;
            }
            match self.fabric.next_event_time() {
                Some(t) if t <= limit => {
                    self.advance_to(t).expect("forward");
                }
                _ => {
                    let _ = self.advance_to(limit.max(self.now()));
                    return self.wms.jobs().all(|j| j.state.is_terminal());
                }
            }
        }
    }

    fn handle_fabric(&mut self, evs: Vec<FabricEvent<GridEvent>>) {
        for e in evs {
            match e {
                FabricEvent::External { payload, .. } => self.handle(payload),
                FabricEvent::JobStarted { ce, job, .. } => {
                    self.log("job_started", &format!("{job} {ce}"));
                    if self.wms.job(&job).is_ok_and(|j| j.state == JobState::Scheduled) {
                        self.step_job(&job, JobState::Running, Component::CE, &format!("running on {ce}"));
                        let now = self.now();
                        self.job_mut(&job).started_at = Some(now);
                    }
                }
                FabricEvent::JobFinished { ce, job, .. } => {
                    self.log("job_finished", &format!("{job} {ce}"));
                    self.finished(&job, &ce);
                }
            }
        }
    }

    fn handle(&mut self, ev: GridEvent) {
        let p = self.fabric.params().clone();
        let now = self.now();
        match ev {
            GridEvent::InfoRefresh => {
                self.refresh_info();
                self.fabric.schedule(now + p.info_refresh, GridEvent::InfoRefresh);
            }
            GridEvent::CrlRefresh => {
                self.refresh_crls();
                self.fabric.schedule(now + p.crl_refresh, GridEvent::CrlRefresh);
            }
            GridEvent::ProbeTick => {
                self.probe();
                self.fabric.schedule(now + p.probe_period, GridEvent::ProbeTick);
            }
            GridEvent::Hop { job, epoch } if epoch == self.epoch(&job) => self.hop_job(&job),
            GridEvent::Enqueue { job, epoch } if epoch == self.epoch(&job) => self.enqueue(&job),
            GridEvent::OutputStaged { job, epoch } if epoch == self.epoch(&job) => self.output_staged(&job),
            _ => {}
        }
    }

    fn hop_job(&mut self, id: &str) {
        let Ok(job) = self.wms.job(id) else { return };
        let now = self.now();
        let h = self.hop();
        match job.state {
            JobState::Submitted => {
                let reason = if job.rb.is_some() { "input sandbox received" } else { "no matchmaking for direct submission" };
                let c = if job.rb.is_some() { Component::RB } else { Component::UI };
                self.step_job(id, JobState::Waiting, c, reason);
                self.schedule_hop(id, now + h);
            }
            JobState::Waiting => {
                let Some(rb) = job.rb.clone() else {
                    let ce = self.matched[id].clone();
                    self.step_job(id, JobState::Ready, Component::UI, &format!("target {ce}"));
                    self.schedule_hop(id, now + h);
                    return;
                };
                if self.fabric.is_down(FailureKind::Rb, &rb, now) {
                    self.abort(id, Component::RB, &format!("resource broker {rb} unavailable"));
                    return;
                }
                self.sync_down();
                let job = self.wms.job(id).expect("known");
                match self.match_job(&rb, job) {
                    Err(e) => self.abort(id, Component::RB, &format!("matchmaking failed: {e}")),
                    Ok(m) => match m.chosen() {
                        None => self.abort(id, Component::RB, "no matching resources"),
                        Some(best) => {
                            let ce = best.ce.clone();
                            let rank = best.rank.map_or("undefined".to_string(), |r| r.to_string());
                            self.matched.insert(id.to_string(), ce.clone());
                            self.step_job(
                                id,
                                JobState::Ready,
                                Component::RB,
                                &format!("matched {ce} rank {rank} of {} candidates", m.ranked.len()),
                            );
                            self.schedule_hop(id, now + h);
                        }
                    },
                }
            }
            JobState::Ready => {
                let ce = self.matched[id].clone();
                self.job_mut(id).assigned_ce = Some(ce.clone());
                self.job_mut(id).attempts += 1;
                self.step_job(id, JobState::Scheduled, Component::JSS, &format!("dispatching to {ce}"));
                self.dispatch(id, &ce);
            }
            _ => {}
        }
    }

    /// Gatekeeper contact: authentication, authorization and staging checks,
    /// then the input sandbox transfer.
    fn dispatch(&mut self, id: &str, ce: &str) {
        let now = self.now();
        let job = self.wms.job(id).expect("known").clone();
        let site_id = self.fabric.ce(ce).expect("published CE exists").site.clone();
        let site = self.fabric.site(&site_id).expect("CE site").clone();
        if self.fabric.is_down(FailureKind::Gatekeeper, &site_id, now) {
            return self.dispatch_failed(id, ce, &FabricError::GatekeeperDown(ce.to_string()).to_string());
        }
        let access = match self.certs.get(&job.owner) {
            None => Err(format!("no certificate for {}", job.owner)),
            Some(cert) => authenticate(cert, site.flavor, now, &self.crls.site_crls(&site_id), &self.registry)
                .and_then(|_| authorize(&job.owner, &self.mapfiles[&site_id]))
                .map_err(|e| format!("authentication at {site_id} failed: {e}")),
        };
        if let Err(e) = access {
            return self.dispatch_failed(id, ce, &e);
        }
        if requires_inbound(job.jdl()) && !site.connectivity.inbound_ports_open {
            return self.abort(id, Component::JSS, &format!("inbound connectivity required but closed at {site_id}"));
        }
        let sandbox = self.sandbox_bytes(job.jdl()).unwrap_or(0);
        let (from, cont) = self.staging_point(&job);
        let secs = self.secs_between(from.as_deref(), cont, &site_id, sandbox);
        let epoch = self.epoch(id);
        self.fabric.schedule(now + secs, GridEvent::Enqueue { job: id.to_string(), epoch });
    }

    fn dispatch_failed(&mut self, id: &str, ce: &str, why: &str) {
        let job = self.wms.job(id).expect("known");
        let direct = job.rb.is_none();
        let attempts = job.attempts;
        if direct {
            return self.abort(id, Component::JSS, why);
        }
        if attempts >= MAX_MATCH_ATTEMPTS {
            return self.abort(id, Component::JSS, &format!("{why}; gave up after {attempts} attempts"));
        }
        let j = self.job_mut(id);
        j.excluded.insert(ce.to_string());
        j.assigned_ce = None;
        self.step_job(id, JobState::Waiting, Component::JSS, &format!("{why}; re-matching"));
        let now = self.now();
        self.schedule_hop(id, now + self.hop());
    }

    fn enqueue(&mut self, id: &str) {
        let Ok(job) = self.wms.job(id) else { return };
        if job.state != JobState::Scheduled {
            return;
        }
        let ce = job.assigned_ce.clone().expect("scheduled jobs have a CE");
        let duration = job_duration(job.jdl());
        match self.fabric.enqueue(&ce, id, duration) {
            Ok(evs) => {
                self.log("enqueue", &format!("{id} {ce}"));
                self.handle_fabric(evs);
            }
            Err(e) => self.dispatch_failed(id, &ce, &e.to_string()),
        }
    }

    fn finished(&mut self, id: &str, ce: &str) {
        let Ok(job) = self.wms.job(id) else { return };
        if job.state != JobState::Running {
            return;
        }
        let now = self.now();
        let site = self.fabric.ce(ce).expect("known CE").site.clone();
        if !self.fabric.site(&site).expect("CE site").connectivity.wn_outbound {
            return self.step_job(
                id,
                JobState::DoneFailed,
                Component::CE,
                &format!("output staging failed: worker nodes at {site} have no outbound connectivity"),
            );
        }
        let job = job.clone();
        let p = self.fabric.params().clone();
        let files = output_files(job.jdl(), p.default_sandbox_bytes);
        for f in &files {
            self.fabric.put_wn_file(&site, &format!("{id}/{}", f.name), f.size);
        }
        let mut data_bytes = 0;
        for l in output_data(job.jdl()) {
            if let Ok(lfn) = l.parse::<LogicalFileName>() {
                let base = lfn.path().rsplit('/').next().unwrap_or("data").to_string();
                self.fabric.put_wn_file(&site, &format!("{id}/{base}"), p.default_output_bytes);
                data_bytes += p.default_output_bytes;
            }
        }
        let sandbox: u64 = files.iter().map(|f| f.size).sum();
        let (to, cont) = self.staging_point(&job);
        let back = self.secs_between(to.as_deref(), cont, &site, sandbox);
        let data = self.fabric.transfer_secs(&site, &site, data_bytes);
        let epoch = self.epoch(id);
        self.fabric.schedule(now + back.max(1) + data, GridEvent::OutputStaged { job: id.to_string(), epoch });
    }

    fn output_staged(&mut self, id: &str) {
        let job = self.wms.job(id).expect("known").clone();
        if job.state != JobState::Running {
            return;
        }
        let ce = job.assigned_ce.clone().expect("running job has a CE");
        let site = self.fabric.ce(&ce).expect("known CE").site.clone();
        if !self.fabric.site(&site).expect("CE site").connectivity.wn_outbound {
            return self.step_job(
                id,
                JobState::DoneFailed,
                Component::CE,
                &format!("output staging failed: worker nodes at {site} have no outbound connectivity"),
            );
        }
        let catalog = job
            .rb
            .as_ref()
            .and_then(|r| self.brokers.get(r))
            .map(|b| b.config.replica_catalog.clone())
            .or_else(|| self.default_catalog().map(str::to_string));
        let close = self.fabric.ce(&ce).expect("known CE").close_ses.clone();
        let mut registered = Vec::new();
        for l in output_data(job.jdl()) {
            let lfn: LogicalFileName = match l.parse() {
                Ok(x) => x,
                Err(e) => return self.step_job(id, JobState::DoneFailed, Component::CE, &format!("output data: {e}")),
            };
            let base = lfn.path().rsplit('/').next().unwrap_or("data").to_string();
            let src = Endpoint::Wn { site: site.clone(), path: format!("{id}/{base}") };
            let Some(cat_id) = catalog.clone() else {
                return self.step_job(id, JobState::DoneFailed, Component::CE, "output data: no replica catalogue");
            };
            let mut last_err = DataError::UnknownSe("(no close SE)".into());
            let mut done = None;
            for se in &close {
                let cat = self.catalogs.get_mut(&cat_id).expect("validated");
                match datamgmt::copy_and_register(cat, &mut self.fabric, &src, se, &lfn) {
                    Ok(p) => {
                        done = Some(p);
                        break;
                    }
                    Err(e) => last_err = e,
                }
            }
            match done {
                Some(p) => registered.push((lfn.to_string(), p.url())),
                None => {
                    return self.step_job(id, JobState::DoneFailed, Component::CE, &format!("output data registration failed: {last_err}"))
                }
            }
        }
        let files = output_files(job.jdl(), self.fabric.params().default_sandbox_bytes);
        let j = self.job_mut(id);
        j.output = files;
        j.registered = registered.clone();
        let reason = if registered.is_empty() {
            "output sandbox retrieved".to_string()
        } else {
            format!("output sandbox retrieved, {} file(s) registered", registered.len())
        };
        self.step_job(id, JobState::DoneOk, Component::JSS, &reason);
        for (l, p) in registered {
            self.wms.info(id, self.now(), Component::CE, "registered", &format!("{l} {p}"));
        }
    }
}

fn requires_inbound(jdl: &JdlDocument) -> bool {
    let empty = AttrMap::new();
    jdl.extra("RequiresInbound")
        .is_some_and(|e| evaluate(e, &EvalEnv { other: &empty, own: &empty }) == Value::Bool(true))
}

/// An explicit `Duration = <seconds>` fixes the run time; otherwise the
/// fabric draws one.
fn job_duration(jdl: &JdlDocument) -> Option<u64> {
    let empty = AttrMap::new();
    let v = evaluate(jdl.extra("Duration")?, &EvalEnv { other: &empty, own: &empty });
    v.as_f64().filter(|d| *d >= 1.0).map(|d| d as u64)
}

fn output_data(jdl: &JdlDocument) -> Vec<String> {
    let empty = AttrMap::new();
    let Some(e) = jdl.extra("OutputData") else { return Vec::new() };
    match evaluate(e, &EvalEnv { other: &empty, own: &empty }) {
        Value::Str(s) => vec![s],
        Value::List(items) => items.into_iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
        _ => Vec::new(),
    }
}

fn output_files(jdl: &JdlDocument, size: u64) -> Vec<OutputFile> {
    let mut names: Vec<String> = Vec::new();
    for n in [&jdl.stdout, &jdl.stderr].into_iter().chain(jdl.output_sandbox.iter()) {
        if !n.is_empty() && !names.contains(n) {
            names.push(n.clone());
        }
    }
    names.into_iter().map(|name| OutputFile { name, size }).collect()
}

struct Ctx<'a> {
    grid_info: &'a InfoSystem,
    crls: &'a CrlDistribution,
    fabric: &'a Fabric<GridEvent>,
    indexes: &'a [(String, Option<String>)],
    now: u64,
}

impl ProbeContext for Ctx<'_> {
    fn stale_crls(&self, site: &str) -> Vec<String> {
        self.crls.stale_at(site, self.now)
    }

    fn stale_registration(&self, site: &str) -> bool {
        let fresh = |node: &str, child: &str| self.grid_info.registration(node, child).is_some_and(|r| r.is_fresh(self.now));
        let giis = giis_node(site);
        let gris_stale = self
            .fabric
            .gris_hosts()
            .iter()
            .filter(|(s, _)| s == site)
            .any(|(_, h)| !fresh(&giis, &gris_node(h)));
        let brokerable = self.fabric.site(site).is_some_and(|s| s.brokerable);
        let top_stale = brokerable
            && self
                .indexes
                .iter()
                .filter(|(top, _)| !self.grid_info.is_down(top))
                .any(|(top, _)| !fresh(top, &giis));
        gris_stale || top_stale
    }
}
