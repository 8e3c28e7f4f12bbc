//! Replica catalogue and replica manager. Files are `(path, size)` records
//! held by the fabric's storage elements; the catalogue maps logical names
//! to the physical copies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fabric::{Fabric, FabricError, FailureKind};

pub const GRIDFTP: &str = "gsiftp";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataError {
    #[error("invalid logical file name {0:?}")]
    InvalidLfn(String),
    #[error("invalid endpoint {0:?}")]
    InvalidEndpoint(String),
    #[error("unknown logical file {0}")]
    UnknownLfn(String),
    #[error("{pfn} is not a replica of {lfn}")]
    UnknownPair { lfn: String, pfn: String },
    #[error("unknown storage element {0}")]
    UnknownSe(String),
    #[error("unknown site or host {0}")]
    UnknownSite(String),
    #[error("{lfn} is already registered")]
    LfnExists { lfn: String },
    #[error("storage element {se} lacks space: {needed} bytes needed, {free} free")]
    NoSpace { se: String, needed: u64, free: u64 },
    #[error("connectivity denied at {site}: {reason}")]
    ConnectivityDenied { site: String, reason: String },
    #[error("source file {0} does not exist")]
    SourceMissing(String),
    #[error("{0} is down")]
    ServiceDown(String),
}

/// `lfn:/<vo>/<path>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LogicalFileName {
    vo: String,
    path: String,
}

impl LogicalFileName {
    pub fn new(vo: &str, path: &str) -> Result<Self, DataError> {
        format!("lfn:/{vo}/{path}").parse()
    }

    pub fn vo(&self) -> &str {
        &self.vo
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    /// Where copies of this file live on any SE.
    pub fn physical_path(&self) -> String {
        format!("/grid/{}/{}", self.vo, self.path)
    }
}

impl FromStr for LogicalFileName {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DataError::InvalidLfn(s.to_string());
        let rest = s.strip_prefix("lfn:/").ok_or_else(bad)?;
        let (vo, path) = rest.split_once('/').ok_or_else(bad)?;
        let ok_vo = !vo.is_empty() && vo.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        let ok_path = !path.is_empty()
            && !path.ends_with('/')
            && path.split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..")
            && !path.chars().any(|c| c.is_whitespace() || c.is_control());
        if ok_vo && ok_path {
            Ok(Self { vo: vo.to_string(), path: path.to_string() })
        } else {
            Err(bad())
        }
    }
}

impl TryFrom<String> for LogicalFileName {
    type Error = DataError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LogicalFileName> for String {
    fn from(l: LogicalFileName) -> String {
        l.to_string()
    }
}

impl fmt::Display for LogicalFileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lfn:/{}/{}", self.vo, self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhysicalFileName {
    pub se: String,
    pub path: String,
    pub protocol: String,
    pub size: u64,
}

impl PhysicalFileName {
    pub fn url(&self) -> String {
        format!("{}://{}{}", self.protocol, self.se, self.path)
    }

    /// Splits `proto://se/path` into `(se, path)`.
    pub fn parse_url(url: &str) -> Option<(String, String)> {
        let (_, rest) = url.split_once("://")?;
        let slash = rest.find('/')?;
        let (se, path) = rest.split_at(slash);
        (!se.is_empty()).then(|| (se.to_string(), path.to_string()))
    }
}

impl fmt::Display for PhysicalFileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.url())
    }
}

/// Where a copy starts from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Ui { path: String },
    /// Gatekeeper host; it shares the worker nodes' filesystem.
    Ce { host: String, path: String },
    Wn { site: String, path: String },
    Se { se: String, path: String },
}

impl FromStr for Endpoint {
    type Err = DataError;

    /// `ui:<path>`, `ce:<host>:<path>`, `wn:<site>:<path>`, `se:<host>:<path>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DataError::InvalidEndpoint(s.to_string());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        if kind == "ui" {
            return if rest.is_empty() { Err(bad()) } else { Ok(Endpoint::Ui { path: rest.to_string() }) };
        }
        let (host, path) = rest.split_once(':').ok_or_else(bad)?;
        if host.is_empty() || path.is_empty() {
            return Err(bad());
        }
        let (host, path) = (host.to_string(), path.to_string());
        match kind {
            "ce" => Ok(Endpoint::Ce { host, path }),
            "wn" => Ok(Endpoint::Wn { site: host, path }),
            "se" => Ok(Endpoint::Se { se: host, path }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Ui { path } => write!(f, "ui:{path}"),
            Endpoint::Ce { host, path } => write!(f, "ce:{host}:{path}"),
            Endpoint::Wn { site, path } => write!(f, "wn:{site}:{path}"),
            Endpoint::Se { se, path } => write!(f, "se:{se}:{path}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaCatalog {
    pub id: String,
    entries: BTreeMap<LogicalFileName, BTreeSet<PhysicalFileName>>,
}

impl ReplicaCatalog {
    pub fn new(id: &str) -> Self {
        Self { id: id.to_string(), entries: BTreeMap::new() }
    }

    pub fn list_replicas(&self, lfn: &LogicalFileName) -> Vec<PhysicalFileName> {
        self.entries.get(lfn).map(|s| s.iter().cloned().collect()).unwrap_or_default()
    }

    pub fn contains(&self, lfn: &LogicalFileName) -> bool {
        self.entries.contains_key(lfn)
    }

    pub fn lfns(&self) -> impl Iterator<Item = &LogicalFileName> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// SEs holding a registered copy of `lfn`.
    pub fn locations(&self, lfn: &LogicalFileName) -> BTreeSet<&str> {
        self.entries.get(lfn).into_iter().flatten().map(|p| p.se.as_str()).collect()
    }

    /// Low-level registration; callers keep sizes equal across replicas.
    pub fn register(&mut self, lfn: LogicalFileName, pfn: PhysicalFileName) {
        self.entries.entry(lfn).or_default().insert(pfn);
    }

    /// Drops one replica from the catalogue. The file itself stays on its SE.
    pub fn unregister(&mut self, lfn: &LogicalFileName, se: &str, path: &str) -> Result<PhysicalFileName, DataError> {
        let pair_err = || DataError::UnknownPair { lfn: lfn.to_string(), pfn: format!("{se}{path}") };
        let set = self.entries.get_mut(lfn).ok_or_else(pair_err)?;
        let found = set.iter().find(|p| p.se == se && p.path == path).cloned().ok_or_else(pair_err)?;
        set.remove(&found);
        if set.is_empty() {
            self.entries.remove(lfn);
        }
        Ok(found)
    }

    /// Sorted `lfn pfn size` lines.
    pub fn dump(&self) -> String {
        let mut lines: Vec<String> = self
            .entries
            .iter()
            .flat_map(|(l, ps)| ps.iter().map(move |p| format!("{l} {} {}", p.url(), p.size)))
            .collect();
        lines.sort();
        lines.iter().map(|l| format!("{l}\n")).collect()
    }

    /// Every registered replica must be a file of the same size on a known SE,
    /// and all replicas of one name must agree on size.
    pub fn check_consistency<T>(&self, fabric: &Fabric<T>) -> Result<(), String> {
        for (lfn, set) in &self.entries {
            if set.is_empty() {
                return Err(format!("{lfn} has an empty replica set"));
            }
            let sizes: BTreeSet<u64> = set.iter().map(|p| p.size).collect();
            if sizes.len() > 1 {
                return Err(format!("{lfn} has replicas of differing sizes"));
            }
            for p in set {
                let se = fabric.se(&p.se).ok_or_else(|| format!("{lfn}: dangling SE {}", p.se))?;
                match se.files.get(&p.path) {
                    Some(&s) if s == p.size => {}
                    Some(&s) => return Err(format!("{lfn}: {} holds {s} bytes, catalogue says {}", p.url(), p.size)),
                    None => return Err(format!("{lfn}: {} missing on its SE", p.url())),
                }
            }
        }
        for se in fabric.ses() {
            if se.used_bytes() > se.total_bytes {
                return Err(format!("{} over capacity", se.id));
            }
        }
        Ok(())
    }
}

fn gridftp_up<T>(fabric: &Fabric<T>, site: &str) -> Result<(), DataError> {
    if fabric.is_down(FailureKind::Gridftp, site, fabric.now()) {
        Err(DataError::ServiceDown(format!("gridftp at {site}")))
    } else {
        Ok(())
    }
}

fn catalog_up<T>(fabric: &Fabric<T>, cat: &ReplicaCatalog) -> Result<(), DataError> {
    if fabric.is_down(FailureKind::Rc, &cat.id, fabric.now()) {
        Err(DataError::ServiceDown(format!("replica catalogue {}", cat.id)))
    } else {
        Ok(())
    }
}

fn outbound_denied(site: &str) -> DataError {
    DataError::ConnectivityDenied {
        site: site.to_string(),
        reason: "worker nodes have no outbound connectivity".into(),
    }
}

/// Resolves an endpoint to `(site, size)`; `site` is `None` for the UI.
pub fn resolve_source<T>(fabric: &Fabric<T>, src: &Endpoint) -> Result<(Option<String>, u64), DataError> {
    let missing = || DataError::SourceMissing(src.to_string());
    match src {
        Endpoint::Ui { path } => {
            let size = *fabric.ui_files().get(path).ok_or_else(missing)?;
            Ok((fabric.params().ui_site.clone(), size))
        }
        Endpoint::Ce { host, path } => {
            let ce = fabric.ces().find(|c| c.host == *host).ok_or_else(|| DataError::UnknownSite(host.clone()))?;
            let size = *fabric.wn_files(&ce.site).and_then(|f| f.get(path)).ok_or_else(missing)?;
            Ok((Some(ce.site.clone()), size))
        }
        Endpoint::Wn { site, path } => {
            let s = fabric.site(site).ok_or_else(|| DataError::UnknownSite(site.clone()))?;
            if !s.connectivity.wn_outbound {
                return Err(outbound_denied(site));
            }
            let size = *fabric.wn_files(site).and_then(|f| f.get(path)).ok_or_else(missing)?;
            Ok((Some(site.clone()), size))
        }
        Endpoint::Se { se, path } => {
            let s = fabric.se(se).ok_or_else(|| DataError::UnknownSe(se.clone()))?;
            let size = *s.files.get(path).ok_or_else(missing)?;
            Ok((Some(s.site.clone()), size))
        }
    }
}

fn store<T>(fabric: &mut Fabric<T>, se: &str, path: &str, size: u64) -> Result<(), DataError> {
    fabric.store(se, path, size).map_err(|e| match e {
        FabricError::NoSpace { se, needed, free } => DataError::NoSpace { se, needed, free },
        _ => DataError::UnknownSe(se.to_string()),
    })
}

/// Copies a file to `dest_se` and registers it as the first replica of `lfn`.
pub fn copy_and_register<T>(
    cat: &mut ReplicaCatalog,
    fabric: &mut Fabric<T>,
    src: &Endpoint,
    dest_se: &str,
    lfn: &LogicalFileName,
) -> Result<PhysicalFileName, DataError> {
    let dest_site = fabric.se(dest_se).ok_or_else(|| DataError::UnknownSe(dest_se.to_string()))?.site.clone();
    catalog_up(fabric, cat)?;
    if cat.contains(lfn) {
        return Err(DataError::LfnExists { lfn: lfn.to_string() });
    }
    let (src_site, size) = resolve_source(fabric, src)?;
    if let Some(s) = &src_site {
        gridftp_up(fabric, s)?;
    }
    gridftp_up(fabric, &dest_site)?;
    let path = lfn.physical_path();
    store(fabric, dest_se, &path, size)?;
    let pfn = PhysicalFileName { se: dest_se.to_string(), path, protocol: GRIDFTP.into(), size };
    cat.register(lfn.clone(), pfn.clone());
    Ok(pfn)
}

/// Adds a replica at `dest_se`, copied from the nearest existing one: same
/// site first, then same continent, then by SE id.
pub fn replicate<T>(
    cat: &mut ReplicaCatalog,
    fabric: &mut Fabric<T>,
    lfn: &LogicalFileName,
    dest_se: &str,
) -> Result<PhysicalFileName, DataError> {
    let dest_site = fabric.se(dest_se).ok_or_else(|| DataError::UnknownSe(dest_se.to_string()))?.site.clone();
    catalog_up(fabric, cat)?;
    let replicas = cat.list_replicas(lfn);
    if replicas.is_empty() {
        return Err(DataError::UnknownLfn(lfn.to_string()));
    }
    if let Some(p) = replicas.iter().find(|p| p.se == dest_se) {
        return Ok(p.clone());
    }
    let src = pick_source(fabric, &replicas, &dest_site).expect("non-empty");
    let src_site = fabric.se(&src.se).map(|s| s.site.clone()).unwrap_or_default();
    gridftp_up(fabric, &src_site)?;
    gridftp_up(fabric, &dest_site)?;
    store(fabric, dest_se, &src.path, src.size)?;
    let pfn = PhysicalFileName { se: dest_se.to_string(), path: src.path.clone(), protocol: GRIDFTP.into(), size: src.size };
    cat.register(lfn.clone(), pfn.clone());
    Ok(pfn)
}

/// The replica a copy to `dest_site` would read from.
pub fn pick_source<'a, T>(fabric: &Fabric<T>, replicas: &'a [PhysicalFileName], dest_site: &str) -> Option<&'a PhysicalFileName> {
    let continent = |site: &str| fabric.site(site).map(|s| s.continent);
    let dest_cont = continent(dest_site);
    replicas.iter().min_by_key(|p| {
        let site = fabric.se(&p.se).map(|s| s.site.as_str()).unwrap_or("");
        (site != dest_site, continent(site) != dest_cont, p.se.as_str())
    })
}

/// Seconds a copy of `size` bytes from `src_site` to `dest_se` takes.
pub fn transfer_secs<T>(fabric: &Fabric<T>, src_site: Option<&str>, dest_se: &str, size: u64) -> u64 {
    let dest = fabric.se(dest_se).map(|s| s.site.as_str()).unwrap_or("");
    let src = src_site.unwrap_or(dest);
    fabric.transfer_secs(src, dest, size)
}
