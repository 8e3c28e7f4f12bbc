//! Authentication and authorization: CA trust per grid flavor, modeled
//! certificates and CRLs, VO registries and grid-mapfile generation.
//!
//! Certificates here are plain records. There is no cryptography; trust is an
//! allowlist lookup and revocation a serial-number set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuthError {
    #[error("issuer {0} is not trusted by this site")]
    UntrustedCa(String),
    #[error("certificate outside its validity period")]
    Expired,
    #[error("certificate serial {0} is revoked")]
    Revoked(u64),
    #[error("no fresh revocation list for {0}")]
    StaleCrl(String),
    #[error("{0} is not authorized on this resource")]
    NotAuthorized(String),
    #[error("unknown VO {0}")]
    UnknownVo(String),
    #[error("VO {0} listed twice")]
    DuplicateVo(String),
    #[error("{subject} is already a member of {vo}")]
    DuplicateMember { vo: String, subject: String },
    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// The two site architectures; each trusts its own CA set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GridFlavor {
    Edg,
    Vdt,
}

impl fmt::Display for GridFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridFlavor::Edg => "EDG",
            GridFlavor::Vdt => "VDT",
        })
    }
}

impl FromStr for GridFlavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "EDG" => Ok(GridFlavor::Edg),
            "VDT" => Ok(GridFlavor::Vdt),
            other => Err(format!("unknown grid flavor {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub subject: String,
    pub issuer_ca: String,
    pub serial: u64,
    pub not_before: u64,
    pub not_after: u64,
}

impl CertificateRecord {
    pub fn new(subject: &str, issuer_ca: &str, serial: u64, not_before: u64, not_after: u64) -> Result<Self, AuthError> {
        if not_before >= not_after {
            return Err(AuthError::InvalidCertificate(format!("{subject}: not_before must precede not_after")));
        }
        if subject.trim().is_empty() {
            return Err(AuthError::InvalidCertificate("empty subject".into()));
        }
        Ok(Self {
            subject: subject.to_string(),
            issuer_ca: issuer_ca.to_string(),
            serial,
            not_before,
            not_after,
        })
    }

    pub fn is_valid_at(&self, now: u64) -> bool {
        self.not_before <= now && now < self.not_after
    }
}

/// Explicit per-flavor CA allowlists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaRegistry {
    trusted: BTreeMap<GridFlavor, BTreeSet<String>>,
}

impl CaRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trust(&mut self, flavor: GridFlavor, ca: &str) -> &mut Self {
        self.trusted.entry(flavor).or_default().insert(ca.to_string());
        self
    }

    pub fn trusts(&self, flavor: GridFlavor, ca: &str) -> bool {
        self.trusted.get(&flavor).is_some_and(|s| s.contains(ca))
    }

    pub fn trusted(&self, flavor: GridFlavor) -> impl Iterator<Item = &str> {
        self.trusted.get(&flavor).into_iter().flatten().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crl {
    pub ca: String,
    pub revoked_serials: BTreeSet<u64>,
    pub issued_at: u64,
    pub next_update: u64,
}

impl Crl {
    pub fn new(ca: &str, revoked: impl IntoIterator<Item = u64>, issued_at: u64, next_update: u64) -> Result<Self, AuthError> {
        if issued_at >= next_update {
            return Err(AuthError::InvalidCertificate(format!("CRL for {ca}: issued_at must precede next_update")));
        }
        Ok(Self { ca: ca.to_string(), revoked_serials: revoked.into_iter().collect(), issued_at, next_update })
    }

    pub fn is_fresh(&self, now: u64) -> bool {
        now <= self.next_update
    }
}

/// Checks a certificate as a gatekeeper of the given flavor would.
///
/// Checks run in a fixed order: trust, validity, revocation, freshness. A
/// serial listed on a stale CRL is still reported as revoked.
pub fn authenticate(
    cert: &CertificateRecord,
    flavor: GridFlavor,
    now: u64,
    crls: &[Crl],
    registry: &CaRegistry,
) -> Result<String, AuthError> {
    if !registry.trusts(flavor, &cert.issuer_ca) {
        return Err(AuthError::UntrustedCa(cert.issuer_ca.clone()));
    }
    if !cert.is_valid_at(now) {
        return Err(AuthError::Expired);
    }
    let crl = crls.iter().filter(|c| c.ca == cert.issuer_ca).max_by_key(|c| c.issued_at);
    if let Some(crl) = crl {
        if crl.revoked_serials.contains(&cert.serial) {
            return Err(AuthError::Revoked(cert.serial));
        }
    }
    match crl {
        Some(c) if c.is_fresh(now) => Ok(cert.subject.clone()),
        _ => Err(AuthError::StaleCrl(cert.issuer_ca.clone())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoRegistry {
    pub name: String,
    members: Vec<String>,
    usage_policy_signed: BTreeSet<String>,
}

impl VoRegistry {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), members: Vec::new(), usage_policy_signed: BTreeSet::new() }
    }

    pub fn add_member(&mut self, subject: &str, signed: bool) -> Result<(), AuthError> {
        if self.is_member(subject) {
            return Err(AuthError::DuplicateMember { vo: self.name.clone(), subject: subject.to_string() });
        }
        self.members.push(subject.to_string());
        if signed {
            self.usage_policy_signed.insert(subject.to_string());
        }
        Ok(())
    }

    pub fn remove_member(&mut self, subject: &str) -> bool {
        let before = self.members.len();
        self.members.retain(|m| m != subject);
        self.usage_policy_signed.remove(subject);
        before != self.members.len()
    }

    pub fn sign_policy(&mut self, subject: &str) -> bool {
        if self.is_member(subject) {
            self.usage_policy_signed.insert(subject.to_string());
            true
        } else {
            false
        }
    }

    pub fn is_member(&self, subject: &str) -> bool {
        self.members.iter().any(|m| m == subject)
    }

    pub fn has_signed(&self, subject: &str) -> bool {
        self.usage_policy_signed.contains(subject)
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }
}

/// Renders registries as `[vo name]` sections, one subject per line; members
/// who signed the usage policy carry a trailing `[signed]`.
pub fn format_vo_registries(vos: &[VoRegistry]) -> String {
    let mut out = String::new();
    for (i, vo) in vos.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("[vo {}]\n", vo.name));
        for m in &vo.members {
            if vo.has_signed(m) {
                out.push_str(&format!("{m} [signed]\n"));
            } else {
                out.push_str(&format!("{m}\n"));
            }
        }
    }
    out
}

pub fn parse_vo_registries(text: &str) -> Result<Vec<VoRegistry>, AuthError> {
    let mut vos: Vec<VoRegistry> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: &str| AuthError::Parse { line: i + 1, message: message.to_string() };
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')).filter(|h| h.starts_with("vo ")) {
            let name = header[3..].trim();
            if name.is_empty() {
                return Err(parse_err("VO header without a name"));
            }
            if vos.iter().any(|v| v.name == name) {
                return Err(parse_err(&format!("VO {name} declared twice")));
            }
            vos.push(VoRegistry::new(name));
            continue;
        }
        let vo = vos.last_mut().ok_or_else(|| parse_err("member line before any [vo <name>] header"))?;
        let (subject, signed) = match line.strip_suffix("[signed]") {
            Some(s) => (s.trim_end(), true),
            None => (line, false),
        };
        vo.add_member(subject, signed).map_err(|e| parse_err(&e.to_string()))?;
    }
    Ok(vos)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MappingOverride {
    Account(String),
    Deny,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SitePolicy {
    pub supported_vos: Vec<String>,
    pub overrides: Vec<(String, MappingOverride)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMapfile {
    mappings: Vec<(String, String)>,
}

impl GridMapfile {
    pub fn mappings(&self) -> &[(String, String)] {
        &self.mappings
    }

    pub fn account_for(&self, subject: &str) -> Option<&str> {
        self.mappings.iter().find(|(s, _)| s == subject).map(|(_, a)| a.as_str())
    }

    pub fn len(&self) -> usize {
        self.mappings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mappings.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, AuthError> {
        let mut mappings: Vec<(String, String)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| AuthError::Parse { line: i + 1, message: m.to_string() };
            let rest = line.strip_prefix('"').ok_or_else(|| err("expected quoted subject"))?;
            let (subject, account) = rest.split_once('"').ok_or_else(|| err("unterminated subject"))?;
            let account = account.trim();
            if account.is_empty() || account.contains(char::is_whitespace) {
                return Err(err("expected a single local account"));
            }
            if mappings.iter().any(|(s, _)| s == subject) {
                return Err(err("subject mapped twice"));
            }
            mappings.push((subject.to_string(), account.to_string()));
        }
        Ok(Self { mappings })
    }
}

impl fmt::Display for GridMapfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (s, a) in &self.mappings {
            writeln!(f, "\"{s}\" {a}")?;
        }
        Ok(())
    }
}

/// Pool account for the member at zero-based `index` of a VO: `<vo>NNN`, counting from 001.
pub fn pool_account(vo: &str, index: usize) -> String {
    format!("{vo}{:03}", index + 1)
}

/// Builds a resource's grid-mapfile from the VOs it supports.
///
/// Members who have not signed the usage policy are left out. A subject in
/// several supported VOs keeps the mapping of the first one in `vos` order.
/// Overrides apply last, in order; `Deny` drops the subject.
pub fn mkgridmap(vos: &[VoRegistry], policy: &SitePolicy) -> Result<GridMapfile, AuthError> {
    let mut names = BTreeSet::new();
    for vo in vos {
        if !names.insert(vo.name.as_str()) {
            return Err(AuthError::DuplicateVo(vo.name.clone()));
        }
    }
    if let Some(unknown) = policy.supported_vos.iter().find(|v| !names.contains(v.as_str())) {
        return Err(AuthError::UnknownVo(unknown.clone()));
    }

    let mut mappings: Vec<(String, String)> = Vec::new();
    for vo in vos.iter().filter(|v| policy.supported_vos.contains(&v.name)) {
        for (index, member) in vo.members.iter().enumerate() {
            if !vo.has_signed(member) || mappings.iter().any(|(s, _)| s == member) {
                continue;
            }
            mappings.push((member.clone(), pool_account(&vo.name, index)));
        }
    }
    for (subject, rule) in &policy.overrides {
        let pos = mappings.iter().position(|(s, _)| s == subject);
        match (rule, pos) {
            (MappingOverride::Deny, Some(p)) => {
                mappings.remove(p);
            }
            (MappingOverride::Deny, None) => {}
            (MappingOverride::Account(a), Some(p)) => mappings[p].1 = a.clone(),
            (MappingOverride::Account(a), None) => mappings.push((subject.clone(), a.clone())),
        }
    }
    Ok(GridMapfile { mappings })
}

pub fn authorize(subject: &str, mapfile: &GridMapfile) -> Result<String, AuthError> {
    mapfile
        .account_for(subject)
        .map(str::to_string)
        .ok_or_else(|| AuthError::NotAuthorized(subject.to_string()))
}

/// A certification authority and the CRL it currently issues.
///
/// A new CRL is issued every `crl_period` seconds and stays valid for
/// `crl_lifetime` seconds after issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateAuthority {
    pub id: String,
    pub crl_period: u64,
    pub crl_lifetime: u64,
    pub revoked: BTreeSet<u64>,
}

impl CertificateAuthority {
    pub fn new(id: &str, crl_period: u64, crl_lifetime: u64) -> Self {
        Self { id: id.to_string(), crl_period: crl_period.max(1), crl_lifetime: crl_lifetime.max(1), revoked: BTreeSet::new() }
    }

    pub fn current_crl(&self, now: u64) -> Crl {
        let issued_at = now - now % self.crl_period;
        Crl {
            ca: self.id.clone(),
            revoked_serials: self.revoked.clone(),
            issued_at,
            next_update: issued_at + self.crl_lifetime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchOutcome {
    Fetched,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrlFetch {
    pub site: String,
    pub ca: String,
    pub outcome: FetchOutcome,
}

/// The CAs and each site's locally installed CRL copies, kept current by a
/// periodic fetch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrlDistribution {
    authorities: BTreeMap<String, CertificateAuthority>,
    copies: BTreeMap<String, BTreeMap<String, Crl>>,
}

impl CrlDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_authority(&mut self, ca: CertificateAuthority) {
        self.authorities.insert(ca.id.clone(), ca);
    }

    pub fn add_site(&mut self, site: &str) {
        self.copies.entry(site.to_string()).or_default();
    }

    pub fn authority(&self, ca: &str) -> Option<&CertificateAuthority> {
        self.authorities.get(ca)
    }

    pub fn authorities(&self) -> impl Iterator<Item = &CertificateAuthority> {
        self.authorities.values()
    }

    /// Returns false when `ca` is unknown.
    pub fn revoke(&mut self, ca: &str, serial: u64) -> bool {
        match self.authorities.get_mut(ca) {
            Some(a) => {
                a.revoked.insert(serial);
                true
            }
            None => false,
        }
    }

    /// The CRL copies installed at `site`.
    pub fn site_crls(&self, site: &str) -> Vec<Crl> {
        self.copies.get(site).map(|m| m.values().cloned().collect()).unwrap_or_default()
    }

    /// CAs whose copy at `site` is missing or past its next update.
    pub fn stale_at(&self, site: &str, now: u64) -> Vec<String> {
        let copies = self.copies.get(site);
        self.authorities
            .keys()
            .filter(|ca| !copies.and_then(|m| m.get(*ca)).is_some_and(|c| c.is_fresh(now)))
            .cloned()
            .collect()
    }

    /// One cron pass: every site tries to fetch every CA's current CRL.
    /// A failed fetch leaves the previous copy in place.
    pub fn refresh_crls(&mut self, now: u64, mut fetch_ok: impl FnMut(&str, &str) -> bool) -> Vec<CrlFetch> {
        let mut report = Vec::new();
        for (site, copies) in &mut self.copies {
            for (ca, authority) in &self.authorities {
                let ok = fetch_ok(site, ca);
                if ok {
                    copies.insert(ca.clone(), authority.current_crl(now));
                }
                report.push(CrlFetch {
                    site: site.clone(),
                    ca: ca.clone(),
                    outcome: if ok { FetchOutcome::Fetched } else { FetchOutcome::Failed },
                });
            }
        }
        report
    }
}
