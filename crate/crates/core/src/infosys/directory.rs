use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DistinguishedName, InfoError, QueryFilter, Schema, SchemaViolation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectoryEntry {
    pub dn: DistinguishedName,
    pub object_classes: BTreeSet<String>,
    pub attributes: BTreeMap<String, Vec<String>>,
    pub source_id: String,
    pub published_at: u64,
}

impl DirectoryEntry {
    pub fn new(dn: DistinguishedName, source_id: &str, published_at: u64) -> Self {
        Self {
            dn,
            object_classes: BTreeSet::new(),
            attributes: BTreeMap::new(),
            source_id: source_id.to_string(),
            published_at,
        }
    }

    pub fn with_class(mut self, class: &str) -> Self {
        self.object_classes.insert(class.to_string());
        self
    }

    pub fn with_attr(mut self, name: &str, value: impl ToString) -> Self {
        self.attributes.entry(name.to_string()).or_default().push(value.to_string());
        self
    }

    pub fn with_list<I, S>(mut self, name: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let vs: Vec<String> = values.into_iter().map(|v| v.to_string()).collect();
        if !vs.is_empty() {
            self.attributes.entry(name.to_string()).or_default().extend(vs);
        }
        self
    }

    /// Values of an attribute, matched case-insensitively. Empty when absent.
    pub fn values(&self, name: &str) -> &[String] {
        self.attributes
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn first(&self, name: &str) -> Option<&str> {
        self.values(name).first().map(String::as_str)
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.object_classes.iter().any(|c| c.eq_ignore_ascii_case(class))
    }

    pub fn write_ldif(&self, out: &mut String) {
        use std::fmt::Write;
        let _ = writeln!(out, "dn: {}", self.dn);
        for c in &self.object_classes {
            let _ = writeln!(out, "objectClass: {c}");
        }
        for (k, vs) in &self.attributes {
            for v in vs {
                let _ = writeln!(out, "{k}: {v}");
            }
        }
    }
}

/// Produces entries on demand from live state (the information-provider role).
pub type ProviderFn = Arc<dyn Fn(u64) -> Vec<DirectoryEntry> + Send + Sync>;

#[derive(Clone)]
pub enum SourceKind {
    Static(Vec<DirectoryEntry>),
    Provider(ProviderFn),
}

impl fmt::Debug for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceKind::Static(es) => write!(f, "Static({} entries)", es.len()),
            SourceKind::Provider(_) => f.write_str("Provider"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InfoSource {
    pub id: String,
    pub kind: SourceKind,
    pub refresh_period: u64,
}

impl InfoSource {
    pub fn static_entries(id: &str, entries: Vec<DirectoryEntry>) -> Self {
        Self { id: id.to_string(), kind: SourceKind::Static(entries), refresh_period: super::DEFAULT_REFRESH_PERIOD }
    }

    pub fn provider(id: &str, f: ProviderFn) -> Self {
        Self { id: id.to_string(), kind: SourceKind::Provider(f), refresh_period: super::DEFAULT_REFRESH_PERIOD }
    }

    /// Entries this source currently contributes, stamped with its id.
    pub fn produce(&self, now: u64) -> Vec<DirectoryEntry> {
        let mut entries = match &self.kind {
            SourceKind::Static(es) => es.clone(),
            SourceKind::Provider(f) => f(now),
        };
        for e in &mut entries {
            e.source_id = self.id.clone();
        }
        entries
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<(DirectoryEntry, SchemaViolation)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Base,
    Subtree,
}

/// Newer publication wins; equal timestamps go to the smaller source id.
fn supersedes(candidate: &DirectoryEntry, current: &DirectoryEntry) -> bool {
    match candidate.published_at.cmp(&current.published_at) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => candidate.source_id <= current.source_id,
    }
}

/// Merges `entries` into `into` under the collision rule.
pub(crate) fn merge_entries(into: &mut BTreeMap<DistinguishedName, DirectoryEntry>, entries: impl IntoIterator<Item = DirectoryEntry>) {
    for e in entries {
        match into.get(&e.dn) {
            Some(cur) if !supersedes(&e, cur) => {}
            _ => {
                into.insert(e.dn.clone(), e);
            }
        }
    }
}

/// An in-memory directory holding one schema's worth of entries.
///
/// Mutations replace the entry map wholesale; [`Directory::snapshot`] hands
/// out a cheap immutable view that can move to other threads.
#[derive(Debug, Clone)]
pub struct Directory {
    schema: Arc<Schema>,
    entries: Arc<BTreeMap<DistinguishedName, DirectoryEntry>>,
}

impl Directory {
    pub fn new(schema: Arc<Schema>) -> Self {
        Self { schema, entries: Arc::new(BTreeMap::new()) }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    /// Rebuilds the directory from every source. All sources contribute;
    /// invalid entries land in the report and never abort the batch.
    pub fn load_sources(&mut self, sources: &[InfoSource], now: u64) -> Result<IngestReport, InfoError> {
        let mut seen = BTreeSet::new();
        for s in sources {
            if !seen.insert(s.id.as_str()) {
                return Err(InfoError::DuplicateSourceId(s.id.clone()));
            }
        }
        let mut report = IngestReport::default();
        let mut map = BTreeMap::new();
        for source in sources {
            let mut valid = Vec::new();
            for entry in source.produce(now) {
                match self.schema.validate(&entry) {
                    Ok(e) => {
                        report.accepted += 1;
                        valid.push(e);
                    }
                    Err(why) => report.rejected.push((entry, why)),
                }
            }
            merge_entries(&mut map, valid);
        }
        self.entries = Arc::new(map);
        Ok(report)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &DirectoryEntry> {
        self.entries.values()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { schema: self.schema.clone(), entries: self.entries.clone() }
    }

    pub fn search(&self, base: &DistinguishedName, scope: Scope, filter: &QueryFilter) -> Vec<DirectoryEntry> {
        search_map(&self.entries, &self.schema, base, scope, filter)
    }

    pub fn to_ldif(&self) -> String {
        to_ldif(self.entries.values())
    }
}

/// Read-only view of a directory at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    schema: Arc<Schema>,
    entries: Arc<BTreeMap<DistinguishedName, DirectoryEntry>>,
}

impl Snapshot {
    pub fn search(&self, base: &DistinguishedName, scope: Scope, filter: &QueryFilter) -> Vec<DirectoryEntry> {
        search_map(&self.entries, &self.schema, base, scope, filter)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) fn in_scope(dn: &DistinguishedName, base: &DistinguishedName, scope: Scope) -> bool {
    match scope {
        Scope::Base => dn == base,
        Scope::Subtree => dn.is_within(base),
    }
}

fn search_map(
    entries: &BTreeMap<DistinguishedName, DirectoryEntry>,
    schema: &Schema,
    base: &DistinguishedName,
    scope: Scope,
    filter: &QueryFilter,
) -> Vec<DirectoryEntry> {
    // BTreeMap order is already the rendered-dn order
    entries
        .values()
        .filter(|e| in_scope(&e.dn, base, scope) && filter.matches(e, schema))
        .cloned()
        .collect()
}

pub fn to_ldif<'a>(entries: impl IntoIterator<Item = &'a DirectoryEntry>) -> String {
    let mut out = String::new();
    for (i, e) in entries.into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        e.write_ldif(&mut out);
    }
    out
}
