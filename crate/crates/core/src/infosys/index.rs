use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::directory::{in_scope, merge_entries};
use super::{Directory, DirectoryEntry, DistinguishedName, InfoError, InfoSource, IngestReport, QueryFilter, Schema, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IndexLevel {
    Gris,
    SiteGiis,
    TopGiis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub last_seen: u64,
    pub ttl: u64,
}

impl Registration {
    pub fn is_fresh(&self, now: u64) -> bool {
        self.last_seen.saturating_add(self.ttl) >= now
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexNode {
    pub id: String,
    pub level: IndexLevel,
    pub registrants: BTreeMap<String, Registration>,
    pub backup_of: Option<String>,
}

/// The publisher/index hierarchy: every node owns a local directory, and a
/// node's search view is its own entries plus the views of its live,
/// freshly-registered children.
#[derive(Debug, Clone)]
pub struct InfoSystem {
    schema: Arc<Schema>,
    nodes: BTreeMap<String, IndexNode>,
    local: BTreeMap<String, Directory>,
    down: BTreeSet<String>,
}

impl InfoSystem {
    pub fn new(schema: Arc<Schema>) -> Self {
        Self { schema, nodes: BTreeMap::new(), local: BTreeMap::new(), down: BTreeSet::new() }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn add_node(&mut self, id: &str, level: IndexLevel, backup_of: Option<&str>) -> Result<(), InfoError> {
        if self.nodes.contains_key(id) {
            return Err(InfoError::DuplicateNode(id.to_string()));
        }
        if let Some(p) = backup_of {
            self.require(p)?;
        }
        self.nodes.insert(
            id.to_string(),
            IndexNode { id: id.to_string(), level, registrants: BTreeMap::new(), backup_of: backup_of.map(str::to_string) },
        );
        self.local.insert(id.to_string(), Directory::new(self.schema.clone()));
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&IndexNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &IndexNode> {
        self.nodes.values()
    }

    fn require(&self, id: &str) -> Result<&IndexNode, InfoError> {
        self.nodes.get(id).ok_or_else(|| InfoError::UnknownNode(id.to_string()))
    }

    pub fn local_directory(&self, id: &str) -> Result<&Directory, InfoError> {
        self.local.get(id).ok_or_else(|| InfoError::UnknownNode(id.to_string()))
    }

    /// Replaces a node's own entries with what `sources` produce now.
    pub fn load_sources(&mut self, id: &str, sources: &[InfoSource], now: u64) -> Result<IngestReport, InfoError> {
        let dir = self.local.get_mut(id).ok_or_else(|| InfoError::UnknownNode(id.to_string()))?;
        dir.load_sources(sources, now)
    }

    /// Records (or refreshes) `child` as a registrant of `node`.
    pub fn register(&mut self, node: &str, child: &str, ttl: u64, now: u64) -> Result<(), InfoError> {
        self.require(node)?;
        self.require(child)?;
        if node == child || self.reaches(child, node) {
            return Err(InfoError::CycleDetected { node: node.to_string(), child: child.to_string() });
        }
        self.nodes
            .get_mut(node)
            .expect("checked")
            .registrants
            .insert(child.to_string(), Registration { last_seen: now, ttl });
        Ok(())
    }

    /// Whether `target` is among `from`'s transitive registrants.
    fn reaches(&self, from: &str, target: &str) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            if let Some(node) = self.nodes.get(n) {
                for child in node.registrants.keys() {
                    if child == target {
                        return true;
                    }
                    stack.push(child);
                }
            }
        }
        false
    }

    pub fn set_down(&mut self, id: &str, down: bool) {
        if down {
            self.down.insert(id.to_string());
        } else {
            self.down.remove(id);
        }
    }

    pub fn is_down(&self, id: &str) -> bool {
        self.down.contains(id)
    }

    pub fn registration(&self, node: &str, child: &str) -> Option<Registration> {
        self.nodes.get(node)?.registrants.get(child).copied()
    }

    /// Aggregated search at `node`.
    pub fn search(
        &self,
        node: &str,
        base: &DistinguishedName,
        scope: Scope,
        filter: &QueryFilter,
        now: u64,
    ) -> Result<Vec<DirectoryEntry>, InfoError> {
        self.require(node)?;
        if self.is_down(node) {
            return Err(InfoError::NodeDown(node.to_string()));
        }
        let mut visited = BTreeSet::new();
        let mut merged = BTreeMap::new();
        self.collect(node, now, &mut visited, &mut merged);
        Ok(merged
            .into_values()
            .filter(|e| in_scope(&e.dn, base, scope) && filter.matches(e, &self.schema))
            .collect())
    }

    fn collect<'a>(
        &'a self,
        node: &'a str,
        now: u64,
        visited: &mut BTreeSet<&'a str>,
        out: &mut BTreeMap<DistinguishedName, DirectoryEntry>,
    ) {
        if !visited.insert(node) {
            return;
        }
        if let Some(dir) = self.local.get(node) {
            merge_entries(out, dir.entries().cloned());
        }
        if let Some(n) = self.nodes.get(node) {
            for (child, reg) in &n.registrants {
                if reg.is_fresh(now) && !self.is_down(child) {
                    self.collect(child, now, visited, out);
                }
            }
        }
    }

    /// The top index a broker should query: the primary unless it is down.
    pub fn effective_top(&self, primary: &str, backup: &str) -> Result<String, InfoError> {
        for id in [primary, backup] {
            let n = self.require(id)?;
            if n.level != IndexLevel::TopGiis {
                return Err(InfoError::NotTopLevel(id.to_string()));
            }
        }
        if !self.is_down(primary) {
            Ok(primary.to_string())
        } else if !self.is_down(backup) {
            Ok(backup.to_string())
        } else {
            Err(InfoError::AllIndexesDown)
        }
    }
}
